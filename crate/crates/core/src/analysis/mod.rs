//! Concentration diagnostics: windowed `L^q` indicators, bump decomposition,
//! decay fits and cross-`L` stability.

mod decay;
mod decompose;
mod lq;
mod stability;

pub use decay::{decay_fit, linf_smallness, DecayFit, LinfSmallness};
pub use decompose::{
    decompose_bumps, energy_splitting_check, BumpDecomposition, DEFAULT_THRESHOLD,
};
pub use lq::{
    calibrate_lq_constant, concentration_indicator, windowed_lq_bound_check, FieldRecipe, LqBound,
    LqCalibration, LqCorpus,
};
pub use stability::{cross_l_stability, windowed_distance, CrossLRow, CrossLTable};

use crate::grid::{GridField, LatticePoint, PeriodicGrid};
use crate::scalar::Real;

/// Torus distance from each site to the nearest of `centers`.
pub(crate) fn distance_to_set(grid: &PeriodicGrid, centers: &[LatticePoint]) -> Vec<f64> {
    crate::grid::par_map_indices(grid.sites(), |i| {
        let p = grid.lattice_point(i);
        centers
            .iter()
            .map(|c| grid.torus_distance(&p, c))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Largest `|u|` over the given sites, or zero when there are none.
pub(crate) fn max_abs_over<T: Real>(u: &GridField<T>, sites: impl Iterator<Item = usize>) -> T {
    let v = u.values();
    sites.fold(T::zero(), |m, i| m.max(v[i].abs()))
}
