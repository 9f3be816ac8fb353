//! Greedy extraction of windowed bumps.

use serde::Serialize;

use super::distance_to_set;
use crate::error::{Error, Result};
use crate::functional::energy;
use crate::grid::{cutoff_field, inner_product_el, CoefficientPair, GridField, LatticePoint};
use crate::scalar::Real;

/// Default peak threshold, half the truncation scale `e⁻¹`.
pub const DEFAULT_THRESHOLD: f64 = 0.5 / std::f64::consts::E;

#[derive(Debug, Clone, Serialize)]
pub struct BumpDecomposition<T> {
    pub radius: f64,
    pub threshold: f64,
    pub centers: Vec<LatticePoint>,
    /// `ψ_R(· - y) ⊙ (running remainder)` at each extraction.
    #[serde(skip)]
    pub profiles: Vec<GridField<T>>,
    /// `J_L` of each profile.
    pub energies: Vec<T>,
    /// `‖u - Σ profiles‖_E`
    pub remainder_norm: T,
    pub pairwise_distances: Vec<Vec<f64>>,
    /// `J_L(u)`
    pub total_energy: T,
}

/// Repeatedly takes the largest value of the running remainder outside the
/// radius-`R` balls around the centers found so far and, while it exceeds
/// `threshold`, removes the `ψ_R` window around it.
///
/// A peak above the threshold closer than `2R` to an existing center means
/// the bumps are not resolved at this `R` and is reported as an error. A
/// field with `max u ≤ threshold` yields an empty decomposition.
pub fn decompose_bumps<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    radius: f64,
    threshold: f64,
) -> Result<BumpDecomposition<T>> {
    u.grid().check_same(pair.grid())?;
    if !(radius >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "R = {radius} must be at least 1"
        )));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} must be positive"
        )));
    }
    let grid = *u.grid();
    let base = cutoff_field::<T>(&grid, radius, &[0; 3])?;
    let thr = T::lit(threshold);
    let mut work = u.clone();
    let mut centers: Vec<LatticePoint> = Vec::new();
    let mut profiles = Vec::new();
    loop {
        let dist = distance_to_set(&grid, &centers);
        let mut best: Option<(T, usize)> = None;
        for (i, &x) in work.values().iter().enumerate() {
            if dist[i] >= radius && best.is_none_or(|(b, _)| x > b) {
                best = Some((x, i));
            }
        }
        let Some((peak, site)) = best else { break };
        if peak <= thr {
            break;
        }
        if dist[site] < 2.0 * radius {
            let p = grid.lattice_point(site);
            let existing = (0..centers.len())
                .min_by(|&a, &b| {
                    grid.torus_distance(&p, &centers[a])
                        .total_cmp(&grid.torus_distance(&p, &centers[b]))
                })
                .unwrap_or(0);
            return Err(Error::Unresolved {
                radius,
                distance: dist[site],
                existing,
            });
        }
        let c = grid.lattice_point(site);
        let window = crate::grid::translate(&base, &c);
        let profile = window.zip_map(&work, |a, b| a * b);
        work = work.sub(&profile);
        centers.push(c);
        profiles.push(profile);
    }
    let energies = profiles
        .iter()
        .map(|p| energy(p, pair).map(|e| e.total))
        .collect::<Result<Vec<_>>>()?;
    let remainder_norm = inner_product_el(&work, &work, pair)?.max(T::zero()).sqrt();
    let pairwise_distances = centers
        .iter()
        .map(|a| centers.iter().map(|b| grid.torus_distance(a, b)).collect())
        .collect();
    Ok(BumpDecomposition {
        radius,
        threshold,
        centers,
        profiles,
        energies,
        remainder_norm,
        pairwise_distances,
        total_energy: energy(u, pair)?.total,
    })
}

/// `|total - Σ energies|`
pub fn energy_splitting_check<T: Real>(dec: &BumpDecomposition<T>, total: T) -> T {
    let sum = dec.energies.iter().fold(T::zero(), |s, &e| s + e);
    (total - sum).abs()
}
