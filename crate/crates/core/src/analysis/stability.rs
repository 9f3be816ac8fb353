//! The same multi-bump problem solved on growing tori.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::annular_norm;
use crate::grid::{ball_mask, CoefficientPair, GridField, LatticePoint, PeriodicGrid};
use crate::scalar::Real;
use crate::solver::{ground_state, solve_multibump, GlueSpec, MultibumpOptions, SolverOptions};

/// `E` norm of `a - b` on the open ball of radius `radius` around `center`,
/// counting edges with both ends in the ball. The fields may live on tori of
/// different size but must share dimension and resolution; sites are matched
/// by lattice point.
pub fn windowed_distance<T: Real>(
    a: &GridField<T>,
    pair_a: &CoefficientPair<T>,
    b: &GridField<T>,
    center: &LatticePoint,
    radius: f64,
) -> Result<T> {
    let (ga, gb) = (*a.grid(), *b.grid());
    ga.check_same(pair_a.grid())?;
    if ga.dim() != gb.dim() || ga.points_per_unit() != gb.points_per_unit() {
        return Err(Error::GridMismatch(format!(
            "cannot compare {ga:?} with {gb:?}"
        )));
    }
    let limit = ga.halfwidth().min(gb.halfwidth()) as f64;
    if !(radius > 0.0 && radius <= limit) {
        return Err(Error::InvalidGeometry(format!(
            "window radius {radius} must lie in (0, {limit}]"
        )));
    }
    let (va, vb) = (a.values(), b.values());
    let diff: Vec<T> = (0..ga.sites())
        .map(|i| va[i] - vb[gb.site_of(&ga.lattice_point(i))])
        .collect();
    let diff = GridField::new(ga, diff)?;
    annular_norm(&diff, pair_a, &ball_mask(&ga, radius, center))
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossLRow<T> {
    pub halfwidth: usize,
    pub energy: T,
    pub residual_l2: T,
    pub converged: bool,
    /// Windowed distance to the solution on the previous (smaller) torus.
    pub distance_to_previous: Option<T>,
    /// `|J - reference|` when a reference level is given.
    pub level_gap: Option<T>,
    #[serde(skip)]
    pub field: GridField<T>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossLTable<T> {
    pub window_radius: f64,
    pub rows: Vec<CrossLRow<T>>,
}

/// True when each value is below the previous one or both are within `floor`
/// (differences below the floor are not resolved).
fn decreasing_above_floor(values: &[f64], floor: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= floor && w[1] <= floor))
}

impl<T: Real> CrossLTable<T> {
    pub fn distances(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.distance_to_previous.map(|d| d.as_f64()))
            .collect()
    }

    pub fn level_gaps(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.level_gap.map(|d| d.as_f64()))
            .collect()
    }

    pub fn distances_decreasing(&self, floor: f64) -> bool {
        decreasing_above_floor(&self.distances(), floor)
    }

    pub fn level_gaps_decreasing(&self, floor: f64) -> bool {
        decreasing_above_floor(&self.level_gaps(), floor)
    }
}

/// Solves the multi-bump problem given by `family` on the torus of each
/// half-width (sorted ascending) at the dimension and resolution of `base`,
/// each from the ground state on that torus, and compares successive solutions
/// on the ball of radius `window` around the origin.
pub fn cross_l_stability<T: Real>(
    base: &CoefficientPair<T>,
    family: impl Fn(&PeriodicGrid) -> Result<GlueSpec>,
    halfwidths: &[usize],
    window: f64,
    reference: Option<T>,
    opts: &SolverOptions,
    mb: &MultibumpOptions,
) -> Result<CrossLTable<T>> {
    let mut ls = halfwidths.to_vec();
    ls.sort_unstable();
    let mut rows: Vec<CrossLRow<T>> = Vec::with_capacity(ls.len());
    let mut prev: Option<(GridField<T>, CoefficientPair<T>)> = None;
    for l in ls {
        let grid = PeriodicGrid::new(base.grid().dim(), l, base.grid().points_per_unit())?;
        let pair = base.resample(&grid)?;
        let ground = ground_state(&pair, opts)?;
        let spec = family(&grid)?;
        let rep = solve_multibump(&spec, &pair, &[&ground.field], opts, mb)?;
        let field = rep.solve.field.clone();
        let distance_to_previous = match &prev {
            Some((f, p)) => Some(windowed_distance(f, p, &field, &[0; 3], window)?),
            None => None,
        };
        let energy = rep.solve.energy.total;
        rows.push(CrossLRow {
            halfwidth: l,
            energy,
            residual_l2: rep.solve.residual_l2,
            converged: rep.solve.converged,
            distance_to_previous,
            level_gap: reference.map(|r| (energy - r).abs()),
            field: field.clone(),
        });
        prev = Some((field, pair));
    }
    Ok(CrossLTable {
        window_radius: window,
        rows,
    })
}
