//! Positive ground states by Nehari-projected descent and Newton polish.

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::{SolveReport, SolverOptions, Workspace};
use crate::error::{Error, Result};
use crate::functional::{nehari_closed_form, residual_unchecked};
use crate::grid::{par_map_indices, CoefficientPair, GridField, PeriodicGrid};
use crate::scalar::Real;

/// Undershoot below which the positivity monitor intervenes.
const POSITIVITY_SLACK: f64 = 1e-8;
const MAX_HALVINGS: usize = 50;
/// Newton never shrinks a positive site below this fraction of its value.
const FRACTION_TO_BOUNDARY: f64 = 0.1;

fn initial_bump<T: Real>(grid: &PeriodicGrid, opts: &SolverOptions) -> Result<GridField<T>> {
    let center = match &opts.init_center {
        Some(c) => grid.snap(c)?,
        None => [0; 3],
    };
    let w2 = T::lit(2.0 * opts.init_width * opts.init_width);
    let values = par_map_indices(grid.sites(), |i| {
        let d = grid.site_distance::<T>(i, &center);
        (-(d * d) / w2).exp()
    });
    Ok(GridField::from_vec(*grid, values))
}

/// Rescales a nonnegative field onto the Nehari manifold and returns it with
/// its energy there.
fn project<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>) -> Result<(GridField<T>, T)> {
    let n = nehari_closed_form(u, pair)?;
    Ok((u.scaled(n.t_u), n.energy_at_t))
}

/// `u + δ` with each positive site kept above a fixed fraction of its value
/// and other sites kept nonnegative.
pub(crate) fn fraction_to_boundary<T: Real>(
    u: &GridField<T>,
    step: &GridField<T>,
    alpha: T,
) -> GridField<T> {
    let keep = T::lit(FRACTION_TO_BOUNDARY);
    u.zip_map(step, |x, s| {
        let y = x + alpha * s;
        if x > T::zero() {
            y.max(keep * x)
        } else {
            y.max(T::zero())
        }
    })
}

struct Monitor {
    clamped: bool,
    warnings: Vec<String>,
}

impl Monitor {
    fn check<T: Real>(&mut self, u: &mut GridField<T>) -> Result<()> {
        let min = u.min_value();
        if min >= -T::lit(POSITIVITY_SLACK) {
            return Ok(());
        }
        if self.clamped {
            return Err(Error::Solver(format!(
                "iterate lost positivity again (min {min})"
            )));
        }
        self.clamped = true;
        let msg = format!("iterate undershot to {min}; clamped to zero");
        warn!("{msg}");
        self.warnings.push(msg);
        *u = u.positive_part();
        Ok(())
    }
}

enum NewtonExit {
    Converged,
    Diverged,
    Budget,
}

/// Damped Newton on the residual norm. Returns the iterate reached and how
/// the phase ended.
fn newton_phase<T: Real>(
    ws: &Workspace<'_, T>,
    mut u: GridField<T>,
    opts: &SolverOptions,
    budget: usize,
    iterations: &mut usize,
) -> Result<(GridField<T>, NewtonExit)> {
    let tol = T::lit(opts.tol);
    let mut r = residual_unchecked(&u, ws.pair);
    let mut rn = r.l2_norm();
    let mut failures = 0;
    for _ in 0..budget {
        if rn <= tol {
            return Ok((u, NewtonExit::Converged));
        }
        let step = ws.newton_direction(&u, &r, opts)?;
        *iterations += 1;
        let mut alpha = T::one();
        let mut accepted = None;
        for _ in 0..30 {
            let cand = fraction_to_boundary(&u, &step, alpha);
            let rc = residual_unchecked(&cand, ws.pair);
            let rcn = rc.l2_norm();
            if rcn < rn {
                accepted = Some((cand, rc, rcn));
                break;
            }
            alpha = alpha * T::lit(0.5);
        }
        match accepted {
            Some((cand, rc, rcn)) => {
                debug!("newton: |r| {rn:e} -> {rcn:e} (alpha {alpha})");
                u = cand;
                r = rc;
                rn = rcn;
                failures = 0;
            }
            None => {
                failures += 1;
                if failures >= 2 {
                    return Ok((u, NewtonExit::Diverged));
                }
            }
        }
    }
    let exit = if rn <= tol {
        NewtonExit::Converged
    } else {
        NewtonExit::Budget
    };
    Ok((u, exit))
}

/// Computes a positive ground state of `J_L` on the grid of `pair`.
///
/// Nehari-projected steepest descent in the `E` metric, with Armijo
/// backtracking on `u ↦ max_t J(t u)`, runs until the residual drops
/// below `opts.newton_switch`; damped Newton then polishes to `opts.tol`.
/// Both phases keep iterates strictly positive: no site falls below a fixed
/// fraction of its previous value in one step.
pub fn ground_state<T: Real>(
    pair: &CoefficientPair<T>,
    opts: &SolverOptions,
) -> Result<SolveReport<T>> {
    opts.validate()?;
    let ws = Workspace::new(pair)?;
    let grid = *pair.grid();
    let (mut u, mut level) = project(&initial_bump(&grid, opts)?, pair)?;
    let mut monitor = Monitor {
        clamped: false,
        warnings: Vec::new(),
    };
    let tol = T::lit(opts.tol);
    let armijo = T::lit(opts.armijo);
    let rtol = T::lit(opts.krylov_rtol);
    let mut switch = T::lit(opts.newton_switch);
    let (mut descent_it, mut newton_it) = (0usize, 0usize);
    let mut alpha = T::one();

    while descent_it + newton_it < opts.max_iter {
        monitor.check(&mut u)?;
        let r = residual_unchecked(&u, pair);
        let rn = r.l2_norm();
        if rn <= tol {
            break;
        }
        if rn < switch {
            let budget = opts
                .newton_max_iter
                .min(opts.max_iter - descent_it - newton_it);
            let (next, exit) = newton_phase(&ws, u.clone(), opts, budget, &mut newton_it)?;
            match exit {
                NewtonExit::Converged => {
                    u = next;
                    break;
                }
                NewtonExit::Diverged | NewtonExit::Budget => {
                    let msg = format!("Newton stalled at |r| = {rn:e}; resuming descent");
                    warn!("{msg}");
                    monitor.warnings.push(msg);
                    let (p, l) = project(&next.positive_part(), pair)?;
                    if l <= level {
                        u = p;
                        level = l;
                    }
                    switch = switch * T::lit(0.1);
                    continue;
                }
            }
        }

        let w = ws.riesz(&r, rtol)?;
        let slope = r.l2_dot(&w);
        alpha = (alpha * T::lit(2.0)).min(T::lit(4.0));
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = fraction_to_boundary(&u, &w, -alpha);
            if cand.max_value() > T::zero() {
                let (p, l) = project(&cand, pair)?;
                if l <= level - armijo * alpha * slope {
                    u = p;
                    level = l;
                    accepted = true;
                    break;
                }
            }
            alpha = alpha * T::lit(0.5);
        }
        descent_it += 1;
        if !accepted {
            // the descent direction no longer resolves any decrease; let Newton try
            if switch < T::infinity() && rn < T::lit(opts.newton_switch) * T::lit(1e2) {
                switch = T::infinity();
                continue;
            }
            return Err(Error::Solver(format!(
                "line search stalled at |r| = {rn:e}"
            )));
        }
    }

    let report = SolveReport::assess(u, pair, opts, descent_it, newton_it, monitor.warnings);
    if !report.converged {
        warn!(
            "ground state not converged: |r| = {}, gap = {}, min = {}",
            report.residual_l2, report.identity_gap, report.positivity_min
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct BLimitRow<T> {
    pub halfwidth: usize,
    pub level: T,
    pub report: SolveReport<T>,
}

/// Ground-state level `b_L` for each half-width, at the dimension and
/// resolution of `pair`. Solves run concurrently when `concurrent` is set;
/// the results do not depend on it.
pub fn b_of_l<T: Real>(
    pair: &CoefficientPair<T>,
    halfwidths: &[usize],
    opts: &SolverOptions,
    concurrent: bool,
) -> Result<Vec<BLimitRow<T>>> {
    let base = pair.grid();
    let solve = |&l: &usize| -> Result<BLimitRow<T>> {
        let grid = PeriodicGrid::new(base.dim(), l, base.points_per_unit())?;
        let p = pair.resample(&grid)?;
        let report = ground_state(&p, opts)?;
        Ok(BLimitRow {
            halfwidth: l,
            level: report.energy.total,
            report,
        })
    };
    if concurrent {
        halfwidths.par_iter().map(solve).collect()
    } else {
        halfwidths.iter().map(solve).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_coefficients, CoefficientSpec};

    fn constant_pair(dim: usize, l: usize, m: usize) -> CoefficientPair<f64> {
        let g = PeriodicGrid::new(dim, l, m).unwrap();
        sample_coefficients(&g, &CoefficientSpec::Constant { v: 1.0, q: 1.0 }).unwrap()
    }

    #[test]
    fn gausson_1d() {
        let p = constant_pair(1, 8, 32);
        let rep = ground_state(&p, &SolverOptions::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        let level = 0.5 * std::f64::consts::E.powi(2) * std::f64::consts::PI.sqrt();
        assert!((rep.energy.total - level).abs() < 5e-3);
        let exact = GridField::from_fn(*p.grid(), |x: &[f64]| (1.0 - 0.5 * x[0] * x[0]).exp());
        assert!(rep.field.sub(&exact).sup_norm() < 5e-3);
        assert!(rep.positivity_min > 0.0);
        assert!((rep.nehari_t - 1.0).abs() < 1e-8);
    }

    #[test]
    fn off_center_start_converges_to_translate() {
        let p = constant_pair(1, 6, 16);
        let opts = SolverOptions {
            init_center: Some(vec![1.0]),
            ..Default::default()
        };
        let rep = ground_state(&p, &opts).unwrap();
        assert!(rep.converged);
        let at_origin = ground_state(&p, &SolverOptions::default()).unwrap();
        let shifted = at_origin.field.translated(&[16, 0, 0]);
        assert!(rep.field.sub(&shifted).sup_norm() < 1e-7);
    }

    #[test]
    fn rejects_nonpositive_potential() {
        let g = PeriodicGrid::new(1, 4, 8).unwrap();
        let p =
            sample_coefficients::<f64>(&g, &CoefficientSpec::Constant { v: -1.0, q: 1.0 }).unwrap();
        assert!(ground_state(&p, &SolverOptions::default()).is_err());
    }
}
