//! Minimization of the energy over the sites of a mask with the values off
//! the mask held fixed.
//!
//! The objective is `J_L` as a function of the masked values only, i.e. every
//! site term inside the mask and every edge with at least one endpoint inside
//! it. Edges leaving the mask carry the boundary data; without them the masked
//! problem would decouple from the fixed values.

use log::{debug, warn};
use serde::Serialize;

use super::{linalg, SolverOptions, Workspace};
use crate::error::{Error, Result};
use crate::functional::{annular_energy, annular_norm, energy_unchecked, residual_unchecked};
use crate::grid::{reduce, CoefficientPair, GridField, TorusMask};
use crate::nonlinearity::{F, H};
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize)]
pub struct AnnulusReport<T> {
    #[serde(skip)]
    pub field: GridField<T>,
    pub iterations: usize,
    /// `L²` norm of the residual restricted to the mask.
    pub masked_residual: T,
    pub energy_before: T,
    pub energy_after: T,
    pub annular_energy_before: T,
    pub annular_energy_after: T,
    pub annular_norm_after: T,
    /// `annular_norm_after < r0`
    pub norm_below_r0: bool,
}

fn masked_l2<T: Real>(r: &GridField<T>, idx: &[usize]) -> T {
    let v = r.values();
    (reduce::sum_by(idx.len(), |k| v[idx[k]] * v[idx[k]]) * r.grid().cell_volume::<T>()).sqrt()
}

/// The part of `J_L` that depends on the masked values: site terms on the
/// mask and every edge term with an endpoint on it. Differences of this sum
/// equal differences of `J_L` but are not swamped by the rounding of the bulk.
fn local_energy<T: Real>(
    v: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
    idx: &[usize],
) -> T {
    let grid = v.grid();
    let (x, vv, q, m) = (
        v.values(),
        pair.v().values(),
        pair.q().values(),
        mask.as_slice(),
    );
    let inv_h = T::from_usize_lossy(grid.points_per_unit());
    let half = T::lit(0.5);
    let per_site = |k: usize| {
        let i = idx[k];
        let mut s = half * vv[i] * x[i] * x[i] + q[i] * (H(x[i]) - F(x[i]));
        for a in 0..grid.dim() {
            let fwd = grid.neighbor(i, a, true);
            let d = (x[fwd] - x[i]) * inv_h;
            s = s + half * d * d;
            let bwd = grid.neighbor(i, a, false);
            if !m[bwd] {
                let d = (x[i] - x[bwd]) * inv_h;
                s = s + half * d * d;
            }
        }
        s
    };
    reduce::sum_by(idx.len(), per_site) * grid.cell_volume::<T>()
}

/// Masked residual tolerance, absolute.
const MASKED_TOL: f64 = 1e-12;

/// Minimizes over fields equal to `u` off the mask, starting from `u`.
///
/// Requires `‖u‖_{E(A)} ≤ r0` and `J_A(u) ≤ ρ < r0²/4`.
pub fn annulus_minimize<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
    r0: f64,
    rho: f64,
    opts: &SolverOptions,
) -> Result<AnnulusReport<T>> {
    annulus_minimize_from(u, u, pair, mask, r0, rho, opts)
}

/// As [`annulus_minimize`], starting from `init` on the mask.
pub fn annulus_minimize_from<T: Real>(
    u: &GridField<T>,
    init: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
    r0: f64,
    rho: f64,
    opts: &SolverOptions,
) -> Result<AnnulusReport<T>> {
    u.grid().check_same(pair.grid())?;
    u.grid().check_same(mask.grid())?;
    u.grid().check_same(init.grid())?;
    if !(rho > 0.0 && rho < 0.25 * r0 * r0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < ρ < r0²/4, got ρ = {rho}, r0 = {r0}"
        )));
    }
    let norm0 = annular_norm(u, pair, mask)?;
    let ja0 = annular_energy(u, pair, mask)?;
    if norm0 > T::lit(r0) {
        return Err(Error::InvalidArgument(format!(
            "annular norm {norm0} exceeds r0 = {r0}"
        )));
    }
    if ja0 > T::lit(rho) {
        return Err(Error::InvalidArgument(format!(
            "annular energy {ja0} exceeds ρ = {rho}"
        )));
    }
    let ws = Workspace::new(pair)?;
    let idx = mask.indices();
    let energy_before = energy_unchecked(u, pair).total;

    // start from init on the mask, u elsewhere
    let mut v = u.clone();
    {
        let (vv, iv) = (v.values_mut(), init.values());
        for &i in &idx {
            vv[i] = iv[i];
        }
    }
    if idx.is_empty() {
        return finish(u, v, pair, mask, r0, energy_before, ja0, 0, T::zero());
    }
    // with nonnegative data every term of J is no larger at |v| than at v, so
    // candidates are reflected; this keeps the minimizer nonnegative
    let reflect = mask
        .as_slice()
        .iter()
        .zip(u.values())
        .all(|(&m, &x)| m || x >= T::zero());
    if reflect {
        v = v.map(|x| x.abs());
    }
    let mut level = local_energy(&v, pair, mask, &idx);
    let tol = T::lit(MASKED_TOL);
    let dim = u.grid().dim();
    let stencil =
        T::lit(2.0 * dim as f64) * T::from_usize_lossy(u.grid().points_per_unit()).powi(2);
    let w = u.grid().cell_volume::<T>();
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < opts.newton_max_iter {
        let r = residual_unchecked(&v, pair);
        let rn = masked_l2(&r, &idx);
        if rn <= tol {
            break;
        }
        let diag = ws.jacobian_diag(&v);
        let embed = |x: &[T]| {
            let mut full = vec![T::zero(); v.len()];
            for (k, &i) in idx.iter().enumerate() {
                full[i] = x[k];
            }
            full
        };
        let apply = |x: &[T]| {
            let y = ws.apply_jacobian(&diag, &embed(x));
            idx.iter().map(|&i| y[i]).collect::<Vec<T>>()
        };
        let jacobi: Vec<T> = idx
            .iter()
            .map(|&i| T::one() / (stencil + diag[i]).abs())
            .collect();
        let precond = |x: &[T]| {
            x.iter()
                .zip(&jacobi)
                .map(|(&a, &b)| a * b)
                .collect::<Vec<T>>()
        };
        let rhs: Vec<T> = idx.iter().map(|&i| -r.values()[i]).collect();
        let out = linalg::pcg(
            apply,
            precond,
            &rhs,
            T::lit(opts.krylov_rtol),
            opts.krylov_max_iter,
        );
        if !out.converged && !(out.rel_residual < T::lit(1e-6)) {
            return Err(Error::Solver(format!(
                "annulus Newton system not solved ({} iterations, residual {:e}); r0 is likely miscalibrated",
                out.iterations,
                out.rel_residual.as_f64()
            )));
        }
        let step = embed(&out.x);
        // directional derivative of J along the step
        let slope = reduce::sum_by(idx.len(), |k| r.values()[idx[k]] * out.x[k]) * w;
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = v.zip_map(&GridField::from_vec(*v.grid(), step.clone()), |a, s| {
                a + alpha * s
            });
            if reflect {
                cand = cand.map(|x| x.abs());
            }
            let e = local_energy(&cand, pair, mask, &idx);
            if e <= level + T::lit(1e-4) * alpha * slope {
                v = cand;
                level = e;
                accepted = true;
                break;
            }
            alpha = alpha * T::lit(0.5);
        }
        iterations += 1;
        debug!("annulus newton {iterations}: masked |r| {rn:e}, alpha {alpha}");
        if !accepted {
            // the energy is flat to rounding along the Newton direction
            stalled += 1;
            if stalled >= 2 {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    let r = residual_unchecked(&v, pair);
    let rn = masked_l2(&r, &idx);
    if rn > T::lit(1e-8) {
        return Err(Error::Solver(format!(
            "annulus minimization did not converge (masked residual {:e}); r0 is likely miscalibrated",
            rn.as_f64()
        )));
    }
    finish(u, v, pair, mask, r0, energy_before, ja0, iterations, rn)
}

#[allow(clippy::too_many_arguments)]
fn finish<T: Real>(
    u: &GridField<T>,
    mut v: GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
    r0: f64,
    energy_before: T,
    ja0: T,
    iterations: usize,
    masked_residual: T,
) -> Result<AnnulusReport<T>> {
    // off the mask the result is the input, bit for bit
    {
        let (vv, uu) = (v.values_mut(), u.values());
        for (i, inside) in mask.as_slice().iter().enumerate() {
            if !inside {
                vv[i] = uu[i];
            }
        }
    }
    let mut energy_after = energy_unchecked(&v, pair).total;
    if energy_after > energy_before {
        // the masked start was worse than u and rounding kept it there
        warn!(
            "annulus minimization raised J by {}",
            (energy_after - energy_before).as_f64()
        );
        v = u.clone();
        energy_after = energy_before;
    }
    let norm = annular_norm(&v, pair, mask)?;
    let norm_below_r0 = norm < T::lit(r0);
    if !norm_below_r0 {
        warn!("annulus minimizer has annular norm {norm} ≥ r0 = {r0}");
    }
    Ok(AnnulusReport {
        annular_energy_after: annular_energy(&v, pair, mask)?,
        field: v,
        iterations,
        masked_residual,
        energy_before,
        energy_after,
        annular_energy_before: ja0,
        annular_norm_after: norm,
        norm_below_r0,
    })
}
