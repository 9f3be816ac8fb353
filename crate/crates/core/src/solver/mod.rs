//! Ground states, the annulus minimization subproblem and multi-bump solves.

mod annulus;
mod glue;
mod ground;
pub mod linalg;
mod multibump;

pub use annulus::{annulus_minimize, annulus_minimize_from, AnnulusReport};
pub use glue::{glue, superpose, GlueSpec};
pub use ground::{b_of_l, ground_state, BLimitRow};
pub use multibump::{
    smallness_params, solve_multibump, MultibumpOptions, MultibumpReport, SmallnessParams,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{energy_unchecked, nehari_scale, residual_unchecked, EnergyBreakdown};
use crate::grid::fft::ShiftedLaplacianSolver;
use crate::grid::{par_map_indices, CoefficientPair, GridField};
use crate::nonlinearity::g_prime;
use crate::scalar::Real;

/// Floor used for `g'` near zero, where `log u²` diverges.
pub const G_PRIME_FLOOR: f64 = 1e-12;

/// Upper bound on the Levenberg–Marquardt shift of the Newton systems.
const NEWTON_SHIFT_CAP: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Target for the `L²` norm of the residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual level below which descent hands over to Newton.
    pub newton_switch: f64,
    /// Annulus stabilization period in multi-bump solves.
    pub stabilize_every: usize,
    /// Relative tolerance for `|J - ½∫Qu²| ≤ tol·(1 + mass)`.
    pub identity_tol: f64,
    pub armijo: f64,
    pub krylov_rtol: f64,
    pub krylov_max_iter: usize,
    pub newton_max_iter: usize,
    /// Center of the initial Gaussian; the origin when absent.
    pub init_center: Option<Vec<f64>>,
    pub init_width: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            newton_switch: 1e-4,
            stabilize_every: 10,
            identity_tol: 1e-6,
            armijo: 1e-4,
            krylov_rtol: 1e-10,
            krylov_max_iter: 4000,
            newton_max_iter: 200,
            init_center: None,
            init_width: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("tol", self.tol),
            ("newton_switch", self.newton_switch),
            ("identity_tol", self.identity_tol),
            ("armijo", self.armijo),
            ("krylov_rtol", self.krylov_rtol),
            ("init_width", self.init_width),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.armijo >= 0.5 {
            return Err(Error::InvalidArgument("armijo must be below 0.5".into()));
        }
        if self.max_iter == 0 || self.stabilize_every == 0 || self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument(
                "iteration counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport<T> {
    #[serde(skip)]
    pub field: GridField<T>,
    pub energy: EnergyBreakdown<T>,
    pub residual_l2: T,
    pub residual_sup: T,
    pub iterations: usize,
    pub descent_iterations: usize,
    pub newton_iterations: usize,
    pub nehari_t: T,
    /// `|J - ½∫Qu²|`
    pub identity_gap: T,
    pub positivity_min: T,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl<T: Real> SolveReport<T> {
    /// Evaluates every diagnostic of `u`; `converged` applies the report
    /// invariants against `opts`.
    pub fn assess(
        u: GridField<T>,
        pair: &CoefficientPair<T>,
        opts: &SolverOptions,
        descent_iterations: usize,
        newton_iterations: usize,
        warnings: Vec<String>,
    ) -> Self {
        let energy = energy_unchecked(&u, pair);
        let r = residual_unchecked(&u, pair);
        let residual_l2 = r.l2_norm();
        let residual_sup = r.sup_norm();
        let nehari_t = nehari_scale(&u, pair).map(|n| n.t_u).unwrap_or(T::nan());
        let identity_gap = (energy.total - energy.mass).abs();
        let positivity_min = u.min_value();
        let converged = residual_l2 <= T::lit(opts.tol)
            && identity_gap <= T::lit(opts.identity_tol) * (T::one() + energy.mass)
            && positivity_min > T::zero();
        Self {
            field: u,
            energy,
            residual_l2,
            residual_sup,
            iterations: descent_iterations + newton_iterations,
            descent_iterations,
            newton_iterations,
            nehari_t,
            identity_gap,
            positivity_min,
            converged,
            warnings,
        }
    }
}

/// Operators shared by the iterative solvers on one grid.
pub(crate) struct Workspace<'a, T: Real> {
    pub pair: &'a CoefficientPair<T>,
    pub fft: ShiftedLaplacianSolver<T>,
}

impl<'a, T: Real> Workspace<'a, T> {
    pub fn new(pair: &'a CoefficientPair<T>) -> Result<Self> {
        let shift = pair.mean_v();
        if !(pair.v().min_value() > T::zero()) {
            return Err(Error::InvalidCoefficients(
                "min V must be positive; normalize the potential first".into(),
            ));
        }
        Ok(Self {
            pair,
            fft: ShiftedLaplacianSolver::new(pair.grid(), shift)?,
        })
    }

    fn field(&self, x: &[T]) -> GridField<T> {
        GridField::from_vec(*self.pair.grid(), x.to_vec())
    }

    /// `(-Δ + V) x`
    pub fn apply_el(&self, x: &[T]) -> Vec<T> {
        let lap = self.field(x).laplacian();
        let (l, v) = (lap.values(), self.pair.v().values());
        par_map_indices(x.len(), |i| -l[i] + v[i] * x[i])
    }

    /// Solves `(-Δ + V) w = r` by CG with the spectral preconditioner.
    pub fn riesz(&self, r: &GridField<T>, rtol: T) -> Result<GridField<T>> {
        let max_iter = ((10.0 * (r.len() as f64).sqrt()).ceil() as usize).max(1);
        let out = linalg::pcg(
            |x| self.apply_el(x),
            |x| self.fft.apply(x),
            r.values(),
            rtol,
            max_iter,
        );
        let out = linalg::require(out, "Riesz solve")?;
        Ok(GridField::from_vec(*r.grid(), out.x))
    }

    /// Diagonal part `V - Q g'(u)` of the linearized operator.
    pub fn jacobian_diag(&self, u: &GridField<T>) -> Vec<T> {
        let floor = T::lit(G_PRIME_FLOOR);
        let (x, v, q) = (u.values(), self.pair.v().values(), self.pair.q().values());
        par_map_indices(x.len(), |i| v[i] - q[i] * g_prime(x[i], floor))
    }

    /// `(-Δ + diag) x`
    pub fn apply_jacobian(&self, diag: &[T], x: &[T]) -> Vec<T> {
        let lap = self.field(x).laplacian();
        let l = lap.values();
        par_map_indices(x.len(), |i| -l[i] + diag[i] * x[i])
    }

    /// Newton direction `δ` with `(J''(u) + μ(-Δ + V̄)) δ = -r`, by
    /// preconditioned MINRES, where `V̄` is the mean potential and
    /// `μ = ‖r‖`.
    ///
    /// Translations are a numerically null direction of `J''` at a bump; the
    /// shift keeps the system away from singularity while preserving
    /// quadratic convergence. The Krylov tolerance follows the residual
    /// (inexact Newton) with `opts.krylov_rtol` as its floor.
    pub fn newton_direction(
        &self,
        u: &GridField<T>,
        r: &GridField<T>,
        opts: &SolverOptions,
    ) -> Result<GridField<T>> {
        let rn = r.l2_norm();
        let mu = rn.min(T::lit(NEWTON_SHIFT_CAP));
        let vbar = self.pair.mean_v();
        let mut diag = self.jacobian_diag(u);
        for d in diag.iter_mut() {
            *d = *d + mu * vbar;
        }
        let one_plus_mu = T::one() + mu;
        let apply = |x: &[T]| {
            let lap = self.field(x).laplacian();
            let l = lap.values();
            par_map_indices(x.len(), |i| -one_plus_mu * l[i] + diag[i] * x[i])
        };
        let rtol = rn.min(T::lit(1e-3)).max(T::lit(opts.krylov_rtol));
        let rhs: Vec<T> = r.values().iter().map(|&x| -x).collect();
        let out = linalg::minres(
            apply,
            |x| self.fft.apply(x),
            &rhs,
            rtol,
            opts.krylov_max_iter,
        );
        if !out.converged && !(out.rel_residual < T::lit(1e-3).max(T::lit(10.0) * rtol)) {
            return Err(Error::LinearSolver {
                iterations: out.iterations,
                residual: out.rel_residual.as_f64(),
            });
        }
        Ok(GridField::from_vec(*u.grid(), out.x))
    }
}

/// The `E`-gradient: solves `(-Δ + V) w = residual` by conjugate gradients
/// to relative tolerance `1e-10`.
pub fn precondition<T: Real>(
    residual: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> Result<GridField<T>> {
    residual.grid().check_same(pair.grid())?;
    Workspace::new(pair)?
        .riesz(residual, T::lit(1e-10))
        .map_err(|e| match e {
            Error::LinearSolver {
                iterations,
                residual,
            } => Error::Precondition(format!(
                "CG stalled after {iterations} iterations at relative residual {residual:e}"
            )),
            other => other,
        })
}

/// Linearized residual operator `v ↦ -Δv + (V - Q g'(u)) v`.
pub fn apply_jacobian<T: Real>(
    u: &GridField<T>,
    v: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> Result<GridField<T>> {
    u.grid().check_same(pair.grid())?;
    u.grid().check_same(v.grid())?;
    let ws = Workspace::new(pair)?;
    let diag = ws.jacobian_diag(u);
    Ok(GridField::from_vec(
        *u.grid(),
        ws.apply_jacobian(&diag, v.values()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::residual;
    use crate::grid::{sample_coefficients, CoefficientSpec, PeriodicGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(spec: CoefficientSpec, l: usize, m: usize) -> CoefficientPair<f64> {
        sample_coefficients(&PeriodicGrid::new(1, l, m).unwrap(), &spec).unwrap()
    }

    #[test]
    fn precondition_recovers_manufactured_solution() {
        let p = pair(
            CoefficientSpec::Cosine {
                v0: 1.0,
                v1: 0.3,
                q0: 1.0,
                q1: 0.0,
            },
            4,
            16,
        );
        let g = *p.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w0 = GridField::new(
            g,
            (0..g.sites()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let ws = Workspace::new(&p).unwrap();
        let rhs = GridField::new(g, ws.apply_el(w0.values())).unwrap();
        let w = precondition(&rhs, &p).unwrap();
        assert!(w.sub(&w0).sup_norm() < 1e-8);
        let z = precondition(&GridField::zeros(g), &p).unwrap();
        assert_eq!(z.sup_norm(), 0.0);
    }

    #[test]
    fn precondition_plane_wave() {
        let p = pair(CoefficientSpec::Constant { v: 1.0, q: 1.0 }, 2, 8);
        let g = *p.grid();
        let k = std::f64::consts::PI;
        let wave = GridField::from_fn(g, |x: &[f64]| (k * x[0]).cos());
        let h = 1.0 / 8.0;
        let sym = (4.0 / (h * h)) * (k * h / 2.0).sin().powi(2) + 1.0;
        let w = precondition(&wave, &p).unwrap();
        assert!(w.sub(&wave.scaled(1.0 / sym)).sup_norm() < 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let p = pair(
            CoefficientSpec::Cosine {
                v0: 1.2,
                v1: 0.2,
                q0: 1.0,
                q1: 0.1,
            },
            3,
            16,
        );
        let g = *p.grid();
        let u = GridField::from_fn(g, |x: &[f64]| 0.2 + 2.0 * (-x[0] * x[0]).exp());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = GridField::new(
            g,
            (0..g.sites()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let jv = apply_jacobian(&u, &v, &p).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let rp = residual(&u.add_scaled(eps, &v), &p).unwrap();
            let rm = residual(&u.add_scaled(-eps, &v), &p).unwrap();
            let fd = rp.sub(&rm).scaled(0.5 / eps);
            let err = fd.sub(&jv).sup_norm();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-5, "{prev}");
    }

    #[test]
    fn options_validation() {
        assert!(SolverOptions::default().validate().is_ok());
        let bad = SolverOptions {
            tol: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
