//! Multi-bump critical points by trust-region Newton from a glued profile.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::annulus::annulus_minimize;
use super::glue::{glue, superpose, GlueSpec};
use super::ground::fraction_to_boundary;
use super::{SolveReport, SolverOptions, Workspace};
use crate::error::{Error, Result};
use crate::functional::{
    annular_energy, annular_norm, calibrate_r0, energy_unchecked, residual_unchecked,
};
use crate::functional::{R0Calibration, R0Options};
use crate::grid::{annulus_mask, inner_product_el_unchecked, reduce, CoefficientPair, GridField};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultibumpOptions {
    /// Small-norm radius; calibrated on the annulus when absent.
    pub r0: Option<f64>,
    pub calibration: R0Options,
    /// Half-width of the accepted level window as a fraction of the largest
    /// single-bump level.
    pub window_frac: f64,
    /// Abort when the iterate leaves the ball of radius `2r + ‖Ω - S‖_E`
    /// around the glued profile.
    pub drift_guard: bool,
}

impl Default for MultibumpOptions {
    fn default() -> Self {
        Self {
            r0: None,
            calibration: R0Options::default(),
            window_frac: 0.1,
            drift_guard: true,
        }
    }
}

/// Small-norm parameters derived from `r0`: `r = r0/2`, trust radius `r/4`
/// and `ρ = r0²/8`.
#[derive(Debug, Clone, Serialize)]
pub struct SmallnessParams {
    pub r0: f64,
    pub r: f64,
    pub rho: f64,
    pub trust_radius: f64,
    pub calibration: Option<R0Calibration>,
}

impl SmallnessParams {
    pub fn from_r0(r0: f64) -> Result<Self> {
        if !(r0.is_finite() && r0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "r0 must be positive, got {r0}"
            )));
        }
        let r = 0.5 * r0;
        Ok(Self {
            r0,
            r,
            rho: r0 * r0 / 8.0,
            trust_radius: 0.25 * r,
            calibration: None,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MultibumpReport<T> {
    pub solve: SolveReport<T>,
    pub smallness: SmallnessParams,
    /// `‖u - Ω‖_E` with `Ω` the glued profile.
    pub distance_to_glued: T,
    /// `‖u - S‖_E` with `S` the uncut superposition of translates.
    pub distance_to_superposition: T,
    /// `‖Ω - S‖_E`
    pub glue_defect: T,
    /// `distance_to_superposition ≤ 2r`
    pub within_2r: bool,
    pub annular_energy: T,
    pub annulus_passes: usize,
    /// `½∫ Q u²` over the Voronoi cell of each center.
    pub bump_levels: Vec<T>,
    /// `Σ_k J(ω_{profile(k)})`
    pub reference_level: T,
    pub level_window: (T, T),
    pub in_window: bool,
}

fn e_norm<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>) -> T {
    inner_product_el_unchecked(u, u, pair).max(T::zero()).sqrt()
}

/// `½∫ Q u²` over the sites nearest to each center (ties go to the lower index).
fn voronoi_levels<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>, spec: &GlueSpec) -> Vec<T> {
    let grid = u.grid();
    let owner: Vec<usize> = (0..grid.sites())
        .map(|i| {
            let p = grid.lattice_point(i);
            let mut best = (f64::INFINITY, 0);
            for (k, c) in spec.centers.iter().enumerate() {
                let d = grid.torus_distance(&p, c);
                if d < best.0 {
                    best = (d, k);
                }
            }
            best.1
        })
        .collect();
    let (x, q) = (u.values(), pair.q().values());
    let half_w = T::lit(0.5) * grid.cell_volume::<T>();
    (0..spec.bumps())
        .map(|k| {
            reduce::sum_by(x.len(), |i| {
                if owner[i] == k {
                    q[i] * x[i] * x[i]
                } else {
                    T::zero()
                }
            }) * half_w
        })
        .collect()
}

/// Resolves `r0` and the derived parameters for `spec`.
pub fn smallness_params<T: Real>(
    spec: &GlueSpec,
    pair: &CoefficientPair<T>,
    mb: &MultibumpOptions,
) -> Result<SmallnessParams> {
    match mb.r0 {
        Some(r0) => SmallnessParams::from_r0(r0),
        None => {
            let mask = annulus_mask(pair.grid(), spec.radius, &spec.centers)?;
            let cal = calibrate_r0(pair, &[mask], &mb.calibration)?;
            info!("calibrated r0 = {} (fallback: {})", cal.r0, cal.fallback);
            let mut p = SmallnessParams::from_r0(cal.r0)?;
            p.calibration = Some(cal);
            Ok(p)
        }
    }
}

/// Solves for a critical point near the glued profile `Ω` of `spec`.
///
/// Newton steps, computed by preconditioned MINRES on the full linearization,
/// are clipped to a trust radius in the `E` norm that starts at `r/4` and
/// adapts to the residual decrease. Every `opts.stabilize_every` steps the
/// field on the annulus is replaced by its annulus minimizer; the solve
/// aborts if the annular energy exceeds `ρ` at that point.
pub fn solve_multibump<T: Real>(
    spec: &GlueSpec,
    pair: &CoefficientPair<T>,
    grounds: &[&GridField<T>],
    opts: &SolverOptions,
    mb: &MultibumpOptions,
) -> Result<MultibumpReport<T>> {
    opts.validate()?;
    if !(mb.window_frac.is_finite() && mb.window_frac > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window_frac must be positive, got {}",
            mb.window_frac
        )));
    }
    spec.validate_for(pair)?;
    for w in grounds {
        pair.grid().check_same(w.grid())?;
    }
    let ws = Workspace::new(pair)?;
    let small = smallness_params(spec, pair, mb)?;
    let mask = annulus_mask(pair.grid(), spec.radius, &spec.centers)?;

    let omega = glue(spec, grounds)?;
    let sup = superpose(spec, grounds)?;
    let defect = e_norm(&omega.sub(&sup), pair);
    let guard = T::lit(2.0 * small.r) + defect;

    let tol = T::lit(opts.tol);
    let mut u = omega.clone();
    let mut r = residual_unchecked(&u, pair);
    let mut rn = r.l2_norm();
    let mut radius = T::lit(small.trust_radius);
    let max_radius = T::lit(4.0) * defect.max(T::lit(small.r));
    let mut steps = 0usize;
    let mut passes = 0usize;
    let mut failures = 0usize;
    let mut warnings = Vec::new();

    while rn > tol && steps < opts.newton_max_iter {
        let mut step = ws.newton_direction(&u, &r, opts)?;
        let len = e_norm(&step, pair);
        if len > radius {
            step = step.scaled(radius / len);
        }
        let cand = fraction_to_boundary(&u, &step, T::one());
        let rc = residual_unchecked(&cand, pair);
        let rcn = rc.l2_norm();
        steps += 1;
        if rcn < rn {
            debug!("multibump step {steps}: |r| {rn:e} -> {rcn:e}, radius {radius}");
            let full = len <= radius;
            u = cand;
            r = rc;
            let ratio = rcn / rn;
            rn = rcn;
            failures = 0;
            if !full && ratio < T::lit(0.75) {
                radius = (radius * T::lit(2.0)).min(max_radius);
            }
        } else {
            radius = radius * T::lit(0.25);
            failures += 1;
            if failures >= 8 {
                return Err(Error::Solver(format!(
                    "trust region collapsed at |r| = {rn:e}"
                )));
            }
            continue;
        }

        if mb.drift_guard {
            let d = e_norm(&u.sub(&omega), pair);
            if d > guard {
                return Err(Error::Solver(format!(
                    "iterate drifted to ‖u - Ω‖_E = {d} beyond 2r + ‖Ω - S‖_E = {guard}"
                )));
            }
        }
        if steps.is_multiple_of(opts.stabilize_every) && rn > tol {
            let ja = annular_energy(&u, pair, &mask)?;
            if ja > T::lit(small.rho) {
                return Err(Error::Solver(format!(
                    "annular energy {ja} exceeds ρ = {}",
                    small.rho
                )));
            }
            if annular_norm(&u, pair, &mask)? <= T::lit(small.r0) {
                let rep = annulus_minimize(&u, pair, &mask, small.r0, small.rho, opts)?;
                u = rep.field;
                r = residual_unchecked(&u, pair);
                rn = r.l2_norm();
                passes += 1;
            } else {
                let msg = format!("annulus pass skipped at step {steps}: annular norm exceeds r0");
                warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let solve = SolveReport::assess(u, pair, opts, 0, steps, warnings);
    let distance_to_glued = e_norm(&solve.field.sub(&omega), pair);
    let distance_to_superposition = e_norm(&solve.field.sub(&sup), pair);
    let annular = annular_energy(&solve.field, pair, &mask)?;
    let bump_levels = voronoi_levels(&solve.field, pair, spec);
    let singles: Vec<T> = grounds
        .iter()
        .map(|w| energy_unchecked(w, pair).total)
        .collect();
    let mut reference = T::zero();
    let mut largest = T::zero();
    for &k in &spec.profiles {
        let b = *singles
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("profile index {k} out of range")))?;
        reference = reference + b;
        largest = largest.max(b);
    }
    let half = T::lit(mb.window_frac) * largest;
    let level = solve.energy.total;
    Ok(MultibumpReport {
        within_2r: distance_to_superposition <= T::lit(2.0 * small.r),
        in_window: (level - reference).abs() <= half,
        level_window: (reference - half, reference + half),
        reference_level: reference,
        distance_to_glued,
        distance_to_superposition,
        glue_defect: defect,
        annular_energy: annular,
        annulus_passes: passes,
        bump_levels,
        smallness: small,
        solve,
    })
}
