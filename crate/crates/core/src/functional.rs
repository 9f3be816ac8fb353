//! The discrete energy `J_L`, its derivative, the Nehari fibering map and
//! energies restricted to a mask.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inner_product_el_unchecked, reduce, CoefficientPair, GridField, TorusMask};
use crate::nonlinearity::{f, g, h, F, H};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown<T> {
    /// `½‖u‖²_E`
    pub quad: T,
    /// `∫ Q H(u)`
    pub hpart: T,
    /// `∫ Q F(u)`
    pub fpart: T,
    /// `quad + hpart - fpart`
    pub total: T,
    /// `½ ∫ Q u²`
    pub mass: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NehariMethod {
    ClosedForm,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NehariResult<T> {
    /// The unique `t > 0` with `J'(t u) u = 0`.
    pub t_u: T,
    /// `J(t_u u)`
    pub energy_at_t: T,
    pub bracket: (T, T),
    pub method: NehariMethod,
}

fn check_pair<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>) -> Result<()> {
    u.grid().check_same(pair.grid())
}

pub(crate) fn energy_unchecked<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> EnergyBreakdown<T> {
    let w = u.grid().cell_volume::<T>();
    let (x, q) = (u.values(), pair.q().values());
    let half = T::lit(0.5);
    let quad = half * inner_product_el_unchecked(u, u, pair);
    let hpart = reduce::sum_by(x.len(), |i| q[i] * H(x[i])) * w;
    let fpart = reduce::sum_by(x.len(), |i| q[i] * F(x[i])) * w;
    let mass = half * reduce::sum_by(x.len(), |i| q[i] * x[i] * x[i]) * w;
    EnergyBreakdown {
        quad,
        hpart,
        fpart,
        total: quad + hpart - fpart,
        mass,
    }
}

pub fn energy<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>) -> Result<EnergyBreakdown<T>> {
    check_pair(u, pair)?;
    Ok(energy_unchecked(u, pair))
}

pub(crate) fn residual_unchecked<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> GridField<T> {
    let lap = u.laplacian();
    let (x, v, q) = (u.values(), pair.v().values(), pair.q().values());
    let l = lap.values();
    let values = crate::grid::par_map_indices(x.len(), |i| -l[i] + v[i] * x[i] - q[i] * g(x[i]));
    GridField::from_vec(*u.grid(), values)
}

/// Pointwise `-Δu + V u - Q g(u)`.
pub fn residual<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>) -> Result<GridField<T>> {
    check_pair(u, pair)?;
    Ok(residual_unchecked(u, pair))
}

pub(crate) fn deriv_unchecked<T: Real>(
    u: &GridField<T>,
    v: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> T {
    let w = u.grid().cell_volume::<T>();
    let (x, y, q) = (u.values(), v.values(), pair.q().values());
    let nl = reduce::sum_by(x.len(), |i| q[i] * g(x[i]) * y[i]) * w;
    inner_product_el_unchecked(u, v, pair) - nl
}

/// `J'(u) v = ⟨u, v⟩_E - ∫ Q g(u) v`.
pub fn deriv<T: Real>(u: &GridField<T>, v: &GridField<T>, pair: &CoefficientPair<T>) -> Result<T> {
    check_pair(u, pair)?;
    u.grid().check_same(v.grid())?;
    Ok(deriv_unchecked(u, v, pair))
}

/// Relative bisection tolerance on `t`.
const NEHARI_TOL: f64 = 1e-12;
const NEHARI_MAX_STEPS: usize = 60;

/// Finds the unique `t_u > 0` putting `t_u u` on the Nehari manifold.
pub fn nehari_scale<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> Result<NehariResult<T>> {
    check_pair(u, pair)?;
    if !(u.max_value() > T::zero()) {
        return Err(Error::Nehari("field has no positive part".into()));
    }
    if u.min_value() >= T::zero() {
        nehari_closed_form(u, pair)
    } else {
        nehari_bisection(u, pair)
    }
}

/// For `u ≥ 0`, `g(tu) = tu (log t² + log u²)`, so `J'(tu)u = 0` solves to
/// `log t² = (‖u‖²_E - ∫ Q u² log u²) / ∫ Q u²`.
pub(crate) fn nehari_closed_form<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> Result<NehariResult<T>> {
    let w = u.grid().cell_volume::<T>();
    let (x, q) = (u.values(), pair.q().values());
    let norm2 = inner_product_el_unchecked(u, u, pair);
    let two = T::lit(2.0);
    let qu2 = reduce::sum_by(x.len(), |i| q[i] * x[i] * x[i]) * w;
    let qu2log = reduce::sum_by(x.len(), |i| {
        if x[i] > T::zero() {
            q[i] * x[i] * x[i] * two * x[i].ln()
        } else {
            T::zero()
        }
    }) * w;
    let log_t2 = (norm2 - qu2log) / qu2;
    let t = (log_t2 / two).exp();
    if !(t.is_finite() && t > T::zero()) {
        return Err(Error::Nehari(format!("closed form gave t = {t}")));
    }
    // on the Nehari manifold J(tu) = ½ t² ∫ Q u²
    let energy_at_t = T::lit(0.5) * t * t * qu2;
    Ok(NehariResult {
        t_u: t,
        energy_at_t,
        bracket: (t, t),
        method: NehariMethod::ClosedForm,
    })
}

pub(crate) fn nehari_bisection<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> Result<NehariResult<T>> {
    let w = u.grid().cell_volume::<T>();
    let (x, q) = (u.values(), pair.q().values());
    let norm2 = inner_product_el_unchecked(u, u, pair);
    // J'(tu)u / t, strictly decreasing in t
    let phi = |t: T| norm2 - reduce::sum_by(x.len(), |i| q[i] * g(t * x[i]) * x[i]) * w / t;
    let two = T::lit(2.0);
    let (mut lo, mut hi) = (T::one(), T::one());
    if phi(T::one()) > T::zero() {
        let mut found = false;
        for _ in 0..NEHARI_MAX_STEPS {
            lo = hi;
            hi = hi * two;
            if phi(hi) <= T::zero() {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Nehari("no upper bracket within 60 doublings".into()));
        }
    } else {
        let mut found = false;
        for _ in 0..NEHARI_MAX_STEPS {
            hi = lo;
            lo = lo / two;
            if phi(lo) > T::zero() {
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::Nehari("no lower bracket within 60 halvings".into()));
        }
    }
    let bracket = (lo, hi);
    let tol = T::lit(NEHARI_TOL);
    let mut steps = 0;
    while hi - lo > tol * hi && steps < 200 {
        let mid = T::lit(0.5) * (lo + hi);
        if phi(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let t = T::lit(0.5) * (lo + hi);
    let energy_at_t = energy_unchecked(&u.scaled(t), pair).total;
    Ok(NehariResult {
        t_u: t,
        energy_at_t,
        bracket,
        method: NehariMethod::Bisection,
    })
}

/// Quadratic part over the mask: sites inside and edges with both ends inside.
fn masked_quadratic<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>, mask: &TorusMask) -> T {
    let grid = *u.grid();
    let (x, v) = (u.values(), pair.v().values());
    let m = mask.as_slice();
    let inv_h2 = T::from_usize_lossy(grid.points_per_unit()).powi(2);
    let s = reduce::sum_by(x.len(), |i| {
        if !m[i] {
            return T::zero();
        }
        let mut acc = v[i] * x[i] * x[i];
        for a in 0..grid.dim() {
            let j = grid.neighbor(i, a, true);
            if m[j] {
                let d = x[j] - x[i];
                acc = acc + d * d * inv_h2;
            }
        }
        acc
    });
    s * grid.cell_volume::<T>()
}

fn check_mask<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
) -> Result<()> {
    check_pair(u, pair)?;
    u.grid().check_same(mask.grid())
}

/// `‖u‖_{E(A)}`.
pub fn annular_norm<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
) -> Result<T> {
    check_mask(u, pair, mask)?;
    Ok(masked_quadratic(u, pair, mask).max(T::zero()).sqrt())
}

/// `J_A(u) = ½‖u‖²_{E(A)} - ∫_A Q G(u)`.
pub fn annular_energy<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
) -> Result<T> {
    Ok(annular_breakdown(u, pair, mask)?.total)
}

pub fn annular_breakdown<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
) -> Result<EnergyBreakdown<T>> {
    check_mask(u, pair, mask)?;
    let w = u.grid().cell_volume::<T>();
    let (x, q, m) = (u.values(), pair.q().values(), mask.as_slice());
    let half = T::lit(0.5);
    let sel = |i: usize, val: T| if m[i] { val } else { T::zero() };
    let quad = half * masked_quadratic(u, pair, mask);
    let hpart = reduce::sum_by(x.len(), |i| sel(i, q[i] * H(x[i]))) * w;
    let fpart = reduce::sum_by(x.len(), |i| sel(i, q[i] * F(x[i]))) * w;
    let mass = half * reduce::sum_by(x.len(), |i| sel(i, q[i] * x[i] * x[i])) * w;
    Ok(EnergyBreakdown {
        quad,
        hpart,
        fpart,
        total: quad + hpart - fpart,
        mass,
    })
}

/// Masked versions of `∫ Q f(u) u` and `∫ Q h(u) u`.
fn masked_fu_hu<T: Real>(u: &GridField<T>, pair: &CoefficientPair<T>, mask: &TorusMask) -> (T, T) {
    let w = u.grid().cell_volume::<T>();
    let (x, q, m) = (u.values(), pair.q().values(), mask.as_slice());
    let fu = reduce::sum_by(x.len(), |i| {
        if m[i] {
            q[i] * f(x[i]) * x[i]
        } else {
            T::zero()
        }
    }) * w;
    let hu = reduce::sum_by(x.len(), |i| {
        if m[i] {
            q[i] * h(x[i]) * x[i]
        } else {
            T::zero()
        }
    }) * w;
    (fu, hu)
}

#[derive(Debug, Clone, Serialize)]
pub struct R0Calibration {
    pub r0: f64,
    /// Set when no dyadic candidate passed and the conservative default was used.
    pub fallback: bool,
    pub samples_per_candidate: usize,
    /// Candidates tried, largest first, with the worst margin observed.
    pub trials: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct R0Options {
    pub samples: usize,
    pub seed: u64,
    /// Required slack: each inequality must hold as `lhs ≤ margin · rhs`.
    pub margin: f64,
    /// Multiplies the amplitude of test fields beyond the nominal norm bound.
    pub amplitude_scale: f64,
    pub candidates: usize,
}

impl Default for R0Options {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 42,
            margin: 0.9,
            amplitude_scale: 1.0,
            candidates: 12,
        }
    }
}

pub const R0_FALLBACK: f64 = 1e-2;

/// Random smooth test field: a few Gaussian bumps with centers drawn from
/// the mask.
fn random_bumps<T: Real>(mask: &TorusMask, rng: &mut ChaCha8Rng) -> GridField<T> {
    let grid = *mask.grid();
    let inside = mask.indices();
    let count = rng.gen_range(1..=3);
    let mut bumps = Vec::with_capacity(count);
    for _ in 0..count {
        let c = if inside.is_empty() {
            0
        } else {
            inside[rng.gen_range(0..inside.len())]
        };
        let width: f64 = rng.gen_range(0.15..1.5);
        let amp: f64 = if rng.gen_bool(0.8) { 1.0 } else { -1.0 } * rng.gen_range(0.3..1.0);
        bumps.push((grid.lattice_point(c), width, amp));
    }
    let vals = (0..grid.sites())
        .map(|i| {
            let p = grid.lattice_point(i);
            let s: f64 = bumps
                .iter()
                .map(|(c, w, a)| {
                    let d = grid.torus_distance(&p, c);
                    a * (-0.5 * d * d / (w * w)).exp()
                })
                .sum();
            T::lit(s)
        })
        .collect();
    GridField::from_vec(grid, vals)
}

/// Worst ratio `lhs / (margin·rhs)` over the small-norm inequalities for one
/// field; values `≤ 1` pass.
fn small_norm_violation<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
) -> f64 {
    let norm2 = masked_quadratic(u, pair, mask).as_f64();
    if norm2 <= 0.0 {
        return 0.0;
    }
    let b = annular_breakdown(u, pair, mask).expect("grids checked by caller");
    let (fu, hu) = masked_fu_hu(u, pair, mask);
    let eighth = norm2 / 8.0;
    let quarter = norm2 / 4.0;
    let j = b.total.as_f64();
    let jprime = norm2 + hu.as_f64() - fu.as_f64();
    let ratios = [
        fu.as_f64() / eighth,
        b.fpart.as_f64() / eighth,
        if j > 0.0 { quarter / j } else { f64::INFINITY },
        if jprime > 0.0 {
            quarter / jprime
        } else {
            f64::INFINITY
        },
    ];
    ratios.into_iter().fold(0.0, f64::max)
}

/// Worst violation ratio over a seeded draw of fields with masked norm at most
/// `2 r0`; half the draw sits exactly on the norm bound.
pub fn r0_worst_ratio<T: Real>(
    pair: &CoefficientPair<T>,
    masks: &[TorusMask],
    r0: f64,
    opts: &R0Options,
) -> Result<f64> {
    let full;
    let masks = if masks.is_empty() {
        full = TorusMask::annulus(pair.grid(), 0.0, &[]);
        std::slice::from_ref(&full)
    } else {
        masks
    };
    for m in masks {
        pair.grid().check_same(m.grid())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0_f64;
    for k in 0..opts.samples {
        let mask = &masks[k % masks.len()];
        let base = random_bumps::<T>(mask, &mut rng);
        let n = masked_quadratic(&base, pair, mask).as_f64().sqrt();
        let frac = if k % 2 == 0 {
            1.0
        } else {
            rng.gen_range(0.05..1.0)
        };
        if n <= 0.0 {
            continue;
        }
        let target = 2.0 * r0 * frac * opts.amplitude_scale;
        let u = base.scaled(T::lit(target / n));
        worst = worst.max(small_norm_violation(&u, pair, mask) / opts.margin);
    }
    Ok(worst)
}

/// Largest dyadic `r0 ∈ (0, 1]` for which the small-norm inequalities
/// `J_A ≥ ¼‖u‖²`, `J'_A(u)u ≥ ¼‖u‖²`, `∫_A Q f(u)u ≤ ⅛‖u‖²` and
/// `∫_A Q F(u) ≤ ⅛‖u‖²` hold, with margin, on every sampled field with
/// `‖u‖_{E(A)} ≤ 2 r0`. An empty mask family means the whole torus.
pub fn calibrate_r0<T: Real>(
    pair: &CoefficientPair<T>,
    masks: &[TorusMask],
    opts: &R0Options,
) -> Result<R0Calibration> {
    let mut trials = Vec::new();
    let mut r0 = 1.0;
    for _ in 0..opts.candidates {
        let worst = r0_worst_ratio(pair, masks, r0, opts)?;
        trials.push((r0, worst));
        if worst <= 1.0 {
            return Ok(R0Calibration {
                r0,
                fallback: false,
                samples_per_candidate: opts.samples,
                trials,
            });
        }
        r0 *= 0.5;
    }
    warn!("r0 calibration exhausted; using conservative default {R0_FALLBACK}");
    Ok(R0Calibration {
        r0: R0_FALLBACK,
        fallback: true,
        samples_per_candidate: opts.samples,
        trials,
    })
}
