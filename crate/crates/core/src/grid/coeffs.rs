//! 1-periodic coefficient fields `V` and `Q`.

use serde::{Deserialize, Serialize};

use super::{par_map_indices, GridField, PeriodicGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Analytic family the coefficients are drawn from.
///
/// `Cosine` means `V = v0 + v1·Π cos(2πx_i)` and `Q = q0 + q1·Π cos(2πx_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { v: f64, q: f64 },
    Cosine { v0: f64, v1: f64, q0: f64, q1: f64 },
}

impl CoefficientSpec {
    /// Exact infimum of `Q` over the torus.
    pub fn min_q(&self) -> f64 {
        match *self {
            Self::Constant { q, .. } => q,
            Self::Cosine { q0, q1, .. } => q0 - q1.abs(),
        }
    }

    pub fn min_v(&self) -> f64 {
        match *self {
            Self::Constant { v, .. } => v,
            Self::Cosine { v0, v1, .. } => v0 - v1.abs(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match *self {
            Self::Constant { .. } => true,
            Self::Cosine { v1, q1, .. } => v1 == 0.0 && q1 == 0.0,
        }
    }

    fn params(&self) -> [f64; 4] {
        match *self {
            Self::Constant { v, q } => [v, 0.0, q, 0.0],
            Self::Cosine { v0, v1, q0, q1 } => [v0, v1, q0, q1],
        }
    }

    /// Checks the parameters and the positivity of `Q`.
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.params().iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(*p));
        }
        if self.min_q() <= 0.0 {
            return Err(Error::InvalidCoefficients(format!(
                "Q must be positive everywhere, but min Q = {}",
                self.min_q()
            )));
        }
        Ok(())
    }
}

/// Sampled coefficient fields together with the family they came from.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientPair<T> {
    v: GridField<T>,
    q: GridField<T>,
    spec: CoefficientSpec,
    /// Shift `log λ²` already subtracted from `V`, zero if not normalized.
    log_lambda2: f64,
}

impl<T: Real> CoefficientPair<T> {
    pub fn v(&self) -> &GridField<T> {
        &self.v
    }

    pub fn q(&self) -> &GridField<T> {
        &self.q
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.v.grid()
    }

    pub fn log_lambda2(&self) -> f64 {
        self.log_lambda2
    }

    /// Constant value of `V`, or `None` for a varying potential.
    pub fn constant_v(&self) -> Option<T> {
        let (lo, hi) = (self.v.min_value(), self.v.max_value());
        (lo == hi).then_some(lo)
    }

    pub fn constant_q(&self) -> Option<T> {
        let (lo, hi) = (self.q.min_value(), self.q.max_value());
        (lo == hi).then_some(lo)
    }

    /// Mean of `V` over the sites, used to shift spectral preconditioners.
    pub fn mean_v(&self) -> T {
        self.v.integrate() / self.grid().cell_volume::<T>() / T::from_usize_lossy(self.v.len())
    }

    /// Resamples the same coefficients on another grid, keeping the
    /// normalization shift.
    pub fn resample(&self, grid: &PeriodicGrid) -> Result<Self> {
        let mut out = sample_coefficients(grid, &self.spec)?;
        if self.log_lambda2 != 0.0 {
            let shift = T::lit(self.log_lambda2);
            out.v = out.v.zip_map(&out.q, |v, q| v - q * shift);
            out.log_lambda2 = self.log_lambda2;
        }
        Ok(out)
    }
}

/// `Π_i cos(2π x_i)` evaluated from the site index modulo `M`, so the
/// samples are exactly invariant under shifts by whole periods.
fn cos_product<T: Real>(grid: &PeriodicGrid, index: usize) -> T {
    let m = grid.points_per_unit();
    let idx = grid.unravel(index);
    let mut acc = T::one();
    for &k in idx.iter().take(grid.dim()) {
        // x = (k - LM)/M and LM is a multiple of M
        let r = k % m;
        let theta = T::TAU() * T::from_usize_lossy(r) / T::from_usize_lossy(m);
        acc = acc * theta.cos();
    }
    acc
}

pub fn sample_coefficients<T: Real>(
    grid: &PeriodicGrid,
    spec: &CoefficientSpec,
) -> Result<CoefficientPair<T>> {
    spec.validate()?;
    let [v0, v1, q0, q1] = spec.params().map(T::lit);
    let basis: Vec<T> = if spec.is_constant() {
        vec![T::zero(); grid.sites()]
    } else {
        par_map_indices(grid.sites(), |i| cos_product(grid, i))
    };
    let v = basis.iter().map(|&c| v0 + v1 * c).collect();
    let q = basis.iter().map(|&c| q0 + q1 * c).collect();
    Ok(CoefficientPair {
        v: GridField::new(*grid, v)?,
        q: GridField::new(*grid, q)?,
        spec: *spec,
        log_lambda2: 0.0,
    })
}

/// Shifts `V` to `V - Q log λ²` with `log λ² = min(V/Q) - 1`, so that the
/// shifted potential satisfies `min V ≥ min Q > 0`. Returns the pair and `λ`;
/// a solution `v` of the shifted problem maps back to `u = λ v`.
pub fn normalize_potential<T: Real>(pair: &CoefficientPair<T>) -> (CoefficientPair<T>, T) {
    let ratio = pair.v.zip_map(&pair.q, |v, q| v / q);
    let log_l2 = ratio.min_value() - T::one();
    let v = pair.v.zip_map(&pair.q, |v, q| v - q * log_l2);
    let lambda = (log_l2 * T::lit(0.5)).exp();
    let out = CoefficientPair {
        v,
        q: pair.q.clone(),
        spec: pair.spec,
        log_lambda2: pair.log_lambda2 + log_l2.as_f64(),
    };
    (out, lambda)
}
