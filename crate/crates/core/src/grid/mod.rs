//! Uniform periodic lattice on `[-L, L]^N` and the discrete operators on it.

mod coeffs;
pub mod fft;
mod geometry;
pub mod io;
pub mod reduce;

pub use coeffs::{normalize_potential, sample_coefficients, CoefficientPair, CoefficientSpec};
pub use geometry::{
    annulus_mask, ball_mask, check_separation, cutoff_field, cutoff_profile, translate, MaskRole,
    TorusMask,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default cap on the number of lattice sites.
pub const DEFAULT_SITE_BUDGET: usize = 1 << 26;
pub const MIN_POINTS_PER_UNIT: usize = 4;

/// A lattice point given as signed site offsets from the origin. Unused
/// trailing axes are zero.
pub type LatticePoint = [i64; 3];

const PAR_SITES: usize = 1 << 14;
const PAR_BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodicGrid {
    dim: usize,
    halfwidth: usize,
    points_per_unit: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, halfwidth: usize, points_per_unit: usize) -> Result<Self> {
        Self::with_budget(dim, halfwidth, points_per_unit, DEFAULT_SITE_BUDGET)
    }

    pub fn with_budget(
        dim: usize,
        halfwidth: usize,
        points_per_unit: usize,
        budget: usize,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if halfwidth < 1 {
            return Err(Error::InvalidGrid("halfwidth must be at least 1".into()));
        }
        if points_per_unit < MIN_POINTS_PER_UNIT {
            return Err(Error::InvalidGrid(format!(
                "resolution {points_per_unit} below minimum {MIN_POINTS_PER_UNIT} points per unit"
            )));
        }
        let sites = halfwidth
            .checked_mul(2 * points_per_unit)
            .and_then(|n| n.checked_pow(dim as u32))
            .filter(|&s| s <= budget)
            .ok_or_else(|| {
                Error::InvalidGrid(format!(
                    "grid (N={dim}, L={halfwidth}, M={points_per_unit}) exceeds site budget {budget}"
                ))
            })?;
        debug_assert!(sites > 0);
        Ok(Self {
            dim,
            halfwidth,
            points_per_unit,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfwidth(&self) -> usize {
        self.halfwidth
    }

    pub fn points_per_unit(&self) -> usize {
        self.points_per_unit
    }

    /// Sites per axis, `2LM`.
    pub fn axis_len(&self) -> usize {
        2 * self.halfwidth * self.points_per_unit
    }

    pub fn sites(&self) -> usize {
        self.axis_len().pow(self.dim as u32)
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.points_per_unit)
    }

    /// Quadrature weight `h^N`.
    pub fn cell_volume<T: Real>(&self) -> T {
        self.spacing::<T>().powi(self.dim as i32)
    }

    /// Side length `2L` of the periodic box.
    pub fn period<T: Real>(&self) -> T {
        T::from_usize_lossy(2 * self.halfwidth)
    }

    /// Flat-index stride of `axis` (row-major, axis 0 slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.axis_len().pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis indices of a flat site index.
    pub fn unravel(&self, mut index: usize) -> [usize; 3] {
        let n = self.axis_len();
        let mut out = [0; 3];
        for a in (0..self.dim).rev() {
            out[a] = index % n;
            index /= n;
        }
        out
    }

    pub fn ravel(&self, idx: &[usize; 3]) -> usize {
        let n = self.axis_len();
        (0..self.dim).fold(0, |acc, a| acc * n + idx[a] % n)
    }

    /// Coordinate `-L + k/M` of axis index `k`.
    pub fn coordinate<T: Real>(&self, k: usize) -> T {
        T::from_i64_lossy(k as i64 - self.origin_index() as i64)
            / T::from_usize_lossy(self.points_per_unit)
    }

    /// Physical coordinates of a flat site index; unused axes are zero.
    pub fn position<T: Real>(&self, index: usize) -> [T; 3] {
        let idx = self.unravel(index);
        let mut x = [T::zero(); 3];
        for a in 0..self.dim {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    /// Axis index of the coordinate origin, `LM`.
    pub fn origin_index(&self) -> usize {
        self.halfwidth * self.points_per_unit
    }

    /// Lattice offsets of a flat site index relative to the origin, in
    /// `[-LM, LM)`.
    pub fn lattice_point(&self, index: usize) -> LatticePoint {
        let idx = self.unravel(index);
        let o = self.origin_index() as i64;
        let mut p = [0; 3];
        for a in 0..self.dim {
            p[a] = idx[a] as i64 - o;
        }
        p
    }

    /// Flat index of a lattice point, wrapped periodically.
    pub fn site_of(&self, p: &LatticePoint) -> usize {
        let n = self.axis_len() as i64;
        let o = self.origin_index() as i64;
        let mut idx = [0usize; 3];
        for a in 0..self.dim {
            idx[a] = (p[a] + o).rem_euclid(n) as usize;
        }
        self.ravel(&idx)
    }

    /// Snaps physical coordinates to the nearest lattice point, rounding
    /// exact halves toward zero.
    pub fn snap(&self, x: &[f64]) -> Result<LatticePoint> {
        if x.len() != self.dim {
            return Err(Error::InvalidGeometry(format!(
                "point has {} coordinates, grid dimension is {}",
                x.len(),
                self.dim
            )));
        }
        let m = self.points_per_unit as f64;
        let mut p = [0; 3];
        for (a, &xa) in x.iter().enumerate() {
            if !xa.is_finite() {
                return Err(Error::NonFinite(xa));
            }
            let s = xa * m;
            let r = (s.abs() - 0.5).ceil().max(0.0);
            p[a] = (s.signum() * r) as i64;
        }
        Ok(p)
    }

    /// Physical coordinates of a lattice point (not wrapped).
    pub fn point_coords(&self, p: &LatticePoint) -> Vec<f64> {
        (0..self.dim)
            .map(|a| p[a] as f64 / self.points_per_unit as f64)
            .collect()
    }

    /// `min_n |y - y' - 2Ln|` in physical units.
    pub fn torus_distance(&self, y: &LatticePoint, z: &LatticePoint) -> f64 {
        let n = self.axis_len() as i64;
        let mut acc = 0.0;
        for a in 0..self.dim {
            let d = (y[a] - z[a]).rem_euclid(n);
            let d = d.min(n - d) as f64;
            acc += d * d;
        }
        acc.sqrt() / self.points_per_unit as f64
    }

    /// Torus distance from site `index` to lattice point `c`.
    pub fn site_distance<T: Real>(&self, index: usize, c: &LatticePoint) -> T {
        T::lit(self.torus_distance(&self.lattice_point(index), c))
    }

    pub fn check_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// Flat index of the periodic neighbour one step along `axis`,
    /// forward (`+1`) or backward (`-1`).
    #[inline]
    pub fn neighbor(&self, index: usize, axis: usize, forward: bool) -> usize {
        let n = self.axis_len();
        let stride = self.stride(axis);
        let c = (index / stride) % n;
        if forward {
            if c + 1 == n {
                index + stride - n * stride
            } else {
                index + stride
            }
        } else if c == 0 {
            index + (n - 1) * stride
        } else {
            index - stride
        }
    }
}

/// Real-valued field sampled at every site of a grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridField<T> {
    grid: PeriodicGrid,
    values: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn new(grid: PeriodicGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.sites() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} sites",
                values.len(),
                grid.sites()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(bad.as_f64()));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness scan; the length is still checked.
    pub(crate) fn from_vec(grid: PeriodicGrid, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.sites());
        Self { grid, values }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: PeriodicGrid, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.sites()],
        }
    }

    /// Samples `f` at the physical coordinates of every site.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(&[T]) -> T + Sync) -> Self {
        let dim = grid.dim();
        let values = par_map_indices(grid.sites(), |i| {
            let x = grid.position::<T>(i);
            f(&x[..dim])
        });
        Self { grid, values }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T + Sync) -> Self {
        let v = &self.values;
        Self {
            grid: self.grid,
            values: par_map_indices(v.len(), |i| f(v[i])),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T + Sync) -> Self {
        assert_eq!(self.grid, other.grid);
        let (a, b) = (&self.values, &other.values);
        Self {
            grid: self.grid,
            values: par_map_indices(a.len(), |i| f(a[i], b[i])),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: T, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|x| x.max(T::zero()))
    }

    pub fn sup_norm(&self) -> T {
        let v = &self.values;
        reduce::max_by(v.len(), |i| v[i].abs()).max(T::zero())
    }

    pub fn max_value(&self) -> T {
        let v = &self.values;
        reduce::max_by(v.len(), |i| v[i])
    }

    pub fn min_value(&self) -> T {
        let v = &self.values;
        -reduce::max_by(v.len(), |i| -v[i])
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Rectangle-rule integral `Σ w · h^N`.
    pub fn integrate(&self) -> T {
        reduce::sum(&self.values) * self.grid.cell_volume::<T>()
    }

    /// `∫ u v`.
    pub fn l2_dot(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid);
        reduce::dot(&self.values, &other.values) * self.grid.cell_volume::<T>()
    }

    pub fn l2_norm(&self) -> T {
        self.l2_dot(self).sqrt()
    }

    /// `∫ |u|^q`.
    pub fn lq_integral(&self, q: T) -> T {
        let v = &self.values;
        reduce::sum_by(v.len(), |i| v[i].abs().powf(q)) * self.grid.cell_volume::<T>()
    }

    /// Centered second-difference Laplacian `Δu` with periodic wrap.
    pub fn laplacian(&self) -> Self {
        let g = self.grid;
        let u = &self.values;
        let inv_h2 = T::from_usize_lossy(g.points_per_unit()).powi(2);
        let two = T::lit(2.0);
        let values = par_map_indices(u.len(), |i| {
            let mut acc = T::zero();
            for a in 0..g.dim() {
                let up = u[g.neighbor(i, a, true)];
                let dn = u[g.neighbor(i, a, false)];
                acc = acc + (up - two * u[i] + dn);
            }
            acc * inv_h2
        });
        Self { grid: g, values }
    }

    /// `∫ ∇⁺u · ∇⁺v` with forward differences on every periodic edge.
    pub fn gradient_dot(&self, other: &Self) -> T {
        assert_eq!(self.grid, other.grid);
        let g = self.grid;
        let (u, v) = (&self.values, &other.values);
        let inv_h2 = T::from_usize_lossy(g.points_per_unit()).powi(2);
        let s = reduce::sum_by(u.len(), |i| {
            let mut acc = T::zero();
            for a in 0..g.dim() {
                let j = g.neighbor(i, a, true);
                acc = acc + (u[j] - u[i]) * (v[j] - v[i]);
            }
            acc
        });
        s * inv_h2 * g.cell_volume::<T>()
    }

    /// Writes `self` translated by the lattice vector `shift`:
    /// `out(x) = self(x - shift)`.
    pub fn translated(&self, shift: &LatticePoint) -> Self {
        translate(self, shift)
    }
}

/// `⟨u, v⟩_E = ∫ ∇u·∇v + V u v`.
pub fn inner_product_el<T: Real>(
    u: &GridField<T>,
    v: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> Result<T> {
    u.grid().check_same(v.grid())?;
    u.grid().check_same(pair.grid())?;
    Ok(inner_product_el_unchecked(u, v, pair))
}

pub(crate) fn inner_product_el_unchecked<T: Real>(
    u: &GridField<T>,
    v: &GridField<T>,
    pair: &CoefficientPair<T>,
) -> T {
    let (a, b, pv) = (u.values(), v.values(), pair.v().values());
    let pot = reduce::sum_by(a.len(), |i| pv[i] * a[i] * b[i]) * u.grid().cell_volume::<T>();
    u.gradient_dot(v) + pot
}

/// Evaluates `f` at `0..n`, in parallel for large `n`.
pub(crate) fn par_map_indices<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    if n >= PAR_SITES {
        (0..n)
            .into_par_iter()
            .with_min_len(PAR_BLOCK)
            .map(f)
            .collect()
    } else {
        (0..n).map(f).collect()
    }
}
