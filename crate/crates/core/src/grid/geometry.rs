//! Cutoffs, lattice translations and masks on the torus.

use serde::Serialize;

use super::{par_map_indices, GridField, LatticePoint, PeriodicGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Radial cutoff profile as a function of `ρ = |x|/R`: equal to 1 for
/// `ρ ≤ 1/4`, 0 for `ρ ≥ 1/2`, smooth and monotone in between with
/// `|dψ/dρ| ≤ 8`.
pub fn cutoff_profile<T: Real>(rho: T) -> T {
    let quarter = T::lit(0.25);
    let t = (T::lit(0.5) - rho) / quarter;
    if t <= T::zero() {
        return T::zero();
    }
    if t >= T::one() {
        return T::one();
    }
    let a = (-T::one() / t).exp();
    let b = (-T::one() / (T::one() - t)).exp();
    a / (a + b)
}

/// `ψ_R(· - center)` sampled on the grid with periodic wrap.
pub fn cutoff_field<T: Real>(
    grid: &PeriodicGrid,
    radius: f64,
    center: &LatticePoint,
) -> Result<GridField<T>> {
    if !radius.is_finite() || radius < 1.0 {
        return Err(Error::InvalidGeometry(format!(
            "cutoff radius {radius} must be at least 1"
        )));
    }
    if 2.0 * radius > grid.halfwidth() as f64 {
        return Err(Error::InvalidGeometry(format!(
            "cutoff radius {radius} needs 2R ≤ L = {}",
            grid.halfwidth()
        )));
    }
    let r = T::lit(radius);
    let values = par_map_indices(grid.sites(), |i| {
        cutoff_profile(grid.site_distance::<T>(i, center) / r)
    });
    Ok(GridField::from_vec(*grid, values))
}

/// Cyclic shift by a lattice vector: `out(x) = u(x - shift)`.
pub fn translate<T: Real>(u: &GridField<T>, shift: &LatticePoint) -> GridField<T> {
    let g = *u.grid();
    let src = u.values();
    let values = par_map_indices(g.sites(), |i| {
        let mut p = g.lattice_point(i);
        for a in 0..g.dim() {
            p[a] -= shift[a];
        }
        src[g.site_of(&p)]
    });
    GridField::from_vec(g, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskRole {
    Ball,
    Annulus,
    CutoffSupport,
}

/// Boolean indicator on the sites of a grid.
#[derive(Debug, Clone, Serialize)]
pub struct TorusMask {
    grid: PeriodicGrid,
    inside: Vec<bool>,
    role: MaskRole,
    radius: f64,
    centers: Vec<LatticePoint>,
}

impl TorusMask {
    /// Sites whose torus distance to every center is at least `radius`,
    /// without any separation requirement on the centers.
    pub fn annulus(grid: &PeriodicGrid, radius: f64, centers: &[LatticePoint]) -> Self {
        let inside = par_map_indices(grid.sites(), |i| {
            let p = grid.lattice_point(i);
            centers.iter().all(|c| grid.torus_distance(&p, c) >= radius)
        });
        Self {
            grid: *grid,
            inside,
            role: MaskRole::Annulus,
            radius,
            centers: centers.to_vec(),
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn role(&self) -> MaskRole {
        self.role
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn centers(&self) -> &[LatticePoint] {
        &self.centers
    }

    pub fn contains(&self, index: usize) -> bool {
        self.inside[index]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Flat indices of the sites inside the mask, ascending.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.inside.len()).filter(|&i| self.inside[i]).collect()
    }

    pub fn complement(&self) -> Self {
        Self {
            inside: self.inside.iter().map(|b| !b).collect(),
            ..self.clone()
        }
    }

    /// The indicator as a 0/1 field.
    pub fn to_field<T: Real>(&self) -> GridField<T> {
        let v = self
            .inside
            .iter()
            .map(|&b| if b { T::one() } else { T::zero() })
            .collect();
        GridField::from_vec(self.grid, v)
    }
}

/// Sites within torus distance `< radius` of `center` (strict, so that it
/// is the complement of a one-center annulus).
pub fn ball_mask(grid: &PeriodicGrid, radius: f64, center: &LatticePoint) -> TorusMask {
    let mut m = TorusMask::annulus(grid, radius, std::slice::from_ref(center)).complement();
    m.role = MaskRole::Ball;
    m
}

/// Sites at torus distance `≥ R` from every center, after checking that the
/// centers are pairwise at least `5R` apart.
pub fn annulus_mask(
    grid: &PeriodicGrid,
    radius: f64,
    centers: &[LatticePoint],
) -> Result<TorusMask> {
    check_separation(grid, radius, centers)?;
    Ok(TorusMask::annulus(grid, radius, centers))
}

/// Pairwise torus distance `≥ 5R`.
pub fn check_separation(grid: &PeriodicGrid, radius: f64, centers: &[LatticePoint]) -> Result<()> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidGeometry(format!(
            "radius {radius} must be positive"
        )));
    }
    let required = 5.0 * radius;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = grid.torus_distance(&centers[i], &centers[j]);
            if d < required {
                return Err(Error::Separation {
                    i,
                    j,
                    distance: d,
                    required,
                });
            }
        }
    }
    Ok(())
}
