//! Glued multi-bump profiles `Σ_k (ψ_R ω_k)(· - P_k)`.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    check_separation, cutoff_field, translate, CoefficientPair, GridField, LatticePoint,
    PeriodicGrid,
};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueSpec {
    pub radius: f64,
    pub centers: Vec<LatticePoint>,
    /// Index into the list of ground-state profiles for each center.
    pub profiles: Vec<usize>,
}

impl GlueSpec {
    /// Snaps physical centers to the lattice and checks that they are pairwise
    /// at least `5R` apart on the torus. Every center uses profile 0.
    pub fn new(grid: &PeriodicGrid, radius: f64, centers: &[Vec<f64>]) -> Result<Self> {
        let pts = centers
            .iter()
            .map(|c| grid.snap(c))
            .collect::<Result<Vec<_>>>()?;
        let spec = Self {
            radius,
            profiles: vec![0; pts.len()],
            centers: pts,
        };
        spec.validate(grid)?;
        Ok(spec)
    }

    pub fn with_profiles(mut self, profiles: Vec<usize>) -> Result<Self> {
        if profiles.len() != self.centers.len() {
            return Err(Error::InvalidGeometry(format!(
                "{} profile indices for {} centers",
                profiles.len(),
                self.centers.len()
            )));
        }
        self.profiles = profiles;
        Ok(self)
    }

    pub fn validate(&self, grid: &PeriodicGrid) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::InvalidGeometry(
                "at least one center is required".into(),
            ));
        }
        if !(self.radius >= 1.0) {
            return Err(Error::InvalidGeometry(format!(
                "R = {} must be at least 1",
                self.radius
            )));
        }
        if 2.0 * self.radius > grid.halfwidth() as f64 {
            return Err(Error::InvalidGeometry(format!(
                "cutoff support needs 2R ≤ L, got R = {} and L = {}",
                self.radius,
                grid.halfwidth()
            )));
        }
        check_separation(grid, self.radius, &self.centers)?;
        let max_d = self.max_pairwise_distance(grid);
        if 2.0 * max_d > grid.halfwidth() as f64 {
            warn!(
                "largest center distance {max_d} exceeds L/2 = {}; continuing on the torus",
                grid.halfwidth() as f64 / 2.0
            );
        }
        Ok(())
    }

    /// Checks compatibility with the coefficients: with varying coefficients
    /// only whole-period translations map solutions to solutions.
    pub fn validate_for<T: Real>(&self, pair: &CoefficientPair<T>) -> Result<()> {
        let grid = pair.grid();
        self.validate(grid)?;
        if !pair.spec().is_constant() {
            let m = grid.points_per_unit() as i64;
            for (k, c) in self.centers.iter().enumerate() {
                if c[..grid.dim()].iter().any(|x| x % m != 0) {
                    return Err(Error::InvalidGeometry(format!(
                        "center {k} is not an integer point; periodic coefficients only allow integer translations"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn max_pairwise_distance(&self, grid: &PeriodicGrid) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                d = d.max(grid.torus_distance(&self.centers[i], &self.centers[j]));
            }
        }
        d
    }

    pub fn bumps(&self) -> usize {
        self.centers.len()
    }
}

/// `Σ_k translate(ψ_R · ω_{profile(k)}, P_k)`, with the profiles centered at
/// the origin.
pub fn glue<T: Real>(spec: &GlueSpec, grounds: &[&GridField<T>]) -> Result<GridField<T>> {
    let first = grounds
        .first()
        .ok_or_else(|| Error::InvalidArgument("no ground state given".into()))?;
    let grid = *first.grid();
    spec.validate(&grid)?;
    let psi = cutoff_field::<T>(&grid, spec.radius, &[0; 3])?;
    let mut windows = Vec::with_capacity(grounds.len());
    for w in grounds {
        grid.check_same(w.grid())?;
        windows.push(psi.zip_map(w, |a, b| a * b));
    }
    let mut out = GridField::zeros(grid);
    for (c, &k) in spec.centers.iter().zip(&spec.profiles) {
        let win = windows.get(k).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "profile index {k} out of range ({} given)",
                windows.len()
            ))
        })?;
        out = out.add_scaled(T::one(), &translate(win, c));
    }
    Ok(out)
}

/// `Σ_k translate(ω_{profile(k)}, P_k)` without cutoffs.
pub fn superpose<T: Real>(spec: &GlueSpec, grounds: &[&GridField<T>]) -> Result<GridField<T>> {
    let grid = *grounds
        .first()
        .ok_or_else(|| Error::InvalidArgument("no ground state given".into()))?
        .grid();
    let mut out = GridField::zeros(grid);
    for (c, &k) in spec.centers.iter().zip(&spec.profiles) {
        let w = grounds
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("profile index {k} out of range")))?;
        out = out.add_scaled(T::one(), &translate(*w, c));
    }
    Ok(out)
}
