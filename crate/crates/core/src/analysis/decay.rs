//! Tail diagnostics: exponential decay away from the bumps and the `L∞`
//! bound on balls of small local energy.

use std::io::Write;

use serde::Serialize;

use super::{distance_to_set, max_abs_over};
use crate::error::{Error, Result};
use crate::grid::{par_map_indices, CoefficientPair, GridField, LatticePoint, TorusMask};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Shell midpoints; shells are `[r - ½, r + ½)` in distance to the bump set.
    pub radii: Vec<f64>,
    pub max_abs: Vec<f64>,
    /// Least-squares slope of `log max_abs` against `r`.
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for an exactly flat profile.
    pub r_squared: f64,
    /// `slope < 0`
    pub decaying: bool,
}

impl DecayFit {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "radius,max_abs")?;
        for (r, m) in self.radii.iter().zip(&self.max_abs) {
            writeln!(w, "{r:.17e},{m:.17e}")?;
        }
        Ok(())
    }
}

/// Fits `log sup_{shell} |u|` linearly over unit-width shells around
/// `centers` with midpoints `r_min, r_min + 1, …, ≤ r_max`. Empty shells and
/// shells where `u` vanishes are dropped; fewer than three remaining is an
/// error.
pub fn decay_fit<T: Real>(
    u: &GridField<T>,
    centers: &[LatticePoint],
    r_min: f64,
    r_max: f64,
) -> Result<DecayFit> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument(
            "decay fit needs at least one center".into(),
        ));
    }
    if !(r_min.is_finite() && r_max.is_finite() && r_min >= 0.0 && r_max >= r_min) {
        return Err(Error::InvalidArgument(format!(
            "invalid shell range [{r_min}, {r_max}]"
        )));
    }
    let grid = u.grid();
    let dist = distance_to_set(grid, centers);
    let mut radii = Vec::new();
    let mut max_abs = Vec::new();
    let mut r = r_min;
    while r <= r_max + 1e-9 {
        let (lo, hi) = (r - 0.5, r + 0.5);
        let shell = (0..dist.len()).filter(|&i| dist[i] >= lo && dist[i] < hi);
        let m = max_abs_over(u, shell).as_f64();
        if m > 0.0 {
            radii.push(r);
            max_abs.push(m);
        }
        r += 1.0;
    }
    if radii.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "only {} usable shells in [{r_min}, {r_max}]; need 3",
            radii.len()
        )));
    }
    let logs: Vec<f64> = max_abs.iter().map(|m| m.ln()).collect();
    let n = radii.len() as f64;
    let mx = radii.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let sxx: f64 = radii.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = radii
        .iter()
        .zip(&logs)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = logs.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = radii
        .iter()
        .zip(&logs)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(DecayFit {
        radii,
        max_abs,
        slope,
        intercept,
        r_squared,
        decaying: slope < 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LinfSmallness {
    pub r0: f64,
    /// Unit balls examined, one per mask site.
    pub balls: usize,
    /// Balls with local `E` norm at most `r0`.
    pub small_balls: usize,
    /// Small balls on which `max |u| > e⁻¹`.
    pub violations: usize,
    /// Largest `max |u|` over the small balls.
    pub worst_max: f64,
    pub first_violation: Option<LatticePoint>,
}

impl LinfSmallness {
    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

/// For every site `x0` of `mask`, computes the `E` norm of `u` on the closed
/// unit ball around `x0` (sites in the ball, edges with both ends in it) and,
/// where it is at most `r0`, checks `max_{B_1(x0)} |u| ≤ e⁻¹`.
pub fn linf_smallness<T: Real>(
    u: &GridField<T>,
    pair: &CoefficientPair<T>,
    mask: &TorusMask,
    r0: f64,
) -> Result<LinfSmallness> {
    u.grid().check_same(pair.grid())?;
    u.grid().check_same(mask.grid())?;
    let grid = *u.grid();
    let (dim, m) = (grid.dim(), grid.points_per_unit() as i64);
    if grid.halfwidth() < 2 {
        return Err(Error::InvalidGeometry("unit balls need L ≥ 2".into()));
    }
    let in_ball =
        |o: &[i64; 3]| o[..dim].iter().map(|&x| (x * x) as f64).sum::<f64>() <= (m * m) as f64;
    let mut offsets = Vec::new();
    let range = -m..=m;
    for a in range.clone() {
        for b in if dim >= 2 { range.clone() } else { 0..=0 } {
            for c in if dim >= 3 { range.clone() } else { 0..=0 } {
                let o = [a, b, c];
                if in_ball(&o) {
                    let fwd: Vec<bool> = (0..dim)
                        .map(|ax| {
                            let mut n = o;
                            n[ax] += 1;
                            in_ball(&n)
                        })
                        .collect();
                    offsets.push((o, fwd));
                }
            }
        }
    }
    let (x, v) = (u.values(), pair.v().values());
    let w = grid.cell_volume::<T>().as_f64();
    let mf = m as f64;
    let sites = mask.indices();
    let e = (-1.0_f64).exp();
    let per_ball = par_map_indices(sites.len(), |k| {
        let p0 = grid.lattice_point(sites[k]);
        let at = |o: &[i64; 3]| {
            let mut p = p0;
            for a in 0..dim {
                p[a] += o[a];
            }
            grid.site_of(&p)
        };
        let mut norm2 = 0.0;
        let mut mx = 0.0_f64;
        for (o, fwd) in &offsets {
            let i = at(o);
            let xi = x[i].as_f64();
            norm2 += v[i].as_f64() * xi * xi * w;
            mx = mx.max(xi.abs());
            for (ax, &f) in fwd.iter().enumerate() {
                if f {
                    let mut n = *o;
                    n[ax] += 1;
                    let d = (x[at(&n)].as_f64() - xi) * mf;
                    norm2 += d * d * w;
                }
            }
        }
        (norm2.sqrt(), mx)
    });
    let mut out = LinfSmallness {
        r0,
        balls: sites.len(),
        small_balls: 0,
        violations: 0,
        worst_max: 0.0,
        first_violation: None,
    };
    for (k, &(norm, mx)) in per_ball.iter().enumerate() {
        if norm <= r0 {
            out.small_balls += 1;
            out.worst_max = out.worst_max.max(mx);
            if mx > e {
                out.violations += 1;
                out.first_violation
                    .get_or_insert(grid.lattice_point(sites[k]));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_coefficients, CoefficientSpec, PeriodicGrid};

    #[test]
    fn gausson_decays_faster_than_slope_two() {
        let g = PeriodicGrid::new(1, 8, 32).unwrap();
        let u = GridField::from_fn(g, |x: &[f64]| (1.0 - 0.5 * x[0] * x[0]).exp());
        let fit = decay_fit(&u, &[[0, 0, 0]], 2.0, 4.0).unwrap();
        assert_eq!(fit.radii, vec![2.0, 3.0, 4.0]);
        assert!(fit.slope <= -2.0, "{fit:?}");
        assert!(fit.decaying);
        let mut buf = Vec::new();
        fit.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn constant_field_is_flagged() {
        let g = PeriodicGrid::new(1, 8, 8).unwrap();
        let fit = decay_fit(&GridField::constant(g, 0.3), &[[0, 0, 0]], 1.0, 5.0).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(!fit.decaying);
    }

    #[test]
    fn too_few_shells() {
        let g = PeriodicGrid::new(1, 8, 8).unwrap();
        let u = GridField::from_fn(g, |x: &[f64]| (-(x[0] * x[0])).exp());
        assert!(decay_fit(&u, &[[0, 0, 0]], 2.0, 3.0).is_err());
        assert!(decay_fit(&GridField::<f64>::zeros(g), &[[0, 0, 0]], 1.0, 5.0).is_err());
    }

    #[test]
    fn smallness_on_tail() {
        let g = PeriodicGrid::new(1, 16, 16).unwrap();
        let p = sample_coefficients(&g, &CoefficientSpec::Constant { v: 1.0, q: 1.0 }).unwrap();
        let u = GridField::from_fn(g, |x: &[f64]| (1.0 - 0.5 * x[0] * x[0]).exp());
        let mask = TorusMask::annulus(&g, 4.0, &[[0, 0, 0]]);
        let s = linf_smallness(&u, &p, &mask, 0.25).unwrap();
        assert_eq!(s.balls, mask.count());
        assert!(s.small_balls > 0 && s.passes());
        // a tall spike with small local norm cannot exist, so a huge r0 exposes the core
        let core = TorusMask::annulus(&g, 0.0, &[]);
        let s = linf_smallness(&u, &p, &core, 100.0).unwrap();
        assert!(!s.passes());
    }
}
