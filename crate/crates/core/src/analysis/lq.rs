//! Unit-window `L^q` concentration and the windowed interpolation bound
//! `‖u‖_q^q ≤ C d^{q-2} ‖u‖²_E`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    inner_product_el, par_map_indices, reduce, CoefficientPair, GridField, LatticePoint,
    PeriodicGrid,
};
use crate::scalar::Real;

fn check_q(dim: usize, q: f64) -> Result<()> {
    let upper = if dim >= 3 {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    } else {
        f64::INFINITY
    };
    if !(q.is_finite() && q > 2.0 && q < upper) {
        return Err(Error::InvalidArgument(format!(
            "q = {q} must lie in (2, {upper}) for N = {dim}"
        )));
    }
    Ok(())
}

/// `∫_{D_1(n)} |u|^q` for every unit cube `D_1(n) = n + [0,1)^N`, windows in
/// lexicographic order of `n`.
fn window_integrals<T: Real>(u: &GridField<T>, q: T) -> Vec<T> {
    let g = u.grid();
    let (dim, m, per_axis) = (g.dim(), g.points_per_unit(), 2 * g.halfwidth());
    let windows = per_axis.pow(dim as u32);
    let n = g.axis_len();
    let x = u.values();
    let w = g.cell_volume::<T>();
    let inner = m.pow(dim as u32);
    par_map_indices(windows, |wi| {
        let mut wc = [0usize; 3];
        let mut rest = wi;
        for a in (0..dim).rev() {
            wc[a] = rest % per_axis;
            rest /= per_axis;
        }
        let sum = reduce::sum_by(inner, |k| {
            let mut rest = k;
            let mut idx = 0;
            let mut off = [0usize; 3];
            for a in (0..dim).rev() {
                off[a] = rest % m;
                rest /= m;
            }
            for a in 0..dim {
                idx = idx * n + wc[a] * m + off[a];
            }
            x[idx].abs().powf(q)
        });
        sum * w
    })
}

/// Lattice corner of window `wi` in lexicographic order.
fn window_corner(g: &PeriodicGrid, wi: usize) -> LatticePoint {
    let per_axis = 2 * g.halfwidth();
    let (m, l) = (g.points_per_unit() as i64, g.halfwidth() as i64);
    let mut p = [0i64; 3];
    let mut rest = wi;
    for a in (0..g.dim()).rev() {
        p[a] = ((rest % per_axis) as i64 - l) * m;
        rest /= per_axis;
    }
    p
}

/// `d = max_n ‖u‖_{L^q(D_1(n))}` over unit cubes and the lattice corner of the
/// first maximizing cube in lexicographic order.
pub fn concentration_indicator<T: Real>(u: &GridField<T>, q: f64) -> Result<(T, LatticePoint)> {
    check_q(u.grid().dim(), q)?;
    let ints = window_integrals(u, T::lit(q));
    let mut best = (T::zero(), 0usize);
    for (k, &v) in ints.iter().enumerate() {
        if v > best.0 {
            best = (v, k);
        }
    }
    let corner = if best.0 > T::zero() {
        window_corner(u.grid(), best.1)
    } else {
        [0; 3]
    };
    Ok((best.0.powf(T::lit(1.0 / q)), corner))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LqBound<T> {
    /// `∫|u|^q`
    pub lhs: T,
    /// `d^{q-2} ‖u‖²_E`
    pub base: T,
    /// `lhs / base`, defined as 0 when `lhs = 0`.
    pub ratio: T,
}

impl<T: Real> LqBound<T> {
    pub fn rhs(&self, c: T) -> T {
        c * self.base
    }
}

/// Both sides of the windowed interpolation inequality for `u`.
pub fn windowed_lq_bound_check<T: Real>(
    u: &GridField<T>,
    q: f64,
    pair: &CoefficientPair<T>,
) -> Result<LqBound<T>> {
    check_q(u.grid().dim(), q)?;
    let (d, _) = concentration_indicator(u, q)?;
    let lhs = u.lq_integral(T::lit(q));
    let base = d.powf(T::lit(q - 2.0)) * inner_product_el(u, u, pair)?;
    let ratio = if lhs == T::zero() {
        T::zero()
    } else {
        lhs / base
    };
    Ok(LqBound { lhs, base, ratio })
}

/// A test field described in physical coordinates, so that the same field
/// can be sampled on tori of different sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRecipe {
    /// `(center, width, amplitude)` of Gaussian bumps.
    pub bumps: Vec<([f64; 3], f64, f64)>,
    pub constant: f64,
}

impl FieldRecipe {
    pub fn sample<T: Real>(&self, grid: &PeriodicGrid) -> Result<GridField<T>> {
        let centers = self
            .bumps
            .iter()
            .map(|(c, w, a)| Ok((grid.snap(&c[..grid.dim()])?, *w, *a)))
            .collect::<Result<Vec<_>>>()?;
        let values = par_map_indices(grid.sites(), |i| {
            let p = grid.lattice_point(i);
            let s: f64 = centers
                .iter()
                .map(|(c, w, a)| {
                    let d = grid.torus_distance(&p, c);
                    a * (-0.5 * d * d / (w * w)).exp()
                })
                .sum();
            T::lit(self.constant + s)
        });
        GridField::new(*grid, values)
    }
}

/// Seeded corpus of recipes: a few deterministic extremes (small and unit
/// constants, a narrow spike, a wide bump) followed by random sums of one to
/// four Gaussian bumps of mixed sign centered in `[-extent, extent]^N`.
#[derive(Debug, Clone, Serialize)]
pub struct LqCorpus {
    pub seed: u64,
    pub recipes: Vec<FieldRecipe>,
}

impl LqCorpus {
    pub fn generate(dim: usize, count: usize, extent: f64, seed: u64) -> Self {
        let mut recipes = vec![
            FieldRecipe {
                bumps: vec![],
                constant: 1e-3,
            },
            FieldRecipe {
                bumps: vec![],
                constant: 1.0,
            },
            FieldRecipe {
                bumps: vec![([0.0; 3], 0.1, 1.0)],
                constant: 0.0,
            },
            FieldRecipe {
                bumps: vec![([0.0; 3], 1.0, 3.0)],
                constant: 0.0,
            },
        ];
        recipes.truncate(count);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while recipes.len() < count {
            let k = rng.gen_range(1..=4);
            let bumps = (0..k)
                .map(|_| {
                    let mut c = [0.0; 3];
                    for x in c.iter_mut().take(dim) {
                        *x = rng.gen_range(-extent..=extent);
                    }
                    let sign = if rng.gen_bool(0.75) { 1.0 } else { -1.0 };
                    (c, rng.gen_range(0.15..1.0), sign * rng.gen_range(0.05..3.0))
                })
                .collect();
            recipes.push(FieldRecipe {
                bumps,
                constant: 0.0,
            });
        }
        Self { seed, recipes }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LqCalibration {
    pub q: f64,
    pub c: f64,
    /// Index of the recipe attaining `c`.
    pub argmax: usize,
    pub ratios: Vec<f64>,
}

/// `C` = largest ratio over the corpus sampled on the grid of `pair`.
pub fn calibrate_lq_constant<T: Real>(
    pair: &CoefficientPair<T>,
    q: f64,
    corpus: &LqCorpus,
) -> Result<LqCalibration> {
    let mut ratios = Vec::with_capacity(corpus.recipes.len());
    for r in &corpus.recipes {
        let u = r.sample::<T>(pair.grid())?;
        ratios.push(windowed_lq_bound_check(&u, q, pair)?.ratio.as_f64());
    }
    let (argmax, c) =
        ratios.iter().copied().enumerate().fold(
            (0, 0.0),
            |best, (k, x)| if x > best.1 { (k, x) } else { best },
        );
    Ok(LqCalibration {
        q,
        c,
        argmax,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{sample_coefficients, translate, CoefficientSpec};

    #[test]
    fn zero_field() {
        let g = PeriodicGrid::new(2, 3, 4).unwrap();
        let z = GridField::<f64>::zeros(g);
        assert_eq!(concentration_indicator(&z, 4.0).unwrap(), (0.0, [0, 0, 0]));
        let p = sample_coefficients(&g, &CoefficientSpec::Constant { v: 1.0, q: 1.0 }).unwrap();
        let b = windowed_lq_bound_check(&z, 4.0, &p).unwrap();
        assert_eq!((b.lhs, b.base, b.ratio), (0.0, 0.0, 0.0));
    }

    #[test]
    fn locality_and_equivariance() {
        let g = PeriodicGrid::new(2, 4, 8).unwrap();
        let c = [1.5, -2.25];
        let u = GridField::from_fn(g, |x: &[f64]| {
            (-4.0 * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))).exp()
        });
        let (d, corner) = concentration_indicator(&u, 4.0).unwrap();
        assert!(d > 0.0);
        for a in 0..2 {
            let lo = corner[a] as f64 / 8.0;
            assert!(c[a] >= lo - 1.0 && c[a] <= lo + 2.0);
        }
        let shifted = translate(&u, &[8, -16, 0]);
        let (d2, corner2) = concentration_indicator(&shifted, 4.0).unwrap();
        assert_eq!(d.to_bits(), d2.to_bits());
        assert_eq!(
            g.site_of(&corner2),
            g.site_of(&[corner[0] + 8, corner[1] - 16, 0])
        );
    }

    #[test]
    fn constant_ratio_is_inverse_potential() {
        let g = PeriodicGrid::new(1, 5, 8).unwrap();
        let p = sample_coefficients(&g, &CoefficientSpec::Constant { v: 2.0, q: 1.0 }).unwrap();
        let u = GridField::constant(g, 0.3);
        let b = windowed_lq_bound_check(&u, 4.0, &p).unwrap();
        assert!((b.ratio - 0.5_f64).abs() < 1e-12);
    }

    #[test]
    fn q_range() {
        let g1 = PeriodicGrid::new(1, 2, 4).unwrap();
        let g3 = PeriodicGrid::new(3, 2, 4).unwrap();
        let u1 = GridField::<f64>::zeros(g1);
        let u3 = GridField::<f64>::zeros(g3);
        assert!(concentration_indicator(&u1, 2.0).is_err());
        assert!(concentration_indicator(&u1, 100.0).is_ok());
        assert!(concentration_indicator(&u3, 6.0).is_err());
        assert!(concentration_indicator(&u3, 5.9).is_ok());
        assert!(concentration_indicator(&u1, f64::NAN).is_err());
    }
}
