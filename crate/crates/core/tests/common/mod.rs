//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use logbump::grid::{sample_coefficients, CoefficientSpec, GridField, PeriodicGrid};
use logbump::{Coefficients, Field};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `½ e² √π`, evaluated rather than quoted.
pub fn gausson_level() -> f64 {
    0.5 * std::f64::consts::E.powi(2) * std::f64::consts::PI.sqrt()
}

pub fn constant_pair(dim: usize, l: usize, m: usize) -> Coefficients {
    let g = PeriodicGrid::new(dim, l, m).unwrap();
    sample_coefficients(&g, &CoefficientSpec::Constant { v: 1.0, q: 1.0 }).unwrap()
}

pub fn cosine_pair(dim: usize, l: usize, m: usize) -> Coefficients {
    let g = PeriodicGrid::new(dim, l, m).unwrap();
    let spec = CoefficientSpec::Cosine {
        v0: 1.0,
        v1: 0.2,
        q0: 1.0,
        q1: 0.0,
    };
    sample_coefficients(&g, &spec).unwrap()
}

pub fn gausson(grid: PeriodicGrid) -> Field {
    GridField::from_fn(grid, |x: &[f64]| {
        (1.0 - 0.5 * x.iter().map(|t| t * t).sum::<f64>()).exp()
    })
}

/// Sum of a few random Gaussian bumps plus `offset`; all amplitudes are
/// positive when `positive` is set.
pub fn random_field(
    grid: PeriodicGrid,
    rng: &mut ChaCha8Rng,
    offset: f64,
    positive: bool,
) -> Field {
    let l = grid.halfwidth() as f64;
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..rng.gen_range(1..=4))
        .map(|_| {
            let c = (0..grid.dim()).map(|_| rng.gen_range(-l..l)).collect();
            let amp = rng.gen_range(0.1..2.0);
            let sign = if positive || rng.gen_bool(0.7) {
                1.0
            } else {
                -1.0
            };
            (c, rng.gen_range(0.3..1.5), sign * amp)
        })
        .collect();
    let period = 2.0 * l;
    GridField::from_fn(grid, move |x: &[f64]| {
        let mut s = offset;
        for (c, w, a) in &bumps {
            let d2: f64 = x
                .iter()
                .zip(c)
                .map(|(xi, ci)| {
                    let d = (xi - ci).rem_euclid(period);
                    let d = d.min(period - d);
                    d * d
                })
                .sum();
            s += a * (-0.5 * d2 / (w * w)).exp();
        }
        s
    })
}
