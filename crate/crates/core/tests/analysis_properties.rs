//! Concentration diagnostics on solver output and synthetic families.

mod common;

use common::{constant_pair, gausson, random_field};
use logbump::analysis::{
    calibrate_lq_constant, concentration_indicator, decay_fit, decompose_bumps,
    energy_splitting_check, windowed_lq_bound_check, LqCorpus, DEFAULT_THRESHOLD,
};
use logbump::functional::energy;
use logbump::grid::{inner_product_el, translate, GridField, PeriodicGrid};
use logbump::nonlinearity::H;
use logbump::solver::ground_state;
use logbump::SolverOptions;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn vanishing_forces_smallness() {
    let corpus = LqCorpus::generate(1, 40, 2.0, 7);
    let cal = calibrate_lq_constant(&constant_pair(1, 4, 8), 4.0, &corpus).unwrap();
    let mut prev = (f64::INFINITY, f64::INFINITY);
    for k in 1..=8 {
        let eps = 10f64.powi(-k);
        for l in [4, 8, 16] {
            let pair = constant_pair(1, l, 8);
            let u = GridField::constant(*pair.grid(), eps);
            let (d, _) = concentration_indicator(&u, 4.0).unwrap();
            let b = windowed_lq_bound_check(&u, 4.0, &pair).unwrap();
            assert!(b.lhs <= b.rhs(cal.c) * (1.0 + 1e-12), "ε = {eps}, L = {l}");
            if l == 4 {
                let hint: f64 = u.values().iter().map(|&x| H(x)).sum::<f64>()
                    * pair.grid().cell_volume::<f64>();
                assert!(d < prev.0 && hint < prev.1);
                prev = (d, hint);
            }
        }
    }
    assert!(prev.0 < 1e-7 && prev.1 < 1e-12);
}

#[test]
fn decomposition_of_ground_state() {
    let pair = constant_pair(1, 24, 16);
    let rep = ground_state(&pair, &SolverOptions::default()).unwrap();
    let gaps: Vec<f64> = [4.0, 8.0, 12.0]
        .iter()
        .map(|&radius| {
            let dec = decompose_bumps(&rep.field, &pair, radius, DEFAULT_THRESHOLD).unwrap();
            assert_eq!(dec.centers, vec![[0, 0, 0]]);
            energy_splitting_check(&dec, rep.energy.total)
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] <= 1e-3, "{gaps:?}");
}

#[test]
fn decay_is_translation_equivariant() {
    let g = PeriodicGrid::new(1, 8, 16).unwrap();
    let u = gausson(g);
    let shift = [48, 0, 0];
    let a = decay_fit(&u, &[[0, 0, 0]], 1.0, 4.0).unwrap();
    let b = decay_fit(&translate(&u, &shift), &[shift], 1.0, 4.0).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn remainder_matches_reglued_fields(seed in any::<u64>()) {
        let pair = constant_pair(1, 16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(*pair.grid(), &mut rng, 0.0, true);
        let Ok(dec) = decompose_bumps(&u, &pair, 1.0, DEFAULT_THRESHOLD) else { return Ok(()) };
        let sum = dec.profiles.iter().fold(GridField::zeros(*pair.grid()), |acc, p| acc.add_scaled(1.0, p));
        let rest = u.sub(&sum);
        let norm = inner_product_el(&rest, &rest, &pair).unwrap().sqrt();
        prop_assert!((norm - dec.remainder_norm).abs() <= 1e-12 * (1.0 + norm));
        prop_assert_eq!(dec.profiles.len(), dec.centers.len());
        for (p, e) in dec.profiles.iter().zip(&dec.energies) {
            prop_assert_eq!(energy(p, &pair).unwrap().total, *e);
        }
    }

    #[test]
    fn decomposition_shifts_with_the_field(seed in any::<u64>(), k in -16i64..16) {
        let pair = constant_pair(1, 16, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(*pair.grid(), &mut rng, 0.0, true);
        let shift = [8 * k, 0, 0];
        let moved = translate(&u, &shift);
        let (a, b) = (decompose_bumps(&u, &pair, 1.0, DEFAULT_THRESHOLD), decompose_bumps(&moved, &pair, 1.0, DEFAULT_THRESHOLD));
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            let g = pair.grid();
            for (ca, cb) in a.centers.iter().zip(&b.centers) {
                prop_assert_eq!(g.site_of(&[ca[0] + shift[0], 0, 0]), g.site_of(cb));
            }
            prop_assert!((a.remainder_norm - b.remainder_norm).abs() <= 1e-12 * (1.0 + a.remainder_norm));
        }
    }
}
