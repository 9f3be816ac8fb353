//! Identities and inequalities of the truncated nonlinearity over seeded
//! samples and proptest strategies.

use logbump::nonlinearity::{f, g, h, threshold, F, G, H};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 100_000;

/// Rounding slack for inequalities that hold with equality at some points.
fn leq(a: f64, b: f64) -> bool {
    a <= b + 1e-13 * (1.0 + a.abs() + b.abs())
}

/// Magnitudes spread over many decades plus points packed around the branch
/// threshold.
fn sample_magnitude(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..3) {
        0 => 10f64.powf(rng.gen_range(-8.0..1.7)),
        1 => threshold::<f64>() * (1.0 + rng.gen_range(-1e-3..1e-3)),
        _ => rng.gen_range(0.0..50.0),
    }
}

fn sample_signed(rng: &mut ChaCha8Rng) -> f64 {
    let s = sample_magnitude(rng);
    if rng.gen_bool(0.5) {
        s
    } else {
        -s
    }
}

#[test]
fn primitive_identity_on_half_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..SAMPLES {
        let s = sample_magnitude(&mut rng).min(50.0);
        let gap = (G(s) - 0.5 * g(s) * s + 0.5 * s * s).abs();
        assert!(gap <= 1e-12 * (1.0 + s * s), "s = {s}: gap {gap:e}");
    }
}

#[test]
fn g_over_s_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..SAMPLES {
        let a = sample_magnitude(&mut rng).max(1e-8);
        let b = a * (1.0 + rng.gen_range(1e-6..1.0));
        assert!(g(a) / a < g(b) / b, "increasing fails at {a}, {b}");
        assert!(g(-b) / -b > g(-a) / -a, "decreasing fails at -{b}, -{a}");
    }
}

#[test]
fn f_dominates_twice_its_primitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..SAMPLES {
        let s = sample_signed(&mut rng);
        assert!(F(s) >= 0.0);
        assert!(leq(2.0 * F(s), f(s) * s), "s = {s}");
    }
}

#[test]
fn scaling_inequalities_for_h() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..SAMPLES {
        let s = sample_magnitude(&mut rng).max(f64::MIN_POSITIVE);
        let t: f64 = rng.gen_range(0.0..=1.0);
        assert!(leq(t * h(s), h(t * s)), "θh(s) ≤ h(θs) at s = {s}, θ = {t}");
        assert!(
            leq(t * t * H(s), H(t * s)),
            "θ²H(s) ≤ H(θs) at s = {s}, θ = {t}"
        );
        assert!(leq(0.5 * h(s) * s, H(s)), "½h(s)s ≤ H(s) at s = {s}");
        assert!(leq(H(s), h(s) * s), "H(s) ≤ h(s)s at s = {s}");
    }
}

#[test]
fn young_type_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..SAMPLES {
        let s = sample_signed(&mut rng);
        let t = sample_signed(&mut rng);
        let theta = rng.gen_range(1e-6..=1.0);
        let lhs = (h(s) * t).abs();
        let rhs = theta * H(s) + H(t) / theta;
        assert!(
            leq(lhs, rhs),
            "s = {s}, t = {t}, θ = {theta}: {lhs} > {rhs}"
        );
    }
}

#[test]
fn h_primitive_is_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..SAMPLES {
        let a = sample_signed(&mut rng);
        let b = sample_signed(&mut rng);
        assert!(
            leq(H(0.5 * (a + b)), 0.5 * (H(a) + H(b))),
            "a = {a}, b = {b}"
        );
    }
}

#[test]
fn splitting_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..SAMPLES {
        let s = sample_signed(&mut rng);
        assert!(
            (g(s) - (f(s) - h(s))).abs() <= 1e-14 * (1.0 + g(s).abs()),
            "g at {s}"
        );
        assert!(
            (G(s) - (F(s) - H(s))).abs() <= 1e-14 * (1.0 + G(s).abs()),
            "G at {s}"
        );
    }
}

proptest! {
    #[test]
    fn h_is_odd_and_bounded(s in -1e3f64..1e3) {
        prop_assert_eq!(h(-s), -h(s));
        prop_assert!(h(s).abs() <= 2.0 * threshold::<f64>() + 1e-15);
    }

    #[test]
    fn primitives_are_even_where_truncated(s in -1e3f64..1e3) {
        prop_assert_eq!(H(-s), H(s));
        prop_assert!(H(s) >= 0.0);
    }

    #[test]
    fn h_increasing_and_concave_on_half_line(a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(h(lo) <= h(hi) + 1e-15);
        prop_assert!(h(0.5 * (lo + hi)) + 1e-14 >= 0.5 * (h(lo) + h(hi)));
    }

    #[test]
    fn f_increasing_on_half_line(a in 0.0f64..20.0, d in 0.0f64..5.0) {
        prop_assert!(f(a) <= f(a + d));
        prop_assert!(f(a) >= 0.0);
    }

    #[test]
    fn g_is_truncated_below(s in -1e3f64..-0.37) {
        prop_assume!(s < -threshold::<f64>());
        prop_assert_eq!(g(s), 2.0 * threshold::<f64>());
    }
}
