//! Order-fixed summation.
//!
//! Terms are summed in fixed-size chunks and the chunk partials are combined
//! by a pairwise tree. The chunk layout depends only on the term count, so
//! the result is bit-identical whatever the rayon pool size.

use rayon::prelude::*;

use crate::scalar::Real;

const CHUNK: usize = 1024;
/// Below this many chunks the reduction runs on the calling thread.
const PAR_CHUNKS: usize = 16;

fn pairwise<T: Real>(parts: &mut [T]) -> T {
    match parts.len() {
        0 => T::zero(),
        1 => parts[0],
        n => {
            let mid = n / 2;
            let (a, b) = parts.split_at_mut(mid);
            pairwise(a) + pairwise(b)
        }
    }
}

/// `Σ_{i<n} term(i)` with a thread-count independent evaluation order.
pub fn sum_by<T, F>(n: usize, term: F) -> T
where
    T: Real,
    F: Fn(usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let chunk_sum = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).fold(T::zero(), |acc, i| acc + term(i))
    };
    let mut parts: Vec<T> = if chunks >= PAR_CHUNKS {
        (0..chunks).into_par_iter().map(chunk_sum).collect()
    } else {
        (0..chunks).map(chunk_sum).collect()
    };
    pairwise(&mut parts)
}

pub fn sum<T: Real>(xs: &[T]) -> T {
    sum_by(xs.len(), |i| xs[i])
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    sum_by(a.len(), |i| a[i] * b[i])
}

/// Maximum of `term(i)`; `NaN` terms are ignored and an empty range gives `-inf`.
pub fn max_by<T, F>(n: usize, term: F) -> T
where
    T: Real,
    F: Fn(usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let chunk_max = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).fold(T::neg_infinity(), |acc, i| acc.max(term(i)))
    };
    if chunks >= PAR_CHUNKS {
        (0..chunks)
            .into_par_iter()
            .map(chunk_max)
            .reduce(T::neg_infinity, |a, b| a.max(b))
    } else {
        (0..chunks)
            .map(chunk_max)
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn independent_of_pool_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..100_003).map(|_| rng.gen_range(-1e3..1e3)).collect();
        let reference = sum(&xs);
        for threads in [1, 2, 3, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let s = pool.install(|| sum(&xs));
            assert_eq!(s.to_bits(), reference.to_bits());
        }
    }

    #[test]
    fn small_and_empty() {
        assert_eq!(sum::<f64>(&[]), 0.0);
        assert_eq!(sum(&[1.0_f64, 2.0, 3.0]), 6.0);
        assert_eq!(max_by(0, |_| 1.0_f64), f64::NEG_INFINITY);
        assert_eq!(max_by(5000, |i| i as f64), 4999.0);
    }

    #[test]
    fn pairwise_accuracy() {
        let xs = vec![0.1_f64; 1 << 20];
        let s = sum(&xs);
        assert!((s - 104_857.6).abs() < 1e-8);
    }
}
