//! Krylov solvers on flat vectors with deterministic inner products.

use crate::error::{Error, Result};
use crate::grid::reduce;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct KrylovOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final relative residual `‖b - Ax‖ / ‖b‖` (Euclidean).
    pub rel_residual: T,
    pub converged: bool,
}

fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

fn norm<T: Real>(x: &[T]) -> T {
    reduce::dot(x, x).sqrt()
}

fn true_rel_residual<T: Real>(apply: &impl Fn(&[T]) -> Vec<T>, b: &[T], x: &[T], bnorm: T) -> T {
    let ax = apply(x);
    let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
    norm(&r) / bnorm
}

/// Preconditioned conjugate gradients for SPD `A`; `precond` applies an SPD
/// approximation of `A^{-1}`. Starts from zero.
pub fn pcg<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    rtol: T,
    max_iter: usize,
) -> KrylovOutcome<T> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![T::zero(); n];
    if bnorm == T::zero() {
        return KrylovOutcome {
            x,
            iterations: 0,
            rel_residual: T::zero(),
            converged: true,
        };
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = reduce::dot(&r, &z);
    let mut it = 0;
    let mut rel = T::one();
    while it < max_iter {
        it += 1;
        let ap = apply(&p);
        let pap = reduce::dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        rel = norm(&r) / bnorm;
        if rel <= rtol {
            break;
        }
        z = precond(&r);
        let rz_new = reduce::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let rel_true = true_rel_residual(&apply, b, &x, bnorm);
    let converged = rel_true <= rtol * T::lit(10.0) && rel <= rtol;
    KrylovOutcome {
        x,
        iterations: it,
        rel_residual: rel_true,
        converged,
    }
}

/// Iterations between true-residual checks in MINRES.
const CHECK_EVERY: usize = 10;

/// Preconditioned MINRES for symmetric, possibly indefinite `A` with an SPD
/// preconditioner. Starts from zero.
///
/// Near-singular systems lose orthogonality in the Lanczos basis, after which
/// the recurrence residual keeps falling while the true one grows. The true
/// residual is checked periodically and the best checked iterate is returned
/// if the final one is worse.
pub fn minres<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    rtol: T,
    max_iter: usize,
) -> KrylovOutcome<T> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let bnorm = norm(b);
    if bnorm == T::zero() {
        return KrylovOutcome {
            x,
            iterations: 0,
            rel_residual: T::zero(),
            converged: true,
        };
    }
    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = reduce::dot(b, &y);
    if !(beta1 > T::zero()) {
        return KrylovOutcome {
            x,
            iterations: 0,
            rel_residual: T::one(),
            converged: false,
        };
    }
    let beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (T::zero(), beta1);
    let (mut dbar, mut epsln, mut phibar) = (T::zero(), T::zero(), beta1);
    let (mut cs, mut sn) = (-T::one(), T::zero());
    let mut w = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    let mut it = 0;
    let mut hit = false;
    let mut best = (x.clone(), T::one());
    while it < max_iter {
        it += 1;
        let s = T::one() / beta;
        let v: Vec<T> = y.iter().map(|&yi| s * yi).collect();
        y = apply(&v);
        if it >= 2 {
            axpy(&mut y, -(beta / oldb), &r1);
        }
        let alfa = reduce::dot(&v, &y);
        axpy(&mut y, -(alfa / beta), &r2);
        std::mem::swap(&mut r1, &mut r2);
        r2.clone_from(&y);
        y = precond(&r2);
        oldb = beta;
        let bb = reduce::dot(&r2, &y);
        if bb < T::zero() {
            break;
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(T::epsilon());
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;
        let denom = T::one() / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(w1.iter().zip(&w2))
            .map(|(&vi, (&a, &b))| (vi - oldeps * a - delta * b) * denom)
            .collect();
        axpy(&mut x, phi, &w);
        if it % CHECK_EVERY == 0 {
            let rel = true_rel_residual(&apply, b, &x, bnorm);
            if rel < best.1 {
                best = (x.clone(), rel);
            }
        }
        if phibar / beta1 <= rtol || beta == T::zero() {
            hit = true;
            break;
        }
    }
    let mut rel = true_rel_residual(&apply, b, &x, bnorm);
    if best.1 < rel {
        (x, rel) = best;
    }
    let converged = (hit && rel <= T::lit(1e3) * rtol) || rel <= T::lit(1e2) * rtol;
    KrylovOutcome {
        x,
        iterations: it,
        rel_residual: rel,
        converged,
    }
}

/// Maps a non-converged outcome to an error.
pub fn require<T: Real>(out: KrylovOutcome<T>, what: &str) -> Result<KrylovOutcome<T>> {
    if out.converged {
        Ok(out)
    } else {
        log::debug!(
            "{what}: {} iterations, residual {}",
            out.iterations,
            out.rel_residual
        );
        Err(Error::LinearSolver {
            iterations: out.iterations,
            residual: out.rel_residual.as_f64(),
        })
    }
}
