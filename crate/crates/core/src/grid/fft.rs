//! Exact inverse of `-Δ_h + c` on the periodic lattice by separable FFTs.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{GridField, PeriodicGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub struct ShiftedLaplacianSolver<T: Real> {
    grid: PeriodicGrid,
    shift: T,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// Eigenvalues of the 1D operator `-D²_h` by wavenumber.
    symbol: Vec<T>,
}

impl<T: Real> std::fmt::Debug for ShiftedLaplacianSolver<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftedLaplacianSolver")
            .field("grid", &self.grid)
            .field("shift", &self.shift)
            .finish()
    }
}

impl<T: Real> ShiftedLaplacianSolver<T> {
    /// Solver for `(-Δ_h + shift) x = b`; `shift` must be positive.
    pub fn new(grid: &PeriodicGrid, shift: T) -> Result<Self> {
        if !(shift > T::zero()) || !shift.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "spectral shift must be positive, got {shift}"
            )));
        }
        let n = grid.axis_len();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let m = T::from_usize_lossy(grid.points_per_unit());
        let four_over_h2 = T::lit(4.0) * m * m;
        let symbol = (0..n)
            .map(|k| {
                let s = (T::PI() * T::from_usize_lossy(k) / T::from_usize_lossy(n)).sin();
                four_over_h2 * s * s
            })
            .collect();
        Ok(Self {
            grid: *grid,
            shift,
            forward,
            inverse,
            symbol,
        })
    }

    pub fn shift(&self) -> T {
        self.shift
    }

    fn transform_axis(&self, data: &mut [Complex<T>], axis: usize, fft: &Arc<dyn Fft<T>>) {
        let n = self.grid.axis_len();
        let stride = self.grid.stride(axis);
        let block = n * stride;
        let run = |chunk: &mut [Complex<T>]| {
            if stride == 1 {
                fft.process(chunk);
                return;
            }
            let mut lines = vec![Complex::new(T::zero(), T::zero()); block];
            for j in 0..stride {
                for k in 0..n {
                    lines[j * n + k] = chunk[k * stride + j];
                }
            }
            fft.process(&mut lines);
            for j in 0..stride {
                for k in 0..n {
                    chunk[k * stride + j] = lines[j * n + k];
                }
            }
        };
        if data.len() / block >= 8 {
            data.par_chunks_mut(block).for_each(run);
        } else {
            data.chunks_mut(block).for_each(run);
        }
    }

    /// Applies `(-Δ_h + shift)^{-1}` to `rhs`.
    pub fn apply(&self, rhs: &[T]) -> Vec<T> {
        let g = self.grid;
        assert_eq!(rhs.len(), g.sites());
        let mut data: Vec<Complex<T>> = rhs.iter().map(|&x| Complex::new(x, T::zero())).collect();
        for a in 0..g.dim() {
            self.transform_axis(&mut data, a, &self.forward);
        }
        let scale = T::one() / T::from_usize_lossy(g.sites());
        let dim = g.dim();
        let sym = &self.symbol;
        let shift = self.shift;
        data.par_iter_mut()
            .with_min_len(4096)
            .enumerate()
            .for_each(|(i, z)| {
                let idx = g.unravel(i);
                let lam = (0..dim).fold(shift, |acc, a| acc + sym[idx[a]]);
                *z = *z * (scale / lam);
            });
        for a in 0..g.dim() {
            self.transform_axis(&mut data, a, &self.inverse);
        }
        data.into_iter().map(|z| z.re).collect()
    }

    pub fn apply_field(&self, rhs: &GridField<T>) -> GridField<T> {
        GridField::from_vec(*rhs.grid(), self.apply(rhs.values()))
    }
}
