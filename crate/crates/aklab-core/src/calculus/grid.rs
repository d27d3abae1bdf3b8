use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform discretization of the torus [0,2π)^{2m} with period 2π in every axis.
///
/// Carries the FFT plans used by the spectral calculus. The spectral derivative
/// of a trigonometric polynomial of per-axis degree < n/2 is exact to rounding.
pub struct PeriodicGrid {
    m: usize,
    n: usize,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl PeriodicGrid {
    /// Complex dimension `m` (1 or 2), `n` points per axis (even, ≥ 8).
    pub fn new(m: usize, n: usize) -> Result<Arc<Self>> {
        if !(1..=2).contains(&m) {
            return Err(Error::InvalidGrid(format!("complex dimension m={m}, expected 1 or 2")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n={n}, expected even n ≥ 8")));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            m,
            n,
            fft_fwd: planner.plan_fft_forward(n),
            fft_inv: planner.plan_fft_inverse(n),
        }))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Real dimension 2m.
    pub fn dim(&self) -> usize {
        2 * self.m
    }

    /// Grid spacing h = 2π/n.
    pub fn spacing(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Total number of grid points n^{2m}.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight h^{2m} of one grid point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Total volume (2π)^{2m}.
    pub fn total_volume(&self) -> f64 {
        TAU.powi(self.dim() as i32)
    }

    /// Stride of `axis` in the flattened point index (last axis fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim() - 1 - axis) as u32)
    }

    /// Decode the flattened point index into per-axis indices.
    pub fn point_multi_index(&self, point: usize, out: &mut [usize]) {
        let mut rem = point;
        for axis in (0..self.dim()).rev() {
            out[axis] = rem % self.n;
            rem /= self.n;
        }
    }

    /// Coordinates x ∈ [0,2π)^{2m} of a grid point.
    pub fn point_coords(&self, point: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut rem = point;
        for axis in (0..self.dim()).rev() {
            out[axis] = (rem % self.n) as f64 * h;
            rem /= self.n;
        }
    }

    pub fn same_grid(&self, other: &PeriodicGrid) -> bool {
        self.m == other.m && self.n == other.n
    }

    pub(crate) fn check_same(&self, other: &PeriodicGrid) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                lhs_m: self.m,
                lhs_n: self.n,
                rhs_m: other.m,
                rhs_n: other.n,
            })
        }
    }

    /// Signed frequency of DFT bin `idx`, with the Nyquist mode mapped to zero
    /// so that differentiation keeps real fields real.
    pub(crate) fn signed_freq(&self, idx: usize) -> i64 {
        let n = self.n as i64;
        let idx = idx as i64;
        if 2 * idx < n {
            idx
        } else if 2 * idx == n {
            0
        } else {
            idx - n
        }
    }

    pub(crate) fn fft_forward(&self, buf: &mut [Complex<f64>]) {
        self.fft_fwd.process(buf);
    }

    pub(crate) fn fft_inverse(&self, buf: &mut [Complex<f64>]) {
        self.fft_inv.process(buf);
    }
}
