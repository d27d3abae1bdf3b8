use std::sync::Arc;

use rustfft::num_complex::Complex;

use super::grid::PeriodicGrid;
use crate::error::{Error, Result};

/// Grid-sampled real tensor with `p` upper and `q` lower indices.
///
/// Storage is point-major: `values[point * ncomp + comp]`, where `comp` runs
/// row-major over the index tuple (upper indices first, then lower). Scalar,
/// vector, one-form, endomorphism and 2-tensor fields are the ranks
/// (0,0), (1,0), (0,1), (1,1) and (0,2)/(2,0).
#[derive(Clone)]
pub struct TensorField {
    grid: Arc<PeriodicGrid>,
    p: usize,
    q: usize,
    values: Vec<f64>,
}

impl std::fmt::Debug for TensorField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TensorField")
            .field("grid", &self.grid)
            .field("rank", &(self.p, self.q))
            .finish()
    }
}

impl TensorField {
    pub fn zeros(grid: &Arc<PeriodicGrid>, p: usize, q: usize) -> Self {
        let ncomp = grid.dim().pow((p + q) as u32);
        Self {
            grid: Arc::clone(grid),
            p,
            q,
            values: vec![0.0; grid.len() * ncomp],
        }
    }

    /// Builds a field from a closure of the point coordinates and component index.
    ///
    /// The component multi-index is row-major over (upper..., lower...), each
    /// index in 0..2m.
    pub fn from_fn<F>(grid: &Arc<PeriodicGrid>, p: usize, q: usize, mut f: F) -> Self
    where
        F: FnMut(&[f64], usize) -> f64,
    {
        let mut out = Self::zeros(grid, p, q);
        let ncomp = out.ncomp();
        let mut x = vec![0.0; grid.dim()];
        for pt in 0..grid.len() {
            grid.point_coords(pt, &mut x);
            for c in 0..ncomp {
                out.values[pt * ncomp + c] = f(&x, c);
            }
        }
        out
    }

    pub fn scalar_from_fn<F>(grid: &Arc<PeriodicGrid>, mut f: F) -> Self
    where
        F: FnMut(&[f64]) -> f64,
    {
        Self::from_fn(grid, 0, 0, |x, _| f(x))
    }

    /// Constant field with the given per-point components.
    pub fn constant(grid: &Arc<PeriodicGrid>, p: usize, q: usize, comp: &[f64]) -> Self {
        let mut out = Self::zeros(grid, p, q);
        let ncomp = out.ncomp();
        assert_eq!(comp.len(), ncomp);
        for pt in 0..grid.len() {
            out.values[pt * ncomp..(pt + 1) * ncomp].copy_from_slice(comp);
        }
        out
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn rank(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn upper(&self) -> usize {
        self.p
    }

    pub fn lower(&self) -> usize {
        self.q
    }

    /// Number of components per point, (2m)^{p+q}.
    pub fn ncomp(&self) -> usize {
        self.grid.dim().pow((self.p + self.q) as u32)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn point(&self, pt: usize) -> &[f64] {
        let ncomp = self.ncomp();
        &self.values[pt * ncomp..(pt + 1) * ncomp]
    }

    pub fn point_mut(&mut self, pt: usize) -> &mut [f64] {
        let ncomp = self.ncomp();
        &mut self.values[pt * ncomp..(pt + 1) * ncomp]
    }

    pub fn check_rank(&self, p: usize, q: usize) -> Result<()> {
        if (self.p, self.q) == (p, q) {
            Ok(())
        } else {
            Err(Error::RankMismatch {
                want_p: p,
                want_q: q,
                got_p: self.p,
                got_q: self.q,
            })
        }
    }

    pub fn check_same_grid(&self, other: &TensorField) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Sup over grid points of the max-abs component.
    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Sup over grid points of the pointwise Frobenius norm.
    pub fn sup_frobenius(&self) -> f64 {
        let ncomp = self.ncomp();
        let mut sup: f64 = 0.0;
        for pt in 0..self.grid.len() {
            let s: f64 = self.values[pt * ncomp..(pt + 1) * ncomp]
                .iter()
                .map(|v| v * v)
                .sum();
            sup = sup.max(s.sqrt());
        }
        sup
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// self += c · other
    pub fn axpy(&mut self, c: f64, other: &TensorField) {
        debug_assert_eq!(self.rank(), other.rank());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn add(&self, other: &TensorField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &TensorField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Componentwise spectral derivative ∂/∂x_axis via the discrete Fourier
    /// transform; exact for band-limited input.
    pub fn spectral_partial(&self, axis: usize) -> Result<TensorField> {
        assert!(axis < self.grid.dim(), "axis {axis} out of range");
        self.check_finite("spectral_partial input")?;
        let n = self.grid.n();
        let ncomp = self.ncomp();
        let stride = self.grid.stride(axis) * ncomp;
        let mut out = self.clone();
        let mut line = vec![Complex::new(0.0, 0.0); n];

        // Enumerate line base points: all points with axis-index 0.
        let npoints = self.grid.len();
        let axis_stride_pts = self.grid.stride(axis);
        let block = axis_stride_pts * n; // points spanned by one axis cycle
        let inv_n = 1.0 / n as f64;
        for base_block in (0..npoints).step_by(block) {
            for offset in 0..axis_stride_pts {
                let base = (base_block + offset) * ncomp;
                for c in 0..ncomp {
                    for (k, item) in line.iter_mut().enumerate() {
                        *item = Complex::new(self.values[base + k * stride + c], 0.0);
                    }
                    self.grid.fft_forward(&mut line);
                    for (k, item) in line.iter_mut().enumerate() {
                        let freq = self.grid.signed_freq(k) as f64;
                        *item = Complex::new(-item.im * freq, item.re * freq) * inv_n;
                    }
                    self.grid.fft_inverse(&mut line);
                    for (k, item) in line.iter().enumerate() {
                        out.values[base + k * stride + c] = item.re;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// ∫_M f vol with vol = ω^m/m!, the Euclidean volume on the flat torus:
/// h^{2m} · Σ over grid points in a fixed sequential order.
pub fn integrate(f: &TensorField) -> Result<f64> {
    f.check_rank(0, 0)?;
    f.check_finite("integrate input")?;
    let mut sum = 0.0;
    for v in f.values() {
        sum += v;
    }
    Ok(sum * f.grid().cell_volume())
}
