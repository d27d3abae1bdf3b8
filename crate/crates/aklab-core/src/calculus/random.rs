//! Deterministic band-limited test fields.
//!
//! Fields are synthesized from explicit Fourier mode lists so the same seed
//! reproduces the same smooth function on any grid resolution; amplitudes are
//! L¹-normalized, which bounds the sup-norm grid-independently.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;

use super::grid::PeriodicGrid;
use super::tensor::TensorField;
use crate::error::{Error, Result};

/// One real Fourier mode: amplitude of cos(k·x) and sin(k·x).
#[derive(Debug, Clone)]
pub struct FourierMode {
    pub k: Vec<i64>,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

/// Wavevectors 0 < |k|∞ ≤ cutoff in the canonical half-space (first nonzero
/// component positive), so each ±k pair appears once.
pub fn half_space_wavevectors(dim: usize, cutoff: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let range = 2 * cutoff + 1;
    let total = (range as usize).pow(dim as u32);
    for flat in 0..total {
        let mut k = vec![0i64; dim];
        let mut rem = flat;
        for item in k.iter_mut() {
            *item = (rem % range as usize) as i64 - cutoff;
            rem /= range as usize;
        }
        match k.iter().find(|v| **v != 0) {
            None => continue,
            Some(first) if *first < 0 => continue,
            Some(_) => out.push(k),
        }
    }
    out
}

/// Draws a zero-mean mode list with Σ(|cos| + |sin|) ≤ amplitude.
pub fn random_modes(rng: &mut ChaCha8Rng, dim: usize, cutoff: usize, amplitude: f64) -> Vec<FourierMode> {
    let mut modes: Vec<FourierMode> = half_space_wavevectors(dim, cutoff as i64)
        .into_iter()
        .map(|k| FourierMode {
            k,
            cos_amp: rng.gen_range(-1.0..1.0),
            sin_amp: rng.gen_range(-1.0..1.0),
        })
        .collect();
    let l1: f64 = modes.iter().map(|m| m.cos_amp.abs() + m.sin_amp.abs()).sum();
    if l1 > 0.0 {
        let scale = amplitude / l1;
        for m in &mut modes {
            m.cos_amp *= scale;
            m.sin_amp *= scale;
        }
    }
    modes
}

/// Evaluates Σ cos_amp·cos(k·x) + sin_amp·sin(k·x) on the grid by spectral
/// placement and one inverse FFT per axis.
pub fn synthesize_scalar(grid: &Arc<PeriodicGrid>, modes: &[FourierMode]) -> Result<TensorField> {
    let n = grid.n() as i64;
    for mode in modes {
        let sup = mode.k.iter().map(|v| v.abs()).max().unwrap_or(0);
        if 3 * sup > n {
            return Err(Error::BandLimit {
                cutoff: sup as usize,
                max: (n / 3) as usize,
            });
        }
    }
    let mut spectrum = vec![Complex::new(0.0, 0.0); grid.len()];
    for mode in modes {
        let plus = Complex::new(mode.cos_amp / 2.0, -mode.sin_amp / 2.0);
        spectrum[spectral_index(grid, &mode.k)] += plus;
        let neg: Vec<i64> = mode.k.iter().map(|v| -v).collect();
        spectrum[spectral_index(grid, &neg)] += plus.conj();
    }
    inverse_fft_all_axes(grid, &mut spectrum);
    let mut out = TensorField::zeros(grid, 0, 0);
    for (v, s) in out.values_mut().iter_mut().zip(&spectrum) {
        *v = s.re;
    }
    Ok(out)
}

fn spectral_index(grid: &PeriodicGrid, k: &[i64]) -> usize {
    let n = grid.n() as i64;
    let mut idx = 0usize;
    for &ka in k {
        idx = idx * grid.n() + ka.rem_euclid(n) as usize;
    }
    idx
}

/// Unnormalized inverse DFT along every axis: spectrum F[k] ↦ Σ F[k] e^{i k·x}.
fn inverse_fft_all_axes(grid: &PeriodicGrid, data: &mut [Complex<f64>]) {
    let n = grid.n();
    let mut line = vec![Complex::new(0.0, 0.0); n];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        let block = stride * n;
        for base_block in (0..grid.len()).step_by(block) {
            for offset in 0..stride {
                let base = base_block + offset;
                for (k, item) in line.iter_mut().enumerate() {
                    *item = data[base + k * stride];
                }
                grid.fft_inverse(&mut line);
                for (k, item) in line.iter().enumerate() {
                    data[base + k * stride] = *item;
                }
            }
        }
    }
}

/// Deterministic pseudo-random field with Fourier support |k|∞ ≤ cutoff and
/// component sup-norm ≤ amplitude, reproducible from the seed.
pub fn random_band_limited(
    grid: &Arc<PeriodicGrid>,
    seed: u64,
    cutoff: usize,
    amplitude: f64,
    p: usize,
    q: usize,
) -> Result<TensorField> {
    if 3 * cutoff > grid.n() {
        return Err(Error::BandLimit {
            cutoff,
            max: grid.n() / 3,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = TensorField::zeros(grid, p, q);
    let ncomp = out.ncomp();
    let npoints = grid.len();
    for comp in 0..ncomp {
        let modes = random_modes(&mut rng, grid.dim(), cutoff, amplitude);
        let scalar = synthesize_scalar(grid, &modes)?;
        for pt in 0..npoints {
            out.values_mut()[pt * ncomp + comp] = scalar.values()[pt];
        }
    }
    Ok(out)
}
