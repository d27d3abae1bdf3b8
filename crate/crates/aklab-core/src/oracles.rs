//! Independent verification oracles.
//!
//! Everything here deliberately avoids the production code paths it checks:
//! the Brioschi formula computes Gaussian curvature straight from metric
//! components and plain spectral partials (no Christoffels, no curvature
//! tensor); the flat biharmonic oracle uses raw coordinate Laplacians; the
//! gradient-pairing oracle evaluates ⟨ℒ_{grad_ω f}J, v⟩ = −2⟨D grad_ω f, Jv⟩
//! from the covariant derivative of the symplectic gradient.

use std::sync::Arc;

use crate::calculus::fieldalg;
use crate::calculus::tensor::TensorField;
use crate::curvature::covariant_derivative;
use crate::error::{Error, Result};
use crate::operators;
use crate::structure::{grad_omega, AkStructure, TangentField};

/// Gaussian curvature of an m=1 metric from the Brioschi formula:
/// K = (det M₁ − det M₂) / (EG − F²)², built from E = g₁₁, F = g₁₂, G = g₂₂
/// and their first and second spectral derivatives.
pub fn brioschi_gauss_curvature(base: &AkStructure) -> Result<TensorField> {
    let grid = base.grid();
    if grid.m() != 1 {
        return Err(Error::Invalid("Brioschi oracle is two-dimensional (m = 1)".into()));
    }
    let comp = |idx: usize| -> TensorField {
        let mut out = TensorField::zeros(grid, 0, 0);
        for pt in 0..grid.len() {
            out.values_mut()[pt] = base.g().point(pt)[idx];
        }
        out
    };
    let e = comp(0);
    let f = comp(1);
    let g = comp(3);

    let e_u = e.spectral_partial(0)?;
    let e_v = e.spectral_partial(1)?;
    let g_u = g.spectral_partial(0)?;
    let g_v = g.spectral_partial(1)?;
    let f_u = f.spectral_partial(0)?;
    let f_v = f.spectral_partial(1)?;
    let e_vv = e_v.spectral_partial(1)?;
    let g_uu = g_u.spectral_partial(0)?;
    let f_uv = f_u.spectral_partial(1)?;

    let det3 = |m: &[f64; 9]| -> f64 {
        m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
            + m[2] * (m[3] * m[7] - m[4] * m[6])
    };

    let mut out = TensorField::zeros(grid, 0, 0);
    for pt in 0..grid.len() {
        let (ee, ff, gg) = (e.values()[pt], f.values()[pt], g.values()[pt]);
        let m1 = [
            -0.5 * e_vv.values()[pt] + f_uv.values()[pt] - 0.5 * g_uu.values()[pt],
            0.5 * e_u.values()[pt],
            f_u.values()[pt] - 0.5 * e_v.values()[pt],
            f_v.values()[pt] - 0.5 * g_u.values()[pt],
            ee,
            ff,
            0.5 * g_v.values()[pt],
            ff,
            gg,
        ];
        let m2 = [
            0.0,
            0.5 * e_v.values()[pt],
            0.5 * g_u.values()[pt],
            0.5 * e_v.values()[pt],
            ee,
            ff,
            0.5 * g_u.values()[pt],
            ff,
            gg,
        ];
        let den = ee * gg - ff * ff;
        out.values_mut()[pt] = (det3(&m1) - det3(&m2)) / (den * den);
    }
    Ok(out)
}

/// ½(Σᵢ∂ᵢ²)² f by plain spectral partials: the flat-structure value of the
/// Lichnerowicz operator ½Δ².
pub fn flat_biharmonic_half(f: &TensorField) -> Result<TensorField> {
    let grid = f.grid();
    let mut lap = TensorField::zeros(grid, 0, 0);
    for axis in 0..grid.dim() {
        let d2 = f.spectral_partial(axis)?.spectral_partial(axis)?;
        lap.axpy(-1.0, &d2);
    }
    let mut out = TensorField::zeros(grid, 0, 0);
    for axis in 0..grid.dim() {
        let d2 = lap.spectral_partial(axis)?.spectral_partial(axis)?;
        out.axpy(-0.5, &d2);
    }
    Ok(out)
}

/// Right-hand side of the pairing identity
/// ⟨ℒ_{grad_ω f}J, v⟩ = −2⟨D grad_ω f, Jv⟩ for tangent v.
pub fn gradient_pairing_rhs(base: &Arc<AkStructure>, f: &TensorField, v: &TangentField) -> Result<f64> {
    let x = grad_omega(base, f)?;
    let dx = covariant_derivative(&x, base.connection())?;
    let jv = fieldalg::endo_compose(base.j(), v.field());
    Ok(-2.0 * operators::inner(base, &dx, &jv)?)
}

/// Negative-control structure: an additive band-limited corruption of J₀
/// that is neither an almost complex structure nor ω-compatible, so
/// identities that rely on compatibility (δJ = 0 in particular) fail at
/// O(amplitude) instead of at discretization level.
pub fn noncompatible_structure(
    grid: &Arc<crate::calculus::PeriodicGrid>,
    seed: u64,
    amplitude: f64,
) -> Result<Arc<AkStructure>> {
    use crate::calculus::{random_band_limited, smat};
    let d = grid.dim();
    let e = random_band_limited(grid, seed, 2, amplitude, 1, 1)?;
    let j0 = smat::j0(grid.m());
    let mut j = TensorField::zeros(grid, 1, 1);
    for pt in 0..grid.len() {
        let src = e.point(pt);
        let dst = j.point_mut(pt);
        for i in 0..d * d {
            dst[i] = j0[i] + src[i];
        }
    }
    AkStructure::from_j_field_unchecked(j)
}

/// Kähler reduction of the explicit Lichnerowicz formula, valid on m=1
/// (every compatible structure on T² is Kähler):
/// 𝕃f = ½Δ²f + ½(ds, df) + (ρ, dd^c f).
pub fn kahler_lichnerowicz(base: &Arc<AkStructure>, f: &TensorField) -> Result<TensorField> {
    let grid = base.grid();
    let d = grid.dim();
    if grid.m() != 1 {
        return Err(Error::Invalid("Kähler reduction oracle is for m = 1".into()));
    }
    let curv = Arc::clone(base.curvature());

    let lap = operators::laplacian(base, f)?;
    let mut out = operators::laplacian(base, &lap)?;
    out.scale(0.5);

    let ds = crate::structure::differential(&curv.s)?;
    let df = crate::structure::differential(f)?;
    let ds_df = fieldalg::fiber_inner(&ds, &df, base.g(), base.g_inv());
    out.axpy(0.5, &ds_df);

    let dcf = crate::structure::d_c(base, f)?;
    let mut ddcf = TensorField::zeros(grid, 0, 2);
    for i in 0..d {
        let di = dcf.spectral_partial(i)?;
        for pt in 0..grid.len() {
            let row = ddcf.point_mut(pt);
            for j in 0..d {
                row[i * d + j] += di.point(pt)[j];
                row[j * d + i] -= di.point(pt)[j];
            }
        }
    }
    // ½-normalized 2-form product
    let rho_pairing = fieldalg::fiber_inner(&curv.rho, &ddcf, base.g(), base.g_inv());
    out.axpy(0.5, &rho_pairing);
    Ok(out)
}
