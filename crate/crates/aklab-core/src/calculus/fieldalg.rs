//! Pointwise tensor-field algebra: composition, metric duals, Lie derivatives.

use super::smat;
use super::tensor::TensorField;

/// Pointwise endomorphism composition (a∘b)^k_l = a^k_m b^m_l.
pub fn endo_compose(a: &TensorField, b: &TensorField) -> TensorField {
    let grid = a.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 1, 1);
    for pt in 0..grid.len() {
        smat::mul(a.point(pt), b.point(pt), out.point_mut(pt), d);
    }
    out
}

/// Pointwise trace of the composition, tr(u∘v), as a scalar field.
pub fn endo_trace_product(u: &TensorField, v: &TensorField) -> TensorField {
    let grid = u.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 0, 0);
    for pt in 0..grid.len() {
        let a = u.point(pt);
        let b = v.point(pt);
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                s += a[k * d + l] * b[l * d + k];
            }
        }
        out.values_mut()[pt] = s;
    }
    out
}

/// Extension of J to 1-forms: (Jα)(X) = α(J^{-1}X) = −α(JX),
/// i.e. (Jα)_p = −α_q J^q_p.
pub fn j_on_one_form(j: &TensorField, alpha: &TensorField) -> TensorField {
    let grid = j.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 0, 1);
    for pt in 0..grid.len() {
        let jm = j.point(pt);
        let a = alpha.point(pt);
        let o = out.point_mut(pt);
        for p in 0..d {
            let mut s = 0.0;
            for q in 0..d {
                s -= a[q] * jm[q * d + p];
            }
            o[p] = s;
        }
    }
    out
}

/// Musical flat: V^k ↦ g_{ki} V^k.
pub fn vec_to_form(g: &TensorField, v: &TensorField) -> TensorField {
    let grid = g.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 0, 1);
    for pt in 0..grid.len() {
        smat::matvec(g.point(pt), v.point(pt), out.point_mut(pt), d);
    }
    out
}

/// Musical sharp: α_i ↦ g^{ij} α_j.
pub fn form_to_vec(g_inv: &TensorField, alpha: &TensorField) -> TensorField {
    let grid = g_inv.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 1, 0);
    for pt in 0..grid.len() {
        smat::matvec(g_inv.point(pt), alpha.point(pt), out.point_mut(pt), d);
    }
    out
}

/// Coordinate Lie derivative of an endomorphism field along a vector field:
/// (ℒ_X v)^q_p = X^i ∂_i v^q_p − v^i_p ∂_i X^q + v^q_i ∂_p X^i.
pub fn lie_endo(x: &TensorField, v: &TensorField) -> crate::error::Result<TensorField> {
    let grid = x.grid();
    let d = grid.dim();
    let dx: Vec<TensorField> = (0..d)
        .map(|a| x.spectral_partial(a))
        .collect::<crate::error::Result<_>>()?;
    let dv: Vec<TensorField> = (0..d)
        .map(|a| v.spectral_partial(a))
        .collect::<crate::error::Result<_>>()?;
    let mut out = TensorField::zeros(grid, 1, 1);
    for pt in 0..grid.len() {
        let xv = x.point(pt);
        let vm = v.point(pt);
        let o = out.point_mut(pt);
        for q in 0..d {
            for p in 0..d {
                let mut s = 0.0;
                for i in 0..d {
                    s += xv[i] * dv[i].point(pt)[q * d + p];
                    s -= vm[i * d + p] * dx[i].point(pt)[q];
                    s += vm[q * d + i] * dx[p].point(pt)[i];
                }
                o[q * d + p] = s;
            }
        }
    }
    Ok(out)
}

/// Contracts one slot of a tensor with a pointwise d×d matrix field
/// (metric or inverse metric), preserving component ordering:
/// out[..., i at slot, ...] = Σ_j M_{ij} T[..., j at slot, ...].
pub fn contract_slot(t: &TensorField, slot: usize, metric: &TensorField) -> TensorField {
    let grid = t.grid();
    let d = grid.dim();
    let rank = t.upper() + t.lower();
    assert!(slot < rank);
    let ncomp = t.ncomp();
    let inner_stride = d.pow((rank - 1 - slot) as u32);
    let mut out = TensorField::zeros(grid, t.upper(), t.lower());
    for pt in 0..grid.len() {
        let m = metric.point(pt);
        let src = t.point(pt);
        let dst = out.point_mut(pt);
        for c in 0..ncomp {
            let i = (c / inner_stride) % d;
            let base = c - i * inner_stride;
            let mut s = 0.0;
            for j in 0..d {
                s += m[i * d + j] * src[base + j * inner_stride];
            }
            dst[c] = s;
        }
    }
    out
}

/// Fully metric-dual tensor: every upper index lowered with g, every lower
/// index raised with g^{-1}; component ordering is preserved positionally.
pub fn fiber_dual(t: &TensorField, g: &TensorField, g_inv: &TensorField) -> TensorField {
    let mut cur = t.clone();
    let p = t.upper();
    let q = t.lower();
    for slot in 0..p {
        cur = contract_slot(&cur, slot, g);
    }
    for slot in p..p + q {
        cur = contract_slot(&cur, slot, g_inv);
    }
    cur
}

/// Pointwise full metric contraction (S,T)_g as a scalar field.
pub fn fiber_inner(s: &TensorField, t: &TensorField, g: &TensorField, g_inv: &TensorField) -> TensorField {
    debug_assert_eq!(s.rank(), t.rank());
    let dual = fiber_dual(s, g, g_inv);
    let grid = s.grid();
    let ncomp = s.ncomp();
    let mut out = TensorField::zeros(grid, 0, 0);
    for pt in 0..grid.len() {
        let a = dual.point(pt);
        let b = t.point(pt);
        let mut acc = 0.0;
        for c in 0..ncomp {
            acc += a[c] * b[c];
        }
        out.values_mut()[pt] = acc;
    }
    out
}
