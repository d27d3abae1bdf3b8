//! Principal-symbol calculus of the flow linearization.
//!
//! For a covector ξ, Ξ = ξ^♯⊗(Jξ) + (Jξ^♯)⊗ξ is a tangent-fiber vector and
//! the principal symbol of v ↦ 2JP(JP)*v is the rank-one map
//! σ̂₄(x,ξ)v = ½(v,Ξ)Ξ, so (σ̂₄v,v) = ½(v,Ξ)² ≥ 0 with kernel of fiber
//! codimension one: the flow is 4th order weakly parabolic, not strictly.
//!
//! Numerical extraction is exact only at the flat structure, where the
//! operator has constant coefficients and acts diagonally on plane waves.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::tensor::TensorField;
use crate::calculus::smat;
use crate::error::{Error, Result};
use crate::operators;
use crate::structure::{sp_basis, AkStructure, TangentField};

/// Fiber inner product (A,B)_g = g_{ik} g^{jl} A^i_j B^k_l at one grid point.
pub fn fiber_pairing(base: &AkStructure, pt: usize, a: &[f64], b: &[f64]) -> f64 {
    let d = base.grid().dim();
    let g = base.g().point(pt);
    let gi = base.g_inv().point(pt);
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    s += g[i * d + k] * gi[j * d + l] * a[i * d + j] * b[k * d + l];
                }
            }
        }
    }
    s
}

/// Ξ^d_c = −ξ^d ξ_b J^b_c + J^d_b ξ^b ξ_c at one grid point; satisfies
/// ΞJ + JΞ = 0, g-symmetry, and (Ξ,v) = 2(Jξ^♯, v(ξ^♯)).
pub fn make_xi(base: &AkStructure, pt: usize, xi: &[f64]) -> Result<Vec<f64>> {
    let d = base.grid().dim();
    if xi.iter().all(|v| *v == 0.0) {
        return Err(Error::Invalid("make_xi: ξ = 0".into()));
    }
    let gi = base.g_inv().point(pt);
    let jm = base.j().point(pt);
    let mut xi_sharp = vec![0.0; d];
    smat::matvec(gi, xi, &mut xi_sharp, d);
    let mut out = vec![0.0; d * d];
    for dd in 0..d {
        for c in 0..d {
            let mut s = 0.0;
            for b in 0..d {
                s += -xi_sharp[dd] * xi[b] * jm[b * d + c] + jm[dd * d + b] * xi_sharp[b] * xi[c];
            }
            out[dd * d + c] = s;
        }
    }
    Ok(out)
}

/// σ̂₄(x,ξ)v = ½(v,Ξ)Ξ: the rank-one principal symbol of 2JP(JP)*.
pub fn symbol_formula(base: &AkStructure, pt: usize, xi: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let xi_mat = make_xi(base, pt, xi)?;
    let coeff = 0.5 * fiber_pairing(base, pt, v, &xi_mat);
    Ok(xi_mat.iter().map(|x| coeff * x).collect())
}

/// Orthonormal basis of the pointwise tangent fiber
/// {v : vJ + Jv = 0, g-symmetric}, built from [J, B] over the sp(2m) basis
/// by modified Gram-Schmidt (two sweeps) in the fiber metric; candidates
/// that collapse relative to their original size are dependent and dropped.
/// Dimension m(m+1).
pub fn fiber_basis(base: &AkStructure, pt: usize) -> Vec<Vec<f64>> {
    let grid = base.grid();
    let d = grid.dim();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for b in sp_basis(grid.m()) {
        let jm = base.j().point(pt);
        let mut cand = smat::commutator(jm, &b, d);
        let norm_before = fiber_pairing(base, pt, &cand, &cand).max(0.0).sqrt();
        for _ in 0..2 {
            for prev in &basis {
                let c = fiber_pairing(base, pt, &cand, prev);
                for (x, y) in cand.iter_mut().zip(prev) {
                    *x -= c * y;
                }
            }
        }
        let norm = fiber_pairing(base, pt, &cand, &cand).max(0.0).sqrt();
        if norm > 1e-7 * norm_before.max(1.0) {
            for x in cand.iter_mut() {
                *x /= norm;
            }
            basis.push(cand);
        }
    }
    basis
}

/// Extracted action of v ↦ 2JP(JP)*v on the plane-wave pair
/// V·cos(k·x), V·sin(k·x) at the flat structure, where the operator has
/// constant coefficients and the extraction is exact (no lower-order terms).
pub fn extract_symbol(base: &Arc<AkStructure>, k: &[i64], v_fiber: &[f64]) -> Result<Vec<f64>> {
    let grid = base.grid();
    let d = grid.dim();
    let flat_res = {
        let j0 = smat::j0(grid.m());
        let mut sup: f64 = 0.0;
        for pt in 0..grid.len() {
            let jm = base.j().point(pt);
            let mut s = 0.0;
            for i in 0..d * d {
                let r = jm[i] - j0[i];
                s += r * r;
            }
            sup = sup.max(s.sqrt());
        }
        sup
    };
    if flat_res > 1e-12 {
        return Err(Error::Invalid(format!(
            "extract_symbol requires the flat structure (‖J − J₀‖ = {flat_res:.3e})"
        )));
    }
    if k.iter().all(|v| *v == 0) {
        return Err(Error::Invalid("extract_symbol: k = 0".into()));
    }

    let phase = |x: &[f64]| -> f64 {
        k.iter().zip(x).map(|(ki, xi)| *ki as f64 * xi).sum()
    };
    let vc = TensorField::from_fn(grid, 1, 1, |x, c| v_fiber[c] * phase(x).cos());
    let tangent = TangentField::try_new(base, vc)?;
    let s = operators::jp_star(&tangent)?;
    let jps = operators::jp(base, &s)?;
    let action = jps.field().scaled(2.0);

    // L² projection of the result onto cos(k·x) per component; the residual
    // orthogonal to the plane-wave pair must vanish at flat.
    let ncomp = d * d;
    let half_volume = 0.5 * TAU.powi(d as i32);
    let mut out = vec![0.0; ncomp];
    let mut x = vec![0.0; d];
    let mut residual: f64 = 0.0;
    let cell = grid.cell_volume();
    let mut proj_acc = vec![0.0; ncomp];
    for pt in 0..grid.len() {
        grid.point_coords(pt, &mut x);
        let c = phase(&x).cos();
        for comp in 0..ncomp {
            proj_acc[comp] += action.point(pt)[comp] * c * cell;
        }
    }
    for comp in 0..ncomp {
        out[comp] = proj_acc[comp] / half_volume;
    }
    for pt in 0..grid.len() {
        grid.point_coords(pt, &mut x);
        let c = phase(&x).cos();
        for comp in 0..ncomp {
            let r = action.point(pt)[comp] - out[comp] * c;
            residual = residual.max(r.abs());
        }
    }
    let scale = smat::frobenius(v_fiber).max(1e-300) * (k.iter().map(|v| (*v * *v) as f64).sum::<f64>()).powi(2);
    if residual > 1e-8 * scale.max(1.0) {
        return Err(Error::Invalid(format!(
            "extract_symbol: non-plane-wave residual {residual:.3e} (operator not constant-coefficient?)"
        )));
    }
    Ok(out)
}

/// Weak-parabolicity verification over random samples.
#[derive(Debug, Clone, Serialize)]
pub struct ParabolicityReport {
    pub samples: usize,
    /// min over samples of (σ̂₄v, v)
    pub min_pairing: f64,
    /// dimension of the pointwise tangent fiber, m(m+1)
    pub fiber_dim: usize,
    /// kernel dimension of σ̂₄ at a fixed generic ξ (fiber_dim − 1 for the
    /// rank-one symbol)
    pub kernel_dim: usize,
    pub pass: bool,
}

/// Samples (x, ξ, v) and checks (σ̂₄v,v) ≥ −1e−12 and the rank-one kernel.
pub fn parabolicity_report(base: &Arc<AkStructure>, samples: usize, seed: u64) -> Result<ParabolicityReport> {
    let grid = base.grid();
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_pairing = f64::INFINITY;
    for _ in 0..samples {
        let pt = rng.gen_range(0..grid.len());
        let basis = fiber_basis(base, pt);
        let mut xi = vec![0.0; d];
        loop {
            for x in xi.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            if xi.iter().map(|v| v * v).sum::<f64>() > 1e-2 {
                break;
            }
        }
        let mut v = vec![0.0; d * d];
        for b in &basis {
            let c: f64 = rng.gen_range(-1.0..1.0);
            for (x, y) in v.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        let sv = symbol_formula(base, pt, &xi, &v)?;
        let pairing = fiber_pairing(base, pt, &sv, &v);
        min_pairing = min_pairing.min(pairing);
    }

    // Kernel dimension at a fixed generic sample.
    let pt = rng.gen_range(0..grid.len());
    let basis = fiber_basis(base, pt);
    let fiber_dim = basis.len();
    let mut xi = vec![0.0; d];
    for x in xi.iter_mut() {
        *x = rng.gen_range(0.25..1.0);
    }
    let mut mat = nalgebra::DMatrix::zeros(fiber_dim, fiber_dim);
    for (a, ea) in basis.iter().enumerate() {
        let sv = symbol_formula(base, pt, &xi, ea)?;
        for (b, eb) in basis.iter().enumerate() {
            mat[(b, a)] = fiber_pairing(base, pt, &sv, eb);
        }
    }
    let svd = nalgebra::SVD::new(mat, false, false);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > 1e-10 * smax.max(1e-300))
        .count();
    let kernel_dim = fiber_dim - rank;

    Ok(ParabolicityReport {
        samples,
        min_pairing,
        fiber_dim,
        kernel_dim,
        pass: min_pairing >= -1e-12 && kernel_dim == fiber_dim - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::PeriodicGrid;
    use crate::structure::SpPotential;

    fn flat(m: usize, n: usize) -> Arc<AkStructure> {
        AkStructure::flat(&PeriodicGrid::new(m, n).unwrap())
    }

    fn random_structure(m: usize, n: usize, seed: u64, cutoff: usize, eps: f64) -> Arc<AkStructure> {
        let grid = PeriodicGrid::new(m, n).unwrap();
        AkStructure::from_potential(SpPotential::random(&grid, seed, cutoff, eps).unwrap()).unwrap()
    }

    #[test]
    fn xi_invariants_and_pairing_identity() {
        let j = random_structure(2, 8, 3, 2, 0.2);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
        let d = j.grid().dim();
        for _ in 0..100 {
            let pt = rng.gen_range(0..j.grid().len());
            let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
            if xi.iter().map(|v| v * v).sum::<f64>() < 1e-2 {
                continue;
            }
            let xi_mat = make_xi(&j, pt, &xi).unwrap();
            let diag = {
                // pointwise tangency of Ξ
                let jm = j.j().point(pt);
                let anti = {
                    let a = smat::matmul(&xi_mat, jm, d);
                    let b = smat::matmul(jm, &xi_mat, d);
                    a.iter().zip(&b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max)
                };
                let gm = j.g().point(pt);
                let gv = smat::matmul(gm, &xi_mat, d);
                let sym = (0..d * d)
                    .map(|i| (gv[i] - gv[(i % d) * d + i / d]).abs())
                    .fold(0.0, f64::max);
                anti.max(sym)
            };
            assert!(diag < 1e-12, "Ξ tangency {diag:.3e}");

            // (Ξ, v) = 2(Jξ^♯, v ξ^♯) for a random fiber vector
            let basis = fiber_basis(&j, pt);
            let mut v = vec![0.0; d * d];
            for b in &basis {
                let c: f64 = rng.gen_range(-1.0..1.0);
                for (x, y) in v.iter_mut().zip(b) {
                    *x += c * y;
                }
            }
            let lhs = fiber_pairing(&j, pt, &xi_mat, &v);
            let gi = j.g_inv().point(pt);
            let gm = j.g().point(pt);
            let jm = j.j().point(pt);
            let mut xi_sharp = vec![0.0; d];
            smat::matvec(gi, &xi, &mut xi_sharp, d);
            let mut jxs = vec![0.0; d];
            smat::matvec(jm, &xi_sharp, &mut jxs, d);
            let mut vxs = vec![0.0; d];
            smat::matvec(&v, &xi_sharp, &mut vxs, d);
            let mut rhs = 0.0;
            for a in 0..d {
                for b in 0..d {
                    rhs += 2.0 * gm[a * d + b] * jxs[a] * vxs[b];
                }
            }
            assert!((lhs - rhs).abs() < 1e-9, "pairing identity {lhs} vs {rhs}");
        }
    }

    #[test]
    fn xi_norm_and_j_orthogonality_at_flat() {
        let j = flat(1, 8);
        // ξ = dx₁: (Ξ,Ξ) = 2|ξ|⁴ = 2
        let xi_mat = make_xi(&j, 0, &[1.0, 0.0]).unwrap();
        assert!((fiber_pairing(&j, 0, &xi_mat, &xi_mat) - 2.0).abs() < 1e-14);
        // (Ξ, JΞ) = 0
        let jxi = smat::matmul(j.j().point(0), &xi_mat, 2);
        assert!(fiber_pairing(&j, 0, &xi_mat, &jxi).abs() < 1e-14);
        // Ξ(cξ) = c²Ξ(ξ)
        let xi2 = make_xi(&j, 0, &[3.0, 0.0]).unwrap();
        for (a, b) in xi2.iter().zip(&xi_mat) {
            assert!((a - 9.0 * b).abs() < 1e-13);
        }
        // errors
        assert!(make_xi(&j, 0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn symbol_formula_rank_one_properties() {
        let j = random_structure(1, 8, 7, 2, 0.2);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
        let d = j.grid().dim();
        let pt = 11;
        let xi = [0.63, -0.22];
        let xi_mat = make_xi(&j, pt, &xi).unwrap();
        // v = JΞ is annihilated
        let jxi = smat::matmul(j.j().point(pt), &xi_mat, d);
        let s = symbol_formula(&j, pt, &xi, &jxi).unwrap();
        assert!(s.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-13);
        // v = Ξ maps to ½(Ξ,Ξ)Ξ
        let s = symbol_formula(&j, pt, &xi, &xi_mat).unwrap();
        let c = 0.5 * fiber_pairing(&j, pt, &xi_mat, &xi_mat);
        for (a, b) in s.iter().zip(&xi_mat) {
            assert!((a - c * b).abs() < 1e-12);
        }
        // semi-positivity on random fiber vectors
        let basis = fiber_basis(&j, pt);
        for _ in 0..20 {
            let mut v = vec![0.0; d * d];
            for b in &basis {
                let c: f64 = rng.gen_range(-1.0..1.0);
                for (x, y) in v.iter_mut().zip(b) {
                    *x += c * y;
                }
            }
            let sv = symbol_formula(&j, pt, &xi, &v).unwrap();
            assert!(fiber_pairing(&j, pt, &sv, &v) >= -1e-13);
        }
        // quartic homogeneity, exact algebra
        let scaled: Vec<f64> = xi.iter().map(|x| 2.0 * x).collect();
        let v = &basis[0];
        let s1 = symbol_formula(&j, pt, &xi, v).unwrap();
        let s2 = symbol_formula(&j, pt, &scaled, v).unwrap();
        for (a, b) in s2.iter().zip(&s1) {
            assert!((a - 16.0 * b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn extraction_matches_formula_and_scales_quartically() {
        let j = flat(1, 16);
        let v = [0.0, 1.0, 1.0, 0.0];
        for k in [[1i64, 0], [0, 1], [2, 1]] {
            let ext = extract_symbol(&j, &k, &v).unwrap();
            let xi: Vec<f64> = k.iter().map(|x| *x as f64).collect();
            let want = symbol_formula(&j, 0, &xi, &v).unwrap();
            let gap = ext
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap < 1e-10, "extraction gap {gap:.3e} at k={k:?}");
        }
        // |k|⁴ scaling between (0,1) and (0,2)
        let e1 = extract_symbol(&j, &[0, 1], &v).unwrap();
        let e2 = extract_symbol(&j, &[0, 2], &v).unwrap();
        for (a, b) in e2.iter().zip(&e1) {
            assert!((a - 16.0 * b).abs() < 1e-9);
        }
        // kernel direction V = JΞ(k)
        let xi_mat = make_xi(&j, 0, &[1.0, 0.0]).unwrap();
        let jxi = smat::matmul(j.j().point(0), &xi_mat, 2);
        let ext = extract_symbol(&j, &[1, 0], &jxi).unwrap();
        assert!(ext.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn extraction_requires_flat_base_and_nonzero_k() {
        let j = random_structure(1, 16, 3, 3, 0.1);
        assert!(extract_symbol(&j, &[1, 0], &[0.0, 1.0, 1.0, 0.0]).is_err());
        let j = flat(1, 16);
        assert!(extract_symbol(&j, &[0, 0], &[0.0, 1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn parabolicity_report_confirms_weak_parabolicity() {
        let j = random_structure(1, 8, 21, 2, 0.2);
        let rep = parabolicity_report(&j, 200, 5).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.fiber_dim, 2);
        assert_eq!(rep.kernel_dim, 1);
        assert!(rep.min_pairing >= -1e-12);

        let j = random_structure(2, 8, 22, 2, 0.1);
        let rep = parabolicity_report(&j, 50, 6).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.fiber_dim, 6);
        assert_eq!(rep.kernel_dim, 5);
    }
}
