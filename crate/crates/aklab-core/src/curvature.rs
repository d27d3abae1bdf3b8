//! Levi-Civita and Hermitian connections, curvature tensors, the
//! codifferential δ, and the Hermitian scalar curvature s^∇ with its
//! symplectic gradient K.
//!
//! Sign conventions follow R(X,Y) = D_{\[X,Y\]} − \[D_X, D_Y\], so on coordinate
//! frames R(∂_i,∂_j) = −(∂_iΓ_j − ∂_jΓ_i + \[Γ_i,Γ_j\]); the Ricci tensor is
//! Ric(X,Y) = Σ_a g(R(e_a, X)e_a, Y), which is positive on the round sphere.
//! Frame sums Σ_a T(e_a, e_a) over an orthonormal frame are evaluated as the
//! equivalent contractions g^{ab} T(∂_a, ∂_b).

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::calculus::grid::PeriodicGrid;
use crate::calculus::smat;
use crate::calculus::tensor::{integrate, TensorField};
use crate::error::{Error, Result};
use crate::structure::AkStructure;

/// Christoffel symbols Γ^k_{ij} of the Levi-Civita connection together with
/// the Hermitian connection matrices A^∇_i = Γ_i − ½J(D_iJ).
pub struct ConnectionData {
    /// Γ^k_{ij}, layout [k; i, j], symmetric in (i, j).
    pub gamma: TensorField,
    /// (A^∇_i)^k_j, layout [k; i, j].
    pub a_herm: TensorField,
}

impl AkStructure {
    /// Cached Levi-Civita + Hermitian connection of this structure.
    pub fn connection(&self) -> &Arc<ConnectionData> {
        self.conn.get_or_init(|| Arc::new(christoffel(self)))
    }

    /// Cached curvature bundle of this structure.
    pub fn curvature(&self) -> &Arc<CurvatureBundle> {
        self.curv
            .get_or_init(|| Arc::new(curvature_bundle_uncached(self)))
    }
}

/// Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij}), plus the
/// Hermitian part; the metric is SPD by construction so no failure path.
pub fn christoffel(base: &AkStructure) -> ConnectionData {
    let grid = base.grid();
    let d = grid.dim();
    let dg: Vec<TensorField> = (0..d)
        .map(|a| base.g().spectral_partial(a).expect("metric field is finite"))
        .collect();
    let dj: Vec<TensorField> = (0..d)
        .map(|a| base.j().spectral_partial(a).expect("structure field is finite"))
        .collect();

    let mut gamma = TensorField::zeros(grid, 1, 2);
    let mut a_herm = TensorField::zeros(grid, 1, 2);
    let mut gamma_i = vec![0.0; d * d];
    let mut dij = vec![0.0; d * d];
    let mut tmp = vec![0.0; d * d];
    for pt in 0..grid.len() {
        let gi = base.g_inv().point(pt);
        let jm = base.j().point(pt);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += gi[k * d + l]
                            * (dg[i].point(pt)[j * d + l] + dg[j].point(pt)[i * d + l]
                                - dg[l].point(pt)[i * d + j]);
                    }
                    gamma.point_mut(pt)[k * d * d + i * d + j] = 0.5 * s;
                }
            }
        }
        // A^∇_i = Γ_i − ½ J (∂_i J + [Γ_i, J])
        let gpt = gamma.point(pt).to_vec();
        for i in 0..d {
            for k in 0..d {
                for mcol in 0..d {
                    gamma_i[k * d + mcol] = gpt[k * d * d + i * d + mcol];
                }
            }
            let comm = smat::commutator(&gamma_i, jm, d);
            for idx in 0..d * d {
                dij[idx] = dj[i].point(pt)[idx] + comm[idx];
            }
            smat::mul(jm, &dij, &mut tmp, d);
            let ah = a_herm.point_mut(pt);
            for k in 0..d {
                for mcol in 0..d {
                    ah[k * d * d + i * d + mcol] = gamma_i[k * d + mcol] - 0.5 * tmp[k * d + mcol];
                }
            }
        }
    }
    ConnectionData { gamma, a_herm }
}

/// Extracts the d×d matrix (Γ_i)^k_m from a [k; i, m] field at one point.
fn axis_matrix(field: &TensorField, pt: usize, axis: usize, d: usize, out: &mut [f64]) {
    let src = field.point(pt);
    for k in 0..d {
        for m in 0..d {
            out[k * d + m] = src[k * d * d + axis * d + m];
        }
    }
}

/// One directional component D_axis T of the Levi-Civita covariant
/// derivative, keeping the rank of T.
pub fn covariant_derivative_component(
    t: &TensorField,
    conn: &ConnectionData,
    axis: usize,
) -> Result<TensorField> {
    let grid = t.grid();
    let d = grid.dim();
    let p = t.upper();
    let q = t.lower();
    let rank = p + q;
    let ncomp = t.ncomp();
    let mut out = t.spectral_partial(axis)?;
    if rank == 0 {
        return Ok(out);
    }
    let mut gamma_i = vec![0.0; d * d];
    let strides: Vec<usize> = (0..rank).map(|s| d.pow((rank - 1 - s) as u32)).collect();
    for pt in 0..grid.len() {
        axis_matrix(&conn.gamma, pt, axis, d, &mut gamma_i);
        let src = t.point(pt);
        let dst = out.point_mut(pt);
        for c in 0..ncomp {
            let mut corr = 0.0;
            for slot in 0..rank {
                let stride = strides[slot];
                let idx = (c / stride) % d;
                let base = c - idx * stride;
                if slot < p {
                    // upper slot: + Γ^{idx}_{axis m} T[... m ...]
                    for m in 0..d {
                        corr += gamma_i[idx * d + m] * src[base + m * stride];
                    }
                } else {
                    // lower slot: − Γ^{m}_{axis idx} T[... m ...]
                    for m in 0..d {
                        corr -= gamma_i[m * d + idx] * src[base + m * stride];
                    }
                }
            }
            dst[c] += corr;
        }
    }
    Ok(out)
}

/// Full covariant derivative DT, adding the derivative index as the first
/// lower slot: (DT)^{K}_{a L} = (D_a T)^{K}_{L}.
pub fn covariant_derivative(t: &TensorField, conn: &ConnectionData) -> Result<TensorField> {
    let grid = t.grid();
    let d = grid.dim();
    let p = t.upper();
    let q = t.lower();
    let ncomp_in = t.ncomp();
    let mut out = TensorField::zeros(grid, p, q + 1);
    // Component layout of out: [U(p), a, L(q)] with the upper block slowest.
    let lower_block = d.pow(q as u32);
    for axis in 0..d {
        let da = covariant_derivative_component(t, conn, axis)?;
        for pt in 0..grid.len() {
            let src = da.point(pt);
            let dst = out.point_mut(pt);
            for c in 0..ncomp_in {
                let u = c / lower_block;
                let l = c % lower_block;
                dst[(u * d + axis) * lower_block + l] = src[c];
            }
        }
    }
    Ok(out)
}

/// Codifferential δT = −tr_g(DT) = −g^{ab}(D_a T)_{b…}, contracting the
/// derivative index against the first remaining lower index.
pub fn delta(base: &AkStructure, t: &TensorField) -> Result<TensorField> {
    let q = t.lower();
    if q == 0 {
        return Err(Error::RankMismatch {
            want_p: t.upper(),
            want_q: 1,
            got_p: t.upper(),
            got_q: 0,
        });
    }
    let grid = base.grid();
    let d = grid.dim();
    let p = t.upper();
    let dt = covariant_derivative(t, base.connection())?;
    let mut out = TensorField::zeros(grid, p, q - 1);
    let ncomp_out = out.ncomp();
    let rest_block = d.pow((q - 1) as u32);
    for pt in 0..grid.len() {
        let gi = base.g_inv().point(pt);
        let src = dt.point(pt);
        let dst = out.point_mut(pt);
        for c in 0..ncomp_out {
            let u = c / rest_block;
            let l = c % rest_block;
            let mut s = 0.0;
            for a in 0..d {
                for b in 0..d {
                    s += gi[a * d + b] * src[((u * d + a) * d + b) * rest_block + l];
                }
            }
            dst[c] = -s;
        }
    }
    Ok(out)
}

/// Sup-Frobenius residuals of ∇J and ∇g for the canonical Hermitian
/// connection (both vanish in the continuum).
pub fn hermitian_connection_residuals(base: &AkStructure) -> Result<(f64, f64)> {
    let grid = base.grid();
    let d = grid.dim();
    let conn = base.connection();
    let dj: Vec<TensorField> = (0..d)
        .map(|a| base.j().spectral_partial(a))
        .collect::<Result<_>>()?;
    let dg: Vec<TensorField> = (0..d)
        .map(|a| base.g().spectral_partial(a))
        .collect::<Result<_>>()?;
    let mut a_i = vec![0.0; d * d];
    let mut tmp1 = vec![0.0; d * d];
    let mut tmp2 = vec![0.0; d * d];
    let (mut res_j, mut res_g): (f64, f64) = (0.0, 0.0);
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let gm = base.g().point(pt);
        for axis in 0..d {
            axis_matrix(&conn.a_herm, pt, axis, d, &mut a_i);
            // ∇_i J = ∂_i J + [A_i, J]
            let comm = smat::commutator(&a_i, jm, d);
            let mut s = 0.0;
            for idx in 0..d * d {
                let r = dj[axis].point(pt)[idx] + comm[idx];
                s += r * r;
            }
            res_j = res_j.max(s.sqrt());
            // ∇_i g = ∂_i g − A_iᵀ g − g A_i
            let at = smat::transpose(&a_i, d);
            smat::mul(&at, gm, &mut tmp1, d);
            smat::mul(gm, &a_i, &mut tmp2, d);
            let mut s = 0.0;
            for idx in 0..d * d {
                let r = dg[axis].point(pt)[idx] - tmp1[idx] - tmp2[idx];
                s += r * r;
            }
            res_g = res_g.max(s.sqrt());
        }
    }
    Ok((res_j, res_g))
}

/// Sup residual of metric compatibility Dg = 0 for the Levi-Civita connection.
pub fn metric_compatibility_residual(base: &AkStructure) -> Result<f64> {
    let dg = covariant_derivative(base.g(), base.connection())?;
    Ok(dg.sup_abs())
}

/// All curvature quantities of a compatible structure.
pub struct CurvatureBundle {
    /// Levi-Civita curvature R^k_{ijl} = (R(∂_i,∂_j)∂_l)^k, layout [k; i,j,l].
    pub riemann: TensorField,
    /// Ricci tensor (0,2), symmetric.
    pub ric: TensorField,
    /// J-invariant part Ric⁺(X,Y) = ½(Ric(X,Y) + Ric(JX,JY)).
    pub ric_plus: TensorField,
    /// 2-form ρ(X,Y) = Ric⁺(JX, Y).
    pub rho: TensorField,
    /// Star Ricci form ρ*(X,Y) = ½Σ_a g(R(X,Y)e_a, Je_a).
    pub rho_star: TensorField,
    /// Hermitian Ricci form ρ^∇(X,Y) = ½Σ_a g(R^∇(X,Y)e_a, Je_a).
    pub rho_nabla: TensorField,
    /// Riemannian scalar curvature.
    pub s: TensorField,
    /// Hermitian scalar curvature s^∇ = 2(ρ^∇, ω).
    pub s_nabla: TensorField,
    /// Averaged Hermitian scalar curvature ∫ s^∇ vol / ∫ vol.
    pub s_bar: f64,
    /// Extremal field K = grad_ω s^∇.
    pub k_vec: TensorField,
}

fn curvature_tensor_from(conn_field: &TensorField, grid: &Arc<PeriodicGrid>) -> TensorField {
    let d = grid.dim();
    let dgamma: Vec<TensorField> = (0..d)
        .map(|a| conn_field.spectral_partial(a).expect("connection is finite"))
        .collect();
    let mut r = TensorField::zeros(grid, 1, 3);
    let mut gi = vec![0.0; d * d];
    let mut gj = vec![0.0; d * d];
    for pt in 0..grid.len() {
        let dst = r.point_mut(pt);
        for i in 0..d {
            for j in (i + 1)..d {
                axis_matrix(conn_field, pt, i, d, &mut gi);
                axis_matrix(conn_field, pt, j, d, &mut gj);
                let comm = smat::commutator(&gi, &gj, d);
                for k in 0..d {
                    for l in 0..d {
                        // R(∂_i,∂_j) = −(∂_iΓ_j − ∂_jΓ_i + [Γ_i,Γ_j])
                        let v = -(dgamma[i].point(pt)[k * d * d + j * d + l]
                            - dgamma[j].point(pt)[k * d * d + i * d + l]
                            + comm[k * d + l]);
                        dst[((k * d + i) * d + j) * d + l] = v;
                        dst[((k * d + j) * d + i) * d + l] = -v;
                    }
                }
            }
        }
    }
    r
}

fn curvature_bundle_uncached(base: &AkStructure) -> CurvatureBundle {
    let grid = base.grid();
    let d = grid.dim();
    let conn = base.connection();

    let riemann = curvature_tensor_from(&conn.gamma, grid);
    let r_herm = curvature_tensor_from(&conn.a_herm, grid);

    let mut ric = TensorField::zeros(grid, 0, 2);
    let mut ric_plus = TensorField::zeros(grid, 0, 2);
    let mut rho = TensorField::zeros(grid, 0, 2);
    let mut rho_star = TensorField::zeros(grid, 0, 2);
    let mut rho_nabla = TensorField::zeros(grid, 0, 2);
    let mut s = TensorField::zeros(grid, 0, 0);
    let mut s_nabla = TensorField::zeros(grid, 0, 0);

    for pt in 0..grid.len() {
        let gm = base.g().point(pt);
        let gi = base.g_inv().point(pt);
        let jm = base.j().point(pt);
        let rr = riemann.point(pt);
        let rh = r_herm.point(pt);

        // Ric_{jy} = g^{ab} R^k_{a j b} g_{ky}
        let ric_pt = ric.point_mut(pt);
        for jdx in 0..d {
            for y in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        for k in 0..d {
                            acc += gi[a * d + b] * rr[((k * d + a) * d + jdx) * d + b] * gm[k * d + y];
                        }
                    }
                }
                ric_pt[jdx * d + y] = acc;
            }
        }
        let ric_pt = ric.point(pt).to_vec();

        // s = g^{jy} Ric_{jy}
        let mut acc = 0.0;
        for jdx in 0..d {
            for y in 0..d {
                acc += gi[jdx * d + y] * ric_pt[jdx * d + y];
            }
        }
        s.values_mut()[pt] = acc;

        // Ric⁺, ρ = Ric⁺(J·,·)
        let rp = ric_plus.point_mut(pt);
        for x in 0..d {
            for y in 0..d {
                let mut acc = 0.5 * ric_pt[x * d + y];
                for a in 0..d {
                    for b in 0..d {
                        acc += 0.5 * jm[a * d + x] * jm[b * d + y] * ric_pt[a * d + b];
                    }
                }
                rp[x * d + y] = acc;
            }
        }
        let rp = ric_plus.point(pt).to_vec();
        let rho_pt = rho.point_mut(pt);
        for x in 0..d {
            for y in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    acc += jm[a * d + x] * rp[a * d + y];
                }
                rho_pt[x * d + y] = acc;
            }
        }

        // ρ*_{ij} = −½ tr(R_{ij}·J), ρ^∇ likewise from R^∇
        let rs = rho_star.point_mut(pt);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        acc += rr[((k * d + i) * d + j) * d + l] * jm[l * d + k];
                    }
                }
                rs[i * d + j] = -0.5 * acc;
            }
        }
        let rn = rho_nabla.point_mut(pt);
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    for l in 0..d {
                        acc += rh[((k * d + i) * d + j) * d + l] * jm[l * d + k];
                    }
                }
                rn[i * d + j] = -0.5 * acc;
            }
        }

        // s^∇ = 2(ρ^∇, ω) = ρ^∇_{ij} J^j_k g^{ki}
        let rn = rho_nabla.point(pt);
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    acc += rn[i * d + j] * jm[j * d + k] * gi[k * d + i];
                }
            }
        }
        s_nabla.values_mut()[pt] = acc;
    }

    let vol = TAU.powi(d as i32);
    let s_bar = integrate(&s_nabla).expect("curvature fields are finite") / vol;
    let k_vec = crate::structure::grad_omega(base, &s_nabla).expect("s^∇ is a finite scalar");

    CurvatureBundle {
        riemann,
        ric,
        ric_plus,
        rho,
        rho_star,
        rho_nabla,
        s,
        s_nabla,
        s_bar,
        k_vec,
    }
}

/// Sup-norm residual of the first Bianchi identity
/// R(X,Y)Z + R(Y,Z)X + R(Z,X)Y = 0.
pub fn first_bianchi_residual(bundle: &CurvatureBundle) -> f64 {
    let grid = bundle.riemann.grid();
    let d = grid.dim();
    let mut sup: f64 = 0.0;
    for pt in 0..grid.len() {
        let rr = bundle.riemann.point(pt);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    for l in 0..d {
                        let v = rr[((k * d + i) * d + j) * d + l]
                            + rr[((k * d + j) * d + l) * d + i]
                            + rr[((k * d + l) * d + i) * d + j];
                        sup = sup.max(v.abs());
                    }
                }
            }
        }
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::random_band_limited;
    use crate::calculus::tensor::TensorField;
    use crate::operators;
    use crate::structure::{AkStructure, SpPotential};

    fn random_structure(m: usize, n: usize, seed: u64, cutoff: usize, eps: f64) -> Arc<AkStructure> {
        let grid = PeriodicGrid::new(m, n).unwrap();
        AkStructure::from_potential(SpPotential::random(&grid, seed, cutoff, eps).unwrap()).unwrap()
    }

    #[test]
    fn flat_connection_and_curvature_vanish() {
        let grid = PeriodicGrid::new(1, 8).unwrap();
        let j = AkStructure::flat(&grid);
        let conn = j.connection();
        assert!(conn.gamma.sup_abs() < 1e-14);
        assert!(conn.a_herm.sup_abs() < 1e-14);
        let curv = j.curvature();
        assert!(curv.riemann.sup_abs() < 1e-14);
        assert!(curv.s_nabla.sup_abs() < 1e-13);
        assert!(curv.k_vec.sup_abs() < 1e-13);
        assert!(curv.s_bar.abs() < 1e-14);
    }

    #[test]
    fn christoffel_symmetric_and_metric_compatible() {
        let j = random_structure(1, 32, 3, 3, 0.2);
        let conn = j.connection();
        let grid = j.grid();
        let d = grid.dim();
        let mut sup: f64 = 0.0;
        for pt in 0..grid.len() {
            let g = conn.gamma.point(pt);
            for k in 0..d {
                for i in 0..d {
                    for jj in 0..d {
                        sup = sup.max((g[k * d * d + i * d + jj] - g[k * d * d + jj * d + i]).abs());
                    }
                }
            }
        }
        assert!(sup < 1e-12, "Γ symmetry {sup:.3e}");
        assert!(metric_compatibility_residual(&j).unwrap() < 1e-9);
    }

    #[test]
    fn hermitian_connection_preserves_j_and_g() {
        let j = random_structure(1, 32, 5, 3, 0.2);
        let (res_j, res_g) = hermitian_connection_residuals(&j).unwrap();
        assert!(res_j < 1e-9, "∇J residual {res_j:.3e}");
        assert!(res_g < 1e-9, "∇g residual {res_g:.3e}");
    }

    #[test]
    fn flat_laplacian_example() {
        let grid = PeriodicGrid::new(1, 16).unwrap();
        let j = AkStructure::flat(&grid);
        let f = TensorField::scalar_from_fn(&grid, |x| x[0].sin());
        let lap = operators::laplacian(&j, &f).unwrap();
        assert!(lap.sub(&f).sup_abs() < 1e-12);
    }

    #[test]
    fn delta_rejects_scalars() {
        let grid = PeriodicGrid::new(1, 8).unwrap();
        let j = AkStructure::flat(&grid);
        let f = TensorField::zeros(&grid, 0, 0);
        assert!(delta(&j, &f).is_err());
    }

    #[test]
    fn delta_adjoint_to_covariant_derivative() {
        // ⟨δT, S⟩ = ⟨T, DS⟩ on random band-limited inputs.
        let j = random_structure(1, 32, 7, 3, 0.1);
        let grid = j.grid();
        let t = random_band_limited(grid, 100, 4, 1.0, 1, 1).unwrap();
        let s = random_band_limited(grid, 101, 4, 1.0, 1, 0).unwrap();
        let lhs = operators::inner(&j, &delta(&j, &t).unwrap(), &s).unwrap();
        let ds = covariant_derivative(&s, j.connection()).unwrap();
        // (DS)^k_{a} matches T's (1,1) layout after noting δ contracts the
        // derivative slot of T against its own lower index.
        let rhs = operators::inner(&j, &t, &ds).unwrap();
        let rel = (lhs - rhs).abs() / lhs.abs().max(1e-14);
        assert!(rel < 1e-8, "adjointness rel {rel:.3e}");
    }

    #[test]
    fn delta_j_vanishes_on_compatible_structures() {
        let j = random_structure(1, 32, 9, 3, 0.2);
        let dj = delta(&j, j.j()).unwrap();
        assert!(dj.sup_abs() < 1e-8, "δJ = {:.3e}", dj.sup_abs());
    }

    #[test]
    fn delta_j_detects_noncompatible_structures() {
        let grid = PeriodicGrid::new(1, 16).unwrap();
        let bad = crate::oracles::noncompatible_structure(&grid, 3, 0.3).unwrap();
        let dj = delta(&bad, bad.j()).unwrap();
        assert!(dj.sup_abs() > 1e-2, "negative control δJ = {:.3e}", dj.sup_abs());
    }

    #[test]
    fn curvature_bundle_symmetries() {
        // The pair symmetry of R (hence Ric symmetry) holds only up to
        // aliasing, so use a well-resolved structure.
        let j = random_structure(2, 12, 11, 2, 0.01);
        let curv = j.curvature();
        let grid = j.grid();
        let d = grid.dim();
        let (mut ric_sym, mut ricp_inv, mut rho_anti): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for pt in 0..grid.len() {
            let ric = curv.ric.point(pt);
            let ricp = curv.ric_plus.point(pt);
            let jm = j.j().point(pt);
            for a in 0..d {
                for b in 0..d {
                    ric_sym = ric_sym.max((ric[a * d + b] - ric[b * d + a]).abs());
                    // Ric⁺(JX, JY) = Ric⁺(X, Y)
                    let mut lhs = 0.0;
                    for x in 0..d {
                        for y in 0..d {
                            lhs += jm[x * d + a] * jm[y * d + b] * ricp[x * d + y];
                        }
                    }
                    ricp_inv = ricp_inv.max((lhs - ricp[a * d + b]).abs());
                    let rho = curv.rho.point(pt);
                    rho_anti = rho_anti.max((rho[a * d + b] + rho[b * d + a]).abs());
                }
            }
        }
        // Ric symmetry holds up to product aliasing; Ric⁺ J-invariance and
        // the ρ antisymmetries are exact algebra on top of it.
        assert!(ric_sym < 1e-7, "Ric symmetry {ric_sym:.3e}");
        assert!(ricp_inv < ric_sym + 1e-12, "Ric⁺ J-invariance {ricp_inv:.3e}");
        assert!(rho_anti < 10.0 * ric_sym + 1e-12, "ρ antisymmetry {rho_anti:.3e}");
        // ρ* and ρ^∇ are antisymmetric by construction of the curvature tensor
        let mut sup: f64 = 0.0;
        for pt in 0..grid.len() {
            for form in [&curv.rho_star, &curv.rho_nabla] {
                let f = form.point(pt);
                for a in 0..d {
                    for b in 0..d {
                        sup = sup.max((f[a * d + b] + f[b * d + a]).abs());
                    }
                }
            }
        }
        assert!(sup < 1e-10);
        assert!(first_bianchi_residual(curv) < 1e-7);
    }

    #[test]
    fn extremal_field_annihilates_s_nabla_pointwise() {
        // ℒ_K s^∇ = (Jds^∇, ds^∇) = 0 pointwise.
        let j = random_structure(1, 32, 13, 3, 0.2);
        let curv = j.curvature();
        let grid = j.grid();
        let ds = crate::structure::differential(&curv.s_nabla).unwrap();
        let mut sup: f64 = 0.0;
        for pt in 0..grid.len() {
            let k = curv.k_vec.point(pt);
            let a = ds.point(pt);
            let mut s = 0.0;
            for i in 0..grid.dim() {
                s += k[i] * a[i];
            }
            sup = sup.max(s.abs());
        }
        let scale = curv.k_vec.sup_abs() * ds.sup_abs();
        assert!(sup <= 1e-12 * scale.max(1.0), "ℒ_K s^∇ = {sup:.3e}");
    }

    #[test]
    fn s_bar_agrees_across_structures() {
        let grid = PeriodicGrid::new(1, 32).unwrap();
        let mut bars = Vec::new();
        for seed in 0..3 {
            let j = AkStructure::from_potential(SpPotential::random(&grid, seed, 3, 0.15).unwrap())
                .unwrap();
            bars.push(j.curvature().s_bar);
        }
        let spread = bars.iter().cloned().fold(f64::MIN, f64::max)
            - bars.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-10, "s̄ spread {spread:.3e}");
    }
}
