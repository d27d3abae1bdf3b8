//! ω-compatible almost complex structures on the flat torus and the tangent
//! calculus of the space they form.
//!
//! A structure is generated by a potential a(x) with values in sp(2m,ℝ) via
//! fiberwise conjugation J(x) = exp(−a(x))·J₀·exp(a(x)), which keeps the
//! compatibility constraints exact by construction: the induced metric is
//! g = exp(a)ᵀ exp(a), always symmetric positive definite.

use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::grid::PeriodicGrid;
use crate::calculus::random::{random_modes, synthesize_scalar, FourierMode};
use crate::calculus::tensor::TensorField;
use crate::calculus::{fieldalg, matexp, smat};
use crate::curvature::{ConnectionData, CurvatureBundle};
use crate::error::{Error, Result};

/// Construction tolerance for the pointwise structure invariants
/// J² = −I, JᵀΩ₀J = Ω₀ and aᵀΩ₀ + Ω₀a = 0.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// Relative tolerance for membership in T_J𝒜𝒞_ω.
pub const TANGENT_TOL: f64 = 1e-8;

/// Documented ordered basis of sp(2m,ℝ) = {\[\[A,B\],\[C,−Aᵀ\]\] : B,C symmetric}:
/// first the symmetric B block (row-major pairs i ≤ j), then the symmetric
/// C block (i ≤ j), then the full gl(m) block A (row-major).
pub fn sp_basis(m: usize) -> Vec<Vec<f64>> {
    let d = 2 * m;
    let mut basis = Vec::with_capacity(2 * m * m + m);
    // B block: upper-right, symmetric.
    for i in 0..m {
        for j in i..m {
            let mut b = vec![0.0; d * d];
            b[i * d + (m + j)] = 1.0;
            b[j * d + (m + i)] = 1.0;
            basis.push(b);
        }
    }
    // C block: lower-left, symmetric.
    for i in 0..m {
        for j in i..m {
            let mut b = vec![0.0; d * d];
            b[(m + i) * d + j] = 1.0;
            b[(m + j) * d + i] = 1.0;
            basis.push(b);
        }
    }
    // gl part: A in the upper-left, D = −Aᵀ in the lower-right.
    for i in 0..m {
        for j in 0..m {
            let mut b = vec![0.0; d * d];
            b[i * d + j] = 1.0;
            b[(m + j) * d + (m + i)] = -1.0;
            basis.push(b);
        }
    }
    basis
}

/// One Fourier mode of an sp(2m,ℝ)-valued potential: the coefficient of
/// `sp_basis(m)[basis]` carries cos_amp·cos(k·x) + sin_amp·sin(k·x).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpMode {
    pub k: Vec<i64>,
    pub basis: usize,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

/// Field of fiberwise symplectic-Lie-algebra matrices generating compatible
/// structures.
#[derive(Debug, Clone)]
pub struct SpPotential {
    a: TensorField,
}

impl SpPotential {
    /// Wraps an endomorphism field after checking pointwise membership in
    /// End(TM, ω): aᵀΩ₀ + Ω₀a = 0.
    pub fn new(a: TensorField) -> Result<Self> {
        a.check_rank(1, 1)?;
        a.check_finite("sp potential")?;
        let residual = sp_membership_residual(&a);
        if residual > STRUCTURE_TOL * a.sup_frobenius().max(1.0) {
            return Err(Error::InvariantViolation {
                what: "sp(2m,ℝ) membership",
                residual,
                tolerance: STRUCTURE_TOL,
            });
        }
        Ok(Self { a })
    }

    pub fn zero(grid: &Arc<PeriodicGrid>) -> Self {
        Self {
            a: TensorField::zeros(grid, 1, 1),
        }
    }

    /// Realizes an explicit mode list on a grid. The same list reproduces the
    /// same smooth potential at any resolution.
    pub fn from_modes(grid: &Arc<PeriodicGrid>, modes: &[SpMode]) -> Result<Self> {
        let m = grid.m();
        let basis = sp_basis(m);
        let d = grid.dim();
        for s in modes {
            if s.basis >= basis.len() {
                return Err(Error::Invalid(format!(
                    "sp basis index {} out of range (dim sp(2m) = {})",
                    s.basis,
                    basis.len()
                )));
            }
            if s.k.len() != d {
                return Err(Error::Invalid(format!(
                    "mode wavevector {:?} has dimension {} ≠ {d}",
                    s.k,
                    s.k.len()
                )));
            }
        }
        let mut a = TensorField::zeros(grid, 1, 1);
        // Group by basis index so each coefficient needs one synthesis pass.
        for (b_idx, b_mat) in basis.iter().enumerate() {
            let fmodes: Vec<FourierMode> = modes
                .iter()
                .filter(|s| s.basis == b_idx)
                .map(|s| FourierMode {
                    k: s.k.clone(),
                    cos_amp: s.cos_amp,
                    sin_amp: s.sin_amp,
                })
                .collect();
            if fmodes.is_empty() {
                continue;
            }
            let coeff = synthesize_scalar(grid, &fmodes)?;
            for pt in 0..grid.len() {
                let c = coeff.values()[pt];
                let dst = a.point_mut(pt);
                for idx in 0..d * d {
                    dst[idx] += c * b_mat[idx];
                }
            }
        }
        Self::new(a)
    }

    /// Deterministic random mode list with per-component sup-norm ≤ amplitude
    /// (the sp basis touches disjoint matrix entries, so the per-coefficient
    /// L¹ bound carries over).
    pub fn random_sp_modes(m: usize, seed: u64, cutoff: usize, amplitude: f64) -> Vec<SpMode> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 2 * m;
        let nbasis = 2 * m * m + m;
        let mut out = Vec::new();
        for b in 0..nbasis {
            for fm in random_modes(&mut rng, dim, cutoff, amplitude) {
                out.push(SpMode {
                    k: fm.k,
                    basis: b,
                    cos_amp: fm.cos_amp,
                    sin_amp: fm.sin_amp,
                });
            }
        }
        out
    }

    pub fn random(grid: &Arc<PeriodicGrid>, seed: u64, cutoff: usize, amplitude: f64) -> Result<Self> {
        if 3 * cutoff > grid.n() {
            return Err(Error::BandLimit {
                cutoff,
                max: grid.n() / 3,
            });
        }
        Self::from_modes(grid, &Self::random_sp_modes(grid.m(), seed, cutoff, amplitude))
    }

    pub fn field(&self) -> &TensorField {
        &self.a
    }
}

/// Sup-Frobenius residual of aᵀΩ₀ + Ω₀a.
pub fn sp_membership_residual(a: &TensorField) -> f64 {
    let grid = a.grid();
    let d = grid.dim();
    let omega = smat::omega0(grid.m());
    let mut sup: f64 = 0.0;
    let mut tmp1 = vec![0.0; d * d];
    let mut tmp2 = vec![0.0; d * d];
    for pt in 0..grid.len() {
        let ap = a.point(pt);
        let at = smat::transpose(ap, d);
        smat::mul(&at, &omega, &mut tmp1, d);
        smat::mul(&omega, ap, &mut tmp2, d);
        let mut s = 0.0;
        for i in 0..d * d {
            let r = tmp1[i] + tmp2[i];
            s += r * r;
        }
        sup = sup.max(s.sqrt());
    }
    sup
}

/// Pointwise residuals of the compatible-structure invariants.
#[derive(Debug, Clone, Copy)]
pub struct StructureResiduals {
    /// sup ‖J² + I‖_F
    pub j_squared: f64,
    /// sup ‖JᵀΩ₀J − Ω₀‖_F
    pub compatibility: f64,
    /// sup ‖g − gᵀ‖_F
    pub metric_symmetry: f64,
}

/// A compatible almost complex structure J with its induced metric g = Ω₀·J,
/// the inverse metric, and write-once connection/curvature caches.
pub struct AkStructure {
    grid: Arc<PeriodicGrid>,
    j: TensorField,
    g: TensorField,
    g_inv: TensorField,
    generator: Option<SpPotential>,
    pub(crate) conn: OnceLock<Arc<ConnectionData>>,
    pub(crate) curv: OnceLock<Arc<CurvatureBundle>>,
}

impl std::fmt::Debug for AkStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AkStructure").field("grid", &self.grid).finish()
    }
}

impl AkStructure {
    /// The standard flat structure J₀ with g = identity.
    pub fn flat(grid: &Arc<PeriodicGrid>) -> Arc<Self> {
        Self::from_potential(SpPotential::zero(grid)).expect("flat structure is always valid")
    }

    /// J(x) = exp(−a(x))·J₀·exp(a(x)); conjugation by fiberwise symplectic
    /// maps preserves compatibility, so the invariants hold by construction.
    pub fn from_potential(pot: SpPotential) -> Result<Arc<Self>> {
        let grid = Arc::clone(pot.field().grid());
        let d = grid.dim();
        let j0 = smat::j0(grid.m());
        let mut j = TensorField::zeros(&grid, 1, 1);
        let mut tmp = vec![0.0; d * d];
        for pt in 0..grid.len() {
            let a = pot.field().point(pt);
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            let e_plus = matexp::matrix_exp(a, d)?;
            let e_minus = matexp::matrix_exp(&neg, d)?;
            smat::mul(&j0, &e_plus, &mut tmp, d);
            smat::mul(&e_minus, &tmp, j.point_mut(pt), d);
        }
        Self::from_j_field(j, Some(pot))
    }

    /// Builds the caches around an arbitrary endomorphism field without
    /// validating the structure invariants; the induced "metric" is
    /// symmetrized before inversion. Negative-control path only.
    pub(crate) fn from_j_field_unchecked(j: TensorField) -> Result<Arc<Self>> {
        j.check_rank(1, 1)?;
        j.check_finite("almost complex structure")?;
        let grid = Arc::clone(j.grid());
        let d = grid.dim();
        let omega = smat::omega0(grid.m());
        let mut g = TensorField::zeros(&grid, 0, 2);
        let mut raw = vec![0.0; d * d];
        for pt in 0..grid.len() {
            smat::mul(&omega, j.point(pt), &mut raw, d);
            let gp = g.point_mut(pt);
            for i in 0..d {
                for l in 0..d {
                    gp[i * d + l] = 0.5 * (raw[i * d + l] + raw[l * d + i]);
                }
            }
        }
        let mut g_inv = TensorField::zeros(&grid, 2, 0);
        for pt in 0..grid.len() {
            let mut inv = vec![0.0; d * d];
            if !smat::invert(g.point(pt), &mut inv, d) {
                return Err(Error::Singular("induced metric"));
            }
            g_inv.point_mut(pt).copy_from_slice(&inv);
        }
        Ok(Arc::new(Self {
            grid,
            j,
            g,
            g_inv,
            generator: None,
            conn: OnceLock::new(),
            curv: OnceLock::new(),
        }))
    }

    /// Wraps a J field produced by symplectic conjugation, validating the
    /// structure invariants to `STRUCTURE_TOL`.
    pub(crate) fn from_j_field(j: TensorField, generator: Option<SpPotential>) -> Result<Arc<Self>> {
        j.check_rank(1, 1)?;
        j.check_finite("almost complex structure")?;
        let grid = Arc::clone(j.grid());
        let d = grid.dim();
        let omega = smat::omega0(grid.m());

        // g_{ij} = ω(∂_i, J∂_j) = (Ω₀·J)_{ij}
        let mut g = TensorField::zeros(&grid, 0, 2);
        for pt in 0..grid.len() {
            smat::mul(&omega, j.point(pt), g.point_mut(pt), d);
        }
        let mut g_inv = TensorField::zeros(&grid, 2, 0);
        for pt in 0..grid.len() {
            if !smat::invert(g.point(pt), g_inv.point_mut(pt), d) {
                return Err(Error::Singular("induced metric"));
            }
        }

        let out = Self {
            grid,
            j,
            g,
            g_inv,
            generator,
            conn: OnceLock::new(),
            curv: OnceLock::new(),
        };
        let res = out.invariant_residuals();
        let worst = res.j_squared.max(res.compatibility).max(res.metric_symmetry);
        if worst > STRUCTURE_TOL {
            return Err(Error::InvariantViolation {
                what: "compatible structure",
                residual: worst,
                tolerance: STRUCTURE_TOL,
            });
        }
        let min_eig = out.min_metric_eigenvalue();
        if min_eig <= 0.0 {
            return Err(Error::InvariantViolation {
                what: "metric positivity",
                residual: min_eig,
                tolerance: 0.0,
            });
        }
        Ok(Arc::new(out))
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn j(&self) -> &TensorField {
        &self.j
    }

    pub fn g(&self) -> &TensorField {
        &self.g
    }

    pub fn g_inv(&self) -> &TensorField {
        &self.g_inv
    }

    pub fn generator(&self) -> Option<&SpPotential> {
        self.generator.as_ref()
    }

    pub fn invariant_residuals(&self) -> StructureResiduals {
        let d = self.grid.dim();
        let omega = smat::omega0(self.grid.m());
        let mut tmp1 = vec![0.0; d * d];
        let mut tmp2 = vec![0.0; d * d];
        let (mut r_j2, mut r_comp, mut r_sym): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for pt in 0..self.grid.len() {
            let jm = self.j.point(pt);
            smat::mul(jm, jm, &mut tmp1, d);
            let mut s = 0.0;
            for i in 0..d {
                for l in 0..d {
                    let want = if i == l { -1.0 } else { 0.0 };
                    let r = tmp1[i * d + l] - want;
                    s += r * r;
                }
            }
            r_j2 = r_j2.max(s.sqrt());

            let jt = smat::transpose(jm, d);
            smat::mul(&jt, &omega, &mut tmp1, d);
            smat::mul(&tmp1, jm, &mut tmp2, d);
            let mut s = 0.0;
            for i in 0..d * d {
                let r = tmp2[i] - omega[i];
                s += r * r;
            }
            r_comp = r_comp.max(s.sqrt());

            let gm = self.g.point(pt);
            let mut s = 0.0;
            for i in 0..d {
                for l in 0..d {
                    let r = gm[i * d + l] - gm[l * d + i];
                    s += r * r;
                }
            }
            r_sym = r_sym.max(s.sqrt());
        }
        StructureResiduals {
            j_squared: r_j2,
            compatibility: r_comp,
            metric_symmetry: r_sym,
        }
    }

    /// Minimum over grid points of the smallest eigenvalue of g.
    pub fn min_metric_eigenvalue(&self) -> f64 {
        let d = self.grid.dim();
        let mut min_eig = f64::INFINITY;
        for pt in 0..self.grid.len() {
            let gm = self.g.point(pt);
            let eig = if d == 2 {
                // closed form for symmetric 2×2
                let (a, b, c) = (gm[0], 0.5 * (gm[1] + gm[2]), gm[3]);
                let mean = 0.5 * (a + c);
                let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                mean - disc
            } else {
                let m = nalgebra::DMatrix::from_row_slice(d, d, gm);
                let sym = nalgebra::SymmetricEigen::new(m);
                sym.eigenvalues.min()
            };
            min_eig = min_eig.min(eig);
        }
        min_eig
    }
}

/// Element of T_J𝒜𝒞_ω: a J-anti-commuting, g-symmetric endomorphism field.
#[derive(Clone)]
pub struct TangentField {
    v: TensorField,
    base: Arc<AkStructure>,
}

impl std::fmt::Debug for TangentField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TangentField").field("grid", &self.base.grid).finish()
    }
}

/// Sup-Frobenius violations of the two tangency constraints.
#[derive(Debug, Clone, Copy)]
pub struct TangentDiagnostics {
    /// sup ‖vJ + Jv‖_F
    pub anti_commutation: f64,
    /// sup ‖g·v − (g·v)ᵀ‖_F
    pub g_symmetry: f64,
}

pub fn tangent_diagnostics(base: &AkStructure, v: &TensorField) -> TangentDiagnostics {
    let d = base.grid().dim();
    let mut tmp1 = vec![0.0; d * d];
    let mut tmp2 = vec![0.0; d * d];
    let (mut anti, mut sym): (f64, f64) = (0.0, 0.0);
    for pt in 0..base.grid().len() {
        let jm = base.j().point(pt);
        let vm = v.point(pt);
        smat::mul(vm, jm, &mut tmp1, d);
        smat::mul(jm, vm, &mut tmp2, d);
        let mut s = 0.0;
        for i in 0..d * d {
            let r = tmp1[i] + tmp2[i];
            s += r * r;
        }
        anti = anti.max(s.sqrt());

        let gm = base.g().point(pt);
        smat::mul(gm, vm, &mut tmp1, d);
        let mut s = 0.0;
        for i in 0..d {
            for l in 0..d {
                let r = tmp1[i * d + l] - tmp1[l * d + i];
                s += r * r;
            }
        }
        sym = sym.max(s.sqrt());
    }
    TangentDiagnostics {
        anti_commutation: anti,
        g_symmetry: sym,
    }
}

/// J-commuting / J-anti-commuting split a = a⁺ + a⁻ with
/// a⁺ = ½(a − JaJ), a⁻ = ½(a + JaJ).
pub fn commuting_split(base: &AkStructure, a: &TensorField) -> (TensorField, TensorField) {
    let d = base.grid().dim();
    let mut plus = TensorField::zeros(base.grid(), 1, 1);
    let mut minus = TensorField::zeros(base.grid(), 1, 1);
    let mut tmp = vec![0.0; d * d];
    let mut jaj = vec![0.0; d * d];
    for pt in 0..base.grid().len() {
        let jm = base.j().point(pt);
        let am = a.point(pt);
        smat::mul(am, jm, &mut tmp, d);
        smat::mul(jm, &tmp, &mut jaj, d);
        let pp = plus.point_mut(pt);
        for i in 0..d * d {
            pp[i] = 0.5 * (am[i] - jaj[i]);
        }
        let mm = minus.point_mut(pt);
        for i in 0..d * d {
            mm[i] = 0.5 * (am[i] + jaj[i]);
        }
    }
    (plus, minus)
}

impl TangentField {
    /// Validates the tangency constraints to `TANGENT_TOL` (relative to the
    /// field size) before wrapping.
    pub fn try_new(base: &Arc<AkStructure>, v: TensorField) -> Result<Self> {
        v.check_rank(1, 1)?;
        base.grid().check_same(v.grid())?;
        v.check_finite("tangent field")?;
        let diag = tangent_diagnostics(base, &v);
        let scale = v.sup_frobenius().max(1.0);
        let worst = diag.anti_commutation.max(diag.g_symmetry);
        if worst > TANGENT_TOL * scale {
            return Err(Error::InvariantViolation {
                what: "tangency (vJ+Jv = 0, g-symmetry)",
                residual: worst,
                tolerance: TANGENT_TOL * scale,
            });
        }
        Ok(Self {
            v,
            base: Arc::clone(base),
        })
    }

    /// Orthogonal projection of an endomorphism field onto T_J𝒜𝒞_ω:
    /// first the J-anti-commuting part, then g-symmetrization.
    pub fn project(base: &Arc<AkStructure>, a: &TensorField) -> Self {
        let d = base.grid().dim();
        let (_, minus) = commuting_split(base, a);
        let mut v = TensorField::zeros(base.grid(), 1, 1);
        let mut tmp1 = vec![0.0; d * d];
        let mut tmp2 = vec![0.0; d * d];
        for pt in 0..base.grid().len() {
            let gm = base.g().point(pt);
            let gi = base.g_inv().point(pt);
            let wm = minus.point(pt);
            // g-adjoint w* = g^{-1} wᵀ g
            let wt = smat::transpose(wm, d);
            smat::mul(gi, &wt, &mut tmp1, d);
            smat::mul(&tmp1, gm, &mut tmp2, d);
            let vp = v.point_mut(pt);
            for i in 0..d * d {
                vp[i] = 0.5 * (wm[i] + tmp2[i]);
            }
        }
        Self {
            v,
            base: Arc::clone(base),
        }
    }

    pub fn field(&self) -> &TensorField {
        &self.v
    }

    pub fn base(&self) -> &Arc<AkStructure> {
        &self.base
    }

    pub fn based_at(&self, j: &AkStructure) -> bool {
        std::ptr::eq(Arc::as_ptr(&self.base), j as *const _)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            v: self.v.scaled(c),
            base: Arc::clone(&self.base),
        }
    }
}

/// J_t = exp(−t·a)·J·exp(t·a) with a = −½Jv, so that dJ_t/dt|₀ = \[J,a\] = v.
/// Compatibility is exact at every t because exp(±t·a) is symplectic.
pub fn retract(base: &Arc<AkStructure>, v: &TangentField, t: f64) -> Result<Arc<AkStructure>> {
    if !v.based_at(base) {
        return Err(Error::Invalid("retract: tangent field based at a different structure".into()));
    }
    let grid = base.grid();
    let d = grid.dim();
    let mut j_new = TensorField::zeros(grid, 1, 1);
    let mut a = vec![0.0; d * d];
    let mut tmp = vec![0.0; d * d];
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let vm = v.field().point(pt);
        // a = −½ t J v (fold the curve parameter into the generator)
        smat::mul(jm, vm, &mut a, d);
        for item in a.iter_mut() {
            *item *= -0.5 * t;
        }
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let e_plus = matexp::matrix_exp(&a, d)?;
        let e_minus = matexp::matrix_exp(&neg, d)?;
        smat::mul(jm, &e_plus, &mut tmp, d);
        smat::mul(&e_minus, &tmp, j_new.point_mut(pt), d);
    }
    AkStructure::from_j_field(j_new, None)
}

/// Coordinate Nijenhuis tensor
/// N^k_{ij} = ¼(J^l_i ∂_l J^k_j − J^l_j ∂_l J^k_i − J^k_l ∂_i J^l_j + J^k_l ∂_j J^l_i),
/// antisymmetric in (i,j); vanishes exactly iff J is integrable.
pub fn nijenhuis(base: &AkStructure) -> Result<TensorField> {
    let grid = base.grid();
    let d = grid.dim();
    let dj: Vec<TensorField> = (0..d)
        .map(|a| base.j().spectral_partial(a))
        .collect::<Result<_>>()?;
    let mut out = TensorField::zeros(grid, 1, 2);
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let o = out.point_mut(pt);
        for k in 0..d {
            for i in 0..d {
                for jj in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += jm[l * d + i] * dj[l].point(pt)[k * d + jj];
                        s -= jm[l * d + jj] * dj[l].point(pt)[k * d + i];
                        s -= jm[k * d + l] * dj[i].point(pt)[l * d + jj];
                        s += jm[k * d + l] * dj[jj].point(pt)[l * d + i];
                    }
                    o[k * d * d + i * d + jj] = 0.25 * s;
                }
            }
        }
    }
    Ok(out)
}

/// Riemannian gradient (grad f)^i = g^{ij} ∂_j f.
pub fn grad(base: &AkStructure, f: &TensorField) -> Result<TensorField> {
    f.check_rank(0, 0)?;
    let df = differential(f)?;
    Ok(fieldalg::form_to_vec(base.g_inv(), &df))
}

/// Symplectic gradient grad_ω f = J grad f; in components ω^{ij} ∂_j f with
/// the J-independent bivector ω^{ij} = g^{kj} J^i_k.
pub fn grad_omega(base: &AkStructure, f: &TensorField) -> Result<TensorField> {
    let gf = grad(base, f)?;
    let grid = base.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 1, 0);
    for pt in 0..grid.len() {
        smat::matvec(base.j().point(pt), gf.point(pt), out.point_mut(pt), d);
    }
    Ok(out)
}

/// Exterior derivative of a scalar as a 1-form.
pub fn differential(f: &TensorField) -> Result<TensorField> {
    f.check_rank(0, 0)?;
    let grid = f.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 0, 1);
    for axis in 0..d {
        let df = f.spectral_partial(axis)?;
        for pt in 0..grid.len() {
            out.point_mut(pt)[axis] = df.values()[pt];
        }
    }
    Ok(out)
}

/// Twisted differential (d^c f)(X) = −df(JX), i.e. (d^c f)_i = −J^k_i ∂_k f.
pub fn d_c(base: &AkStructure, f: &TensorField) -> Result<TensorField> {
    let df = differential(f)?;
    Ok(fieldalg::j_on_one_form(base.j(), &df))
}

/// Poisson bracket {f, g} = ω(grad_ω f, grad_ω g) = (grad_ω f)(g).
pub fn poisson(base: &AkStructure, f: &TensorField, g: &TensorField) -> Result<TensorField> {
    let xf = grad_omega(base, f)?;
    let dg = differential(g)?;
    let grid = base.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 0, 0);
    for pt in 0..grid.len() {
        let x = xf.point(pt);
        let a = dg.point(pt);
        let mut s = 0.0;
        for i in 0..d {
            s += x[i] * a[i];
        }
        out.values_mut()[pt] = s;
    }
    Ok(out)
}

/// Sup-norm residuals of the structural identities that tie D, δ, J and N
/// together, evaluated on seeded band-limited inputs. Each entry reports
/// (residual, tolerance, pass); all residuals vanish for the continuum
/// structure and converge spectrally under grid refinement.
pub fn identity_battery(
    base: &Arc<AkStructure>,
    seed: u64,
    input_cutoff: usize,
    tolerance: f64,
) -> Result<Vec<crate::operators::OperatorReport>> {
    use crate::calculus::random::random_band_limited;
    use crate::curvature::{covariant_derivative, covariant_derivative_component, delta};
    use crate::operators::OperatorReport;

    let grid = base.grid();
    let d = grid.dim();
    let gm = (grid.m(), grid.n());
    let cutoff = input_cutoff;
    let conn = Arc::clone(base.connection());
    let dj = covariant_derivative(base.j(), &conn)?;
    let mut reports = Vec::new();

    // δJ = 0.
    let delta_j = delta(base, base.j())?;
    reports.push(OperatorReport::absolute(
        "codifferential_of_J",
        delta_j.sup_abs(),
        1.0,
        tolerance,
        gm,
    ));

    // D_{JX}J = (D_X J)·J.
    let mut sup: f64 = 0.0;
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let djp = dj.point(pt);
        for k in 0..d {
            for i in 0..d {
                for l in 0..d {
                    let mut lhs = 0.0;
                    for a in 0..d {
                        lhs += jm[a * d + i] * djp[k * d * d + a * d + l];
                    }
                    let mut rhs = 0.0;
                    for m in 0..d {
                        rhs += djp[k * d * d + i * d + m] * jm[m * d + l];
                    }
                    sup = sup.max((lhs - rhs).abs());
                }
            }
        }
    }
    reports.push(OperatorReport::absolute("dJ_twist_by_J", sup, 1.0, tolerance, gm));

    // ((D_X J)Y, Z) = 2(JX, N(Y,Z)).
    let nijs = nijenhuis(base)?;
    let mut sup: f64 = 0.0;
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let g = base.g().point(pt);
        let djp = dj.point(pt);
        let np = nijs.point(pt);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut lhs = 0.0;
                    for l in 0..d {
                        lhs += djp[l * d * d + i * d + j] * g[l * d + k];
                    }
                    let mut rhs = 0.0;
                    for a in 0..d {
                        for b in 0..d {
                            rhs += 2.0 * jm[a * d + i] * g[a * d + b] * np[b * d * d + j * d + k];
                        }
                    }
                    sup = sup.max((lhs - rhs).abs());
                }
            }
        }
    }
    reports.push(OperatorReport::absolute(
        "dJ_vs_nijenhuis_pairing",
        sup,
        1.0,
        tolerance,
        gm,
    ));

    // δ d^c f = 0.
    let f = random_band_limited(grid, seed, cutoff, 1.0, 0, 0)?;
    let dcf = d_c(base, &f)?;
    let ddc = delta(base, &dcf)?;
    reports.push(OperatorReport::absolute(
        "codifferential_of_dc",
        ddc.sup_abs(),
        1.0,
        tolerance,
        gm,
    ));

    // (δDξ)^♭ = δD(ξ^♭).
    let xi = random_band_limited(grid, seed.wrapping_add(1), cutoff, 1.0, 1, 0)?;
    let dxi = covariant_derivative(&xi, &conn)?;
    let lhs = fieldalg::vec_to_form(base.g(), &delta(base, &dxi)?);
    let xib = fieldalg::vec_to_form(base.g(), &xi);
    let rhs = delta(base, &covariant_derivative(&xib, &conn)?)?;
    reports.push(OperatorReport::absolute(
        "rough_laplacian_commutes_with_flat",
        lhs.sub(&rhs).sup_abs(),
        1.0,
        tolerance,
        gm,
    ));

    // Σ_a (D²_{X,e_a} J) e_a = 0, streamed over the outer derivative axis.
    let mut sup: f64 = 0.0;
    for axis in 0..d {
        let ddj_a = covariant_derivative_component(&dj, &conn, axis)?;
        for pt in 0..grid.len() {
            let gi = base.g_inv().point(pt);
            let u = ddj_a.point(pt);
            for k in 0..d {
                let mut s = 0.0;
                for i in 0..d {
                    for l in 0..d {
                        s += gi[i * d + l] * u[k * d * d + i * d + l];
                    }
                }
                sup = sup.max(s.abs());
            }
        }
    }
    reports.push(OperatorReport::absolute(
        "traced_second_derivative_of_J",
        sup,
        1.0,
        tolerance,
        gm,
    ));

    // (δD⁺α − δD⁻α)(X) = −ρ*(JX, α^♯) − Σ_a (D_{Je_a}α)((D_{e_a}J)X).
    let alpha = random_band_limited(grid, seed.wrapping_add(2), cutoff, 1.0, 0, 1)?;
    let dalpha = covariant_derivative(&alpha, &conn)?;
    let mut d_plus = TensorField::zeros(grid, 0, 2);
    let mut d_minus = TensorField::zeros(grid, 0, 2);
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let da = dalpha.point(pt);
        let dp = d_plus.point_mut(pt);
        for i in 0..d {
            for j in 0..d {
                let mut tw = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        tw += jm[a * d + i] * jm[b * d + j] * da[a * d + b];
                    }
                }
                dp[i * d + j] = 0.5 * (da[i * d + j] + tw);
            }
        }
        let dp = d_plus.point(pt).to_vec();
        let dm = d_minus.point_mut(pt);
        for idx in 0..d * d {
            dm[idx] = da[idx] - dp[idx];
        }
    }
    let delta_split = delta(base, &d_plus)?.sub(&delta(base, &d_minus)?);
    let rho_star = base.curvature().rho_star.clone();
    let alpha_sharp = fieldalg::form_to_vec(base.g_inv(), &alpha);
    let mut sup: f64 = 0.0;
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let gi = base.g_inv().point(pt);
        let rs = rho_star.point(pt);
        let ash = alpha_sharp.point(pt);
        let da = dalpha.point(pt);
        let djp = dj.point(pt);
        for x in 0..d {
            // ρ*(JX, α^♯)
            let mut rho_term = 0.0;
            for a in 0..d {
                for b in 0..d {
                    rho_term += rs[a * d + b] * jm[a * d + x] * ash[b];
                }
            }
            // Σ g^{cb} J^e_c (Dα)_{e f} (D_b J)^f_x
            let mut frame_term = 0.0;
            for c in 0..d {
                for b in 0..d {
                    for e in 0..d {
                        for ff in 0..d {
                            frame_term += gi[c * d + b]
                                * jm[e * d + c]
                                * da[e * d + ff]
                                * djp[ff * d * d + b * d + x];
                        }
                    }
                }
            }
            let lhs = delta_split.point(pt)[x];
            sup = sup.max((lhs + rho_term + frame_term).abs());
        }
    }
    reports.push(OperatorReport::absolute(
        "hessian_split_codifferential",
        sup,
        1.0,
        tolerance,
        gm,
    ));

    Ok(reports)
}

/// The Poisson bivector ω^{ij} = g^{kj} J^i_k, which does not depend on J.
pub fn omega_upper(base: &AkStructure) -> TensorField {
    let grid = base.grid();
    let d = grid.dim();
    let mut out = TensorField::zeros(grid, 2, 0);
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let gi = base.g_inv().point(pt);
        let o = out.point_mut(pt);
        for i in 0..d {
            for jdx in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += gi[k * d + jdx] * jm[i * d + k];
                }
                o[i * d + jdx] = s;
            }
        }
    }
    out
}
