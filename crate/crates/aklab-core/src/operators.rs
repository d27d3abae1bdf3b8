//! Operator calculus on the space of compatible structures: P, JP, their
//! L² adjoints, the Lichnerowicz operator 𝕃 = P*P with its explicit
//! curvature expression, ℒ_K, the Calabi operators 𝕃± = 𝕃 ± (i/2)ℒ_K,
//! the Hessian operator H, the flow linearization H̃, and the Calabi
//! functional 𝒞 = ∫ (s^∇)² vol.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::fieldalg;
use crate::calculus::tensor::{integrate, TensorField};
use crate::curvature::{covariant_derivative, delta};
use crate::error::Result;
use crate::structure::{grad_omega, AkStructure, TangentField};

/// Documented floor for relative residuals: relative = absolute / max(‖ref‖, 1e−14).
pub const REL_FLOOR: f64 = 1e-14;

/// One verification entry: a named residual against its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorReport {
    pub name: String,
    pub residual_abs: f64,
    pub residual_rel: f64,
    pub tolerance: f64,
    /// Whether `tolerance` bounds the relative (true) or absolute residual.
    pub tolerance_is_relative: bool,
    pub pass: bool,
    pub grid_m: usize,
    pub grid_n: usize,
}

impl OperatorReport {
    pub fn relative(
        name: impl Into<String>,
        residual_abs: f64,
        reference_norm: f64,
        tolerance: f64,
        grid: (usize, usize),
    ) -> Self {
        let residual_rel = residual_abs / reference_norm.max(REL_FLOOR);
        Self {
            name: name.into(),
            residual_abs,
            residual_rel,
            tolerance,
            tolerance_is_relative: true,
            pass: residual_rel <= tolerance,
            grid_m: grid.0,
            grid_n: grid.1,
        }
    }

    pub fn absolute(
        name: impl Into<String>,
        residual_abs: f64,
        reference_norm: f64,
        tolerance: f64,
        grid: (usize, usize),
    ) -> Self {
        let residual_rel = residual_abs / reference_norm.max(REL_FLOOR);
        Self {
            name: name.into(),
            residual_abs,
            residual_rel,
            tolerance,
            tolerance_is_relative: false,
            pass: residual_abs <= tolerance,
            grid_m: grid.0,
            grid_n: grid.1,
        }
    }
}

/// L² pairing ⟨S,T⟩ = ∫ (S,T)_g vol of same-rank fields.
pub fn inner(base: &AkStructure, s: &TensorField, t: &TensorField) -> Result<f64> {
    s.check_same_grid(t)?;
    base.grid().check_same(s.grid())?;
    if s.rank() != t.rank() {
        return Err(crate::error::Error::RankMismatch {
            want_p: s.upper(),
            want_q: s.lower(),
            got_p: t.upper(),
            got_q: t.lower(),
        });
    }
    let pointwise = fieldalg::fiber_inner(s, t, base.g(), base.g_inv());
    integrate(&pointwise)
}

pub fn norm(base: &AkStructure, t: &TensorField) -> Result<f64> {
    Ok(inner(base, t, t)?.max(0.0).sqrt())
}

/// Trace-form pairing ∫ tr(u∘v) vol; agrees with `inner` on tangent fields.
pub fn inner_trace(u: &TensorField, v: &TensorField) -> Result<f64> {
    u.check_same_grid(v)?;
    integrate(&fieldalg::endo_trace_product(u, v))
}

/// P(f) = ½ ℒ_{grad_ω f} J, projected back onto the tangent constraints
/// (the projection only moves the field at aliasing/rounding level and is
/// orthogonal, so pairings with tangent fields are unchanged).
pub fn p(base: &Arc<AkStructure>, f: &TensorField) -> Result<TangentField> {
    f.check_rank(0, 0)?;
    let x = grad_omega(base, f)?;
    let mut lie = fieldalg::lie_endo(&x, base.j())?;
    lie.scale(0.5);
    Ok(TangentField::project(base, &lie))
}

/// JP(f) = J∘P(f).
pub fn jp(base: &Arc<AkStructure>, f: &TensorField) -> Result<TangentField> {
    let pf = p(base, f)?;
    let jpf = fieldalg::endo_compose(base.j(), pf.field());
    Ok(TangentField::project(base, &jpf))
}

/// P* v = δ(J((δ(Jv))^♭)); J acts on 1-forms by (Jα)(X) = −α(JX).
fn p_star_raw(base: &AkStructure, w: &TensorField) -> Result<TensorField> {
    let jv = fieldalg::endo_compose(base.j(), w);
    let dvec = delta(base, &jv)?;
    let alpha = fieldalg::vec_to_form(base.g(), &dvec);
    let jalpha = fieldalg::j_on_one_form(base.j(), &alpha);
    delta(base, &jalpha)
}

/// Formal adjoint of P on a tangent field.
pub fn p_star(v: &TangentField) -> Result<TensorField> {
    p_star_raw(v.base(), v.field())
}

/// (JP)* v = −P*(Jv).
pub fn jp_star(v: &TangentField) -> Result<TensorField> {
    let jv = fieldalg::endo_compose(v.base().j(), v.field());
    let mut out = p_star_raw(v.base(), &jv)?;
    out.scale(-1.0);
    Ok(out)
}

/// First variation of the Hermitian scalar curvature,
/// Ds^∇(v) = −(JP)*v = −δJ(δv)^♭ (Mohsen's formula).
pub fn variation_s(v: &TangentField) -> Result<TensorField> {
    let mut out = jp_star(v)?;
    out.scale(-1.0);
    Ok(out)
}

/// First variation of the Calabi functional, D𝒞(v) = −⟨v, Jℒ_K J⟩.
pub fn variation_c(v: &TangentField) -> Result<f64> {
    let base = v.base();
    let j_lie_k_j = j_lie_k_j(base)?;
    Ok(-inner(base, v.field(), &j_lie_k_j)?)
}

/// Jℒ_K J = 2 JP(s^∇): the negative gradient direction of 𝒞.
pub fn j_lie_k_j(base: &Arc<AkStructure>) -> Result<TensorField> {
    let lkj = lie_k_endo(base, base.j())?;
    Ok(fieldalg::endo_compose(base.j(), &lkj))
}

/// Lichnerowicz operator 𝕃 f = P*P f.
pub fn lichnerowicz(base: &Arc<AkStructure>, f: &TensorField) -> Result<TensorField> {
    let pf = p(base, f)?;
    p_star(&pf)
}

/// The equivalent composition (JP)*JP f, used as a cross-check.
pub fn lichnerowicz_via_jp(base: &Arc<AkStructure>, f: &TensorField) -> Result<TensorField> {
    let jpf = jp(base, f)?;
    jp_star(&jpf)
}

/// Positive Laplacian Δf = δ(df).
pub fn laplacian(base: &AkStructure, f: &TensorField) -> Result<TensorField> {
    let df = crate::structure::differential(f)?;
    delta(base, &df)
}

/// Explicit curvature expression of the Lichnerowicz operator:
/// 𝕃 f = ½Δ²f − 2(δRic⁺, df) + 2(ρ, dd^c f) + δδ(D⁺df − D⁻df),
/// with D^± the J-(anti-)invariant parts of the Hessian and (·,·) on
/// 2-forms normalized as (α,β) = ½ α_{ij}β_{kl} g^{ik}g^{jl}.
pub fn lichnerowicz_explicit(base: &Arc<AkStructure>, f: &TensorField) -> Result<TensorField> {
    f.check_rank(0, 0)?;
    let grid = base.grid();
    let d = grid.dim();
    let curv = Arc::clone(base.curvature());

    // ½ Δ² f
    let lap = laplacian(base, f)?;
    let mut out = laplacian(base, &lap)?;
    out.scale(0.5);

    // −2 (δRic⁺, df)
    let delta_ric_plus = delta(base, &curv.ric_plus)?;
    let df = crate::structure::differential(f)?;
    let term2 = fieldalg::fiber_inner(&delta_ric_plus, &df, base.g(), base.g_inv());
    out.axpy(-2.0, &term2);

    // +2 (ρ, dd^c f) with the ½-normalized 2-form product
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
    let term3 = fieldalg::fiber_inner(&curv.rho, &ddcf, base.g(), base.g_inv());
    out.axpy(1.0, &term3);

    // + δδ(D⁺df − D⁻df) with (D⁺−D⁻)df(X,Y) = Hess f(JX, JY)
    let hess = covariant_derivative(&df, base.connection())?;
    let mut twisted = TensorField::zeros(grid, 0, 2);
    for pt in 0..grid.len() {
        let jm = base.j().point(pt);
        let h = hess.point(pt);
        let tw = twisted.point_mut(pt);
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        s += jm[a * d + i] * jm[b * d + j] * h[a * d + b];
                    }
                }
                tw[i * d + j] = s;
            }
        }
    }
    let d1 = delta(base, &twisted)?;
    let d2 = delta(base, &d1)?;
    out.axpy(1.0, &d2);
    Ok(out)
}

/// ℒ_K f = {s^∇, f} = (d^c s^∇, df); equal to 2(JP)*P f.
pub fn lie_k_scalar(base: &Arc<AkStructure>, f: &TensorField) -> Result<TensorField> {
    let s_nabla = base.curvature().s_nabla.clone();
    crate::structure::poisson(base, &s_nabla, f)
}

/// Coordinate Lie derivative ℒ_K v of an endomorphism field along the
/// extremal field K = grad_ω s^∇.
pub fn lie_k_endo(base: &AkStructure, v: &TensorField) -> Result<TensorField> {
    let k = base.curvature().k_vec.clone();
    fieldalg::lie_endo(&k, v)
}

/// A complex-valued momentum F = φ + iψ.
#[derive(Debug, Clone)]
pub struct ComplexScalarField {
    pub re: TensorField,
    pub im: TensorField,
}

impl ComplexScalarField {
    pub fn new(re: TensorField, im: TensorField) -> Result<Self> {
        re.check_rank(0, 0)?;
        im.check_rank(0, 0)?;
        re.check_same_grid(&im)?;
        Ok(Self { re, im })
    }

    pub fn real(re: TensorField) -> Result<Self> {
        let im = TensorField::zeros(re.grid(), 0, 0);
        Self::new(re, im)
    }
}

/// 𝕃⁺ F = (𝕃 + (i/2)ℒ_K) F componentwise:
/// 𝕃⁺(φ+iψ) = (𝕃φ − ½ℒ_Kψ) + i(𝕃ψ + ½ℒ_Kφ).
pub fn calabi_plus(base: &Arc<AkStructure>, f: &ComplexScalarField) -> Result<ComplexScalarField> {
    calabi_pm(base, f, 1.0)
}

/// 𝕃⁻ F = (𝕃 − (i/2)ℒ_K) F.
pub fn calabi_minus(base: &Arc<AkStructure>, f: &ComplexScalarField) -> Result<ComplexScalarField> {
    calabi_pm(base, f, -1.0)
}

fn calabi_pm(base: &Arc<AkStructure>, f: &ComplexScalarField, sign: f64) -> Result<ComplexScalarField> {
    let mut re = lichnerowicz(base, &f.re)?;
    re.axpy(-0.5 * sign, &lie_k_scalar(base, &f.im)?);
    let mut im = lichnerowicz(base, &f.im)?;
    im.axpy(0.5 * sign, &lie_k_scalar(base, &f.re)?);
    ComplexScalarField::new(re, im)
}

/// Hermitian L² pairing ⟨F, G⟩ = ∫ F·conj(G) vol as (re, im).
pub fn hermitian_inner(
    base: &AkStructure,
    f: &ComplexScalarField,
    g: &ComplexScalarField,
) -> Result<(f64, f64)> {
    let re = inner(base, &f.re, &g.re)? + inner(base, &f.im, &g.im)?;
    let im = inner(base, &f.im, &g.re)? - inner(base, &f.re, &g.im)?;
    Ok((re, im))
}

/// H(v) = 2JP(JP)*v − Jℒ_K v. The result is an endomorphism field; it is a
/// tangent field exactly when J is extremal (ℒ_K J = 0), which the flat and
/// EAK tests assert.
pub fn h_op(base: &Arc<AkStructure>, v: &TangentField) -> Result<TensorField> {
    let s = jp_star(v)?;
    let jps = jp(base, &s)?;
    let mut out = jps.field().scaled(2.0);
    let lkv = lie_k_endo(base, v.field())?;
    let jlkv = fieldalg::endo_compose(base.j(), &lkv);
    out.axpy(-1.0, &jlkv);
    Ok(out)
}

/// Flow linearization H̃(v) = −2JP(JP)*v + Jℒ_K v + vℒ_K J = −H(v) + vℒ_K J.
pub fn h_tilde(base: &Arc<AkStructure>, v: &TangentField) -> Result<TensorField> {
    let mut out = h_op(base, v)?;
    out.scale(-1.0);
    let lkj = lie_k_endo(base, base.j())?;
    let vlkj = fieldalg::endo_compose(v.field(), &lkj);
    Ok(out.add(&vlkj))
}

/// 𝒞(J) = ∫ (s^∇)² vol.
pub fn calabi_functional(base: &AkStructure) -> f64 {
    let s = &base.curvature().s_nabla;
    let mut sq = TensorField::zeros(s.grid(), 0, 0);
    for (o, v) in sq.values_mut().iter_mut().zip(s.values()) {
        *o = v * v;
    }
    integrate(&sq).expect("s^∇ is finite")
}

/// Dense matrix of 𝕃 on the grid-point basis; only sensible on small m=1
/// grids (N = n² rows).
pub fn lichnerowicz_matrix(base: &Arc<AkStructure>) -> Result<nalgebra::DMatrix<f64>> {
    let grid = base.grid();
    let npts = grid.len();
    let mut mat = nalgebra::DMatrix::zeros(npts, npts);
    for col in 0..npts {
        let mut e = TensorField::zeros(grid, 0, 0);
        e.values_mut()[col] = 1.0;
        let le = lichnerowicz(base, &e)?;
        for row in 0..npts {
            mat[(row, col)] = le.values()[row];
        }
    }
    Ok(mat)
}

/// Dense matrix of f ↦ P(f) stacked over endomorphism components.
pub fn p_matrix(base: &Arc<AkStructure>) -> Result<nalgebra::DMatrix<f64>> {
    let grid = base.grid();
    let npts = grid.len();
    let ncomp = grid.dim() * grid.dim();
    let mut mat = nalgebra::DMatrix::zeros(npts * ncomp, npts);
    for col in 0..npts {
        let mut e = TensorField::zeros(grid, 0, 0);
        e.values_mut()[col] = 1.0;
        let pe = p(base, &e)?;
        for (row, v) in pe.field().values().iter().enumerate() {
            mat[(row, col)] = *v;
        }
    }
    Ok(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::random_band_limited;
    use crate::calculus::PeriodicGrid;
    use crate::structure::SpPotential;
    use std::f64::consts::TAU;

    fn flat(m: usize, n: usize) -> Arc<AkStructure> {
        AkStructure::flat(&PeriodicGrid::new(m, n).unwrap())
    }

    fn random_structure(m: usize, n: usize, seed: u64, cutoff: usize, eps: f64) -> Arc<AkStructure> {
        let grid = PeriodicGrid::new(m, n).unwrap();
        AkStructure::from_potential(SpPotential::random(&grid, seed, cutoff, eps).unwrap()).unwrap()
    }

    fn tangent(base: &Arc<AkStructure>, seed: u64, cutoff: usize) -> TangentField {
        let raw = random_band_limited(base.grid(), seed, cutoff, 1.0, 1, 1).unwrap();
        TangentField::project(base, &raw)
    }

    #[test]
    fn inner_is_positive_and_checks_ranks() {
        let j = flat(1, 16);
        let f = random_band_limited(j.grid(), 1, 3, 1.0, 0, 0).unwrap();
        assert!(inner(&j, &f, &f).unwrap() > 0.0);
        let v = TensorField::zeros(j.grid(), 1, 1);
        assert!(inner(&j, &f, &v).is_err());
        let other = PeriodicGrid::new(1, 32).unwrap();
        let g = TensorField::zeros(&other, 0, 0);
        assert!(inner(&j, &f, &g).is_err());
    }

    #[test]
    fn inner_constant_diagonal_example() {
        // m=1 flat, u = diag(1,−1): inner(u,u) = 2·(2π)².
        let j = flat(1, 12);
        let u = TensorField::from_fn(j.grid(), 1, 1, |_, c| match c {
            0 => 1.0,
            3 => -1.0,
            _ => 0.0,
        });
        let want = 2.0 * TAU * TAU;
        assert!((inner(&j, &u, &u).unwrap() - want).abs() < 1e-10);
        assert!((inner_trace(&u, &u).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn p_kills_constants() {
        let j = random_structure(1, 16, 2, 3, 0.2);
        let c = TensorField::scalar_from_fn(j.grid(), |_| 3.5);
        assert!(p(&j, &c).unwrap().field().sup_abs() < 1e-13);
        // P(f + const) = P(f)
        let f = random_band_limited(j.grid(), 3, 4, 1.0, 0, 0).unwrap();
        let fc = f.add(&c);
        let d = p(&j, &f).unwrap().field().sub(p(&j, &fc).unwrap().field());
        assert!(d.sup_abs() < 1e-11);
    }

    #[test]
    fn flat_p_example() {
        let j = flat(1, 16);
        let f = TensorField::scalar_from_fn(j.grid(), |x| x[0].sin());
        let pf = p(&j, &f).unwrap();
        let want = TensorField::from_fn(j.grid(), 1, 1, |x, c| match c {
            0 => 0.5 * x[0].sin(),
            3 => -0.5 * x[0].sin(),
            _ => 0.0,
        });
        assert!(pf.field().sub(&want).sup_abs() < 1e-13);
        // JP = J∘P
        let jpf = jp(&j, &f).unwrap();
        let composed = crate::calculus::fieldalg::endo_compose(j.j(), pf.field());
        assert!(jpf.field().sub(&composed).sup_abs() < 1e-13);
    }

    #[test]
    fn raw_lie_derivative_is_tangent_to_differentiation_accuracy() {
        // ½ℒ_{grad_ω f}J satisfies the tangency constraints up to aliasing,
        // before any projection.
        let j = random_structure(1, 32, 30, 3, 0.1);
        let f = random_band_limited(j.grid(), 31, 4, 1.0, 0, 0).unwrap();
        let x = crate::structure::grad_omega(&j, &f).unwrap();
        let mut raw = crate::calculus::fieldalg::lie_endo(&x, j.j()).unwrap();
        raw.scale(0.5);
        let diag = crate::structure::tangent_diagnostics(&j, &raw);
        let scale = raw.sup_frobenius().max(1.0);
        assert!(diag.anti_commutation < 1e-10 * scale, "{:.3e}", diag.anti_commutation);
        assert!(diag.g_symmetry < 1e-10 * scale, "{:.3e}", diag.g_symmetry);
    }

    #[test]
    fn gradient_pairing_oracle() {
        // ⟨ℒ_{grad_ω f}J, v⟩ = −2⟨D grad_ω f, Jv⟩ for tangent v.
        let j = random_structure(1, 32, 32, 3, 0.15);
        let f = random_band_limited(j.grid(), 33, 4, 1.0, 0, 0).unwrap();
        let v = tangent(&j, 34, 4);
        let lhs = 2.0 * inner(&j, p(&j, &f).unwrap().field(), v.field()).unwrap();
        let rhs = crate::oracles::gradient_pairing_rhs(&j, &f, &v).unwrap();
        assert!((lhs - rhs).abs() / lhs.abs().max(1e-14) < 1e-8);
    }

    #[test]
    fn jp_star_annihilates_image_of_p_at_flat() {
        // (JP)*(P f) = ½ℒ_K f = 0 at the flat structure.
        let j = flat(1, 16);
        let f = random_band_limited(j.grid(), 35, 4, 1.0, 0, 0).unwrap();
        let pf = p(&j, &f).unwrap();
        assert!(jp_star(&pf).unwrap().sup_abs() < 1e-11);
    }

    #[test]
    fn p_star_of_zero_vanishes_and_adjointness_holds() {
        let j = random_structure(1, 32, 4, 3, 0.15);
        let zero = TangentField::project(&j, &TensorField::zeros(j.grid(), 1, 1));
        assert!(p_star(&zero).unwrap().sup_abs() < 1e-15);

        let f = random_band_limited(j.grid(), 5, 4, 1.0, 0, 0).unwrap();
        let v = tangent(&j, 6, 4);
        let lhs = inner(&j, p(&j, &f).unwrap().field(), v.field()).unwrap();
        let rhs = inner(&j, &f, &p_star(&v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() / lhs.abs().max(1e-14) < 1e-9);
        // on tangent fields the metric pairing is the trace form
        let tr = inner_trace(p(&j, &f).unwrap().field(), v.field()).unwrap();
        assert!((lhs - tr).abs() / lhs.abs().max(1e-14) < 1e-10);
        let lhs = inner(&j, jp(&j, &f).unwrap().field(), v.field()).unwrap();
        let rhs = inner(&j, &f, &jp_star(&v).unwrap()).unwrap();
        assert!((lhs - rhs).abs() / lhs.abs().max(1e-14) < 1e-9);
    }

    #[test]
    fn lichnerowicz_flat_biharmonic_values() {
        let j = flat(1, 16);
        let f1 = TensorField::scalar_from_fn(j.grid(), |x| x[0].sin());
        let l1 = lichnerowicz(&j, &f1).unwrap();
        assert!(l1.sub(&f1.scaled(0.5)).sup_abs() < 1e-11);
        let f2 = TensorField::scalar_from_fn(j.grid(), |x| (2.0 * x[0]).sin());
        let l2 = lichnerowicz(&j, &f2).unwrap();
        assert!(l2.sub(&f2.scaled(8.0)).sup_abs() < 1e-10);
        let c = TensorField::scalar_from_fn(j.grid(), |_| 2.0);
        assert!(lichnerowicz(&j, &c).unwrap().sup_abs() < 1e-12);
    }

    #[test]
    fn lichnerowicz_self_adjoint_semipositive_three_routes() {
        let j = random_structure(1, 32, 7, 3, 0.15);
        let f = random_band_limited(j.grid(), 8, 4, 1.0, 0, 0).unwrap();
        let g = random_band_limited(j.grid(), 9, 4, 1.0, 0, 0).unwrap();
        let lf = lichnerowicz(&j, &f).unwrap();
        let lg = lichnerowicz(&j, &g).unwrap();
        let a = inner(&j, &lf, &g).unwrap();
        let b = inner(&j, &f, &lg).unwrap();
        assert!((a - b).abs() / a.abs().max(1e-14) < 1e-9, "self-adjointness");
        let quad = inner(&j, &lf, &f).unwrap();
        let pf = p(&j, &f).unwrap();
        let pf_sq = inner(&j, pf.field(), pf.field()).unwrap();
        assert!(quad >= 0.0);
        assert!((quad - pf_sq).abs() / pf_sq.max(1e-14) < 1e-9, "⟨𝕃f,f⟩ = ‖Pf‖²");
        let ljp = lichnerowicz_via_jp(&j, &f).unwrap();
        assert!(lf.sub(&ljp).sup_abs() / lf.sup_abs().max(1e-14) < 1e-9, "P*P = (JP)*JP");
    }

    #[test]
    fn explicit_formula_reduces_to_biharmonic_at_flat() {
        let j = flat(2, 8);
        let f = random_band_limited(j.grid(), 10, 2, 1.0, 0, 0).unwrap();
        let le = lichnerowicz_explicit(&j, &f).unwrap();
        let oracle = crate::oracles::flat_biharmonic_half(&f).unwrap();
        assert!(le.sub(&oracle).sup_abs() < 1e-10);
    }

    #[test]
    fn lie_k_vanishes_at_flat_and_is_antisymmetric() {
        let j = flat(1, 16);
        let f = random_band_limited(j.grid(), 11, 3, 1.0, 0, 0).unwrap();
        assert!(lie_k_scalar(&j, &f).unwrap().sup_abs() < 1e-13);
        let v = tangent(&j, 12, 3);
        assert!(lie_k_endo(&j, v.field()).unwrap().sup_abs() < 1e-12);

        let j = random_structure(1, 32, 13, 3, 0.2);
        let f = random_band_limited(j.grid(), 14, 4, 1.0, 0, 0).unwrap();
        let g = random_band_limited(j.grid(), 15, 4, 1.0, 0, 0).unwrap();
        let pair = inner(&j, &lie_k_scalar(&j, &f).unwrap(), &g).unwrap()
            + inner(&j, &f, &lie_k_scalar(&j, &g).unwrap()).unwrap();
        let scale = norm(&j, &f).unwrap() * norm(&j, &g).unwrap();
        assert!(pair.abs() < 1e-9 * scale, "scalar anti-self-adjointness {pair:.3e}");
        // ⟨ℒ_K f, f⟩ = 0
        let self_pair = inner(&j, &lie_k_scalar(&j, &f).unwrap(), &f).unwrap();
        assert!(self_pair.abs() < 1e-9 * scale);

        // and on tangent fields
        let u = tangent(&j, 16, 4);
        let v = tangent(&j, 17, 4);
        let pair = inner(&j, &lie_k_endo(&j, u.field()).unwrap(), v.field()).unwrap()
            + inner(&j, u.field(), &lie_k_endo(&j, v.field()).unwrap()).unwrap();
        let scale = norm(&j, u.field()).unwrap() * norm(&j, v.field()).unwrap();
        assert!(pair.abs() < 1e-9 * scale, "tangent anti-self-adjointness {pair:.3e}");
    }

    #[test]
    fn image_p_orthogonal_to_image_jp_at_flat() {
        let j = flat(1, 16);
        for seed in 0..4 {
            let f = random_band_limited(j.grid(), 20 + seed, 4, 1.0, 0, 0).unwrap();
            let g = random_band_limited(j.grid(), 30 + seed, 4, 1.0, 0, 0).unwrap();
            let pf = p(&j, &f).unwrap();
            let jpg = jp(&j, &g).unwrap();
            let pair = inner(&j, pf.field(), jpg.field()).unwrap();
            let scale = norm(&j, pf.field()).unwrap() * norm(&j, jpg.field()).unwrap();
            assert!(pair.abs() < 1e-12 * scale.max(1.0), "⟨Pf, JPg⟩ = {pair:.3e}");
        }
    }

    #[test]
    fn variations_along_distinguished_directions() {
        let j = random_structure(1, 32, 40, 3, 0.15);
        let f = random_band_limited(j.grid(), 41, 4, 1.0, 0, 0).unwrap();

        // D𝒞(P(f)) = 0
        let pf = p(&j, &f).unwrap();
        let dc = variation_c(&pf).unwrap();
        let scale = norm(&j, pf.field()).unwrap();
        assert!(dc.abs() < 1e-8 * scale.max(1.0), "D𝒞(Pf) = {dc:.3e}");

        // Ds^∇(JP(f)) = −𝕃(f)
        let jpf = jp(&j, &f).unwrap();
        let ds = variation_s(&jpf).unwrap();
        let lf = lichnerowicz(&j, &f).unwrap();
        let rel = ds.add(&lf).sup_abs() / lf.sup_abs().max(1e-14);
        assert!(rel < 1e-9, "Ds(JPf) + 𝕃f rel {rel:.3e}");

        // Ds^∇(P(f)) = −½ℒ_K f and D𝒞(JP(f)) = −2⟨f, 𝕃(s^∇)⟩; these tie the
        // production {s^∇, ·} path to the adjoint compositions and need the
        // better-resolved grid.
        let j64 = random_structure(1, 64, 43, 3, 0.1);
        let f64_ = random_band_limited(j64.grid(), 44, 4, 1.0, 0, 0).unwrap();
        let pf64 = p(&j64, &f64_).unwrap();
        let ds_p = variation_s(&pf64).unwrap();
        let lkf = lie_k_scalar(&j64, &f64_).unwrap();
        let resid = ds_p.add(&lkf.scaled(0.5)).sup_abs() / lkf.sup_abs().max(1e-14);
        assert!(resid < 1e-8, "Ds(Pf) + ½ℒ_Kf rel {resid:.3e}");

        let jpf64 = jp(&j64, &f64_).unwrap();
        let dc_jp = variation_c(&jpf64).unwrap();
        let s = j64.curvature().s_nabla.clone();
        let ls = lichnerowicz(&j64, &s).unwrap();
        let want = -2.0 * inner(&j64, &f64_, &ls).unwrap();
        assert!((dc_jp - want).abs() / want.abs().max(1e-14) < 1e-7);

        // flat: D𝒞(v) = 0 for every v
        let jf = flat(1, 16);
        let v = tangent(&jf, 42, 4);
        assert!(variation_c(&v).unwrap().abs() < 1e-12);
    }

    #[test]
    fn calabi_variation_matches_finite_differences() {
        // D𝒞(v) = −⟨v, Jℒ_KJ⟩ against the centered difference of 𝒞 along
        // the retraction curve, with O(t²) truncation.
        let j = random_structure(1, 32, 45, 3, 0.1);
        let v = tangent(&j, 46, 4);
        let dc = variation_c(&v).unwrap();
        let fd = |t: f64| -> f64 {
            let jp_ = crate::structure::retract(&j, &v, t).unwrap();
            let jm_ = crate::structure::retract(&j, &v, -t).unwrap();
            (calabi_functional(&jp_) - calabi_functional(&jm_)) / (2.0 * t)
        };
        let f1 = fd(2e-3);
        let f2 = fd(1e-3);
        let e1 = (f1 - dc).abs();
        let e2 = (f2 - dc).abs();
        let ratio = e1 / e2.max(1e-300);
        assert!(e2 / dc.abs().max(1e-14) < 1e-4, "gap {:.3e}", e2 / dc.abs());
        assert!((3.0..=5.0).contains(&ratio), "O(t²) ratio {ratio:.2}");
        // Richardson extrapolation removes the t² term
        let extrapolated = (4.0 * f2 - f1) / 3.0;
        assert!((extrapolated - dc).abs() / dc.abs().max(1e-14) < 1e-7);
    }

    #[test]
    fn adjointness_improves_under_grid_doubling() {
        // The same continuum structure and inputs sampled at n and 2n: the
        // worst adjointness residual must fall by at least 10×.
        let modes = SpPotential::random_sp_modes(1, 9, 3, 0.1);
        let worst_at = |n: usize| -> f64 {
            let grid = PeriodicGrid::new(1, n).unwrap();
            let j = AkStructure::from_potential(SpPotential::from_modes(&grid, &modes).unwrap())
                .unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..4u64 {
                let f = random_band_limited(&grid, 300 + i, 4, 1.0, 0, 0).unwrap();
                let v = tangent(&j, 400 + i, 4);
                let lhs = inner(&j, p(&j, &f).unwrap().field(), v.field()).unwrap();
                let rhs = inner(&j, &f, &p_star(&v).unwrap()).unwrap();
                worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1e-14));
            }
            worst
        };
        let coarse = worst_at(16);
        let fine = worst_at(32);
        assert!(
            fine <= coarse / 10.0,
            "adjointness residual {coarse:.3e} -> {fine:.3e}"
        );
    }

    #[test]
    fn scalar_curvature_is_a_moment_map() {
        // μ(J)(f) = ∫ f·(s^∇ − s̄) vol satisfies dμ(f)(v) = −⟨JPf, v⟩:
        // centered differences of μ along the retraction against the pairing.
        let j = random_structure(1, 32, 47, 3, 0.1);
        let f = random_band_limited(j.grid(), 48, 4, 1.0, 0, 0).unwrap();
        let v = tangent(&j, 49, 4);
        let mu = |state: &Arc<AkStructure>| -> f64 {
            let curv = state.curvature();
            let mut dev = curv.s_nabla.clone();
            for val in dev.values_mut() {
                *val -= curv.s_bar;
            }
            inner(state, &f, &dev).unwrap()
        };
        let jpf = jp(&j, &f).unwrap();
        let pairing = -inner(&j, jpf.field(), v.field()).unwrap();
        let t = 1e-3;
        let jp_ = crate::structure::retract(&j, &v, t).unwrap();
        let jm_ = crate::structure::retract(&j, &v, -t).unwrap();
        let fd = (mu(&jp_) - mu(&jm_)) / (2.0 * t);
        assert!(
            (fd - pairing).abs() / pairing.abs().max(1e-14) < 1e-5,
            "moment map pairing {pairing:.6e} vs FD {fd:.6e}"
        );
    }

    #[test]
    fn calabi_operators_split_and_positivity() {
        let j = random_structure(1, 32, 50, 3, 0.15);
        let fr = random_band_limited(j.grid(), 51, 4, 1.0, 0, 0).unwrap();
        let fi = random_band_limited(j.grid(), 52, 4, 1.0, 0, 0).unwrap();
        let ff = ComplexScalarField::new(fr.clone(), fi.clone()).unwrap();

        // 𝕃⁺ + 𝕃⁻ = 2𝕃 componentwise
        let plus = calabi_plus(&j, &ff).unwrap();
        let minus = calabi_minus(&j, &ff).unwrap();
        let lre = lichnerowicz(&j, &fr).unwrap();
        let lim = lichnerowicz(&j, &fi).unwrap();
        assert!(plus.re.add(&minus.re).sub(&lre.scaled(2.0)).sup_abs() < 1e-10);
        assert!(plus.im.add(&minus.im).sub(&lim.scaled(2.0)).sup_abs() < 1e-10);

        // Hermitian semi-positivity Re⟨𝕃⁺F, F⟩ ≥ 0
        let (re, _) = hermitian_inner(&j, &plus, &ff).unwrap();
        assert!(re >= -1e-10, "Re⟨𝕃⁺F,F⟩ = {re:.3e}");

        // real F at flat: 𝕃±F = ½Δ²F
        let jf = flat(1, 16);
        let g = random_band_limited(jf.grid(), 53, 4, 1.0, 0, 0).unwrap();
        let gf = ComplexScalarField::real(g.clone()).unwrap();
        let oracle = crate::oracles::flat_biharmonic_half(&g).unwrap();
        for op in [calabi_plus(&jf, &gf).unwrap(), calabi_minus(&jf, &gf).unwrap()] {
            assert!(op.re.sub(&oracle).sup_abs() < 1e-10);
            assert!(op.im.sup_abs() < 1e-12);
        }

        // flat is extremal: 𝕃⁺𝕃⁻ = 𝕃⁻𝕃⁺ and
        // Re⟨𝕃⁺f₁, 𝕃⁻f₂⟩ = ⟨𝕃f₁, 𝕃f₂⟩ − ¼⟨ℒ_Kf₁, ℒ_Kf₂⟩ (ℒ_K = 0 here)
        let f2 = random_band_limited(jf.grid(), 54, 4, 1.0, 0, 0).unwrap();
        let g1 = ComplexScalarField::real(g.clone()).unwrap();
        let g2 = ComplexScalarField::real(f2.clone()).unwrap();
        let pm = calabi_minus(&jf, &calabi_plus(&jf, &g1).unwrap()).unwrap();
        let mp = calabi_plus(&jf, &calabi_minus(&jf, &g1).unwrap()).unwrap();
        assert!(pm.re.sub(&mp.re).sup_abs() < 1e-10);
        let (lhs, _) = hermitian_inner(
            &jf,
            &calabi_plus(&jf, &g1).unwrap(),
            &calabi_minus(&jf, &g2).unwrap(),
        )
        .unwrap();
        let want = inner(
            &jf,
            &lichnerowicz(&jf, &g).unwrap(),
            &lichnerowicz(&jf, &f2).unwrap(),
        )
        .unwrap();
        assert!((lhs - want).abs() / want.abs().max(1e-14) < 1e-9);
    }

    #[test]
    fn h_operator_flat_identities() {
        let j = flat(1, 16);
        let f = random_band_limited(j.grid(), 60, 4, 1.0, 0, 0).unwrap();
        // H(P(f)) = 0 at flat
        let pf = p(&j, &f).unwrap();
        let hp = h_op(&j, &pf).unwrap();
        assert!(hp.sup_abs() < 1e-10, "H(Pf) = {:.3e}", hp.sup_abs());
        // ⟨H(JPf), JPf⟩ = 2⟨𝕃f, 𝕃f⟩ ≥ 0
        let jpf = jp(&j, &f).unwrap();
        let h = h_op(&j, &jpf).unwrap();
        let quad = inner(&j, &h, jpf.field()).unwrap();
        let lf = lichnerowicz(&j, &f).unwrap();
        let want = 2.0 * inner(&j, &lf, &lf).unwrap();
        assert!((quad - want).abs() / want.max(1e-14) < 1e-9);
        assert!(quad >= 0.0);
        // H(v) is tangent at an extremal structure
        let diag = crate::structure::tangent_diagnostics(&j, &h);
        assert!(diag.anti_commutation.max(diag.g_symmetry) < 1e-10);
    }

    #[test]
    fn h_tilde_relation() {
        let j = random_structure(1, 32, 61, 3, 0.2);
        let v = tangent(&j, 62, 4);
        let h = h_op(&j, &v).unwrap();
        let ht = h_tilde(&j, &v).unwrap();
        let lkj = lie_k_endo(&j, j.j()).unwrap();
        let vlkj = crate::calculus::fieldalg::endo_compose(v.field(), &lkj);
        let resid = ht.add(&h).sub(&vlkj).sup_abs();
        assert!(resid < 1e-10 * vlkj.sup_abs().max(1.0), "H̃ + H − vℒ_KJ = {resid:.3e}");
    }

    #[test]
    fn u_lie_k_j_self_pairing_vanishes() {
        // ⟨uℒ_K J, u⟩ = 0 for every tangent u.
        let j = random_structure(1, 32, 63, 3, 0.2);
        let u = tangent(&j, 64, 4);
        let lkj = lie_k_endo(&j, j.j()).unwrap();
        let ulkj = crate::calculus::fieldalg::endo_compose(u.field(), &lkj);
        let pair = inner(&j, &ulkj, u.field()).unwrap();
        let scale = norm(&j, &ulkj).unwrap() * norm(&j, u.field()).unwrap();
        assert!(pair.abs() < 1e-10 * scale.max(1.0), "⟨uℒ_KJ, u⟩ = {pair:.3e}");
    }

    #[test]
    fn calabi_functional_values() {
        let j = flat(2, 8);
        assert!(calabi_functional(&j).abs() < 1e-20);
        let j = random_structure(1, 32, 65, 3, 0.2);
        let c = calabi_functional(&j);
        assert!(c > 0.0);
        // 𝒞 ≥ ∫ (s̄)² vol
        let s_bar = j.curvature().s_bar;
        assert!(c >= s_bar * s_bar * TAU * TAU - 1e-15);
    }

    #[test]
    fn kernel_of_discrete_lichnerowicz_matches_kernel_of_p() {
        // At flat, 𝕃f = 0 ⟺ P(f) = 0. On the grid both kernels consist of
        // the constants plus the 2^dim − 1 Nyquist modes that the spectral
        // derivative annihilates by construction: dimension 4 on T².
        let j = flat(1, 12);
        let lmat = lichnerowicz_matrix(&j).unwrap();
        let svd_l = nalgebra::SVD::new_unordered(lmat, false, true);
        let smax = svd_l.singular_values.max();
        let lker = svd_l
            .singular_values
            .iter()
            .filter(|s| **s <= 1e-10 * smax)
            .count();
        let pmat = p_matrix(&j).unwrap();
        let svd_p = nalgebra::SVD::new(pmat.clone(), false, false);
        let pmax = svd_p.singular_values.max();
        let pker = svd_p
            .singular_values
            .iter()
            .filter(|s| **s <= 1e-10 * pmax)
            .count();
        assert_eq!(lker, 4, "ker 𝕃 dimension");
        assert_eq!(pker, 4, "ker P dimension");

        // ker 𝕃 ⊆ ker P: P annihilates every small-singular-value direction
        // of 𝕃, so the two kernels coincide.
        let vt = svd_l.v_t.unwrap();
        for (idx, s) in svd_l.singular_values.iter().enumerate() {
            if *s <= 1e-10 * smax {
                let dir = vt.row(idx).transpose();
                let image = &pmat * &dir;
                assert!(image.norm() <= 1e-9 * pmax, "P on ker 𝕃 direction: {:.3e}", image.norm());
            }
        }
    }
}
