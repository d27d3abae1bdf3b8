//! Hermitian Calabi flow time-stepping, geodesics of the space of compatible
//! structures, and Hessian probes with finite-difference cross checks.
//!
//! The flow dJ/dt = JP(s^∇) is integrated with classical four-stage
//! Runge-Kutta; every stage state is produced by the exact symplectic
//! retraction, so compatibility holds at machine precision along the whole
//! trajectory. Geodesics satisfy the pointwise matrix ODE J″ = J′J′J and are
//! integrated in the ambient space with invariant monitoring; the conjugation
//! family exp(tb)·J·exp(−tb), b = ½Jv, solves the same equation in closed
//! form and serves as the oracle.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::calculus::tensor::TensorField;
use crate::calculus::{fieldalg, matexp, smat};
use crate::error::{Error, Result};
use crate::operators;
use crate::structure::{retract, AkStructure, SpPotential, TangentField};

/// One monitored flow step.
#[derive(Debug, Clone, Serialize)]
pub struct FlowRow {
    pub t: f64,
    pub calabi: f64,
    /// sup |s^∇ − s̄^∇|
    pub s_dev: f64,
    pub min_eig_g: f64,
    /// sup ‖J² + I‖_F
    pub res_j2: f64,
    /// sup ‖JᵀΩ₀J − Ω₀‖_F
    pub res_compat: f64,
    pub dt: f64,
}

/// Per-step records of the monitored quantities along a flow run.
#[derive(Debug, Default)]
pub struct FlowTrace {
    pub rows: Vec<FlowRow>,
    /// −d𝒞/dt = ⟨½Jℒ_KJ, Jℒ_KJ⟩ = 2‖JP(s^∇)‖² per recorded state.
    pub dissipation: Vec<f64>,
    /// Count of steps where 𝒞 increased by more than 1e−12·𝒞.
    pub monotonicity_violations: usize,
}

impl FlowTrace {
    /// CSV with the documented header, full double precision.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "t,calabi,s_dev,min_eig_g,res_J2,res_compat,dt")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.t, r.calabi, r.s_dev, r.min_eig_g, r.res_j2, r.res_compat, r.dt
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Stability guard dt ≤ c_cfl·h⁴/m². The leading term of the flow
    /// linearization is −2JP(JP)* with top symbol eigenvalue
    /// |ξ|⁴ ≤ (m n²/... = m²n⁴/4 on the grid, so classical RK4 is stable up
    /// to dt ≈ 2.78·4/(m²n⁴) ≈ 0.0071·h⁴/m²; the default keeps ~30% margin.
    pub c_cfl: f64,
    /// Abort when min eig g drops below this.
    pub min_eig_floor: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            c_cfl: 0.005,
            min_eig_floor: 1e-6,
        }
    }
}

impl FlowOptions {
    pub fn max_stable_dt(&self, grid: &crate::calculus::PeriodicGrid) -> f64 {
        self.c_cfl * grid.spacing().powi(4) / (grid.m() * grid.m()) as f64
    }

    pub fn default_dt(&self, grid: &crate::calculus::PeriodicGrid) -> f64 {
        self.max_stable_dt(grid)
    }
}

/// Flow velocity JP(s^∇_J) = ½Jℒ_K J at the given structure.
pub fn flow_velocity(base: &Arc<AkStructure>) -> Result<TangentField> {
    let s_nabla = base.curvature().s_nabla.clone();
    operators::jp(base, &s_nabla)
}

fn check_state(base: &Arc<AkStructure>, t: f64, opts: &FlowOptions) -> Result<()> {
    base.j().check_finite("flow state").map_err(|_| Error::StepUnstable {
        t,
        reason: "non-finite structure".into(),
    })?;
    let min_eig = base.min_metric_eigenvalue();
    if min_eig < opts.min_eig_floor {
        return Err(Error::StepUnstable {
            t,
            reason: format!("min eig g = {min_eig:.3e} below floor"),
        });
    }
    Ok(())
}

/// One classical RK4 step of dJ/dt = JP(s^∇) with retraction per stage.
pub fn flow_step(base: &Arc<AkStructure>, dt: f64, opts: &FlowOptions) -> Result<Arc<AkStructure>> {
    if dt <= 0.0 {
        return Err(Error::Invalid(format!("flow step dt = {dt} must be positive")));
    }
    let k1 = flow_velocity(base)?;
    let ja = retract(base, &k1, 0.5 * dt)?;
    check_state(&ja, 0.0, opts)?;
    let k2 = TangentField::project(base, flow_velocity(&ja)?.field());
    let jb = retract(base, &k2, 0.5 * dt)?;
    check_state(&jb, 0.0, opts)?;
    let k3 = TangentField::project(base, flow_velocity(&jb)?.field());
    let jc = retract(base, &k3, dt)?;
    check_state(&jc, 0.0, opts)?;
    let k4 = TangentField::project(base, flow_velocity(&jc)?.field());

    let mut vel = k1.field().clone();
    vel.axpy(2.0, k2.field());
    vel.axpy(2.0, k3.field());
    vel.axpy(1.0, k4.field());
    vel.scale(1.0 / 6.0);
    let combined = TangentField::project(base, &vel);
    retract(base, &combined, dt)
}

/// Monitored quantities of one flow state.
pub fn flow_row(base: &Arc<AkStructure>, t: f64, dt: f64) -> FlowRow {
    let curv = Arc::clone(base.curvature());
    let mut s_dev: f64 = 0.0;
    for v in curv.s_nabla.values() {
        s_dev = s_dev.max((v - curv.s_bar).abs());
    }
    let res = base.invariant_residuals();
    FlowRow {
        t,
        calabi: operators::calabi_functional(base),
        s_dev,
        min_eig_g: base.min_metric_eigenvalue(),
        res_j2: res.j_squared,
        res_compat: res.compatibility,
        dt,
    }
}

/// Runs `steps` flow steps, recording the monitored quantities at every
/// state (including the initial one).
pub fn run_flow(
    j0: &Arc<AkStructure>,
    dt: f64,
    steps: usize,
    opts: &FlowOptions,
) -> Result<(FlowTrace, Arc<AkStructure>)> {
    let bound = opts.max_stable_dt(j0.grid());
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::Invalid(format!(
            "dt = {dt:.3e} exceeds stability bound c_cfl·h⁴/m² = {bound:.3e}"
        )));
    }
    let mut trace = FlowTrace::default();
    let mut state = Arc::clone(j0);
    let mut t = 0.0;
    trace.rows.push(flow_row(&state, t, dt));
    let vel = flow_velocity(&state)?;
    trace
        .dissipation
        .push(2.0 * operators::inner(&state, vel.field(), vel.field())?);
    for _ in 0..steps {
        let next = flow_step(&state, dt, opts)?;
        check_state(&next, t + dt, opts)?;
        t += dt;
        let row = flow_row(&next, t, dt);
        let prev_c = trace.rows.last().expect("trace is seeded").calabi;
        if row.calabi > prev_c + 1e-12 * prev_c.abs().max(1e-300) {
            trace.monotonicity_violations += 1;
        }
        let vel = flow_velocity(&next)?;
        trace
            .dissipation
            .push(2.0 * operators::inner(&next, vel.field(), vel.field())?);
        trace.rows.push(row);
        state = next;
    }
    Ok((trace, state))
}

/// Ambient state of a geodesic integration: the structure field and its
/// velocity, both plain endomorphism fields.
#[derive(Debug, Clone)]
pub struct GeodesicState {
    pub j: TensorField,
    pub j_dot: TensorField,
}

/// Monitored invariants of a geodesic run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeodesicMonitors {
    /// sup ‖J² + I‖_F over the final state
    pub res_j2: f64,
    /// sup ‖JᵀΩ₀J − Ω₀‖_F over the final state
    pub res_compat: f64,
    /// |‖J′(T)‖ − ‖J′(0)‖| / ‖J′(0)‖ (trace-form norm)
    pub speed_drift: f64,
}

/// Pointwise RK4 on (J, J′) with J″ = J′J′J.
pub fn geodesic_integrate(
    j0: &Arc<AkStructure>,
    v0: &TangentField,
    t_end: f64,
    dt: f64,
    drift_tol: f64,
) -> Result<(GeodesicState, GeodesicMonitors)> {
    if !v0.based_at(j0) {
        return Err(Error::Invalid("geodesic: velocity based at a different structure".into()));
    }
    let grid = j0.grid();
    let d = grid.dim();
    let npts = grid.len();
    let steps = (t_end / dt).round() as usize;

    let speed0 = operators::inner_trace(v0.field(), v0.field())?.max(0.0).sqrt();

    let mut j = j0.j().clone();
    let mut v = v0.field().clone();
    let mut bufs: Vec<Vec<f64>> = (0..4).map(|_| vec![0.0; d * d]).collect();
    for _ in 0..steps {
        // k-stage accumulation per grid point; the ODE is pointwise.
        for pt in 0..npts {
            let (jm, vm) = (j.point(pt).to_vec(), v.point(pt).to_vec());
            let accel = |jj: &[f64], vv: &[f64], out: &mut [f64]| {
                let mut t1 = vec![0.0; d * d];
                smat::mul(vv, vv, &mut t1, d);
                smat::mul(&t1, jj, out, d);
            };
            let (j1, v1) = (&jm, &vm);
            accel(j1, v1, &mut bufs[0]); // a1
            let j2: Vec<f64> = jm.iter().zip(v1).map(|(x, y)| x + 0.5 * dt * y).collect();
            let v2: Vec<f64> = vm.iter().zip(&bufs[0]).map(|(x, y)| x + 0.5 * dt * y).collect();
            accel(&j2, &v2, &mut bufs[1]); // a2
            let j3: Vec<f64> = jm.iter().zip(&v2).map(|(x, y)| x + 0.5 * dt * y).collect();
            let v3: Vec<f64> = vm.iter().zip(&bufs[1]).map(|(x, y)| x + 0.5 * dt * y).collect();
            accel(&j3, &v3, &mut bufs[2]); // a3
            let j4: Vec<f64> = jm.iter().zip(&v3).map(|(x, y)| x + dt * y).collect();
            let v4: Vec<f64> = vm.iter().zip(&bufs[2]).map(|(x, y)| x + dt * y).collect();
            accel(&j4, &v4, &mut bufs[3]); // a4

            let jp = j.point_mut(pt);
            for i in 0..d * d {
                jp[i] += dt / 6.0 * (v1[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            }
            let vp = v.point_mut(pt);
            for i in 0..d * d {
                vp[i] += dt / 6.0 * (bufs[0][i] + 2.0 * bufs[1][i] + 2.0 * bufs[2][i] + bufs[3][i]);
            }
        }
    }

    let monitors = {
        let omega = smat::omega0(grid.m());
        let mut tmp1 = vec![0.0; d * d];
        let mut tmp2 = vec![0.0; d * d];
        let (mut r_j2, mut r_comp): (f64, f64) = (0.0, 0.0);
        for pt in 0..npts {
            let jm = j.point(pt);
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
        }
        let speed_t = operators::inner_trace(&v, &v)?.max(0.0).sqrt();
        GeodesicMonitors {
            res_j2: r_j2,
            res_compat: r_comp,
            speed_drift: (speed_t - speed0).abs() / speed0.max(1e-300),
        }
    };
    if monitors.res_j2.max(monitors.res_compat) > drift_tol {
        return Err(Error::InvariantViolation {
            what: "geodesic invariant drift",
            residual: monitors.res_j2.max(monitors.res_compat),
            tolerance: drift_tol,
        });
    }
    Ok((GeodesicState { j, j_dot: v }, monitors))
}

/// Closed-form geodesic J(t) = exp(tb)·J₀·exp(−tb) with b = ½J₀v₀, which
/// satisfies J(0) = J₀, J′(0) = v₀ and J″ = J′J′J; returns the structure and
/// its velocity J′(t) = [b, J(t)].
pub fn closed_form_geodesic(
    j0: &Arc<AkStructure>,
    v0: &TangentField,
    t: f64,
) -> Result<(Arc<AkStructure>, TensorField)> {
    let grid = j0.grid();
    let d = grid.dim();
    let mut j_new = TensorField::zeros(grid, 1, 1);
    let mut j_dot = TensorField::zeros(grid, 1, 1);
    let mut b = vec![0.0; d * d];
    let mut tmp = vec![0.0; d * d];
    for pt in 0..grid.len() {
        let jm = j0.j().point(pt);
        let vm = v0.field().point(pt);
        smat::mul(jm, vm, &mut b, d);
        for item in b.iter_mut() {
            *item *= 0.5 * t;
        }
        let neg: Vec<f64> = b.iter().map(|x| -x).collect();
        let e_plus = matexp::matrix_exp(&b, d)?;
        let e_minus = matexp::matrix_exp(&neg, d)?;
        smat::mul(jm, &e_minus, &mut tmp, d);
        smat::mul(&e_plus, &tmp, j_new.point_mut(pt), d);
        // J′ = [b, J]/t resolved without the fold-in: b_actual = b/t
        if t != 0.0 {
            let jn = j_new.point(pt).to_vec();
            let comm = smat::commutator(&b, &jn, d);
            let jd = j_dot.point_mut(pt);
            for i in 0..d * d {
                jd[i] = comm[i] / t;
            }
        } else {
            j_dot.point_mut(pt).copy_from_slice(vm);
        }
    }
    let structure = AkStructure::from_j_field(j_new, None)?;
    Ok((structure, j_dot))
}

/// The Hessian probe around one structure: the closed-form value of
/// Hess 𝒞(u,v) for the nested exponential family against its mixed finite
/// difference, with a Richardson extrapolation over the step schedule.
#[derive(Debug, Clone, Serialize)]
pub struct HessianProbe {
    pub formula: f64,
    /// Mixed central differences at each step of the schedule.
    pub fd: Vec<f64>,
    pub fd_steps: Vec<f64>,
    /// Richardson extrapolation of the two finest steps.
    pub fd_richardson: f64,
    /// (D(h1)−D(h2))/(D(h2)−D(h3)); ≈ 4 for a second-order difference.
    pub order_ratio: Option<f64>,
}

/// Generator a = −½Ju of the exponential family through J with velocity u.
fn generator_of(base: &AkStructure, u: &TangentField) -> TensorField {
    let mut a = fieldalg::endo_compose(base.j(), u.field());
    a.scale(-0.5);
    a
}

/// Hess 𝒞(u,v) = −⟨∂²J/∂t₁∂t₂, Jℒ_KJ⟩ + ⟨u, H(v)⟩ − ⟨u, vℒ_KJ⟩ for the
/// nested family exp(−t₂b)exp(−t₁a)·J·exp(t₁a)exp(t₂b), whose mixed partial
/// is \[\[J,a\],b\] in closed form.
pub fn hessian_formula(base: &Arc<AkStructure>, u: &TangentField, v: &TangentField) -> Result<f64> {
    let grid = base.grid();
    let d = grid.dim();
    let a = generator_of(base, u);
    let b = generator_of(base, v);
    let mut mixed = TensorField::zeros(grid, 1, 1);
    for pt in 0..grid.len() {
        let ja = smat::commutator(base.j().point(pt), a.point(pt), d);
        let jab = smat::commutator(&ja, b.point(pt), d);
        mixed.point_mut(pt).copy_from_slice(&jab);
    }
    let jlkj = operators::j_lie_k_j(base)?;
    let term1 = -operators::inner(base, &mixed, &jlkj)?;
    let hv = operators::h_op(base, v)?;
    let term2 = operators::inner(base, u.field(), &hv)?;
    let lkj = operators::lie_k_endo(base, base.j())?;
    let vlkj = fieldalg::endo_compose(v.field(), &lkj);
    let term3 = -operators::inner(base, u.field(), &vlkj)?;
    Ok(term1 + term2 + term3)
}

/// Constant-s^∇ reduction Hess 𝒞(u,v) = 2⟨(JP)*u, (JP)*v⟩.
pub fn hessian_constant_s(base: &Arc<AkStructure>, u: &TangentField, v: &TangentField) -> Result<f64> {
    let su = operators::jp_star(u)?;
    let sv = operators::jp_star(v)?;
    Ok(2.0 * operators::inner(base, &su, &sv)?)
}

/// 𝒞 evaluated on the nested two-parameter family at (t₁, t₂).
fn calabi_on_family(
    base: &Arc<AkStructure>,
    a: &TensorField,
    b: &TensorField,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    let grid = base.grid();
    let d = grid.dim();
    let mut j_new = TensorField::zeros(grid, 1, 1);
    let mut tmp1 = vec![0.0; d * d];
    let mut tmp2 = vec![0.0; d * d];
    for pt in 0..grid.len() {
        let am: Vec<f64> = a.point(pt).iter().map(|x| x * t1).collect();
        let bm: Vec<f64> = b.point(pt).iter().map(|x| x * t2).collect();
        let neg_a: Vec<f64> = am.iter().map(|x| -x).collect();
        let neg_b: Vec<f64> = bm.iter().map(|x| -x).collect();
        let ea_p = matexp::matrix_exp(&am, d)?;
        let ea_m = matexp::matrix_exp(&neg_a, d)?;
        let eb_p = matexp::matrix_exp(&bm, d)?;
        let eb_m = matexp::matrix_exp(&neg_b, d)?;
        // exp(−t₂b) exp(−t₁a) J exp(t₁a) exp(t₂b)
        smat::mul(base.j().point(pt), &ea_p, &mut tmp1, d);
        smat::mul(&ea_m, &tmp1, &mut tmp2, d);
        smat::mul(&tmp2, &eb_p, &mut tmp1, d);
        smat::mul(&eb_m, &tmp1, j_new.point_mut(pt), d);
    }
    let s = AkStructure::from_j_field(j_new, None)?;
    Ok(operators::calabi_functional(&s))
}

/// Centered 4-point mixed difference of 𝒞 over the nested family.
pub fn hessian_fd(
    base: &Arc<AkStructure>,
    u: &TangentField,
    v: &TangentField,
    step: f64,
) -> Result<f64> {
    let a = generator_of(base, u);
    let b = generator_of(base, v);
    let pp = calabi_on_family(base, &a, &b, step, step)?;
    let pm = calabi_on_family(base, &a, &b, step, -step)?;
    let mp = calabi_on_family(base, &a, &b, -step, step)?;
    let mm = calabi_on_family(base, &a, &b, -step, -step)?;
    Ok((pp - pm - mp + mm) / (4.0 * step * step))
}

/// Formula vs FD over the step schedule, with Richardson extrapolation and
/// the second-order convergence ratio.
pub fn hessian_probe(
    base: &Arc<AkStructure>,
    u: &TangentField,
    v: &TangentField,
    steps: &[f64],
) -> Result<HessianProbe> {
    let formula = hessian_formula(base, u, v)?;
    let mut fd = Vec::with_capacity(steps.len());
    for &h in steps {
        fd.push(hessian_fd(base, u, v, h)?);
    }
    let fd_richardson = if fd.len() >= 2 {
        let last = fd[fd.len() - 1];
        let prev = fd[fd.len() - 2];
        (4.0 * last - prev) / 3.0
    } else {
        *fd.last().unwrap_or(&f64::NAN)
    };
    let order_ratio = if fd.len() >= 3 {
        let n = fd.len();
        let d1 = fd[n - 3] - fd[n - 2];
        let d2 = fd[n - 2] - fd[n - 1];
        if d2.abs() > 0.0 {
            Some(d1 / d2)
        } else {
            None
        }
    } else {
        None
    };
    Ok(HessianProbe {
        formula,
        fd,
        fd_steps: steps.to_vec(),
        fd_richardson,
        order_ratio,
    })
}

/// d²𝒞/dt² along the closed-form geodesic through (J, v): the operator value
/// ⟨H(v), v⟩ against the centered second difference of 𝒞.
pub fn second_variation_geodesic(
    base: &Arc<AkStructure>,
    v: &TangentField,
    step: f64,
) -> Result<(f64, f64)> {
    let hv = operators::h_op(base, v)?;
    let formula = operators::inner(base, &hv, v.field())?;
    let c0 = operators::calabi_functional(base);
    let (jp, _) = closed_form_geodesic(base, v, step)?;
    let (jm, _) = closed_form_geodesic(base, v, -step)?;
    let cp = operators::calabi_functional(&jp);
    let cm = operators::calabi_functional(&jm);
    let fd = (cp - 2.0 * c0 + cm) / (step * step);
    Ok((formula, fd))
}

/// Least-squares residual of a tangent field against span{P(f), JP(g)} over
/// the grid basis. Dense; only sensible on small m=1 grids. Diagnostic for
/// "the flow stays in the complexified orbit".
pub fn distribution_residual(base: &Arc<AkStructure>, v: &TangentField) -> Result<f64> {
    let p_mat = operators::p_matrix(base)?;
    let npts = base.grid().len();
    let ncomp = base.grid().dim() * base.grid().dim();
    let mut jp_mat = nalgebra::DMatrix::zeros(npts * ncomp, npts);
    // columns of JP = J∘(columns of P)
    let d = base.grid().dim();
    for col in 0..npts {
        for pt in 0..npts {
            let jm = base.j().point(pt);
            for r in 0..d {
                for c in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += jm[r * d + k] * p_mat[(pt * ncomp + k * d + c, col)];
                    }
                    jp_mat[(pt * ncomp + r * d + c, col)] = s;
                }
            }
        }
    }
    let mut stacked = nalgebra::DMatrix::zeros(npts * ncomp, 2 * npts);
    stacked.view_mut((0, 0), (npts * ncomp, npts)).copy_from(&p_mat);
    stacked.view_mut((0, npts), (npts * ncomp, npts)).copy_from(&jp_mat);
    let rhs = nalgebra::DVector::from_column_slice(v.field().values());
    let svd = nalgebra::SVD::new(stacked.clone(), true, true);
    let sol = svd.solve(&rhs, 1e-10).map_err(|e| Error::Invalid(e.to_string()))?;
    let residual = (&stacked * sol - &rhs).norm();
    Ok(residual / rhs.norm().max(1e-300))
}

/// Generator a = −½Ju of the exponential family, exposed for probes.
pub fn family_generator(base: &AkStructure, u: &TangentField) -> SpPotential {
    SpPotential::new(generator_of(base, u)).expect("generator of a tangent field lies in sp(2m)")
}
