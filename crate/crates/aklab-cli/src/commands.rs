//! The five subcommands: verify, flow, geodesic, hessian, symbol.
//!
//! Exit codes: 0 success, 1 numeric check failure or instability, 2 usage
//! and configuration errors (the caller maps config errors to 2).

use std::sync::Arc;

use anyhow::Context;
use serde::Serialize;

use aklab_core::calculus::{fieldalg, random_band_limited, PeriodicGrid};
use aklab_core::dynamics::{self, FlowOptions};
use aklab_core::operators::{self, OperatorReport};
use aklab_core::structure::{
    identity_battery, retract, AkStructure, SpPotential, TangentField,
};
use aklab_core::symbol;

use crate::config::RunConfig;
use crate::report::{write_atomic, write_json, VerificationReport};

pub fn build_grid(config: &RunConfig) -> anyhow::Result<Arc<PeriodicGrid>> {
    Ok(PeriodicGrid::new(config.grid.m, config.grid.n)?)
}

/// The configured base structure: explicit modes when given, the seeded
/// random potential otherwise, the flat structure when the amplitude is 0.
pub fn build_structure(config: &RunConfig) -> anyhow::Result<Arc<AkStructure>> {
    let grid = build_grid(config)?;
    let pot = if !config.potential.modes.is_empty() {
        let modes: Vec<_> = config.potential.modes.iter().map(|m| m.to_sp_mode()).collect();
        SpPotential::from_modes(&grid, &modes)?
    } else if config.potential.amplitude == 0.0 {
        SpPotential::zero(&grid)
    } else {
        SpPotential::random(
            &grid,
            config.seed,
            config.potential.cutoff,
            config.potential.amplitude,
        )?
    };
    Ok(AkStructure::from_potential(pot)?)
}

fn tangent_input(base: &Arc<AkStructure>, seed: u64, cutoff: usize, amp: f64) -> anyhow::Result<TangentField> {
    let raw = random_band_limited(base.grid(), seed, cutoff, amp, 1, 1)?;
    Ok(TangentField::project(base, &raw))
}

fn rel(gap: f64, scale: f64) -> f64 {
    gap / scale.max(operators::REL_FLOOR)
}

/// Runs the verification suites and writes the JSON report.
/// Returns the process exit code.
pub fn cmd_verify(config: &RunConfig) -> anyhow::Result<i32> {
    let j = build_structure(config)?;
    let grid = j.grid();
    let gm = (grid.m(), grid.n());
    let tol = &config.tolerances;
    let seed = config.seed;
    let cutoff = config.verify.input_cutoff;
    let mut entries = Vec::new();

    // Identity battery.
    entries.extend(identity_battery(&j, seed ^ BATTERY_SEED_MIX, cutoff, tol.identity_battery)?);

    // Adjoint pairs over the configured number of random (f, v) pairs.
    let mut worst_p: f64 = 0.0;
    let mut worst_jp: f64 = 0.0;
    for i in 0..config.verify.pairs as u64 {
        let f = random_band_limited(grid, seed.wrapping_add(100 + i), cutoff, 1.0, 0, 0)?;
        let v = tangent_input(&j, seed.wrapping_add(200 + i), cutoff, 1.0)?;
        let pf = operators::p(&j, &f)?;
        let lhs = operators::inner(&j, pf.field(), v.field())?;
        let rhs = operators::inner(&j, &f, &operators::p_star(&v)?)?;
        worst_p = worst_p.max(rel((lhs - rhs).abs(), lhs.abs()));
        let jpf = operators::jp(&j, &f)?;
        let lhs = operators::inner(&j, jpf.field(), v.field())?;
        let rhs = operators::inner(&j, &f, &operators::jp_star(&v)?)?;
        worst_jp = worst_jp.max(rel((lhs - rhs).abs(), lhs.abs()));
    }
    entries.push(OperatorReport::relative("adjoint_pair_p", worst_p, 1.0, tol.adjointness, gm));
    entries.push(OperatorReport::relative("adjoint_pair_jp", worst_jp, 1.0, tol.adjointness, gm));

    // 𝕃 route agreement P*P = (JP)*JP.
    let f = random_band_limited(grid, seed.wrapping_add(300), cutoff, 1.0, 0, 0)?;
    let l1 = operators::lichnerowicz(&j, &f)?;
    let l2 = operators::lichnerowicz_via_jp(&j, &f)?;
    entries.push(OperatorReport::relative(
        "lichnerowicz_routes",
        l1.sub(&l2).sup_abs(),
        l1.sup_abs(),
        tol.lichnerowicz_routes,
        gm,
    ));

    // First variation of s^∇ against centered differences (Mohsen).
    let v = tangent_input(&j, seed.wrapping_add(400), cutoff, 1.0)?;
    let formula = operators::variation_s(&v)?;
    let fd_err = |t: f64| -> anyhow::Result<f64> {
        let jp_ = retract(&j, &v, t)?;
        let jm_ = retract(&j, &v, -t)?;
        let fd = jp_.curvature().s_nabla.sub(&jm_.curvature().s_nabla).scaled(0.5 / t);
        Ok(fd.sub(&formula).sup_abs())
    };
    let e2 = fd_err(2e-3)?;
    let e1 = fd_err(1e-3)?;
    entries.push(OperatorReport::relative(
        "first_variation_fd_gap",
        e1,
        formula.sup_abs(),
        tol.mohsen_gap,
        gm,
    ));
    // The convergence-order ratio is meaningful only while the O(t²)
    // truncation dominates the spatial floor; the floor is measured at a
    // step small enough that truncation is negligible.
    let floor = fd_err(1e-5)?;
    let ratio = e2 / e1.max(1e-300);
    let order_residual = if e1 > 10.0 * floor {
        (ratio - 4.0).abs()
    } else {
        0.0
    };
    entries.push(OperatorReport::absolute(
        "first_variation_fd_order",
        order_residual,
        4.0,
        tol.mohsen_order_window,
        gm,
    ));

    // Explicit curvature expression of 𝕃.
    let le = operators::lichnerowicz_explicit(&j, &f)?;
    entries.push(OperatorReport::relative(
        "lichnerowicz_explicit",
        le.sub(&l1).sup_abs(),
        l1.sup_abs(),
        tol.lichnerowicz_explicit,
        gm,
    ));

    // Salamon identity and the ℒ_K composition; scales include the
    // 𝕃-sized companions so the flat structure (where both sides vanish)
    // passes at rounding level.
    let f1 = random_band_limited(grid, seed.wrapping_add(500), cutoff, 1.0, 0, 0)?;
    let f2 = random_band_limited(grid, seed.wrapping_add(501), cutoff, 1.0, 0, 0)?;
    let p1 = operators::p(&j, &f1)?;
    let jp2 = operators::jp(&j, &f2)?;
    let lhs = operators::inner(&j, p1.field(), jp2.field())?;
    let bracket = aklab_core::structure::poisson(&j, &f1, &f2)?;
    let s = j.curvature().s_nabla.clone();
    let rhs = 0.5 * operators::inner(&j, &s, &bracket)?;
    let salamon_scale = lhs.abs().max(
        operators::norm(&j, p1.field())? * operators::norm(&j, jp2.field())?,
    );
    entries.push(OperatorReport::relative(
        "salamon_pairing",
        (lhs - rhs).abs(),
        salamon_scale,
        tol.salamon,
        gm,
    ));

    let lk_direct = operators::lie_k_scalar(&j, &f1)?;
    let lk_ops = operators::jp_star(&p1)?.scaled(2.0);
    let lk_scale = lk_direct.sup_abs().max(operators::lichnerowicz(&j, &f1)?.sup_abs());
    entries.push(OperatorReport::relative(
        "lie_k_composition",
        lk_direct.sub(&lk_ops).sup_abs(),
        lk_scale,
        tol.lie_k_composition,
        gm,
    ));

    let lkf2 = operators::lie_k_scalar(&j, &f2)?;
    let scalar_pair = operators::inner(&j, &lk_direct, &f2)? + operators::inner(&j, &f1, &lkf2)?;
    let scalar_scale = operators::norm(&j, &f1)? * operators::norm(&j, &f2)?;
    entries.push(OperatorReport::relative(
        "lie_k_anti_self_adjoint_scalar",
        scalar_pair.abs(),
        scalar_scale,
        tol.anti_self_adjoint,
        gm,
    ));
    let u = tangent_input(&j, seed.wrapping_add(502), cutoff, 1.0)?;
    let w = tangent_input(&j, seed.wrapping_add(503), cutoff, 1.0)?;
    let tangent_pair = operators::inner(&j, &operators::lie_k_endo(&j, u.field())?, w.field())?
        + operators::inner(&j, u.field(), &operators::lie_k_endo(&j, w.field())?)?;
    let tangent_scale = operators::norm(&j, u.field())? * operators::norm(&j, w.field())?;
    entries.push(OperatorReport::relative(
        "lie_k_anti_self_adjoint_tangent",
        tangent_pair.abs(),
        tangent_scale,
        tol.anti_self_adjoint,
        gm,
    ));

    // D𝒞 annihilates Im P.
    let dc = operators::variation_c(&p1)?;
    let jlkj = operators::j_lie_k_j(&j)?;
    let scale = operators::norm(&j, p1.field())? * operators::norm(&j, &jlkj)?.max(1.0);
    entries.push(OperatorReport::relative(
        "calabi_variation_on_im_p",
        dc.abs(),
        scale,
        tol.variation_orthogonality,
        gm,
    ));

    // Hessian formula against the mixed FD with Richardson extrapolation.
    let hu = tangent_input(&j, seed.wrapping_add(600), cutoff, 0.5)?;
    let hv = tangent_input(&j, seed.wrapping_add(601), cutoff, 0.5)?;
    let probe = dynamics::hessian_probe(&j, &hu, &hv, &config.hessian.fd_steps)?;
    entries.push(OperatorReport::relative(
        "hessian_formula_vs_fd",
        (probe.formula - probe.fd_richardson).abs(),
        probe.formula.abs(),
        tol.hessian_gap,
        gm,
    ));
    if let Some(ratio) = probe.order_ratio {
        let gap_rel = rel((probe.formula - probe.fd_richardson).abs(), probe.formula.abs());
        let order_residual = if gap_rel < 1e-11 { 0.0 } else { (ratio - 4.0).abs() };
        entries.push(OperatorReport::absolute(
            "hessian_fd_order",
            order_residual,
            4.0,
            tol.hessian_order_window,
            gm,
        ));
    }

    // Symbol suite: exact flat extraction on this grid size, plus weak
    // parabolicity sampling on the configured structure.
    let flat = AkStructure::flat(grid);
    let mut worst_ext: f64 = 0.0;
    let fiber0 = symbol::fiber_basis(&flat, 0);
    let mut k1 = vec![0i64; grid.dim()];
    k1[0] = 1;
    let mut k2 = vec![1i64; grid.dim()];
    k2[grid.dim() - 1] = 2;
    for k in [k1, k2] {
        for vf in &fiber0 {
            let ext = symbol::extract_symbol(&flat, &k, vf)?;
            let xi: Vec<f64> = k.iter().map(|x| *x as f64).collect();
            let want = symbol::symbol_formula(&flat, 0, &xi, vf)?;
            let gap = ext
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst_ext = worst_ext.max(gap);
        }
    }
    entries.push(OperatorReport::absolute(
        "symbol_flat_extraction",
        worst_ext,
        1.0,
        tol.symbol_extraction,
        gm,
    ));
    let para = symbol::parabolicity_report(&j, config.symbol.samples, seed.wrapping_add(700))?;
    entries.push(OperatorReport::absolute(
        "symbol_semi_positivity",
        (-para.min_pairing).max(0.0),
        1.0,
        tol.symbol_positivity,
        gm,
    ));
    entries.push(OperatorReport::absolute(
        "symbol_kernel_codimension_one",
        (para.kernel_dim as f64 - (para.fiber_dim as f64 - 1.0)).abs(),
        1.0,
        0.5,
        gm,
    ));

    let calabi = operators::calabi_functional(&j);
    let report = VerificationReport::new(config.clone(), entries);
    let pass = report.overall_pass;
    let path = config.output.dir.join("verify_report.json");
    write_json(&path, &report).context("writing verification report")?;

    println!("calabi functional 𝒞 = {calabi:.17e}");
    for e in &report.entries {
        let residual = if e.tolerance_is_relative {
            e.residual_rel
        } else {
            e.residual_abs
        };
        println!(
            "  {:<36} {:>12.3e} ≤ {:>8.1e}  {}",
            e.name,
            residual,
            e.tolerance,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    println!(
        "verification {} -> {}",
        if pass { "PASSED" } else { "FAILED" },
        path.display()
    );
    Ok(if pass { 0 } else { 1 })
}

const BATTERY_SEED_MIX: u64 = 0x5eed;

#[derive(Debug, Serialize)]
struct FlowSummary {
    steps_completed: usize,
    final_calabi: f64,
    monotone: bool,
    monotonicity_violations: usize,
    error: Option<String>,
}

/// Runs the flow, writing the CSV trace (including the rows before any
/// instability) and a JSON summary with the monotonicity verdict.
pub fn cmd_flow(config: &RunConfig) -> anyhow::Result<i32> {
    let j0 = build_structure(config)?;
    let grid = j0.grid();
    let opts = FlowOptions {
        c_cfl: config.flow.c_cfl,
        ..FlowOptions::default()
    };
    let dt = if config.flow.dt > 0.0 {
        config.flow.dt
    } else {
        opts.default_dt(grid)
    };
    if dt > opts.max_stable_dt(grid) * (1.0 + 1e-12) {
        anyhow::bail!(
            "flow.dt = {dt:.3e} exceeds the stability bound c_cfl·h⁴/m² = {:.3e}",
            opts.max_stable_dt(grid)
        );
    }

    let mut trace = dynamics::FlowTrace::default();
    let mut state = Arc::clone(&j0);
    let mut t = 0.0;
    trace.rows.push(dynamics::flow_row(&state, t, dt));
    let mut error: Option<String> = None;
    for _ in 0..config.flow.steps {
        match dynamics::flow_step(&state, dt, &opts) {
            Ok(next) => {
                t += dt;
                let row = dynamics::flow_row(&next, t, dt);
                let prev = trace.rows.last().expect("seeded").calabi;
                if row.calabi > prev + 1e-12 * prev.abs().max(1e-300) {
                    trace.monotonicity_violations += 1;
                }
                trace.rows.push(row);
                state = next;
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }

    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    let csv_path = config.output.dir.join("flow_trace.csv");
    write_atomic(&csv_path, &csv)?;

    let summary = FlowSummary {
        steps_completed: trace.rows.len() - 1,
        final_calabi: trace.rows.last().expect("seeded").calabi,
        monotone: trace.monotonicity_violations == 0,
        monotonicity_violations: trace.monotonicity_violations,
        error: error.clone(),
    };
    write_json(&config.output.dir.join("flow_summary.json"), &summary)?;

    println!(
        "flow: {} steps, final 𝒞 = {:.17e}",
        summary.steps_completed, summary.final_calabi
    );
    println!(
        "monotonicity: {}",
        if summary.monotone {
            "non-increasing".to_string()
        } else {
            format!("{} violations", summary.monotonicity_violations)
        }
    );
    println!("trace -> {}", csv_path.display());
    if let Some(e) = &error {
        eprintln!("flow stopped early: {e}");
        return Ok(1);
    }
    Ok(if summary.monotone { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct GeodesicReport {
    t_end: f64,
    dt: f64,
    closed_form_gap: f64,
    velocity_gap: f64,
    res_j2: f64,
    res_compat: f64,
    speed_drift: f64,
    second_variation_formula: f64,
    second_variation_fd: f64,
    j_dotdot_pairing_rel: f64,
    pass: bool,
}

pub fn cmd_geodesic(config: &RunConfig) -> anyhow::Result<i32> {
    let j0 = build_structure(config)?;
    let v = tangent_input(
        &j0,
        config.seed.wrapping_add(800),
        config.geodesic.cutoff.min(j0.grid().n() / 3),
        config.geodesic.amplitude,
    )?;
    let (state, mon) =
        dynamics::geodesic_integrate(&j0, &v, config.geodesic.t_end, config.geodesic.dt, 1e-6)?;
    let (closed, jdot) = dynamics::closed_form_geodesic(&j0, &v, config.geodesic.t_end)?;
    let gap = state.j.sub(closed.j()).sup_abs();
    let vgap = state.j_dot.sub(&jdot).sup_abs();

    let (formula, fd) = dynamics::second_variation_geodesic(&j0, &v, 5e-3)?;
    let vv = fieldalg::endo_compose(v.field(), v.field());
    let jpp = fieldalg::endo_compose(&vv, j0.j());
    let jlkj = operators::j_lie_k_j(&j0)?;
    let pair = operators::inner(&j0, &jpp, &jlkj)?;
    let scale = operators::norm(&j0, &jpp)? * operators::norm(&j0, &jlkj)?;
    let pairing_rel = pair.abs() / scale.max(operators::REL_FLOOR);

    let pass = gap <= 1e-8
        && (formula - fd).abs() <= 1e-4 * formula.abs().max(operators::REL_FLOOR)
        && pairing_rel <= 1e-8;
    let report = GeodesicReport {
        t_end: config.geodesic.t_end,
        dt: config.geodesic.dt,
        closed_form_gap: gap,
        velocity_gap: vgap,
        res_j2: mon.res_j2,
        res_compat: mon.res_compat,
        speed_drift: mon.speed_drift,
        second_variation_formula: formula,
        second_variation_fd: fd,
        j_dotdot_pairing_rel: pairing_rel,
        pass,
    };
    let path = config.output.dir.join("geodesic_report.json");
    write_json(&path, &report)?;
    println!(
        "geodesic: closed-form gap {gap:.3e}, d²𝒞 formula {formula:.6e} vs fd {fd:.6e} -> {}",
        path.display()
    );
    Ok(if pass { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct HessianReport {
    formula: f64,
    fd: Vec<f64>,
    fd_steps: Vec<f64>,
    fd_richardson: f64,
    order_ratio: Option<f64>,
    relative_gap: f64,
    pass: bool,
}

pub fn cmd_hessian(config: &RunConfig) -> anyhow::Result<i32> {
    let j = build_structure(config)?;
    let cutoff = config.hessian.cutoff.min(j.grid().n() / 3);
    let u = tangent_input(&j, config.seed.wrapping_add(600), cutoff, config.hessian.amplitude)?;
    let v = tangent_input(&j, config.seed.wrapping_add(601), cutoff, config.hessian.amplitude)?;
    let probe = dynamics::hessian_probe(&j, &u, &v, &config.hessian.fd_steps)?;
    let relative_gap = (probe.formula - probe.fd_richardson).abs()
        / probe.formula.abs().max(operators::REL_FLOOR);
    let pass = relative_gap <= config.tolerances.hessian_gap;
    let report = HessianReport {
        formula: probe.formula,
        fd: probe.fd.clone(),
        fd_steps: probe.fd_steps.clone(),
        fd_richardson: probe.fd_richardson,
        order_ratio: probe.order_ratio,
        relative_gap,
        pass,
    };
    let path = config.output.dir.join("hessian_report.json");
    write_json(&path, &report)?;
    println!(
        "hessian: formula {:.8e}, Richardson FD {:.8e}, relative gap {relative_gap:.3e} -> {}",
        probe.formula,
        probe.fd_richardson,
        path.display()
    );
    Ok(if pass { 0 } else { 1 })
}

#[derive(Debug, Serialize)]
struct SymbolReportOut {
    extraction_worst_gap: f64,
    parabolicity: aklab_core::symbol::ParabolicityReport,
    pass: bool,
}

pub fn cmd_symbol(config: &RunConfig) -> anyhow::Result<i32> {
    let j = build_structure(config)?;
    let grid = j.grid();
    let flat = AkStructure::flat(grid);
    let fiber0 = symbol::fiber_basis(&flat, 0);
    let mut worst: f64 = 0.0;
    let mut k1 = vec![0i64; grid.dim()];
    k1[0] = 1;
    let mut k2 = vec![1i64; grid.dim()];
    k2[grid.dim() - 1] = 2;
    for k in [k1, k2] {
        for vf in &fiber0 {
            let ext = symbol::extract_symbol(&flat, &k, vf)?;
            let xi: Vec<f64> = k.iter().map(|x| *x as f64).collect();
            let want = symbol::symbol_formula(&flat, 0, &xi, vf)?;
            let gap = ext
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = worst.max(gap);
        }
    }
    let para = symbol::parabolicity_report(&j, config.symbol.samples, config.seed.wrapping_add(700))?;
    let pass = worst <= config.tolerances.symbol_extraction && para.pass;
    let report = SymbolReportOut {
        extraction_worst_gap: worst,
        parabolicity: para,
        pass,
    };
    let path = config.output.dir.join("symbol_report.json");
    write_json(&path, &report)?;
    println!(
        "symbol: extraction gap {worst:.3e}, min (σ̂₄v,v) = {:.3e} -> {}",
        report.parabolicity.min_pairing,
        path.display()
    );
    Ok(if pass { 0 } else { 1 })
}
