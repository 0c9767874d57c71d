//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS/FAIL line with the measured quantity next to its pinned band.
//!
//! The long-running criteria (the h = 1/32 scenario runs and the
//! 20000-step constant baselines) dominate the wall time; run with
//! `cargo test -p acflow --test acceptance -- --nocapture` to watch
//! progress.

use std::sync::{Arc, OnceLock};

use acflow::adapt::{next_step, run_adaptive, run_constant, ControllerConfig, RunOptions};
use acflow::dln;
use acflow::energy::check_dissipation;
use acflow::fem::{assemble_mass, Spaces};
use acflow::mesh::build_rectangle_mesh;
use acflow::model::PhysParams;
use acflow::solver::{init_state_scenario, FieldState, LevelFields, SolverConfig, Stepper};
use acflow::verify::{
    run_convergence, scenario_library, ConvergenceTable, MmsProblem, MmsSolution, ScenarioKind,
    StudyAxis, StudyConfig,
};

/// Tolerance the per-step linear/nonlinear solve is held to. The constraint
/// rows are linear, so after the accepted Newton iterate the divergence
/// defect is bounded by the converged residual norm; with a direct
/// factorization this absolute tolerance is the solve tolerance, and the
/// divergence-free criterion allows ten times it.
const SOLVE_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-9;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "{} criterion {}: {}",
        if pass { "PASS" } else { "FAIL" },
        criterion,
        detail
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_temporal_convergence() {
    // h = 1/32 desk reduction, k = 1/4 .. 1/32, theta = 0.3
    let cfg = StudyConfig::desk_default(StudyAxis::Time);
    assert_eq!(cfg.levels, vec![0.25, 0.125, 0.0625, 0.03125]);
    assert!((cfg.fixed_h - 1.0 / 32.0).abs() < 1e-15);
    assert!((cfg.theta - 0.3).abs() < 1e-15);
    let table = run_convergence(&cfg).expect("time study");
    let ru = table.rate_l2("u");
    let rphi = table.rate_l2("phi");
    report(
        "1 (temporal rates)",
        (1.8..=2.6).contains(&ru) && (1.7..=2.3).contains(&rphi),
        &format!("L2 rate u = {ru:.3} (band [1.8, 2.6]), phi = {rphi:.3} (band [1.7, 2.3])"),
    );
}

// ------------------------------------------------------------- 2 & 3

/// One shared four-level spatial study: criterion 2 fits its pinned coarse
/// levels {1/8, 1/16, 1/32}; criterion 3 fits {1/16, 1/32, 1/64}, one
/// refinement deeper, where the strongly oscillatory pressure is resolved
/// enough for the H1 norms to be asymptotic.
fn space_table() -> &'static ConvergenceTable {
    static TABLE: OnceLock<ConvergenceTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut cfg = StudyConfig::desk_default(StudyAxis::Space);
        assert_eq!(cfg.levels, vec![0.125, 0.0625, 0.03125]);
        assert!((cfg.fixed_dt - 1e-4).abs() < 1e-18);
        cfg.levels.push(1.0 / 64.0);
        run_convergence(&cfg).expect("space study")
    })
}

fn subset_rate(t: &ConvergenceTable, field: &str, range: std::ops::Range<usize>, h1: bool) -> f64 {
    let idx = acflow::verify::convergence::field_index(field);
    let levels = &t.levels[range.clone()];
    let errs: Vec<f64> = t.errors[range]
        .iter()
        .map(|e| if h1 { e[idx].h1 } else { e[idx].l2 })
        .collect();
    acflow::verify::fit_rate(levels, &errs).unwrap()
}

#[test]
fn criterion_2_spatial_l2_convergence() {
    let t = space_table();
    let u = subset_rate(t, "u", 0..3, false);
    let w = subset_rate(t, "w", 0..3, false);
    let phi = subset_rate(t, "phi", 0..3, false);
    let xi = subset_rate(t, "xi", 0..3, false);
    let p = subset_rate(t, "p", 0..3, false);
    report(
        "2 (spatial L2 rates)",
        u >= 2.7 && w >= 2.7 && phi >= 2.7 && xi >= 2.0 && p >= 2.2,
        &format!(
            "u = {u:.3}, w = {w:.3}, phi = {phi:.3} (>= 2.7); xi = {xi:.3} (>= 2.0); p = {p:.3} (>= 2.2)"
        ),
    );
}

#[test]
fn criterion_3_spatial_h1_convergence() {
    let t = space_table();
    let u = subset_rate(t, "u", 1..4, true);
    let phi = subset_rate(t, "phi", 1..4, true);
    let xi = subset_rate(t, "xi", 1..4, true);
    let p = subset_rate(t, "p", 1..4, true);
    report(
        "3 (spatial H1 rates)",
        (1.8..=2.2).contains(&u)
            && (1.8..=2.2).contains(&phi)
            && (0.8..=1.3).contains(&xi)
            && (0.8..=1.3).contains(&p),
        &format!(
            "u = {u:.3}, phi = {phi:.3} (band [1.8, 2.2]); xi = {xi:.3}, p = {p:.3} (band [0.8, 1.3])"
        ),
    );
}

// ---------------------------------------------------------------- 4 & 7

struct SpinodalRun {
    records: Vec<acflow::energy::EnergyRecord>,
    max_div: f64,
}

/// Spinodal scenario at h = 1/32 (48x48 cells on [0,1.5]^2) with constant
/// k = 0.01 to the given horizon.
fn spinodal_run(seed: u64, horizon: f64) -> SpinodalRun {
    let scenario = scenario_library(ScenarioKind::Spinodal);
    let spaces = Arc::new(Spaces::new(
        build_rectangle_mesh(scenario.x_range, scenario.y_range, 48, 48).unwrap(),
    ));
    let params = scenario.params;
    let (phi0, u_raw) = scenario.initial_nodal_data(&spaces, seed);
    let level0 = init_state_scenario(&spaces, &params, phi0, u_raw, 0.0).unwrap();
    let mut stepper = Stepper::new(
        Arc::clone(&spaces),
        params,
        0.3,
        SolverConfig::default(),
        None,
    )
    .unwrap();
    let opts = RunOptions {
        horizon,
        snapshot_times: Vec::new(),
        record_stride: 1,
    };
    let result = run_constant(&mut stepper, level0, scenario.dt, &opts).unwrap();
    let max_div = result
        .diags
        .iter()
        .map(|d| d.div_u.max(d.div_w))
        .fold(0.0_f64, f64::max);
    SpinodalRun {
        records: result.records,
        max_div,
    }
}

fn dissipation_violations(records: &[acflow::energy::EnergyRecord], tol: f64) -> (usize, f64) {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for pair in records.windows(2) {
        let (pass, gap) = check_dissipation(pair[1].e, pair[0].e, tol);
        worst = worst.max(gap);
        if !pass {
            violations += 1;
        }
    }
    (violations, worst)
}

#[test]
fn criterion_4_energy_dissipation_profile() {
    let run = spinodal_run(20240842, 2.0);
    let tol = 10.0 * NEWTON_TOL;
    let (violations, worst) = dissipation_violations(&run.records, tol);
    let e0 = run.records.first().unwrap().e;
    let e_final = run.records.last().unwrap().e;
    // energy at 10% of the horizon
    let e_early = run
        .records
        .iter()
        .find(|r| r.t >= 0.2 - 1e-12)
        .unwrap()
        .e;
    let early_fraction = (e0 - e_early) / (e0 - e_final);
    report(
        "4 (dissipation, main seed)",
        violations == 0 && early_fraction >= 0.9,
        &format!(
            "violations = {violations} (max gap {worst:.2e}, tol {tol:.1e}); \
             {:.1}% of the total decay within the first 10% of the horizon (>= 90%)",
            100.0 * early_fraction
        ),
    );
    report(
        "7 (divergence-free, spinodal)",
        run.max_div <= 10.0 * SOLVE_TOL,
        &format!("max ||B u||, ||B w|| = {:.2e} (<= {:.1e})", run.max_div, 10.0 * SOLVE_TOL),
    );
}

#[test]
fn criterion_4_energy_dissipation_seed_reruns() {
    let tol = 10.0 * NEWTON_TOL;
    for seed in [1u64, 2, 3, 4, 5] {
        let run = spinodal_run(seed, 2.0);
        let (violations, worst) = dissipation_violations(&run.records, tol);
        report(
            &format!("4 (dissipation, seed {seed})"),
            violations == 0,
            &format!("violations = {violations}, max gap {worst:.2e} (tol {tol:.1e})"),
        );
    }
}

#[test]
fn criterion_4_energy_dissipation_nonuniform_steps() {
    // alternating k, 2k: the dissipation law is unconditional in the grid
    let scenario = scenario_library(ScenarioKind::Spinodal);
    let spaces = Arc::new(Spaces::new(
        build_rectangle_mesh(scenario.x_range, scenario.y_range, 48, 48).unwrap(),
    ));
    let params = scenario.params;
    let (phi0, u_raw) = scenario.initial_nodal_data(&spaces, 20240842);
    let level0 = init_state_scenario(&spaces, &params, phi0, u_raw, 0.0).unwrap();
    let mut stepper = Stepper::new(
        Arc::clone(&spaces),
        params,
        0.3,
        SolverConfig::default(),
        None,
    )
    .unwrap();

    let k = 0.01;
    let horizon = 2.0;
    let tol = 10.0 * NEWTON_TOL;
    let (level1, _) = stepper.cn_bootstrap(&level0, k).unwrap();
    let mut state = FieldState {
        prev: level0,
        curr: level1,
    };
    let mut e_prev = acflow::energy::discrete_energy(
        &stepper.spaces,
        &stepper.ops,
        &stepper.params,
        stepper.theta,
        &state.prev,
        &state.curr,
    );
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut max_div = 0.0_f64;
    let mut step = 1usize;
    while state.curr.t < horizon - 1e-12 {
        let k_n = (if step % 2 == 1 { 2.0 * k } else { k }).min(horizon - state.curr.t);
        let (new, stats) = stepper.dln_step(&state, k_n, state.k_prev()).unwrap();
        let e = acflow::energy::discrete_energy(
            &stepper.spaces,
            &stepper.ops,
            &stepper.params,
            stepper.theta,
            &state.curr,
            &new,
        );
        let (ok, gap) = check_dissipation(e, e_prev, tol);
        if !ok {
            violations += 1;
        }
        worst = worst.max(gap);
        max_div = max_div.max(stats.div_u.max(stats.div_w));
        e_prev = e;
        state.prev = std::mem::replace(&mut state.curr, new);
        step += 1;
    }
    report(
        "4 (dissipation, alternating k/2k)",
        violations == 0,
        &format!("{step} steps, violations = {violations}, max gap {worst:.2e}"),
    );
    report(
        "7 (divergence-free, non-uniform grid)",
        max_div <= 10.0 * SOLVE_TOL,
        &format!("max divergence defect {max_div:.2e}"),
    );
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_5_g_stability_identity() {
    let mut state = 0x5eedu64;
    let mut rnd = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / (u32::MAX as f64)
    };
    // identity mass over a small vector block
    let mut coo = acflow::fem::Coo::new(8, 8);
    for i in 0..8 {
        coo.add(i, i, 1.0);
    }
    let mass = coo.to_csr();
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let theta = rnd();
        let eps = 1.9 * rnd() - 0.95;
        let k_prev = 0.3 + rnd();
        let k_n = k_prev * (1.0 + eps) / (1.0 - eps);
        let c = dln::compute_coeffs(theta, k_n, k_prev).unwrap();
        let v: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..8).map(|_| 6.0 * rnd() - 3.0).collect())
            .collect();
        let scale: f64 = v
            .iter()
            .map(|x| x.iter().map(|a| a * a).sum::<f64>())
            .sum::<f64>()
            .max(1e-30);
        let res = dln::g_stability_residual(&c, &mass, &v[0], &v[1], &v[2]) / scale;
        worst = worst.max(res);
    }
    report(
        "5 (G-stability identity)",
        worst <= 1e-12,
        &format!("max relative residual over 1000 cases = {worst:.3e} (<= 1e-12)"),
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_dln_degeneracies() {
    use nalgebra::{DMatrix, DVector};
    // a fixed nonsymmetric linear system y' = A y + g(t)
    let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.4, 0.0, -0.3, -2.0, 0.7, 0.1, 0.0, -0.5]);
    let g = |t: f64| DVector::from_vec(vec![t.sin(), 0.2 * t, 1.0 - t]);
    let y0 = DVector::from_vec(vec![1.0, -0.5, 0.25]);
    let y1 = DVector::from_vec(vec![0.9, -0.3, 0.2]);

    // theta = 1 equals the implicit midpoint rule on [t_n, t_{n+1}]
    let (k, t) = (0.07, 0.3);
    let c = dln::compute_coeffs(1.0, k, 0.05).unwrap();
    let dln_next = dln::one_leg_linear_step(&a, &c, t, k, 0.05, &y0, &y1, g).unwrap();
    // independently coded midpoint: (I - k/2 A) y2 = y1 + k [A y1 / 2 + g(t + k/2)]
    let n = 3;
    let lhs = DMatrix::identity(n, n) - &a * (0.5 * k);
    let rhs = &y1 + (&a * &y1 * 0.5 + g(t + 0.5 * k)) * k;
    let midpoint = lhs.lu().solve(&rhs).unwrap();
    let d1 = (&dln_next - &midpoint).amax();

    // theta = 0 with equal steps equals the midpoint rule on [t_{n-1}, t_{n+1}]
    let c0 = dln::compute_coeffs(0.0, k, k).unwrap();
    let dln_next0 = dln::one_leg_linear_step(&a, &c0, t, k, k, &y0, &y1, g).unwrap();
    // (I - k A) y2 = y0 + 2k [A y0 / 2 + g(t_n)]
    let lhs = DMatrix::identity(n, n) - &a * k;
    let rhs = &y0 + (&a * &y0 * 0.5 + g(t)) * (2.0 * k);
    let midpoint2 = lhs.lu().solve(&rhs).unwrap();
    let d0 = (&dln_next0 - &midpoint2).amax();

    report(
        "6 (DLN degeneracies)",
        d1 <= 1e-12 && d0 <= 1e-12,
        &format!("theta=1 vs midpoint: {d1:.2e}; theta=0 vs two-interval midpoint: {d0:.2e} (<= 1e-12)"),
    );
}

// ---------------------------------------------------------------- 7 (bubble_shrink leg)

#[test]
fn criterion_7_divergence_free_bubble_shrink() {
    // short bubble_shrink run so all three scenarios are exercised
    let scenario = scenario_library(ScenarioKind::BubbleShrink);
    let spaces = Arc::new(Spaces::new(
        build_rectangle_mesh(scenario.x_range, scenario.y_range, 32, 32).unwrap(),
    ));
    let (phi0, u_raw) = scenario.initial_nodal_data(&spaces, 11);
    let level0 = init_state_scenario(&spaces, &scenario.params, phi0, u_raw, 0.0).unwrap();
    let mut stepper = Stepper::new(
        Arc::clone(&spaces),
        scenario.params,
        0.3,
        SolverConfig::default(),
        None,
    )
    .unwrap();
    let opts = RunOptions {
        horizon: 0.1,
        snapshot_times: Vec::new(),
        record_stride: 1,
    };
    let result = run_constant(&mut stepper, level0, scenario.dt, &opts).unwrap();
    let max_div = result
        .diags
        .iter()
        .map(|d| d.div_u.max(d.div_w))
        .fold(0.0_f64, f64::max);
    report(
        "7 (divergence-free, bubble_shrink)",
        max_div <= 10.0 * SOLVE_TOL,
        &format!("max divergence defect over {} steps = {max_div:.2e}", result.accepted_steps),
    );
}

// ---------------------------------------------------------------- 8

fn adaptive_vs_constant(re: f64) {
    let mut scenario = scenario_library(ScenarioKind::BubbleMerge);
    scenario.params.mu = 1.0 / re;
    scenario.horizon = 2.0;
    let spaces = Arc::new(Spaces::new(
        build_rectangle_mesh(scenario.x_range, scenario.y_range, 48, 48).unwrap(),
    ));
    let (phi0, u_raw) = scenario.initial_nodal_data(&spaces, scenario.default_seed);
    let level0 = init_state_scenario(&spaces, &scenario.params, phi0, u_raw, 0.0).unwrap();

    let ctrl = ControllerConfig {
        k_min: 1e-4,
        k_max: 0.01,
        delta: 0.1,
        k0: 1e-4,
    };
    // The criterion's tolerances (5% field agreement, order-of-magnitude step
    // counts) sit orders above the solver-tolerance effect, so both arms run
    // at 1e-7, which is what makes the 20000-step baseline affordable.
    let run_tol = 1e-7;
    let cfg = SolverConfig {
        newton_tol_abs: run_tol,
        ..Default::default()
    };
    let mut stepper = Stepper::new(Arc::clone(&spaces), scenario.params, 0.3, cfg, None).unwrap();
    let opts = RunOptions {
        horizon: 2.0,
        snapshot_times: Vec::new(),
        record_stride: 1,
    };
    eprintln!("criterion 8 (Re = {re:.0}): adaptive run ...");
    let adaptive = run_adaptive(&mut stepper, level0.clone(), &ctrl, &opts).unwrap();
    let div_adaptive = adaptive
        .diags
        .iter()
        .map(|d| d.div_u.max(d.div_w))
        .fold(0.0_f64, f64::max);
    // the cached factorizations are most of the process footprint; release
    // them before the baseline stepper builds its own
    drop(stepper);
    eprintln!(
        "criterion 8 (Re = {re:.0}): adaptive finished with {} steps; constant baseline (20000 steps) ...",
        adaptive.accepted_steps
    );

    let constant_steps = 20000usize;
    let opts_const = RunOptions {
        horizon: 2.0,
        snapshot_times: Vec::new(),
        record_stride: 100,
    };
    let mut stepper2 = Stepper::new(Arc::clone(&spaces), scenario.params, 0.3, cfg, None).unwrap();
    let constant = run_constant(
        &mut stepper2,
        level0,
        2.0 / constant_steps as f64,
        &opts_const,
    )
    .unwrap();
    assert_eq!(constant.accepted_steps, constant_steps);

    // relative L2 agreement of the final fields (mass-norm); the velocity is
    // compared with an absolute floor since it may have decayed to noise level
    let ms = assemble_mass(&spaces, &spaces.scalar);
    let mv = assemble_mass(&spaces, &spaces.vel);
    let dphi: Vec<f64> = adaptive
        .state
        .curr
        .phi
        .iter()
        .zip(&constant.state.curr.phi)
        .map(|(a, b)| a - b)
        .collect();
    let rel_phi =
        (ms.bilinear(&dphi, &dphi) / ms.bilinear(&constant.state.curr.phi, &constant.state.curr.phi))
            .sqrt();
    let du: Vec<f64> = adaptive
        .state
        .curr
        .u
        .iter()
        .zip(&constant.state.curr.u)
        .map(|(a, b)| a - b)
        .collect();
    let u_norm = mv.bilinear(&constant.state.curr.u, &constant.state.curr.u).sqrt();
    let rel_u = mv.bilinear(&du, &du).sqrt() / u_norm.max(1e-6);

    let ratio = adaptive.accepted_steps as f64 / constant_steps as f64;
    report(
        &format!("8 (adaptive efficiency, Re = {re:.0})"),
        ratio <= 0.10 && rel_phi <= 0.05 && rel_u <= 0.05,
        &format!(
            "adaptive {} vs constant {constant_steps} steps (ratio {:.3} <= 0.10); \
             final-field agreement phi {rel_phi:.3e}, u {rel_u:.3e} (<= 5e-2)",
            adaptive.accepted_steps, ratio
        ),
    );
    report(
        &format!("7 (divergence-free, adaptive bubble_merge Re = {re:.0})"),
        div_adaptive <= 10.0 * run_tol,
        &format!("max divergence defect {div_adaptive:.2e} (<= 10x this run's tolerance {run_tol:.0e})"),
    );
    // every accepted non-clamped step stays inside the band
    let in_band = adaptive
        .records
        .iter()
        .take(adaptive.records.len().saturating_sub(1))
        .all(|r| r.k >= ctrl.k_min - 1e-15 && r.k <= ctrl.k_max + 1e-15);
    assert!(in_band, "accepted steps left [k_min, k_max]");
}

#[test]
fn criterion_8_adaptive_efficiency_re_5e2() {
    adaptive_vs_constant(5e2);
}

#[test]
fn criterion_8_adaptive_efficiency_re_5e5() {
    adaptive_vs_constant(5e5);
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_9_dense_oracle_equivalence() {
    use acflow::solver::StepCtx;
    // 2x2 mesh, nu = lambda = 0, frozen secant: the step is affine
    let spaces = Arc::new(Spaces::new(
        build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap(),
    ));
    let params = PhysParams {
        nu: 0.0,
        lambda: 0.0,
        ..Default::default()
    };
    let cfg = SolverConfig {
        freeze_potential_secant: true,
        ..Default::default()
    };
    let mut stepper = Stepper::new(Arc::clone(&spaces), params, 0.3, cfg, None).unwrap();

    // a valid-ish state with boundary-respecting fields
    let mut s = 77u64;
    let mut rnd = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
        ((s >> 33) as f64) / (u32::MAX as f64) * 0.5 - 0.25
    };
    let mut mk = |t: f64| {
        let mut l = LevelFields::zeros(&spaces, t);
        l.u.iter_mut().for_each(|v| *v = rnd());
        l.w.iter_mut().for_each(|v| *v = rnd());
        l.xi.iter_mut().for_each(|v| *v = rnd());
        l.p.iter_mut().for_each(|v| *v = rnd());
        l.phi.iter_mut().for_each(|v| *v = rnd() + 0.2);
        l.m.iter_mut().for_each(|v| *v = rnd());
        for &d in &spaces.vel.boundary_dofs {
            l.u[d] = 0.0;
            l.w[d] = 0.0;
        }
        l
    };
    let state = FieldState {
        prev: mk(0.0),
        curr: mk(0.01),
    };
    let (k_n, k_prev) = (0.02, 0.01);

    // sparse path
    let (level_sparse, _) = stepper.dln_step(&state, k_n, k_prev).unwrap();

    // dense brute-force solve of the same assembled affine system
    let coeffs = dln::compute_coeffs(0.3, k_n, k_prev).unwrap();
    let fbuf = stepper.empty_forcing();
    let params = stepper.params;
    let (system, ops) = stepper.system_and_ops();
    let ctx = StepCtx {
        params: &params,
        coeffs: &coeffs,
        state: &state,
        fbuf: &fbuf,
        has_forcing: false,
        freeze_secant: true,
    };
    let x0 = system.predictor(&state, k_n, &fbuf);
    let jac = system.jacobian_csr(&ctx, &x0);
    let mut res = Vec::new();
    system.residual(ops, &ctx, &x0, &mut res);

    let n = x0.len();
    let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for k in jac.row_ptr[r]..jac.row_ptr[r + 1] {
            dense[(r, jac.col_idx[k])] = jac.vals[k];
        }
    }
    let rhs = nalgebra::DVector::from_iterator(n, res.iter().map(|v| -v));
    let dx = dense.lu().solve(&rhs).expect("dense solve");
    let x_star: Vec<f64> = (0..n).map(|i| x0[i] + dx[i]).collect();
    let level_dense = system.extract_level(&x_star, &state, &coeffs, state.curr.t + k_n);

    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let worst = [
        max_diff(&level_sparse.u, &level_dense.u),
        max_diff(&level_sparse.w, &level_dense.w),
        max_diff(&level_sparse.xi, &level_dense.xi),
        max_diff(&level_sparse.p, &level_dense.p),
        max_diff(&level_sparse.phi, &level_dense.phi),
        max_diff(&level_sparse.m, &level_dense.m),
    ]
    .into_iter()
    .fold(0.0_f64, f64::max);
    report(
        "9 (dense oracle equivalence)",
        worst <= 1e-10,
        &format!("max |sparse - dense| over all six fields = {worst:.3e} (<= 1e-10)"),
    );
}

// ---------------------------------------------------------------- 10

/// 6th-order central first derivative.
fn fd1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 3.0 * h) + 9.0 * f(x - 2.0 * h) - 45.0 * f(x - h) + 45.0 * f(x + h)
        - 9.0 * f(x + 2.0 * h)
        + f(x + 3.0 * h))
        / (60.0 * h)
}

/// 6th-order central second derivative.
fn fd2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (2.0 * f(x - 3.0 * h) - 27.0 * f(x - 2.0 * h) + 270.0 * f(x - h) - 490.0 * f(x)
        + 270.0 * f(x + h)
        - 27.0 * f(x + 2.0 * h)
        + 2.0 * f(x + 3.0 * h))
        / (180.0 * h * h)
}

fn fd_grad(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> [f64; 2] {
    [fd1(&|s| f(s, y), x, h), fd1(&|s| f(x, s), y, h)]
}

fn fd_lap(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, h: f64) -> f64 {
    fd2(&|s| f(s, y), x, h) + fd2(&|s| f(x, s), y, h)
}

#[test]
fn criterion_10_mms_forcing_validation() {
    // Strong-form residuals of the manufactured solution with all derivatives
    // taken by high-order finite differences of the printed fields only —
    // fully independent of both the FEM code and the jet-based forcing.
    // Residuals are scaled by the largest term magnitude (the momentum terms
    // reach O(10^3), where an absolute 1e-8 would be meaningless).
    let spaces = Spaces::new(build_rectangle_mesh((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap());
    let prob = MmsProblem::new(&spaces, PhysParams::default()).unwrap();

    let mut state = 0xACABu64;
    let mut rnd = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / (u32::MAX as f64)
    };
    // step sizes chosen to balance truncation against rounding per operator
    let (h1, h2_small, h2_w) = (1e-3, 2e-3, 5e-3);
    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let (x, y, t) = (rnd(), rnd(), rnd());
        let u = MmsSolution::u(x, y, t);
        let w = MmsSolution::w(x, y, t);
        let phi = MmsSolution::phi(x, y, t);
        let m = MmsSolution::m(x, y, t);

        let u1 = |x: f64, y: f64| MmsSolution::u(x, y, t)[0];
        let u2 = |x: f64, y: f64| MmsSolution::u(x, y, t)[1];
        let w1 = |x: f64, y: f64| MmsSolution::w(x, y, t)[0];
        let w2 = |x: f64, y: f64| MmsSolution::w(x, y, t)[1];
        let pf = |x: f64, y: f64| MmsSolution::p(x, y, t);
        let phif = |x: f64, y: f64| MmsSolution::phi(x, y, t);
        let xif = |x: f64, y: f64| MmsSolution::xi(x, y, t);

        let ut = [
            fd1(&|s| MmsSolution::u(x, y, s)[0], t, 1e-3),
            fd1(&|s| MmsSolution::u(x, y, s)[1], t, 1e-3),
        ];
        let phit = fd1(&|s| MmsSolution::phi(x, y, s), t, 1e-3);
        let lap_u = [fd_lap(&u1, x, y, h2_small), fd_lap(&u2, x, y, h2_small)];
        let lap_w = [fd_lap(&w1, x, y, h2_w), fd_lap(&w2, x, y, h2_w)];
        let grad_p = fd_grad(&pf, x, y, h1);
        let grad_phi = fd_grad(&phif, x, y, h1);
        let grad_u = [fd_grad(&u1, x, y, h1), fd_grad(&u2, x, y, h1)];
        let lap_phi = fd_lap(&phif, x, y, h2_small);
        let grad_xi = fd_grad(&xif, x, y, h1);

        let g_u = prob.forcing_u(x, y, t);
        let g_phi = prob.forcing_phi(x, y, t);
        let un2 = u[0] * u[0] + u[1] * u[1];

        // momentum: u_t - mu lap u - gamma lap w + (u.grad)u + rho u
        //           + lambda |u|^2 u + grad p - m grad phi = g_u
        for c in 0..2 {
            let adv = u[0] * grad_u[c][0] + u[1] * grad_u[c][1];
            let terms = [
                ut[c],
                -lap_u[c],
                -lap_w[c],
                adv,
                u[c],
                un2 * u[c],
                grad_p[c],
                -m * grad_phi[c],
                -g_u[c],
            ];
            let scale = terms.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
            let res: f64 = terms.iter().sum();
            worst = worst.max(res.abs() / scale);
        }
        // mixed relation: w + lap u + grad xi = 0
        for c in 0..2 {
            let scale = w[c].abs().max(lap_u[c].abs()).max(1.0);
            worst = worst.max((w[c] + lap_u[c] + grad_xi[c]).abs() / scale);
        }
        // incompressibility
        worst = worst.max((grad_u[0][0] + grad_u[1][1]).abs() / 1.0_f64.max(grad_u[0][0].abs()));
        // phase equation: phi_t + u.grad phi + sigma m = g_phi
        {
            let terms = [
                phit,
                u[0] * grad_phi[0] + u[1] * grad_phi[1],
                m,
                -g_phi,
            ];
            let scale = terms.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
            worst = worst.max(terms.iter().sum::<f64>().abs() / scale);
        }
        // constitutive law: m = -lap phi + phi^3 - phi
        {
            let res = m + lap_phi - phi * phi * phi + phi;
            let scale = m.abs().max(lap_phi.abs()).max(1.0);
            worst = worst.max(res.abs() / scale);
        }
    }
    report(
        "10 (manufactured forcing validation)",
        worst <= 1e-8,
        &format!("max scaled strong-form residual over 200 points = {worst:.3e} (<= 1e-8)"),
    );
}

// -------------------------------------------------- controller unit lock-in

#[test]
fn controller_band_examples() {
    // the published controller setup: doubling / halving with clamps
    let cfg = ControllerConfig {
        k_min: 1e-4,
        k_max: 0.01,
        delta: 0.1,
        k0: 1e-4,
    };
    assert_eq!(next_step(0.0, 0.0, 0.004, &cfg), 0.008);
    assert_eq!(next_step(0.2, 0.0, 2e-4, &cfg), 1e-4);
    assert_eq!(next_step(0.1, 0.1, 0.004, &cfg), 0.008);
}
