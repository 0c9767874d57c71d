//! Minimum-dissipation step controller and the run drivers.
//!
//! The controller is feed-forward: a completed step is always accepted and
//! the indicators only size the next one (doubling when the ratio of
//! numerical to physical dissipation is at or below δ, halving otherwise,
//! clamped to [k_min, k_max]). A strict mode that retries a failed Newton
//! solve at half the step exists as plumbing and is off by default. The final
//! step is clamped so runs land exactly on the horizon.

use crate::energy::{discrete_energy, dissipation_indicators, EnergyRecord};
use crate::solver::{FieldState, LevelFields, StepStats, Stepper};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct ControllerConfig {
    pub k_min: f64,
    pub k_max: f64,
    pub delta: f64,
    pub k0: f64,
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min > 0.0) {
            return Err(Error::invalid("k_min must be positive"));
        }
        if self.k_min > self.k_max {
            return Err(Error::invalid(format!(
                "k_min = {} exceeds k_max = {}",
                self.k_min, self.k_max
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta must be positive"));
        }
        if self.k0 < self.k_min || self.k0 > self.k_max {
            return Err(Error::invalid(format!(
                "k0 = {} outside [{}, {}]",
                self.k0, self.k_min, self.k_max
            )));
        }
        Ok(())
    }
}

impl Default for ControllerConfig {
    fn default() -> Self {
        // the published adaptive setup
        ControllerConfig {
            k_min: 1e-4,
            k_max: 1e-2,
            delta: 0.1,
            k0: 1e-4,
        }
    }
}

/// Next step size from the dissipation ratios of the completed step.
/// The growth branch is inclusive: χ exactly at δ doubles.
pub fn next_step(chi_u: f64, chi_phi: f64, k_n: f64, cfg: &ControllerConfig) -> f64 {
    if chi_u.abs().max(chi_phi.abs()) <= cfg.delta {
        (2.0 * k_n).min(cfg.k_max)
    } else {
        (0.5 * k_n).max(cfg.k_min)
    }
}

/// Per-step diagnostics kept alongside the energy records.
#[derive(Clone, Copy, Debug)]
pub struct StepDiag {
    pub div_u: f64,
    pub div_w: f64,
    pub refactorizations: usize,
    pub residual: f64,
}

pub struct RunResult {
    pub state: FieldState,
    pub records: Vec<EnergyRecord>,
    pub diags: Vec<StepDiag>,
    /// Accepted steps including the bootstrap.
    pub accepted_steps: usize,
    /// Snapshots requested through `snapshot_times`.
    pub snapshots: Vec<LevelFields>,
}

pub struct RunOptions {
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    /// Record an energy row every `record_stride` accepted steps (always
    /// records the first and last).
    pub record_stride: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            horizon: 1.0,
            snapshot_times: Vec::new(),
            record_stride: 1,
        }
    }
}

fn record_from(
    stepper: &Stepper,
    step: usize,
    k: f64,
    coeffs: &crate::dln::DlnCoeffs,
    state_before: &FieldState,
    new: &LevelFields,
    stats: &StepStats,
) -> (EnergyRecord, StepDiag) {
    let ind = dissipation_indicators(&stepper.ops, &stepper.params, coeffs, state_before, new);
    let e = discrete_energy(
        &stepper.spaces,
        &stepper.ops,
        &stepper.params,
        stepper.theta,
        &state_before.curr,
        new,
    );
    (
        EnergyRecord {
            step,
            t: new.t,
            k,
            e,
            eps_nd_u: ind.eps_nd_u,
            eps_nd_phi: ind.eps_nd_phi,
            eps_vd_u: ind.eps_vd_u,
            eps_pd_phi: ind.eps_pd_phi,
            chi_u: ind.chi_u,
            chi_phi: ind.chi_phi,
            newton_iters: stats.newton_iters,
        },
        StepDiag {
            div_u: stats.div_u,
            div_w: stats.div_w,
            refactorizations: stats.refactorizations,
            residual: stats.residual,
        },
    )
}

struct SnapshotQueue {
    times: Vec<f64>,
    next: usize,
}

impl SnapshotQueue {
    fn new(mut times: Vec<f64>, horizon: f64) -> Self {
        times.retain(|&t| t <= horizon + 1e-12);
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        SnapshotQueue { times, next: 0 }
    }

    fn due(&mut self, t: f64) -> bool {
        let mut hit = false;
        while self.next < self.times.len() && self.times[self.next] <= t + 1e-12 {
            self.next += 1;
            hit = true;
        }
        hit
    }
}

/// Constant-step driver: bootstrap then fixed k until the horizon, with the
/// final step clamped onto it.
pub fn run_constant(stepper: &mut Stepper, level0: LevelFields, k: f64, opts: &RunOptions) -> Result<RunResult> {
    if !(k > 0.0) {
        return Err(Error::invalid("step size must be positive"));
    }
    let horizon = opts.horizon;
    let t0 = level0.t;
    let mut snaps = SnapshotQueue::new(opts.snapshot_times.clone(), horizon);
    let mut snapshots = Vec::new();
    if snaps.due(t0) {
        snapshots.push(level0.clone());
    }

    let strict = stepper.cfg.strict_step_retry;
    let k0 = k.min(horizon - t0);
    let (level1, k0_used, stats) =
        attempt_with_retry(strict, k0, k0 / 8.0, |kk| stepper.cn_bootstrap(&level0, kk))?;
    let state0 = FieldState {
        prev: level0.clone(),
        curr: level0,
    };
    let cn_coeffs = crate::dln::compute_coeffs(1.0, k0_used, k0_used)?;
    let (rec, diag) = record_from(stepper, 0, k0_used, &cn_coeffs, &state0, &level1, &stats);
    let mut records = vec![rec];
    let mut diags = vec![diag];
    let mut state = FieldState {
        prev: state0.curr,
        curr: level1,
    };
    if snaps.due(state.curr.t) {
        snapshots.push(state.curr.clone());
    }
    let mut accepted = 1usize;
    let mut step_idx = 1usize;
    while state.curr.t < horizon - 1e-12 * horizon.max(1.0) {
        let k_n = k.min(horizon - state.curr.t);
        let k_prev = state.k_prev();
        let (new, k_used, stats) = attempt_with_retry(strict, k_n, k_n / 8.0, |kk| {
            stepper.dln_step(&state, kk, k_prev)
        })
        .map_err(|e| Error::StepFailed {
            t: state.curr.t,
            source: Box::new(e),
        })?;
        let coeffs = crate::dln::compute_coeffs(stepper.theta, k_used, k_prev)?;
        accepted += 1;
        if step_idx % opts.record_stride.max(1) == 0 || new.t >= horizon - 1e-12 {
            let (rec, diag) = record_from(stepper, step_idx, k_used, &coeffs, &state, &new, &stats);
            records.push(rec);
            diags.push(diag);
        }
        state.prev = std::mem::replace(&mut state.curr, new);
        if snaps.due(state.curr.t) {
            snapshots.push(state.curr.clone());
        }
        step_idx += 1;
    }
    Ok(RunResult {
        state,
        records,
        diags,
        accepted_steps: accepted,
        snapshots,
    })
}

/// Adaptive driver: Crank-Nicolson bootstrap at k0, then DLN steps sized by
/// the minimum-dissipation controller.
pub fn run_adaptive(
    stepper: &mut Stepper,
    level0: LevelFields,
    ctrl: &ControllerConfig,
    opts: &RunOptions,
) -> Result<RunResult> {
    ctrl.validate()?;
    let horizon = opts.horizon;
    let t0 = level0.t;
    let mut snaps = SnapshotQueue::new(opts.snapshot_times.clone(), horizon);
    let mut snapshots = Vec::new();
    if snaps.due(t0) {
        snapshots.push(level0.clone());
    }

    let strict = stepper.cfg.strict_step_retry;
    let k0 = ctrl.k0.min(horizon - t0);
    let (level1, k0_used, stats) =
        attempt_with_retry(strict, k0, ctrl.k_min, |kk| stepper.cn_bootstrap(&level0, kk))?;
    let state0 = FieldState {
        prev: level0.clone(),
        curr: level0,
    };
    let cn_coeffs = crate::dln::compute_coeffs(1.0, k0_used, k0_used)?;
    let (rec, diag) = record_from(stepper, 0, k0_used, &cn_coeffs, &state0, &level1, &stats);
    let mut k_next = next_step(rec.chi_u, rec.chi_phi, k0_used, ctrl);
    let mut records = vec![rec];
    let mut diags = vec![diag];
    let mut state = FieldState {
        prev: state0.curr,
        curr: level1,
    };
    if snaps.due(state.curr.t) {
        snapshots.push(state.curr.clone());
    }

    let mut accepted = 1usize;
    let mut step_idx = 1usize;
    while state.curr.t < horizon - 1e-12 * horizon.max(1.0) {
        let clamped = k_next >= horizon - state.curr.t;
        let k_n = k_next.min(horizon - state.curr.t);
        let k_prev = state.k_prev();
        let (new, k_used, stats) = attempt_with_retry(strict, k_n, ctrl.k_min, |kk| {
            stepper.dln_step(&state, kk, k_prev)
        })
        .map_err(|e| Error::StepFailed {
            t: state.curr.t,
            source: Box::new(e),
        })?;
        let coeffs = crate::dln::compute_coeffs(stepper.theta, k_used, k_prev)?;
        debug_assert!(coeffs.eps > -1.0 && coeffs.eps < 1.0);
        accepted += 1;
        let (rec, diag) = record_from(stepper, step_idx, k_used, &coeffs, &state, &new, &stats);
        k_next = next_step(
            rec.chi_u,
            rec.chi_phi,
            if clamped { k_next } else { k_used },
            ctrl,
        );
        records.push(rec);
        diags.push(diag);
        state.prev = std::mem::replace(&mut state.curr, new);
        if snaps.due(state.curr.t) {
            snapshots.push(state.curr.clone());
        }
        step_idx += 1;
    }
    Ok(RunResult {
        state,
        records,
        diags,
        accepted_steps: accepted,
        snapshots,
    })
}

/// Run one attempt, optionally retrying a Newton failure at half the step
/// down to `k_floor` (strict mode only; the published controller never
/// rejects a step).
fn attempt_with_retry(
    strict: bool,
    k_n: f64,
    k_floor: f64,
    mut attempt: impl FnMut(f64) -> Result<(LevelFields, StepStats)>,
) -> Result<(LevelFields, f64, StepStats)> {
    let mut k = k_n;
    loop {
        match attempt(k) {
            Ok((level, stats)) => return Ok((level, k, stats)),
            Err(Error::NonConvergence { .. }) if strict && 0.5 * k >= k_floor => {
                k *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}
