//! Modified Newton iteration with cached LU factorizations.
//!
//! The Jacobian is mass-dominated for small steps, so a factorization from an
//! earlier iterate (or an earlier step with the same step-size pair) usually
//! contracts fine; the loop only reassembles and refactors when a line search
//! stalls or the contraction rate degrades. Factorizations are cached per
//! (θ, k_n, k_prev) key, which pays off both on constant-step runs and on the
//! controller's alternating step pairs.

use super::system::StepCtx;
use super::{norm2, Stepper};
use crate::dln::DlnCoeffs;
use crate::fem::{bicgstab, LinearSolver, PatternFactor};
use crate::solver::FieldState;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct NewtonStats {
    pub iters: usize,
    pub refactorizations: usize,
    pub residual: f64,
}

pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub stats: NewtonStats,
}

const LINE_SEARCH_HALVINGS: usize = 10;
const ACCEPT_FACTOR: f64 = 0.99;
/// Refresh the factorization only when the stale-Jacobian contraction is so
/// slow that iterating would cost more than a refactorization (~35 extra
/// triangular solves at the scales this crate targets).
const PROACTIVE_RATE: f64 = 0.75;
const MAX_REFRESH_PER_STEP: usize = 8;

impl Stepper {
    pub(super) fn newton_solve(
        &mut self,
        state: &FieldState,
        coeffs: &DlnCoeffs,
        x0: Vec<f64>,
        key: (u64, u64, u64),
        has_forcing: bool,
    ) -> Result<SolveOutcome> {
        let mut x = x0;
        let mut r = Vec::new();
        let mut stats = NewtonStats::default();

        let ctx_residual = |sys: &mut super::system::StepSystem,
                            ops: &super::Operators,
                            params: &crate::model::PhysParams,
                            fbuf: &super::ForcingBuffers,
                            freeze: bool,
                            xv: &[f64],
                            out: &mut Vec<f64>| {
            let ctx = StepCtx {
                params,
                coeffs,
                state,
                fbuf,
                has_forcing,
                freeze_secant: freeze,
            };
            sys.residual(ops, &ctx, xv, out);
        };

        let freeze = self.cfg.freeze_potential_secant;
        ctx_residual(
            &mut self.system,
            &self.ops,
            &self.params,
            &self.fbuf,
            freeze,
            &x,
            &mut r,
        );
        let mut rn = norm2(&r);
        let tol = self.cfg.newton_tol_abs + self.cfg.newton_tol_rel * rn;
        stats.residual = rn;
        if rn <= tol {
            return Ok(SolveOutcome { x, stats });
        }

        let mut since_refresh: Option<usize> = None;
        let mut dx = vec![0.0; x.len()];
        let mut x_try = vec![0.0; x.len()];
        let mut r_try = Vec::new();

        for it in 1..=self.cfg.newton_max_iter {
            self.ensure_factor(state, coeffs, &x, key, has_forcing, &mut stats, false)?;
            if since_refresh.is_none() && stats.refactorizations > 0 && it == 1 {
                since_refresh = Some(0);
            }

            // dx = -J^{-1} r
            for (d, v) in dx.iter_mut().zip(&r) {
                *d = -v;
            }
            self.solve_with_factor(key, &mut dx)?;

            let mut lambda = 1.0;
            let mut accepted = false;
            let mut rt = rn;
            for _ in 0..LINE_SEARCH_HALVINGS {
                for i in 0..x.len() {
                    x_try[i] = x[i] + lambda * dx[i];
                }
                ctx_residual(
                    &mut self.system,
                    &self.ops,
                    &self.params,
                    &self.fbuf,
                    freeze,
                    &x_try,
                    &mut r_try,
                );
                rt = norm2(&r_try);
                if rt <= tol || rt < ACCEPT_FACTOR * rn {
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }

            if !accepted {
                if since_refresh != Some(0) && stats.refactorizations < MAX_REFRESH_PER_STEP {
                    self.ensure_factor(state, coeffs, &x, key, has_forcing, &mut stats, true)?;
                    since_refresh = Some(0);
                    continue;
                }
                return Err(Error::NonConvergence {
                    iters: it,
                    residual: rn,
                });
            }

            let rate = rt / rn;
            std::mem::swap(&mut x, &mut x_try);
            std::mem::swap(&mut r, &mut r_try);
            rn = rt;
            stats.iters = it;
            stats.residual = rn;
            if rn <= tol {
                return Ok(SolveOutcome { x, stats });
            }
            since_refresh = since_refresh.map(|k| k + 1);
            if rate > PROACTIVE_RATE
                && since_refresh != Some(0)
                && stats.refactorizations < MAX_REFRESH_PER_STEP
            {
                self.ensure_factor(state, coeffs, &x, key, has_forcing, &mut stats, true)?;
                since_refresh = Some(0);
            } else if since_refresh == Some(0) {
                since_refresh = Some(1);
            }
        }
        Err(Error::NonConvergence {
            iters: self.cfg.newton_max_iter,
            residual: rn,
        })
    }

    /// Make sure a linear engine for `key` exists; `force` reassembles at the
    /// current iterate and replaces the cached one.
    fn ensure_factor(
        &mut self,
        state: &FieldState,
        coeffs: &DlnCoeffs,
        x: &[f64],
        key: (u64, u64, u64),
        has_forcing: bool,
        stats: &mut NewtonStats,
        force: bool,
    ) -> Result<()> {
        self.clock += 1;
        let clock = self.clock;

        if matches!(self.cfg.linear, LinearSolver::BiCgStab { .. }) {
            // Iterative fallback: keep one CSR Jacobian, no cross-step cache.
            if self.iter_csr.is_some() && !force {
                return Ok(());
            }
            let ctx = StepCtx {
                params: &self.params,
                coeffs,
                state,
                fbuf: &self.fbuf,
                has_forcing,
                freeze_secant: self.cfg.freeze_potential_secant,
            };
            self.iter_csr = Some(self.system.jacobian_csr(&ctx, x));
            stats.refactorizations += 1;
            return Ok(());
        }

        if let Some(slot) = self.factors.iter_mut().find(|f| f.key == key) {
            slot.last_used = clock;
            if !force {
                return Ok(());
            }
        }

        // Drop the factor being replaced (or the LRU evictee) before building
        // the new one: at the large scales a factor is most of the memory
        // budget and holding two at once can OOM the process.
        let cap = self.cache_capacity();
        if let Some(pos) = self.factors.iter().position(|f| f.key == key) {
            self.factors.swap_remove(pos);
        } else if self.factors.len() >= cap {
            let (idx, _) = self
                .factors
                .iter()
                .enumerate()
                .min_by_key(|(_, f)| f.last_used)
                .expect("non-empty cache");
            self.factors.swap_remove(idx);
        }

        let ctx = StepCtx {
            params: &self.params,
            coeffs,
            state,
            fbuf: &self.fbuf,
            has_forcing,
            freeze_secant: self.cfg.freeze_potential_secant,
        };
        // Assemble numeric values on the fixed pattern.
        let mut vals = std::mem::take(&mut self.jac_vals);
        self.system.jacobian_values(&ctx, x, &mut vals);

        let n = self.system.layout.total;
        let factor = match &self.symbolic {
            Some(sym) => PatternFactor::refactor_with(
                sym.clone(),
                n,
                &self.system.col_ptr,
                &self.system.row_idx,
                &vals,
            )?,
            None => {
                let (sym, f) =
                    PatternFactor::new(n, &self.system.col_ptr, &self.system.row_idx, &vals)?;
                self.symbolic = Some(sym);
                f
            }
        };
        self.jac_vals = vals;
        stats.refactorizations += 1;

        self.factors.push(super::CachedFactor {
            key,
            factor,
            last_used: clock,
        });
        Ok(())
    }

    fn solve_with_factor(&mut self, key: (u64, u64, u64), rhs: &mut [f64]) -> Result<()> {
        match self.cfg.linear {
            LinearSolver::Direct => {
                let slot = self
                    .factors
                    .iter()
                    .find(|f| f.key == key)
                    .ok_or_else(|| Error::LinearSolve("factor cache miss".into()))?;
                slot.factor.solve_in_place(rhs);
                Ok(())
            }
            LinearSolver::BiCgStab { tol, max_iter } => {
                let a = self
                    .iter_csr
                    .as_ref()
                    .ok_or_else(|| Error::LinearSolve("iterative engine missing".into()))?;
                let x = bicgstab(a, rhs, None, tol, max_iter)?;
                rhs.copy_from_slice(&x);
                Ok(())
            }
        }
    }
}
