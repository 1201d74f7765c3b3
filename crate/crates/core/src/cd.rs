//! Cyclic coordinate descent at a fixed tuning parameter.
//!
//! Each coordinate is updated by the exact scalar minimizer of a quadratic model plus the
//! penalty. For Gaussian loss the model is exact and a residual is kept up to date; for other
//! losses the model is re-expanded around the current iterate once per sweep.

use nalgebra::DVector;
use thiserror::Error;

use crate::model::{axpy, dot, ActivePartition, GlmProblem, Loss, ModelError};
use crate::penalty::{PenaltySpec, ScalarQuadratic};

/// Columns whose curvature falls below this are skipped.
pub const DEGENERATE_CURVATURE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CdError {
    #[error("separation detected during coordinate descent at rho = {rho}")]
    Separation { rho: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Convergence threshold on the largest coordinate change over a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CdResult {
    pub beta: DVector<f64>,
    pub part: ActivePartition,
    /// Penalized objective at `beta`.
    pub objective: f64,
    pub sweeps: usize,
    /// False when the sweep budget ran out; `beta` is then the last iterate.
    pub converged: bool,
    /// Coordinates skipped because their curvature was degenerate.
    pub skipped: Vec<usize>,
}

/// `f(beta) + sum_{j in S} P(|beta_j|, rho)`.
pub fn penalized_objective(prob: &GlmProblem, spec: &PenaltySpec, rho: f64, beta: &DVector<f64>) -> f64 {
    let eta = prob.linear_predictor(beta);
    prob.loss_at(&eta) + penalty_sum(prob, spec, rho, beta)
}

pub(crate) fn penalty_sum(prob: &GlmProblem, spec: &PenaltySpec, rho: f64, beta: &DVector<f64>) -> f64 {
    (0..prob.p())
        .filter(|&j| prob.is_penalized(j))
        .map(|j| spec.value(beta[j].abs(), rho))
        .sum()
}

/// Minimizes the penalized objective at fixed `rho` starting from `beta_init`.
pub fn cd_solve(
    prob: &GlmProblem,
    spec: &PenaltySpec,
    rho: f64,
    beta_init: &DVector<f64>,
    opts: &CdOptions,
) -> Result<CdResult, CdError> {
    if beta_init.len() != prob.p() {
        return Err(ModelError::CoefLength {
            got: beta_init.len(),
            expected: prob.p(),
        }
        .into());
    }
    if beta_init.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite.into());
    }
    let mut solver = Sweeper::new(prob, spec, rho, beta_init.clone());
    let all: Vec<usize> = (0..prob.p()).collect();
    let mut sweeps = 0;
    let mut converged = false;
    'outer: while sweeps < opts.max_sweeps {
        let change = solver.sweep(&all)?;
        sweeps += 1;
        if change <= opts.tol {
            converged = true;
            break;
        }
        // cycle over the current active coordinates until they settle, then re-check everything
        loop {
            if sweeps >= opts.max_sweeps {
                break 'outer;
            }
            let active: Vec<usize> = (0..prob.p())
                .filter(|&j| !prob.is_penalized(j) || solver.beta[j] != 0.0)
                .collect();
            let change = solver.sweep(&active)?;
            sweeps += 1;
            if change <= opts.tol {
                break;
            }
        }
    }
    if !converged {
        log::warn!("coordinate descent hit the sweep limit at rho = {rho}");
    }
    let objective = penalized_objective(prob, spec, rho, &solver.beta);
    let part = ActivePartition::from_beta(prob, &solver.beta);
    let mut skipped: Vec<usize> = solver.skipped.into_iter().collect();
    skipped.sort_unstable();
    Ok(CdResult {
        beta: solver.beta,
        part,
        objective,
        sweeps,
        converged,
        skipped,
    })
}

struct Sweeper<'a> {
    prob: &'a GlmProblem,
    spec: &'a PenaltySpec,
    rho: f64,
    beta: DVector<f64>,
    /// Gaussian: `y - X beta` and the fixed column norms.
    resid: Vec<f64>,
    col_sq: Vec<f64>,
    skipped: std::collections::BTreeSet<usize>,
}

impl<'a> Sweeper<'a> {
    fn new(prob: &'a GlmProblem, spec: &'a PenaltySpec, rho: f64, beta: DVector<f64>) -> Self {
        let (resid, col_sq) = if prob.loss() == Loss::Gaussian {
            let eta = prob.linear_predictor(&beta);
            let r: Vec<f64> = prob.response().iter().zip(eta.iter()).map(|(y, e)| y - e).collect();
            let sq = (0..prob.p()).map(|j| dot(prob.column(j), prob.column(j))).collect();
            (r, sq)
        } else {
            (Vec::new(), Vec::new())
        };
        Sweeper {
            prob,
            spec,
            rho,
            beta,
            resid,
            col_sq,
            skipped: Default::default(),
        }
    }

    fn update(&self, j: usize, a: f64, b: f64) -> f64 {
        if self.prob.is_penalized(j) {
            self.spec.threshold(ScalarQuadratic { a, b }, self.rho)
        } else {
            b
        }
    }

    /// One pass over `idx`; returns the largest coordinate change.
    fn sweep(&mut self, idx: &[usize]) -> Result<f64, CdError> {
        if self.prob.loss() == Loss::Gaussian {
            Ok(self.sweep_gaussian(idx))
        } else {
            self.sweep_glm(idx)
        }
    }

    fn sweep_gaussian(&mut self, idx: &[usize]) -> f64 {
        let mut max_change: f64 = 0.0;
        for &j in idx {
            let a = self.col_sq[j];
            if a <= DEGENERATE_CURVATURE {
                self.skipped.insert(j);
                continue;
            }
            let xj = self.prob.column(j);
            let old = self.beta[j];
            let b = old + dot(xj, &self.resid) / a;
            let new = self.update(j, a, b);
            let delta = new - old;
            if delta != 0.0 {
                axpy(-delta, xj, &mut self.resid);
                self.beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    fn sweep_glm(&mut self, idx: &[usize]) -> Result<f64, CdError> {
        let prob = self.prob;
        let beta0 = self.beta.clone();
        let eta0 = prob.linear_predictor(&beta0);
        let w = prob.weights(&eta0);
        // s = (mu - y) + W X (beta - beta0): gradient of the quadratic model is X' s
        let mut s: Vec<f64> = prob.working_residual(&eta0).iter().copied().collect();
        let mut d = vec![0.0; prob.n()];
        let mut wx = vec![0.0; prob.n()];
        for &j in idx {
            let xj = prob.column(j);
            for i in 0..wx.len() {
                wx[i] = w[i] * xj[i];
            }
            let a = dot(xj, &wx);
            if a <= DEGENERATE_CURVATURE {
                self.skipped.insert(j);
                continue;
            }
            let old = self.beta[j];
            let b = old - dot(xj, &s) / a;
            let new = self.update(j, a, b);
            let delta = new - old;
            if delta != 0.0 {
                axpy(delta, &wx, &mut s);
                axpy(delta, xj, &mut d);
                self.beta[j] = new;
            }
        }
        let h0 = prob.loss_at(&eta0) + penalty_sum(prob, self.spec, self.rho, &beta0);
        let dir = &self.beta - &beta0;
        let dvec = DVector::from_vec(d);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta0 + &dir * t;
            let eta = &eta0 + &dvec * t;
            let h = prob.loss_at(&eta) + penalty_sum(prob, self.spec, self.rho, &cand);
            if h <= h0 + 1e-12 * h0.abs().max(1.0) {
                self.beta = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            self.beta = beta0.clone();
            return Ok(0.0);
        }
        if prob.detect_separation(&self.beta) {
            return Err(CdError::Separation { rho: self.rho });
        }
        Ok((&self.beta - &beta0).amax())
    }
}
