//! Path following in decreasing `rho`.
//!
//! Between events the active coefficients solve the ODE
//!
//! ```text
//!     d beta_A / d rho = -H_A^{-1} u_A,
//!     u_j = d2P/(dt drho)(|beta_j|, rho) sgn(beta_j)   (0 for unpenalized j),
//! ```
//!
//! integrated with an embedded Runge–Kutta pair and corrected back onto the stationarity
//! manifold by Newton steps. After every accepted step the solver looks for
//!
//! 1. an active penalized coefficient crossing zero,
//! 2. an inactive coefficient whose subgradient coefficient reaches +-1,
//! 3. an inactive coefficient whose scalar thresholding problem has a nonzero minimizer
//!    (a jump), or an active one whose scalar minimizer moves to another branch,
//! 4. a singular restricted Hessian,
//!
//! locates the first one by bisection on the dense output, and either updates the active set
//! (1, 2) or re-solves by coordinate descent (3, 4).

use std::fmt;

use nalgebra::DVector;
use thiserror::Error;

use crate::cd::{cd_solve, penalized_objective, CdError, CdOptions};
use crate::linalg;
use crate::model::{ActivePartition, GlmProblem, Loss, ModelError};
use crate::ode::{dopri_step, step_factor, Step};
use crate::penalty::{PenaltySpec, ScalarQuadratic};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("the unpenalized fit does not exist (separation among unpenalized columns)")]
    SeparationAtInit,
    #[error("the unpenalized columns are collinear")]
    SingularUnpenalized,
    #[error("restricted Hessian is singular at rho = {rho}")]
    SingularHessian { rho: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cd(#[from] CdError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOptions {
    /// Relative tolerance of the Runge–Kutta error control.
    pub rtol: f64,
    pub atol: f64,
    /// Absolute lower end of the path; defaults to `rho_min_ratio * rho_max`.
    pub rho_min: Option<f64>,
    pub rho_min_ratio: f64,
    /// Stop once this many penalized coefficients are nonzero.
    pub max_predictors: Option<usize>,
    /// Coordinate-descent moves larger than this are reported as jumps.
    pub jump_tol: f64,
    /// Relative width to which event locations are bisected.
    pub event_rtol: f64,
    /// Largest step as a fraction of `rho_max`; keeps the path densely sampled.
    pub max_step_frac: f64,
    pub max_steps: usize,
    pub cd: CdOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            rtol: 1e-6,
            atol: 1e-9,
            rho_min: None,
            rho_min_ratio: 1e-4,
            max_predictors: None,
            jump_tol: 1e-6,
            event_rtol: 1e-8,
            max_step_frac: 0.02,
            max_steps: 200_000,
            cd: CdOptions::default(),
        }
    }
}

/// Coefficients stored by index; absent entries are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCoefs {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseCoefs {
    pub fn from_dense(beta: &DVector<f64>, keep: &[usize]) -> Self {
        let mut idx: Vec<usize> = keep.to_vec();
        idx.sort_unstable();
        let val = idx.iter().map(|&j| beta[j]).collect();
        SparseCoefs { idx, val }
    }

    pub fn to_dense(&self, p: usize) -> DVector<f64> {
        let mut b = DVector::zeros(p);
        for (&j, &v) in self.idx.iter().zip(&self.val) {
            b[j] = v;
        }
        b
    }

    pub fn get(&self, j: usize) -> f64 {
        match self.idx.binary_search(&j) {
            Ok(k) => self.val[k],
            Err(_) => 0.0,
        }
    }
}

/// One point of the solution path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub rho: f64,
    pub coefs: SparseCoefs,
    pub part: ActivePartition,
}

impl PathState {
    pub fn beta(&self, p: usize) -> DVector<f64> {
        self.coefs.to_dense(p)
    }

    fn new(rho: f64, beta: &DVector<f64>, part: &ActivePartition) -> Self {
        PathState {
            rho,
            coefs: SparseCoefs::from_dense(beta, &part.active()),
            part: part.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Deactivate(usize),
    Activate(usize),
    Jump,
    HessianSingular,
    Separation,
    RankLimit,
    MaxPredictors,
    StepFailure,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Deactivate(_) => "deactivate",
            EventKind::Activate(_) => "activate",
            EventKind::Jump => "jump",
            EventKind::HessianSingular => "singular",
            EventKind::Separation => "separation",
            EventKind::RankLimit => "rank",
            EventKind::MaxPredictors => "max_predictors",
            EventKind::StepFailure => "step_failure",
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            EventKind::Deactivate(j) | EventKind::Activate(j) => Some(*j),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEvent {
    pub kind: EventKind,
    pub rho: f64,
    pub detail: String,
}

/// Why path following stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// No penalized coefficients or nothing to follow.
    Trivial,
    RhoMin,
    Separation,
    RankLimit,
    MaxPredictors,
    StepFailure,
    MaxSteps,
}

impl Termination {
    pub fn name(&self) -> &'static str {
        match self {
            Termination::Trivial => "trivial",
            Termination::RhoMin => "rho_min",
            Termination::Separation => "separation",
            Termination::RankLimit => "rank",
            Termination::MaxPredictors => "max_predictors",
            Termination::StepFailure => "step_failure",
            Termination::MaxSteps => "max_steps",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub samples: Vec<PathState>,
    pub events: Vec<PathEvent>,
    pub spec: PenaltySpec,
    pub loss: Loss,
    pub p: usize,
    pub rho_max: f64,
    /// Penalized coordinate that enters first.
    pub j_star: Option<usize>,
    pub termination: Termination,
}

impl SolutionPath {
    pub fn jumps(&self) -> impl Iterator<Item = &PathEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Jump)
    }
}

/// Starting point of the path.
#[derive(Debug, Clone)]
pub struct PathStart {
    pub state: PathState,
    pub rho_max: f64,
    pub j_star: Option<usize>,
}

/// Fits the unpenalized coefficients with penalized ones held at zero and finds `rho_max`.
///
/// `rho_max` is infinite for penalties with zero slope at the origin.
pub fn init_path(prob: &GlmProblem, spec: &PenaltySpec) -> Result<PathStart, PathError> {
    let beta = unpenalized_fit(prob)?;
    let part = ActivePartition::from_beta(prob, &beta);
    let eta = prob.linear_predictor(&beta);
    let r = prob.working_residual(&eta);
    let w = prob.weights(&eta);
    let mut rho_max: f64 = 0.0;
    let mut j_star = None;
    for j in prob.penalized_indices() {
        let a = weighted_sq(prob, j, &w);
        if a <= crate::cd::DEGENERATE_CURVATURE {
            continue;
        }
        let g = prob.col_dot(j, r.as_slice());
        let e = spec.entry_rho(ScalarQuadratic { a, b: -g / a });
        if e > rho_max {
            rho_max = e;
            j_star = Some(j);
        }
    }
    Ok(PathStart {
        state: PathState::new(rho_max, &beta, &part),
        rho_max,
        j_star,
    })
}

fn weighted_sq(prob: &GlmProblem, j: usize, w: &DVector<f64>) -> f64 {
    prob.column(j)
        .iter()
        .zip(w.iter())
        .map(|(x, w)| w * x * x)
        .sum()
}

/// Newton fit of the unpenalized coordinates.
fn unpenalized_fit(prob: &GlmProblem) -> Result<DVector<f64>, PathError> {
    let idx = prob.unpenalized_indices();
    let mut beta = DVector::zeros(prob.p());
    if idx.is_empty() {
        return Ok(beta);
    }
    let scale = 1.0 + prob.response().amax() * (prob.n() as f64);
    for _ in 0..200 {
        let eta = prob.linear_predictor(&beta);
        let r = prob.working_residual(&eta);
        let g = DVector::from_iterator(idx.len(), idx.iter().map(|&j| prob.col_dot(j, r.as_slice())));
        if g.amax() <= 1e-10 * scale {
            return Ok(beta);
        }
        if prob.detect_separation(&beta) {
            return Err(PathError::SeparationAtInit);
        }
        let h = prob.weighted_gram(&prob.weights(&eta), &idx);
        let Some(chol) = linalg::cholesky(&h) else {
            return Err(if prob.loss() == Loss::Gaussian || h.amax() > 0.0 && beta.amax() < 10.0 {
                PathError::SingularUnpenalized
            } else {
                PathError::SeparationAtInit
            });
        };
        let step = chol.solve(&g);
        let f0 = prob.loss_at(&eta);
        let mut t = 1.0;
        loop {
            let mut cand = beta.clone();
            for (k, &j) in idx.iter().enumerate() {
                cand[j] -= t * step[k];
            }
            let f1 = prob.loss_at(&prob.linear_predictor(&cand));
            if f1 <= f0 + 1e-12 * f0.abs().max(1.0) || t < 1e-10 {
                beta = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let g = prob.loss_gradient(&beta)?;
    if idx.iter().all(|&j| g[j].abs() <= 1e-6 * scale) {
        Ok(beta)
    } else {
        Err(PathError::SeparationAtInit)
    }
}

/// Largest violation of the first-order conditions at `beta`.
///
/// Active penalized coordinates contribute `|grad_j f + P'(|beta_j|) sgn(beta_j)|`, unpenalized
/// ones `|grad_j f|`, and zero penalized ones `max(0, |grad_j f| - P'(0))`.
pub fn stationarity_residual(prob: &GlmProblem, spec: &PenaltySpec, rho: f64, beta: &DVector<f64>) -> f64 {
    let eta = prob.linear_predictor(beta);
    let g = prob.gradient_from_residual(&prob.working_residual(&eta));
    let mut worst: f64 = 0.0;
    for j in 0..prob.p() {
        let v = if !prob.is_penalized(j) {
            g[j].abs()
        } else if beta[j] != 0.0 {
            (g[j] + spec.d1(beta[j].abs(), rho) * beta[j].signum()).abs()
        } else {
            (g[j].abs() - spec.slope_at_zero(rho)).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

pub fn state_stationarity(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> f64 {
    stationarity_residual(prob, spec, state.rho, &state.beta(prob.p()))
}

/// `omega_j` and the jump indicator for an inactive penalized coordinate.
///
/// `omega_j = -grad_j f / P'(0, rho)`, reported as `+inf` when the slope at zero vanishes and as 0
/// when it is infinite.
pub fn event_activation_check(
    prob: &GlmProblem,
    spec: &PenaltySpec,
    state: &PathState,
    j: usize,
) -> (f64, bool) {
    let beta = state.beta(prob.p());
    let eta = prob.linear_predictor(&beta);
    let r = prob.working_residual(&eta);
    let w = prob.weights(&eta);
    let g = prob.col_dot(j, r.as_slice());
    let a = weighted_sq(prob, j, &w);
    let omega = omega_of(spec, state.rho, g);
    let jumps = a > crate::cd::DEGENERATE_CURVATURE
        && spec.threshold(ScalarQuadratic { a, b: -g / a }, state.rho) != 0.0;
    (omega, jumps)
}

fn omega_of(spec: &PenaltySpec, rho: f64, g: f64) -> f64 {
    let s0 = spec.slope_at_zero(rho);
    if s0 == 0.0 {
        if g == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        -g / s0
    }
}

/// Subgradient coefficients of the zero penalized coordinates.
pub fn omega(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> Vec<(usize, f64)> {
    let beta = state.beta(prob.p());
    let eta = prob.linear_predictor(&beta);
    let r = prob.working_residual(&eta);
    state
        .part
        .zero(prob)
        .into_iter()
        .map(|j| (j, omega_of(spec, state.rho, prob.col_dot(j, r.as_slice()))))
        .collect()
}

/// `d beta_A / d rho` at a path state, in the order of [`ActivePartition::active`].
pub fn path_derivative(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> Result<DVector<f64>, PathError> {
    let beta = state.beta(prob.p());
    let h = prob.restricted_hessian(&beta, &state.part, spec, state.rho);
    let tol = linalg::singularity_tol(&h);
    if !linalg::is_positive_definite(&h, tol) {
        return Err(PathError::SingularHessian { rho: state.rho });
    }
    let chol = linalg::cholesky(&h).ok_or(PathError::SingularHessian { rho: state.rho })?;
    let off = state.part.unpenalized.len();
    let mut u = DVector::zeros(state.part.len());
    for (k, &j) in state.part.nonzero.iter().enumerate() {
        u[off + k] = spec.d2_trho(beta[j].abs(), state.rho) * beta[j].signum();
    }
    Ok(-chol.solve(&u))
}

/// Traces the solution path from `rho_max` down to the first stopping condition.
pub fn follow_path(prob: &GlmProblem, spec: &PenaltySpec, opts: &PathOptions) -> Result<SolutionPath, PathError> {
    let start = init_path(prob, spec)?;
    let mut tracer = Tracer::new(prob, spec, opts, &start);
    let termination = tracer.run(start)?;
    Ok(SolutionPath {
        samples: tracer.samples,
        events: tracer.events,
        spec: *spec,
        loss: prob.loss(),
        p: prob.p(),
        rho_max: tracer.rho_max,
        j_star: tracer.j_star,
        termination,
    })
}

/// Threshold for an active coordinate's scalar minimizer to count as a branch switch.
const SWITCH_TOL: f64 = 1e-4;
const STALL_LIMIT: usize = 5;

/// Event indicators at one state.
#[derive(Debug, Default, Clone)]
struct Flags {
    deactivate: Vec<usize>,
    enter: Vec<usize>,
    switch: Vec<usize>,
    singular: bool,
}

impl Flags {
    fn any(&self) -> bool {
        !self.deactivate.is_empty() || !self.enter.is_empty() || !self.switch.is_empty() || self.singular
    }
}

/// Active coordinates of one segment with their fixed signs.
struct Segment {
    idx: Vec<usize>,
    /// 0 for unpenalized coordinates, +-1 for nonzero penalized ones.
    sign: Vec<f64>,
    /// `X_A' X_A` for Gaussian loss.
    gram: Option<nalgebra::DMatrix<f64>>,
}

struct Tracer<'a> {
    prob: &'a GlmProblem,
    spec: &'a PenaltySpec,
    opts: &'a PathOptions,
    rho: f64,
    beta: DVector<f64>,
    part: ActivePartition,
    samples: Vec<PathState>,
    events: Vec<PathEvent>,
    rho_max: f64,
    rho_min: f64,
    j_star: Option<usize>,
    rank: usize,
    col_sq: Option<Vec<f64>>,
    convex: bool,
    /// Stationarity residual accepted for a Newton-corrected sample.
    res_tol: f64,
}

impl<'a> Tracer<'a> {
    fn new(prob: &'a GlmProblem, spec: &'a PenaltySpec, opts: &'a PathOptions, start: &PathStart) -> Self {
        let col_sq = (prob.loss() == Loss::Gaussian)
            .then(|| (0..prob.p()).map(|j| crate::model::dot(prob.column(j), prob.column(j))).collect());
        Tracer {
            prob,
            spec,
            opts,
            rho: start.rho_max,
            beta: start.state.beta(prob.p()),
            part: start.state.part.clone(),
            samples: Vec::new(),
            events: Vec::new(),
            rho_max: start.rho_max,
            rho_min: 0.0,
            j_star: start.j_star,
            rank: 0,
            col_sq,
            convex: spec.is_convex(),
            res_tol: 1e-8 * (1.0 + prob.gradient_from_residual(&prob.working_residual(&DVector::zeros(prob.n()))).amax()),
        }
    }

    fn push_sample(&mut self) {
        if let Some(last) = self.samples.last() {
            if !(self.rho < last.rho) {
                // keep the later state at an unchanged rho
                self.samples.pop();
            }
        }
        self.samples.push(PathState::new(self.rho, &self.beta, &self.part));
    }

    /// Emits a group of events spread strictly inside `(rho_lo, rho_hi)`.
    fn emit(&mut self, group: Vec<(EventKind, String)>, rho_hi: f64, rho_lo: f64) {
        let k = group.len();
        for (i, (kind, detail)) in group.into_iter().enumerate() {
            let mut rho = rho_hi - (i + 1) as f64 / (k + 1) as f64 * (rho_hi - rho_lo);
            if let Some(prev) = self.events.last() {
                if !(rho < prev.rho) {
                    rho = prev.rho.next_down();
                }
            }
            self.events.push(PathEvent { kind, rho, detail });
        }
    }

    fn run(&mut self, start: PathStart) -> Result<Termination, PathError> {
        let prob = self.prob;
        if prob.penalized_indices().is_empty() || start.rho_max == 0.0 {
            self.rho = start.rho_max;
            self.push_sample();
            return Ok(Termination::Trivial);
        }
        self.rank = linalg::numerical_rank(prob.design());
        if !start.rho_max.is_finite() {
            // every coefficient is nonzero at any finite rho: start from a heavily shrunk fit
            let eta = prob.linear_predictor(&self.beta);
            let g = prob.gradient_from_residual(&prob.working_residual(&eta));
            self.rho_max = 1e3 * g.amax().max(1.0);
            self.rho = self.rho_max;
            let cd = cd_solve(prob, self.spec, self.rho, &self.beta, &self.opts.cd)?;
            self.beta = cd.beta;
            self.part = cd.part;
            self.polish();
        }
        self.rho_min = self.opts.rho_min.unwrap_or(self.opts.rho_min_ratio * self.rho_max);
        self.push_sample();
        let max_step = self.opts.max_step_frac * self.rho_max;
        let mut h = max_step;
        let mut stalls = 0usize;
        let mut steps = 0usize;

        loop {
            if let Some(t) = self.terminal_check(self.rho, self.rho) {
                return Ok(t);
            }
            if self.rho <= self.rho_min {
                return Ok(Termination::RhoMin);
            }
            steps += 1;
            if steps > self.opts.max_steps {
                return Ok(Termination::MaxSteps);
            }
            let seg = self.segment();
            let y0 = DVector::from_iterator(seg.idx.len(), seg.idx.iter().map(|&j| self.beta[j]));
            let rho0 = self.rho;
            let Some(k1) = self.rhs(&seg, rho0, &y0) else {
                match self.recover_singular(rho0, &mut stalls)? {
                    Some(t) => return Ok(t),
                    None => continue,
                }
            };
            h = h.min(max_step);
            let mut clipped;
            let step = loop {
                let mut hh = h;
                clipped = rho0 - hh <= self.rho_min;
                if clipped {
                    hh = rho0 - self.rho_min;
                }
                if hh < 1e-14 * rho0.max(self.rho_min) {
                    break None;
                }
                let mut f = |t: f64, y: &DVector<f64>| self.rhs(&seg, t, y);
                match dopri_step(&mut f, rho0, &y0, &k1, -hh, self.opts.rtol, self.opts.atol) {
                    Some(s) if s.err <= 1.0 => {
                        h = hh * step_factor(s.err);
                        break Some(s);
                    }
                    Some(s) => h = hh * step_factor(s.err).min(0.9),
                    None => h = hh * 0.25,
                }
            };
            let Some(step) = step else {
                match self.recover_singular(rho0, &mut stalls)? {
                    Some(t) => return Ok(t),
                    None => continue,
                }
            };
            // a step clipped to the end of the path lands on it exactly, not an ulp away
            let rho1 = if clipped { self.rho_min } else { step.t1() };
            let y1 = self.newton(&seg, rho1, step.y1.clone());
            let beta1 = self.scatter(&seg, &y1);
            let flags = self.flags(rho1, &beta1, &self.part, None);
            if !flags.any() {
                self.rho = rho1;
                self.beta = beta1;
                self.push_sample();
                stalls = 0;
                continue;
            }
            // locate the first event inside the step
            let cand = flags;
            let (mut rho_hi, mut rho_lo) = self.bisect(&seg, &step, &cand, false, rho0, rho1);
            let mut y_lo = self.newton(&seg, rho_lo, step.dense(rho_lo));
            let mut beta_lo = self.scatter(&seg, &y_lo);
            let mut flags_lo = self.flags(rho_lo, &beta_lo, &self.part, None);
            if !flags_lo.any() {
                // the interpolant and the corrected path disagree near the event
                (rho_hi, rho_lo) = self.bisect(&seg, &step, &cand, true, rho_lo, rho1);
                y_lo = self.newton(&seg, rho_lo, step.dense(rho_lo));
                beta_lo = self.scatter(&seg, &y_lo);
                flags_lo = self.flags(rho_lo, &beta_lo, &self.part, None);
            }
            if rho_hi < rho0 {
                // the dense output may be poor right at a non-smooth point; keep the sample only
                // when it corrects cleanly
                let y_hi = self.newton(&seg, rho_hi, step.dense(rho_hi));
                let (_, g_hi) = self.system(&seg, rho_hi, &y_hi);
                let beta_hi = self.scatter(&seg, &y_hi);
                // a coefficient within rounding of zero sits on the event itself
                let floor = 1e-9 * (1.0 + beta_hi.amax());
                let clear = self.part.nonzero.iter().all(|&j| beta_hi[j].abs() > floor);
                if clear && g_hi.amax() <= self.res_tol && !self.flags(rho_hi, &beta_hi, &self.part, None).any() {
                    self.beta = beta_hi;
                    self.rho = rho_hi;
                    self.push_sample();
                }
            }
            self.beta = beta_lo;
            self.rho = rho_lo;
            if !flags_lo.any() {
                self.push_sample();
                continue;
            }
            if rho0 - rho_lo <= 10.0 * self.opts.event_rtol * rho0 {
                stalls += 1;
            } else {
                stalls = 0;
            }
            if stalls > STALL_LIMIT {
                // no progress: step past the troublesome point and re-solve there
                self.rho = rho_lo * (1.0 - 1e-6);
                let cd = cd_solve(prob, self.spec, self.rho, &self.beta, &self.opts.cd)?;
                self.beta = cd.beta;
                self.part = cd.part;
                self.polish();
                self.emit(vec![(EventKind::Jump, "stall recovery by coordinate descent".into())], rho_lo, self.rho);
                self.push_sample();
                stalls = 0;
                continue;
            }
            let group = self.process(flags_lo, rho_lo)?;
            let term = self.terminal_check_events(rho_lo);
            let mut group = group;
            if let Some((kind, detail, _)) = &term {
                group.push((*kind, detail.clone()));
            }
            self.emit(group, rho_hi, rho_lo);
            self.push_sample();
            if let Some((_, _, t)) = term {
                return Ok(t);
            }
        }
    }

    /// Handles a state where the ODE cannot be advanced because `H_A` is singular.
    fn recover_singular(&mut self, rho0: f64, stalls: &mut usize) -> Result<Option<Termination>, PathError> {
        *stalls += 1;
        if *stalls > 3 * STALL_LIMIT {
            self.emit(
                vec![(EventKind::StepFailure, "step size underflow".into())],
                rho0,
                rho0 * (1.0 - 1e-12),
            );
            return Ok(Some(Termination::StepFailure));
        }
        let rho_hi = rho0;
        let factor = if *stalls > STALL_LIMIT { 1e-6 } else { 1e-9 };
        let rho_lo = rho0 * (1.0 - factor);
        let mut group = vec![(EventKind::HessianSingular, format!("active set size {}", self.part.len()))];
        let pre = self.beta.clone();
        let cd = cd_solve(self.prob, self.spec, rho_lo, &pre, &self.opts.cd)?;
        let moved = (&cd.beta - &pre).amax();
        if moved > self.opts.jump_tol {
            group.push((EventKind::Jump, jump_detail(&self.part, &cd.part, moved)));
        }
        self.beta = cd.beta;
        self.part = cd.part;
        self.rho = rho_lo;
        self.polish();
        let term = self.terminal_check_events(rho_lo);
        if let Some((kind, detail, _)) = &term {
            group.push((*kind, detail.clone()));
        }
        self.emit(group, rho_hi, rho_lo);
        self.push_sample();
        Ok(term.map(|t| t.2))
    }

    fn terminal_check(&mut self, rho_hi: f64, rho_lo: f64) -> Option<Termination> {
        let t = self.terminal_check_events(rho_lo)?;
        self.emit(vec![(t.0, t.1)], rho_hi.next_up(), rho_lo);
        Some(t.2)
    }

    fn terminal_check_events(&self, rho: f64) -> Option<(EventKind, String, Termination)> {
        if self.prob.loss() != Loss::Gaussian && self.prob.detect_separation(&self.beta) {
            return Some((
                EventKind::Separation,
                format!("linear predictor exceeds {} at rho = {rho}", crate::model::SEPARATION_ETA),
                Termination::Separation,
            ));
        }
        if self.part.len() > self.rank {
            return Some((
                EventKind::RankLimit,
                format!("{} active coefficients exceed rank {}", self.part.len(), self.rank),
                Termination::RankLimit,
            ));
        }
        if let Some(m) = self.opts.max_predictors {
            if self.part.nonzero.len() >= m {
                return Some((
                    EventKind::MaxPredictors,
                    format!("{} penalized predictors selected", self.part.nonzero.len()),
                    Termination::MaxPredictors,
                ));
            }
        }
        None
    }

    fn segment(&self) -> Segment {
        let idx = self.part.active();
        let sign = idx
            .iter()
            .map(|&j| if self.prob.is_penalized(j) { self.beta[j].signum() } else { 0.0 })
            .collect();
        let gram = (self.prob.loss() == Loss::Gaussian)
            .then(|| self.prob.weighted_gram(&DVector::from_element(self.prob.n(), 1.0), &idx));
        Segment { idx, sign, gram }
    }

    /// Newton-corrects the current state on its own active set.
    fn polish(&mut self) {
        if self.part.is_empty() {
            return;
        }
        let seg = self.segment();
        let y = DVector::from_iterator(seg.idx.len(), seg.idx.iter().map(|&j| self.beta[j]));
        let y = self.newton(&seg, self.rho, y);
        self.beta = self.scatter(&seg, &y);
    }

    fn scatter(&self, seg: &Segment, y: &DVector<f64>) -> DVector<f64> {
        let mut b = self.beta.clone();
        for (k, &j) in seg.idx.iter().enumerate() {
            b[j] = y[k];
        }
        b
    }

    /// Restricted Hessian and stationarity residual vector of the segment at `(rho, y)`.
    fn system(&self, seg: &Segment, rho: f64, y: &DVector<f64>) -> (nalgebra::DMatrix<f64>, DVector<f64>) {
        let prob = self.prob;
        let eta = prob.linear_predictor_on(&seg.idx, y.as_slice());
        let r = prob.working_residual(&eta);
        let mut h = match &seg.gram {
            Some(g) => g.clone(),
            None => prob.weighted_gram(&prob.weights(&eta), &seg.idx),
        };
        let mut g = DVector::zeros(seg.idx.len());
        for (k, &j) in seg.idx.iter().enumerate() {
            g[k] = prob.col_dot(j, r.as_slice());
            if seg.sign[k] != 0.0 {
                let t = y[k].abs();
                h[(k, k)] += self.spec.d2_tt(t, rho);
                g[k] += self.spec.d1(t, rho) * seg.sign[k];
            }
        }
        (h, g)
    }

    fn rhs(&self, seg: &Segment, rho: f64, y: &DVector<f64>) -> Option<DVector<f64>> {
        if seg.idx.is_empty() {
            return Some(DVector::zeros(0));
        }
        let (h, _) = self.system(seg, rho, y);
        let chol = linalg::cholesky(&h)?;
        let mut u = DVector::zeros(seg.idx.len());
        for k in 0..seg.idx.len() {
            if seg.sign[k] != 0.0 {
                u[k] = self.spec.d2_trho(y[k].abs(), rho) * seg.sign[k];
            }
        }
        let d = -chol.solve(&u);
        d.iter().all(|v| v.is_finite()).then_some(d)
    }

    /// Newton correction onto the stationarity conditions of the segment at fixed `rho`.
    fn newton(&self, seg: &Segment, rho: f64, mut y: DVector<f64>) -> DVector<f64> {
        if seg.idx.is_empty() {
            return y;
        }
        let (mut h, mut g) = self.system(seg, rho, &y);
        let mut res = g.amax();
        for _ in 0..8 {
            if !(res > 1e-13 * (1.0 + rho)) {
                break;
            }
            let Some(chol) = linalg::cholesky(&h) else { break };
            let dy = chol.solve(&g);
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-3 {
                let cand = &y - &dy * t;
                let signs_ok = (0..seg.idx.len()).all(|k| seg.sign[k] == 0.0 || cand[k] * seg.sign[k] > 0.0);
                if signs_ok {
                    let (h1, g1) = self.system(seg, rho, &cand);
                    let r1 = g1.amax();
                    if r1 < res {
                        y = cand;
                        h = h1;
                        g = g1;
                        res = r1;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        y
    }

    fn curvature(&self, j: usize, w: &DVector<f64>) -> f64 {
        match &self.col_sq {
            Some(c) => c[j],
            None => weighted_sq(self.prob, j, w),
        }
    }

    /// Whether moving coordinate `j` from `from` to `to` lowers the objective. The scalar quadratic
    /// model is exact for Gaussian loss; otherwise its verdict near a tie can disagree with the
    /// objective, and a move that coordinate descent would refuse must not be flagged.
    fn improves(&self, j: usize, to: f64, rho: f64, beta: &DVector<f64>, part: &ActivePartition, eta: &DVector<f64>) -> bool {
        if self.col_sq.is_some() {
            return true;
        }
        let from = if part.nonzero.contains(&j) { beta[j] } else { 0.0 };
        if self.scalar_gain(j, from, to, rho, eta) {
            return true;
        }
        // the other coordinates may need to adapt before the move pays off
        let mut start = DVector::zeros(self.prob.p());
        for k in part.active() {
            start[k] = beta[k];
        }
        let f0 = penalized_objective(self.prob, self.spec, rho, &start);
        start[j] = to;
        match cd_solve(self.prob, self.spec, rho, &start, &self.opts.cd) {
            Ok(cd) => cd.objective < f0 - 1e-12 * (1.0 + f0.abs()),
            Err(_) => true,
        }
    }

    fn scalar_gain(&self, j: usize, from: f64, to: f64, rho: f64, eta: &DVector<f64>) -> bool {
        let prob = self.prob;
        if self.col_sq.is_some() {
            return true;
        }
        let loss = prob.loss();
        let (x, y) = (prob.column(j), prob.response());
        let objective = |t: f64| {
            let f: f64 = (0..x.len()).map(|i| loss.unit_loss(eta[i] + (t - from) * x[i], y[i])).sum();
            f + self.spec.value(t.abs(), rho)
        };
        let f0 = objective(from);
        // the candidate comes from curvature at `from`; re-linearize at the candidate a few times
        let (mut t, mut best) = (to, objective(to));
        for _ in 0..20 {
            let (mut g, mut a) = (0.0, 0.0);
            for i in 0..x.len() {
                let e = eta[i] + (t - from) * x[i];
                g += x[i] * (loss.mean(e) - y[i]);
                a += loss.weight(e) * x[i] * x[i];
            }
            if a <= crate::cd::DEGENERATE_CURVATURE {
                break;
            }
            let next = self.spec.threshold(ScalarQuadratic { a, b: t - g / a }, rho);
            if next == 0.0 || next == t {
                break;
            }
            let f = objective(next);
            if !(f < best) {
                break;
            }
            let small = (next - t).abs() <= 1e-12 * (1.0 + t.abs());
            (t, best) = (next, f);
            if small {
                break;
            }
        }
        best < f0 - 1e-12 * (1.0 + f0.abs())
    }

    /// Evaluates the event indicators; `only` restricts them to the candidates of an earlier evaluation.
    fn flags(&self, rho: f64, beta: &DVector<f64>, part: &ActivePartition, only: Option<&Flags>) -> Flags {
        let prob = self.prob;
        let spec = self.spec;
        let mut out = Flags::default();
        let eta = prob.linear_predictor_on(&part.active(), &part.active().iter().map(|&j| beta[j]).collect::<Vec<_>>());
        let r = prob.working_residual(&eta);
        let w = if self.col_sq.is_some() { DVector::zeros(0) } else { prob.weights(&eta) };
        let nonzero: Vec<usize> = match only {
            Some(f) => {
                let mut v = f.deactivate.clone();
                v.extend_from_slice(&f.switch);
                v.sort_unstable();
                v.dedup();
                v
            }
            None => part.nonzero.clone(),
        };
        let signs = self.segment_signs();
        for &j in &nonzero {
            let s = signs.get(&j).copied().unwrap_or(beta[j].signum());
            if beta[j] * s <= 0.0 {
                out.deactivate.push(j);
                continue;
            }
            if !self.convex {
                let a = self.curvature(j, &w);
                if a > crate::cd::DEGENERATE_CURVATURE {
                    let g = prob.col_dot(j, r.as_slice());
                    let t = spec.threshold(ScalarQuadratic { a, b: beta[j] - g / a }, rho);
                    if (t - beta[j]).abs() > SWITCH_TOL * (1.0 + beta[j].abs())
                        && self.improves(j, t, rho, beta, part, &eta)
                    {
                        out.switch.push(j);
                    }
                }
            }
        }
        let zeros: Vec<usize> = match only {
            Some(f) => f.enter.clone(),
            None => part.zero(prob),
        };
        for j in zeros {
            let a = self.curvature(j, &w);
            if a <= crate::cd::DEGENERATE_CURVATURE {
                continue;
            }
            let g = prob.col_dot(j, r.as_slice());
            let t = spec.threshold(ScalarQuadratic { a, b: -g / a }, rho);
            // past the slope at zero the entry is a first-order gain; only jumps out of a local
            // minimum at zero need the objective check
            let kkt = g.abs() > spec.slope_at_zero(rho);
            if t != 0.0 && (self.convex || kkt || self.improves(j, t, rho, beta, part, &eta)) {
                out.enter.push(j);
            }
        }
        if only.is_none_or(|f| f.singular) && !part.is_empty() {
            let h = prob.restricted_hessian(beta, part, spec, rho);
            out.singular = !linalg::is_positive_definite(&h, linalg::singularity_tol(&h));
        }
        out
    }

    fn segment_signs(&self) -> std::collections::HashMap<usize, f64> {
        self.part.nonzero.iter().map(|&j| (j, self.beta[j].signum())).collect()
    }

    /// Shrinks `[rho_lo, rho_hi]` around the first event within the step.
    /// With `corrected` the indicators are evaluated on Newton-corrected interpolants.
    fn bisect(&self, seg: &Segment, step: &Step, cand: &Flags, corrected: bool, mut hi: f64, mut lo: f64) -> (f64, f64) {
        while hi - lo > self.opts.event_rtol * hi {
            let mid = 0.5 * (hi + lo);
            if mid >= hi || mid <= lo {
                break;
            }
            let mut y = step.dense(mid);
            if corrected {
                y = self.newton(seg, mid, y);
            }
            let b = self.scatter(seg, &y);
            if self.flags(mid, &b, &self.part, Some(cand)).any() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (hi, lo)
    }

    /// Applies set updates for zero crossings and continuous entries; anything else goes to
    /// coordinate descent. Returns the events produced.
    fn process(&mut self, first: Flags, rho: f64) -> Result<Vec<(EventKind, String)>, PathError> {
        let prob = self.prob;
        let spec = self.spec;
        let mut group = Vec::new();
        let mut flags = first;
        for round in 0.. {
            if !flags.any() {
                break;
            }
            let pre = self.beta.clone();
            // coordinate descent starts with jumping coordinates moved to their scalar minimizers
            let mut start = pre.clone();
            let mut need_cd = !flags.switch.is_empty() || flags.singular || round >= STALL_LIMIT;
            if !flags.switch.is_empty() {
                let eta = prob.linear_predictor(&self.beta);
                let r = prob.working_residual(&eta);
                let w = prob.weights(&eta);
                for &k in &flags.switch {
                    let a = self.curvature(k, &w);
                    let b = pre[k] - prob.col_dot(k, r.as_slice()) / a;
                    start[k] = spec.threshold(ScalarQuadratic { a, b }, rho);
                }
            }
            for &j in &flags.deactivate {
                self.part.nonzero.retain(|&k| k != j);
                self.beta[j] = 0.0;
                group.push((EventKind::Deactivate(j), format!("coefficient {j} reached zero")));
            }
            if !flags.enter.is_empty() {
                let eta = prob.linear_predictor(&self.beta);
                let r = prob.working_residual(&eta);
                let w = prob.weights(&eta);
                let s0 = spec.slope_at_zero(rho);
                for &j in &flags.enter {
                    let a = self.curvature(j, &w);
                    let g = prob.col_dot(j, r.as_slice());
                    let b = -g / a;
                    let t = spec.threshold(ScalarQuadratic { a, b }, rho);
                    let om = omega_of(spec, rho, g);
                    let continuous = t != 0.0
                        && (s0 == 0.0 || ((om.abs() - 1.0).abs() <= 1e-6 && t.abs() <= 1e-4 * b.abs()));
                    if continuous {
                        self.beta[j] = t;
                        self.part.nonzero.push(j);
                        group.push((EventKind::Activate(j), format!("omega = {om:.6}")));
                    } else {
                        start[j] = t;
                        need_cd = true;
                    }
                }
                self.part.nonzero.sort_unstable();
            }
            if flags.singular {
                group.push((EventKind::HessianSingular, format!("active set size {}", self.part.len())));
            }
            if need_cd {
                let cd = cd_solve(prob, spec, rho, &start, &self.opts.cd)?;
                let moved = (&cd.beta - &pre).amax();
                if moved > self.opts.jump_tol {
                    let before = ActivePartition::from_beta(prob, &pre);
                    group.push((EventKind::Jump, jump_detail(&before, &cd.part, moved)));
                }
                self.beta = cd.beta;
                self.part = cd.part;
            }
            self.rho = rho;
            self.polish();
            if self.part.len() > self.rank {
                break;
            }
            flags = self.flags(rho, &self.beta, &self.part.clone(), None);
            if round > 2 * STALL_LIMIT {
                break;
            }
        }
        Ok(group)
    }
}

fn jump_detail(before: &ActivePartition, after: &ActivePartition, moved: f64) -> String {
    let entered: Vec<usize> = after.nonzero.iter().filter(|j| !before.nonzero.contains(j)).copied().collect();
    let left: Vec<usize> = before.nonzero.iter().filter(|j| !after.nonzero.contains(j)).copied().collect();
    format!("entered {entered:?}, left {left:?}, max change {moved:.3e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cd::penalized_objective;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn orthogonal_problem(n: usize, p: usize, seed: u64) -> (GlmProblem, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = raw.qr().q();
        let scales: Vec<f64> = (0..p).map(|j| 0.5 + 0.25 * j as f64).collect();
        let x = DMatrix::from_fn(n, p, |i, j| q[(i, j)] * scales[j]);
        let beta = DVector::from_fn(p, |j, _| [3.0, -2.0, 1.5, 0.8, -0.5, 0.3, 0.0, 0.0][j % 8]);
        let y = &x * &beta + DVector::from_fn(n, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        let a: Vec<f64> = (0..p).map(|j| scales[j] * scales[j]).collect();
        let b: Vec<f64> = (0..p).map(|j| x.column(j).dot(&y) / a[j]).collect();
        (GlmProblem::all_penalized(x, y, Loss::Gaussian).unwrap(), a, b)
    }

    fn all_specs() -> Vec<PenaltySpec> {
        vec![
            PenaltySpec::power(0.5).unwrap(),
            PenaltySpec::power(1.0).unwrap(),
            PenaltySpec::power(1.5).unwrap(),
            PenaltySpec::elastic_net(1.5).unwrap(),
            PenaltySpec::log(0.5).unwrap(),
            PenaltySpec::log(2.0).unwrap(),
            PenaltySpec::continuous_log(),
            PenaltySpec::scad(3.7).unwrap(),
            PenaltySpec::mcplus(2.0).unwrap(),
        ]
    }

    #[test]
    fn orthogonal_design_matches_thresholding() {
        let (prob, a, b) = orthogonal_problem(30, 6, 1);
        for spec in all_specs() {
            let path = follow_path(&prob, &spec, &PathOptions::default()).unwrap();
            assert!(path.samples.len() > 20, "{spec}");
            for s in &path.samples {
                for j in 0..6 {
                    let oracle = spec.threshold(ScalarQuadratic { a: a[j], b: b[j] }, s.rho);
                    let got = s.coefs.get(j);
                    assert!((got - oracle).abs() <= 1e-5, "{spec} rho={} j={j}: {got} vs {oracle}", s.rho);
                }
            }
        }
    }

    #[test]
    fn lasso_rho_max_and_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 40;
        let x = DMatrix::from_fn(n, 5, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) });
        let y = DVector::from_fn(n, |i, _| 1.0 + x[(i, 1)] + rng.sample::<f64, _>(StandardNormal));
        let prob = GlmProblem::new(x.clone(), y.clone(), Loss::Gaussian, vec![false, true, true, true, true]).unwrap();
        let start = init_path(&prob, &PenaltySpec::power(1.0).unwrap()).unwrap();
        let ybar = y.mean();
        assert!((start.state.coefs.get(0) - ybar).abs() < 1e-10);
        let expect = (x.transpose() * y.map(|v| v - ybar)).rows(1, 4).amax();
        assert!((start.rho_max - expect).abs() < 1e-10);
    }

    #[test]
    fn logistic_intercept_is_logit_of_mean() {
        let n = 10;
        let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(n, |i, _| f64::from(i % 3 == 0));
        let prob = GlmProblem::new(x, y.clone(), Loss::Logistic, vec![false, true]).unwrap();
        let start = init_path(&prob, &PenaltySpec::power(1.0).unwrap()).unwrap();
        let m = y.mean();
        assert!((start.state.coefs.get(0) - (m / (1.0 - m)).ln()).abs() < 1e-9);
    }

    #[test]
    fn derivative_examples() {
        let x = DMatrix::from_row_slice(2, 1, &[2.0, 0.0]);
        let prob = GlmProblem::all_penalized(x, DVector::from_vec(vec![3.0, 1.0]), Loss::Gaussian).unwrap();
        let spec = PenaltySpec::power(1.0).unwrap();
        let state = PathState {
            rho: 1.0,
            coefs: SparseCoefs { idx: vec![0], val: vec![1.25] },
            part: ActivePartition { unpenalized: vec![], nonzero: vec![0] },
        };
        let d = path_derivative(&prob, &spec, &state).unwrap();
        assert!((d[0] + 0.25).abs() < 1e-15);
        let up = GlmProblem::new(
            DMatrix::from_element(2, 1, 1.0),
            DVector::from_vec(vec![1.0, 2.0]),
            Loss::Gaussian,
            vec![false],
        )
        .unwrap();
        let state = PathState {
            rho: 1.0,
            coefs: SparseCoefs { idx: vec![0], val: vec![1.5] },
            part: ActivePartition { unpenalized: vec![0], nonzero: vec![] },
        };
        assert_eq!(path_derivative(&up, &spec, &state).unwrap()[0], 0.0);
    }

    #[test]
    fn empty_penalized_set_is_single_state() {
        let up = GlmProblem::new(
            DMatrix::from_element(3, 1, 1.0),
            DVector::from_vec(vec![1.0, 2.0, 4.0]),
            Loss::Gaussian,
            vec![false],
        )
        .unwrap();
        let path = follow_path(&up, &PenaltySpec::log(1.0).unwrap(), &PathOptions::default()).unwrap();
        assert_eq!(path.samples.len(), 1);
        assert!(path.events.is_empty());
        assert!(state_stationarity(&up, &path.spec, &path.samples[0]) <= 1e-10);
    }

    #[test]
    fn activation_check_log_interior_jump() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let prob = GlmProblem::all_penalized(x, DVector::from_element(1, 1.0), Loss::Gaussian).unwrap();
        let spec = PenaltySpec::log(0.1).unwrap();
        let state = PathState { rho: 0.15, coefs: SparseCoefs::default(), part: ActivePartition::default() };
        let (om, jumps) = event_activation_check(&prob, &spec, &state, 0);
        assert!((om - 1.0 / 1.5).abs() < 1e-12);
        assert!(jumps);
    }

    #[test]
    fn lasso_activation_omega_is_kkt_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(10, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(10, |_, _| rng.sample::<f64, _>(StandardNormal));
        let prob = GlmProblem::all_penalized(x.clone(), y.clone(), Loss::Gaussian).unwrap();
        let spec = PenaltySpec::power(1.0).unwrap();
        let state = PathState { rho: 2.0, coefs: SparseCoefs::default(), part: ActivePartition::default() };
        let om = omega(&prob, &spec, &state);
        for (j, w) in om {
            assert!((w - x.column(j).dot(&y) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_state_violates_stationarity() {
        let (prob, _, _) = orthogonal_problem(20, 4, 2);
        let spec = PenaltySpec::scad(3.7).unwrap();
        let path = follow_path(&prob, &spec, &PathOptions::default()).unwrap();
        let s = path.samples.iter().rev().find(|s| !s.part.nonzero.is_empty()).unwrap();
        assert!(state_stationarity(&prob, &spec, s) <= 1e-4);
        let mut b = s.beta(4);
        b[s.part.nonzero[0]] += 0.1;
        assert!(stationarity_residual(&prob, &spec, s.rho, &b) > 1e-4);
    }

    #[test]
    fn samples_and_events_are_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = DMatrix::from_fn(30, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(30, |i, _| x[(i, 0)] * 2.0 - x[(i, 3)] + rng.sample::<f64, _>(StandardNormal));
        let prob = GlmProblem::all_penalized(x, y, Loss::Gaussian).unwrap();
        for spec in all_specs() {
            let path = follow_path(&prob, &spec, &PathOptions::default()).unwrap();
            for w in path.samples.windows(2) {
                assert!(w[1].rho < w[0].rho, "{spec}");
            }
            for w in path.events.windows(2) {
                assert!(w[1].rho < w[0].rho, "{spec}");
            }
            for e in &path.events {
                let after = path.samples.iter().position(|s| s.rho <= e.rho);
                if let Some(k) = after {
                    assert!(k > 0, "{spec}: event before first sample");
                }
            }
            for s in &path.samples {
                let r = state_stationarity(&prob, &spec, s);
                assert!(r <= 1e-4, "{spec} rho={} residual {r}", s.rho);
            }
        }
    }

    #[test]
    fn directional_derivatives_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DMatrix::from_fn(25, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(25, |i, _| x[(i, 1)] * 1.5 + rng.sample::<f64, _>(StandardNormal));
        let prob = GlmProblem::all_penalized(x, y, Loss::Gaussian).unwrap();
        for spec in all_specs() {
            let path = follow_path(&prob, &spec, &PathOptions::default()).unwrap();
            for s in path.samples.iter().step_by(7) {
                let b = s.beta(6);
                let f0 = penalized_objective(&prob, &spec, s.rho, &b);
                for _ in 0..50 {
                    let v = DVector::from_fn(6, |_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
                    let h = 1e-6;
                    let f1 = penalized_objective(&prob, &spec, s.rho, &(&b + &v * h));
                    assert!((f1 - f0) / h >= -1e-4, "{spec} rho={}", s.rho);
                }
            }
        }
    }
}
