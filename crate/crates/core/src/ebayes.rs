//! Empirical Bayes model selection along solution paths.
//!
//! The log penalty corresponds to a generalized double Pareto prior
//! `pi(b) = (rho - 1) eta^(rho - 1) / 2 (|b| + eta)^(-rho)` and the power family to the exponential
//! power prior `pi(b) = eta rho^(1/eta) / (2 Gamma(1/eta)) exp(-rho |b|^eta)`. The criterion at a
//! path state is a Laplace approximation of `-ln p(y | A)`:
//!
//! ```text
//!     EB = prior term + h(beta) + 1/2 log det H
//! ```
//!
//! where `h` is the loss plus the penalty over the active coefficients and `H` its Hessian. The
//! prior acts on the `q` nonzero penalized coefficients; unpenalized coefficients are plugged in at
//! their fitted values, so `H` is the block of the restricted Hessian for the nonzero penalized
//! coordinates. With Gaussian loss the noise variance is profiled out.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::linalg;
use crate::model::{GlmProblem, Loss};
use crate::path::{PathState, SolutionPath};
use crate::penalty::{Family, PenaltySpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EbError {
    #[error("no proper-prior criterion for the {0} penalty; pass an AIC or BIC override")]
    UnsupportedPenalty(Family),
    #[error("every scored state is inadmissible")]
    AllInadmissible,
    #[error("no paths to select from")]
    NoPaths,
}

/// Why a score is flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbFlag {
    /// The log-penalty prior is improper for `rho <= 1` (or `rho / sigma^2 <= 1`).
    RhoOutOfRange,
    SingularHessian,
    /// Negative curvature from a concave penalty makes the Laplace approximation invalid.
    IndefiniteHessian,
    /// The profiled variance sits at an end of its search interval.
    NonInteriorSigma,
    /// Zero residual and penalty; the profiled variance is zero.
    PerfectFit,
}

impl EbFlag {
    pub fn name(&self) -> &'static str {
        match self {
            EbFlag::RhoOutOfRange => "rho_out_of_range",
            EbFlag::SingularHessian => "singular_hessian",
            EbFlag::IndefiniteHessian => "indefinite_hessian",
            EbFlag::NonInteriorSigma => "non_interior_sigma",
            EbFlag::PerfectFit => "perfect_fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbScore {
    pub rho: f64,
    pub eta: f64,
    pub q: usize,
    /// `prior_term + fit_term + logdet_term`, or `+inf` for an inadmissible state.
    pub criterion: f64,
    pub prior_term: f64,
    /// `h(beta)` for the GLM forms; the variance-dependent part for the linear forms.
    pub fit_term: f64,
    pub logdet_term: f64,
    pub sigma2: Option<f64>,
    pub flag: Option<EbFlag>,
}

impl EbScore {
    pub fn is_admissible(&self) -> bool {
        self.criterion.is_finite()
    }

    fn inadmissible(rho: f64, eta: f64, q: usize, flag: EbFlag) -> Self {
        EbScore {
            rho,
            eta,
            q,
            criterion: f64::INFINITY,
            prior_term: f64::NAN,
            fit_term: f64::NAN,
            logdet_term: f64::NAN,
            sigma2: None,
            flag: Some(flag),
        }
    }

    fn assemble(rho: f64, eta: f64, q: usize, prior: f64, fit: f64, logdet: f64) -> Self {
        EbScore {
            rho,
            eta,
            q,
            criterion: prior + fit + logdet,
            prior_term: prior,
            fit_term: fit,
            logdet_term: logdet,
            sigma2: None,
            flag: None,
        }
    }
}

/// Selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Empirical Bayes; the linear form with profiled variance for Gaussian loss.
    Eb,
    /// Empirical Bayes in the GLM form, treating the Gaussian variance as 1.
    EbGlm,
    /// Plug-in AIC, `2 nll + 2 q`; not a Bayesian criterion.
    Aic,
    /// Plug-in BIC, `2 nll + q ln n`; not a Bayesian criterion.
    Bic,
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Eb => "eb",
            Criterion::EbGlm => "eb_glm",
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        }
    }

    pub fn parse(s: &str) -> Option<Criterion> {
        match s.to_ascii_lowercase().as_str() {
            "eb" => Some(Criterion::Eb),
            "eb_glm" => Some(Criterion::EbGlm),
            "aic" => Some(Criterion::Aic),
            "bic" => Some(Criterion::Bic),
            _ => None,
        }
    }
}

/// Pieces shared by all criteria at one state.
struct Fit {
    q: usize,
    loss: f64,
    penalty: f64,
    /// Hessian block of the nonzero penalized coordinates.
    h_pen: DMatrix<f64>,
}

fn fit_parts(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> Fit {
    let beta = state.beta(prob.p());
    let eta = prob.linear_predictor(&beta);
    let loss = prob.loss_at(&eta);
    let penalty = state
        .part
        .nonzero
        .iter()
        .map(|&j| spec.value(beta[j].abs(), state.rho))
        .sum();
    let h = prob.restricted_hessian(&beta, &state.part, spec, state.rho);
    let off = state.part.unpenalized.len();
    let q = state.part.nonzero.len();
    let h_pen = h.view((off, off), (q, q)).into_owned();
    Fit { q, loss, penalty, h_pen }
}

/// `1/2 log det` of the penalized Hessian block, or the reason it is unusable.
fn half_logdet(h: &DMatrix<f64>) -> Result<f64, EbFlag> {
    if h.nrows() == 0 {
        return Ok(0.0);
    }
    if !linalg::is_positive_definite(h, linalg::singularity_tol(h)) {
        return Err(if linalg::min_eigenvalue(h) < -linalg::singularity_tol(h) {
            EbFlag::IndefiniteHessian
        } else {
            EbFlag::SingularHessian
        });
    }
    let chol = linalg::cholesky(h).ok_or(EbFlag::SingularHessian)?;
    Ok(0.5 * linalg::log_det(&chol))
}

/// `ln` of the power-family prior constant `sqrt(pi) eta rho^(1/eta) / (sqrt(2) Gamma(1/eta))`.
fn power_log_const(rho: f64, eta: f64) -> f64 {
    0.5 * (PI / 2.0).ln() + eta.ln() + rho.ln() / eta - ln_gamma(1.0 / eta)
}

/// Prior normalization term `-q ln(sqrt(pi/2) (rho - 1) eta^(rho - 1))` of the log-penalty criterion.
pub fn log_prior_term(q: usize, rho: f64, eta: f64) -> f64 {
    if q == 0 {
        return 0.0;
    }
    -(q as f64) * (0.5 * (PI / 2.0).ln() + (rho - 1.0).ln() + (rho - 1.0) * eta.ln())
}

/// Prior normalization term `-q ln(sqrt(pi) eta rho^(1/eta) / (sqrt(2) Gamma(1/eta)))` of the
/// power-family criterion.
pub fn power_prior_term(q: usize, rho: f64, eta: f64) -> f64 {
    if q == 0 {
        return 0.0;
    }
    -(q as f64) * power_log_const(rho, eta)
}

/// Criterion for the log penalty with a general loss.
pub fn eb_log_glm(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> EbScore {
    let eta = log_eta(spec, state.rho);
    let rho = state.rho;
    let fit = fit_parts(prob, spec, state);
    if !(rho > 1.0) {
        return EbScore::inadmissible(rho, eta, fit.q, EbFlag::RhoOutOfRange);
    }
    let logdet = match half_logdet(&fit.h_pen) {
        Ok(v) => v,
        Err(flag) => return EbScore::inadmissible(rho, eta, fit.q, flag),
    };
    let prior = log_prior_term(fit.q, rho, eta);
    EbScore::assemble(rho, eta, fit.q, prior, fit.loss + fit.penalty, logdet)
}

fn log_eta(spec: &PenaltySpec, rho: f64) -> f64 {
    match spec.family() {
        Family::ContinuousLog => rho.sqrt(),
        _ => spec.eta(),
    }
}

/// Negative log marginal of the Gaussian log-penalty model at variance `s2`, split into the prior
/// term and the variance-dependent fit term.
fn log_linear_terms(n: f64, q: f64, rho: f64, eta: f64, h: f64, s2: f64) -> (f64, f64) {
    let r = rho / s2;
    let prior = if q == 0.0 {
        0.0
    } else {
        q * 2f64.ln() - q * (r - 1.0) * eta.ln() - q * (r - 1.0).ln()
    };
    let fit = 0.5 * (n - q) * (2.0 * PI * s2).ln() + h / s2;
    (prior, fit)
}

/// Criterion for the log penalty with Gaussian loss and the noise variance profiled out.
pub fn eb_log_linear(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> EbScore {
    let eta = log_eta(spec, state.rho);
    let rho = state.rho;
    let fit = fit_parts(prob, spec, state);
    let (n, q) = (prob.n() as f64, fit.q as f64);
    let h = fit.loss + fit.penalty;
    let logdet = match half_logdet(&fit.h_pen) {
        Ok(v) => v,
        Err(flag) => return EbScore::inadmissible(rho, eta, fit.q, flag),
    };
    if fit.q > 0 && !(rho > SIGMA2_MIN) {
        return EbScore::inadmissible(rho, eta, fit.q, EbFlag::RhoOutOfRange);
    }
    // the prior is proper only while rho / sigma^2 > 1
    let hi = if fit.q > 0 { SIGMA2_MAX.min(rho * (1.0 - 1e-12)) } else { SIGMA2_MAX };
    let objective = |s2: f64| {
        let (p, f) = log_linear_terms(n, q, rho, eta, h, s2);
        p + f
    };
    let (s2, at_end) = golden_section_log(objective, SIGMA2_MIN, hi);
    let (prior, fit_term) = log_linear_terms(n, q, rho, eta, h, s2);
    let mut score = EbScore::assemble(rho, eta, fit.q, prior, fit_term, logdet);
    score.sigma2 = Some(s2);
    if !score.criterion.is_finite() {
        return EbScore::inadmissible(rho, eta, fit.q, EbFlag::RhoOutOfRange);
    }
    if at_end {
        score.flag = Some(EbFlag::NonInteriorSigma);
    }
    score
}

pub const SIGMA2_MIN: f64 = 1e-8;
pub const SIGMA2_MAX: f64 = 1e8;

/// Golden-section search over `ln x` on `[lo, hi]`; returns the minimizer and whether it lies at
/// an end of the interval.
pub fn golden_section_log(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, bool) {
    let g = |u: f64| {
        let v = f(u.exp());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    if !(b > a) {
        return (lo, true);
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    // 1e-10 relative in x is about 1e-10 absolute in ln x
    while b - a > 1e-11 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
        }
    }
    let u = 0.5 * (a + b);
    let (l, h) = (lo.ln(), hi.ln());
    let at_end = (u - l) < 1e-6 * (h - l).max(1.0) || (h - u) < 1e-6 * (h - l).max(1.0);
    (u.exp(), at_end)
}

/// Criterion for the power family with a general loss.
pub fn eb_power_glm(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> EbScore {
    let (rho, eta) = (state.rho, spec.eta());
    let fit = fit_parts(prob, spec, state);
    let logdet = match half_logdet(&fit.h_pen) {
        Ok(v) => v,
        Err(flag) => return EbScore::inadmissible(rho, eta, fit.q, flag),
    };
    let prior = power_prior_term(fit.q, rho, eta);
    EbScore::assemble(rho, eta, fit.q, prior, fit.loss + fit.penalty, logdet)
}

/// Criterion for the power family with Gaussian loss, using the closed-form profiled variance
/// `h / ((n - q)/2 + q/eta)`. The constant `n ln(2 pi) / 2` is omitted.
pub fn eb_power_linear(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState) -> EbScore {
    let (rho, eta) = (state.rho, spec.eta());
    let fit = fit_parts(prob, spec, state);
    let (n, q) = (prob.n() as f64, fit.q as f64);
    let h = fit.loss + fit.penalty;
    let c = (n - q) / 2.0 + q / eta;
    if !(h > 0.0) || !(c > 0.0) {
        return EbScore::inadmissible(rho, eta, fit.q, EbFlag::PerfectFit);
    }
    let logdet = match half_logdet(&fit.h_pen) {
        Ok(v) => v,
        Err(flag) => return EbScore::inadmissible(rho, eta, fit.q, flag),
    };
    let s2 = h / c;
    let prior = power_prior_term(fit.q, rho, eta);
    let mut score = EbScore::assemble(rho, eta, fit.q, prior, c * (1.0 + s2.ln()), logdet);
    score.sigma2 = Some(s2);
    score
}

/// Plug-in information criterion; `q` counts every active coefficient.
fn info_criterion(prob: &GlmProblem, spec: &PenaltySpec, state: &PathState, per_param: f64) -> EbScore {
    let beta = state.beta(prob.p());
    let loss = prob.loss_at(&prob.linear_predictor(&beta));
    let n = prob.n() as f64;
    let k = state.part.len();
    let (nll, sigma2) = if prob.loss() == Loss::Gaussian {
        let s2 = 2.0 * loss / n;
        if !(s2 > 0.0) {
            return EbScore::inadmissible(state.rho, spec.eta(), k, EbFlag::PerfectFit);
        }
        (0.5 * n * ((2.0 * PI * s2).ln() + 1.0), Some(s2))
    } else {
        (loss, None)
    };
    let mut score = EbScore::assemble(state.rho, spec.eta(), k, per_param * k as f64, 2.0 * nll, 0.0);
    score.sigma2 = sigma2;
    score
}

/// Scores one state under `criterion`.
pub fn score_state(
    prob: &GlmProblem,
    spec: &PenaltySpec,
    state: &PathState,
    criterion: Criterion,
) -> Result<EbScore, EbError> {
    let linear = prob.loss() == Loss::Gaussian && criterion == Criterion::Eb;
    match (criterion, spec.family()) {
        (Criterion::Aic, _) => Ok(info_criterion(prob, spec, state, 2.0)),
        (Criterion::Bic, _) => Ok(info_criterion(prob, spec, state, (prob.n() as f64).ln())),
        (_, Family::Log | Family::ContinuousLog) if linear => Ok(eb_log_linear(prob, spec, state)),
        (_, Family::Log | Family::ContinuousLog) => Ok(eb_log_glm(prob, spec, state)),
        (_, Family::Power) if linear => Ok(eb_power_linear(prob, spec, state)),
        (_, Family::Power) => Ok(eb_power_glm(prob, spec, state)),
        (_, family) => Err(EbError::UnsupportedPenalty(family)),
    }
}

/// Scores of every sample of every path.
pub fn score_paths(
    prob: &GlmProblem,
    paths: &[SolutionPath],
    criterion: Criterion,
) -> Result<Vec<Vec<EbScore>>, EbError> {
    paths
        .iter()
        .map(|path| {
            path.samples
                .iter()
                .map(|s| score_state(prob, &path.spec, s, criterion))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub path_index: usize,
    pub sample_index: usize,
    pub score: EbScore,
    pub state: PathState,
    pub scores: Vec<Vec<EbScore>>,
}

/// Minimizes the criterion over the samples of all paths; ties keep the earliest sample.
pub fn select_model(prob: &GlmProblem, paths: &[SolutionPath], criterion: Criterion) -> Result<Selection, EbError> {
    if paths.is_empty() {
        return Err(EbError::NoPaths);
    }
    let scores = score_paths(prob, paths, criterion)?;
    let mut best: Option<(usize, usize)> = None;
    for (pi, row) in scores.iter().enumerate() {
        for (si, s) in row.iter().enumerate() {
            if !s.is_admissible() {
                continue;
            }
            if best.is_none_or(|(bp, bs)| s.criterion < scores[bp][bs].criterion) {
                best = Some((pi, si));
            }
        }
    }
    let (pi, si) = best.ok_or(EbError::AllInadmissible)?;
    Ok(Selection {
        path_index: pi,
        sample_index: si,
        score: scores[pi][si].clone(),
        state: paths[pi].samples[si].clone(),
        scores,
    })
}
