//! Generalized linear model losses with canonical links.
//!
//! Losses are negative log-likelihoods with constant terms dropped:
//!
//! * Gaussian: `||y - X beta||^2 / 2`
//! * Logistic: `sum_i log(1 + exp(x_i' beta)) - y_i x_i' beta`
//! * Poisson: `sum_i exp(x_i' beta) - y_i x_i' beta`

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::penalty::PenaltySpec;

/// Linear predictors above this bound make the Poisson loss overflow-prone.
pub const POISSON_ETA_MAX: f64 = 700.0;
/// Linear-predictor magnitude beyond which separation is suspected.
pub const SEPARATION_ETA: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("design has {rows} rows but the response has {len} entries")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("penalized mask has length {mask} but the design has {cols} columns")]
    MaskMismatch { mask: usize, cols: usize },
    #[error("response entry {index} = {value} is invalid for the {loss} loss")]
    InvalidResponse { index: usize, value: f64, loss: Loss },
    #[error("design or response contains a non-finite value")]
    NonFinite,
    #[error("Poisson linear predictor {0} exceeds the overflow guard")]
    PoissonOverflow(f64),
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefLength { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    Gaussian,
    Logistic,
    Poisson,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Gaussian => "gaussian",
            Loss::Logistic => "logistic",
            Loss::Poisson => "poisson",
        }
    }

    pub fn parse(s: &str) -> Option<Loss> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "linear" | "normal" => Some(Loss::Gaussian),
            "logistic" | "binomial" => Some(Loss::Logistic),
            "poisson" => Some(Loss::Poisson),
            _ => None,
        }
    }

    /// Inverse canonical link.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Loss::Gaussian => eta,
            Loss::Logistic => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Loss::Poisson => eta.min(POISSON_ETA_MAX).exp(),
        }
    }

    /// Second derivative of the per-observation loss in the linear predictor.
    pub fn weight(self, eta: f64) -> f64 {
        match self {
            Loss::Gaussian => 1.0,
            Loss::Logistic => {
                let m = self.mean(eta);
                m * (1.0 - m)
            }
            Loss::Poisson => self.mean(eta),
        }
    }

    /// Per-observation loss.
    pub fn unit_loss(self, eta: f64, y: f64) -> f64 {
        match self {
            Loss::Gaussian => 0.5 * (y - eta) * (y - eta),
            Loss::Logistic => eta.max(0.0) + (-eta.abs()).exp().ln_1p() - y * eta,
            Loss::Poisson => eta.min(POISSON_ETA_MAX).exp() - y * eta,
        }
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A penalized GLM: design, response, loss and the set of penalized columns.
#[derive(Debug, Clone)]
pub struct GlmProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    loss: Loss,
    penalized: Vec<bool>,
}

/// Split of the active coefficients into unpenalized ones and nonzero penalized ones.
///
/// Penalized coefficients not listed in `nonzero` are exactly zero.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActivePartition {
    pub unpenalized: Vec<usize>,
    pub nonzero: Vec<usize>,
}

impl ActivePartition {
    /// Active indices, unpenalized first; this is the row order of restricted Hessians.
    pub fn active(&self) -> Vec<usize> {
        let mut a = self.unpenalized.clone();
        a.extend_from_slice(&self.nonzero);
        a
    }

    pub fn len(&self) -> usize {
        self.unpenalized.len() + self.nonzero.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Penalized indices currently at zero.
    pub fn zero(&self, prob: &GlmProblem) -> Vec<usize> {
        let mut nz = vec![false; prob.p()];
        for &j in &self.nonzero {
            nz[j] = true;
        }
        (0..prob.p())
            .filter(|&j| prob.is_penalized(j) && !nz[j])
            .collect()
    }

    pub fn from_beta(prob: &GlmProblem, beta: &DVector<f64>) -> Self {
        ActivePartition {
            unpenalized: prob.unpenalized_indices(),
            nonzero: (0..prob.p())
                .filter(|&j| prob.is_penalized(j) && beta[j] != 0.0)
                .collect(),
        }
    }
}

impl GlmProblem {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        loss: Loss,
        penalized: Vec<bool>,
    ) -> Result<Self, ModelError> {
        if x.nrows() != y.len() {
            return Err(ModelError::DimensionMismatch {
                rows: x.nrows(),
                len: y.len(),
            });
        }
        if penalized.len() != x.ncols() {
            return Err(ModelError::MaskMismatch {
                mask: penalized.len(),
                cols: x.ncols(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        for (i, &v) in y.iter().enumerate() {
            let ok = match loss {
                Loss::Gaussian => true,
                Loss::Logistic => v == 0.0 || v == 1.0,
                Loss::Poisson => v >= 0.0 && v.fract() == 0.0,
            };
            if !ok {
                return Err(ModelError::InvalidResponse {
                    index: i,
                    value: v,
                    loss,
                });
            }
        }
        Ok(GlmProblem {
            x,
            y,
            loss,
            penalized,
        })
    }

    /// Problem with every column penalized.
    pub fn all_penalized(x: DMatrix<f64>, y: DVector<f64>, loss: Loss) -> Result<Self, ModelError> {
        let p = x.ncols();
        Self::new(x, y, loss, vec![true; p])
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }
    pub fn p(&self) -> usize {
        self.x.ncols()
    }
    pub fn loss(&self) -> Loss {
        self.loss
    }
    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn is_penalized(&self, j: usize) -> bool {
        self.penalized[j]
    }
    pub fn penalized_mask(&self) -> &[bool] {
        &self.penalized
    }
    pub fn penalized_indices(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.penalized[j]).collect()
    }
    pub fn unpenalized_indices(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.penalized[j]).collect()
    }

    /// Column `j` of the design as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.x.as_slice()[j * n..(j + 1) * n]
    }

    /// `X beta`, skipping zero coefficients.
    pub fn linear_predictor(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut eta = DVector::zeros(self.n());
        for j in 0..self.p() {
            if beta[j] != 0.0 {
                axpy(beta[j], self.column(j), eta.as_mut_slice());
            }
        }
        eta
    }

    /// `X_A beta_A` for the listed coordinates.
    pub fn linear_predictor_on(&self, idx: &[usize], vals: &[f64]) -> DVector<f64> {
        let mut eta = DVector::zeros(self.n());
        for (&j, &v) in idx.iter().zip(vals) {
            if v != 0.0 {
                axpy(v, self.column(j), eta.as_mut_slice());
            }
        }
        eta
    }

    /// Loss from a precomputed linear predictor, with the Poisson exponent clamped.
    pub fn loss_at(&self, eta: &DVector<f64>) -> f64 {
        eta.iter()
            .zip(self.y.iter())
            .map(|(&e, &y)| self.loss.unit_loss(e, y))
            .sum()
    }

    /// Working residual `mu - y`; the gradient is `X' (mu - y)`.
    pub fn working_residual(&self, eta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            eta.iter()
                .zip(self.y.iter())
                .map(|(&e, &y)| self.loss.mean(e) - y),
        )
    }

    pub fn weights(&self, eta: &DVector<f64>) -> DVector<f64> {
        eta.map(|e| self.loss.weight(e))
    }

    /// `x_j' v`.
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        dot(self.column(j), v)
    }

    /// Full gradient from a working residual.
    pub fn gradient_from_residual(&self, r: &DVector<f64>) -> DVector<f64> {
        let r = r.as_slice();
        DVector::from_iterator(self.p(), (0..self.p()).map(|j| self.col_dot(j, r)))
    }

    /// Diagonal of `X' W X`.
    pub fn hessian_diag(&self, w: &DVector<f64>) -> DVector<f64> {
        let w = w.as_slice();
        DVector::from_iterator(
            self.p(),
            (0..self.p()).map(|j| {
                self.column(j)
                    .iter()
                    .zip(w)
                    .map(|(x, w)| w * x * x)
                    .sum::<f64>()
            }),
        )
    }

    /// `X_A' W X_A` for the listed columns.
    pub fn weighted_gram(&self, w: &DVector<f64>, idx: &[usize]) -> DMatrix<f64> {
        let k = idx.len();
        let n = self.n();
        let mut wx = DMatrix::zeros(n, k);
        for (c, &j) in idx.iter().enumerate() {
            for (i, x) in self.column(j).iter().enumerate() {
                wx[(i, c)] = x * w[i];
            }
        }
        let mut h = DMatrix::zeros(k, k);
        for a in 0..k {
            let xa = self.column(idx[a]);
            for b in 0..=a {
                let v = dot(xa, &wx.as_slice()[b * n..(b + 1) * n]);
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        h
    }

    fn check_len(&self, beta: &DVector<f64>) -> Result<(), ModelError> {
        if beta.len() != self.p() {
            return Err(ModelError::CoefLength {
                got: beta.len(),
                expected: self.p(),
            });
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }

    fn check_eta(&self, eta: &DVector<f64>) -> Result<(), ModelError> {
        if self.loss == Loss::Poisson {
            let m = eta.max();
            if m > POISSON_ETA_MAX {
                return Err(ModelError::PoissonOverflow(m));
            }
        }
        Ok(())
    }

    /// `f(beta)`.
    pub fn loss_value(&self, beta: &DVector<f64>) -> Result<f64, ModelError> {
        self.check_len(beta)?;
        let eta = self.linear_predictor(beta);
        self.check_eta(&eta)?;
        Ok(self.loss_at(&eta))
    }

    /// `grad f(beta) = X' (mu - y)`.
    pub fn loss_gradient(&self, beta: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_len(beta)?;
        let eta = self.linear_predictor(beta);
        self.check_eta(&eta)?;
        Ok(self.gradient_from_residual(&self.working_residual(&eta)))
    }

    /// Hessian of the penalized objective restricted to the active set.
    ///
    /// Rows follow [`ActivePartition::active`]; nonzero penalized coordinates add the penalty
    /// curvature to the diagonal.
    pub fn restricted_hessian(
        &self,
        beta: &DVector<f64>,
        part: &ActivePartition,
        spec: &PenaltySpec,
        rho: f64,
    ) -> DMatrix<f64> {
        let eta = self.linear_predictor(beta);
        let w = self.weights(&eta);
        let idx = part.active();
        let mut h = self.weighted_gram(&w, &idx);
        let off = part.unpenalized.len();
        for (k, &j) in part.nonzero.iter().enumerate() {
            h[(off + k, off + k)] += spec.d2_tt(beta[j].abs(), rho);
        }
        h
    }

    /// Heuristic test for an unbounded likelihood along the current coefficients.
    ///
    /// Fires only once the linear predictor exceeds [`SEPARATION_ETA`] in magnitude, and then when
    /// the fitted signs classify every logistic observation perfectly, or when doubling the
    /// coefficients still lowers the loss.
    pub fn detect_separation(&self, beta: &DVector<f64>) -> bool {
        if self.loss == Loss::Gaussian {
            return false;
        }
        let eta = self.linear_predictor(beta);
        let max_abs = eta.amax();
        if !(max_abs > SEPARATION_ETA) {
            return false;
        }
        if self.loss == Loss::Logistic {
            let perfect = eta
                .iter()
                .zip(self.y.iter())
                .all(|(&e, &y)| (y == 1.0 && e > 0.0) || (y == 0.0 && e < 0.0));
            if perfect {
                return true;
            }
        }
        let doubled = &eta * 2.0;
        if self.loss == Loss::Poisson && doubled.max() > POISSON_ETA_MAX {
            return true;
        }
        self.loss_at(&doubled) < self.loss_at(&eta)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Column centering and scaling applied to penalized columns.
///
/// Centering is only done when an unpenalized intercept column is available to absorb it.
#[derive(Debug, Clone)]
pub struct Standardization {
    center: Vec<f64>,
    scale: Vec<f64>,
    intercept: Option<usize>,
}

impl Standardization {
    /// Standardizes the penalized columns of `prob` to mean 0 and unit root-mean-square.
    pub fn apply(prob: &GlmProblem, intercept: Option<usize>) -> (GlmProblem, Standardization) {
        let (n, p) = (prob.n(), prob.p());
        let mut x = prob.x.clone();
        let mut center = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            if !prob.penalized[j] {
                continue;
            }
            let col = prob.column(j);
            let m = if intercept.is_some() {
                col.iter().sum::<f64>() / n as f64
            } else {
                0.0
            };
            let ss = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let s = if ss > 0.0 { ss.sqrt() } else { 1.0 };
            center[j] = m;
            scale[j] = s;
            for i in 0..n {
                x[(i, j)] = (x[(i, j)] - m) / s;
            }
        }
        let std = GlmProblem {
            x,
            y: prob.y.clone(),
            loss: prob.loss,
            penalized: prob.penalized.clone(),
        };
        (
            std,
            Standardization {
                center,
                scale,
                intercept,
            },
        )
    }

    /// Maps coefficients of the standardized problem back to the original columns.
    pub fn to_original(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut out = beta.clone();
        let mut shift = 0.0;
        for j in 0..beta.len() {
            out[j] = beta[j] / self.scale[j];
            shift += out[j] * self.center[j];
        }
        if let Some(i0) = self.intercept {
            out[i0] -= shift;
        }
        out
    }

    /// Inverse of [`Standardization::to_original`].
    pub fn to_standardized(&self, beta: &DVector<f64>) -> DVector<f64> {
        let mut out = beta.clone();
        let mut shift = 0.0;
        for j in 0..beta.len() {
            out[j] = beta[j] * self.scale[j];
            shift += beta[j] * self.center[j];
        }
        if let Some(i0) = self.intercept {
            out[i0] += shift;
        }
        out
    }
}
