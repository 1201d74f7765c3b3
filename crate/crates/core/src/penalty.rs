//! Scalar penalty families and their thresholding operators.
//!
//! Every family is a function `P(t, rho)` of the coefficient magnitude `t = |beta|`
//! and the tuning parameter `rho`. Besides values and partial derivatives this module
//! provides the exact global minimizer of the scalar problem
//!
//! ```text
//!     (a / 2) (beta - b)^2 + P(|beta|, rho)
//! ```
//!
//! which drives both coordinate descent and the jump detector of the path solver.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("shape parameter eta = {eta} is out of range for the {family} penalty ({allowed})")]
    InvalidEta {
        family: Family,
        eta: f64,
        allowed: &'static str,
    },
    #[error("penalty argument out of domain: t = {t}, rho = {rho}")]
    Domain { t: f64, rho: f64 },
    #[error("second derivative of the {0} penalty diverges at t = 0")]
    DivergentAtZero(Family),
    #[error("scalar quadratic curvature must be positive, got a = {0}")]
    NonPositiveCurvature(f64),
}

/// Penalty family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// `rho |beta|^eta`, bridge regression.
    Power,
    /// `rho [(eta - 1) beta^2 / 2 + (2 - eta) |beta|]`.
    ElasticNet,
    /// `rho ln(eta + |beta|)`, generalized double Pareto.
    Log,
    /// `rho ln(sqrt(rho) + |beta|)`.
    ContinuousLog,
    Scad,
    McPlus,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Power => "power",
            Family::ElasticNet => "enet",
            Family::Log => "log",
            Family::ContinuousLog => "clog",
            Family::Scad => "scad",
            Family::McPlus => "mcp",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s.trim().to_ascii_lowercase().as_str() {
            "power" | "bridge" => Some(Family::Power),
            "enet" | "elasticnet" | "elastic_net" => Some(Family::ElasticNet),
            "log" => Some(Family::Log),
            "clog" | "continuouslog" | "continuous_log" => Some(Family::ContinuousLog),
            "scad" => Some(Family::Scad),
            "mcp" | "mc+" | "mcplus" => Some(Family::McPlus),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A penalty family together with its validated shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySpec {
    family: Family,
    eta: f64,
}

/// Scalar quadratic `(a/2)(beta - b)^2`; `a` is the curvature, `b` the unconstrained minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarQuadratic {
    pub a: f64,
    pub b: f64,
}

impl ScalarQuadratic {
    pub fn new(a: f64, b: f64) -> Result<Self, PenaltyError> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(PenaltyError::NonPositiveCurvature(a));
        }
        Ok(ScalarQuadratic { a, b })
    }
}

impl PenaltySpec {
    pub fn new(family: Family, eta: f64) -> Result<Self, PenaltyError> {
        let (ok, allowed) = match family {
            Family::Power => (eta > 0.0 && eta <= 2.0, "0 < eta <= 2"),
            Family::ElasticNet => ((1.0..=2.0).contains(&eta), "1 <= eta <= 2"),
            Family::Log => (eta > 0.0 && eta.is_finite(), "eta > 0"),
            Family::ContinuousLog => (true, "no shape parameter"),
            Family::Scad => (eta > 2.0 && eta.is_finite(), "eta > 2"),
            Family::McPlus => (eta > 0.0 && eta.is_finite(), "eta > 0"),
        };
        if !ok {
            return Err(PenaltyError::InvalidEta {
                family,
                eta,
                allowed,
            });
        }
        let eta = if family == Family::ContinuousLog {
            0.0
        } else {
            eta
        };
        Ok(PenaltySpec { family, eta })
    }

    pub fn power(eta: f64) -> Result<Self, PenaltyError> {
        Self::new(Family::Power, eta)
    }
    pub fn elastic_net(eta: f64) -> Result<Self, PenaltyError> {
        Self::new(Family::ElasticNet, eta)
    }
    pub fn log(eta: f64) -> Result<Self, PenaltyError> {
        Self::new(Family::Log, eta)
    }
    pub fn continuous_log() -> Self {
        PenaltySpec {
            family: Family::ContinuousLog,
            eta: 0.0,
        }
    }
    pub fn scad(eta: f64) -> Result<Self, PenaltyError> {
        Self::new(Family::Scad, eta)
    }
    pub fn mcplus(eta: f64) -> Result<Self, PenaltyError> {
        Self::new(Family::McPlus, eta)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Shape parameter; 0 for the continuous log penalty, which has none.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// True when `P(., rho)` is convex in `t`, so stationary points are global minima.
    pub fn is_convex(&self) -> bool {
        match self.family {
            Family::Power => self.eta >= 1.0,
            Family::ElasticNet => true,
            _ => false,
        }
    }

    /// `P(t, rho)`. Callers guarantee `t >= 0` and `rho >= 0`.
    pub fn value(&self, t: f64, rho: f64) -> f64 {
        let eta = self.eta;
        match self.family {
            Family::Power => {
                if t == 0.0 {
                    0.0
                } else {
                    rho * t.powf(eta)
                }
            }
            Family::ElasticNet => rho * ((eta - 1.0) * t * t / 2.0 + (2.0 - eta) * t),
            Family::Log => rho * (eta + t).ln(),
            Family::ContinuousLog => rho * (rho.sqrt() + t).ln(),
            Family::Scad => {
                if t < rho {
                    rho * t
                } else if t <= eta * rho {
                    rho * rho + eta * rho * (t - rho) / (eta - 1.0)
                        - (t * t - rho * rho) / (2.0 * (eta - 1.0))
                } else {
                    rho * rho * (eta + 1.0) / 2.0
                }
            }
            Family::McPlus => {
                if t < rho * eta {
                    rho * t - t * t / (2.0 * eta)
                } else {
                    rho * rho * eta / 2.0
                }
            }
        }
    }

    /// `dP/dt`. At `t = 0` this is the one-sided slope; `+inf` for bridge penalties with `eta < 1`.
    pub fn d1(&self, t: f64, rho: f64) -> f64 {
        let eta = self.eta;
        match self.family {
            Family::Power => {
                if t == 0.0 {
                    if eta < 1.0 {
                        f64::INFINITY
                    } else if eta == 1.0 {
                        rho
                    } else {
                        0.0
                    }
                } else {
                    rho * eta * t.powf(eta - 1.0)
                }
            }
            Family::ElasticNet => rho * ((eta - 1.0) * t + (2.0 - eta)),
            Family::Log => rho / (eta + t),
            Family::ContinuousLog => rho / (rho.sqrt() + t),
            Family::Scad => {
                if t <= rho {
                    rho
                } else {
                    (eta * rho - t).max(0.0) / (eta - 1.0)
                }
            }
            Family::McPlus => (rho - t / eta).max(0.0),
        }
    }

    /// `d2P/dt2`, using the left limit in `rho` at the SCAD and MC+ knots.
    pub fn d2_tt(&self, t: f64, rho: f64) -> f64 {
        let eta = self.eta;
        match self.family {
            Family::Power => {
                if eta == 1.0 {
                    0.0
                } else if eta == 2.0 {
                    2.0 * rho
                } else {
                    rho * eta * (eta - 1.0) * t.powf(eta - 2.0)
                }
            }
            Family::ElasticNet => rho * (eta - 1.0),
            Family::Log => -rho / ((eta + t) * (eta + t)),
            Family::ContinuousLog => {
                let s = rho.sqrt() + t;
                -rho / (s * s)
            }
            Family::Scad => {
                if t >= rho && t < eta * rho {
                    -1.0 / (eta - 1.0)
                } else {
                    0.0
                }
            }
            Family::McPlus => {
                if t < rho * eta {
                    -1.0 / eta
                } else {
                    0.0
                }
            }
        }
    }

    /// `d2P/(dt drho)`, with the same knot convention as [`PenaltySpec::d2_tt`].
    pub fn d2_trho(&self, t: f64, rho: f64) -> f64 {
        let eta = self.eta;
        match self.family {
            Family::Power => {
                if eta == 1.0 {
                    1.0
                } else {
                    eta * t.powf(eta - 1.0)
                }
            }
            Family::ElasticNet => (eta - 1.0) * t + (2.0 - eta),
            Family::Log => 1.0 / (eta + t),
            Family::ContinuousLog => {
                let sr = rho.sqrt();
                let s = sr + t;
                1.0 / s - 0.5 * sr / (s * s)
            }
            Family::Scad => {
                if t < rho {
                    1.0
                } else if t < eta * rho {
                    eta / (eta - 1.0)
                } else {
                    0.0
                }
            }
            Family::McPlus => {
                if t < rho * eta {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Slope of the penalty at the origin, i.e. the width of the subgradient interval at zero.
    pub fn slope_at_zero(&self, rho: f64) -> f64 {
        self.d1(0.0, rho)
    }

    /// Scalar objective `(a/2)(t - b)^2 + P(|t|, rho)`.
    pub fn scalar_objective(&self, q: ScalarQuadratic, rho: f64, t: f64) -> f64 {
        let d = t - q.b;
        0.5 * q.a * d * d + self.value(t.abs(), rho)
    }

    /// Global minimizer of the scalar problem. Ties between local minima resolve toward zero.
    pub fn threshold(&self, q: ScalarQuadratic, rho: f64) -> f64 {
        if q.b == 0.0 {
            return 0.0;
        }
        let mag = self.threshold_magnitude(q.a, q.b.abs(), rho);
        if mag == 0.0 {
            0.0
        } else {
            mag.copysign(q.b)
        }
    }

    // Minimizer over t >= 0 of (a/2)(t - m)^2 + P(t, rho), for m = |b| > 0.
    fn threshold_magnitude(&self, a: f64, m: f64, rho: f64) -> f64 {
        let eta = self.eta;
        match self.family {
            Family::Power if eta == 1.0 => (m - rho / a).max(0.0),
            Family::Power if eta == 2.0 => a * m / (a + 2.0 * rho),
            Family::Power if eta > 1.0 => {
                if rho == 0.0 {
                    return m;
                }
                // g(t) = a (t - m) + rho eta t^(eta-1) is increasing with g(0) < 0 < g(m).
                let g = |t: f64| a * (t - m) + rho * eta * t.powf(eta - 1.0);
                let dg = |t: f64| a + rho * eta * (eta - 1.0) * t.powf(eta - 2.0);
                safeguarded_root(g, dg, 0.0, m, m, a * m)
            }
            Family::Power => self.bridge_magnitude(a, m, rho),
            Family::ElasticNet => ((a * m - rho * (2.0 - eta)) / (a + rho * (eta - 1.0))).max(0.0),
            Family::Log => self.pick(a, m, rho, &[log_stationary(a, m, rho, eta)]),
            Family::ContinuousLog => self.pick(a, m, rho, &[log_stationary(a, m, rho, rho.sqrt())]),
            Family::Scad => {
                let mut cands = [f64::NAN; 5];
                // lasso region [0, rho]
                cands[0] = (m - rho / a).clamp(0.0, rho);
                // quadratic region [rho, eta*rho]
                let curv = a * (eta - 1.0) - 1.0;
                cands[1] = rho.min(m.max(0.0));
                cands[2] = (eta * rho).min(m);
                if curv.abs() >= 1e-12 && curv > 0.0 {
                    let r = (a * m * (eta - 1.0) - eta * rho) / curv;
                    cands[3] = r.clamp(rho, eta * rho);
                }
                // flat region
                cands[4] = m.max(eta * rho);
                self.pick(a, m, rho, &cands)
            }
            Family::McPlus => {
                let mut cands = [f64::NAN; 3];
                let curv = a - 1.0 / eta;
                if curv.abs() >= 1e-12 && curv > 0.0 {
                    cands[0] = ((a * m - rho) / curv).clamp(0.0, rho * eta);
                } else {
                    cands[0] = rho * eta;
                }
                cands[1] = (rho * eta).min(m);
                cands[2] = m.max(rho * eta);
                self.pick(a, m, rho, &cands)
            }
        }
    }

    fn bridge_magnitude(&self, a: f64, m: f64, rho: f64) -> f64 {
        let eta = self.eta;
        if rho == 0.0 {
            return m;
        }
        // g(t) = a (t - m) + rho eta t^(eta-1) is convex on (0, inf), minimal at t_min.
        let t_min = (rho * eta * (1.0 - eta) / a).powf(1.0 / (2.0 - eta));
        if t_min >= m {
            return 0.0;
        }
        let g = |t: f64| a * (t - m) + rho * eta * t.powf(eta - 1.0);
        if g(t_min) >= 0.0 {
            return 0.0;
        }
        let dg = |t: f64| a + rho * eta * (eta - 1.0) * t.powf(eta - 2.0);
        let root = safeguarded_root(g, dg, t_min, m, m, a * m);
        self.pick(a, m, rho, &[root])
    }

    // P(t) - P(0) without cancellation for the log families.
    fn increment(&self, t: f64, rho: f64) -> f64 {
        match self.family {
            Family::Log => rho * (t / self.eta).ln_1p(),
            Family::ContinuousLog => rho * (t / rho.sqrt()).ln_1p(),
            _ => self.value(t, rho),
        }
    }

    // Compare the objective at zero and every finite nonnegative candidate. Objectives are
    // measured relative to t = 0 so that candidates very close to zero are not lost to cancellation.
    fn pick(&self, a: f64, m: f64, rho: f64, cands: &[f64]) -> f64 {
        let obj = |t: f64| a * t * (0.5 * t - m) + self.increment(t, rho);
        let mut best_t = 0.0;
        let mut best = 0.0;
        let mut sorted: Vec<f64> = cands
            .iter()
            .copied()
            .filter(|t| t.is_finite() && *t > 0.0)
            .collect();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for t in sorted {
            let v = obj(t);
            if v < best {
                best = v;
                best_t = t;
            }
        }
        best_t
    }

    /// Largest `rho` at which the scalar problem has a nonzero minimizer.
    ///
    /// Infinite for penalties with zero slope at the origin (bridge with `eta > 1`, ridge-type
    /// elastic net), whose minimizer is never exactly zero.
    pub fn entry_rho(&self, q: ScalarQuadratic) -> f64 {
        let (a, m) = (q.a, q.b.abs());
        if m == 0.0 {
            return 0.0;
        }
        match self.family {
            Family::Power if self.eta == 1.0 => return a * m,
            Family::Power if self.eta > 1.0 => return f64::INFINITY,
            Family::ElasticNet if self.eta == 2.0 => return f64::INFINITY,
            Family::ElasticNet => return a * m / (2.0 - self.eta),
            Family::ContinuousLog => return continuous_log_jump_rho(a, m),
            _ => {}
        }
        let nonzero = |rho: f64| self.threshold_magnitude(a, m, rho) > 0.0;
        let mut hi = (a * m).max(a * m * m).max(1e-300);
        let mut doublings = 0;
        while nonzero(hi) {
            hi *= 2.0;
            doublings += 1;
            if doublings > 2000 || !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        bisect_boundary(nonzero, 0.0, hi, ENTRY_RTOL)
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::ContinuousLog => write!(f, "clog"),
            fam => write!(f, "{}({})", fam, self.eta),
        }
    }
}

const ENTRY_RTOL: f64 = 1e-10;

// Largest positive stationary point of (a/2)(t - m)^2 + rho ln(eta + t), if any.
fn log_stationary(a: f64, m: f64, rho: f64, eta: f64) -> f64 {
    let disc = (m + eta) * (m + eta) - 4.0 * rho / a;
    if disc < 0.0 {
        return f64::NAN;
    }
    0.5 * ((m - eta) + disc.sqrt())
}

/// Boundary `rho*` of the continuous log penalty beyond which the scalar solution is zero.
///
/// For `a >= 1` this is `a^2 b^2`; otherwise the path jumps and `rho*` is located by bisection on
/// the sign of the objective difference between zero and the nonzero stationary point.
pub fn continuous_log_jump_rho(a: f64, b: f64) -> f64 {
    let m = b.abs();
    if m == 0.0 {
        return 0.0;
    }
    let spec = PenaltySpec::continuous_log();
    let prefers_nonzero = |rho: f64| {
        let t = log_stationary(a, m, rho, rho.sqrt());
        if !(t > 0.0) {
            return false;
        }
        let q = ScalarQuadratic { a, b: m };
        spec.scalar_objective(q, rho, t) < spec.scalar_objective(q, rho, 0.0)
    };
    if a >= 1.0 {
        return a * a * m * m;
    }
    // the nonzero stationary point exists only while (m + sqrt(rho))^2 >= 4 rho / a
    let mut hi = a * a * m * m;
    let mut guard = 0;
    while prefers_nonzero(hi) && guard < 2000 {
        hi *= 2.0;
        guard += 1;
    }
    bisect_boundary(prefers_nonzero, 0.0, hi, ENTRY_RTOL)
}

// Given pred(lo) true (or lo = 0) and pred(hi) false, shrink to the boundary; returns the false side.
fn bisect_boundary(pred: impl Fn(f64) -> bool, mut lo: f64, mut hi: f64, rtol: f64) -> f64 {
    while hi - lo > rtol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

// Newton iteration safeguarded by bisection for an increasing g on [lo, hi] with g(lo) < 0 < g(hi).
fn safeguarded_root(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    scale: f64,
) -> f64 {
    let tol = 1e-12 * (1.0 + scale.abs());
    let mut t = start.clamp(lo, hi);
    for _ in 0..200 {
        let gt = g(t);
        if gt.abs() <= tol {
            return t;
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let step = gt / dg(t);
        let mut next = t - step;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (hi - lo) <= f64::EPSILON * hi.abs().max(1e-300) {
            return next;
        }
        t = next;
    }
    t
}

fn check_domain(t: f64, rho: f64) -> Result<(), PenaltyError> {
    if t < 0.0 || rho < 0.0 || t.is_nan() || rho.is_nan() {
        Err(PenaltyError::Domain { t, rho })
    } else {
        Ok(())
    }
}

/// Checked `P(t, rho)`.
pub fn penalty_value(spec: &PenaltySpec, t: f64, rho: f64) -> Result<f64, PenaltyError> {
    check_domain(t, rho)?;
    Ok(spec.value(t, rho))
}

/// Checked `dP/dt`.
pub fn penalty_d1(spec: &PenaltySpec, t: f64, rho: f64) -> Result<f64, PenaltyError> {
    check_domain(t, rho)?;
    Ok(spec.d1(t, rho))
}

/// Checked `d2P/dt2`; errors at `t = 0` where the bridge penalty's curvature diverges.
pub fn penalty_d2_tt(spec: &PenaltySpec, t: f64, rho: f64) -> Result<f64, PenaltyError> {
    check_domain(t, rho)?;
    if t == 0.0 && spec.family == Family::Power && spec.eta != 1.0 && spec.eta != 2.0 {
        return Err(PenaltyError::DivergentAtZero(spec.family));
    }
    Ok(spec.d2_tt(t, rho))
}

/// Checked `d2P/(dt drho)`.
pub fn penalty_d2_trho(spec: &PenaltySpec, t: f64, rho: f64) -> Result<f64, PenaltyError> {
    check_domain(t, rho)?;
    if t == 0.0 && spec.family == Family::Power && spec.eta < 1.0 {
        return Err(PenaltyError::DivergentAtZero(spec.family));
    }
    Ok(spec.d2_trho(t, rho))
}

/// Checked thresholding operator.
pub fn threshold(spec: &PenaltySpec, q: ScalarQuadratic, rho: f64) -> Result<f64, PenaltyError> {
    if !(q.a > 0.0) {
        return Err(PenaltyError::NonPositiveCurvature(q.a));
    }
    check_domain(0.0, rho)?;
    Ok(spec.threshold(q, rho))
}

/// Checked entry point of a scalar problem.
pub fn entry_rho(spec: &PenaltySpec, q: ScalarQuadratic) -> Result<f64, PenaltyError> {
    if !(q.a > 0.0) {
        return Err(PenaltyError::NonPositiveCurvature(q.a));
    }
    Ok(spec.entry_rho(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(a: f64, b: f64) -> ScalarQuadratic {
        ScalarQuadratic::new(a, b).unwrap()
    }

    fn all_specs() -> Vec<PenaltySpec> {
        vec![
            PenaltySpec::power(0.5).unwrap(),
            PenaltySpec::power(1.0).unwrap(),
            PenaltySpec::power(1.5).unwrap(),
            PenaltySpec::power(2.0).unwrap(),
            PenaltySpec::elastic_net(1.5).unwrap(),
            PenaltySpec::log(0.1).unwrap(),
            PenaltySpec::log(2.0).unwrap(),
            PenaltySpec::continuous_log(),
            PenaltySpec::scad(3.7).unwrap(),
            PenaltySpec::mcplus(2.0).unwrap(),
            PenaltySpec::mcplus(0.5).unwrap(),
        ]
    }

    // Grid-search oracle for the scalar problem.
    fn grid_min(spec: &PenaltySpec, a: f64, b: f64, rho: f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
        let qq = q(a, b);
        let n = ((hi - lo) / step).round() as usize;
        let mut best = (0.0, spec.scalar_objective(qq, rho, 0.0));
        for i in 0..=n {
            let t = lo + i as f64 * step;
            let v = spec.scalar_objective(qq, rho, t);
            if v < best.1 {
                best = (t, v);
            }
        }
        best
    }

    #[test]
    fn eta_ranges_are_enforced() {
        assert!(PenaltySpec::power(0.0).is_err());
        assert!(PenaltySpec::power(2.5).is_err());
        assert!(PenaltySpec::elastic_net(0.9).is_err());
        assert!(PenaltySpec::log(0.0).is_err());
        assert!(PenaltySpec::scad(2.0).is_err());
        assert!(PenaltySpec::mcplus(-1.0).is_err());
        assert!(PenaltySpec::power(2.0).is_ok());
        assert!(PenaltySpec::elastic_net(1.0).is_ok());
    }

    #[test]
    fn value_examples() {
        let lasso = PenaltySpec::power(1.0).unwrap();
        assert_eq!(penalty_value(&lasso, 2.0, 0.5).unwrap(), 1.0);
        let scad = PenaltySpec::scad(3.7).unwrap();
        assert!((penalty_value(&scad, 10.0, 1.0).unwrap() - 2.35).abs() < 1e-15);
        assert!((penalty_value(&scad, 3.7, 1.0).unwrap() - 2.35).abs() < 1e-12);
        let mcp = PenaltySpec::mcplus(2.0).unwrap();
        assert_eq!(penalty_value(&mcp, 5.0, 1.0).unwrap(), 1.0);
        assert!(penalty_value(&lasso, -1.0, 1.0).is_err());
        assert!(penalty_value(&lasso, 1.0, -1.0).is_err());
    }

    #[test]
    fn scad_and_mcp_continuous_at_knots() {
        let scad = PenaltySpec::scad(3.7).unwrap();
        for &knot in &[1.0, 3.7] {
            let l = scad.value(knot - 1e-12, 1.0);
            let r = scad.value(knot + 1e-12, 1.0);
            assert!((l - r).abs() < 1e-10);
        }
        let mcp = PenaltySpec::mcplus(2.0).unwrap();
        assert!((mcp.value(2.0 - 1e-12, 1.0) - mcp.value(2.0, 1.0)).abs() < 1e-10);
    }

    #[test]
    fn d1_examples() {
        let log = PenaltySpec::log(0.1).unwrap();
        assert!((penalty_d1(&log, 0.0, 1.0).unwrap() - 10.0).abs() < 1e-12);
        let ridge = PenaltySpec::power(2.0).unwrap();
        assert_eq!(penalty_d1(&ridge, 3.0, 1.0).unwrap(), 6.0);
        let scad = PenaltySpec::scad(3.7).unwrap();
        let d = penalty_d1(&scad, 2.0, 1.0).unwrap();
        assert!((d - 1.7 / 2.7).abs() < 1e-12);
        let h = 1e-6;
        let fd = (scad.value(2.0 + h, 1.0) - scad.value(2.0 - h, 1.0)) / (2.0 * h);
        assert!((fd - 0.62963).abs() < 1e-5);
    }

    #[test]
    fn second_derivative_examples() {
        let log = PenaltySpec::log(0.1).unwrap();
        assert!((penalty_d2_tt(&log, 0.5, 1.0).unwrap() + 1.0 / 0.36).abs() < 1e-12);
        let enet = PenaltySpec::elastic_net(1.5).unwrap();
        for t in [0.1, 1.0, 7.0] {
            assert_eq!(penalty_d2_tt(&enet, t, 2.0).unwrap(), 1.0);
        }
        let mcp = PenaltySpec::mcplus(2.0).unwrap();
        assert_eq!(penalty_d2_trho(&mcp, 1.0, 2.0).unwrap(), 1.0);
        let bridge = PenaltySpec::power(0.5).unwrap();
        assert!(penalty_d2_tt(&bridge, 0.0, 1.0).is_err());
    }

    #[test]
    fn knot_derivatives_use_left_limit_in_rho() {
        let scad = PenaltySpec::scad(3.7).unwrap();
        let rho = 1.0;
        // at t = rho the value for rho- lies in the quadratic region
        assert_eq!(scad.d2_tt(rho, rho), -1.0 / 2.7);
        assert_eq!(scad.d2_trho(rho, rho), 3.7 / 2.7);
        // at t = eta rho the value for rho- lies in the flat region
        assert_eq!(scad.d2_tt(3.7, rho), 0.0);
        assert_eq!(scad.d2_trho(3.7, rho), 0.0);
        let mcp = PenaltySpec::mcplus(2.0).unwrap();
        assert_eq!(mcp.d2_tt(2.0, 1.0), 0.0);
        assert_eq!(mcp.d2_trho(2.0, 1.0), 0.0);
        let lo = 1.0 - 1e-9;
        assert_eq!(mcp.d2_trho(2.0, lo), 0.0);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let points = [(0.3, 0.7), (1.3, 0.4), (2.2, 1.1), (0.05, 0.2), (5.0, 2.5)];
        for spec in all_specs() {
            for &(t, rho) in &points {
                // stay off the SCAD / MC+ knots
                if matches!(spec.family(), Family::Scad | Family::McPlus) {
                    let knots = [rho, spec.eta() * rho];
                    if knots.iter().any(|k| (t - k).abs() < 1e-2) {
                        continue;
                    }
                }
                let h = 1e-5 * (1.0 + t);
                let fd1 = (spec.value(t + h, rho) - spec.value(t - h, rho)) / (2.0 * h);
                let d1 = spec.d1(t, rho);
                assert!(rel_err(fd1, d1) <= 1e-5, "{spec} d1 at ({t},{rho}): {fd1} vs {d1}");

                let h2 = 1e-4 * (1.0 + t);
                let fd2 = (spec.value(t + h2, rho) - 2.0 * spec.value(t, rho) + spec.value(t - h2, rho))
                    / (h2 * h2);
                let d2 = spec.d2_tt(t, rho);
                assert!(rel_err(fd2, d2) <= 1e-5, "{spec} d2_tt at ({t},{rho}): {fd2} vs {d2}");

                let hr = 1e-4 * (1.0 + rho);
                let mixed = (spec.value(t + h2, rho + hr) - spec.value(t + h2, rho - hr)
                    - spec.value(t - h2, rho + hr)
                    + spec.value(t - h2, rho - hr))
                    / (4.0 * h2 * hr);
                let d2r = spec.d2_trho(t, rho);
                assert!(rel_err(mixed, d2r) <= 1e-5, "{spec} d2_trho at ({t},{rho}): {mixed} vs {d2r}");
            }
        }
    }

    fn rel_err(x: f64, y: f64) -> f64 {
        (x - y).abs() / (1.0 + y.abs())
    }

    #[test]
    fn threshold_examples() {
        let lasso = PenaltySpec::power(1.0).unwrap();
        assert_eq!(lasso.threshold(q(1.0, 2.0), 0.5), 1.5);
        let log = PenaltySpec::log(0.1).unwrap();
        assert_eq!(log.threshold(q(1.0, 1.0), 0.35), 0.0);
        let closed = ((1.0 - 0.1) + ((1.1f64).powi(2) - 4.0 * 0.05).sqrt()) / 2.0;
        let t = log.threshold(q(1.0, 1.0), 0.05);
        assert!((t - closed).abs() < 1e-14);
        assert!((t - 0.95249).abs() < 1e-5);
        let (gt, _) = grid_min(&log, 1.0, 1.0, 0.05, -3.0, 3.0, 1e-5);
        assert!((gt - t).abs() < 2e-5);
        let scad = PenaltySpec::scad(3.7).unwrap();
        assert_eq!(scad.threshold(q(1.0, 0.5), 1.0), 0.0);
        let (gt, _) = grid_min(&scad, 1.0, 0.5, 1.0, -3.0, 3.0, 1e-4);
        assert_eq!(gt, 0.0);
    }

    #[test]
    fn threshold_sign_follows_b() {
        for spec in all_specs() {
            let t = spec.threshold(q(1.3, -2.0), 0.3);
            assert!(t <= 0.0, "{spec}: {t}");
            assert_eq!(spec.threshold(q(1.0, 0.0), 0.3), 0.0);
        }
    }

    #[test]
    fn log_threshold_jump_lies_in_bracket() {
        // |a b eta| = 0.1 and a (eta + |b|)^2 / 4 = 0.3025
        let log = PenaltySpec::log(0.1).unwrap();
        let rho_star = log.entry_rho(q(1.0, 1.0));
        assert!(rho_star > 0.1 && rho_star <= 0.3025, "{rho_star}");
        assert!(log.threshold(q(1.0, 1.0), rho_star * (1.0 - 1e-8)) > 0.5);
        assert_eq!(log.threshold(q(1.0, 1.0), rho_star * (1.0 + 1e-8)), 0.0);
    }

    #[test]
    fn entry_rho_examples() {
        let lasso = PenaltySpec::power(1.0).unwrap();
        assert_eq!(lasso.entry_rho(q(1.0, 2.0)), 2.0);
        for spec in all_specs() {
            assert_eq!(spec.entry_rho(q(1.0, 0.0)), 0.0);
        }
        let ridge = PenaltySpec::power(2.0).unwrap();
        assert!(ridge.entry_rho(q(1.0, 1.0)).is_infinite());
        let bridge = PenaltySpec::power(0.5).unwrap();
        let r = bridge.entry_rho(q(2.0, 1.5));
        assert!(bridge.threshold(q(2.0, 1.5), r * (1.0 - 1e-8)) != 0.0);
        assert_eq!(bridge.threshold(q(2.0, 1.5), r * (1.0 + 1e-8)), 0.0);
    }

    #[test]
    fn continuous_log_boundary() {
        // a >= 1: continuous exit at a^2 b^2
        assert!((continuous_log_jump_rho(1.5, 0.8) - 1.44).abs() < 1e-14);
        let spec = PenaltySpec::continuous_log();
        assert!(spec.threshold(q(1.5, 0.8), 1.44 * (1.0 - 1e-9)) > 0.0);
        assert_eq!(spec.threshold(q(1.5, 0.8), 1.44 * (1.0 + 1e-9)), 0.0);
        // a < 1: the boundary is beyond a^2 b^2 and the solution jumps there
        let a = 0.5;
        let b = 2.0;
        let rs = continuous_log_jump_rho(a, b);
        assert!(rs > a * a * b * b);
        let below = spec.threshold(q(a, b), rs * (1.0 - 1e-8));
        let above = spec.threshold(q(a, b), rs * (1.0 + 1e-8));
        assert!(below > 0.1);
        assert_eq!(above, 0.0);
    }

    #[test]
    fn log_path_is_continuous_when_eta_dominates_b() {
        let log = PenaltySpec::log(2.0).unwrap();
        let qq = q(1.0, 1.5);
        let mut prev = log.threshold(qq, 0.0);
        let mut max_gap: f64 = 0.0;
        let n = 20000;
        for i in 1..=n {
            let rho = 4.0 * i as f64 / n as f64;
            let t = log.threshold(qq, rho);
            max_gap = max_gap.max((t - prev).abs());
            prev = t;
        }
        assert!(max_gap < 1e-3, "{max_gap}");
    }

    #[test]
    fn scad_matches_closed_form_regions() {
        let scad = PenaltySpec::scad(3.7).unwrap();
        // |b| <= rho: lasso region
        assert!((scad.threshold(q(1.0, 0.9), 0.5) - 0.4).abs() < 1e-15);
        // |b| > eta rho: unbiased
        assert_eq!(scad.threshold(q(1.0, 5.0), 1.0), 5.0);
        // a(eta - 1) > 1, interior of quadratic region
        let a = 1.0;
        let (b, rho, eta): (f64, f64, f64) = (2.5, 1.0, 3.7);
        let r = (a * b * (eta - 1.0) - eta * rho) / (a * (eta - 1.0) - 1.0);
        assert!((scad.threshold(q(a, b), rho) - r).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn threshold_is_global_minimizer(
            which in 0usize..11,
            a in 0.2f64..3.0,
            b in -3.0f64..3.0,
            rho in 0.0f64..3.0,
        ) {
            let spec = all_specs()[which];
            let qq = q(a, b);
            let t = spec.threshold(qq, rho);
            let ft = spec.scalar_objective(qq, rho, t);
            let lim = 2.0 * b.abs() + 2.0;
            let step = 1e-4;
            let n = (2.0 * lim / step) as usize;
            for i in 0..=n {
                let x = -lim + i as f64 * step;
                prop_assert!(ft <= spec.scalar_objective(qq, rho, x) + 1e-8,
                    "{} a={} b={} rho={} t={} x={}", spec, a, b, rho, t, x);
            }
            prop_assert!(t.abs() <= b.abs() + 1e-12);
            prop_assert!(t == 0.0 || t.signum() == b.signum());
        }

        #[test]
        fn lasso_threshold_is_soft_thresholding(a in 0.1f64..5.0, b in -5.0f64..5.0, rho in 0.0f64..5.0) {
            let spec = PenaltySpec::power(1.0).unwrap();
            let t = spec.threshold(q(a, b), rho);
            let mut v = [b - rho / a, 0.0, b + rho / a];
            v.sort_by(|x, y| x.partial_cmp(y).unwrap());
            prop_assert_eq!(t, v[1]);
        }

        #[test]
        fn penalty_nondecreasing_in_t(which in 0usize..11, t in 0.0f64..5.0, dt in 0.0f64..1.0, rho in 0.01f64..3.0) {
            let spec = all_specs()[which];
            prop_assert!(spec.value(t + dt, rho) >= spec.value(t, rho) - 1e-12);
            prop_assert!(spec.d1(t.max(1e-9), rho) >= 0.0);
        }

        #[test]
        fn penalty_nondecreasing_in_rho(which in 0usize..11, t in 0.0f64..5.0, rho in 0.0f64..3.0, dr in 0.0f64..1.0) {
            let spec = all_specs()[which];
            // the log families are negative, hence decreasing in rho, while their argument is below 1
            let log_arg = match spec.family() {
                Family::Log => spec.eta() + t,
                Family::ContinuousLog => rho.sqrt() + t,
                _ => f64::INFINITY,
            };
            prop_assume!(log_arg >= 1.0);
            prop_assert!(spec.value(t, rho + dr) >= spec.value(t, rho) - 1e-12);
        }
    }
}
