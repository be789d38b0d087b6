//! Arbitrage violation metric.
//!
//! A forecaster's tuple of probabilities is treated as the prices posted by a
//! logarithmic market maker. The violation is the largest profit an
//! arbitrageur can guarantee across every consistent resolution of the tuple,
//! and the prices the arbitrageur moves the market to are the arbitraged
//! (consistent) forecasts.

mod closed;
mod equalizer;
mod maximin;

use serde::{Deserialize, Serialize};

use crate::checks::consistent_outcomes;
use crate::error::{Error, Result};
use crate::model::{CheckKind, ResolutionOpt};

pub use closed::{arbitrage_closed, arbitrage_paraphrase_multi};
pub use equalizer::equalize;
pub use maximin::maximin;

/// Violations at or above this value count as failing the check.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    OdeEqualizer,
    Maximin,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::OdeEqualizer => "ode_equalizer",
            Method::Maximin => "maximin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageResult {
    pub violation: f64,
    pub arbitraged_probs: Vec<f64>,
    pub method: Method,
}

impl ArbitrageResult {
    pub fn flagged(&self, threshold: f64) -> bool {
        self.violation >= threshold
    }
}

/// Numeric solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Initial arc-length step of the equalizer continuation, in log-odds units.
    pub ode_step: f64,
    /// The continuation stops once the normalized determinant of the profit
    /// Jacobian is below this.
    pub stop_det_tol: f64,
    /// Maximin ascent stops once an iteration improves the objective by less.
    pub maximin_tol: f64,
    pub max_iters: usize,
    /// Offered prices are clamped into `[eps, 1 - eps]`. `None` disables
    /// clamping, making prices of exactly 0 or 1 a domain error.
    pub prob_clamp_eps: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            ode_step: 0.05,
            stop_det_tol: 1e-10,
            maximin_tol: 1e-12,
            max_iters: 10_000,
            prob_clamp_eps: Some(1e-6),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("ode_step", self.ode_step)?;
        positive("stop_det_tol", self.stop_det_tol)?;
        positive("maximin_tol", self.maximin_tol)?;
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if let Some(eps) = self.prob_clamp_eps {
            if !(eps > 0.0 && eps < 0.5) {
                return Err(Error::Config(format!("prob_clamp_eps must lie in (0, 0.5), got {eps}")));
            }
        }
        Ok(())
    }
}

/// Checks probabilities and moves them into the open unit interval.
pub(crate) fn clamp_probs(probs: &[f64], eps: Option<f64>) -> Result<Vec<f64>> {
    probs
        .iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
            match eps {
                Some(e) => Ok(p.clamp(e, 1.0 - e)),
                None if p == 0.0 || p == 1.0 => Err(Error::Domain(format!(
                    "probability {p} is on the boundary and clamping is disabled"
                ))),
                None => Ok(p),
            }
        })
        .collect()
}

pub(crate) fn check_weights(kind: CheckKind, weights: &[f64]) -> Result<()> {
    kind.check_arity("weights", weights.len())?;
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::Domain(format!("weights must be positive and finite, got {w}")));
    }
    Ok(())
}

/// Log-score profit of moving prices `offered` to `candidate` if the tuple resolves as `omega`.
pub fn outcome_profit(omega: &[ResolutionOpt], offered: &[f64], candidate: &[f64], weights: &[f64]) -> f64 {
    omega
        .iter()
        .zip(offered)
        .zip(candidate)
        .zip(weights)
        .map(|(((s, f), p), w)| match s {
            ResolutionOpt::True => w * (p.ln() - f.ln()),
            ResolutionOpt::False => w * ((-p).ln_1p() - (-f).ln_1p()),
            ResolutionOpt::NotApplicable => 0.0,
        })
        .sum()
}

/// Profit in every consistent outcome, in the order of [`consistent_outcomes`].
pub fn outcome_profits(kind: CheckKind, offered: &[f64], candidate: &[f64], weights: &[f64]) -> Vec<f64> {
    consistent_outcomes(kind)
        .iter()
        .map(|omega| outcome_profit(omega, offered, candidate, weights))
        .collect()
}

/// Profit an arbitrageur who moves prices from `offered` to `candidate` is
/// guaranteed, whatever the consistent resolution.
pub fn min_profit(
    kind: CheckKind,
    offered: &[f64],
    candidate: &[f64],
    weights: &[f64],
    prob_clamp_eps: Option<f64>,
) -> Result<f64> {
    kind.check_arity("offered", offered.len())?;
    kind.check_arity("candidate", candidate.len())?;
    check_weights(kind, weights)?;
    let f = clamp_probs(offered, prob_clamp_eps)?;
    let p = clamp_probs(candidate, prob_clamp_eps)?;
    Ok(min_profit_unchecked(kind, &f, &p, weights))
}

pub(crate) fn min_profit_unchecked(kind: CheckKind, offered: &[f64], candidate: &[f64], weights: &[f64]) -> f64 {
    consistent_outcomes(kind)
        .iter()
        .map(|omega| outcome_profit(omega, offered, candidate, weights))
        .fold(f64::INFINITY, f64::min)
}

/// Numeric arbitrage: the equalizer continuation when the outcome set is as
/// large as the tuple, the maximin ascent otherwise.
pub fn arbitrage_numeric(kind: CheckKind, offered: &[f64], weights: &[f64], cfg: &SolverConfig) -> Result<ArbitrageResult> {
    if consistent_outcomes(kind).len() == kind.arity() {
        equalize(kind, offered, weights, cfg)
    } else {
        maximin(kind, offered, weights, cfg)
    }
}

/// Arbitrage with the cheapest applicable method. Closed forms assume unit
/// weights, so any other weighting goes to the numeric solver.
pub fn arbitrage(kind: CheckKind, offered: &[f64], weights: &[f64], cfg: &SolverConfig) -> Result<ArbitrageResult> {
    check_weights(kind, weights)?;
    let unit = weights.iter().all(|&w| w == 1.0);
    match kind {
        CheckKind::Negation | CheckKind::Paraphrase | CheckKind::Cond if unit => {
            arbitrage_closed(kind, offered, cfg.prob_clamp_eps)
        }
        _ => arbitrage_numeric(kind, offered, weights, cfg),
    }
}

/// Unit-weight arbitrage with default solver settings.
pub fn arbitrage_default(kind: CheckKind, offered: &[f64]) -> Result<ArbitrageResult> {
    arbitrage(kind, offered, &vec![1.0; offered.len().max(1)], &SolverConfig::default())
}

pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn identical_prices_have_no_profit() {
        let v = min_profit(CheckKind::Negation, &[0.5, 0.5], &[0.5, 0.5], &unit(2), Some(1e-6)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn paraphrase_figure_point() {
        let v = min_profit(CheckKind::Paraphrase, &[0.7, 0.4], &[0.555, 0.555], &unit(2), Some(1e-6)).unwrap();
        assert!((v - 0.095).abs() < 1e-3, "{v}");
    }

    #[test]
    fn boundary_without_clamping_is_domain_error() {
        let r = min_profit(CheckKind::Negation, &[1.0, 0.2], &[0.5, 0.5], &unit(2), None);
        assert!(matches!(r, Err(Error::Domain(_))));
        assert!(min_profit(CheckKind::Negation, &[1.0, 0.2], &[0.5, 0.5], &unit(2), Some(1e-6)).is_ok());
    }

    #[test]
    fn dispatch_methods() {
        let cfg = SolverConfig::default();
        let r = arbitrage(CheckKind::Negation, &[0.5, 0.6], &unit(2), &cfg).unwrap();
        assert_eq!(r.method, Method::ClosedForm);
        let r = arbitrage(CheckKind::Negation, &[0.5, 0.6], &[3.0, 1.0], &cfg).unwrap();
        assert_ne!(r.method, Method::ClosedForm);
        let r = arbitrage(CheckKind::AndOr, &[0.5, 0.6, 0.2, 0.7], &unit(4), &cfg).unwrap();
        assert_ne!(r.method, Method::ClosedForm);
        let r = arbitrage(CheckKind::And, &[0.6, 0.7, 0.2], &unit(3), &cfg).unwrap();
        assert_eq!(r.method, Method::Maximin);
    }

    #[test]
    fn bad_weights_rejected() {
        let cfg = SolverConfig::default();
        assert!(arbitrage(CheckKind::Negation, &[0.5, 0.6], &[0.0, 1.0], &cfg).is_err());
        assert!(matches!(
            arbitrage(CheckKind::Negation, &[0.5, 0.6], &[1.0], &cfg),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { stop_det_tol: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { max_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        let r = ArbitrageResult { violation: 0.01, arbitraged_probs: vec![], method: Method::ClosedForm };
        assert!(r.flagged(DEFAULT_THRESHOLD));
    }

    #[test]
    fn logit_sigmoid_inverse() {
        for p in [1e-6, 0.1, 0.5, 0.9, 1.0 - 1e-6] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-14);
        }
    }
}
