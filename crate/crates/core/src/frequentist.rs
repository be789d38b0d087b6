//! Frequentist violation metric.
//!
//! Under the null hypothesis every forecast is the true probability plus
//! independent Gaussian noise of scale `σ√(p(1−p))`. The violation `v` is
//! the check's residual divided by its approximate standard deviation under
//! that null (with `σ` factored out and a small regularizer `β_min` in the
//! denominator); a tuple is flagged when `v > γσ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CheckKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequentistConfig {
    pub gamma: f64,
    pub sigma: f64,
    pub beta_min: f64,
}

impl Default for FrequentistConfig {
    fn default() -> Self {
        Self {
            gamma: 2.58,
            sigma: 0.05,
            beta_min: 1e-3,
        }
    }
}

impl FrequentistConfig {
    pub fn threshold(&self) -> f64 {
        self.gamma * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("sigma", self.sigma), ("beta_min", self.beta_min)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequentistResult {
    pub violation: f64,
    pub threshold: f64,
    pub flagged: bool,
}

fn var(p: f64) -> f64 {
    p * (1.0 - p)
}

/// Frequentist violation of `probs` (in canonical role order) for `kind`.
pub fn frequentist_violation(kind: CheckKind, probs: &[f64], cfg: &FrequentistConfig) -> Result<FrequentistResult> {
    kind.check_arity("probs", probs.len())?;
    if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidProbability(p));
    }
    let beta = cfg.beta_min;
    let stat = |r: f64, d: f64| r.abs() / (d + beta).sqrt();
    let f = probs;
    let violation = match kind {
        CheckKind::Negation => {
            let (a, b) = (f[0], f[1]);
            stat(a + b - 1.0, var(a) + var(b))
        }
        CheckKind::Paraphrase => {
            let (a, b) = (f[0], f[1]);
            stat(a - b, var(a) + var(b))
        }
        CheckKind::Consequence => {
            let (a, b) = (f[0], f[1]);
            if a > b {
                stat(a - b, var(a) + var(b))
            } else {
                0.0
            }
        }
        CheckKind::AndOr => {
            let (a, b, c, d) = (f[0], f[1], f[2], f[3]);
            stat(a + b - c - d, var(a) + var(b) + var(c) + var(d))
        }
        CheckKind::And => {
            let (a, b, c) = (f[0], f[1], f[2]);
            let lhs = if a + b - 1.0 > c {
                stat(a + b - 1.0 - c, var(a) + var(b) + var(c))
            } else {
                0.0
            };
            let m = a.min(b);
            let rhs = if m < c { stat(c - m, var(c) + var(m)) } else { 0.0 };
            lhs.max(rhs)
        }
        CheckKind::Or => {
            let (a, b, c) = (f[0], f[1], f[2]);
            let s = a.max(b);
            let lhs = if s > c { stat(s - c, var(s) + var(c)) } else { 0.0 };
            let rhs = if a + b < c {
                stat(c - a - b, var(c) + var(a) + var(b))
            } else {
                0.0
            };
            lhs.max(rhs)
        }
        CheckKind::But => {
            let (a, e, d) = (f[0], f[1], f[2]);
            stat(a + e - d, var(a) + var(e) + var(d))
        }
        CheckKind::Cond => {
            let (a, b, c) = (f[0], f[1], f[2]);
            stat(a * b - c, a * b * (a * (1.0 - b) + b * (1.0 - a)) + var(c))
        }
        CheckKind::CondCond => {
            let (a, b, c, d) = (f[0], f[1], f[2], f[3]);
            let cyc = b * c * (1.0 - a) + c * a * (1.0 - b) + a * b * (1.0 - c);
            stat(a * b * c - d, a * b * c * cyc + var(d))
        }
        CheckKind::ExpEvidence => {
            // Stored as (P, Q, P|Q, P|¬Q); the statistic is written in (P, P|Q, P|¬Q, Q).
            let (a, b, c, d) = (f[0], f[2], f[3], f[1]);
            let r = b * d + c * (1.0 - d) - a;
            let den = var(a) + d * d * var(b) + (1.0 - d) * (1.0 - d) * var(c) + (b - c) * (b - c) * var(d);
            stat(r, den)
        }
    };
    let threshold = cfg.threshold();
    Ok(FrequentistResult {
        violation,
        threshold,
        flagged: violation > threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(kind: CheckKind, probs: &[f64]) -> FrequentistResult {
        frequentist_violation(kind, probs, &FrequentistConfig::default()).unwrap()
    }

    #[test]
    fn negation_not_rejected_example() {
        let r = v(CheckKind::Negation, &[0.5, 0.59]);
        assert!((r.violation - 0.128).abs() < 2e-3, "{}", r.violation);
        assert!(!r.flagged);
        assert!((r.threshold - 0.129).abs() < 1e-12);
    }

    #[test]
    fn negation_flagged_example() {
        let r = v(CheckKind::Negation, &[0.9, 0.3]);
        let oracle = 0.2 / (0.09f64 + 0.21 + 0.001).sqrt();
        assert!((r.violation - oracle).abs() < 1e-12);
        assert!((r.violation - 0.3646).abs() < 1e-4);
        assert!(r.flagged);
    }

    #[test]
    fn exact_zero_on_consistent() {
        assert_eq!(v(CheckKind::Negation, &[0.5, 0.5]).violation, 0.0);
        assert_eq!(v(CheckKind::Consequence, &[0.4, 0.4]).violation, 0.0);
        assert_eq!(v(CheckKind::And, &[0.6, 0.7, 0.5]).violation, 0.0);
        assert_eq!(v(CheckKind::Or, &[0.3, 0.4, 0.5]).violation, 0.0);
        assert_eq!(v(CheckKind::Cond, &[0.5, 0.5, 0.25]).violation, 0.0);
        assert_eq!(v(CheckKind::ExpEvidence, &[0.5, 0.5, 0.5, 0.5]).violation, 0.0);
    }

    #[test]
    fn expevidence_uses_reindexed_roles() {
        // P = 0.62 is the mixture 0.8·0.4 + 0.5·0.6 of P|Q = 0.8 and P|¬Q = 0.5 at Q = 0.4.
        assert!(v(CheckKind::ExpEvidence, &[0.62, 0.4, 0.8, 0.5]).violation < 1e-12);
        assert!(v(CheckKind::ExpEvidence, &[0.62, 0.8, 0.4, 0.5]).violation > 0.1);
    }

    #[test]
    fn canonical_pairs_agree_with_arbitrage_flags() {
        assert!(v(CheckKind::Negation, &[0.5, 0.6]).flagged);
        assert!(!v(CheckKind::Negation, &[0.5, 0.55]).flagged);
    }

    #[test]
    fn and_takes_larger_branch() {
        // only the lower-bound branch is active: a+b-1 = 0.3 > c
        let r = v(CheckKind::And, &[0.6, 0.7, 0.2]);
        let oracle = 0.1 / (0.24f64 + 0.21 + 0.16 + 0.001).sqrt();
        assert!((r.violation - oracle).abs() < 1e-12);
    }

    #[test]
    fn arity_checked() {
        let r = frequentist_violation(CheckKind::And, &[0.1, 0.2], &FrequentistConfig::default());
        assert!(matches!(r, Err(Error::ArityMismatch { .. })));
    }

    proptest::proptest! {
        #[test]
        fn zero_exactly_when_residual_zero(probs in proptest::collection::vec(0.0f64..=1.0, 4), k in 0usize..10) {
            let kind = CheckKind::ALL[k];
            let p = &probs[..kind.arity()];
            let r = crate::checks::condition_residual(kind, p).unwrap();
            let f = v(kind, p).violation;
            proptest::prop_assert_eq!(r == 0.0, f == 0.0, "{} {:?}: residual {}, v {}", kind, p, r, f);
        }
    }
}
