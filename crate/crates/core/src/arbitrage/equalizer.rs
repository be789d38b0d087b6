//! Equalizer dynamics for checks with exactly as many consistent outcomes as
//! questions.
//!
//! Starting from the offered prices, the arbitrageur moves prices so that the
//! profit in every outcome grows at the same rate: `A(p) p' = 1`, where row
//! `ω` of `A` is the gradient of the profit in outcome `ω`. Profits stay
//! equal along the trajectory and the trade is finished where `det A`
//! vanishes.
//!
//! The trajectory is followed in log-odds coordinates (so prices never leave
//! the open unit interval) and parametrized by arc length rather than by the
//! profit itself, which keeps steps finite where `A` becomes singular. Each
//! step is an Euler predictor along the tangent followed by a Newton
//! corrector back onto the equal-profit curve; the endpoint is located by
//! secant steps on the normalized determinant.

use nalgebra::{DMatrix, DVector};

use super::{check_weights, clamp_probs, logit, min_profit_unchecked, outcome_profit, sigmoid, ArbitrageResult, Method, SolverConfig};
use crate::checks::{consistent_outcomes, OutcomeVector};
use crate::error::{Error, Result};
use crate::model::{CheckKind, ResolutionOpt};

const MAX_STEP: f64 = 2.0;
const MIN_STEP: f64 = 1e-15;
const CORRECTOR_TOL: f64 = 1e-12;
const CORRECTOR_ITERS: usize = 40;

struct Curve<'a> {
    omega: &'a [OutcomeVector],
    offered: &'a [f64],
    weights: &'a [f64],
}

impl Curve<'_> {
    fn n(&self) -> usize {
        self.offered.len()
    }

    fn profits(&self, u: &[f64]) -> Vec<f64> {
        let p: Vec<f64> = u.iter().map(|&x| sigmoid(x)).collect();
        self.omega
            .iter()
            .map(|w| outcome_profit(w, self.offered, &p, self.weights))
            .collect()
    }

    /// Profit gradients in log-odds coordinates, one row per outcome.
    fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |r, i| {
            let p = sigmoid(u[i]);
            let w = self.weights[i];
            match self.omega[r][i] {
                ResolutionOpt::True => w * (1.0 - p),
                ResolutionOpt::False => -w * p,
                ResolutionOpt::NotApplicable => 0.0,
            }
        })
    }

    /// Determinant of the Jacobian divided by the product of its row norms.
    fn normalized_det(&self, j: &DMatrix<f64>) -> f64 {
        let norms: f64 = j.row_iter().map(|r| r.norm()).product();
        if norms == 0.0 {
            0.0
        } else {
            j.determinant() / norms
        }
    }

    /// Rows `g_ω - g_ω0` for every outcome but the first.
    fn differences(j: &DMatrix<f64>) -> DMatrix<f64> {
        let n = j.nrows();
        DMatrix::from_fn(n - 1, n, |r, c| j[(r + 1, c)] - j[(0, c)])
    }

    /// Unit tangent of the equal-profit curve, oriented so that profits increase.
    fn tangent(&self, j: &DMatrix<f64>, orientation: f64) -> DVector<f64> {
        let d = Self::differences(j);
        let n = self.n();
        let c = DVector::from_fn(n, |k, _| {
            let minor = d.clone().remove_column(k);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * minor.determinant()
        });
        let norm = c.norm();
        c * (orientation / norm)
    }

    /// Newton projection of `start` back onto the curve, keeping the
    /// displacement orthogonal to `t`.
    fn correct(&self, start: &DVector<f64>, t: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.n();
        let mut v = start.clone();
        for _ in 0..CORRECTOR_ITERS {
            let s = self.profits(v.as_slice());
            let scale = 1.0 + s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let gaps: Vec<f64> = s[1..].iter().map(|x| x - s[0]).collect();
            let gap = gaps.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if gap <= CORRECTOR_TOL * scale {
                return Some(v);
            }
            let d = Self::differences(&self.jacobian(v.as_slice()));
            let mut m = DMatrix::zeros(n, n);
            m.view_mut((0, 0), (n - 1, n)).copy_from(&d);
            m.set_row(n - 1, &t.transpose());
            let mut rhs = DVector::zeros(n);
            for (k, g) in gaps.iter().enumerate() {
                rhs[k] = -g;
            }
            rhs[n - 1] = -t.dot(&(&v - start));
            let delta = m.lu().solve(&rhs)?;
            v += delta;
            if v.iter().any(|x| !x.is_finite()) {
                return None;
            }
        }
        None
    }
}

/// Arbitrage by following the equalizer dynamics to the consistent set.
pub fn equalize(kind: CheckKind, offered: &[f64], weights: &[f64], cfg: &SolverConfig) -> Result<ArbitrageResult> {
    kind.check_arity("offered", offered.len())?;
    check_weights(kind, weights)?;
    cfg.validate()?;
    let omega = consistent_outcomes(kind);
    if omega.len() != kind.arity() {
        return Err(Error::Domain(format!(
            "{kind} has {} consistent outcomes for {} questions; the equalizer needs a square system",
            omega.len(),
            kind.arity()
        )));
    }
    let f = clamp_probs(offered, cfg.prob_clamp_eps)?;
    let curve = Curve { omega, offered: &f, weights };

    let mut u = DVector::from_iterator(f.len(), f.iter().map(|&p| logit(p)));
    let j0 = curve.jacobian(u.as_slice());
    let det0 = curve.normalized_det(&j0);
    if det0.abs() < cfg.stop_det_tol {
        return Ok(ArbitrageResult {
            violation: 0.0,
            arbitraged_probs: offered.to_vec(),
            method: Method::OdeEqualizer,
        });
    }
    let orientation = det0.signum();
    // Oriented determinant: positive until the consistent set is reached.
    let mut psi = det0.abs();
    let mut h = cfg.ode_step;
    let mut j = j0;
    let mut iterations = 0;

    while psi >= cfg.stop_det_tol && h >= MIN_STEP {
        iterations += 1;
        if iterations > cfg.max_iters {
            let p: Vec<f64> = u.iter().map(|&x| sigmoid(x)).collect();
            return Err(Error::SolverDidNotConverge {
                iterations: cfg.max_iters,
                best_violation: min_profit_unchecked(kind, &f, &p, weights).max(0.0),
                best_probs: p,
                residual: psi,
            });
        }
        let t = curve.tangent(&j, orientation);
        let predicted = &u + &t * h;
        let Some(v) = curve.correct(&predicted, &t).filter(|v| (v - &predicted).norm() < h) else {
            h *= 0.5;
            continue;
        };
        let jv = curve.jacobian(v.as_slice());
        let psi_v = orientation * curve.normalized_det(&jv);
        if psi_v > -cfg.stop_det_tol {
            // Still on the near side of the root; accept and estimate the remaining distance.
            let slope = (psi_v - psi) / h;
            u = v;
            j = jv;
            let grow = (2.0 * h).min(MAX_STEP);
            h = if slope < 0.0 { grow.min(1.05 * psi_v / -slope) } else { grow };
            psi = psi_v.abs();
        } else {
            // Overshot: secant step towards the root from the last accepted point.
            h *= (psi / (psi - psi_v)).clamp(0.01, 0.99);
        }
    }

    let p: Vec<f64> = u.iter().map(|&x| sigmoid(x)).collect();
    let violation = min_profit_unchecked(kind, &f, &p, weights);
    Ok(ArbitrageResult {
        violation: violation.max(0.0),
        arbitraged_probs: p,
        method: Method::OdeEqualizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arbitrage::{arbitrage_closed, outcome_profits};
    use crate::checks::is_consistent;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn negation_matches_closed_form() {
        let r = equalize(CheckKind::Negation, &[0.5, 0.6], &[1.0, 1.0], &cfg()).unwrap();
        let c = arbitrage_closed(CheckKind::Negation, &[0.5, 0.6], Some(1e-6)).unwrap();
        assert!((r.violation - c.violation).abs() < 1e-9, "{} vs {}", r.violation, c.violation);
        for (x, y) in r.arbitraged_probs.iter().zip(&c.arbitraged_probs) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn cond_matches_closed_form() {
        let f = [0.3, 0.8, 0.6];
        let r = equalize(CheckKind::Cond, &f, &[1.0; 3], &cfg()).unwrap();
        let c = arbitrage_closed(CheckKind::Cond, &f, Some(1e-6)).unwrap();
        assert!((r.violation - c.violation).abs() < 1e-9, "{} vs {}", r.violation, c.violation);
    }

    #[test]
    fn consistent_input_unchanged() {
        let r = equalize(CheckKind::Negation, &[0.3, 0.7], &[1.0, 1.0], &cfg()).unwrap();
        assert_eq!(r.violation, 0.0);
        assert_eq!(r.arbitraged_probs, vec![0.3, 0.7]);
    }

    #[test]
    fn profits_equalized_for_every_square_kind() {
        let cases: [(CheckKind, &[f64]); 5] = [
            (CheckKind::AndOr, &[0.5, 0.6, 0.1, 0.6]),
            (CheckKind::But, &[0.4, 0.5, 0.6]),
            (CheckKind::CondCond, &[0.5, 0.6, 0.7, 0.4]),
            (CheckKind::ExpEvidence, &[0.3, 0.6, 0.7, 0.2]),
            (CheckKind::Paraphrase, &[0.9, 0.2]),
        ];
        for (kind, f) in cases {
            let w = vec![1.0; f.len()];
            let r = equalize(kind, f, &w, &cfg()).unwrap();
            let s = outcome_profits(kind, f, &r.arbitraged_probs, &w);
            let spread = s.iter().cloned().fold(f64::MIN, f64::max) - s.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 1e-9, "{kind}: {s:?}");
            assert!(r.violation > 0.0);
            assert!(is_consistent(kind, &r.arbitraged_probs, 1e-8).unwrap(), "{kind}: {:?}", r.arbitraged_probs);
        }
    }

    #[test]
    fn weighted_paraphrase_is_weighted_log_odds_mean() {
        let f = [0.7, 0.4];
        let w = [3.0, 1.0];
        let r = equalize(CheckKind::Paraphrase, &f, &w, &cfg()).unwrap();
        let target = sigmoid((3.0 * logit(0.7) + logit(0.4)) / 4.0);
        assert!((r.arbitraged_probs[0] - target).abs() < 1e-8);
        assert!((r.arbitraged_probs[1] - target).abs() < 1e-8);
    }
}
