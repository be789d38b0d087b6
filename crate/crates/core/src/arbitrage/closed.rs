//! Closed-form arbitrage for Negation, Paraphrase and Cond.

use super::{clamp_probs, sigmoid, ArbitrageResult, Method};
use crate::error::{Error, Result};
use crate::model::CheckKind;

/// Unit-weight arbitrage by closed-form expressions.
pub fn arbitrage_closed(kind: CheckKind, offered: &[f64], prob_clamp_eps: Option<f64>) -> Result<ArbitrageResult> {
    if !matches!(kind, CheckKind::Negation | CheckKind::Paraphrase | CheckKind::Cond) {
        return Err(Error::UnsupportedKind(kind));
    }
    kind.check_arity("offered", offered.len())?;
    let f = clamp_probs(offered, prob_clamp_eps)?;
    let (violation, arbitraged_probs) = match kind {
        CheckKind::Negation => {
            let (a, b) = (f[0], f[1]);
            let x = (a * (1.0 - b)).sqrt();
            let y = ((1.0 - a) * b).sqrt();
            let p = x / (x + y);
            (-2.0 * (x + y).ln(), vec![p, 1.0 - p])
        }
        CheckKind::Paraphrase => {
            let (a, b) = (f[0], f[1]);
            let x = (a * b).sqrt();
            let y = ((1.0 - a) * (1.0 - b)).sqrt();
            let p = x / (x + y);
            (-2.0 * (x + y).ln(), vec![p, p])
        }
        _ => {
            let (a, b, c) = (f[0], f[1], f[2]);
            let big_a = (1.0 - a) / (a * (1.0 - b));
            let big_b = (1.0 - b) * (1.0 - c) / (b * c);
            let r1 = (big_b / (big_a + 1.0)).sqrt();
            let r2 = (big_b * (big_a + 1.0)).sqrt();
            let p = (1.0 + r1) / (1.0 + r2);
            let q = 1.0 / (1.0 + r1);
            let pq = 1.0 / (1.0 + r2);
            let v = -2.0 * ((a * b * c).sqrt() + ((1.0 - a * b) * (1.0 - c)).sqrt()).ln();
            (v, vec![p, q, pq])
        }
    };
    Ok(ArbitrageResult {
        violation: violation.max(0.0),
        arbitraged_probs,
        method: Method::ClosedForm,
    })
}

/// Arbitrage of `n >= 2` mutual paraphrases: every price moves to the mean
/// of the offered prices in log-odds space.
pub fn arbitrage_paraphrase_multi(offered: &[f64], prob_clamp_eps: Option<f64>) -> Result<ArbitrageResult> {
    let n = offered.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least two paraphrases, got {n}")));
    }
    let f = clamp_probs(offered, prob_clamp_eps)?;
    let nf = n as f64;
    let mean_log_p = f.iter().map(|p| p.ln()).sum::<f64>() / nf;
    let mean_log_q = f.iter().map(|p| (-p).ln_1p()).sum::<f64>() / nf;
    let p = sigmoid(mean_log_p - mean_log_q);
    let violation = -nf * (mean_log_p.exp() + mean_log_q.exp()).ln();
    Ok(ArbitrageResult {
        violation: violation.max(0.0),
        arbitraged_probs: vec![p; n],
        method: Method::ClosedForm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arbitrage::min_profit;

    const EPS: Option<f64> = Some(1e-6);

    #[test]
    fn negation_canonical_values() {
        let v = arbitrage_closed(CheckKind::Negation, &[0.5, 0.6], EPS).unwrap().violation;
        let oracle = -2.0 * ((0.5f64 * 0.4).sqrt() + (0.5f64 * 0.6).sqrt()).ln();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.0102).abs() < 1e-4, "{v}");
        let v = arbitrage_closed(CheckKind::Negation, &[0.5, 0.51], EPS).unwrap().violation;
        assert!((5e-5..2e-4).contains(&v), "{v}");
    }

    #[test]
    fn negation_argmax_attains_violation() {
        let r = arbitrage_closed(CheckKind::Negation, &[0.5, 0.6], EPS).unwrap();
        let g = min_profit(CheckKind::Negation, &[0.5, 0.6], &r.arbitraged_probs, &[1.0, 1.0], EPS).unwrap();
        assert!((g - r.violation).abs() < 1e-12);
        assert!((r.arbitraged_probs[0] + r.arbitraged_probs[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn paraphrase_figure() {
        let r = arbitrage_closed(CheckKind::Paraphrase, &[0.7, 0.4], EPS).unwrap();
        assert!((r.arbitraged_probs[0] - 0.555).abs() < 1e-3);
        assert!((r.violation - 0.095).abs() < 1e-3);
    }

    #[test]
    fn cond_consistent_is_fixed_point() {
        let r = arbitrage_closed(CheckKind::Cond, &[0.8, 0.5, 0.4], EPS).unwrap();
        assert!(r.violation.abs() < 1e-12);
        for (x, y) in r.arbitraged_probs.iter().zip([0.8, 0.5, 0.4]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cond_argmax_attains_violation() {
        let f = [0.3, 0.8, 0.6];
        let r = arbitrage_closed(CheckKind::Cond, &f, EPS).unwrap();
        let g = min_profit(CheckKind::Cond, &f, &r.arbitraged_probs, &[1.0; 3], EPS).unwrap();
        assert!((g - r.violation).abs() < 1e-10, "{g} vs {}", r.violation);
        let p = &r.arbitraged_probs;
        assert!((p[0] * p[1] - p[2]).abs() < 1e-12);
    }

    #[test]
    fn other_kinds_unsupported() {
        assert!(matches!(
            arbitrage_closed(CheckKind::And, &[0.1, 0.2, 0.3], EPS),
            Err(Error::UnsupportedKind(CheckKind::And))
        ));
    }

    #[test]
    fn multi_matches_pairwise() {
        let two = arbitrage_paraphrase_multi(&[0.7, 0.4], EPS).unwrap();
        let pair = arbitrage_closed(CheckKind::Paraphrase, &[0.7, 0.4], EPS).unwrap();
        assert!((two.violation - pair.violation).abs() < 1e-14);
        assert!((two.arbitraged_probs[0] - pair.arbitraged_probs[0]).abs() < 1e-14);
    }

    #[test]
    fn multi_three_way() {
        let r = arbitrage_paraphrase_multi(&[0.5, 0.6, 0.7], EPS).unwrap();
        let delta = (1.0f64 * 1.5 * (7.0 / 3.0)).powf(1.0 / 3.0);
        assert!((r.arbitraged_probs[0] - delta / (delta + 1.0)).abs() < 1e-14);
        let r = arbitrage_paraphrase_multi(&[0.5, 0.5, 0.5], EPS).unwrap();
        assert_eq!(r.arbitraged_probs[0], 0.5);
        assert!(r.violation.abs() < 1e-15);
    }
}
