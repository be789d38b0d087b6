//! Recursive arbitrage forecasters on deterministic question chains.

use std::sync::Arc;

use chrono::{TimeZone, Utc};
use forecheck::arbitrage::{arbitrage_default, logit, sigmoid};
use forecheck::arbitrage_forecaster::{ArbitrageForecaster, QuestionChain, TupleSampler};
use forecheck::forecasters::{Forecaster, SimulatedConsistent, TrueProbTable};
use forecheck::{CheckKind, CheckTuple, ForecastingQuestion};
use proptest::prelude::*;

fn q(id: &str) -> ForecastingQuestion {
    ForecastingQuestion::new(id, id, Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).unwrap())
}

/// A noiseless base forecaster reading `probs[i]` for question `c{i}`, and
/// the chain `c0, c1, ...`.
fn chain_fixture(probs: &[f64]) -> (Arc<dyn Forecaster>, QuestionChain) {
    let mut table = TrueProbTable::new();
    let mut questions = Vec::new();
    for (i, &p) in probs.iter().enumerate() {
        let id = format!("c{i}");
        table.insert(id.clone(), p).unwrap();
        questions.push(q(&id));
    }
    let base: Arc<dyn Forecaster> = Arc::new(SimulatedConsistent::new("base", 0.0, table).unwrap());
    (base, QuestionChain { chain_id: "chain".into(), questions })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Depth-`r` forecast on `c{start}` predicted by repeated pairwise log-odds
/// averaging; `sign` flips every other term for negation chains.
fn moving_average(probs: &[f64], start: usize, r: usize, sign: f64) -> f64 {
    let s: f64 = (0..=r)
        .map(|i| binomial(r, i) * sign.powi(i as i32) * logit(probs[start + i]))
        .sum();
    sigmoid(s / 2f64.powi(r as i32))
}

/// Paraphrase violation in closed form, used as an oracle.
fn paraphrase_violation(x: f64, y: f64) -> f64 {
    -2.0 * ((x * y).sqrt() + ((1.0 - x) * (1.0 - y)).sqrt()).ln()
}

fn negation_violation(x: f64, y: f64) -> f64 {
    paraphrase_violation(x, 1.0 - y)
}

#[test]
fn paraphrase_chain_is_binomial_average() {
    let probs = [0.3, 0.45, 0.7, 0.8, 0.62, 0.55];
    let (base, chain) = chain_fixture(&probs);
    let sampler = TupleSampler::from_chains(CheckKind::Paraphrase, std::slice::from_ref(&chain)).unwrap();
    let f = ArbitrageForecaster::new(base, vec![sampler], 4).unwrap();
    for r in 0..=4 {
        for start in 0..probs.len() - r {
            let got = f.forecast_at_depth(&chain.questions[start], r, 0).unwrap();
            let want = moving_average(&probs, start, r, 1.0);
            assert!((got - want).abs() < 1e-9, "r={r} start={start}: {got} vs {want}");
        }
    }
}

#[test]
fn negation_violation_strictly_decreases() {
    // Every link after the first is already consistent, so each level of
    // recursion halves the log-odds gap of the first pair.
    let probs = [0.5, 0.9, 0.1, 0.9, 0.1, 0.9];
    let (base, chain) = chain_fixture(&probs);
    let sampler = TupleSampler::from_chains(CheckKind::Negation, std::slice::from_ref(&chain)).unwrap();
    let f = ArbitrageForecaster::new(base, vec![sampler], 4).unwrap();
    let mut prev = f64::INFINITY;
    for r in 0..=4 {
        let x = f.forecast_at_depth(&chain.questions[0], r, 0).unwrap();
        let y = f.forecast_at_depth(&chain.questions[1], r, 0).unwrap();
        assert!((x - moving_average(&probs, 0, r, -1.0)).abs() < 1e-9);
        assert!((y - moving_average(&probs, 1, r, -1.0)).abs() < 1e-9);
        let v = arbitrage_default(CheckKind::Negation, &[x, y]).unwrap().violation;
        assert!((v - negation_violation(x, y)).abs() < 1e-9, "r={r}: {v}");
        assert!(v < prev, "r={r}: {v} !< {prev}");
        prev = v;
    }
}

#[test]
fn involutive_negation_becomes_consistent_at_depth_one() {
    let mut table = TrueProbTable::new();
    table.insert("a", 0.5).unwrap();
    table.insert("not-a", 0.9).unwrap();
    let base: Arc<dyn Forecaster> = Arc::new(SimulatedConsistent::new("base", 0.0, table).unwrap());
    let sampler = TupleSampler::transform(CheckKind::Negation, |x| {
        let other = if x.id == "a" { "not-a" } else { "a" };
        Some(CheckTuple::new(format!("neg-{}", x.id), CheckKind::Negation, vec![x.clone(), q(other)]))
    });
    let f = ArbitrageForecaster::new(base, vec![sampler], 1).unwrap();
    let v0 = negation_violation(0.5, 0.9);
    let x = f.forecast(&q("a"), 0).unwrap().prob;
    let y = f.forecast(&q("not-a"), 0).unwrap().prob;
    let v1 = arbitrage_default(CheckKind::Negation, &[x, y]).unwrap().violation;
    assert!(v0 > 0.2);
    assert!(v1 < 1e-12, "{v1}");
}

#[test]
fn arbitraged_forecasts_need_not_be_consistent() {
    let probs = [0.5, 0.6, 0.7];
    let (base, chain) = chain_fixture(&probs);
    let sampler = TupleSampler::from_chains(CheckKind::Paraphrase, std::slice::from_ref(&chain)).unwrap();
    let f = ArbitrageForecaster::new(base, vec![sampler], 1).unwrap();
    let x = f.forecast(&chain.questions[0], 0).unwrap().prob;
    let y = f.forecast(&chain.questions[1], 0).unwrap().prob;
    assert!((x - moving_average(&probs, 0, 1, 1.0)).abs() < 1e-12);
    assert!((y - moving_average(&probs, 1, 1, 1.0)).abs() < 1e-12);
    let v = arbitrage_default(CheckKind::Paraphrase, &[x, y]).unwrap().violation;
    assert!((v - paraphrase_violation(x, y)).abs() < 1e-12);
    assert!(v > 1e-4, "{v}");
}

#[test]
fn id_encodes_depth() {
    let (base, chain) = chain_fixture(&[0.5, 0.6]);
    let sampler = TupleSampler::from_chains(CheckKind::Paraphrase, &[chain]).unwrap();
    let f = ArbitrageForecaster::new(base, vec![sampler], 3).unwrap();
    assert_eq!(f.id(), "base_arb3");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_chains_follow_binomial_average(probs in proptest::collection::vec(0.02f64..0.98, 5), r in 0usize..=4) {
        let (base, chain) = chain_fixture(&probs);
        let sampler = TupleSampler::from_chains(CheckKind::Paraphrase, std::slice::from_ref(&chain)).unwrap();
        let f = ArbitrageForecaster::new(base, vec![sampler], r).unwrap();
        let got = f.forecast(&chain.questions[0], 0).unwrap().prob;
        prop_assert!((got - moving_average(&probs, 0, r, 1.0)).abs() < 1e-9);
    }
}
