//! Helpers shared by the command-line tests and the acceptance suite.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use forecheck::arbitrage::{logit, sigmoid};
use forecheck::arbitrage_forecaster::QuestionChain;
use forecheck::checks::consistent_outcomes;
use forecheck::evaluation::simulated_tuple;
use forecheck::forecasters::{Forecaster, SimulatedConsistent, TrueProbTable};
use forecheck::model::timestamp;
use forecheck::{CheckKind, ForecastingQuestion, ResolutionOpt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn forecheck<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_forecheck"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

/// Synthetic tuples whose questions carry their true probabilities.
pub fn write_sim_tuples(path: &Path, kinds: &[CheckKind], per_kind: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tuples = Vec::new();
    for &k in kinds {
        for i in 0..per_kind {
            tuples.push(simulated_tuple(k, i, &mut rng).unwrap());
        }
    }
    forecheck::io::write_tuples(path, &tuples).unwrap();
}

pub fn write_json(path: &Path, v: &serde_json::Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

pub fn question(id: &str) -> ForecastingQuestion {
    ForecastingQuestion::new(id, id, timestamp::parse("2030-01-01").unwrap())
}

/// Noiseless base forecaster answering `probs[i]` for question `c{i}`, and
/// the chain `c0, c1, ...`.
pub fn chain_fixture(probs: &[f64]) -> (Arc<dyn Forecaster>, QuestionChain) {
    let mut table = TrueProbTable::new();
    let mut questions = Vec::new();
    for (i, &p) in probs.iter().enumerate() {
        let id = format!("c{i}");
        table.insert(id.clone(), p).unwrap();
        questions.push(question(&id));
    }
    let base: Arc<dyn Forecaster> = Arc::new(SimulatedConsistent::new("base", 0.0, table).unwrap());
    (base, QuestionChain { chain_id: "chain".into(), questions })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Depth-`r` forecast on `c{start}` predicted by repeated pairwise log-odds
/// averaging; `sign = -1` alternates the terms for negation chains.
pub fn moving_average(probs: &[f64], start: usize, r: usize, sign: f64) -> f64 {
    let s: f64 = (0..=r)
        .map(|i| binomial(r, i) * sign.powi(i as i32) * logit(probs[start + i]))
        .sum();
    sigmoid(s / 2f64.powi(r as i32))
}

/// Closed-form paraphrase violation.
pub fn paraphrase_violation(x: f64, y: f64) -> f64 {
    -2.0 * ((x * y).sqrt() + ((1.0 - x) * (1.0 - y)).sqrt()).ln()
}

pub fn negation_violation(x: f64, y: f64) -> f64 {
    paraphrase_violation(x, 1.0 - y)
}

/// Best guaranteed profit over a regular grid. The first pass covers the
/// whole cube at `coarse`; the second covers `±radius` around its optimum at
/// `fine`. With `coarse == fine` and `radius == 0` it is a plain grid search.
pub fn grid_oracle(kind: CheckKind, f: &[f64], coarse: f64, fine: f64, radius: f64) -> f64 {
    let omega = consistent_outcomes(kind);
    let search = |axes: &[Vec<f64>]| -> (f64, Vec<f64>) {
        let tables: Vec<Vec<(f64, f64)>> = axes
            .iter()
            .zip(f)
            .map(|(axis, &fi)| {
                axis.iter()
                    .map(|&p| (p.ln() - fi.ln(), (1.0 - p).ln() - (1.0 - fi).ln()))
                    .collect()
            })
            .collect();
        let n = axes.len();
        let mut idx = vec![0usize; n];
        let mut best = (f64::NEG_INFINITY, vec![]);
        loop {
            let g = omega
                .iter()
                .map(|w| {
                    (0..n)
                        .map(|i| match w[i] {
                            ResolutionOpt::True => tables[i][idx[i]].0,
                            ResolutionOpt::False => tables[i][idx[i]].1,
                            ResolutionOpt::NotApplicable => 0.0,
                        })
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            if g > best.0 {
                best = (g, (0..n).map(|i| axes[i][idx[i]]).collect());
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                idx[i] += 1;
                if idx[i] < axes[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
    };
    let axis = |lo: f64, hi: f64, step: f64| -> Vec<f64> {
        let lo = (lo / step).ceil().max(1.0) as i64;
        let hi = (hi / step).floor().min(1.0 / step - 1.0) as i64;
        (lo..=hi).map(|k| k as f64 * step).collect()
    };
    let coarse_axes: Vec<Vec<f64>> = f.iter().map(|_| axis(0.0, 1.0, coarse)).collect();
    let (v, center) = search(&coarse_axes);
    if radius == 0.0 {
        return v.max(0.0);
    }
    let fine_axes: Vec<Vec<f64>> = center.iter().map(|&c| axis(c - radius, c + radius, fine)).collect();
    search(&fine_axes).0.max(0.0)
}
