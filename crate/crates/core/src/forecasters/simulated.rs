//! Simulated forecasters around a table of true probabilities.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{assignment, Backend, Forecast, Forecaster, ForecasterSpec};
use crate::arbitrage::{logit, sigmoid};
use crate::error::{Error, Result};
use crate::model::{CheckKind, CheckTuple, ForecastAssignment, ForecastingQuestion};

/// Simulated outputs never leave `[CLAMP, 1 - CLAMP]`.
pub const CLAMP: f64 = 1e-3;

/// Metadata key consulted when a question has no table entry.
pub const TRUE_PROB_KEY: &str = "true_prob";

/// The simulator's world model: true probability per question id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrueProbTable {
    entries: HashMap<String, f64>,
}

impl TrueProbTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        self.entries.insert(id.into(), p);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("true probabilities must be a JSON object of id -> probability".into()))?;
        let mut table = Self::new();
        for (id, v) in obj {
            let p = v
                .as_f64()
                .ok_or_else(|| Error::Config(format!("true probability for `{id}` is not a number")))?;
            table.insert(id.clone(), p)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    /// Table from `true_probs` (inline object) and/or `true_probs_path` params.
    pub fn from_spec(spec: &ForecasterSpec) -> Result<Self> {
        let mut table = match spec.str_param("true_probs_path")? {
            Some(path) => Self::load(Path::new(path))?,
            None => Self::new(),
        };
        if let Some(inline) = spec.params.get("true_probs") {
            table.entries.extend(Self::from_json(inline)?.entries);
        }
        Ok(table)
    }

    /// True probability of a question: table entry first, then the question's
    /// `true_prob` metadata.
    pub fn lookup(&self, q: &ForecastingQuestion) -> Option<f64> {
        self.entries
            .get(&q.id)
            .copied()
            .or_else(|| q.metadata.get(TRUE_PROB_KEY).and_then(Value::as_f64))
            .filter(|p| (0.0..=1.0).contains(p))
    }

    pub fn get(&self, q: &ForecastingQuestion) -> Result<f64> {
        self.lookup(q).ok_or_else(|| Error::MissingTrueProb(q.id.clone()))
    }

    /// True probabilities for every role of a tuple. Composite roles without
    /// an entry are derived coherently from the others, treating distinct
    /// base questions as independent.
    pub fn tuple_truths(&self, t: &CheckTuple) -> Result<Vec<f64>> {
        let known: Vec<Option<f64>> = t.questions.iter().map(|q| self.lookup(q)).collect();
        let missing = |i: usize| {
            Error::Coordinate {
                index: i,
                source: Box::new(Error::MissingTrueProb(t.questions[i].id.clone())),
            }
        };
        let need = |i: usize| known[i].ok_or_else(|| missing(i));
        let fill = |i: usize, derived: f64| known[i].unwrap_or(derived.clamp(0.0, 1.0));
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };

        let out = match t.kind {
            CheckKind::Negation => match (known[0], known[1]) {
                (Some(p), np) => vec![p, np.unwrap_or(1.0 - p)],
                (None, Some(np)) => vec![1.0 - np, np],
                (None, None) => return Err(missing(0)),
            },
            CheckKind::Paraphrase => match (known[0], known[1]) {
                (Some(p), q) => vec![p, q.unwrap_or(p)],
                (None, Some(q)) => vec![q, q],
                (None, None) => return Err(missing(0)),
            },
            CheckKind::Consequence => vec![need(0)?, need(1)?],
            CheckKind::AndOr => {
                let (p, q) = (need(0)?, need(1)?);
                vec![p, q, fill(2, p * q), fill(3, p + q - p * q)]
            }
            CheckKind::And => {
                let (p, q) = (need(0)?, need(1)?);
                vec![p, q, fill(2, p * q)]
            }
            CheckKind::Or => {
                let (p, q) = (need(0)?, need(1)?);
                vec![p, q, fill(2, p + q - p * q)]
            }
            CheckKind::But => {
                let p = need(0)?;
                match (known[1], known[2]) {
                    (Some(npq), por) => vec![p, npq, por.unwrap_or((p + npq).min(1.0))],
                    (None, Some(por)) => vec![p, (por - p).max(0.0), por],
                    (None, None) => return Err(missing(1)),
                }
            }
            CheckKind::Cond => {
                let p = need(0)?;
                match (known[1], known[2]) {
                    (Some(qp), pq) => vec![p, qp, pq.unwrap_or(p * qp)],
                    (None, Some(pq)) => vec![p, ratio(pq, p).min(1.0), pq],
                    (None, None) => return Err(missing(1)),
                }
            }
            CheckKind::CondCond => {
                let p = need(0)?;
                match (known[1], known[2], known[3]) {
                    (Some(q), Some(r), pqr) => vec![p, q, r, pqr.unwrap_or(p * q * r)],
                    (None, Some(r), Some(pqr)) => vec![p, ratio(pqr, p * r).min(1.0), r, pqr],
                    (Some(q), None, Some(pqr)) => vec![p, q, ratio(pqr, p * q).min(1.0), pqr],
                    (None, ..) => return Err(missing(1)),
                    (Some(_), None, None) => return Err(missing(2)),
                }
            }
            CheckKind::ExpEvidence => {
                let q = need(1)?;
                match (known[0], known[2], known[3]) {
                    (p, Some(pq), Some(pnq)) => vec![p.unwrap_or(pq * q + pnq * (1.0 - q)), q, pq, pnq],
                    (Some(p), pq, pnq) => vec![p, q, pq.unwrap_or(p), pnq.unwrap_or(p)],
                    (None, None, _) => return Err(missing(2)),
                    (None, Some(_), None) => return Err(missing(3)),
                }
            }
        };
        Ok(out)
    }
}

/// Deterministic RNG for one (forecaster, question, seed) triple.
pub(crate) fn rng_for(backend: Backend, forecaster_id: &str, question_id: &str, seed: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(backend.as_str().as_bytes());
    h.update([0]);
    h.update(forecaster_id.as_bytes());
    h.update([0]);
    h.update(question_id.as_bytes());
    h.update([0]);
    h.update(seed.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

fn clamp_output(p: f64) -> f64 {
    p.clamp(CLAMP, 1.0 - CLAMP)
}

/// Truth plus Gaussian noise of standard deviation `σ√(p(1−p))`.
#[derive(Debug, Clone)]
pub struct SimulatedConsistent {
    pub id: String,
    pub sigma: f64,
    pub table: TrueProbTable,
}

impl SimulatedConsistent {
    pub fn new(id: impl Into<String>, sigma: f64, table: TrueProbTable) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self { id: id.into(), sigma, table })
    }

    pub fn from_spec(spec: &ForecasterSpec) -> Result<Self> {
        let sigma = spec.f64_param("sigma")?.unwrap_or(0.05);
        Self::new(spec.id.clone(), sigma, TrueProbTable::from_spec(spec)?)
    }

    fn draw(&self, question_id: &str, truth: f64, seed: u64) -> f64 {
        let sd = self.sigma * (truth * (1.0 - truth)).sqrt();
        if sd == 0.0 {
            return clamp_output(truth);
        }
        let mut rng = rng_for(Backend::SimulatedConsistent, &self.id, question_id, seed);
        let eps = Normal::new(0.0, sd).expect("finite positive sd").sample(&mut rng);
        clamp_output(truth + eps)
    }
}

impl Forecaster for SimulatedConsistent {
    fn id(&self) -> &str {
        &self.id
    }

    fn forecast(&self, q: &ForecastingQuestion, seed: u64) -> Result<Forecast> {
        let truth = self.table.get(q)?;
        Ok(Forecast::bare(self.draw(&q.id, truth, seed)))
    }

    fn forecast_tuple(&self, t: &CheckTuple, seed: u64) -> Result<ForecastAssignment> {
        t.validate()?;
        let truths = self.table.tuple_truths(t)?;
        let forecasts = t
            .questions
            .iter()
            .zip(truths)
            .map(|(q, truth)| Forecast::bare(self.draw(&q.id, truth, seed)))
            .collect();
        assignment(&self.id, t, forecasts)
    }
}

/// The same probability for every question.
#[derive(Debug, Clone)]
pub struct ConstantForecaster {
    pub id: String,
    pub p: f64,
}

impl ConstantForecaster {
    pub fn from_spec(spec: &ForecasterSpec) -> Result<Self> {
        let p = spec.required_f64("constant_p")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Self { id: spec.id.clone(), p })
    }
}

impl Forecaster for ConstantForecaster {
    fn id(&self) -> &str {
        &self.id
    }

    fn forecast(&self, _q: &ForecastingQuestion, _seed: u64) -> Result<Forecast> {
        Ok(Forecast::bare(self.p))
    }
}

/// Truth perturbed by Gaussian noise of scale `sigma` in log-odds space.
#[derive(Debug, Clone)]
pub struct LogOddsNoiseForecaster {
    pub id: String,
    pub sigma: f64,
    pub table: TrueProbTable,
}

impl LogOddsNoiseForecaster {
    pub fn from_spec(spec: &ForecasterSpec) -> Result<Self> {
        let sigma = spec.required_f64("sigma")?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Config(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self {
            id: spec.id.clone(),
            sigma,
            table: TrueProbTable::from_spec(spec)?,
        })
    }

    fn draw(&self, question_id: &str, truth: f64, seed: u64) -> f64 {
        let truth = clamp_output(truth);
        if self.sigma == 0.0 {
            return truth;
        }
        let mut rng = rng_for(Backend::LogoddsNoise, &self.id, question_id, seed);
        let noise = Normal::new(0.0, self.sigma).expect("finite positive sigma").sample(&mut rng);
        clamp_output(sigmoid(logit(truth) + noise))
    }
}

impl Forecaster for LogOddsNoiseForecaster {
    fn id(&self) -> &str {
        &self.id
    }

    fn forecast(&self, q: &ForecastingQuestion, seed: u64) -> Result<Forecast> {
        let truth = self.table.get(q)?;
        Ok(Forecast::bare(self.draw(&q.id, truth, seed)))
    }

    fn forecast_tuple(&self, t: &CheckTuple, seed: u64) -> Result<ForecastAssignment> {
        t.validate()?;
        let truths = self.table.tuple_truths(t)?;
        let forecasts = t
            .questions
            .iter()
            .zip(truths)
            .map(|(q, truth)| Forecast::bare(self.draw(&q.id, truth, seed)))
            .collect();
        assignment(&self.id, t, forecasts)
    }
}
