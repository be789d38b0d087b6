//! A forecaster that arbitrages its base forecaster's answers against
//! forecasts on related questions.
//!
//! For each configured check, the input question is placed first in a tuple
//! of related questions, the base forecaster is asked about the others, and
//! the whole tuple is arbitraged with the input's accumulated weight. Doing
//! this recursively (the base of depth `r` being the wrapper of depth
//! `r - 1`) gives the depth-`r` forecaster.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::arbitrage::{arbitrage, SolverConfig};
use crate::error::{Error, Result};
use crate::forecasters::{Forecast, Forecaster};
use crate::model::{CheckKind, CheckTuple, ForecastingQuestion};

/// Default cap on uncached base-forecaster calls per top-level query.
pub const DEFAULT_BUDGET: usize = 10_000;

pub type TransformFn = dyn Fn(&ForecastingQuestion) -> Option<CheckTuple> + Send + Sync;

/// Instantiates a check tuple whose first question is a given question.
#[derive(Clone)]
pub enum TupleSampler {
    /// Pre-built tuples keyed by the id of their first question.
    Fixture { kind: CheckKind, tuples: HashMap<String, CheckTuple> },
    /// A deterministic function of the question.
    Transform { kind: CheckKind, f: Arc<TransformFn> },
}

impl std::fmt::Debug for TupleSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Fixture { kind, tuples } => write!(f, "Fixture({kind}, {} tuples)", tuples.len()),
            Self::Transform { kind, .. } => write!(f, "Transform({kind})"),
        }
    }
}

impl TupleSampler {
    pub fn fixture(kind: CheckKind, tuples: impl IntoIterator<Item = CheckTuple>) -> Result<Self> {
        let mut map = HashMap::new();
        for t in tuples {
            if t.kind != kind {
                return Err(Error::Config(format!("{kind} sampler given a {} tuple `{}`", t.kind, t.tuple_id)));
            }
            t.validate()?;
            map.insert(t.questions[0].id.clone(), t);
        }
        Ok(Self::Fixture { kind, tuples: map })
    }

    /// Tuples from every window of `arity` consecutive questions of each
    /// chain, keyed by the window's first question.
    pub fn from_chains(kind: CheckKind, chains: &[QuestionChain]) -> Result<Self> {
        let n = kind.arity();
        let tuples = chains.iter().flat_map(|c| {
            c.questions.windows(n).enumerate().map(move |(i, w)| {
                CheckTuple::new(format!("{}:{}:{i}", c.chain_id, kind.name()), kind, w.to_vec())
            })
        });
        Self::fixture(kind, tuples)
    }

    pub fn transform(kind: CheckKind, f: impl Fn(&ForecastingQuestion) -> Option<CheckTuple> + Send + Sync + 'static) -> Self {
        Self::Transform { kind, f: Arc::new(f) }
    }

    pub fn kind(&self) -> CheckKind {
        match self {
            Self::Fixture { kind, .. } | Self::Transform { kind, .. } => *kind,
        }
    }

    pub fn sample(&self, q: &ForecastingQuestion) -> Result<CheckTuple> {
        let kind = self.kind();
        let failure = || Error::SamplerFailure { kind, question_id: q.id.clone() };
        let t = match self {
            Self::Fixture { tuples, .. } => tuples.get(&q.id).cloned(),
            Self::Transform { f, .. } => f(q),
        }
        .ok_or_else(failure)?;
        if t.kind != kind || t.questions.first().map(|x| x.id.as_str()) != Some(q.id.as_str()) {
            return Err(failure());
        }
        t.validate()?;
        Ok(t)
    }
}

/// Ordered sequence of related questions, e.g. `q, T(q), T(T(q)), ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionChain {
    pub chain_id: String,
    pub questions: Vec<ForecastingQuestion>,
}

/// Reads a JSONL file of question chains.
pub fn load_chains(path: &Path) -> Result<Vec<QuestionChain>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let source_name = path.display().to_string();
    let mut chains = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let chain = serde_json::from_str(&line).map_err(|e| Error::Parse {
            source_name: source_name.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        chains.push(chain);
    }
    Ok(chains)
}

/// One arbitrage step of the wrapper, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub kind: CheckKind,
    pub weights: Vec<f64>,
    pub offered: Vec<f64>,
    pub arbitraged: Vec<f64>,
}

/// Per-query state: memoized forecasts by `(question id, depth)` and the
/// count of base-forecaster calls made.
struct Session {
    memo: Mutex<HashMap<(String, usize), f64>>,
    base_calls: AtomicUsize,
}

pub struct ArbitrageForecaster {
    id: String,
    base: Arc<dyn Forecaster>,
    checks: Vec<TupleSampler>,
    depth: usize,
    solver: SolverConfig,
    budget: usize,
}

impl ArbitrageForecaster {
    pub fn new(base: Arc<dyn Forecaster>, checks: Vec<TupleSampler>, depth: usize) -> Result<Self> {
        if checks.is_empty() {
            return Err(Error::Config("an arbitrage forecaster needs at least one check".into()));
        }
        let id = format!("{}_arb{}", base.id(), depth);
        Ok(Self {
            id,
            base,
            checks,
            depth,
            solver: SolverConfig::default(),
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Forecast of the depth-`depth` wrapper.
    pub fn forecast_at_depth(&self, q: &ForecastingQuestion, depth: usize, seed: u64) -> Result<f64> {
        let session = Session { memo: Mutex::new(HashMap::new()), base_calls: AtomicUsize::new(0) };
        self.recurse(&session, q, depth, seed, None)
    }

    /// Depth-1 forecast together with every arbitrage step taken.
    pub fn forecast_with_steps(&self, q: &ForecastingQuestion, seed: u64) -> Result<(f64, Vec<Step>)> {
        let session = Session { memo: Mutex::new(HashMap::new()), base_calls: AtomicUsize::new(0) };
        let mut steps = Vec::new();
        let p = self.recurse(&session, q, 1, seed, Some(&mut steps))?;
        Ok((p, steps))
    }

    fn base_forecast(&self, session: &Session, q: &ForecastingQuestion, seed: u64) -> Result<f64> {
        let calls = session.base_calls.fetch_add(1, Ordering::SeqCst) + 1;
        if calls > self.budget {
            return Err(Error::BudgetExceeded { cap: self.budget });
        }
        Ok(self.base.forecast(q, seed)?.prob)
    }

    fn recurse(
        &self,
        session: &Session,
        q: &ForecastingQuestion,
        depth: usize,
        seed: u64,
        mut steps: Option<&mut Vec<Step>>,
    ) -> Result<f64> {
        let key = (q.id.clone(), depth);
        if steps.is_none() {
            if let Some(&p) = session.memo.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
                return Ok(p);
            }
        }
        let p = if depth == 0 {
            self.base_forecast(session, q, seed)?
        } else {
            let mut p = self.recurse(session, q, depth - 1, seed, None)?;
            let mut w = 1.0;
            for sampler in &self.checks {
                let t = sampler.sample(q)?;
                let mut offered = Vec::with_capacity(t.questions.len());
                offered.push(p);
                for x in &t.questions[1..] {
                    offered.push(self.recurse(session, x, depth - 1, seed, None)?);
                }
                let mut weights = vec![1.0; offered.len()];
                weights[0] = w;
                let r = arbitrage(t.kind, &offered, &weights, &self.solver)?;
                p = r.arbitraged_probs[0];
                if let Some(s) = steps.as_deref_mut() {
                    s.push(Step { kind: t.kind, weights, offered, arbitraged: r.arbitraged_probs });
                }
                w += (t.questions.len() - 1) as f64;
            }
            p
        };
        session.memo.lock().unwrap_or_else(|e| e.into_inner()).insert(key, p);
        Ok(p)
    }
}

impl Forecaster for ArbitrageForecaster {
    fn id(&self) -> &str {
        &self.id
    }

    fn forecast(&self, q: &ForecastingQuestion, seed: u64) -> Result<Forecast> {
        Ok(Forecast::bare(self.forecast_at_depth(q, self.depth, seed)?))
    }
}
