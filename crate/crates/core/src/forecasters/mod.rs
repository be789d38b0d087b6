//! Forecaster abstraction and backends.
//!
//! Simulated backends draw noisy forecasts around a table of true
//! probabilities and are pure functions of `(spec, question id, seed)`. The
//! HTTP backend queries a chat-completion endpoint.

mod http;
pub mod prompts;
mod simulated;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{CheckTuple, ForecastAssignment, ForecastingQuestion, Probability};

pub use http::{HttpConfig, HttpForecaster, PromptStyle};
pub use simulated::{ConstantForecaster, LogOddsNoiseForecaster, SimulatedConsistent, TrueProbTable, CLAMP, TRUE_PROB_KEY};

/// One elicited forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub prob: f64,
    pub reasoning: Option<String>,
}

impl Forecast {
    pub fn bare(prob: f64) -> Self {
        Self { prob, reasoning: None }
    }
}

pub trait Forecaster: Send + Sync {
    fn id(&self) -> &str;

    fn forecast(&self, q: &ForecastingQuestion, seed: u64) -> Result<Forecast>;

    /// Forecasts every question of the tuple independently, in role order.
    fn forecast_tuple(&self, t: &CheckTuple, seed: u64) -> Result<ForecastAssignment> {
        t.validate()?;
        let forecasts = t
            .questions
            .iter()
            .enumerate()
            .map(|(index, q)| {
                self.forecast(q, seed).map_err(|e| Error::Coordinate {
                    index,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        assignment(self.id(), t, forecasts)
    }
}

pub(crate) fn assignment(forecaster_id: &str, t: &CheckTuple, forecasts: Vec<Forecast>) -> Result<ForecastAssignment> {
    let probs = forecasts
        .iter()
        .map(|f| Probability::new(f.prob))
        .collect::<Result<Vec<_>>>()?;
    let reasoning = forecasts
        .iter()
        .any(|f| f.reasoning.is_some())
        .then(|| forecasts.into_iter().map(|f| f.reasoning).collect());
    Ok(ForecastAssignment {
        tuple_id: t.tuple_id.clone(),
        probs,
        forecaster_id: forecaster_id.to_string(),
        reasoning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    SimulatedConsistent,
    Constant,
    LogoddsNoise,
    HttpLlm,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::SimulatedConsistent => "simulated_consistent",
            Backend::Constant => "constant",
            Backend::LogoddsNoise => "logodds_noise",
            Backend::HttpLlm => "http_llm",
        }
    }
}

/// Declarative forecaster description, typically loaded from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub id: String,
    pub backend: Backend,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ForecasterSpec {
    pub fn new(id: impl Into<String>, backend: Backend) -> Self {
        Self {
            id: id.into(),
            backend,
            params: Map::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub(crate) fn f64_param(&self, key: &str) -> Result<Option<f64>> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Error::Config(format!("forecaster `{}`: param `{key}` must be a number", self.id))),
        }
    }

    pub(crate) fn u64_param(&self, key: &str) -> Result<Option<u64>> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| {
                Error::Config(format!("forecaster `{}`: param `{key}` must be a non-negative integer", self.id))
            }),
        }
    }

    pub(crate) fn str_param(&self, key: &str) -> Result<Option<&str>> {
        match self.params.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(Error::Config(format!("forecaster `{}`: param `{key}` must be a string", self.id))),
        }
    }

    pub(crate) fn required_f64(&self, key: &str) -> Result<f64> {
        self.f64_param(key)?
            .ok_or_else(|| Error::Config(format!("forecaster `{}` ({}) needs param `{key}`", self.id, self.backend.as_str())))
    }

    /// Instantiates the backend.
    pub fn build(&self) -> Result<Box<dyn Forecaster>> {
        Ok(match self.backend {
            Backend::SimulatedConsistent => Box::new(SimulatedConsistent::from_spec(self)?),
            Backend::Constant => Box::new(ConstantForecaster::from_spec(self)?),
            Backend::LogoddsNoise => Box::new(LogOddsNoiseForecaster::from_spec(self)?),
            Backend::HttpLlm => Box::new(HttpForecaster::from_spec(self)?),
        })
    }
}

/// Single forecast from a spec.
pub fn forecast(spec: &ForecasterSpec, q: &ForecastingQuestion, seed: u64) -> Result<Forecast> {
    spec.build()?.forecast(q, seed)
}

/// Independent forecasts for every question of a tuple.
pub fn forecast_tuple(spec: &ForecasterSpec, t: &CheckTuple, seed: u64) -> Result<ForecastAssignment> {
    spec.build()?.forecast_tuple(t, seed)
}
