//! Scoring engine for the logical consistency of probabilistic forecasts.
//!
//! A tuple of forecasting questions that are logically related (a question and
//! its negation, a conjunction and its parts, a conditional chain, ...) should
//! receive forecasts that obey the matching probability law. This crate
//! measures how badly a forecaster breaks those laws with two metrics:
//!
//! - [`arbitrage`]: the guaranteed profit an arbitrageur can extract from a
//!   logarithmic market maker quoting the forecasts as prices.
//! - [`frequentist`]: a hypothesis-test statistic under a Gaussian sampling
//!   model of a coherent forecaster.
//!
//! Around the metrics sit forecaster backends ([`forecasters`]), the
//! arbitraging forecaster wrapper ([`arbitrage_forecaster`]), ground-truth
//! scoring and reporting ([`evaluation`]), and the JSONL/JSON file formats
//! ([`io`]).

pub mod arbitrage;
pub mod arbitrage_forecaster;
pub mod checks;
pub mod error;
pub mod evaluation;
pub mod forecasters;
pub mod frequentist;
pub mod io;
pub mod model;

pub use error::{Error, ErrorCategory, Result};
pub use model::{
    CheckKind, CheckTuple, ForecastAssignment, ForecastingQuestion, Probability, QuestionType,
    ResolutionOpt, Role,
};
