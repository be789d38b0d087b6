//! Ground-truth scoring, per-check summaries, correlation and reports.

mod calibration;
mod correlation;
mod report;

use serde::{Deserialize, Serialize};

use crate::arbitrage::{arbitrage, Method, SolverConfig};
use crate::error::{Error, Result};
use crate::frequentist::{frequentist_violation, FrequentistConfig, FrequentistResult};
use crate::model::CheckKind;

pub use calibration::{sample_truths, simulate_calibration, simulated_tuple, CalibrationReport, MetricRate};
pub use correlation::{correlate, CorrelationMatrix, CorrelationRow, ForecasterResult};
pub use report::{build_report, render_table, AggregateReport, AggregatedMetric, AggregationMode};

/// Brier score of more than this is worse than always answering 0.5.
pub const RANDOM_BRIER: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Arbitrage,
    Frequentist,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Arbitrage, Metric::Frequentist];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Arbitrage => "arbitrage",
            Metric::Frequentist => "frequentist",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSelection {
    Arbitrage,
    Frequentist,
    #[default]
    Both,
}

impl MetricSelection {
    pub fn includes(self, m: Metric) -> bool {
        matches!(
            (self, m),
            (MetricSelection::Both, _)
                | (MetricSelection::Arbitrage, Metric::Arbitrage)
                | (MetricSelection::Frequentist, Metric::Frequentist)
        )
    }
}

/// Flagging thresholds. Arbitrage flags at or above its threshold,
/// frequentist strictly above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub arbitrage: f64,
    pub frequentist: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            arbitrage: crate::arbitrage::DEFAULT_THRESHOLD,
            frequentist: FrequentistConfig::default().threshold(),
        }
    }
}

impl Thresholds {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Arbitrage => self.arbitrage,
            Metric::Frequentist => self.frequentist,
        }
    }

    pub fn flags(&self, m: Metric, violation: f64) -> bool {
        match m {
            Metric::Arbitrage => violation >= self.arbitrage,
            Metric::Frequentist => violation > self.frequentist,
        }
    }
}

/// Rounds to six significant digits; applied to violations on output.
pub fn round_sig6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().unwrap_or(v)
}

pub(crate) mod sig6 {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(super::round_sig6(*v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageScore {
    #[serde(serialize_with = "sig6::serialize")]
    pub violation: f64,
    pub threshold: f64,
    pub flagged: bool,
    pub method: Method,
    pub arbitraged_probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentistScore {
    #[serde(serialize_with = "sig6::serialize")]
    pub violation: f64,
    pub threshold: f64,
    pub flagged: bool,
}

/// Both metrics for one forecast tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TupleScore {
    pub tuple_id: String,
    pub kind: CheckKind,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbitrage: Option<ArbitrageScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequentist: Option<FrequentistScore>,
}

impl TupleScore {
    pub fn violation(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Arbitrage => self.arbitrage.as_ref().map(|a| a.violation),
            Metric::Frequentist => self.frequentist.as_ref().map(|f| f.violation),
        }
    }
}

/// Settings shared by every tuple of a scoring run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScoringConfig {
    pub metrics: MetricSelection,
    pub thresholds: Thresholds,
    pub solver: SolverConfig,
    pub frequentist: FrequentistConfig,
}

pub fn score_tuple(tuple_id: &str, kind: CheckKind, probs: &[f64], cfg: &ScoringConfig) -> Result<TupleScore> {
    kind.check_arity("probs", probs.len())?;
    let arbitrage = if cfg.metrics.includes(Metric::Arbitrage) {
        let r = arbitrage(kind, probs, &vec![1.0; probs.len()], &cfg.solver)?;
        Some(ArbitrageScore {
            violation: r.violation,
            threshold: cfg.thresholds.arbitrage,
            flagged: cfg.thresholds.flags(Metric::Arbitrage, r.violation),
            method: r.method,
            arbitraged_probs: r.arbitraged_probs,
        })
    } else {
        None
    };
    let frequentist = if cfg.metrics.includes(Metric::Frequentist) {
        let FrequentistResult { violation, .. } = frequentist_violation(kind, probs, &cfg.frequentist)?;
        Some(FrequentistScore {
            violation,
            threshold: cfg.thresholds.frequentist,
            flagged: cfg.thresholds.flags(Metric::Frequentist, violation),
        })
    } else {
        None
    };
    Ok(TupleScore {
        tuple_id: tuple_id.to_string(),
        kind,
        probs: probs.to_vec(),
        arbitrage,
        frequentist,
    })
}

pub fn brier_score(forecast: f64, resolution: bool) -> f64 {
    let r = if resolution { 1.0 } else { 0.0 };
    (forecast - r) * (forecast - r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierEntry {
    pub question_id: String,
    pub forecast: f64,
    pub resolution: bool,
    pub brier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierSummary {
    pub n: usize,
    pub avg_brier: f64,
    pub per_question: Vec<BrierEntry>,
}

impl BrierSummary {
    /// Summary over `(question id, forecast, resolution)` triples.
    pub fn from_forecasts<I, S>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64, bool)>,
        S: Into<String>,
    {
        let per_question: Vec<BrierEntry> = items
            .into_iter()
            .map(|(id, forecast, resolution)| BrierEntry {
                question_id: id.into(),
                forecast,
                resolution,
                brier: brier_score(forecast, resolution),
            })
            .collect();
        if per_question.is_empty() {
            return Err(Error::EmptyInput("no resolved forecasts"));
        }
        let n = per_question.len();
        let avg_brier = per_question.iter().map(|e| e.brier).sum::<f64>() / n as f64;
        Ok(Self { n, avg_brier, per_question })
    }
}

/// Average violation and violation rate of one check under one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub kind: CheckKind,
    pub metric: Metric,
    #[serde(serialize_with = "sig6::serialize")]
    pub avg_violation: f64,
    pub frac_violated: f64,
    pub n_tuples: usize,
    pub threshold: f64,
}

pub fn summarize_check(kind: CheckKind, metric: Metric, violations: &[f64], thresholds: &Thresholds) -> Result<CheckSummary> {
    if violations.is_empty() {
        return Err(Error::EmptyInput("no violations to summarize"));
    }
    if let Some(v) = violations.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("violations must be non-negative, got {v}")));
    }
    let n = violations.len();
    let flagged = violations.iter().filter(|&&v| thresholds.flags(metric, v)).count();
    Ok(CheckSummary {
        kind,
        metric,
        avg_violation: violations.iter().sum::<f64>() / n as f64,
        frac_violated: flagged as f64 / n as f64,
        n_tuples: n,
        threshold: thresholds.get(metric),
    })
}

/// Sample Pearson correlation.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateInput(format!("length mismatch {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateInput(format!("need at least 3 points, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Drops entries whose average Brier score is worse than random guessing.
pub fn exclude_worse_than_random<T>(entries: Vec<(T, f64)>) -> Vec<(T, f64)> {
    entries.into_iter().filter(|(_, b)| *b <= RANDOM_BRIER).collect()
}
