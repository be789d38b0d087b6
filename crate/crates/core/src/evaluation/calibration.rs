//! Null-hypothesis calibration: how often a forecaster that is consistent up
//! to sampling noise gets flagged.

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{score_tuple, sig6, Metric, ScoringConfig};
use crate::error::{Error, Result};
use crate::forecasters::{Forecaster, SimulatedConsistent, TrueProbTable, TRUE_PROB_KEY};
use crate::model::{CheckKind, CheckTuple, ForecastingQuestion};

const LO: f64 = 0.05;
const HI: f64 = 0.95;

/// True probabilities for the independent roles of a tuple, uniform on
/// `[0.05, 0.95]`; dependent roles are `None` and get derived coherently.
pub fn sample_truths(kind: CheckKind, rng: &mut impl Rng) -> Vec<Option<f64>> {
    let mut u = || Some(rng.random_range(LO..HI));
    match kind {
        CheckKind::Negation | CheckKind::Paraphrase => vec![u(), None],
        CheckKind::Consequence => {
            let (a, b) = (u().unwrap(), u().unwrap());
            vec![Some(a.min(b)), Some(a.max(b))]
        }
        CheckKind::AndOr => vec![u(), u(), None, None],
        CheckKind::And | CheckKind::Or => vec![u(), u(), None],
        CheckKind::But => {
            let (p, q) = (u().unwrap(), u().unwrap());
            vec![Some(p), Some((1.0 - p) * q), None]
        }
        CheckKind::Cond => vec![u(), u(), None],
        CheckKind::CondCond => vec![u(), u(), u(), None],
        CheckKind::ExpEvidence => vec![None, u(), u(), u()],
    }
}

/// A synthetic tuple whose questions carry their true probability in
/// metadata, so a simulated forecaster needs no separate table.
pub fn simulated_tuple(kind: CheckKind, index: usize, rng: &mut impl Rng) -> Result<CheckTuple> {
    let free = sample_truths(kind, rng);
    let date = Utc.with_ymd_and_hms(2030, 1, 1, 0, 0, 0).single().expect("valid date");
    let tuple_id = format!("sim-{}-{index:06}", kind.name().to_ascii_lowercase());
    let questions: Vec<ForecastingQuestion> = kind
        .roles()
        .iter()
        .zip(&free)
        .map(|(role, truth)| {
            let mut q = ForecastingQuestion::new(
                format!("{tuple_id}-{}", role.key()),
                format!("Synthetic {} question `{}` of {tuple_id}", kind.name(), role.key()),
                date,
            );
            if let Some(p) = truth {
                q.metadata.insert(TRUE_PROB_KEY.into(), Value::from(*p));
            }
            q
        })
        .collect();
    let mut t = CheckTuple::new(tuple_id, kind, questions);
    let truths = TrueProbTable::new().tuple_truths(&t)?;
    for (q, p) in t.questions.iter_mut().zip(truths) {
        q.metadata.insert(TRUE_PROB_KEY.into(), Value::from(p));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRate {
    pub metric: Metric,
    #[serde(serialize_with = "sig6::serialize")]
    pub avg_violation: f64,
    pub frac_flagged: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub kind: CheckKind,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub rates: Vec<MetricRate>,
}

impl CalibrationReport {
    pub fn rate(&self, m: Metric) -> Option<&MetricRate> {
        self.rates.iter().find(|r| r.metric == m)
    }
}

/// Scores `n` tuples of `kind` forecast by a noisy but consistent simulator.
pub fn simulate_calibration(kind: CheckKind, n: usize, sigma: f64, seed: u64, cfg: &ScoringConfig) -> Result<CalibrationReport> {
    if n == 0 {
        return Err(Error::EmptyInput("calibration needs at least one tuple"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let forecaster = SimulatedConsistent::new("null", sigma, TrueProbTable::new())?;
    let mut sums = [0.0; 2];
    let mut flagged = [0usize; 2];
    for i in 0..n {
        let t = simulated_tuple(kind, i, &mut rng)?;
        let a = forecaster.forecast_tuple(&t, seed)?;
        let s = score_tuple(&t.tuple_id, kind, &a.values(), cfg)?;
        for (j, m) in Metric::ALL.into_iter().enumerate() {
            if let Some(v) = s.violation(m) {
                sums[j] += v;
                flagged[j] += usize::from(cfg.thresholds.flags(m, v));
            }
        }
    }
    let rates = Metric::ALL
        .into_iter()
        .enumerate()
        .filter(|(_, m)| cfg.metrics.includes(*m))
        .map(|(j, metric)| MetricRate {
            metric,
            avg_violation: sums[j] / n as f64,
            frac_flagged: flagged[j] as f64 / n as f64,
            threshold: cfg.thresholds.get(metric),
        })
        .collect();
    Ok(CalibrationReport { kind, n, sigma, seed, rates })
}
