//! Per-forecaster consistency report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{sig6, summarize_check, BrierSummary, CheckSummary, Metric, Thresholds, TupleScore};
use crate::error::{Error, Result};
use crate::model::CheckKind;

/// How the "Aggregated" row combines checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// Unweighted mean of the per-check averages.
    #[default]
    PerCheckMean,
    /// Mean over all scored tuples regardless of check.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedMetric {
    pub metric: Metric,
    #[serde(serialize_with = "sig6::serialize")]
    pub avg_violation: f64,
    pub n_checks: usize,
    pub n_tuples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub forecaster_id: String,
    pub aggregation: AggregationMode,
    pub rows: Vec<CheckSummary>,
    pub aggregated: Vec<AggregatedMetric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brier: Option<BrierSummary>,
}

impl AggregateReport {
    pub fn row(&self, kind: CheckKind, metric: Metric) -> Option<&CheckSummary> {
        self.rows.iter().find(|r| r.kind == kind && r.metric == metric)
    }

    pub fn aggregated(&self, metric: Metric) -> Option<&AggregatedMetric> {
        self.aggregated.iter().find(|a| a.metric == metric)
    }
}

/// Summarizes scored tuples per check and metric, rows in canonical check
/// order then metric order.
pub fn build_report(
    forecaster_id: &str,
    scores: &[TupleScore],
    thresholds: &Thresholds,
    mode: AggregationMode,
    brier: Option<BrierSummary>,
) -> Result<AggregateReport> {
    let mut rows = Vec::new();
    for kind in CheckKind::ALL {
        for metric in Metric::ALL {
            let vs: Vec<f64> = scores
                .iter()
                .filter(|s| s.kind == kind)
                .filter_map(|s| s.violation(metric))
                .collect();
            if !vs.is_empty() {
                rows.push(summarize_check(kind, metric, &vs, thresholds)?);
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no scored tuples"));
    }
    let aggregated = Metric::ALL
        .into_iter()
        .filter_map(|metric| {
            let per: Vec<&CheckSummary> = rows.iter().filter(|r| r.metric == metric).collect();
            if per.is_empty() {
                return None;
            }
            let n_tuples: usize = per.iter().map(|r| r.n_tuples).sum();
            let avg_violation = match mode {
                AggregationMode::PerCheckMean => per.iter().map(|r| r.avg_violation).sum::<f64>() / per.len() as f64,
                AggregationMode::Pooled => {
                    per.iter().map(|r| r.avg_violation * r.n_tuples as f64).sum::<f64>() / n_tuples as f64
                }
            };
            Some(AggregatedMetric { metric, avg_violation, n_checks: per.len(), n_tuples })
        })
        .collect();
    Ok(AggregateReport {
        forecaster_id: forecaster_id.to_string(),
        aggregation: mode,
        rows,
        aggregated,
        brier,
    })
}

/// Plain-text table: one line per check with average violation and
/// violation rate per metric, an aggregated line, and the Brier score when
/// known.
pub fn render_table(report: &AggregateReport) -> String {
    let cell = |kind: CheckKind, m: Metric| -> (String, String) {
        match report.row(kind, m) {
            Some(r) => (format!("{:.3}", r.avg_violation), format!("{:.0}%", r.frac_violated * 100.0)),
            None => ("-".into(), "-".into()),
        }
    };
    let mut lines: Vec<[String; 5]> = vec![
        ["".into(), "Arbitrage".into(), "".into(), "Frequentist".into(), "".into()],
        ["Check".into(), "Avg".into(), "Frac".into(), "Avg".into(), "Frac".into()],
    ];
    for kind in CheckKind::ALL {
        if report.rows.iter().all(|r| r.kind != kind) {
            continue;
        }
        let (aa, af) = cell(kind, Metric::Arbitrage);
        let (fa, ff) = cell(kind, Metric::Frequentist);
        lines.push([kind.name().into(), aa, af, fa, ff]);
    }
    let agg = |m: Metric| {
        report
            .aggregated(m)
            .map(|a| format!("{:.3}", a.avg_violation))
            .unwrap_or_else(|| "-".into())
    };
    let body_end = lines.len();
    lines.push(["Aggregated".into(), agg(Metric::Arbitrage), "-".into(), agg(Metric::Frequentist), "-".into()]);

    let mut widths = [0usize; 5];
    for l in &lines {
        for (w, c) in widths.iter_mut().zip(l) {
            *w = (*w).max(c.chars().count());
        }
    }
    let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    let mut out = String::new();
    let _ = writeln!(out, "Forecaster: {}", report.forecaster_id);
    for (i, l) in lines.iter().enumerate() {
        if i == 2 || i == body_end {
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
        let mut row = format!("{:<w$}", l[0], w = widths[0]);
        for (c, w) in l.iter().zip(widths).skip(1) {
            let _ = write!(row, "  {c:>w$}");
        }
        let _ = writeln!(out, "{}", row.trim_end());
    }
    if let Some(b) = &report.brier {
        let _ = writeln!(out, "Brier score: {:.4} (n = {})", b.avg_brier, b.n);
    }
    out
}
