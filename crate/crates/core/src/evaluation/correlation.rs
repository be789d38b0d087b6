//! Correlation of consistency violations with Brier score across forecasters.

use serde::{Deserialize, Serialize};

use super::{exclude_worse_than_random, pearson_r, AggregateReport, Metric};
use crate::error::{Error, Result};
use crate::model::CheckKind;

/// A forecaster's report together with its ground-truth accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterResult {
    pub forecaster_id: String,
    pub avg_brier: f64,
    pub report: AggregateReport,
}

impl ForecasterResult {
    /// Takes the Brier score embedded in the report.
    pub fn from_report(report: AggregateReport) -> Result<Self> {
        let avg_brier = report
            .brier
            .as_ref()
            .map(|b| b.avg_brier)
            .ok_or_else(|| Error::DegenerateInput(format!("report for `{}` has no Brier summary", report.forecaster_id)))?;
        Ok(Self { forecaster_id: report.forecaster_id.clone(), avg_brier, report })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    /// Check name, or `Aggregated`.
    pub check: String,
    pub arbitrage: Option<f64>,
    pub frequentist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub forecasters: Vec<String>,
    pub excluded: Vec<String>,
    pub rows: Vec<CorrelationRow>,
}

/// Pearson correlation between each forecaster's average Brier score and its
/// average violation, per check and metric. Forecasters worse than random
/// guessing are left out; cells with fewer than three forecasters or no
/// spread are `None`.
pub fn correlate(results: &[ForecasterResult]) -> CorrelationMatrix {
    let entries: Vec<(&ForecasterResult, f64)> = results.iter().map(|r| (r, r.avg_brier)).collect();
    let kept = exclude_worse_than_random(entries);
    let excluded = results
        .iter()
        .filter(|r| !kept.iter().any(|(k, _)| std::ptr::eq(*k, *r)))
        .map(|r| r.forecaster_id.clone())
        .collect();

    let cell = |value: &dyn Fn(&AggregateReport) -> Option<f64>| -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = kept
            .iter()
            .filter_map(|(r, b)| value(&r.report).map(|v| (*b, v)))
            .unzip();
        pearson_r(&xs, &ys).ok()
    };
    let mut rows: Vec<CorrelationRow> = CheckKind::ALL
        .into_iter()
        .filter(|k| kept.iter().any(|(r, _)| r.report.rows.iter().any(|row| row.kind == *k)))
        .map(|kind| CorrelationRow {
            check: kind.name().to_string(),
            arbitrage: cell(&|rep| rep.row(kind, Metric::Arbitrage).map(|r| r.avg_violation)),
            frequentist: cell(&|rep| rep.row(kind, Metric::Frequentist).map(|r| r.avg_violation)),
        })
        .collect();
    rows.push(CorrelationRow {
        check: "Aggregated".into(),
        arbitrage: cell(&|rep| rep.aggregated(Metric::Arbitrage).map(|a| a.avg_violation)),
        frequentist: cell(&|rep| rep.aggregated(Metric::Frequentist).map(|a| a.avg_violation)),
    });
    CorrelationMatrix {
        forecasters: kept.iter().map(|(r, _)| r.forecaster_id.clone()).collect(),
        excluded,
        rows,
    }
}
