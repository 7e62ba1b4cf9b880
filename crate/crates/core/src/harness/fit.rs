//! Summary statistics over runs and the log-log regret fit.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::record::{Algorithm, SummaryRow};

/// Floor substituted for non-positive mean regrets before taking logs.
pub const REGRET_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub algo: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub runs: usize,
    pub mean_regret: Option<f64>,
    pub std_regret: Option<f64>,
    pub mean_switches: f64,
    pub std_switches: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Mean and sample standard deviation of regret and switches per `(algo, T)`.
pub fn aggregate(summary: &[SummaryRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(Algorithm, usize), Vec<&SummaryRow>> = BTreeMap::new();
    for row in summary {
        groups.entry((row.algo, row.horizon)).or_default().push(row);
    }
    groups
        .into_iter()
        .map(|((algo, horizon), rows)| {
            let regrets: Option<Vec<f64>> = rows.iter().map(|r| r.regret).collect();
            let (mean_regret, std_regret) = match regrets {
                Some(r) => {
                    let (m, s) = mean_std(&r);
                    (Some(m), Some(s))
                }
                None => (None, None),
            };
            let switches: Vec<f64> = rows.iter().map(|r| r.switches as f64).collect();
            let (mean_switches, std_switches) = mean_std(&switches);
            AggregateRow {
                algo,
                horizon,
                runs: rows.len(),
                mean_regret,
                std_regret,
                mean_switches,
                std_switches,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points whose mean was raised to [`REGRET_FLOOR`].
    pub clamped: usize,
}

impl SlopeFit {
    /// Fitted `exp(intercept) · T^slope`.
    pub fn predict(&self, horizon: f64) -> f64 {
        (self.intercept + self.slope * horizon.ln()).exp()
    }
}

/// Ordinary least squares of `ln(mean)` on `ln(T)` over `(T, mean)` points.
pub fn fit_regret_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 horizons, got {}",
            points.len()
        )));
    }
    let mut clamped = 0;
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(t, m)| {
            if !(m > REGRET_FLOOR) {
                clamped += 1;
            }
            (t.ln(), m.max(REGRET_FLOOR).ln())
        })
        .collect();
    if clamped > 0 {
        log::warn!("{clamped} non-positive mean regrets floored at {REGRET_FLOOR}");
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("all horizons are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        clamped,
    })
}

/// Fits every algorithm in an aggregate table that has regret values.
pub fn fit_aggregates(rows: &[AggregateRow]) -> Vec<(Algorithm, Result<SlopeFit>)> {
    let mut by_algo: BTreeMap<Algorithm, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        if let Some(m) = row.mean_regret {
            by_algo.entry(row.algo).or_default().push((row.horizon as f64, m));
        }
    }
    by_algo
        .into_iter()
        .map(|(a, pts)| (a, fit_regret_slope(&pts)))
        .collect()
}
