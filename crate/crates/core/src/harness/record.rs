//! Per-step traces and run summaries, with their CSV encodings.

use std::io::Write;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Det,
    Stoch,
    Oracle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Det => "det",
            Self::Stoch => "stoch",
            Self::Oracle => "oracle",
        }
    }
}

fn as_flag<S: Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub t: usize,
    pub state: usize,
    pub action: usize,
    pub loss: f64,
    /// Index of the expert being followed; increments on every switch.
    pub leader: usize,
    /// Set while moving towards a new leader (deterministic transit or a catching phase).
    #[serde(serialize_with = "as_flag")]
    pub transit: bool,
    /// Set when the expert algorithm switched leader after this step's loss.
    #[serde(serialize_with = "as_flag")]
    pub switch: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algo: Algorithm,
    pub seed: u64,
    pub rows: Vec<StepRow>,
    pub total_loss: f64,
    pub switches: usize,
    /// Best stationary policy's loss in hindsight, when computed.
    pub lstar: Option<f64>,
    /// A transit or catching phase was still running when the horizon ended.
    pub truncated: bool,
}

impl RunRecord {
    pub fn new(algo: Algorithm, seed: u64, rows: Vec<StepRow>, truncated: bool) -> Self {
        let total_loss = rows.iter().map(|r| r.loss).sum();
        let switches = rows.iter().filter(|r| r.switch).count();
        Self {
            algo,
            seed,
            rows,
            total_loss,
            switches,
            lstar: None,
            truncated,
        }
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn regret(&self) -> Option<f64> {
        self.lstar.map(|l| self.total_loss - l)
    }

    pub fn transit_steps(&self) -> usize {
        self.rows.iter().filter(|r| r.transit).count()
    }

    /// Recomputes the totals from the trace.
    pub fn check_identities(&self) -> Result<()> {
        let total: f64 = self.rows.iter().map(|r| r.loss).sum();
        let switches = self.rows.iter().filter(|r| r.switch).count();
        let times_ok = self.rows.iter().enumerate().all(|(i, r)| r.t == i + 1);
        if (total - self.total_loss).abs() > 1e-9 * total.max(1.0) || switches != self.switches || !times_ok {
            return Err(Error::Invariant("run record totals disagree with its trace".into()));
        }
        Ok(())
    }

    pub fn summary(&self) -> SummaryRow {
        SummaryRow {
            algo: self.algo,
            horizon: self.horizon(),
            seed: self.seed,
            total_loss: self.total_loss,
            lstar: self.lstar,
            regret: self.regret(),
            switches: self.switches,
        }
    }

    pub fn write_runs_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algo: Algorithm,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub total_loss: f64,
    pub lstar: Option<f64>,
    pub regret: Option<f64>,
    pub switches: usize,
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
