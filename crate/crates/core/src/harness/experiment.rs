//! Runs the `(horizon, seed)` cross-product of a configuration and writes CSVs.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::fit::{aggregate, fit_aggregates, AggregateRow, SlopeFit};
use crate::harness::record::{write_summary_csv, Algorithm, RunRecord, SummaryRow};
use crate::learner::det::{self, best_policy_in_hindsight, FplConfig, EXHAUSTIVE_STATE_CAP};
use crate::learner::oracle::{run_oracle, OracleConfig};
use crate::learner::stoch::{best_policy_expected, run_stochastic, StochConfig, POLICY_CAP};
use crate::mdp::{LossFunction, MdpModel};

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config_hash: String,
    /// Ordered by horizon, then seed, as listed in the configuration.
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentOutput {
    pub fn fits(&self) -> Vec<(Algorithm, Result<SlopeFit>)> {
        fit_aggregates(&self.aggregates)
    }

    /// `summary.csv`, `aggregate.csv` and, if `traces`, `<algo>-T<T>-seed<seed>/runs.csv`.
    pub fn write(&self, out_dir: &Path, traces: bool) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        write_summary_csv(&self.summary, std::fs::File::create(out_dir.join("summary.csv"))?)?;
        let mut w = csv::Writer::from_path(out_dir.join("aggregate.csv"))?;
        for row in &self.aggregates {
            w.serialize(row)?;
        }
        w.flush()?;
        if traces {
            for rec in &self.records {
                let dir = out_dir.join(format!("{}-T{}-seed{}", rec.algo.name(), rec.horizon(), rec.seed));
                std::fs::create_dir_all(&dir)?;
                rec.write_runs_csv(std::io::BufWriter::new(std::fs::File::create(dir.join("runs.csv"))?))?;
            }
        }
        Ok(())
    }
}

/// Most likely start state under `d_1`, first on ties.
fn default_start(model: &MdpModel) -> usize {
    let d = model.stochastic().start_dist();
    (0..d.len()).fold(0, |b, s| if d[s] > d[b] { s } else { b })
}

/// Runs one learner on one loss sequence and fills in `L*` when the instance is small enough.
pub fn run_single(
    model: &MdpModel,
    algorithm: Algorithm,
    losses: &[LossFunction],
    lambda: crate::fpl::LambdaMode,
    seed: u64,
    start_state: Option<usize>,
    alpha: Option<f64>,
) -> Result<RunRecord> {
    let mdp = model.stochastic();
    let small = mdp.num_states() <= EXHAUSTIVE_STATE_CAP;
    let mut record = match algorithm {
        Algorithm::Det => {
            let graph = model
                .graph()
                .ok_or_else(|| Error::Config("algorithm: det needs a deterministic MDP".into()))?;
            let start = start_state.unwrap_or_else(|| default_start(model));
            let mut rec = det::run(graph, losses, FplConfig { lambda, seed }, start)?;
            if small {
                rec.lstar = Some(best_policy_in_hindsight(graph, losses, start, EXHAUSTIVE_STATE_CAP)?.loss);
            }
            rec
        }
        Algorithm::Stoch | Algorithm::Oracle => {
            let mut rec = if algorithm == Algorithm::Stoch {
                run_stochastic(mdp, losses, StochConfig { lambda, seed })?
            } else {
                let alpha = alpha.unwrap_or_else(|| mdp.min_start_mass());
                run_oracle(mdp, losses, OracleConfig { alpha, lambda, seed })?
            };
            if small {
                rec.lstar = Some(best_policy_expected(mdp, losses, POLICY_CAP)?.0);
            }
            rec
        }
    };
    record.check_identities()?;
    if record.truncated {
        log::info!(
            "{} run T={} seed={seed}: horizon ended mid-transit",
            algorithm.name(),
            losses.len()
        );
    }
    record.seed = seed;
    Ok(record)
}

pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentOutput> {
    config.validate()?;
    let model = config.mdp.load(base_dir)?;
    let (ns, na) = (model.stochastic().num_states(), model.stochastic().num_actions());
    let jobs: Vec<(usize, u64)> = config
        .horizons
        .iter()
        .flat_map(|&h| config.seeds.iter().map(move |&s| (h, s)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(horizon, seed)| {
            let started = Instant::now();
            let losses = config.adversary.generate(ns, na, horizon, seed, base_dir)?;
            let rec = run_single(
                &model,
                config.algorithm,
                &losses,
                config.lambda.mode(horizon),
                seed,
                config.start_state,
                config.alpha,
            )?;
            log::debug!(
                "{} T={horizon} seed={seed} done in {:.3}s",
                config.algorithm.name(),
                started.elapsed().as_secs_f64()
            );
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary: Vec<SummaryRow> = records.iter().map(RunRecord::summary).collect();
    let aggregates = aggregate(&summary);
    Ok(ExperimentOutput {
        config_hash: config.hash(),
        records,
        summary,
        aggregates,
    })
}
