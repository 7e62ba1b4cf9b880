use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use admdp::harness::{
    aggregate, gen_lower_bound_instance, gen_lower_bound_loop_instance, run_experiment, run_single, Algorithm,
    ExperimentConfig, ExperimentOutput, LambdaSpec, SummaryRow,
};
use admdp::mdp::{load_model, CatchingPlan, MdpModel};
use admdp::rng::derive_seed;
use admdp::Error;

#[derive(Parser)]
#[command(version, about = "Online learning in adversarial MDPs with known dynamics")]
struct Cli {
    /// Overrides the seed list of a config, or the base seed of `lowerbound`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV output; summaries go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Print period, cycle classes, critical length, diameter and catching plan.
    Analyze { mdp: PathBuf },
    /// Run one experiment configuration.
    Run { config: PathBuf },
    /// Run a horizon sweep and fit the regret slope.
    Sweep { config: PathBuf },
    /// Mean regret on the lower-bound cycle instance.
    Lowerbound {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 50)]
        trials: u64,
        #[arg(long, value_enum, default_value_t = AlgoArg::Det)]
        algo: AlgoArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Det,
    Stoch,
    Oracle,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Det => Algorithm::Det,
            AlgoArg::Stoch => Algorithm::Stoch,
            AlgoArg::Oracle => Algorithm::Oracle,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invariant(_) | Error::DecompositionFailed { .. } | Error::NonTermination { .. } => 3,
        _ => 2,
    }
}

fn analyze(path: &Path) -> admdp::Result<()> {
    let model = load_model(path)?;
    let mdp = model.stochastic();
    println!("states: {}", mdp.num_states());
    println!("actions: {}", mdp.num_actions());
    if let MdpModel::Deterministic { graph, .. } = &model {
        println!("period: {}", graph.period());
        println!("classes: {:?}", graph.classes());
        println!("critical_length: {}", graph.critical_length());
        println!("transit_length: {}", graph.transit_length());
    }
    let diameter = mdp.diameter()?;
    println!("diameter: {:.6}", diameter.value);
    match CatchingPlan::build(mdp) {
        Ok(plan) => {
            println!("loop: state {} action {}", plan.loop_state, plan.loop_action);
            println!("ell_star: {}", plan.ell_star);
            println!("p_star: {:.6}", plan.p_star);
            for (s, t) in plan.targets.iter().enumerate() {
                println!("target {s}: wait {} goto {} p {:.6}", t.wait, t.goto_len, t.hit_prob);
            }
        }
        Err(Error::AssumptionViolated) => println!("catching plan: none (no loop state)"),
        Err(e) => return Err(e),
    }
    Ok(())
}

fn emit(output: &ExperimentOutput, out: Option<&Path>, traces: bool) -> admdp::Result<()> {
    match out {
        Some(dir) => {
            output.write(dir, traces)?;
            eprintln!("config {} written to {}", output.config_hash, dir.display());
        }
        None => admdp::harness::record::write_summary_csv(&output.summary, std::io::stdout().lock())?,
    }
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> admdp::Result<(ExperimentConfig, PathBuf)> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seeds = vec![s];
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((config, base))
}

fn lowerbound(
    states: usize,
    actions: usize,
    horizon: usize,
    trials: u64,
    algo: Algorithm,
    seed: u64,
    out: Option<&Path>,
) -> admdp::Result<()> {
    let (model, adversary) = if algo == Algorithm::Det {
        let (graph, adv) = gen_lower_bound_instance(states, actions)?;
        (MdpModel::deterministic(graph, 0)?, adv)
    } else {
        let (mdp, adv) = gen_lower_bound_loop_instance(states, actions)?;
        (MdpModel::Stochastic(mdp), adv)
    };
    let na = model.stochastic().num_actions();
    let summary = (0..trials)
        .map(|i| {
            let run_seed = derive_seed(seed, i);
            let losses = adversary.generate(states, na, horizon, run_seed, Path::new("."))?;
            let lambda = LambdaSpec::HorizonTuned.mode(horizon);
            let alpha = (algo == Algorithm::Oracle).then(|| 1.0 / states as f64);
            Ok(run_single(&model, algo, &losses, lambda, run_seed, Some(0), alpha)?.summary())
        })
        .collect::<admdp::Result<Vec<SummaryRow>>>()?;
    let agg = aggregate(&summary);
    let mean = agg[0].mean_regret.unwrap_or(f64::NAN);
    let reference = 0.05 * (states as f64 * horizon as f64 * (actions as f64).ln()).sqrt();
    eprintln!("mean regret {mean:.3} over {trials} trials; 0.05*sqrt(|S| T ln|A|) = {reference:.3}");
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            admdp::harness::record::write_summary_csv(&summary, std::fs::File::create(dir.join("summary.csv"))?)?;
        }
        None => admdp::harness::record::write_summary_csv(&summary, std::io::stdout().lock())?,
    }
    Ok(())
}

fn dispatch(cli: Cli) -> admdp::Result<()> {
    let Format::Csv = cli.format;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Analyze { mdp } => analyze(&mdp),
        Command::Run { config } => {
            let (config, base) = load_config(&config, cli.seed)?;
            emit(&run_experiment(&config, &base)?, out, config.traces)
        }
        Command::Sweep { config } => {
            let (config, base) = load_config(&config, cli.seed)?;
            let output = run_experiment(&config, &base)?;
            emit(&output, out, config.traces)?;
            let mut stderr = std::io::stderr().lock();
            for (algo, fit) in output.fits() {
                let fit = fit?;
                writeln!(
                    stderr,
                    "{}: slope {:.4} intercept {:.4} r2 {:.4} clamped {}",
                    algo.name(),
                    fit.slope,
                    fit.intercept,
                    fit.r2,
                    fit.clamped
                )?;
            }
            Ok(())
        }
        Command::Lowerbound {
            states,
            actions,
            horizon,
            trials,
            algo,
        } => lowerbound(
            states,
            actions,
            horizon,
            trials,
            algo.into(),
            cli.seed.unwrap_or(0),
            out,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
