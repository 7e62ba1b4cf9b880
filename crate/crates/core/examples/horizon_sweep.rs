//! Runs a horizon sweep from a JSON config and fits the log-log regret slope.
//!
//! cargo run --release --example horizon_sweep -- data/det_sweep.json [out_dir]

use std::path::{Path, PathBuf};

use admdp::harness::{run_experiment, ExperimentConfig};

fn main() -> admdp::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data/det_sweep.json"));
    let config = ExperimentConfig::load(&path)?;
    let output = run_experiment(&config, path.parent().unwrap_or(Path::new(".")))?;
    for row in &output.aggregates {
        println!(
            "{} T={:<6} regret {:>8.2} ± {:<7.2} switches {:>6.1} ± {:.1}",
            row.algo.name(),
            row.horizon,
            row.mean_regret.unwrap_or(f64::NAN),
            row.std_regret.unwrap_or(f64::NAN),
            row.mean_switches,
            row.std_switches
        );
    }
    for (algo, fit) in output.fits() {
        let fit = fit?;
        println!("{}: slope {:.3}, r2 {:.3}", algo.name(), fit.slope, fit.r2);
    }
    if let Some(out) = args.next() {
        output.write(Path::new(&out), config.traces)?;
    }
    Ok(())
}
