//! The oracle learner with exploring starts: the perturbation enters as a
//! time-zero loss weighted by the start distribution.

use std::path::Path;

use admdp::fpl::LambdaMode;
use admdp::harness::AdversarySpec;
use admdp::learner::oracle::{oracle_rate, run_oracle, OracleConfig};
use admdp::mdp::load_model;

fn main() -> admdp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/three_state.json");
    let base = load_model(path.as_ref())?.stochastic().clone();
    let horizon = 4096;
    let losses = AdversarySpec::IidUniform.generate(3, 2, horizon, 9, Path::new("."))?;
    for start in [vec![1.0 / 3.0; 3], vec![1.0 / 6.0, 5.0 / 12.0, 5.0 / 12.0]] {
        let mdp = base.with_start_dist(start)?;
        let alpha = mdp.min_start_mass();
        let lambda = oracle_rate(LambdaMode::HorizonTuned(horizon), 3, 2, alpha, 0);
        let rec = run_oracle(
            &mdp,
            &losses,
            OracleConfig {
                alpha,
                lambda: LambdaMode::HorizonTuned(horizon),
                seed: 9,
            },
        )?;
        println!(
            "alpha {alpha:.3}: lambda {lambda:.5}, loss {:.1}, {} switches",
            rec.total_loss, rec.switches
        );
    }
    // too little start mass for the requested exploring-starts level
    let err = run_oracle(
        &base,
        &losses,
        OracleConfig {
            alpha: 0.5,
            lambda: LambdaMode::Doubling,
            seed: 1,
        },
    );
    println!("alpha 0.5 on d1 = {:?}: {}", base.start_dist(), err.unwrap_err());
    Ok(())
}
