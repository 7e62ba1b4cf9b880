//! Runs the policy-level FPL with catching on a stochastic MDP.

use std::path::Path;

use admdp::fpl::LambdaMode;
use admdp::harness::AdversarySpec;
use admdp::learner::stoch::{best_policy_expected, run_stochastic, StochConfig, POLICY_CAP};
use admdp::mdp::load_model;

fn main() -> admdp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/three_state.json");
    let model = load_model(path.as_ref())?;
    let mdp = model.stochastic();
    for horizon in [512, 2048, 8192] {
        let losses = AdversarySpec::IidUniform.generate(3, 2, horizon, 4, Path::new("."))?;
        let rec = run_stochastic(
            mdp,
            &losses,
            StochConfig {
                lambda: LambdaMode::HorizonTuned(horizon),
                seed: 4,
            },
        )?;
        let (lstar, best) = best_policy_expected(mdp, &losses, POLICY_CAP)?;
        let catching = rec.rows.iter().filter(|r| r.transit).count();
        println!(
            "T={horizon:<5} loss {:.1}, best policy {:?} expects {lstar:.1}, {} switches, {catching} catching steps",
            rec.total_loss,
            best.actions(),
            rec.switches
        );
    }
    Ok(())
}
