//! Plays the deterministic learner against uniform losses and compares it with
//! the best stationary policy in hindsight.

use std::path::Path;

use admdp::fpl::LambdaMode;
use admdp::harness::AdversarySpec;
use admdp::learner::det::{best_policy_in_hindsight, run, FplConfig};
use admdp::mdp::AdmdpGraph;

fn main() -> admdp::Result<()> {
    let g = AdmdpGraph::new(&[vec![1, 3], vec![2, 2], vec![0, 0], vec![4, 4], vec![5, 5], vec![0, 0]])?;
    for horizon in [500, 2_000, 8_000] {
        let losses = AdversarySpec::IidUniform.generate(6, 2, horizon, 11, Path::new("."))?;
        let rec = run(
            &g,
            &losses,
            FplConfig {
                lambda: LambdaMode::HorizonTuned(horizon),
                seed: 11,
            },
            0,
        )?;
        let best = best_policy_in_hindsight(&g, &losses, 0, 8)?;
        println!(
            "T={horizon:<5} loss {:.1}, best policy {:.1} on {}, regret {:.1}, {} switches, {} transit steps",
            rec.total_loss,
            best.loss,
            best.cycle,
            rec.total_loss - best.loss,
            rec.switches,
            rec.transit_steps()
        );
    }
    Ok(())
}
