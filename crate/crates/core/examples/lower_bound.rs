//! Mean regret of the deterministic learner on the cycle lower-bound instance
//! next to sqrt(|S| T ln|A|).

use std::path::Path;

use admdp::fpl::LambdaMode;
use admdp::harness::gen_lower_bound_instance;
use admdp::learner::det::{best_policy_in_hindsight, run, FplConfig};

fn main() -> admdp::Result<()> {
    let (states, actions, trials) = (4, 2, 20);
    let (g, adversary) = gen_lower_bound_instance(states, actions)?;
    for horizon in [1 << 10, 1 << 12, 1 << 14] {
        let mut total = 0.0;
        for seed in 0..trials {
            let losses = adversary.generate(states, actions, horizon, seed, Path::new("."))?;
            let rec = run(
                &g,
                &losses,
                FplConfig {
                    lambda: LambdaMode::HorizonTuned(horizon),
                    seed,
                },
                0,
            )?;
            total += rec.total_loss - best_policy_in_hindsight(&g, &losses, 0, 8)?.loss;
        }
        let scale = (states as f64 * horizon as f64 * (actions as f64).ln()).sqrt();
        println!(
            "T={horizon:<6} mean regret {:.1}, sqrt(|S| T ln|A|) = {scale:.1}, ratio {:.3}",
            total / trials as f64,
            total / trials as f64 / scale
        );
    }
    Ok(())
}
