//! Monte-Carlo switch probability of the cycle FPL against the per-step bound,
//! for a few perturbation rates.

use admdp::fpl::estimate_switch_probability;
use admdp::mdp::{AdmdpGraph, LossFunction};
use admdp::rng::stream_rng;
use rand::Rng;

fn main() -> admdp::Result<()> {
    let g = AdmdpGraph::new(&[vec![0, 1], vec![2, 0], vec![1, 2]])?;
    let mut rng = stream_rng(8, 0);
    let losses: Vec<LossFunction> = (0..30)
        .map(|_| LossFunction::new(3, 2, (0..6).map(|_| rng.random()).collect()))
        .collect::<admdp::Result<_>>()?;
    for lambda in [0.02, 0.05, 0.1, 0.2, 0.4] {
        let est = estimate_switch_probability(&g, &losses, lambda, 5_000, 1, 0)?;
        println!(
            "lambda {lambda:<5} switch rate {:.4} ± {:.4}, bound {:.4}",
            est.rate(),
            est.sigma(),
            est.mean_bound
        );
    }
    Ok(())
}
