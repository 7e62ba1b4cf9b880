//! Finds the cheapest closed walk for a fixed loss history with and without
//! perturbations, and dumps one of the cycle LPs in LP format.

use admdp::cycle_opt::{best_cycle_overall_from_losses, fold_losses, CyclePolytopeLp};
use admdp::fpl::PerturbationSet;
use admdp::mdp::{AdmdpGraph, LossFunction};
use admdp::rng::stream_rng;
use rand::Rng;

fn main() -> admdp::Result<()> {
    let g = AdmdpGraph::new(&[vec![1, 2], vec![2, 0], vec![0, 1]])?;
    let mut rng = stream_rng(3, 0);
    let losses: Vec<LossFunction> = (0..20)
        .map(|_| LossFunction::new(3, 2, (0..6).map(|_| rng.random()).collect()))
        .collect::<admdp::Result<_>>()?;

    let (value, walk) = best_cycle_overall_from_losses(&g, &losses, None, 0)?;
    println!("unperturbed leader {walk} with loss {value:.3}");
    let pert = PerturbationSet::draw(3, 2, 0.5, &mut rng)?;
    let (value, walk) = best_cycle_overall_from_losses(&g, &losses, Some(&pert), 0)?;
    println!("perturbed leader {walk} with objective {value:.3}");

    let folded = fold_losses(&losses, 3, 2, 0, 3, Some(&pert));
    let lp = CyclePolytopeLp::new(&g, 0, 3, &folded);
    println!(
        "\n{} variables, {} after presolve\n{}",
        lp.dimension(),
        lp.num_free_vars(),
        lp.to_lp_format()
    );
    Ok(())
}
