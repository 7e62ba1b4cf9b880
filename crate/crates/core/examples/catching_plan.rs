//! Builds the catching plan of a small MDP and checks the landing law of a
//! policy switch against the policy's state distribution.

use std::collections::BTreeMap;

use admdp::learner::stoch::{expected_catch_time_stats, switch_policy};
use admdp::mdp::{load_model, CatchingPlan, DeterministicPolicy};
use admdp::rng::stream_rng;

fn main() -> admdp::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/three_state.json");
    let model = load_model(path.as_ref())?;
    let mdp = model.stochastic();
    let plan = CatchingPlan::build(mdp)?;
    println!(
        "D = {:.3}, l* = {}, p* = {:.3}",
        plan.diameter.value, plan.ell_star, plan.p_star
    );
    for (s, t) in plan.targets.iter().enumerate() {
        println!(
            "  target {s}: wait {}, goto {}, p = {:.3}",
            t.wait, t.goto_len, t.hit_prob
        );
    }

    let policy = DeterministicPolicy::new(vec![1, 1, 0], 2)?;
    let mut rng = stream_rng(2, 0);
    let mut by_time: BTreeMap<usize, [usize; 3]> = BTreeMap::new();
    for _ in 0..50_000 {
        let out = switch_policy(mdp, &plan, &policy, 1, 2, &mut rng)?;
        by_time.entry(out.t_switch).or_default()[out.final_state] += 1;
    }
    for (t, counts) in by_time.iter().take(4) {
        let n: usize = counts.iter().sum();
        let law = mdp.policy_state_distribution(&policy, *t)?;
        let empirical: Vec<String> = counts.iter().map(|c| format!("{:.3}", *c as f64 / n as f64)).collect();
        let exact: Vec<String> = law.iter().map(|p| format!("{p:.3}")).collect();
        println!(
            "T_switch={t} ({n} runs): empirical [{}] vs exact [{}]",
            empirical.join(", "),
            exact.join(", ")
        );
    }
    let stats = expected_catch_time_stats(mdp, &plan, &policy, 1, 2, 20_000, 5)?;
    println!("mean catch time {:.2} ± {:.2}", stats.mean, stats.std_error());
    Ok(())
}
