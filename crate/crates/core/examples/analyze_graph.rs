//! Period, cycle classes, critical length and an exact-length path on a
//! graph made of two cycles (lengths 4 and 6) through state 0.

use admdp::mdp::AdmdpGraph;

fn main() -> admdp::Result<()> {
    // 0 -> 1 -> 2 -> 3 -> 0 and 0 -> 4 -> 5 -> 6 -> 7 -> 8 -> 0
    let next = vec![
        vec![1, 4],
        vec![2, 2],
        vec![3, 3],
        vec![0, 0],
        vec![5, 5],
        vec![6, 6],
        vec![7, 7],
        vec![8, 8],
        vec![0, 0],
    ];
    let g = AdmdpGraph::new(&next)?;
    println!("period {}", g.period());
    println!("classes {:?}", g.classes());
    println!(
        "critical length {} (transit {} steps)",
        g.critical_length(),
        g.transit_length()
    );
    let len = g.transit_length();
    let actions = g.path_of_length(1, 3, len)?;
    println!(
        "path 1 -> 3 of length {len}: {actions:?}, lands on {}",
        g.replay(1, &actions)
    );
    Ok(())
}
