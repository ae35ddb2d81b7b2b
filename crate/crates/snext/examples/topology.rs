//! Builds a random strongly connected network, derives Metropolis mixing
//! weights on its symmetrization, and checks the doubly stochastic
//! structure.

use snext::graph::{metropolis_weights, random_connected_graph, validate_weights};

fn main() -> snext::Result<()> {
    let topology = random_connected_graph(6, 0.4, 42)?;
    println!("directed edges (excluding self-loops):");
    for (from, to) in topology.edges() {
        println!("  {from} -> {to}");
    }
    for i in 0..topology.agent_count() {
        println!(
            "agent {i}: in-neighbors {:?}, symmetric degree {}",
            topology.in_neighbors(i),
            topology.symmetric_degree(i)
        );
    }

    let weights = metropolis_weights(&topology)?;
    println!("\nMetropolis weight matrix:\n{}", weights.to_text());

    let report = validate_weights(&weights, &topology.symmetrized(), 1e-12)?;
    println!("doubly stochastic and pattern-consistent: {}", report.pass);
    for violation in &report.violations {
        println!("  violation: {violation}");
    }
    Ok(())
}
