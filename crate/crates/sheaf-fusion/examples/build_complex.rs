//! Build a simplicial complex from generators, inspect its faces, and
//! derive the attachment DAG a sheaf lives on.
//!
//! ```sh
//! cargo run --example build_complex
//! ```

use sheaf_fusion::simplicial::{Face, SimplicialComplex};
use sheaf_fusion::Result;

fn main() -> Result<()> {
    // Four sensors, observed pairwise: both cameras, both dust sensors,
    // and the two camera–dust pairings that were measured together.
    let generators = [
        Face::new(["C1", "C2"])?,
        Face::new(["S1", "S2"])?,
        Face::new(["C1", "S1"])?,
        Face::new(["C2", "S2"])?,
    ];
    let complex = SimplicialComplex::from_generators(generators)?;

    println!("faces by dimension:");
    for dim in 0..=complex.dimension().unwrap_or(0) {
        let names: Vec<String> = complex
            .faces_of_dimension(dim)
            .map(|f| f.name())
            .collect();
        println!("  {dim}: {}", names.join("  "));
    }

    let c1 = Face::vertex("C1");
    let star: Vec<String> = complex.star(&c1)?.iter().map(|f| f.name()).collect();
    println!("\nstar of C1 (everything C1 participates in): {}", star.join("  "));

    let sub = complex.induced_subcomplex(&["C1", "C2", "S1"])?;
    println!(
        "restricting to {{C1, C2, S1}} keeps {} of {} faces",
        sub.len(),
        complex.len()
    );

    // The attachment DAG points each face at the faces directly above it;
    // propagation will later push sensor values along these edges.
    let dag = complex.attachment_dag();
    println!("\nattachment DAG ({} nodes, {} edges):", dag.len(), dag.edge_count());
    for node in dag.nodes() {
        let children: Vec<&str> = node
            .children()
            .iter()
            .map(|&c| dag.nodes()[c].name())
            .collect();
        if children.is_empty() {
            println!("  {:<6} level {}", node.name(), node.level());
        } else {
            println!(
                "  {:<6} level {}  <- {}",
                node.name(),
                node.level(),
                children.join(", ")
            );
        }
    }

    // Path counts drive the lifted multiset sizes during propagation.
    println!("\npaths from below into each top face:");
    for node in dag.nodes().iter().filter(|n| n.level() == 1) {
        println!("  {}: {}", node.name(), dag.path_count(dag.node_index(node.name()).unwrap()));
    }
    Ok(())
}
