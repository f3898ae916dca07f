//! Shows what the linear graph convolution does on a small bipartite
//! graph: symmetric-normalized neighbor averaging, no transforms, and a
//! weighted sum over propagation depths as the readout.
//!
//! Run with: `cargo run --example propagate_embeddings`

use ndarray::array;
use qagcl::encoder::{readout, uniform_weights};
use qagcl::graph::build_normalized;

fn main() -> qagcl::Result<()> {
    // Two users, three services; service 1 is shared.
    let edges = [(0, 0), (0, 1), (1, 1), (1, 2)];
    let graph = build_normalized(2, 3, &edges)?;
    println!(
        "graph: {} nodes, {} undirected edges",
        graph.num_nodes(),
        graph.num_edges()
    );

    // One-hot rows make the propagation weights directly readable.
    let e0 = array![
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0],
    ];
    let hop1 = graph.propagate(&e0)?;
    println!("\nrow of user 0 after one hop (mass on its services):");
    println!("  {:?}", hop1.row(0).to_vec());
    println!("row of the shared service after one hop (mass on both users):");
    println!("  {:?}", hop1.row(3).to_vec());

    // The readout averages hops 0..=L; with uniform weights each hop
    // contributes 1/(L+1). Total mass per row is preserved only in the
    // regular-graph case, so the norms below differ across nodes.
    for layers in [0usize, 1, 2, 3] {
        let w = uniform_weights(layers);
        let finals = readout(&graph, &e0, &w)?;
        let norms: Vec<String> = (0..finals.nrows())
            .map(|i| format!("{:.3}", finals.row(i).dot(&finals.row(i)).sqrt()))
            .collect();
        println!("L={layers}: row norms {}", norms.join(" "));
    }

    // Deeper propagation mixes neighborhoods: after two hops user 0
    // already carries weight from user 1 via the shared service.
    let hop2 = graph.propagate(&hop1)?;
    println!(
        "\nuser 0 weight on user 1 after two hops: {:.4}",
        hop2[(0, 1)]
    );
    Ok(())
}
