//! Builds the kNN graph of a small cloud and prints the EdgeConv edge
//! features `[x_i, x_j - x_i]` of the first point.
//!
//! cargo run --example knn_edge_features

use pointpose::graph::{edge_features, knn};

fn main() -> pointpose::Result<()> {
    let points: Vec<f64> = vec![
        0.0, 0.0, 0.0, //
        0.1, 0.0, 0.0, //
        0.0, 0.2, 0.0, //
        0.0, 0.0, 0.3, //
        1.0, 1.0, 1.0, //
        0.05, 0.05, 0.0,
    ];
    let (n, d, k) = (6, 3, 3);
    let graph = knn(&points, n, d, k)?;
    for i in 0..n {
        println!("point {i}: neighbors {:?}", graph.row(i));
    }
    let edges = edge_features(&points, n, d, &graph)?;
    println!("edge features of point 0:");
    for row in edges[..k * 2 * d].chunks(2 * d) {
        println!("  {row:?}");
    }
    Ok(())
}
