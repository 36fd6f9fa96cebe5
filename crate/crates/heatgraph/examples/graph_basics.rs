//! Build graphs, validate the axioms, and measure metric constants.
//!
//! Run with `cargo run --example graph_basics`.

use heatgraph::graph::{families, GraphBuilder};
use heatgraph::metric::{intrinsic_bound, PseudoMetric};

fn main() -> heatgraph::Result<()> {
    // A truncation of the integer line with unit weights and measure.
    let g = families::z_segment(10);
    println!(
        "z-segment: {} vertices, {} edges, endpoints tagged boundary: {}",
        g.n(),
        g.edge_count(),
        !g.is_interior(g.vertex("10").unwrap())
    );
    let report = g.validate();
    for check in &report.checks {
        println!("  axiom {:<16} {}", check.axiom, if check.passed { "ok" } else { "FAIL" });
    }

    // Degrees: deg sums edge weights, Deg normalizes by the vertex measure.
    let degs = g.degrees();
    let x0 = g.vertex("0").unwrap();
    println!("deg(0) = {}, Deg(0) = {}", degs[x0].deg, degs[x0].weighted);

    // Two path metrics on the same graph.
    let comb = PseudoMetric::combinatorial(&g);
    let canon = PseudoMetric::canonical_intrinsic(&g);
    println!("combinatorial jump size    {}", comb.jump_size());
    println!("canonical jump size        {:.6} (= 1/sqrt(2))", canon.jump_size());
    println!(
        "q=2 bounds: combinatorial {:.3}, canonical {:.3} (intrinsic iff <= 1)",
        intrinsic_bound(&g, &comb, 2.0)?,
        intrinsic_bound(&g, &canon, 2.0)?
    );

    // Balls use strict inequality.
    let ball = comb.ball(&g, x0, 3.0);
    let members: Vec<&str> = ball.members.iter().map(|&x| g.label(x)).collect();
    println!("B_3(0) = {members:?}");

    // Violations are rejected with the axiom named.
    let mut b = GraphBuilder::new();
    b.add_vertex("a", 1.0)?;
    b.add_vertex("b", 1.0)?;
    b.add_edge("a", "b", 2.0)?;
    match b.add_edge("b", "a", 3.0) {
        Err(e) => println!("conflicting weights rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
