//! Matrix views of a CFG (adjacency, degree, both Laplacians) and biased
//! second-order random walks over it.

use vulngraph::graph::{build_matrices, random_walks, WalkConfig};
use vulngraph::java::{parse_and_build, SourceUnit};

const SRC: &str = "class Loop { int sum(int[] xs) { int s = 0; for (int i = 0; i < xs.length; i++) { if (xs[i] < 0) break; s += xs[i]; } return s; } }";

fn main() -> vulngraph::Result<()> {
    let unit = SourceUnit::new("Loop.java", SRC)?;
    let g = parse_and_build(&unit)?.remove(0);
    for n in &g.nodes {
        println!("{:>2} {:<10} {}", n.id, n.kind.name(), n.label);
    }
    let m = build_matrices(&g);
    println!("adjacency\n{:.0}", m.adjacency);
    println!("directed Laplacian D - A\n{:.0}", m.laplacian);
    println!("symmetric normalized Laplacian\n{:.3}", m.sym_laplacian);
    println!(
        "row sums of L: {:?}",
        m.laplacian.sum_axis(ndarray::Axis(1)).to_vec()
    );

    for (p, q) in [(1.0, 1.0), (4.0, 0.25), (0.25, 4.0)] {
        let cfg = WalkConfig {
            walk_length: 8,
            walks_per_node: 1,
            p,
            q,
            seed: 3,
        };
        let walks = random_walks(&g, &cfg)?;
        println!("p={p} q={q}: first walks {:?}", &walks[..3]);
    }
    Ok(())
}
