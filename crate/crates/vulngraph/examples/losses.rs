//! Evaluates the three training objectives on toy inputs and prints their
//! values and gradients.

use ndarray::array;
use vulngraph::objectives::{bce_with_logits, edge_sum, info_nce, laplacian_reg};
use vulngraph::tensor::{Tape, NORM_EPS};

fn main() -> vulngraph::Result<()> {
    let mut t = Tape::new();
    let s = t.leaf(array![[2.0], [-1.0], [0.0]]);
    let bce = bce_with_logits(&mut t, s, &[1.0, 0.0, 1.0], 2.0)?;
    let grads = t.backward(bce)?;
    println!(
        "BCE (pos_weight 2) {:.4}, dL/ds {:.4?}",
        t.scalar(bce),
        grads.get_or_zeros(&t, s).column(0).to_vec()
    );

    let mut t = Tape::new();
    let g = t.leaf(array![[1.0, 0.2], [0.1, 1.0], [-1.0, 0.3]]);
    let l = t.constant(array![[0.9, 0.1], [0.0, 1.0], [-0.8, -0.1]]);
    let gn = t.l2_normalize_rows(g, NORM_EPS);
    let ln = t.l2_normalize_rows(l, NORM_EPS);
    for tau in [1.0, 0.1] {
        let nce = info_nce(&mut t, gn, ln, tau)?;
        println!(
            "InfoNCE tau={tau}: {:.4} (chance level ln 3 = {:.4})",
            t.scalar(nce),
            3f64.ln()
        );
    }

    let mut t = Tape::new();
    let h = t.leaf(array![[0.0, 1.0], [1.0, 1.0], [3.0, 0.0]]);
    let edges = [(0, 1), (1, 2)];
    let lap = laplacian_reg(&mut t, &[(h, &edges)])?;
    let es = edge_sum(&mut t, h, &edges)?;
    let grads = t.backward(lap)?;
    println!(
        "edge sum {:.1}, Laplacian term {:.4}",
        t.scalar(es),
        t.scalar(lap)
    );
    println!(
        "gradient pulls neighbors together:\n{:.4}",
        grads.get_or_zeros(&t, h)
    );
    Ok(())
}
