//! Trains Node2Vec vectors for one CFG and lists each node's nearest neighbor
//! by cosine similarity.

use vulngraph::encoders::{node2vec_embed, Node2VecConfig};
use vulngraph::java::{parse_and_build, SourceUnit};

const SRC: &str = r#"class Files {
    String read(String dir, String name) throws Exception {
        java.io.File f = new java.io.File(dir, name);
        if (!f.exists()) { throw new IllegalArgumentException(name); }
        java.io.BufferedReader r = new java.io.BufferedReader(new java.io.FileReader(f));
        try { return r.readLine(); } finally { r.close(); }
    }
}"#;

fn main() -> vulngraph::Result<()> {
    let g = parse_and_build(&SourceUnit::new("Files.java", SRC)?)?.remove(0);
    let cfg = Node2VecConfig {
        dims: 16,
        epochs: 20,
        ..Default::default()
    };
    let model = node2vec_embed(&g, &cfg)?;
    println!(
        "loss per epoch: first {:.4}, last {:.4}",
        model.epoch_losses[0],
        model.epoch_losses.last().unwrap()
    );
    let v = &model.vectors;
    let unit: Vec<_> = v
        .rows()
        .into_iter()
        .map(|r| {
            let n = r.dot(&r).sqrt().max(1e-12);
            r.mapv(|x| x / n)
        })
        .collect();
    let name = |i: usize| {
        let n = &g.nodes[i];
        if n.label.is_empty() {
            n.kind.name().to_uppercase()
        } else {
            n.label.clone()
        }
    };
    for i in 0..g.len() {
        let best = (0..g.len())
            .filter(|&j| j != i)
            .max_by(|&a, &b| unit[i].dot(&unit[a]).total_cmp(&unit[i].dot(&unit[b])));
        if let Some(j) = best {
            println!(
                "{:<40} ~ {:<40} cos {:.3}",
                name(i),
                name(j),
                unit[i].dot(&unit[j])
            );
        }
    }
    Ok(())
}
