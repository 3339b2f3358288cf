//! Runs one sample through untrained models with each fusion head and prints
//! the gate weights or attention rows the head exposes.

use vulngraph::encoders::{prepare_hashed, EncoderConfig};
use vulngraph::fusion::{ForwardOptions, FusionConfig, FusionKind, Model, ModelConfig, Sample};
use vulngraph::java::{parse_and_build, SourceUnit};
use vulngraph::semantic::{Embedder, ProviderConfig};
use vulngraph::tensor::Tape;

const SRC: &str = "class Q { void run(java.sql.Statement st, String id) throws Exception { st.execute(\"DELETE FROM t WHERE id=\" + id); } }";

fn main() -> vulngraph::Result<()> {
    let g = parse_and_build(&SourceUnit::new("Q.java", SRC)?)?.remove(0);
    let enc = EncoderConfig::default();
    let pg = prepare_hashed(&g, &enc)?;
    let h_l = Embedder::from_config(&ProviderConfig::default())?
        .embed(SRC, "q")?
        .vector;

    for kind in [
        FusionKind::Concat,
        FusionKind::Gate,
        FusionKind::CrossAttention,
    ] {
        let cfg = ModelConfig {
            encoder: enc.clone(),
            fusion: FusionConfig {
                kind,
                ..Default::default()
            },
            d_l: h_l.len(),
        };
        let model = Model::init(cfg, enc.d_in, 7)?;
        let mut tape = Tape::new();
        let out = model.forward(
            &mut tape,
            &[Sample {
                graph: &pg,
                h_l: &h_l,
            }],
            ForwardOptions::default(),
            None,
        )?;
        let y = vulngraph::tensor::sigmoid(tape.value(out.logits)[[0, 0]]);
        print!(
            "{kind:?}: fused width {}, y_hat {y:.4}",
            tape.value(out.fused).ncols()
        );
        if let Some(a) = out.gates {
            let a = tape.value(a);
            print!(", a_g {:.4}, a_l {:.4}", a[[0, 0]], a[[0, 1]]);
        }
        if let Some(&att) = out.attention.first() {
            print!(
                ", attention over {} nodes {:.3?}",
                g.len(),
                tape.value(att).row(0).to_vec()
            );
        }
        println!();
    }
    Ok(())
}
