//! Zero-shot classification through the provider interface, using a local
//! keyword provider in place of a served model.

use vulngraph::pipeline::{generate_files, CorpusConfig};
use vulngraph::semantic::{zero_shot_classify, Provider, ZeroShotTally};

/// Answers "vulnerable" when the prompt contains a risky call.
struct KeywordProvider;

impl Provider for KeywordProvider {
    fn model_name(&self) -> &str {
        "keywords"
    }

    fn embed_raw(&self, code: &str, _sample_id: &str) -> vulngraph::Result<Vec<f64>> {
        Ok(vec![code.len() as f64, 1.0])
    }

    fn generate(
        &self,
        prompt: &str,
        _max_tokens: usize,
        _temperature: f64,
    ) -> vulngraph::Result<String> {
        let risky = ["exec(", "executeQuery(\"", "\" + "]
            .iter()
            .any(|k| prompt.contains(k));
        Ok(if risky {
            "Vulnerable."
        } else {
            "Looks safe to me."
        }
        .to_string())
    }
}

fn main() -> vulngraph::Result<()> {
    let files = generate_files(&CorpusConfig {
        files: 60,
        ..Default::default()
    });
    let mut tally = ZeroShotTally::default();
    for f in &files {
        let r = zero_shot_classify(&f.source, &KeywordProvider, 8000)?;
        tally.record(&r, f.label);
    }
    println!(
        "answered {}, abstained {}, accuracy {:.3}",
        tally.answered,
        tally.abstentions,
        tally.accuracy()
    );
    Ok(())
}
