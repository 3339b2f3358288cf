//! Drives the command-line interface in-process: corpus, training, evaluation
//! and explanation in one temporary run directory.

use vulngraph::cli::main_with_args;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join("vulngraph-cli-example");
    let _ = std::fs::remove_dir_all(&root);
    let p = |s: &str| root.join(s).display().to_string();

    main_with_args([
        "vulngraph",
        "gen-corpus",
        "--files",
        "60",
        "--out",
        &p("corpus"),
    ])?;
    main_with_args([
        "vulngraph",
        "train",
        "--corpus",
        &p("corpus"),
        "--epochs",
        "4",
        "--out",
        &p("run"),
    ])?;
    main_with_args([
        "vulngraph",
        "evaluate",
        "--manifest",
        &p("run/manifest.csv"),
        "--checkpoint",
        &p("run/model.vgck"),
        "--out",
        &p("eval"),
    ])?;
    main_with_args([
        "vulngraph",
        "explain",
        "--manifest",
        &p("run/manifest.csv"),
        "--checkpoint",
        &p("run/model.vgck"),
        "--k",
        "3",
        "--limit",
        "2",
        "--out",
        &p("explain"),
    ])?;
    for dir in ["run", "eval", "explain"] {
        let mut names: Vec<_> = std::fs::read_dir(root.join(dir))?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect();
        names.sort();
        println!("{dir}/: {}", names.join(" "));
    }
    Ok(())
}
