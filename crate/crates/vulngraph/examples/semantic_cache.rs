//! Embeds source files through a provider, snapshots the results into an
//! embedding cache and reads them back through the `file:` endpoint.

use vulngraph::semantic::{build_provider, l2_normalized, Embedder, ProviderConfig};

fn main() -> vulngraph::Result<()> {
    let snippets = [
        (
            "a",
            "class A { void f(String s) { Runtime.getRuntime().exec(s); } }",
        ),
        ("b", "class B { int g(int x) { return x + 1; } }"),
        ("c", "class C { int h(int y) { return y + 2; } }"),
    ];
    let stub = Embedder::from_config(&ProviderConfig::default())?;
    for (id, code) in snippets {
        let e = stub.embed(code, id)?;
        println!("{id}: d_l {} via {}", e.d_l, e.model_name);
    }
    let sim = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let v: Vec<_> = snippets
        .iter()
        .map(|(id, c)| stub.embed(c, id).unwrap().vector)
        .collect();
    let u: Vec<_> = v.iter().map(|x| l2_normalized(x)).collect();
    println!(
        "cos(b, c) {:.3}  cos(a, b) {:.3}",
        sim(&u[1], &u[2]),
        sim(&u[0], &u[1])
    );

    let path = std::env::temp_dir().join("vulngraph-example.vgec");
    stub.snapshot().write(&path)?;
    println!("cache written to {}", path.display());

    let cfg = ProviderConfig {
        endpoint: format!("file:{}", path.display()),
        ..Default::default()
    };
    let replay = Embedder::new(build_provider(&cfg)?, cfg.max_chars);
    let back = replay.embed("ignored by the file backend", "b")?;
    assert_eq!(back.vector, v[1]);
    println!("file backend returned the cached vector for b");
    match replay.embed("class M {}", "missing") {
        Err(e) => println!("unknown sample: {e}"),
        Ok(_) => unreachable!("sample was never cached"),
    }
    Ok(())
}
