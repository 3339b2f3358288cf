//! Parses Java source into per-method control-flow graphs and prints them as
//! DOT and JSON, before and after basic-block merging.
//!
//! cargo run --example extract_cfg -- [File.java]

use vulngraph::java::{parse_and_build, to_dot, to_json, SourceUnit};

const DEMO: &str = r#"
class Lookup {
    String find(java.sql.Connection c, String name) throws Exception {
        if (name == null) {
            return null;
        }
        String q = "SELECT id FROM users WHERE name = '" + name + "'";
        java.sql.ResultSet rs = c.createStatement().executeQuery(q);
        while (rs.next()) {
            String id = rs.getString(1);
            if (id.isEmpty()) continue;
            return id;
        }
        return "";
    }
}
"#;

fn main() -> vulngraph::Result<()> {
    let unit = match std::env::args().nth(1) {
        Some(path) => SourceUnit::read(path.as_ref())?,
        None => SourceUnit::new("Lookup.java", DEMO)?,
    };
    for g in parse_and_build(&unit)? {
        let s = g.stats();
        println!(
            "method {}: {} nodes, {} edges, max out-degree {}, cycle {}",
            g.method_name, s.node_count, s.edge_count, s.max_out_degree, s.has_cycle
        );
        println!("{}", to_dot(&g));
        let merged = g.merge_basic_blocks();
        println!(
            "merged into {} basic blocks:\n{}",
            merged.len(),
            to_json(&merged)
        );
    }
    Ok(())
}
