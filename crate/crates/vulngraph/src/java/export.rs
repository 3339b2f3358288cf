//! DOT and JSON renderings of a [`ControlFlowGraph`].
//!
//! DOT layout, one statement per line:
//!
//! ```text
//! digraph "name" {
//!   node [shape=box, fontname="monospace"];
//!   n0 [label="ENTRY", kind="entry"];
//!   n1 [label="return 1;", kind="return"];
//!   n0 -> n1;
//! }
//! ```
//!
//! Inside quoted strings `\` and `"` are backslash-escaped. Entry and exit
//! nodes carry the upper-cased kind as their visible label.

use serde::{Deserialize, Serialize};

use super::cfg::{CfgNode, ControlFlowGraph, NodeKind};
use crate::error::{Error, Result};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn display_label(n: &CfgNode) -> String {
    if n.label.is_empty() {
        n.kind.name().to_uppercase()
    } else {
        n.label.clone()
    }
}

pub fn to_dot(g: &ControlFlowGraph) -> String {
    to_dot_marked(g, &[])
}

/// DOT with `style=filled` on the `marked` nodes and bold edges between them.
pub fn to_dot_marked(g: &ControlFlowGraph, marked: &[usize]) -> String {
    let mut out = format!("digraph \"{}\" {{\n", escape(&g.method_name));
    out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
    for n in &g.nodes {
        let fill = if marked.contains(&n.id) {
            ", style=filled, fillcolor=\"#f4a582\""
        } else {
            ""
        };
        out.push_str(&format!(
            "  n{} [label=\"{}\", kind=\"{}\"{}];\n",
            n.id,
            escape(&display_label(n)),
            n.kind.name(),
            fill
        ));
    }
    for &(s, d) in &g.edges {
        if marked.contains(&s) && marked.contains(&d) {
            out.push_str(&format!(
                "  n{s} -> n{d} [color=\"#b2182b\", penwidth=2];\n"
            ));
        } else {
            out.push_str(&format!("  n{s} -> n{d};\n"));
        }
    }
    out.push_str("}\n");
    out
}

/// Nodes and edges recovered from a DOT document written by [`to_dot`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DotEdgeSet {
    pub name: String,
    pub nodes: Vec<(usize, NodeKind, String)>,
    pub edges: Vec<(usize, usize)>,
}

fn parse_quoted(s: &str) -> Option<(String, &str)> {
    let rest = s.strip_prefix('"')?;
    let mut out = String::new();
    let mut chars = rest.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '\\' => match chars.next()?.1 {
                'n' => out.push('\n'),
                other => out.push(other),
            },
            '"' => return Some((out, &rest[i + 1..])),
            c => out.push(c),
        }
    }
    None
}

fn node_id(tok: &str) -> Option<usize> {
    tok.trim().strip_prefix('n')?.parse().ok()
}

fn attr(attrs: &str, key: &str) -> Option<String> {
    let pat = format!("{key}=");
    let mut search = attrs;
    while let Some(pos) = search.find(&pat) {
        let before_ok = pos == 0 || matches!(search.as_bytes()[pos - 1], b' ' | b'[' | b',');
        let after = &search[pos + pat.len()..];
        if before_ok {
            return parse_quoted(after).map(|(v, _)| v);
        }
        search = after;
    }
    None
}

/// Reads the DOT subset produced by [`to_dot`] / [`to_dot_marked`].
pub fn from_dot(text: &str) -> Result<DotEdgeSet> {
    let bad = |detail: String| Error::format("DOT", detail);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| bad("empty document".into()))?;
    let name_part = header
        .strip_prefix("digraph")
        .and_then(|r| r.trim().strip_suffix('{'))
        .ok_or_else(|| bad(format!("bad header {header:?}")))?
        .trim();
    let name = parse_quoted(name_part)
        .map(|(n, _)| n)
        .unwrap_or_else(|| name_part.to_string());
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut closed = false;
    for line in lines {
        if line == "}" {
            closed = true;
            break;
        }
        if line.starts_with("node ") || line.starts_with("edge ") || line.starts_with("graph ") {
            continue;
        }
        let body = line.trim_end_matches(';');
        let (head, attrs) = match body.find('[') {
            Some(i) => (&body[..i], &body[i..]),
            None => (body, ""),
        };
        if let Some((a, b)) = head.split_once("->") {
            let s = node_id(a).ok_or_else(|| bad(format!("bad edge source in {line:?}")))?;
            let d = node_id(b).ok_or_else(|| bad(format!("bad edge target in {line:?}")))?;
            edges.push((s, d));
        } else {
            let id = node_id(head).ok_or_else(|| bad(format!("bad node id in {line:?}")))?;
            let kind = attr(attrs, "kind")
                .and_then(|k| NodeKind::from_name(&k))
                .ok_or_else(|| bad(format!("missing kind in {line:?}")))?;
            let mut label = attr(attrs, "label").unwrap_or_default();
            if matches!(kind, NodeKind::Entry | NodeKind::Exit) {
                label.clear();
            }
            nodes.push((id, kind, label));
        }
    }
    if !closed {
        return Err(bad("missing closing brace".into()));
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(DotEdgeSet { name, nodes, edges })
}

/// JSON shape `{method, nodes:[{id,kind,label,span}], edges:[[src,dst]]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgJson {
    pub method: String,
    pub nodes: Vec<CfgNode>,
    pub edges: Vec<(usize, usize)>,
}

pub fn to_json(g: &ControlFlowGraph) -> String {
    let doc = CfgJson {
        method: g.method_name.clone(),
        nodes: g.nodes.clone(),
        edges: g.edges.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("CFG JSON serializes")
}

pub fn from_json(text: &str) -> Result<CfgJson> {
    Ok(serde_json::from_str(text)?)
}
