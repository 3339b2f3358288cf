//! Java front end: tokenizer, statement-level parser and per-method
//! control-flow graph construction.
//!
//! One node per statement. Branches fan out to their arms and rejoin at the
//! next statement; loops get a header node with a back edge from the end of
//! the body; `return`/`throw` jump straight to the exit node; a `try` node
//! has edges into its body and into every `catch` head.

mod cfg;
mod export;
mod lexer;
mod parser;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, ParseError, Result};

pub use cfg::{CfgNode, CfgStats, ControlFlowGraph, NodeKind, MAX_LABEL_CHARS};
pub use export::{from_dot, from_json, to_dot, to_dot_marked, to_json, CfgJson, DotEdgeSet};
pub use lexer::{tokenize, Token, TokenKind};

/// A source file (or snippet) and its content hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: PathBuf,
    pub text: String,
    pub sample_id: String,
}

/// Hex SHA-256 of `text`.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl SourceUnit {
    pub fn new(path: impl Into<PathBuf>, text: impl Into<String>) -> Result<Self> {
        let path = path.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::format(
                "source unit",
                format!("{} is empty", path.display()),
            ));
        }
        let sample_id = content_hash(&text);
        Ok(Self {
            path,
            text,
            sample_id,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(path, text)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CfgOptions {
    /// Collapse straight-line statement runs into single nodes.
    pub merge_basic_blocks: bool,
}

/// Parses `unit` and returns one CFG per method body, in source order.
pub fn parse_and_build(unit: &SourceUnit) -> Result<Vec<ControlFlowGraph>, ParseError> {
    parse_and_build_with(unit, CfgOptions::default())
}

pub fn parse_and_build_with(
    unit: &SourceUnit,
    opts: CfgOptions,
) -> Result<Vec<ControlFlowGraph>, ParseError> {
    let toks = tokenize(&unit.text)?;
    let methods = parser::Parser::new(&toks, &unit.text).compilation_unit()?;
    methods
        .iter()
        .map(|m| {
            let g = cfg::Builder::new(&unit.text, &toks).method(
                m,
                unit.path.clone(),
                unit.sample_id.clone(),
            )?;
            Ok(if opts.merge_basic_blocks {
                g.merge_basic_blocks()
            } else {
                g
            })
        })
        .collect()
}

pub fn cfg_stats(g: &ControlFlowGraph) -> CfgStats {
    g.stats()
}
