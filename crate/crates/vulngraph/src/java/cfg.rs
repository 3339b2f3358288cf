use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::lexer::Token;
use super::parser::{MethodDecl, Stmt, TokSpan};
use crate::error::ParseError;

/// Maximum characters kept in a node label.
pub const MAX_LABEL_CHARS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Entry,
    Exit,
    Statement,
    Branch,
    LoopHeader,
    Try,
    Catch,
    Return,
    Throw,
}

impl NodeKind {
    pub const ALL: [NodeKind; 9] = [
        NodeKind::Entry,
        NodeKind::Exit,
        NodeKind::Statement,
        NodeKind::Branch,
        NodeKind::LoopHeader,
        NodeKind::Try,
        NodeKind::Catch,
        NodeKind::Return,
        NodeKind::Throw,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Entry => "entry",
            NodeKind::Exit => "exit",
            NodeKind::Statement => "statement",
            NodeKind::Branch => "branch",
            NodeKind::LoopHeader => "loop-header",
            NodeKind::Try => "try",
            NodeKind::Catch => "catch",
            NodeKind::Return => "return",
            NodeKind::Throw => "throw",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgNode {
    pub id: usize,
    pub kind: NodeKind,
    pub label: String,
    /// First and last source line, 1-based.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFlowGraph {
    pub method_name: String,
    pub nodes: Vec<CfgNode>,
    /// Sorted, duplicate-free `(src, dst)` pairs.
    pub edges: Vec<(usize, usize)>,
    pub path: PathBuf,
    pub sample_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfgStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub max_out_degree: usize,
    pub has_cycle: bool,
}

impl ControlFlowGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn entry(&self) -> usize {
        0
    }

    pub fn exit(&self) -> usize {
        self.nodes
            .iter()
            .position(|n| n.kind == NodeKind::Exit)
            .expect("graph has an exit node")
    }

    pub fn successors(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == id).map(|e| e.1)
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.successors(id).count()
    }

    pub fn in_degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == id).count()
    }

    pub fn stats(&self) -> CfgStats {
        let mut out = vec![0usize; self.len()];
        for &(s, _) in &self.edges {
            out[s] += 1;
        }
        CfgStats {
            node_count: self.len(),
            edge_count: self.edges.len(),
            max_out_degree: out.into_iter().max().unwrap_or(0),
            has_cycle: self.has_back_edge(),
        }
    }

    /// Iterative DFS from every unvisited node; a back edge closes a cycle.
    fn has_back_edge(&self) -> bool {
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for &(s, d) in &self.edges {
            adj[s].push(d);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        for root in 0..n {
            if state[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            state[root] = 1;
            while let Some((v, i)) = stack.pop() {
                if i < adj[v].len() {
                    stack.push((v, i + 1));
                    let w = adj[v][i];
                    match state[w] {
                        1 => return true,
                        0 => {
                            state[w] = 1;
                            stack.push((w, 0));
                        }
                        _ => {}
                    }
                } else {
                    state[v] = 2;
                }
            }
        }
        false
    }

    /// Merges straight-line runs of statement nodes into single nodes.
    pub fn merge_basic_blocks(&self) -> ControlFlowGraph {
        let n = self.len();
        let mut outs = vec![Vec::new(); n];
        let mut ins = vec![0usize; n];
        for &(s, d) in &self.edges {
            outs[s].push(d);
            ins[d] += 1;
        }
        let mergeable = |u: usize, v: usize| {
            u != v
                && self.nodes[u].kind == NodeKind::Statement
                && self.nodes[v].kind == NodeKind::Statement
                && outs[u].len() == 1
                && ins[v] == 1
        };
        // leader of each node's block
        let mut leader: Vec<usize> = (0..n).collect();
        for u in 0..n {
            if let [v] = outs[u][..] {
                if mergeable(u, v) {
                    leader[v] = leader[u];
                }
            }
        }
        // leaders are assigned in id order, but a chain may run "backwards"
        // in id space; resolve transitively.
        for v in 0..n {
            let mut l = leader[v];
            while leader[l] != l {
                l = leader[l];
            }
            leader[v] = l;
        }
        let mut new_id = vec![usize::MAX; n];
        let mut nodes: Vec<CfgNode> = Vec::new();
        for v in 0..n {
            if leader[v] == v {
                new_id[v] = nodes.len();
                nodes.push(CfgNode {
                    id: nodes.len(),
                    ..self.nodes[v].clone()
                });
            }
        }
        // append members in chain order
        for v in 0..n {
            if leader[v] != v {
                continue;
            }
            let mut cur = v;
            while let [next] = outs[cur][..] {
                if leader[next] != v || next == v {
                    break;
                }
                let node = &mut nodes[new_id[v]];
                node.label = truncate_label(&format!("{} {}", node.label, self.nodes[next].label));
                node.span.1 = node.span.1.max(self.nodes[next].span.1);
                cur = next;
            }
        }
        for v in 0..n {
            new_id[v] = new_id[leader[v]];
        }
        let edges: BTreeSet<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(s, d)| leader[s] != leader[d] || !mergeable(s, d))
            .map(|&(s, d)| (new_id[s], new_id[d]))
            .collect();
        ControlFlowGraph {
            method_name: self.method_name.clone(),
            nodes,
            edges: edges.into_iter().collect(),
            path: self.path.clone(),
            sample_id: self.sample_id.clone(),
        }
    }
}

pub(crate) fn truncate_label(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.chars().count() <= MAX_LABEL_CHARS {
        collapsed
    } else {
        collapsed.chars().take(MAX_LABEL_CHARS).collect()
    }
}

const EXIT: usize = usize::MAX;

#[derive(Debug)]
enum JumpScope {
    Loop,
    Switch,
    Block,
}

#[derive(Debug)]
struct JumpCtx {
    scope: JumpScope,
    label: Option<String>,
    breaks: Vec<usize>,
    continues: Vec<usize>,
}

pub(crate) struct Builder<'a> {
    src: &'a str,
    toks: &'a [Token],
    nodes: Vec<CfgNode>,
    edges: Vec<(usize, usize)>,
    jumps: Vec<JumpCtx>,
    pending_label: Option<String>,
}

type Flow = Vec<usize>;

fn join(mut a: Flow, b: Flow) -> Flow {
    for x in b {
        if !a.contains(&x) {
            a.push(x);
        }
    }
    a
}

impl<'a> Builder<'a> {
    pub(crate) fn new(src: &'a str, toks: &'a [Token]) -> Self {
        Self {
            src,
            toks,
            nodes: Vec::new(),
            edges: Vec::new(),
            jumps: Vec::new(),
            pending_label: None,
        }
    }

    fn text(&self, span: TokSpan) -> String {
        let (a, b) = (self.toks[span.first].start, self.toks[span.last].end);
        truncate_label(&self.src[a..b])
    }

    fn lines(&self, span: TokSpan) -> (usize, usize) {
        let last = &self.toks[span.last];
        let end_line = last.line + last.text.matches('\n').count();
        (self.toks[span.first].line, end_line)
    }

    fn node(&mut self, kind: NodeKind, span: Option<TokSpan>, preds: &[usize]) -> usize {
        let id = self.nodes.len();
        let (label, lines) = match span {
            Some(s) => (self.text(s), self.lines(s)),
            None => (String::new(), (0, 0)),
        };
        self.nodes.push(CfgNode {
            id,
            kind,
            label,
            span: lines,
        });
        for &p in preds {
            self.edges.push((p, id));
        }
        id
    }

    pub(crate) fn method(
        mut self,
        decl: &MethodDecl,
        path: PathBuf,
        sample_id: String,
    ) -> Result<ControlFlowGraph, ParseError> {
        let name_line = self.toks[decl.name_token].line;
        let close_line = self.toks[decl.close].line;
        let entry = self.node(NodeKind::Entry, None, &[]);
        self.nodes[entry].span = (name_line, name_line);
        let out = self.stmts(&decl.body, vec![entry])?;
        let exit = self.nodes.len();
        self.nodes.push(CfgNode {
            id: exit,
            kind: NodeKind::Exit,
            label: String::new(),
            span: (close_line, close_line),
        });
        for p in out {
            self.edges.push((p, exit));
        }
        for e in &mut self.edges {
            if e.1 == EXIT {
                e.1 = exit;
            }
        }
        Ok(self.finish(decl.name.clone(), path, sample_id))
    }

    /// Drops unreachable nodes, renumbers densely, dedups edges, and demotes
    /// branch nodes that ended up with fewer than two successors.
    fn finish(self, method_name: String, path: PathBuf, sample_id: String) -> ControlFlowGraph {
        let n = self.nodes.len();
        let exit = n - 1;
        let mut adj = vec![Vec::new(); n];
        for &(s, d) in &self.edges {
            adj[s].push(d);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen[exit] = true;
        let mut new_id = vec![usize::MAX; n];
        let mut nodes = Vec::new();
        for (old, node) in self.nodes.into_iter().enumerate() {
            if seen[old] {
                new_id[old] = nodes.len();
                nodes.push(CfgNode {
                    id: nodes.len(),
                    ..node
                });
            }
        }
        let edges: BTreeSet<(usize, usize)> = self
            .edges
            .iter()
            .filter(|(s, d)| seen[*s] && seen[*d])
            .map(|&(s, d)| (new_id[s], new_id[d]))
            .collect();
        let edges: Vec<_> = edges.into_iter().collect();
        for node in &mut nodes {
            if node.kind == NodeKind::Branch && edges.iter().filter(|e| e.0 == node.id).count() < 2
            {
                node.kind = NodeKind::Statement;
            }
        }
        ControlFlowGraph {
            method_name,
            nodes,
            edges,
            path,
            sample_id,
        }
    }

    fn stmts(&mut self, list: &[Stmt], mut flow: Flow) -> Result<Flow, ParseError> {
        for s in list {
            flow = self.stmt(s, flow)?;
        }
        Ok(flow)
    }

    fn push_jump(&mut self, scope: JumpScope) {
        let label = self.pending_label.take();
        self.jumps.push(JumpCtx {
            scope,
            label,
            breaks: Vec::new(),
            continues: Vec::new(),
        });
    }

    fn pop_jump(&mut self) -> JumpCtx {
        self.jumps.pop().expect("balanced jump scopes")
    }

    fn stmt(&mut self, s: &Stmt, flow: Flow) -> Result<Flow, ParseError> {
        match s {
            Stmt::Empty => Ok(flow),
            Stmt::Block(list) => self.stmts(list, flow),
            Stmt::Simple(span) => Ok(vec![self.node(NodeKind::Statement, Some(*span), &flow)]),
            Stmt::If {
                header,
                then,
                otherwise,
            } => {
                let b = self.node(NodeKind::Branch, Some(*header), &flow);
                let t = self.stmt(then, vec![b])?;
                let e = match otherwise {
                    Some(o) => self.stmt(o, vec![b])?,
                    None => vec![b],
                };
                Ok(join(t, e))
            }
            Stmt::While { header, body } | Stmt::ForEach { header, body } => {
                let h = self.node(NodeKind::LoopHeader, Some(*header), &flow);
                self.push_jump(JumpScope::Loop);
                let out = self.stmt(body, vec![h])?;
                let ctx = self.pop_jump();
                for p in join(out, ctx.continues) {
                    self.edges.push((p, h));
                }
                Ok(join(vec![h], ctx.breaks))
            }
            Stmt::DoWhile { body, cond } => {
                let mark = self.nodes.len();
                self.push_jump(JumpScope::Loop);
                let out = self.stmt(body, flow)?;
                let ctx = self.pop_jump();
                let c = self.node(NodeKind::LoopHeader, Some(*cond), &join(out, ctx.continues));
                // first node created for the body is its entry; empty body loops on itself
                self.edges.push((c, mark));
                Ok(join(vec![c], ctx.breaks))
            }
            Stmt::For {
                header,
                init,
                update,
                body,
            } => {
                let flow = match init {
                    Some(i) => vec![self.node(NodeKind::Statement, Some(*i), &flow)],
                    None => flow,
                };
                let h = self.node(NodeKind::LoopHeader, Some(*header), &flow);
                self.push_jump(JumpScope::Loop);
                let out = self.stmt(body, vec![h])?;
                let ctx = self.pop_jump();
                let tail = join(out, ctx.continues);
                match update {
                    Some(u) => {
                        let u = self.node(NodeKind::Statement, Some(*u), &tail);
                        self.edges.push((u, h));
                    }
                    None => {
                        for p in tail {
                            self.edges.push((p, h));
                        }
                    }
                }
                Ok(join(vec![h], ctx.breaks))
            }
            Stmt::Switch {
                header,
                groups,
                has_default,
            } => {
                let sw = self.node(NodeKind::Branch, Some(*header), &flow);
                self.push_jump(JumpScope::Switch);
                let mut fall: Flow = Vec::new();
                let mut done: Flow = Vec::new();
                for g in groups {
                    let out = self.stmts(&g.body, join(vec![sw], fall))?;
                    if g.arrow {
                        done = join(done, out);
                        fall = Vec::new();
                    } else {
                        fall = out;
                    }
                }
                let ctx = self.pop_jump();
                let mut result = join(join(done, fall), ctx.breaks);
                if !has_default || groups.is_empty() {
                    result = join(result, vec![sw]);
                }
                Ok(result)
            }
            Stmt::Try {
                header,
                body,
                catches,
                finally,
            } => {
                let t = self.node(NodeKind::Try, Some(*header), &flow);
                let mut out = self.stmts(body, vec![t])?;
                for (span, cbody) in catches {
                    let c = self.node(NodeKind::Catch, Some(*span), &[t]);
                    let cout = self.stmts(cbody, vec![c])?;
                    out = join(out, cout);
                }
                match finally {
                    Some(f) => self.stmts(f, out),
                    None => Ok(out),
                }
            }
            Stmt::Return(span) => {
                let id = self.node(NodeKind::Return, Some(*span), &flow);
                self.edges.push((id, EXIT));
                Ok(Vec::new())
            }
            Stmt::Throw(span) => {
                let id = self.node(NodeKind::Throw, Some(*span), &flow);
                self.edges.push((id, EXIT));
                Ok(Vec::new())
            }
            Stmt::Break(span, label) => {
                let id = self.node(NodeKind::Statement, Some(*span), &flow);
                let ctx = self
                    .jumps
                    .iter_mut()
                    .rev()
                    .find(|c| match label {
                        Some(l) => c.label.as_deref() == Some(l.as_str()),
                        None => matches!(c.scope, JumpScope::Loop | JumpScope::Switch),
                    })
                    .ok_or_else(|| {
                        jump_error(
                            &self.toks[span.first],
                            "an enclosing loop or switch for break",
                        )
                    })?;
                ctx.breaks.push(id);
                Ok(Vec::new())
            }
            Stmt::Continue(span, label) => {
                let id = self.node(NodeKind::Statement, Some(*span), &flow);
                let ctx = self
                    .jumps
                    .iter_mut()
                    .rev()
                    .find(|c| {
                        matches!(c.scope, JumpScope::Loop)
                            && label
                                .as_ref()
                                .is_none_or(|l| c.label.as_deref() == Some(l.as_str()))
                    })
                    .ok_or_else(|| {
                        jump_error(&self.toks[span.first], "an enclosing loop for continue")
                    })?;
                ctx.continues.push(id);
                Ok(Vec::new())
            }
            Stmt::Labeled(label, inner) => {
                let is_target = matches!(
                    **inner,
                    Stmt::While { .. }
                        | Stmt::DoWhile { .. }
                        | Stmt::For { .. }
                        | Stmt::ForEach { .. }
                        | Stmt::Switch { .. }
                );
                self.pending_label = Some(label.clone());
                if is_target {
                    return self.stmt(inner, flow);
                }
                self.push_jump(JumpScope::Block);
                let out = self.stmt(inner, flow)?;
                let ctx = self.pop_jump();
                Ok(join(out, ctx.breaks))
            }
            Stmt::Synchronized { header, body } => {
                let n = self.node(NodeKind::Statement, Some(*header), &flow);
                self.stmts(body, vec![n])
            }
        }
    }
}

fn jump_error(t: &Token, expected: &str) -> ParseError {
    ParseError {
        line: t.line,
        column: t.column,
        expected: expected.to_string(),
    }
}
