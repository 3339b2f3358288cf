//! Recursive-descent parser for the statement-level Java subset.
//!
//! Expressions are never parsed: a simple statement is the token run up to
//! the next `;` at bracket depth zero, so lambdas and anonymous classes ride
//! along as opaque text.

use super::lexer::{Token, TokenKind};
use crate::error::ParseError;

/// Inclusive token index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokSpan {
    pub first: usize,
    pub last: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Block(Vec<Stmt>),
    Empty,
    Simple(TokSpan),
    If {
        header: TokSpan,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    While {
        header: TokSpan,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: TokSpan,
    },
    For {
        header: TokSpan,
        init: Option<TokSpan>,
        update: Option<TokSpan>,
        body: Box<Stmt>,
    },
    ForEach {
        header: TokSpan,
        body: Box<Stmt>,
    },
    Switch {
        header: TokSpan,
        groups: Vec<SwitchGroup>,
        has_default: bool,
    },
    Try {
        header: TokSpan,
        body: Vec<Stmt>,
        catches: Vec<(TokSpan, Vec<Stmt>)>,
        finally: Option<Vec<Stmt>>,
    },
    Return(TokSpan),
    Throw(TokSpan),
    Break(TokSpan, Option<String>),
    Continue(TokSpan, Option<String>),
    Labeled(String, Box<Stmt>),
    Synchronized {
        header: TokSpan,
        body: Vec<Stmt>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchGroup {
    pub arrow: bool,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub name: String,
    pub name_token: usize,
    pub body: Vec<Stmt>,
    /// Token index of the closing brace.
    pub close: usize,
}

const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "static",
    "final",
    "abstract",
    "native",
    "synchronized",
    "transient",
    "volatile",
    "strictfp",
    "default",
    "sealed",
];

const TYPE_KEYWORDS: &[&str] = &["class", "interface", "enum", "record"];

const STMT_KEYWORDS: &[&str] = &[
    "if",
    "else",
    "while",
    "do",
    "for",
    "switch",
    "case",
    "try",
    "catch",
    "finally",
    "return",
    "throw",
    "break",
    "continue",
    "synchronized",
    "default",
    "new",
    "this",
    "super",
    "class",
];

pub struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
    eof: (usize, usize),
}

impl<'t> Parser<'t> {
    pub fn new(toks: &'t [Token], src: &str) -> Self {
        let line = src.lines().count().max(1);
        let column = src.lines().last().map_or(1, |l| l.chars().count() + 1);
        Self {
            toks,
            pos: 0,
            eof: (line, column),
        }
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.toks.get(self.pos + n)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(text))
    }

    fn error(&self, expected: &str) -> ParseError {
        let (line, column) = self.peek().map_or(self.eof, |t| (t.line, t.column));
        ParseError {
            line,
            column,
            expected: expected.to_string(),
        }
    }

    fn expect(&mut self, text: &str) -> Result<usize, ParseError> {
        if self.at(text) {
            self.pos += 1;
            Ok(self.pos - 1)
        } else {
            Err(self.error(&format!("'{text}'")))
        }
    }

    /// Consumes a balanced group starting at the current opener and returns
    /// the index of its closer.
    fn skip_balanced(&mut self) -> Result<usize, ParseError> {
        let mut stack: Vec<&str> = Vec::new();
        loop {
            let Some(tok) = self.peek() else {
                return Err(self.error(&format!("'{}'", stack.last().copied().unwrap_or(")"))));
            };
            if tok.kind == TokenKind::Punct {
                match tok.text.as_str() {
                    "(" => stack.push(")"),
                    "[" => stack.push("]"),
                    "{" => stack.push("}"),
                    close @ (")" | "]" | "}") if stack.pop() != Some(close) => {
                        return Err(self.error("balanced brackets"));
                    }
                    _ => {}
                }
            }
            self.pos += 1;
            if stack.is_empty() {
                return Ok(self.pos - 1);
            }
        }
    }

    /// Consumes tokens up to and including the next `;` at depth zero.
    fn skip_to_semicolon(&mut self) -> Result<usize, ParseError> {
        loop {
            let Some(tok) = self.peek() else {
                return Err(self.error("';'"));
            };
            if tok.kind == TokenKind::Punct {
                match tok.text.as_str() {
                    ";" => {
                        self.pos += 1;
                        return Ok(self.pos - 1);
                    }
                    "(" | "[" | "{" => {
                        self.skip_balanced()?;
                        continue;
                    }
                    ")" | "]" | "}" => return Err(self.error("';'")),
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    fn skip_annotation(&mut self) -> Result<(), ParseError> {
        self.expect("@")?;
        self.pos += 1;
        while self.at(".") {
            self.pos += 2;
        }
        if self.at("(") {
            self.skip_balanced()?;
        }
        Ok(())
    }

    fn skip_modifiers(&mut self) -> Result<(), ParseError> {
        loop {
            if self.at("@") && !self.peek_at(1).is_some_and(|t| t.is("interface")) {
                self.skip_annotation()?;
            } else if self
                .peek()
                .is_some_and(|t| t.kind == TokenKind::Ident && MODIFIERS.contains(&t.text.as_str()))
                // `synchronized (` starts a statement, not a modifier
                && !self.peek_at(1).is_some_and(|t| t.is("("))
            {
                self.pos += 1;
            } else if self.at("non") && self.peek_at(1).is_some_and(|t| t.is("-")) {
                self.pos += 3;
            } else {
                return Ok(());
            }
        }
    }

    /// Parses a compilation unit (or a bare sequence of members) and returns
    /// every method body in source order, including nested types.
    pub fn compilation_unit(&mut self) -> Result<Vec<MethodDecl>, ParseError> {
        let mut methods = Vec::new();
        self.members(false, &mut methods)?;
        Ok(methods)
    }

    fn members(&mut self, in_body: bool, out: &mut Vec<MethodDecl>) -> Result<(), ParseError> {
        loop {
            let Some(tok) = self.peek() else {
                if in_body {
                    return Err(self.error("'}'"));
                }
                return Ok(());
            };
            if tok.is("}") {
                if in_body {
                    self.pos += 1;
                    return Ok(());
                }
                return Err(self.error("a declaration"));
            }
            if tok.is(";") {
                self.pos += 1;
                continue;
            }
            if !in_body && (tok.is("package") || tok.is("import")) {
                self.skip_to_semicolon()?;
                continue;
            }
            self.skip_modifiers()?;
            if self.at("{") {
                // initializer block
                self.skip_balanced()?;
                continue;
            }
            if (self.at("@")
                || self
                    .peek()
                    .is_some_and(|t| TYPE_KEYWORDS.contains(&t.text.as_str())))
                && self.is_type_decl()
            {
                self.type_decl(out)?;
                continue;
            }
            self.member(out)?;
        }
    }

    fn is_type_decl(&self) -> bool {
        match self.peek() {
            Some(t) if t.is("@") => self.peek_at(1).is_some_and(|t| t.is("interface")),
            Some(t) if t.is("record") => {
                self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident)
                    && self.peek_at(2).is_some_and(|t| t.is("(") || t.is("<"))
            }
            Some(t) => TYPE_KEYWORDS.contains(&t.text.as_str()),
            None => false,
        }
    }

    fn type_decl(&mut self, out: &mut Vec<MethodDecl>) -> Result<(), ParseError> {
        let is_enum = self.at("enum");
        if self.at("@") {
            self.pos += 1;
        }
        self.pos += 1;
        // header: name, generics, record components, extends/implements
        loop {
            match self.peek() {
                None => return Err(self.error("'{'")),
                Some(t) if t.is("{") => break,
                Some(t) if t.is("(") => {
                    self.skip_balanced()?;
                }
                Some(t) if t.is(";") || t.is("}") => return Err(self.error("'{'")),
                Some(_) => self.pos += 1,
            }
        }
        self.expect("{")?;
        if is_enum {
            // constants, possibly with bodies, up to `;` or the closing brace
            loop {
                match self.peek() {
                    None => return Err(self.error("'}'")),
                    Some(t) if t.is(";") => {
                        self.pos += 1;
                        break;
                    }
                    Some(t) if t.is("}") => {
                        self.pos += 1;
                        return Ok(());
                    }
                    Some(t) if t.is("(") || t.is("{") => {
                        self.skip_balanced()?;
                    }
                    Some(_) => self.pos += 1,
                }
            }
        }
        self.members(true, out)
    }

    fn member(&mut self, out: &mut Vec<MethodDecl>) -> Result<(), ParseError> {
        let start = self.pos;
        loop {
            let Some(tok) = self.peek() else {
                return Err(self.error("a member declaration"));
            };
            if tok.kind == TokenKind::Punct {
                match tok.text.as_str() {
                    "=" | ";" => {
                        self.pos = start;
                        self.skip_to_semicolon()?;
                        return Ok(());
                    }
                    "(" => {
                        let prev = self.pos.checked_sub(1).filter(|&p| p >= start);
                        let Some(name_idx) =
                            prev.filter(|&p| self.toks[p].kind == TokenKind::Ident)
                        else {
                            return Err(self.error("a method name"));
                        };
                        self.skip_balanced()?;
                        return self.method_rest(name_idx, out);
                    }
                    "[" => {
                        self.skip_balanced()?;
                        continue;
                    }
                    "{" | "}" | ")" | "]" => return Err(self.error("a member declaration")),
                    _ => {}
                }
            }
            self.pos += 1;
        }
    }

    fn method_rest(
        &mut self,
        name_idx: usize,
        out: &mut Vec<MethodDecl>,
    ) -> Result<(), ParseError> {
        loop {
            match self.peek() {
                None => return Err(self.error("method body")),
                Some(t) if t.is(";") => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(t) if t.is("default") => {
                    self.skip_to_semicolon()?;
                    return Ok(());
                }
                Some(t) if t.is("{") => break,
                Some(t) if t.is("}") || t.is(")") || t.is("=") => {
                    return Err(self.error("method body"));
                }
                Some(_) => self.pos += 1,
            }
        }
        let body = self.block()?;
        out.push(MethodDecl {
            name: self.toks[name_idx].text.clone(),
            name_token: name_idx,
            body,
            close: self.pos - 1,
        });
        Ok(())
    }

    /// `{ stmt* }`
    pub fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect("{")?;
        let mut stmts = Vec::new();
        while !self.at("}") {
            if self.peek().is_none() {
                return Err(self.error("'}'"));
            }
            stmts.push(self.statement()?);
        }
        self.pos += 1;
        Ok(stmts)
    }

    fn paren_header(&mut self, first: usize) -> Result<TokSpan, ParseError> {
        if !self.at("(") {
            return Err(self.error("'('"));
        }
        let last = self.skip_balanced()?;
        Ok(TokSpan { first, last })
    }

    fn keyword_span(&mut self) -> Result<TokSpan, ParseError> {
        let first = self.pos;
        let last = self.skip_to_semicolon()?;
        Ok(TokSpan { first, last })
    }

    pub fn statement(&mut self) -> Result<Stmt, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(self.error("a statement"));
        };
        let first = self.pos;
        if tok.kind == TokenKind::Punct {
            return match tok.text.as_str() {
                "{" => Ok(Stmt::Block(self.block()?)),
                ";" => {
                    self.pos += 1;
                    Ok(Stmt::Empty)
                }
                "}" | ")" | "]" => Err(self.error("a statement")),
                _ => Ok(Stmt::Simple(self.keyword_span()?)),
            };
        }
        if tok.kind == TokenKind::Ident
            && !STMT_KEYWORDS.contains(&tok.text.as_str())
            && self.peek_at(1).is_some_and(|t| t.is(":"))
        {
            let label = tok.text.clone();
            self.pos += 2;
            return Ok(Stmt::Labeled(label, Box::new(self.statement()?)));
        }
        match tok.text.as_str() {
            "if" => {
                self.pos += 1;
                let header = self.paren_header(first)?;
                let then = Box::new(self.statement()?);
                let otherwise = if self.at("else") {
                    self.pos += 1;
                    Some(Box::new(self.statement()?))
                } else {
                    None
                };
                Ok(Stmt::If {
                    header,
                    then,
                    otherwise,
                })
            }
            "while" => {
                self.pos += 1;
                let header = self.paren_header(first)?;
                let body = Box::new(self.statement()?);
                Ok(Stmt::While { header, body })
            }
            "do" => {
                self.pos += 1;
                let body = Box::new(self.statement()?);
                let cond_first = self.expect("while")?;
                let cond = self.paren_header(cond_first)?;
                self.expect(";")?;
                Ok(Stmt::DoWhile { body, cond })
            }
            "for" => self.for_statement(),
            "switch" => self.switch_statement(),
            "try" => self.try_statement(),
            "return" => Ok(Stmt::Return(self.keyword_span()?)),
            "throw" => Ok(Stmt::Throw(self.keyword_span()?)),
            "break" | "continue" => {
                let is_break = tok.text == "break";
                self.pos += 1;
                let label = match self.peek() {
                    Some(t) if t.kind == TokenKind::Ident => {
                        self.pos += 1;
                        Some(t.text.clone())
                    }
                    _ => None,
                };
                let last = self.expect(";")?;
                let span = TokSpan { first, last };
                Ok(if is_break {
                    Stmt::Break(span, label)
                } else {
                    Stmt::Continue(span, label)
                })
            }
            "synchronized" if self.peek_at(1).is_some_and(|t| t.is("(")) => {
                self.pos += 1;
                let header = self.paren_header(first)?;
                let body = self.block()?;
                Ok(Stmt::Synchronized { header, body })
            }
            "else" | "case" | "catch" | "finally" => Err(self.error("a statement")),
            _ => {
                // local class declarations are kept as one opaque statement
                let save = self.pos;
                self.skip_modifiers()?;
                if self.is_type_decl() && !self.at("@") {
                    while !self.at("{") {
                        if self.peek().is_none() || self.at(";") {
                            return Err(self.error("'{'"));
                        }
                        self.pos += 1;
                    }
                    let last = self.skip_balanced()?;
                    return Ok(Stmt::Simple(TokSpan { first, last }));
                }
                self.pos = save;
                Ok(Stmt::Simple(self.keyword_span()?))
            }
        }
    }

    fn for_statement(&mut self) -> Result<Stmt, ParseError> {
        let first = self.pos;
        self.pos += 1;
        if !self.at("(") {
            return Err(self.error("'('"));
        }
        let open = self.pos;
        let close = self.skip_balanced()?;
        let header = TokSpan { first, last: close };

        // split the parenthesized part on depth-1 `;` / `:`
        let mut semis = Vec::new();
        let mut colon = None;
        let mut depth = 0usize;
        for i in open + 1..close {
            let t = &self.toks[i];
            if t.kind != TokenKind::Punct {
                continue;
            }
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                ";" if depth == 0 => semis.push(i),
                ":" if depth == 0 && colon.is_none() => colon = Some(i),
                _ => {}
            }
        }
        let body = Box::new(self.statement()?);
        if semis.is_empty() {
            if colon.is_none() {
                let saved = self.pos;
                self.pos = close;
                let err = self.error("';' or ':' in for header");
                self.pos = saved;
                return Err(err);
            }
            return Ok(Stmt::ForEach { header, body });
        }
        if semis.len() != 2 {
            return Err(ParseError {
                line: self.toks[close].line,
                column: self.toks[close].column,
                expected: "two ';' in for header".into(),
            });
        }
        let part = |a: usize, b: usize| {
            (a < b).then_some(TokSpan {
                first: a,
                last: b - 1,
            })
        };
        Ok(Stmt::For {
            header,
            init: part(open + 1, semis[0]),
            update: part(semis[1] + 1, close),
            body,
        })
    }

    fn switch_statement(&mut self) -> Result<Stmt, ParseError> {
        let first = self.pos;
        self.pos += 1;
        let header = self.paren_header(first)?;
        self.expect("{")?;
        let mut groups: Vec<SwitchGroup> = Vec::new();
        let mut has_default = false;
        let mut pending_labels = false;
        loop {
            match self.peek() {
                None => return Err(self.error("'}'")),
                Some(t) if t.is("}") => {
                    self.pos += 1;
                    break;
                }
                Some(t) if t.is("case") || t.is("default") => {
                    if t.is("default") {
                        has_default = true;
                    }
                    self.pos += 1;
                    let mut depth = 0usize;
                    let arrow = loop {
                        let Some(t) = self.peek() else {
                            return Err(self.error("':' or '->'"));
                        };
                        self.pos += 1;
                        match t.text.as_str() {
                            "(" | "[" | "{" if t.kind == TokenKind::Punct => depth += 1,
                            ")" | "]" | "}" if t.kind == TokenKind::Punct => {
                                depth = depth
                                    .checked_sub(1)
                                    .ok_or_else(|| self.error("':' or '->'"))?
                            }
                            ":" if depth == 0 => break false,
                            "->" if depth == 0 => break true,
                            ";" => return Err(self.error("':' or '->'")),
                            _ => {}
                        }
                    };
                    if arrow {
                        let body = match self.statement()? {
                            Stmt::Block(b) => b,
                            s => vec![s],
                        };
                        groups.push(SwitchGroup { arrow: true, body });
                        pending_labels = false;
                    } else if !pending_labels {
                        groups.push(SwitchGroup {
                            arrow: false,
                            body: Vec::new(),
                        });
                        pending_labels = true;
                    }
                }
                Some(_) => {
                    let Some(group) = groups.last_mut().filter(|g| !g.arrow) else {
                        return Err(self.error("'case' or 'default'"));
                    };
                    group.body.push(self.statement()?);
                    pending_labels = false;
                }
            }
        }
        Ok(Stmt::Switch {
            header,
            groups,
            has_default,
        })
    }

    fn try_statement(&mut self) -> Result<Stmt, ParseError> {
        let first = self.pos;
        self.pos += 1;
        let mut header = TokSpan { first, last: first };
        let has_resources = self.at("(");
        if has_resources {
            header.last = self.skip_balanced()?;
        }
        let body = self.block()?;
        let mut catches = Vec::new();
        while self.at("catch") {
            let cfirst = self.pos;
            self.pos += 1;
            let span = self.paren_header(cfirst)?;
            catches.push((span, self.block()?));
        }
        let finally = if self.at("finally") {
            self.pos += 1;
            Some(self.block()?)
        } else {
            None
        };
        if catches.is_empty() && finally.is_none() && !has_resources {
            return Err(self.error("'catch' or 'finally'"));
        }
        Ok(Stmt::Try {
            header,
            body,
            catches,
            finally,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::lexer::tokenize;

    fn methods(src: &str) -> Result<Vec<MethodDecl>, ParseError> {
        let toks = tokenize(src).unwrap();
        Parser::new(&toks, src).compilation_unit()
    }

    #[test]
    fn finds_methods_in_nested_types() {
        let src = r#"
            package a.b;
            import java.util.*;
            @Deprecated
            public class Outer<T> extends Base implements Runnable {
                private int x = 3;
                private Runnable r = new Runnable() { public void run() { } };
                static { x = 1; }
                public Outer() { this.x = 2; }
                public <U> List<U> make(U u) throws Exception { return null; }
                abstract void nothing();
                enum Color { RED("r") { void f(){} }, GREEN("g"); Color(String s) {} void g() {} }
                interface I { default void d() { } void e(); }
                record P(int a, int b) { int sum() { return a + b; } }
                public void run() {}
            }
        "#;
        let names: Vec<_> = methods(src).unwrap().into_iter().map(|m| m.name).collect();
        assert_eq!(names, ["Outer", "make", "Color", "g", "d", "sum", "run"]);
    }

    #[test]
    fn bare_method_is_accepted() {
        assert_eq!(methods("void f(){}").unwrap().len(), 1);
    }

    #[test]
    fn missing_semicolon_reports_position() {
        let err = methods("void f() {\n  int x = 1\n}").unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.expected, "';'");
    }

    #[test]
    fn unclosed_method_body() {
        assert!(methods("class A { void f() { return; ").is_err());
    }

    #[test]
    fn try_without_handlers_is_rejected() {
        assert!(methods("void f() { try { a(); } b(); }").is_err());
    }

    #[test]
    fn lambda_bodies_stay_opaque() {
        let m = methods("void f() { list.forEach(x -> { if (x) { g(); } }); h(); }").unwrap();
        assert_eq!(m[0].body.len(), 2);
        assert!(matches!(m[0].body[0], Stmt::Simple(_)));
    }

    #[test]
    fn arrow_and_colon_switches() {
        let m = methods(
            "void f(int k) { switch (k) { case 1, 2 -> a(); default -> { b(); } } \
             switch (k) { case 1: case 2: a(); break; default: b(); } }",
        )
        .unwrap();
        let Stmt::Switch {
            groups,
            has_default,
            ..
        } = &m[0].body[0]
        else {
            panic!()
        };
        assert_eq!(groups.len(), 2);
        assert!(*has_default && groups[0].arrow);
        let Stmt::Switch { groups, .. } = &m[0].body[1] else {
            panic!()
        };
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].body.len(), 2);
    }
}
