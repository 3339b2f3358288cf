use crate::error::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// Byte range in the source.
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && matches!(self.kind, TokenKind::Ident | TokenKind::Punct)
    }
}

// longest first so greedy matching picks `>>>=` over `>>`
const PUNCTS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "{", "}", "(", ")", "[", "]", ";",
    ",", ".", "@", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn error(&self, expected: &str) -> ParseError {
        ParseError {
            line: self.line,
            column: self.col,
            expected: expected.to_string(),
        }
    }
}

/// Splits Java source into tokens, dropping whitespace and comments.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor {
        src,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        if cur.starts_with("/*") {
            cur.bump();
            cur.bump();
            loop {
                if cur.starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(cur.error("end of block comment"));
                }
            }
            continue;
        }

        let (start, line, column) = (cur.pos, cur.line, cur.col);
        let kind = if c.is_alphabetic() || c == '_' || c == '$' {
            while cur
                .peek()
                .is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$')
            {
                cur.bump();
            }
            TokenKind::Ident
        } else if c.is_ascii_digit()
            || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()))
        {
            lex_number(&mut cur);
            TokenKind::Number
        } else if cur.starts_with("\"\"\"") {
            for _ in 0..3 {
                cur.bump();
            }
            loop {
                if cur.starts_with("\\") {
                    cur.bump();
                    cur.bump();
                    continue;
                }
                if cur.starts_with("\"\"\"") {
                    for _ in 0..3 {
                        cur.bump();
                    }
                    break;
                }
                if cur.bump().is_none() {
                    return Err(cur.error("end of text block"));
                }
            }
            TokenKind::Str
        } else if c == '"' || c == '\'' {
            cur.bump();
            loop {
                match cur.bump() {
                    Some('\\') => {
                        cur.bump();
                    }
                    Some(q) if q == c => break,
                    Some('\n') | None => {
                        let expected = if c == '"' {
                            "closing '\"'"
                        } else {
                            "closing '''"
                        };
                        return Err(ParseError {
                            line,
                            column,
                            expected: expected.into(),
                        });
                    }
                    Some(_) => {}
                }
            }
            if c == '"' {
                TokenKind::Str
            } else {
                TokenKind::Char
            }
        } else {
            let Some(p) = PUNCTS.iter().find(|p| cur.starts_with(p)) else {
                return Err(cur.error("a token"));
            };
            for _ in 0..p.len() {
                cur.bump();
            }
            TokenKind::Punct
        };
        out.push(Token {
            kind,
            text: src[start..cur.pos].to_string(),
            start,
            end: cur.pos,
            line,
            column,
        });
    }
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>) {
    if cur.starts_with("0x")
        || cur.starts_with("0X")
        || cur.starts_with("0b")
        || cur.starts_with("0B")
    {
        cur.bump();
        cur.bump();
        while cur
            .peek()
            .is_some_and(|c| c.is_ascii_hexdigit() || c == '_')
        {
            cur.bump();
        }
    } else {
        while cur
            .peek()
            .is_some_and(|c| c.is_ascii_digit() || c == '_' || c == '.')
        {
            cur.bump();
        }
        if cur.peek().is_some_and(|c| c == 'e' || c == 'E') {
            cur.bump();
            if cur.peek().is_some_and(|c| c == '+' || c == '-') {
                cur.bump();
            }
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
    if cur.peek().is_some_and(|c| "lLfFdD".contains(c)) {
        cur.bump();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        tokenize(src).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn splits_operators_greedily() {
        assert_eq!(texts("a>>>=b->c"), ["a", ">>>=", "b", "->", "c"]);
    }

    #[test]
    fn skips_comments_and_keeps_strings() {
        assert_eq!(
            texts("x = \"a // b\"; // tail\n/* block */ y;"),
            ["x", "=", "\"a // b\"", ";", "y", ";"]
        );
    }

    #[test]
    fn numbers_with_suffix_and_exponent() {
        assert_eq!(
            texts("1.5e-3f 0xFFL 10_000"),
            ["1.5e-3f", "0xFFL", "10_000"]
        );
    }

    #[test]
    fn unterminated_string_is_an_error() {
        let err = tokenize("String s = \"abc;\n").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn tracks_lines() {
        let toks = tokenize("a\n  b").unwrap();
        assert_eq!((toks[1].line, toks[1].column), (2, 3));
    }
}
