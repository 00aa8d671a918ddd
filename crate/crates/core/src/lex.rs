//! Tokenizer shared by the query parser and the PRISM reader.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    /// Decimal literal kept verbatim so it can be read as an exact rational.
    Decimal(String),
    Str(String),
    Sym(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Decimal(d) => write!(f, "`{d}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Sym(s) => write!(f, "`{s}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LexError {
    pub pos: Pos,
    pub message: String,
}

// Longest symbols first so `->`, `<=`, `=>`, `..`, `=?` win over their prefixes.
const SYMBOLS: &[&str] = &[
    "->", "<=", ">=", "=>", "!=", "..", "=?", "[", "]", "(", ")", ";", ":", "'", "=", "<", ">",
    "&", "|", "+", "-", "/", "!", ",",
];

pub(crate) fn tokenize(text: &str) -> Result<Vec<Spanned>, LexError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize, chars: &[char]| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1, &chars);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1, &chars);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Spanned { tok: Tok::Ident(chars[start..i].iter().collect()), pos });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut decimal = false;
            // `0..6` is a range, `0.7` a decimal.
            if i < chars.len()
                && chars[i] == '.'
                && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())
            {
                decimal = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    decimal = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = if decimal {
                Tok::Decimal(text)
            } else {
                Tok::Int(text.parse().map_err(|_| LexError {
                    pos,
                    message: format!("integer literal {text} out of range"),
                })?)
            };
            out.push(Spanned { tok, pos });
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < chars.len() && chars[j] != '"' {
                if chars[j] == '\n' {
                    break;
                }
                s.push(chars[j]);
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(LexError { pos, message: "unterminated string".into() });
            }
            let n = j + 1 - i;
            advance(&mut i, &mut line, &mut col, n, &chars);
            out.push(Spanned { tok: Tok::Str(s), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                advance(&mut i, &mut line, &mut col, sym.len(), &chars);
                out.push(Spanned { tok: Tok::Sym(sym), pos });
            }
            None => {
                return Err(LexError { pos, message: format!("unexpected character {c:?}") });
            }
        }
    }
    Ok(out)
}

/// Cursor over a token stream with position-aware errors.
pub(crate) struct Cursor {
    toks: Vec<Spanned>,
    at: usize,
    end: Pos,
}

impl Cursor {
    pub fn new(toks: Vec<Spanned>, text: &str) -> Self {
        let line = text.lines().count().max(1);
        let column = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
        Cursor { toks, at: 0, end: Pos { line, column } }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|s| &s.tok)
    }

    pub fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.at + offset).map(|s| &s.tok)
    }

    pub fn pos(&self) -> Pos {
        self.toks.get(self.at).map(|s| s.pos).unwrap_or(self.end)
    }

    pub fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|s| s.tok.clone());
        if t.is_some() {
            self.at += 1;
        }
        t
    }

    pub fn at_end(&self) -> bool {
        self.at >= self.toks.len()
    }

    pub fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_ident(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == word) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    pub fn describe_next(&self) -> String {
        match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".into(),
        }
    }
}
