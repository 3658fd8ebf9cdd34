//! Tokenizer. Comments are skipped except the `/* HCC */` patch marker, which
//! is recorded on the preceding token so the parser can restore patch flags.

use num_bigint::BigInt;
use num_traits::Num;

use super::ast::Span;
use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokKind {
    Ident(String),
    Int(BigInt),
    /// `0x` followed by exactly 40 hex digits.
    Address(String),
    Str(String),
    /// Verbatim `pragma ... ;` text.
    Pragma(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokKind,
    pub span: Span,
    /// Byte offset of the token start.
    pub offset: usize,
    /// A `/* HCC */` comment follows this token.
    pub marked: bool,
}

const PUNCTS: [&str; 30] = [
    "**", "++", "--", "+=", "-=", "==", "!=", "<=", ">=", "&&", "||", "=>", "(", ")", "{", "}", "[", "]", ";", ",", ".", "=",
    "+", "-", "*", "/", "<", ">", "!", ":",
];

pub const PATCH_MARKER: &str = "/* HCC */";

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    line_start: usize,
    tokens: Vec<Token>,
    errors: Vec<Diagnostic>,
}

impl<'a> Lexer<'a> {
    fn peek_byte(&self, ahead: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + ahead).copied()
    }

    fn span_from(&self, start: usize, start_line: u32, start_col: u32) -> Span {
        Span::new(start_line, start_col, (self.pos - start) as u32)
    }

    fn col(&self) -> u32 {
        (self.pos - self.line_start) as u32 + 1
    }

    fn bump(&mut self) {
        if self.src.as_bytes()[self.pos] == b'\n' {
            self.line += 1;
            self.line_start = self.pos + 1;
        }
        self.pos += 1;
    }

    fn skip_trivia(&mut self) {
        loop {
            match (self.peek_byte(0), self.peek_byte(1)) {
                (Some(c), _) if c.is_ascii_whitespace() => self.bump(),
                (Some(b'/'), Some(b'/')) => {
                    while self.peek_byte(0).is_some_and(|c| c != b'\n') {
                        self.bump();
                    }
                }
                (Some(b'/'), Some(b'*')) => {
                    let (start, line, col) = (self.pos, self.line, self.col());
                    let Some(end) = self.src[self.pos + 2..].find("*/") else {
                        self.errors.push(Diagnostic::syntax(Span::new(line, col, 2), "unterminated block comment"));
                        while self.pos < self.src.len() {
                            self.bump();
                        }
                        return;
                    };
                    let body = &self.src[start + 2..start + 2 + end];
                    while self.pos < start + 2 + end + 2 {
                        self.bump();
                    }
                    if body.trim() == "HCC" {
                        if let Some(t) = self.tokens.last_mut() {
                            t.marked = true;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn push(&mut self, kind: TokKind, start: usize, line: u32, col: u32) {
        let span = self.span_from(start, line, col);
        self.tokens.push(Token { kind, span, offset: start, marked: false });
    }

    fn run(mut self) -> (Vec<Token>, Vec<Diagnostic>) {
        loop {
            self.skip_trivia();
            let (start, line, col) = (self.pos, self.line, self.col());
            let Some(c) = self.peek_byte(0) else { break };
            if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
                while self.peek_byte(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'$') {
                    self.bump();
                }
                let word = &self.src[start..self.pos];
                if word == "pragma" {
                    match self.src[self.pos..].find(';') {
                        Some(end) => {
                            while self.pos < start + 6 + end + 1 {
                                self.bump();
                            }
                            let text = self.src[start..self.pos].to_string();
                            self.push(TokKind::Pragma(text), start, line, col);
                        }
                        None => {
                            self.errors.push(Diagnostic::syntax(Span::new(line, col, 6), "pragma without `;`"));
                            self.push(TokKind::Ident(word.to_string()), start, line, col);
                        }
                    }
                } else {
                    self.push(TokKind::Ident(word.to_string()), start, line, col);
                }
            } else if c.is_ascii_digit() {
                self.number(start, line, col);
            } else if c == b'"' {
                self.string(start, line, col);
            } else if let Some(p) = PUNCTS.iter().find(|p| self.src[self.pos..].starts_with(**p)) {
                for _ in 0..p.len() {
                    self.bump();
                }
                self.push(TokKind::Punct(p), start, line, col);
            } else {
                let ch = self.src[self.pos..].chars().next().unwrap();
                for _ in 0..ch.len_utf8() {
                    self.pos += 1;
                }
                self.errors
                    .push(Diagnostic::syntax(Span::new(line, col, ch.len_utf8() as u32), format!("unexpected character `{ch}`")));
            }
        }
        let (line, col) = (self.line, self.col());
        self.tokens.push(Token { kind: TokKind::Eof, span: Span::new(line, col, 0), offset: self.pos, marked: false });
        (self.tokens, self.errors)
    }

    fn number(&mut self, start: usize, line: u32, col: u32) {
        let is_hex = self.peek_byte(0) == Some(b'0') && matches!(self.peek_byte(1), Some(b'x' | b'X'));
        if is_hex {
            self.bump();
            self.bump();
            while self.peek_byte(0).is_some_and(|c| c.is_ascii_hexdigit()) {
                self.bump();
            }
        } else {
            while self.peek_byte(0).is_some_and(|c| c.is_ascii_digit() || c == b'_') {
                self.bump();
            }
        }
        if self.peek_byte(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
            while self.peek_byte(0).is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_') {
                self.bump();
            }
            let span = self.span_from(start, line, col);
            self.errors.push(Diagnostic::syntax(span, format!("malformed number `{}`", &self.src[start..self.pos])));
            return;
        }
        let text = &self.src[start..self.pos];
        if is_hex {
            let digits = &text[2..];
            if digits.is_empty() {
                let span = self.span_from(start, line, col);
                self.errors.push(Diagnostic::syntax(span, "hex literal without digits"));
            } else if digits.len() == 40 {
                self.push(TokKind::Address(digits.to_ascii_lowercase()), start, line, col);
            } else {
                let v = BigInt::from_str_radix(digits, 16).expect("validated hex digits");
                self.push(TokKind::Int(v), start, line, col);
            }
        } else {
            let v = BigInt::from_str_radix(&text.replace('_', ""), 10).expect("validated decimal digits");
            self.push(TokKind::Int(v), start, line, col);
        }
    }

    fn string(&mut self, start: usize, line: u32, col: u32) {
        self.bump();
        let mut out = String::new();
        loop {
            let Some(c) = self.src[self.pos..].chars().next() else {
                let span = self.span_from(start, line, col);
                self.errors.push(Diagnostic::syntax(span, "unterminated string"));
                return;
            };
            match c {
                '"' => {
                    self.bump();
                    break;
                }
                '\n' => {
                    let span = self.span_from(start, line, col);
                    self.errors.push(Diagnostic::syntax(span, "newline in string"));
                    return;
                }
                '\\' => {
                    self.bump();
                    let esc = self.src[self.pos..].chars().next();
                    match esc {
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        _ => {
                            let span = self.span_from(start, line, col);
                            self.errors.push(Diagnostic::syntax(span, "unknown escape in string"));
                        }
                    }
                    if let Some(e) = esc {
                        for _ in 0..e.len_utf8() {
                            self.bump();
                        }
                    }
                }
                _ => {
                    out.push(c);
                    for _ in 0..c.len_utf8() {
                        self.bump();
                    }
                }
            }
        }
        self.push(TokKind::Str(out), start, line, col);
    }
}

pub fn tokenize(src: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    Lexer { src, pos: 0, line: 1, line_start: 0, tokens: Vec::new(), errors: Vec::new() }.run()
}

/// Escape a string for emission inside double quotes.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokKind> {
        let (toks, errs) = tokenize(src);
        assert!(errs.is_empty(), "{errs:?}");
        toks.into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn punctuation_prefers_longest() {
        assert_eq!(
            kinds("a+=b**c"),
            vec![
                TokKind::Ident("a".into()),
                TokKind::Punct("+="),
                TokKind::Ident("b".into()),
                TokKind::Punct("**"),
                TokKind::Ident("c".into()),
                TokKind::Eof
            ]
        );
    }

    #[test]
    fn pragma_is_verbatim() {
        let k = kinds("pragma solidity ^0.4.15;\ncontract");
        assert_eq!(k[0], TokKind::Pragma("pragma solidity ^0.4.15;".into()));
    }

    #[test]
    fn patch_marker_attaches_to_previous_token() {
        let (toks, _) = tokenize("x = 1; /* HCC */ y = 2; /* other */");
        let semis: Vec<bool> = toks.iter().filter(|t| t.kind == TokKind::Punct(";")).map(|t| t.marked).collect();
        assert_eq!(semis, vec![true, false]);
    }

    #[test]
    fn addresses_and_spans() {
        let src = format!("x\n  0x{}", "ab".repeat(20));
        let (toks, _) = tokenize(&src);
        assert!(matches!(toks[1].kind, TokKind::Address(_)));
        assert_eq!(toks[1].span, Span::new(2, 3, 42));
    }

    #[test]
    fn strings_unescape() {
        assert_eq!(kinds(r#""a\"b""#)[0], TokKind::Str("a\"b".into()));
        assert_eq!(escape("a\"b\\"), r#"a\"b\\"#);
    }
}
