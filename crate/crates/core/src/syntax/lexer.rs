//! Tokenizer for the Dafny subset.
//!
//! Every byte of the input ends up either inside a token or inside a
//! trivia item (whitespace, line comment, block comment). Trivia is attached
//! to the token that follows it; whatever trails the last token is kept in
//! [`TokenStream::trailing`].

use std::ops::Range;

use thiserror::Error;

pub type Span = Range<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    /// `:=`
    Assign,
    /// `==`
    Eq,
    /// `!=`
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    /// Any other operator or punctuation.
    Op,
}

impl TokenKind {
    pub fn is_open(self) -> bool {
        matches!(self, TokenKind::LParen | TokenKind::LBrace | TokenKind::LBracket)
    }

    pub fn is_close(self) -> bool {
        matches!(self, TokenKind::RParen | TokenKind::RBrace | TokenKind::RBracket)
    }

    pub(crate) fn closer(self) -> Option<TokenKind> {
        match self {
            TokenKind::LParen => Some(TokenKind::RParen),
            TokenKind::LBrace => Some(TokenKind::RBrace),
            TokenKind::LBracket => Some(TokenKind::RBracket),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriviaKind {
    Whitespace,
    LineComment,
    BlockComment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trivia {
    pub kind: TriviaKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
    /// Trivia between the previous token (or start of input) and this one.
    pub leading: Vec<Trivia>,
}

impl Token {
    pub fn text<'s>(&self, source: &'s str) -> &'s str {
        &source[self.span.clone()]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub trailing: Vec<Trivia>,
}

impl TokenStream {
    pub fn kinds(&self) -> Vec<TokenKind> {
        self.tokens.iter().map(|t| t.kind).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal starting at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("unterminated comment starting at byte {offset}")]
    UnterminatedComment { offset: usize },
}

impl LexError {
    pub fn offset(&self) -> usize {
        match self {
            LexError::UnterminatedString { offset } | LexError::UnterminatedComment { offset } => {
                *offset
            }
        }
    }
}

// Longest operators first.
const MULTI_OPS: &[&str] = &[
    "<==>", "==>", "<==", "::", ":=", ":|", ":-", "==", "!=", "<=", ">=", "&&", "||", "..", "!!",
    "=>", "->", "<-",
];

pub fn tokenize(source: &str) -> Result<TokenStream, LexError> {
    let bytes = source.as_bytes();
    let mut pos = 0;
    let mut pending: Vec<Trivia> = Vec::new();
    let mut tokens = Vec::new();

    while pos < bytes.len() {
        let b = bytes[pos];
        let rest = &source[pos..];

        if b.is_ascii_whitespace() {
            let end = scan_while(bytes, pos, |c| c.is_ascii_whitespace());
            pending.push(Trivia { kind: TriviaKind::Whitespace, span: pos..end });
            pos = end;
            continue;
        }
        if rest.starts_with("//") {
            let end = rest.find('\n').map_or(bytes.len(), |i| pos + i);
            pending.push(Trivia { kind: TriviaKind::LineComment, span: pos..end });
            pos = end;
            continue;
        }
        if rest.starts_with("/*") {
            let end = scan_block_comment(bytes, pos)?;
            pending.push(Trivia { kind: TriviaKind::BlockComment, span: pos..end });
            pos = end;
            continue;
        }

        let (kind, end) = if b == b'"' {
            (TokenKind::Str, scan_string(bytes, pos, pos + 1)?)
        } else if b == b'@' && bytes.get(pos + 1) == Some(&b'"') {
            (TokenKind::Str, scan_verbatim_string(bytes, pos)?)
        } else if b == b'\'' {
            match scan_char(bytes, pos) {
                Some(end) => (TokenKind::Char, end),
                None => (TokenKind::Op, pos + 1),
            }
        } else if is_ident_start(b) {
            (TokenKind::Ident, scan_while(bytes, pos, is_ident_continue))
        } else if b.is_ascii_digit() {
            (TokenKind::Number, scan_number(bytes, pos))
        } else if !b.is_ascii() {
            // Non-ASCII outside strings and comments: keep the whole scalar as an operator.
            let ch = rest.chars().next().unwrap_or('\u{fffd}');
            (TokenKind::Op, pos + ch.len_utf8())
        } else {
            scan_punct(rest, pos)
        };

        tokens.push(Token { kind, span: pos..end, leading: std::mem::take(&mut pending) });
        pos = end;
    }

    Ok(TokenStream { tokens, trailing: pending })
}

fn scan_while(bytes: &[u8], start: usize, pred: impl Fn(u8) -> bool) -> usize {
    let mut i = start;
    while i < bytes.len() && pred(bytes[i]) {
        i += 1;
    }
    i
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'\'' || b == b'?'
}

// Block comments nest in Dafny.
fn scan_block_comment(bytes: &[u8], start: usize) -> Result<usize, LexError> {
    let mut depth = 0usize;
    let mut i = start;
    while i + 1 < bytes.len() {
        match (bytes[i], bytes[i + 1]) {
            (b'/', b'*') => {
                depth += 1;
                i += 2;
            }
            (b'*', b'/') => {
                depth -= 1;
                i += 2;
                if depth == 0 {
                    return Ok(i);
                }
            }
            _ => i += 1,
        }
    }
    Err(LexError::UnterminatedComment { offset: start })
}

fn scan_string(bytes: &[u8], start: usize, body: usize) -> Result<usize, LexError> {
    let mut i = body;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'"' => return Ok(i + 1),
            _ => i += 1,
        }
    }
    Err(LexError::UnterminatedString { offset: start })
}

fn scan_verbatim_string(bytes: &[u8], start: usize) -> Result<usize, LexError> {
    let mut i = start + 2;
    while i < bytes.len() {
        if bytes[i] == b'"' {
            if bytes.get(i + 1) == Some(&b'"') {
                i += 2;
                continue;
            }
            return Ok(i + 1);
        }
        i += 1;
    }
    Err(LexError::UnterminatedString { offset: start })
}

fn scan_char(bytes: &[u8], start: usize) -> Option<usize> {
    let mut i = start + 1;
    match bytes.get(i)? {
        b'\\' => {
            i += 1;
            if bytes.get(i) == Some(&b'u') {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        b'\'' | b'\n' => return None,
        b => {
            // Skip one UTF-8 scalar.
            i += utf8_width(*b);
        }
    }
    (bytes.get(i) == Some(&b'\'')).then_some(i + 1)
}

fn utf8_width(first: u8) -> usize {
    match first {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

fn scan_number(bytes: &[u8], start: usize) -> usize {
    if bytes[start] == b'0' && matches!(bytes.get(start + 1), Some(b'x') | Some(b'X')) {
        return scan_while(bytes, start + 2, |c| c.is_ascii_hexdigit() || c == b'_');
    }
    let mut i = scan_while(bytes, start, |c| c.is_ascii_digit() || c == b'_');
    // A fractional part only when a digit follows the dot, so `a[1..2]` stays a range.
    if bytes.get(i) == Some(&b'.') && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
        i = scan_while(bytes, i + 1, |c| c.is_ascii_digit() || c == b'_');
    }
    i
}

fn scan_punct(rest: &str, pos: usize) -> (TokenKind, usize) {
    for op in MULTI_OPS {
        if rest.starts_with(op) {
            let kind = match *op {
                ":=" => TokenKind::Assign,
                "==" => TokenKind::Eq,
                "!=" => TokenKind::Neq,
                "<=" => TokenKind::Le,
                ">=" => TokenKind::Ge,
                _ => TokenKind::Op,
            };
            return (kind, pos + op.len());
        }
    }
    let kind = match rest.as_bytes()[0] {
        b'(' => TokenKind::LParen,
        b')' => TokenKind::RParen,
        b'{' => TokenKind::LBrace,
        b'}' => TokenKind::RBrace,
        b'[' => TokenKind::LBracket,
        b']' => TokenKind::RBracket,
        b',' => TokenKind::Comma,
        b';' => TokenKind::Semi,
        b':' => TokenKind::Colon,
        b'.' => TokenKind::Dot,
        b'<' => TokenKind::Lt,
        b'>' => TokenKind::Gt,
        _ => TokenKind::Op,
    };
    (kind, pos + 1)
}
