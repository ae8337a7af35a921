use super::ast::Span;
use crate::raster::CompareOp;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    LParen,
    RParen,
    Comma,
    Assign,
    Amp,
    Pipe,
    Bang,
    Op(CompareOp),
    /// A character no token starts with.
    Invalid(char),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Tokenizes the whole input. Never fails: stray characters become
/// [`Tok::Invalid`] so the parser can report them with an expected set.
pub(crate) fn tokenize(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match b {
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'&' => Tok::Amp,
            b'|' => Tok::Pipe,
            b'!' => Tok::Bang,
            b'=' => Tok::Assign,
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                if eq {
                    i += 1;
                }
                Tok::Op(match (b, eq) {
                    (b'<', false) => CompareOp::Lt,
                    (b'<', true) => CompareOp::Le,
                    (_, false) => CompareOp::Gt,
                    (_, true) => CompareOp::Ge,
                })
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i + 1 < bytes.len() && (bytes[i + 1].is_ascii_alphanumeric() || bytes[i + 1] == b'_') {
                    i += 1;
                }
                Tok::Ident(src[start..=i].to_string())
            }
            b'0'..=b'9' | b'-' | b'.' => match scan_number(bytes, i) {
                Some(end) => {
                    i = end - 1;
                    // The scanned text is always valid float syntax.
                    Tok::Number(src[start..end].parse().expect("scanned number"))
                }
                None => Tok::Invalid(b as char),
            },
            _ => {
                let c = src[i..].chars().next().expect("in bounds");
                i += c.len_utf8() - 1;
                Tok::Invalid(c)
            }
        };
        i += 1;
        out.push(Token {
            tok,
            span: Span::new(start, i),
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(src.len(), src.len()),
    });
    out
}

/// `-? digits ('.' digits)? ([eE] [+-]? digits)?`; returns the end offset.
fn scan_number(b: &[u8], mut i: usize) -> Option<usize> {
    let digits = |mut i: usize| {
        let s = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        (i > s).then_some(i)
    };
    if b[i] == b'-' {
        i += 1;
    }
    i = digits(i)?;
    if i < b.len() && b[i] == b'.' {
        i = digits(i + 1)?;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if let Some(end) = digits(j) {
            i = end;
        }
    }
    Some(i)
}
