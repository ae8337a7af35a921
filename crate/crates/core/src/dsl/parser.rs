use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{Expr, ExprKind, Num, Span};
use super::lexer::{tokenize, Tok, Token};
use crate::morphology::MetricKind;

/// Parenthesis/negation nesting beyond this is rejected rather than risking
/// the stack.
pub const MAX_NESTING: usize = 200;

/// Syntax or type error with its position. `line` and `col` are 1-based;
/// `col` counts characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseError {
    pub offset: usize,
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub fn at(src: &str, offset: usize, message: impl Into<String>, expected: Vec<String>) -> Self {
        let offset = offset.min(src.len());
        let before = &src[..floor_char_boundary(src, offset)];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let col = before[line_start..].chars().count() + 1;
        ParseError {
            offset,
            line,
            col,
            message: message.into(),
            expected,
        }
    }
}

fn floor_char_boundary(s: &str, mut i: usize) -> usize {
    while !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Token classes as they appear in expected sets.
pub const EXPECT_IDENT: &str = "identifier";
pub const EXPECT_NUMBER: &str = "number";
pub const EXPECT_EOF: &str = "end of input";

/// Parses an expression. Only syntax is checked; see [`super::typecheck`].
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src,
        toks: tokenize(src),
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected(&["&", "|", EXPECT_EOF]));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError::at(
            self.src,
            self.span().start,
            message,
            expected.iter().map(|s| s.to_string()).collect(),
        )
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let found = match self.peek() {
            Tok::Eof => "unexpected end of input".to_string(),
            Tok::Invalid(c) => format!("unexpected character `{c}`"),
            _ => format!("unexpected `{}`", &self.src[self.span().start..self.span().end]),
        };
        self.error_here(found, expected)
    }

    fn expect(&mut self, tok: Tok, text: &str) -> Result<Span, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&[text]))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => Ok((name, self.bump().span)),
            _ => Err(self.unexpected(&[EXPECT_IDENT])),
        }
    }

    fn number(&mut self) -> Result<Num, ParseError> {
        match *self.peek() {
            Tok::Number(v) if v.is_finite() => {
                self.bump();
                Ok(Num(v))
            }
            Tok::Number(_) => Err(self.error_here("number out of range", &[EXPECT_NUMBER])),
            _ => Err(self.unexpected(&[EXPECT_NUMBER])),
        }
    }

    fn nest<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T, ParseError>) -> Result<T, ParseError> {
        if self.depth >= MAX_NESTING {
            return Err(self.error_here(format!("expression nested deeper than {MAX_NESTING}"), &[]));
        }
        self.depth += 1;
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.and()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::with_span(ExprKind::Or(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.not()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.not()?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::with_span(ExprKind::And(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Bang {
            let start = self.bump().span;
            let inner = self.nest(|p| p.not())?;
            let span = start.to(inner.span);
            return Ok(Expr::with_span(ExprKind::Not(Box::new(inner)), span));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = self.span();
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let mut e = self.nest(|p| p.expr())?;
                let close = self.expect(Tok::RParen, ")")?;
                // Keep the parentheses in the span so errors can point at them.
                e.span = start.to(close);
                Ok(e)
            }
            Tok::Ident(name) if *self.peek_at(1) == Tok::LParen && is_function(&name) => {
                self.bump();
                self.bump();
                let kind = match name.as_str() {
                    "grad" => {
                        let (band, _) = self.ident()?;
                        self.expect(Tok::RParen, ")")?;
                        ExprKind::Gradient(band)
                    }
                    "near" => self.nest(|p| p.near())?,
                    "bearing" => self.nest(|p| p.bearing())?,
                    "within_polygon" => {
                        let (id, _) = self.ident()?;
                        self.expect(Tok::RParen, ")")?;
                        ExprKind::WithinPolygon(id)
                    }
                    "within_disk" => {
                        let east = self.number()?;
                        self.expect(Tok::Comma, ",")?;
                        let north = self.number()?;
                        self.expect(Tok::Comma, ",")?;
                        let radius_m = self.number()?;
                        self.expect(Tok::RParen, ")")?;
                        ExprKind::WithinDisk { east, north, radius_m }
                    }
                    _ => unreachable!("is_function"),
                };
                let e = Expr::with_span(kind, start.to(self.prev_span()));
                self.maybe_compare(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.maybe_compare(Expr::with_span(ExprKind::Band(name), start))
            }
            _ => Err(self.unexpected(&["(", "!", EXPECT_IDENT])),
        }
    }

    /// A grid reference followed by a comparison becomes `Compare`.
    fn maybe_compare(&mut self, lhs: Expr) -> Result<Expr, ParseError> {
        let Tok::Op(op) = *self.peek() else {
            return Ok(lhs);
        };
        if !matches!(lhs.kind, ExprKind::Band(_) | ExprKind::Gradient(_)) {
            return Err(self.error_here("only a band or grad(band) can be compared", &["&", "|"]));
        }
        self.bump();
        let value = self.number()?;
        let span = lhs.span.to(self.prev_span());
        Ok(Expr::with_span(
            ExprKind::Compare {
                grid: Box::new(lhs),
                op,
                value,
            },
            span,
        ))
    }

    fn near(&mut self) -> Result<ExprKind, ParseError> {
        let source = self.expr()?;
        let mut args = self.kwargs(&["min", "max", "metric", "close"])?;
        let max_m = args.take_required("max", self)?;
        Ok(ExprKind::Near {
            source: Box::new(source),
            min_m: args.take_num("min").unwrap_or(Num(0.0)),
            max_m,
            metric: args.metric,
            close_m: args.take_num("close").unwrap_or(Num(0.0)),
        })
    }

    fn bearing(&mut self) -> Result<ExprKind, ParseError> {
        let source = self.expr()?;
        let mut args = self.kwargs(&["min", "max"])?;
        let min_deg = args.take_required("min", self)?;
        let max_deg = args.take_required("max", self)?;
        Ok(ExprKind::Bearing {
            source: Box::new(source),
            min_deg,
            max_deg,
        })
    }

    /// `(',' name '=' value)* ')'`. Leaves the cursor on the closing paren's
    /// successor; missing required arguments are reported at that paren.
    fn kwargs(&mut self, allowed: &[&'static str]) -> Result<Kwargs, ParseError> {
        let mut out = Kwargs::default();
        loop {
            match self.peek() {
                Tok::RParen => {
                    out.close = self.span();
                    self.bump();
                    return Ok(out);
                }
                Tok::Comma => {
                    self.bump();
                }
                _ => return Err(self.unexpected(&[",", ")"])),
            }
            let remaining: Vec<&str> = allowed.iter().copied().filter(|k| !out.seen(k)).collect();
            let name = match self.peek() {
                Tok::Ident(n) if remaining.contains(&n.as_str()) => n.clone(),
                Tok::Ident(n) if allowed.contains(&n.as_str()) => {
                    return Err(self.error_here(format!("duplicate argument `{n}`"), &remaining));
                }
                Tok::Ident(n) => {
                    return Err(self.error_here(format!("unknown argument `{n}`"), &remaining));
                }
                _ => return Err(self.unexpected(&remaining)),
            };
            self.bump();
            self.expect(Tok::Assign, "=")?;
            if name == "metric" {
                let metric = match self.peek() {
                    Tok::Ident(m) if m == "euclidean" => MetricKind::Euclidean,
                    Tok::Ident(m) if m == "chebyshev" => MetricKind::Chebyshev,
                    Tok::Ident(m) => {
                        let m = m.clone();
                        return Err(self.error_here(format!("unknown metric `{m}`"), &["euclidean", "chebyshev"]));
                    }
                    _ => return Err(self.unexpected(&["euclidean", "chebyshev"])),
                };
                self.bump();
                out.metric = Some(metric);
                out.seen_metric = true;
            } else {
                let v = self.number()?;
                out.nums.push((name, v));
            }
        }
    }
}

#[derive(Default)]
struct Kwargs {
    nums: Vec<(String, Num)>,
    metric: Option<MetricKind>,
    seen_metric: bool,
    close: Span,
}

impl Kwargs {
    fn seen(&self, name: &str) -> bool {
        (name == "metric" && self.seen_metric) || self.nums.iter().any(|(n, _)| n == name)
    }

    fn take_num(&mut self, name: &str) -> Option<Num> {
        let i = self.nums.iter().position(|(n, _)| n == name)?;
        Some(self.nums.remove(i).1)
    }

    fn take_required(&mut self, name: &str, p: &Parser<'_>) -> Result<Num, ParseError> {
        self.take_num(name).ok_or_else(|| {
            ParseError::at(
                p.src,
                self.close.start,
                format!("missing required argument `{name}`"),
                vec![",".into()],
            )
        })
    }
}

fn is_function(name: &str) -> bool {
    matches!(name, "grad" | "near" | "bearing" | "within_polygon" | "within_disk")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::CompareOp;

    #[test]
    fn red_dirt_near_elevation_change() {
        let e = parse("near(red > 0.3, min=10, max=60) & grad(elevation) > 0.2").unwrap();
        let expect = Expr::near(Expr::compare(Expr::band("red"), CompareOp::Gt, 0.3), 10.0, 60.0).and(Expr::compare(
            Expr::gradient("elevation"),
            CompareOp::Gt,
            0.2,
        ));
        assert_eq!(e, expect);
    }

    #[test]
    fn negation_binds_tightest() {
        let e = parse("!(a&b) | c").unwrap();
        let expect = Expr::band("a").and(Expr::band("b")).not().or(Expr::band("c"));
        assert_eq!(e, expect);
    }

    #[test]
    fn unbalanced_call_reports_eof() {
        let src = "near(red > 0.3";
        let err = parse(src).unwrap_err();
        assert_eq!(err.offset, src.len());
        assert_eq!((err.line, err.col), (1, 15));
        assert!(err.expected.contains(&")".to_string()), "{err:?}");
    }

    #[test]
    fn kwargs_in_any_order() {
        let a = parse("near(x > 1, metric=chebyshev, close=20, max=50, min=5)").unwrap();
        let b = parse("near(x > 1, min=5, max=50, close=20, metric=chebyshev)").unwrap();
        assert_eq!(a, b);
        let ExprKind::Near { metric, close_m, .. } = a.kind else {
            panic!()
        };
        assert_eq!(metric, Some(MetricKind::Chebyshev));
        assert_eq!(close_m, Num(20.0));
    }

    #[test]
    fn kwarg_mistakes() {
        for (src, msg) in [
            ("near(x > 1, min=5)", "missing required argument `max`"),
            ("near(x > 1, max=5, max=6)", "duplicate argument `max`"),
            ("near(x > 1, mx=5)", "unknown argument `mx`"),
            ("near(x > 1, max=5, metric=manhattan)", "unknown metric"),
            ("bearing(x > 1, min=5)", "missing required argument `max`"),
        ] {
            let err = parse(src).unwrap_err();
            assert!(err.message.contains(msg), "{src}: {err}");
        }
    }

    #[test]
    fn line_and_column_count_characters() {
        let err = parse("a &\n  é").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
        assert_eq!(err.offset, 6);
    }

    #[test]
    fn rejects_overflowing_numbers_and_deep_nesting() {
        assert!(parse("a > 1e400").is_err());
        let deep = format!("{}a{}", "(".repeat(500), ")".repeat(500));
        assert!(parse(&deep).unwrap_err().message.contains("nested"));
        let bangs = format!("{}a", "!".repeat(500));
        assert!(parse(&bangs).is_err());
    }

    #[test]
    fn comparing_a_mask_is_a_syntax_error() {
        assert!(parse("within_polygon(p) > 3").is_err());
        assert!(parse("(a) > 3").is_err());
    }

    #[test]
    fn spans_cover_nodes() {
        let src = "a > 1 | within_disk(1, 2, 3)";
        let e = parse(src).unwrap();
        let ExprKind::Or(l, r) = &e.kind else { panic!() };
        assert_eq!(&src[l.span.start..l.span.end], "a > 1");
        assert_eq!(&src[r.span.start..r.span.end], "within_disk(1, 2, 3)");
    }
}
