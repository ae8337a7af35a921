//! The filter expression language.
//!
//! ```text
//! expr    := or
//! or      := and ('|' and)*
//! and     := not ('&' not)*
//! not     := '!' not | atom
//! atom    := '(' expr ')' | compare | call | within
//! compare := gridref op number
//! gridref := IDENT | 'grad(' IDENT ')'
//! call    := 'near(' expr (',' kwarg)* ')' | 'bearing(' expr (',' kwarg)* ')'
//! within  := 'within_polygon(' IDENT ')' | 'within_disk(' number ',' number ',' number ')'
//! kwarg   := IDENT '=' (number | IDENT)
//! ```
//!
//! `near` takes `max` (required), `min` and `close` (meters, default 0) and
//! `metric` (`euclidean` or `chebyshev`, default from the evaluation
//! options). `bearing` takes `min` and `max` in degrees clockwise from
//! north; `min > max` wraps through north.
//!
//! ```
//! use geosieve::dsl::{format, parse};
//! let e = parse("near(red > 0.3, min=10, max=60) & grad(elevation) > 0.2").unwrap();
//! assert_eq!(format(&e), "near(red > 0.3, min=10, max=60) & grad(elevation) > 0.2");
//! ```

mod ast;
mod eval;
mod format;
mod lexer;
mod parser;
mod typecheck;

pub use ast::{Expr, ExprKind, Num, Span};
pub use eval::{evaluate, evaluate_with, EvalOptions, Evaluator};
pub use format::format;
pub use parser::{parse, ParseError, EXPECT_EOF, EXPECT_IDENT, EXPECT_NUMBER, MAX_NESTING};
pub use typecheck::{parse_checked, typecheck, TypeError, ValueType};
