use std::fmt;

use super::ast::{Expr, ExprKind, Span};
use super::format::format;
use super::parser::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    Grid,
    Mask,
}

/// Ill-typed or out-of-range node, located by its span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError {
    pub span: Span,
    pub message: String,
}

impl TypeError {
    /// Attaches line and column information from the source text.
    pub fn locate(&self, src: &str) -> ParseError {
        ParseError::at(src, self.span.start, self.message.clone(), vec![])
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "type error at byte {}: {}", self.span.start, self.message)
    }
}

impl std::error::Error for TypeError {}

/// Checks that the root is a mask and every operator gets operands of the
/// right kind and sensible parameters.
pub fn typecheck(e: &Expr) -> Result<(), TypeError> {
    match infer(e)? {
        ValueType::Mask => Ok(()),
        ValueType::Grid => Err(err(
            e,
            format!(
                "`{}` is a grid, not a mask; compare it with a threshold such as `{} > 0`",
                format(e),
                format(e)
            ),
        )),
    }
}

/// Parses and type-checks, reporting both kinds of failure with positions.
pub fn parse_checked(src: &str) -> Result<Expr, ParseError> {
    let e = parse(src)?;
    typecheck(&e).map_err(|t| t.locate(src))?;
    Ok(e)
}

fn err(e: &Expr, message: impl Into<String>) -> TypeError {
    TypeError {
        span: e.span,
        message: message.into(),
    }
}

fn mask_operand(op: &str, e: &Expr) -> Result<(), TypeError> {
    match infer(e)? {
        ValueType::Mask => Ok(()),
        ValueType::Grid => Err(err(e, format!("{op} expects a mask, but `{}` is a grid", format(e)))),
    }
}

fn infer(e: &Expr) -> Result<ValueType, TypeError> {
    match &e.kind {
        ExprKind::Band(_) | ExprKind::Gradient(_) => Ok(ValueType::Grid),
        ExprKind::Compare { grid, value, .. } => {
            if infer(grid)? != ValueType::Grid {
                return Err(err(grid, "comparison needs a band or grad(band) on the left"));
            }
            if !value.0.is_finite() {
                return Err(err(e, "threshold must be finite"));
            }
            Ok(ValueType::Mask)
        }
        ExprKind::Near {
            source,
            min_m,
            max_m,
            close_m,
            ..
        } => {
            mask_operand("near", source)?;
            let (lo, hi, close) = (min_m.0, max_m.0, close_m.0);
            if !(lo.is_finite() && hi.is_finite() && close.is_finite()) {
                return Err(err(e, "near distances must be finite"));
            }
            if lo < 0.0 || close < 0.0 {
                return Err(err(e, "near distances must be non-negative"));
            }
            if lo >= hi {
                return Err(err(e, format!("near needs min < max, got min={lo} max={hi}")));
            }
            Ok(ValueType::Mask)
        }
        ExprKind::And(a, b) => {
            mask_operand("`&`", a)?;
            mask_operand("`&`", b)?;
            Ok(ValueType::Mask)
        }
        ExprKind::Or(a, b) => {
            mask_operand("`|`", a)?;
            mask_operand("`|`", b)?;
            Ok(ValueType::Mask)
        }
        ExprKind::Not(a) => {
            mask_operand("`!`", a)?;
            Ok(ValueType::Mask)
        }
        ExprKind::WithinPolygon(_) => Ok(ValueType::Mask),
        ExprKind::WithinDisk { east, north, radius_m } => {
            if !(east.0.is_finite() && north.0.is_finite()) {
                return Err(err(e, "disk center must be finite"));
            }
            if !(radius_m.0 > 0.0 && radius_m.0.is_finite()) {
                return Err(err(e, "disk radius must be positive"));
            }
            Ok(ValueType::Mask)
        }
        ExprKind::Bearing {
            source,
            min_deg,
            max_deg,
        } => {
            mask_operand("bearing", source)?;
            let (lo, hi) = (min_deg.0, max_deg.0);
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(err(e, "bearings must be finite"));
            }
            if hi - lo < 360.0 && lo.rem_euclid(360.0) == hi.rem_euclid(360.0) {
                return Err(err(e, "bearing interval has zero width"));
            }
            Ok(ValueType::Mask)
        }
    }
}
