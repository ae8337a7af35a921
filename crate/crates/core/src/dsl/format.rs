use std::fmt::Write;

use super::ast::{Expr, ExprKind, Num};

const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;

/// Canonical text: minimal parentheses, default arguments omitted, numbers
/// in shortest round-trip form.
pub fn format(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, OR);
    out
}

fn precedence(e: &Expr) -> u8 {
    match e.kind {
        ExprKind::Or(..) => OR,
        ExprKind::And(..) => AND,
        ExprKind::Not(_) => NOT,
        _ => NOT + 1,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let paren = precedence(e) < min_prec;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Band(name) => out.push_str(name),
        ExprKind::Gradient(name) => {
            let _ = write!(out, "grad({name})");
        }
        ExprKind::Compare { grid, op, value } => {
            // Well-typed trees only compare band references.
            write_expr(out, grid, NOT + 1);
            let _ = write!(out, " {} {}", op.symbol(), num(*value));
        }
        ExprKind::Or(a, b) => {
            write_expr(out, a, OR);
            out.push_str(" | ");
            write_expr(out, b, AND);
        }
        ExprKind::And(a, b) => {
            write_expr(out, a, AND);
            out.push_str(" & ");
            write_expr(out, b, NOT);
        }
        ExprKind::Not(a) => {
            out.push('!');
            write_expr(out, a, NOT);
        }
        ExprKind::Near {
            source,
            min_m,
            max_m,
            metric,
            close_m,
        } => {
            out.push_str("near(");
            write_expr(out, source, OR);
            if *min_m != Num(0.0) {
                let _ = write!(out, ", min={}", num(*min_m));
            }
            let _ = write!(out, ", max={}", num(*max_m));
            if let Some(m) = metric {
                let _ = write!(out, ", metric={}", m.name());
            }
            if *close_m != Num(0.0) {
                let _ = write!(out, ", close={}", num(*close_m));
            }
            out.push(')');
        }
        ExprKind::Bearing {
            source,
            min_deg,
            max_deg,
        } => {
            out.push_str("bearing(");
            write_expr(out, source, OR);
            let _ = write!(out, ", min={}, max={})", num(*min_deg), num(*max_deg));
        }
        ExprKind::WithinPolygon(id) => {
            let _ = write!(out, "within_polygon({id})");
        }
        ExprKind::WithinDisk { east, north, radius_m } => {
            let _ = write!(out, "within_disk({}, {}, {})", num(*east), num(*north), num(*radius_m));
        }
    }
    if paren {
        out.push(')');
    }
}

fn num(n: Num) -> String {
    format!("{}", n.0)
}
