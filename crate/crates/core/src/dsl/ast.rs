use std::hash::{Hash, Hasher};

use crate::morphology::MetricKind;
use crate::raster::CompareOp;

/// Byte range in the source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start, other.end)
    }
}

/// Numeric literal compared by bit pattern, so ASTs can be hashed and
/// `-0` differs from `0`.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Num {}

impl Hash for Num {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

/// Expression node. Equality and hashing ignore the span.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.kind.hash(state);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprKind {
    Band(String),
    Gradient(String),
    Compare {
        grid: Box<Expr>,
        op: CompareOp,
        value: Num,
    },
    /// Pixels within `(min_m, max_m]` of the source mask after closing it
    /// by `close_m`. `metric: None` defers to the evaluation default.
    Near {
        source: Box<Expr>,
        min_m: Num,
        max_m: Num,
        metric: Option<MetricKind>,
        close_m: Num,
    },
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    WithinPolygon(String),
    WithinDisk {
        east: Num,
        north: Num,
        radius_m: Num,
    },
    /// Pixels whose nearest source pixel lies at a bearing in
    /// `[min_deg, max_deg]`, clockwise.
    Bearing {
        source: Box<Expr>,
        min_deg: Num,
        max_deg: Num,
    },
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            span: Span::default(),
        }
    }

    pub fn with_span(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn band(name: impl Into<String>) -> Self {
        Expr::new(ExprKind::Band(name.into()))
    }

    pub fn gradient(name: impl Into<String>) -> Self {
        Expr::new(ExprKind::Gradient(name.into()))
    }

    pub fn compare(grid: Expr, op: CompareOp, value: f64) -> Self {
        Expr::new(ExprKind::Compare {
            grid: Box::new(grid),
            op,
            value: Num(value),
        })
    }

    pub fn near(source: Expr, min_m: f64, max_m: f64) -> Self {
        Expr::new(ExprKind::Near {
            source: Box::new(source),
            min_m: Num(min_m),
            max_m: Num(max_m),
            metric: None,
            close_m: Num(0.0),
        })
    }

    pub fn and(self, rhs: Expr) -> Self {
        Expr::new(ExprKind::And(Box::new(self), Box::new(rhs)))
    }

    pub fn or(self, rhs: Expr) -> Self {
        Expr::new(ExprKind::Or(Box::new(self), Box::new(rhs)))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Expr::new(ExprKind::Not(Box::new(self)))
    }

    pub fn within_polygon(id: impl Into<String>) -> Self {
        Expr::new(ExprKind::WithinPolygon(id.into()))
    }

    pub fn within_disk(east: f64, north: f64, radius_m: f64) -> Self {
        Expr::new(ExprKind::WithinDisk {
            east: Num(east),
            north: Num(north),
            radius_m: Num(radius_m),
        })
    }

    pub fn bearing(source: Expr, min_deg: f64, max_deg: f64) -> Self {
        Expr::new(ExprKind::Bearing {
            source: Box::new(source),
            min_deg: Num(min_deg),
            max_deg: Num(max_deg),
        })
    }

    /// Direct children, left to right.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Band(_) | ExprKind::Gradient(_) | ExprKind::WithinPolygon(_) | ExprKind::WithinDisk { .. } => {
                vec![]
            }
            ExprKind::Compare { grid, .. } => vec![grid],
            ExprKind::Near { source, .. } | ExprKind::Bearing { source, .. } => vec![source],
            ExprKind::Not(e) => vec![e],
            ExprKind::And(a, b) | ExprKind::Or(a, b) => vec![a, b],
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }
}
