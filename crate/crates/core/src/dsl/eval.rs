use std::collections::HashMap;
use std::rc::Rc;

use super::ast::{Expr, ExprKind};
use super::typecheck::typecheck;
use crate::error::{Error, Result};
use crate::facing::{bearing_filter, BearingInterval};
use crate::geo::{disk_mask, rasterize_multipolygon, ObfuscationDisk};
use crate::mask::BitMask;
use crate::morphology::{donut, MetricKind};
use crate::raster::{gradient_of_grid, threshold, GridF32};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Metric for `near` calls that do not name one.
    pub metric: MetricKind,
    /// Reuse results for structurally identical sub-expressions.
    pub memoize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            metric: MetricKind::Euclidean,
            memoize: true,
        }
    }
}

pub fn evaluate(expr: &Expr, scenario: &Scenario) -> Result<BitMask> {
    evaluate_with(expr, scenario, EvalOptions::default())
}

pub fn evaluate_with(expr: &Expr, scenario: &Scenario, opts: EvalOptions) -> Result<BitMask> {
    Evaluator::new(scenario, opts).eval(expr)
}

#[derive(Clone)]
enum Value<'s> {
    Band(&'s GridF32),
    Grid(Rc<GridF32>),
    Mask(Rc<BitMask>),
}

/// Single-evaluation state. The memo is keyed by expression content, so a
/// repeated sub-expression is computed once.
pub struct Evaluator<'s, 'e> {
    scenario: &'s Scenario,
    opts: EvalOptions,
    memo: HashMap<&'e Expr, Value<'s>>,
    computed: usize,
}

impl<'s, 'e> Evaluator<'s, 'e> {
    pub fn new(scenario: &'s Scenario, opts: EvalOptions) -> Self {
        Evaluator {
            scenario,
            opts,
            memo: HashMap::new(),
            computed: 0,
        }
    }

    /// Nodes actually computed so far (memo hits excluded).
    pub fn computed(&self) -> usize {
        self.computed
    }

    pub fn eval(&mut self, expr: &'e Expr) -> Result<BitMask> {
        typecheck(expr)?;
        match self.value(expr)? {
            Value::Mask(m) => Ok(Rc::unwrap_or_clone(m)),
            _ => unreachable!("typecheck guarantees a mask root"),
        }
    }

    fn mask(&mut self, expr: &'e Expr) -> Result<Rc<BitMask>> {
        match self.value(expr)? {
            Value::Mask(m) => Ok(m),
            _ => unreachable!("typecheck guarantees a mask operand"),
        }
    }

    fn value(&mut self, expr: &'e Expr) -> Result<Value<'s>> {
        if self.opts.memoize {
            if let Some(v) = self.memo.get(expr) {
                return Ok(v.clone());
            }
        }
        let v = self.compute(expr)?;
        self.computed += 1;
        if self.opts.memoize {
            self.memo.insert(expr, v.clone());
        }
        Ok(v)
    }

    fn compute(&mut self, expr: &'e Expr) -> Result<Value<'s>> {
        let sc = self.scenario;
        let stack = &sc.stack;
        let gt = stack.geotransform();
        let (w, h) = (stack.width(), stack.height());
        let mask = |m: BitMask| Ok(Value::Mask(Rc::new(m)));
        match &expr.kind {
            ExprKind::Band(name) => Ok(Value::Band(stack.band(name)?)),
            ExprKind::Gradient(name) => Ok(Value::Grid(Rc::new(gradient_of_grid(
                stack.band(name)?,
                gt.pixel_size,
            )?))),
            ExprKind::Compare { grid, op, value } => {
                let g = self.value(grid)?;
                let g = match &g {
                    Value::Band(g) => *g,
                    Value::Grid(g) => g.as_ref(),
                    Value::Mask(_) => unreachable!("typecheck guarantees a grid operand"),
                };
                mask(threshold(g, *op, value.0)?)
            }
            ExprKind::Near {
                source,
                min_m,
                max_m,
                metric,
                close_m,
            } => {
                let src = self.mask(source)?;
                let metric = metric.unwrap_or(self.opts.metric);
                let close = metric.radius(close_m.0, gt.pixel_size)?;
                mask(donut(&src, min_m.0, max_m.0, metric, close, gt.pixel_size)?)
            }
            ExprKind::And(a, b) => {
                let a = self.mask(a)?;
                let b = self.mask(b)?;
                mask(a.and(&b)?)
            }
            ExprKind::Or(a, b) => {
                let a = self.mask(a)?;
                let b = self.mask(b)?;
                mask(a.or(&b)?)
            }
            ExprKind::Not(a) => {
                let a = self.mask(a)?;
                mask(a.not())
            }
            ExprKind::WithinPolygon(id) => {
                let poly = sc.polygons.get(id).ok_or_else(|| Error::Name {
                    kind: "polygon",
                    name: id.clone(),
                    available: sc.polygons.keys().cloned().collect(),
                })?;
                mask(rasterize_multipolygon(poly, gt, w, h))
            }
            ExprKind::WithinDisk { east, north, radius_m } => {
                let disk = ObfuscationDisk::new((east.0, north.0), radius_m.0)?;
                mask(disk_mask(&disk, gt, w, h))
            }
            ExprKind::Bearing {
                source,
                min_deg,
                max_deg,
            } => {
                let src = self.mask(source)?;
                let iv = BearingInterval::new(min_deg.0, max_deg.0)?;
                // No landmark, no bearing to it.
                if src.is_empty() {
                    return mask(stack.empty_mask());
                }
                mask(bearing_filter(&stack.full_mask(), &src, &iv, gt)?)
            }
        }
    }
}
