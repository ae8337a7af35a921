//! Request preparation and evaluation shared by the CLI and the HTTP API, so
//! both produce the same report for the same inputs.

use std::collections::BTreeMap;

use geosieve::dsl::{evaluate_with, format, parse_checked, EvalOptions, Expr, ParseError};
use geosieve::geo::{disk_mask, searchable_area, AreaReport};
use geosieve::morphology::MetricKind;
use geosieve::scenario::Scenario;
use geosieve::BitMask;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MAX_EXPR_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRequest {
    pub expr: String,
    #[serde(default)]
    pub metric: Option<MetricKind>,
    /// Polygon id to AND into the expression.
    #[serde(default)]
    pub clip_polygon: Option<String>,
    /// Camera id whose obfuscation disk is ANDed into the expression.
    #[serde(default)]
    pub clip_disk: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("expression is {0} bytes; the limit is {MAX_EXPR_BYTES}")]
    TooLarge(usize),
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] geosieve::Error),
}

/// A checked expression with clips applied, ready to evaluate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub expr: Expr,
    pub canonical: String,
    pub metric: MetricKind,
    /// Content hash of the canonical text and metric.
    pub key: String,
}

pub fn prepare(scenario: &Scenario, req: &EvalRequest) -> Result<Prepared, QueryError> {
    if req.expr.len() > MAX_EXPR_BYTES {
        return Err(QueryError::TooLarge(req.expr.len()));
    }
    let mut expr = parse_checked(&req.expr)?;
    if let Some(id) = &req.clip_polygon {
        scenario.polygon(id)?;
        expr = expr.and(Expr::within_polygon(id.clone()));
    }
    if let Some(id) = &req.clip_disk {
        let cam = scenario.camera(id)?;
        let (e, n) = cam.published_location;
        expr = expr.and(Expr::within_disk(e, n, cam.obfuscation_radius));
    }
    let metric = req.metric.unwrap_or(MetricKind::Euclidean);
    let canonical = format(&expr);
    let key = mask_key(&canonical, metric);
    Ok(Prepared {
        expr,
        canonical,
        metric,
        key,
    })
}

pub fn mask_key(canonical: &str, metric: MetricKind) -> String {
    let mut h = Sha256::new();
    h.update(metric.name().as_bytes());
    h.update([0]);
    h.update(canonical.as_bytes());
    hex::encode(h.finalize())
}

pub fn evaluate(scenario: &Scenario, p: &Prepared) -> Result<BitMask, QueryError> {
    let opts = EvalOptions {
        metric: p.metric,
        ..Default::default()
    };
    Ok(evaluate_with(&p.expr, scenario, opts)?)
}

/// Baselines for reports: the raster extent and each camera's obfuscation
/// disk as rasterized on the grid.
pub fn baselines(scenario: &Scenario) -> Result<BTreeMap<String, f64>, QueryError> {
    let stack = &scenario.stack;
    let gt = stack.geotransform();
    let (w, h) = (stack.width(), stack.height());
    let km2 = |pixels: u64| pixels as f64 * gt.pixel_area() / 1e6;
    let mut out = BTreeMap::from([("extent".to_string(), km2((w * h) as u64))]);
    for cam in &scenario.cameras {
        let pixels = disk_mask(&cam.disk()?, gt, w, h).count_ones();
        if pixels > 0 {
            out.insert(format!("disk:{}", cam.id), km2(pixels));
        }
    }
    Ok(out)
}

pub fn report(scenario: &Scenario, mask: &BitMask) -> Result<AreaReport, QueryError> {
    Ok(searchable_area(
        mask,
        scenario.stack.geotransform(),
        &baselines(scenario)?,
    )?)
}
