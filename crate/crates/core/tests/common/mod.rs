//! Brute-force oracles and random generators shared by the integration
//! tests (and the acceptance suite, which includes this file by path).
#![allow(dead_code)]

use geosieve::dsl::{Expr, ExprKind, Num};
use geosieve::geo::{Point, Polygon};
use geosieve::morphology::{MetricKind, Radius};
use geosieve::{BitMask, CompareOp};
use rand::Rng;

/// Whether offset `(dr, dc)` pixels is within `radius`.
pub fn within(dr: i64, dc: i64, radius: Radius, pixel_size: f64) -> bool {
    match radius {
        Radius::Chebyshev(r) => dr.abs().max(dc.abs()) <= r as i64,
        Radius::Euclidean(m) => (((dr * dr + dc * dc) as f64).sqrt() * pixel_size) <= m * (1.0 + 1e-10),
    }
}

fn reach(radius: Radius, pixel_size: f64) -> i64 {
    match radius {
        Radius::Chebyshev(r) => r as i64,
        Radius::Euclidean(m) => (m / pixel_size).ceil() as i64 + 1,
    }
}

fn offsets(radius: Radius, pixel_size: f64) -> Vec<(i64, i64)> {
    let k = reach(radius, pixel_size);
    let mut out = Vec::new();
    for dr in -k..=k {
        for dc in -k..=k {
            if within(dr, dc, radius, pixel_size) {
                out.push((dr, dc));
            }
        }
    }
    out
}

fn at(mask: &BitMask, r: i64, c: i64) -> Option<bool> {
    let (w, h) = mask.dims();
    (r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w).then(|| mask.get(r as usize, c as usize))
}

pub fn brute_dilate(mask: &BitMask, radius: Radius, pixel_size: f64) -> BitMask {
    let offs = offsets(radius, pixel_size);
    BitMask::from_fn(mask.width(), mask.height(), |r, c| {
        offs.iter()
            .any(|&(dr, dc)| at(mask, r as i64 + dr, c as i64 + dc) == Some(true))
    })
}

/// Minimum filter where everything outside the raster counts as unset.
pub fn brute_erode(mask: &BitMask, radius: Radius, pixel_size: f64) -> BitMask {
    let offs = offsets(radius, pixel_size);
    BitMask::from_fn(mask.width(), mask.height(), |r, c| {
        offs.iter()
            .all(|&(dr, dc)| at(mask, r as i64 + dr, c as i64 + dc) == Some(true))
    })
}

pub fn brute_closing(mask: &BitMask, radius: Radius, pixel_size: f64) -> BitMask {
    brute_erode(&brute_dilate(mask, radius, pixel_size), radius, pixel_size)
}

/// Per-pixel classification by distance to the nearest closed-source pixel.
pub fn brute_donut(
    mask: &BitMask,
    min_m: f64,
    max_m: f64,
    metric: MetricKind,
    close: Radius,
    pixel_size: f64,
) -> BitMask {
    let closed = brute_closing(mask, close, pixel_size);
    let sites: Vec<(i64, i64)> = closed.iter_ones().map(|(r, c)| (r as i64, c as i64)).collect();
    let radius = |m: f64| match metric {
        MetricKind::Chebyshev => Radius::Chebyshev((m / pixel_size).round() as u32),
        MetricKind::Euclidean => Radius::Euclidean(m),
    };
    let (inner, outer) = (radius(min_m), radius(max_m));
    BitMask::from_fn(mask.width(), mask.height(), |r, c| {
        let near = |rad| {
            sites
                .iter()
                .any(|&(sr, sc)| within(r as i64 - sr, c as i64 - sc, rad, pixel_size))
        };
        near(outer) && !near(inner)
    })
}

/// Classic crossing-number test over every ring.
pub fn pnpoly(poly: &Polygon, (x, y): Point) -> bool {
    let mut inside = false;
    for ring in poly.rings() {
        let n = ring.len();
        let mut j = n - 1;
        for i in 0..n {
            let (xi, yi) = ring[i];
            let (xj, yj) = ring[j];
            if ((yi > y) != (yj > y)) && (x < (xj - xi) * (y - yi) / (yj - yi) + xi) {
                inside = !inside;
            }
            j = i;
        }
    }
    inside
}

pub fn random_mask<R: Rng>(rng: &mut R, w: usize, h: usize) -> BitMask {
    match rng.random_range(0..3) {
        0 => {
            let p = rng.random_range(0.0..1.0);
            BitMask::from_fn(w, h, |_, _| rng.random_bool(p))
        }
        1 => {
            let p = rng.random_range(0.0..0.05);
            BitMask::from_fn(w, h, |_, _| rng.random_bool(p))
        }
        _ => {
            // Union of a few blobs.
            let blobs: Vec<(f64, f64, f64)> = (0..rng.random_range(1..5))
                .map(|_| {
                    (
                        rng.random_range(0.0..h as f64),
                        rng.random_range(0.0..w as f64),
                        rng.random_range(0.5..(w.min(h) as f64 / 3.0).max(1.0)),
                    )
                })
                .collect();
            BitMask::from_fn(w, h, |r, c| {
                blobs.iter().any(|&(br, bc, rad)| {
                    let (dr, dc) = (r as f64 - br, c as f64 - bc);
                    dr * dr + dc * dc <= rad * rad
                })
            })
        }
    }
}

/// A Euclidean radius in meters: whole pixels, a lattice distance, or an
/// arbitrary value, all at most 8 pixels.
pub fn random_euclidean_m<R: Rng>(rng: &mut R, pixel_size: f64) -> f64 {
    match rng.random_range(0..3) {
        0 => rng.random_range(0..=8) as f64 * pixel_size,
        1 => {
            let (a, b) = (rng.random_range(0..=5), rng.random_range(0..=5));
            ((a * a + b * b) as f64).sqrt() * pixel_size
        }
        _ => rng.random_range(0.0..8.0) * pixel_size,
    }
}

pub fn random_convex_polygon<R: Rng>(rng: &mut R, extent: f64) -> Polygon {
    let k = rng.random_range(3..=12);
    let cx = rng.random_range(-0.1..1.1) * extent;
    let cy = rng.random_range(-0.1..1.1) * extent;
    let rad = rng.random_range(0.05..0.8) * extent;
    let mut angles: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let ring = angles
        .iter()
        .map(|a| (cx + rad * a.cos(), cy + rad * a.sin()))
        .collect();
    Polygon::new(ring, vec![]).expect("at least three distinct angles")
}

/// Ten fixed precedence cases: source and fully bracketed structure.
pub const PRECEDENCE_TABLE: [(&str, &str); 10] = [
    ("!(a&b) | c", "(| (! (& a b)) c)"),
    ("a | b & c", "(| a (& b c))"),
    ("a & b | c", "(| (& a b) c)"),
    ("!a & b", "(& (! a) b)"),
    ("a | b | c", "(| (| a b) c)"),
    ("a & b & c", "(& (& a b) c)"),
    ("!!a | b", "(| (! (! a)) b)"),
    ("a & (b | c)", "(& a (| b c))"),
    ("!(a | b) & c", "(& (! (| a b)) c)"),
    ("a | !b & !c | d", "(| (| a (& (! b) (! c))) d)"),
];

/// Boolean structure as an s-expression; leaves use their canonical text.
pub fn sexpr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::And(a, b) => format!("(& {} {})", sexpr(a), sexpr(b)),
        ExprKind::Or(a, b) => format!("(| {} {})", sexpr(a), sexpr(b)),
        ExprKind::Not(a) => format!("(! {})", sexpr(a)),
        _ => geosieve::dsl::format(e),
    }
}

/// Vocabulary for random expressions; defaults match the synthetic scenario.
pub struct Vocab {
    pub bands: Vec<String>,
    pub polygons: Vec<String>,
    /// Extent of the raster frame in meters, for disk centers.
    pub extent: f64,
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab {
            bands: ["elevation", "red", "green", "blue"].map(String::from).to_vec(),
            polygons: vec!["park".into()],
            extent: 640.0,
        }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [String]) -> &'a str {
    &xs[rng.random_range(0..xs.len())]
}

fn random_number<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(0..100) as f64,
        1 => rng.random_range(-1.0..1.0),
        2 => (rng.random_range(-1000.0..1000.0f64) * 100.0).round() / 100.0,
        _ => rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8)),
    }
}

fn random_leaf<R: Rng>(rng: &mut R, v: &Vocab) -> Expr {
    match rng.random_range(0..4) {
        0 | 1 => {
            let grid = if rng.random_bool(0.5) {
                Expr::band(pick(rng, &v.bands))
            } else {
                Expr::gradient(pick(rng, &v.bands))
            };
            let op = [CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge][rng.random_range(0..4)];
            let value = match rng.random_range(0..3) {
                0 => rng.random_range(0.0..1.0),
                1 => rng.random_range(1550.0..1750.0),
                _ => random_number(rng),
            };
            Expr::compare(grid, op, value)
        }
        2 => Expr::within_polygon(pick(rng, &v.polygons)),
        _ => Expr::within_disk(
            rng.random_range(-0.2..1.2) * v.extent,
            rng.random_range(-0.2..1.2) * v.extent,
            rng.random_range(5.0..0.6 * v.extent),
        ),
    }
}

/// Random well-typed mask expression of depth at most `depth`. Distances
/// stay small so evaluation is quick on test-sized rasters.
pub fn random_expr<R: Rng>(rng: &mut R, depth: usize, v: &Vocab) -> Expr {
    if depth <= 1 || rng.random_bool(0.2) {
        return random_leaf(rng, v);
    }
    let sub = |rng: &mut R| random_expr(rng, depth - 1, v);
    match rng.random_range(0..5) {
        0 => sub(rng).and(sub(rng)),
        1 => sub(rng).or(sub(rng)),
        2 => sub(rng).not(),
        3 => {
            let min_m = if rng.random_bool(0.4) {
                0.0
            } else {
                rng.random_range(0..4) as f64 * 10.0
            };
            let max_m = min_m + rng.random_range(1.0..60.0f64).round();
            Expr::new(ExprKind::Near {
                source: Box::new(sub(rng)),
                min_m: Num(min_m),
                max_m: Num(max_m),
                metric: [None, Some(MetricKind::Euclidean), Some(MetricKind::Chebyshev)][rng.random_range(0..3)],
                close_m: Num(if rng.random_bool(0.5) {
                    0.0
                } else {
                    rng.random_range(0..3) as f64 * 10.0
                }),
            })
        }
        _ => {
            let lo = rng.random_range(0..360) as f64;
            let width = rng.random_range(1..=360) as f64;
            Expr::bearing(sub(rng), lo, lo + width)
        }
    }
}
