//! Binary morphology and proximity bands ("donuts").
//!
//! Two metrics are supported. Chebyshev radii are whole pixels and match
//! repeated 3x3 dilation. Euclidean radii are meters and compare the exact
//! distance between pixel centers.
//!
//! Border convention: pixels outside the raster never attract under
//! dilation, and count as unset for erosion, so
//! `erode(m, r) == !dilate(!m, r)` with the outside treated as part of `!m`.

use serde::{Deserialize, Serialize};

use crate::distance::euclidean_transform;
use crate::error::{Error, Result};
use crate::mask::BitMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Chebyshev,
    Euclidean,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Chebyshev => "chebyshev",
            MetricKind::Euclidean => "euclidean",
        }
    }

    /// Converts a distance in meters into a radius of this metric.
    /// Chebyshev rounds to the nearest whole pixel.
    pub fn radius(self, meters: f64, pixel_size: f64) -> Result<Radius> {
        if !(meters >= 0.0 && meters.is_finite()) {
            return Err(Error::Parameter(format!(
                "radius must be a finite non-negative distance, got {meters}"
            )));
        }
        Ok(match self {
            MetricKind::Chebyshev => Radius::Chebyshev((meters / pixel_size).round() as u32),
            MetricKind::Euclidean => Radius::Euclidean(meters),
        })
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" => Ok(MetricKind::Chebyshev),
            "euclidean" => Ok(MetricKind::Euclidean),
            other => Err(Error::Parameter(format!(
                "unknown metric `{other}` (expected chebyshev or euclidean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    /// Whole pixels.
    Chebyshev(u32),
    /// Meters.
    Euclidean(f64),
}

impl Radius {
    fn validate(self) -> Result<Self> {
        if let Radius::Euclidean(m) = self {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(Error::Parameter(format!(
                    "radius must be a finite non-negative distance, got {m}"
                )));
            }
        }
        Ok(self)
    }
}

/// Largest squared pixel distance within `meters`. The relative slack
/// absorbs rounding in `meters / pixel_size` for radii on a lattice point.
pub fn max_squared_pixels(meters: f64, pixel_size: f64) -> u64 {
    let px = meters / pixel_size;
    (px * px * (1.0 + 1e-9)).floor() as u64
}

pub fn dilate(mask: &BitMask, radius: Radius, pixel_size: f64) -> Result<BitMask> {
    Ok(match radius.validate()? {
        Radius::Chebyshev(0) => mask.clone(),
        Radius::Chebyshev(r) => box_dilate(mask, r as usize),
        Radius::Euclidean(m) => {
            let lim = max_squared_pixels(m, pixel_size);
            let t = euclidean_transform(mask);
            let mut out = BitMask::empty(mask.width(), mask.height());
            for (i, &d) in t.dist2.iter().enumerate() {
                if d <= lim {
                    out.set_index(i, true);
                }
            }
            out
        }
    })
}

pub fn erode(mask: &BitMask, radius: Radius, pixel_size: f64) -> Result<BitMask> {
    let (w, h) = mask.dims();
    Ok(match radius.validate()? {
        Radius::Chebyshev(0) => mask.clone(),
        Radius::Chebyshev(r) => {
            let r = r as usize;
            let mut out = box_dilate(&mask.not(), r).not();
            for row in 0..h {
                for col in 0..w {
                    if row < r || col < r || row + r >= h || col + r >= w {
                        out.set(row, col, false);
                    }
                }
            }
            out
        }
        Radius::Euclidean(m) => {
            let lim = max_squared_pixels(m, pixel_size);
            let t = euclidean_transform(&mask.not());
            let mut out = BitMask::empty(w, h);
            for row in 0..h {
                for col in 0..w {
                    // Nearest outside pixel is straight across the nearest edge.
                    let edge = (row + 1).min(h - row).min(col + 1).min(w - col) as u64;
                    let d = t.dist2_at(row, col).min(edge * edge);
                    if d > lim {
                        out.set(row, col, true);
                    }
                }
            }
            out
        }
    })
}

pub fn closing(mask: &BitMask, radius: Radius, pixel_size: f64) -> Result<BitMask> {
    erode(&dilate(mask, radius, pixel_size)?, radius, pixel_size)
}

pub fn opening(mask: &BitMask, radius: Radius, pixel_size: f64) -> Result<BitMask> {
    dilate(&erode(mask, radius, pixel_size)?, radius, pixel_size)
}

/// Pixels farther than `min_m` but within `max_m` of the closed source
/// mask: `dilate(c, max) & !dilate(c, min)` where `c = closing(mask, close)`.
pub fn donut(
    mask: &BitMask,
    min_m: f64,
    max_m: f64,
    metric: MetricKind,
    close: Radius,
    pixel_size: f64,
) -> Result<BitMask> {
    if !(min_m >= 0.0 && min_m.is_finite() && max_m.is_finite()) {
        return Err(Error::Parameter(format!(
            "donut distances must be finite and non-negative, got min={min_m} max={max_m}"
        )));
    }
    if min_m >= max_m {
        return Err(Error::Parameter(format!(
            "donut needs min < max, got min={min_m} max={max_m}"
        )));
    }
    let closed = closing(mask, close, pixel_size)?;
    match metric {
        MetricKind::Chebyshev => {
            let outer = dilate(&closed, metric.radius(max_m, pixel_size)?, pixel_size)?;
            let inner = dilate(&closed, metric.radius(min_m, pixel_size)?, pixel_size)?;
            outer.and_not(&inner)
        }
        MetricKind::Euclidean => {
            // One transform serves both rings.
            let lo = max_squared_pixels(min_m, pixel_size);
            let hi = max_squared_pixels(max_m, pixel_size);
            let t = euclidean_transform(&closed);
            let mut out = BitMask::empty(mask.width(), mask.height());
            for (i, &d) in t.dist2.iter().enumerate() {
                if d <= hi && d > lo {
                    out.set_index(i, true);
                }
            }
            Ok(out)
        }
    }
}

/// Square-window dilation via running counts along rows then columns.
fn box_dilate(mask: &BitMask, r: usize) -> BitMask {
    let (w, h) = mask.dims();
    let mut rows = vec![false; w * h];
    let mut prefix = vec![0u32; w.max(h) + 1];
    for y in 0..h {
        for x in 0..w {
            prefix[x + 1] = prefix[x] + u32::from(mask.get(y, x));
        }
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            rows[y * w + x] = prefix[hi] > prefix[lo];
        }
    }
    let mut out = BitMask::empty(w, h);
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + u32::from(rows[y * w + x]);
        }
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r + 1).min(h);
            if prefix[hi] > prefix[lo] {
                out.set(y, x, true);
            }
        }
    }
    out
}
