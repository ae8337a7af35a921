//! Grid data model, geotransform math and per-band derivations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geotiff::{self, TiffImage};
use crate::mask::BitMask;

pub const DEFAULT_PIXEL_SIZE: f64 = 10.0;

/// North-up, square-pixel mapping from pixel indices to a local planar
/// frame in meters. Row indices grow southward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geotransform {
    pub origin_easting: f64,
    pub origin_northing: f64,
    pub pixel_size: f64,
}

impl Geotransform {
    pub fn new(origin_easting: f64, origin_northing: f64, pixel_size: f64) -> Result<Self> {
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(Error::Parameter(format!(
                "pixel size must be positive and finite, got {pixel_size}"
            )));
        }
        if !origin_easting.is_finite() || !origin_northing.is_finite() {
            return Err(Error::Parameter("geotransform origin must be finite".into()));
        }
        Ok(Geotransform {
            origin_easting,
            origin_northing,
            pixel_size,
        })
    }

    /// Ground coordinates of the center of pixel `(row, col)`.
    #[inline]
    pub fn pixel_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_easting + (col as f64 + 0.5) * self.pixel_size,
            self.origin_northing - (row as f64 + 0.5) * self.pixel_size,
        )
    }

    /// Fractional `(row, col)` of a ground point; pixel centers land on `x.5`.
    pub fn to_pixel(&self, easting: f64, northing: f64) -> (f64, f64) {
        (
            (self.origin_northing - northing) / self.pixel_size,
            (easting - self.origin_easting) / self.pixel_size,
        )
    }

    /// Pixel containing a ground point, if inside a `width x height` grid.
    pub fn pixel_of(&self, easting: f64, northing: f64, width: usize, height: usize) -> Option<(usize, usize)> {
        let (r, c) = self.to_pixel(easting, northing);
        if r < 0.0 || c < 0.0 || r >= height as f64 || c >= width as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size * self.pixel_size
    }

    /// Ground coordinates of the raster's geometric center.
    pub fn center(&self, width: usize, height: usize) -> (f64, f64) {
        (
            self.origin_easting + width as f64 * self.pixel_size / 2.0,
            self.origin_northing - height as f64 * self.pixel_size / 2.0,
        )
    }
}

/// One raster band. Values are row-major; NaN is always treated as nodata
/// in addition to the optional sentinel.
#[derive(Clone, PartialEq)]
pub struct GridF32 {
    width: usize,
    height: usize,
    values: Vec<f32>,
    nodata: Option<f32>,
}

impl GridF32 {
    pub fn new(width: usize, height: usize, values: Vec<f32>, nodata: Option<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape("grid dimensions must be at least 1x1".into()));
        }
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        Ok(GridF32 {
            width,
            height,
            values,
            nodata,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        GridF32::new(width, height, values, None).expect("dimensions checked by caller")
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn nodata(&self) -> Option<f32> {
        self.nodata
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn is_nodata_value(&self, v: f32) -> bool {
        v.is_nan() || self.nodata == Some(v)
    }

    #[inline]
    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.is_nodata_value(self.get(row, col))
    }

    /// Minimum and maximum over valid pixels; `None` if every pixel is nodata.
    pub fn min_max(&self) -> Option<(f32, f32)> {
        self.values
            .iter()
            .filter(|v| !self.is_nodata_value(**v))
            .fold(None, |acc, &v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

impl fmt::Debug for GridF32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridF32")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("nodata", &self.nodata)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    #[inline]
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }
}

/// Co-registered named bands sharing one geotransform.
#[derive(Debug, Clone)]
pub struct RasterStack {
    geotransform: Geotransform,
    width: usize,
    height: usize,
    bands: BTreeMap<String, GridF32>,
    order: Vec<String>,
}

pub fn is_valid_band_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

impl RasterStack {
    /// Builds a stack; bands keep the given order, which is also their
    /// GeoTIFF sample order on save.
    pub fn new(geotransform: Geotransform, bands: Vec<(String, GridF32)>) -> Result<Self> {
        let Some((_, first)) = bands.first() else {
            return Err(Error::Shape("raster stack needs at least one band".into()));
        };
        let (width, height) = (first.width, first.height);
        let mut map = BTreeMap::new();
        let mut order = Vec::with_capacity(bands.len());
        for (name, grid) in bands {
            if !is_valid_band_name(&name) {
                return Err(Error::Manifest(format!(
                    "band name `{name}` must match [a-z][a-z0-9_]*"
                )));
            }
            if grid.width != width || grid.height != height {
                return Err(Error::Shape(format!(
                    "band `{name}` is {}x{}, expected {width}x{height}",
                    grid.width, grid.height
                )));
            }
            order.push(name.clone());
            if map.insert(name.clone(), grid).is_some() {
                return Err(Error::Manifest(format!("duplicate band name `{name}`")));
            }
        }
        Ok(RasterStack {
            geotransform,
            width,
            height,
            bands: map,
            order,
        })
    }

    pub fn geotransform(&self) -> &Geotransform {
        &self.geotransform
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Band names in storage order.
    pub fn band_names(&self) -> &[String] {
        &self.order
    }

    pub fn band(&self, name: &str) -> Result<&GridF32> {
        self.bands.get(name).ok_or_else(|| Error::Name {
            kind: "band",
            name: name.to_string(),
            available: self.order.clone(),
        })
    }

    pub fn bands(&self) -> impl Iterator<Item = (&str, &GridF32)> {
        self.order.iter().map(move |n| (n.as_str(), &self.bands[n]))
    }

    pub fn empty_mask(&self) -> BitMask {
        BitMask::empty(self.width, self.height)
    }

    pub fn full_mask(&self) -> BitMask {
        BitMask::full(self.width, self.height)
    }
}

/// Sidecar JSON naming the bands of a GeoTIFF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandManifest {
    pub bands: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_size_m: Option<f64>,
}

impl BandManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: BandManifest = serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        if let Some(ps) = m.pixel_size_m {
            if !(ps > 0.0 && ps.is_finite()) {
                return Err(Error::Manifest(format!("pixel_size_m must be positive, got {ps}")));
            }
        }
        Ok(m)
    }

    /// Band names ordered by sample index; indices must be exactly
    /// `0..band_count`.
    pub fn names_for(&self, band_count: usize) -> Result<Vec<String>> {
        if self.bands.len() != band_count {
            return Err(Error::Manifest(format!(
                "manifest names {} bands, raster has {band_count}",
                self.bands.len()
            )));
        }
        let mut names = vec![None; band_count];
        for (key, name) in &self.bands {
            let idx: usize = key
                .parse()
                .map_err(|_| Error::Manifest(format!("band index `{key}` is not an integer")))?;
            let slot = names
                .get_mut(idx)
                .ok_or_else(|| Error::Manifest(format!("band index {idx} out of range for {band_count} bands")))?;
            *slot = Some(name.clone());
        }
        names
            .into_iter()
            .enumerate()
            .map(|(i, n)| n.ok_or_else(|| Error::Manifest(format!("band index {i} missing"))))
            .collect()
    }
}

/// Loads a GeoTIFF and names its bands from a sidecar manifest.
pub fn load_stack(raster_path: &Path, manifest_path: &Path) -> Result<RasterStack> {
    let bytes = std::fs::read(raster_path).map_err(|e| Error::io(raster_path, e))?;
    let manifest_text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest = BandManifest::from_json(&manifest_text)?;
    stack_from_tiff(geotiff::decode(&bytes)?, &manifest)
}

pub fn stack_from_tiff(image: TiffImage, manifest: &BandManifest) -> Result<RasterStack> {
    let names = manifest.names_for(image.bands.len())?;
    let geotransform = resolve_geotransform(&image, manifest)?;
    let (w, h, nodata) = (image.width, image.height, image.nodata);
    let bands = names
        .into_iter()
        .zip(image.bands)
        .map(|(name, values)| Ok((name, GridF32::new(w, h, values, nodata)?)))
        .collect::<Result<Vec<_>>>()?;
    RasterStack::new(geotransform, bands)
}

/// Picks the meter-based frame for a decoded image.
///
/// A GeoTIFF whose pixel scale agrees with the manifest's `pixel_size_m` is
/// taken to be projected in meters and keeps its tie point as origin. A
/// raster in degrees (scale disagrees) is placed in a local frame at the
/// origin with the manifest pixel size.
fn resolve_geotransform(image: &TiffImage, manifest: &BandManifest) -> Result<Geotransform> {
    let scale = image.pixel_scale;
    if let Some((sx, sy)) = scale {
        if ((sx - sy).abs() > 1e-9 * sx.abs().max(sy.abs())) && manifest.pixel_size_m.is_none() {
            return Err(Error::format(
                Some("ModelPixelScale"),
                format!("non-square pixels {sx} x {sy}"),
            ));
        }
    }
    match (manifest.pixel_size_m, scale, image.tiepoint) {
        (Some(ps), Some((sx, _)), Some((e, n))) if (sx - ps).abs() <= 1e-6 * ps => Geotransform::new(e, n, ps),
        (Some(ps), _, _) => Geotransform::new(0.0, 0.0, ps),
        (None, Some((sx, _)), Some((e, n))) => Geotransform::new(e, n, sx),
        (None, Some((sx, _)), None) => Geotransform::new(0.0, 0.0, sx),
        (None, None, _) => Geotransform::new(0.0, 0.0, DEFAULT_PIXEL_SIZE),
    }
    .map_err(|e| Error::format(Some("ModelPixelScale"), e.to_string()))
}

/// Writes the stack as a float32 GeoTIFF plus its band manifest.
pub fn save_stack(stack: &RasterStack, raster_path: &Path, manifest_path: &Path) -> Result<()> {
    let bytes = geotiff::encode_stack(stack, geotiff::Compression::Deflate)?;
    std::fs::write(raster_path, bytes).map_err(|e| Error::io(raster_path, e))?;
    let manifest = BandManifest {
        bands: stack
            .band_names()
            .iter()
            .enumerate()
            .map(|(i, n)| (i.to_string(), n.clone()))
            .collect(),
        pixel_size_m: Some(stack.geotransform().pixel_size),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(manifest_path, text).map_err(|e| Error::io(manifest_path, e))
}

/// Gradient magnitude of a band in band units per meter.
///
/// Central differences in the interior, one-sided differences on the border.
/// A pixel is nodata (NaN) when it or any in-bounds 4-neighbour is nodata.
pub fn gradient_magnitude(stack: &RasterStack, band: &str) -> Result<GridF32> {
    gradient_of_grid(stack.band(band)?, stack.geotransform().pixel_size)
}

pub fn gradient_of_grid(grid: &GridF32, pixel_size: f64) -> Result<GridF32> {
    let (w, h) = (grid.width, grid.height);
    if w < 2 || h < 2 {
        return Err(Error::Shape(format!("gradient needs at least 2x2 pixels, got {w}x{h}")));
    }
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let poisoned = grid.is_nodata(r, c)
                || (c > 0 && grid.is_nodata(r, c - 1))
                || (c + 1 < w && grid.is_nodata(r, c + 1))
                || (r > 0 && grid.is_nodata(r - 1, c))
                || (r + 1 < h && grid.is_nodata(r + 1, c));
            if poisoned {
                out.push(f32::NAN);
                continue;
            }
            let gx = derivative(|i| grid.get(r, i), c, w, pixel_size);
            let gy = derivative(|i| grid.get(i, c), r, h, pixel_size);
            out.push((gx * gx + gy * gy).sqrt() as f32);
        }
    }
    GridF32::new(w, h, out, None)
}

#[inline]
fn derivative(at: impl Fn(usize) -> f32, i: usize, n: usize, pixel_size: f64) -> f64 {
    if i == 0 {
        (f64::from(at(1)) - f64::from(at(0))) / pixel_size
    } else if i == n - 1 {
        (f64::from(at(n - 1)) - f64::from(at(n - 2))) / pixel_size
    } else {
        (f64::from(at(i + 1)) - f64::from(at(i - 1))) / (2.0 * pixel_size)
    }
}

/// Marks pixels whose value satisfies `value <op> threshold`. Nodata never
/// satisfies a comparison.
pub fn threshold(grid: &GridF32, op: CompareOp, value: f64) -> Result<BitMask> {
    if !value.is_finite() {
        return Err(Error::Parameter(format!("threshold must be finite, got {value}")));
    }
    let mut m = BitMask::empty(grid.width, grid.height);
    for (i, &v) in grid.values.iter().enumerate() {
        if !grid.is_nodata_value(v) && op.holds(f64::from(v), value) {
            m.set_index(i, true);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stack_of(grid: GridF32, ps: f64) -> RasterStack {
        RasterStack::new(
            Geotransform::new(0.0, 0.0, ps).unwrap(),
            vec![("elevation".into(), grid)],
        )
        .unwrap()
    }

    #[test]
    fn pixel_centers_run_east_and_south() {
        let gt = Geotransform::new(1000.0, 5000.0, 10.0).unwrap();
        assert_eq!(gt.pixel_center(0, 0), (1005.0, 4995.0));
        assert_eq!(gt.pixel_center(2, 3), (1035.0, 4975.0));
        assert_eq!(gt.pixel_of(1035.0, 4975.0, 10, 10), Some((2, 3)));
        assert_eq!(gt.pixel_of(999.0, 4975.0, 10, 10), None);
    }

    #[test]
    fn geotransform_rejects_bad_pixel_size() {
        assert!(Geotransform::new(0.0, 0.0, 0.0).is_err());
        assert!(Geotransform::new(0.0, 0.0, -1.0).is_err());
        assert!(Geotransform::new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn planar_ramp_gradient() {
        // e(x) = 0.5 * x_meters
        let g = GridF32::from_fn(12, 9, |_, c| 0.5 * ((c as f32 + 0.5) * 10.0));
        let grad = gradient_magnitude(&stack_of(g, 10.0), "elevation").unwrap();
        for r in 0..9 {
            for c in 0..12 {
                assert!((grad.get(r, c) - 0.5).abs() <= 0.5e-6, "{r},{c}");
            }
        }
    }

    #[test]
    fn constant_band_has_zero_gradient() {
        let grad = gradient_magnitude(&stack_of(GridF32::filled(5, 4, 1712.0), 10.0), "elevation").unwrap();
        assert!(grad.values().iter().all(|&v| v == 0.0));
    }

    fn naive_gradient(g: &GridF32, ps: f64) -> Vec<f32> {
        let (w, h) = (g.width(), g.height());
        let v = |r: usize, c: usize| f64::from(g.get(r, c));
        let mut out = vec![];
        for r in 0..h {
            for c in 0..w {
                let gx = if c == 0 {
                    (v(r, 1) - v(r, 0)) / ps
                } else if c == w - 1 {
                    (v(r, w - 1) - v(r, w - 2)) / ps
                } else {
                    (v(r, c + 1) - v(r, c - 1)) / (2.0 * ps)
                };
                let gy = if r == 0 {
                    (v(1, c) - v(0, c)) / ps
                } else if r == h - 1 {
                    (v(h - 1, c) - v(h - 2, c)) / ps
                } else {
                    (v(r + 1, c) - v(r - 1, c)) / (2.0 * ps)
                };
                out.push((gx * gx + gy * gy).sqrt() as f32);
            }
        }
        out
    }

    #[test]
    fn random_grid_matches_naive_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GridF32::from_fn(16, 16, |_, _| rng.random_range(1600.0..1800.0));
        let grad = gradient_magnitude(&stack_of(g.clone(), 10.0), "elevation").unwrap();
        assert_eq!(grad.values(), naive_gradient(&g, 10.0).as_slice());
    }

    #[test]
    fn nodata_poisons_neighbours() {
        let mut vals = vec![1.0f32; 25];
        vals[12] = -9999.0;
        let g = GridF32::new(5, 5, vals, Some(-9999.0)).unwrap();
        let grad = gradient_magnitude(&stack_of(g, 10.0), "elevation").unwrap();
        for (r, c) in [(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)] {
            assert!(grad.is_nodata(r, c), "{r},{c}");
        }
        assert!(!grad.is_nodata(1, 1));
        assert_eq!(grad.get(0, 0), 0.0);
    }

    #[test]
    fn gradient_needs_two_by_two() {
        let err = gradient_of_grid(&GridF32::filled(1, 5, 0.0), 10.0).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn unknown_band_lists_available() {
        let s = stack_of(GridF32::filled(2, 2, 0.0), 10.0);
        match gradient_magnitude(&s, "red").unwrap_err() {
            Error::Name { name, available, .. } => {
                assert_eq!(name, "red");
                assert_eq!(available, vec!["elevation".to_string()]);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn threshold_is_strict_where_asked() {
        let g = GridF32::filled(4, 3, 5.0);
        assert_eq!(threshold(&g, CompareOp::Gt, 4.0).unwrap().count_ones(), 12);
        assert_eq!(threshold(&g, CompareOp::Gt, 5.0).unwrap().count_ones(), 0);
        assert_eq!(threshold(&g, CompareOp::Ge, 5.0).unwrap().count_ones(), 12);
        assert!(threshold(&g, CompareOp::Lt, f64::NAN).is_err());
    }

    #[test]
    fn threshold_matches_naive_loop_and_skips_nodata() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vals: Vec<f32> = (0..30 * 20)
            .map(|_| {
                if rng.random_bool(0.1) {
                    f32::NAN
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let g = GridF32::new(30, 20, vals.clone(), None).unwrap();
        for op in [CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge] {
            let m = threshold(&g, op, 0.4).unwrap();
            for (i, v) in vals.iter().enumerate() {
                let expect = !v.is_nan() && op.holds(f64::from(*v), 0.4);
                assert_eq!(m.get_index(i), expect);
            }
        }
    }

    #[test]
    fn band_names_are_validated() {
        let gt = Geotransform::new(0.0, 0.0, 10.0).unwrap();
        for bad in ["", "Red", "9x", "a-b"] {
            assert!(RasterStack::new(gt, vec![(bad.into(), GridF32::filled(2, 2, 0.0))]).is_err());
        }
        let dup = vec![
            ("red".to_string(), GridF32::filled(2, 2, 0.0)),
            ("red".to_string(), GridF32::filled(2, 2, 0.0)),
        ];
        assert!(RasterStack::new(gt, dup).is_err());
    }

    #[test]
    fn manifest_band_count_must_match() {
        let m = BandManifest::from_json(r#"{"bands":{"0":"elevation","1":"red","2":"green"}}"#).unwrap();
        assert!(matches!(m.names_for(2), Err(Error::Manifest(_))));
        assert_eq!(m.names_for(3).unwrap(), vec!["elevation", "red", "green"]);
        let gap = BandManifest::from_json(r#"{"bands":{"0":"a","2":"b"}}"#).unwrap();
        assert!(gap.names_for(2).is_err());
    }

    proptest::proptest! {
        #[test]
        fn gradient_ignores_constant_offset(seed in 0u64..1000, offset in -500.0f32..500.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Integer-valued grids keep the offset exact in f32.
            let g = GridF32::from_fn(8, 6, |_, _| rng.random_range(0..200) as f32);
            let shifted = GridF32::from_fn(8, 6, |r, c| g.get(r, c) + offset.round());
            let a = gradient_of_grid(&g, 10.0).unwrap();
            let b = gradient_of_grid(&shifted, 10.0).unwrap();
            proptest::prop_assert_eq!(a.values(), b.values());
        }

        #[test]
        fn threshold_partitions_valid_pixels(seed in 0u64..1000, v in -1.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f32> = (0..64).map(|_| if rng.random_bool(0.1) { -1.0 } else { rng.random_range(0.0..1.0) }).collect();
            let g = GridF32::new(8, 8, vals, Some(-1.0)).unwrap();
            let hi = threshold(&g, CompareOp::Gt, v).unwrap();
            let lo = threshold(&g, CompareOp::Le, v).unwrap();
            proptest::prop_assert!(hi.and(&lo).unwrap().is_empty());
            let union = hi.or(&lo).unwrap();
            for i in 0..64 {
                proptest::prop_assert_eq!(union.get_index(i), !g.is_nodata_value(g.values()[i]));
            }
        }
    }
}
