//! Scenarios: a raster stack with named polygons and cameras, loaded from a
//! JSON manifest or generated synthetically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dsl::{evaluate, parse_checked};
use crate::error::{Error, Result};
use crate::geo::{MultiPolygon, ObfuscationDisk, Point, Polygon};
use crate::geojson::parse_polygons;
use crate::raster::{load_stack, save_stack, Geotransform, GridF32, RasterStack};

/// Meters per degree of latitude in the equirectangular approximation.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub id: String,
    /// Ground truth, only present in evaluation scenarios.
    pub true_location: Option<Point>,
    pub published_location: Point,
    pub obfuscation_radius: f64,
}

impl CameraRecord {
    pub fn disk(&self) -> Result<ObfuscationDisk> {
        ObfuscationDisk::new(self.published_location, self.obfuscation_radius)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub stack: RasterStack,
    pub polygons: BTreeMap<String, MultiPolygon>,
    pub cameras: Vec<CameraRecord>,
    /// `(lat, lon)` mapped to the raster center.
    pub anchor: (f64, f64),
}

/// Identifier syntax usable from expressions.
pub fn is_valid_id(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some('a'..='z' | 'A'..='Z' | '_')) && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Scenario {
    pub fn new(
        stack: RasterStack,
        polygons: BTreeMap<String, MultiPolygon>,
        cameras: Vec<CameraRecord>,
        anchor: (f64, f64),
    ) -> Result<Self> {
        check_anchor(anchor)?;
        let s = Scenario {
            stack,
            polygons,
            cameras,
            anchor,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let gt = self.stack.geotransform();
        let (w, h) = (self.stack.width() as f64, self.stack.height() as f64);
        let (e0, n1) = (gt.origin_easting, gt.origin_northing);
        let (e1, n0) = (e0 + w * gt.pixel_size, n1 - h * gt.pixel_size);
        let within =
            |p: Point, slack: f64| p.0 >= e0 - slack && p.0 <= e1 + slack && p.1 >= n0 - slack && p.1 <= n1 + slack;
        for id in self.polygons.keys() {
            if !is_valid_id(id) {
                return Err(Error::Scenario(format!("polygon id `{id}` is not an identifier")));
            }
        }
        let max_radius = self.cameras.iter().map(|c| c.obfuscation_radius).fold(0.0, f64::max);
        for (id, mp) in &self.polygons {
            let inside =
                mp.0.iter()
                    .flat_map(|p| p.exterior.iter())
                    .any(|&v| within(v, max_radius));
            if !inside {
                return Err(Error::Scenario(format!(
                    "polygon `{id}` lies entirely outside the raster"
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for cam in &self.cameras {
            if !seen.insert(cam.id.as_str()) {
                return Err(Error::Scenario(format!("duplicate camera id `{}`", cam.id)));
            }
            let disk = cam
                .disk()
                .map_err(|e| Error::Scenario(format!("camera `{}`: {e}", cam.id)))?;
            if !within(cam.published_location, cam.obfuscation_radius) {
                return Err(Error::Scenario(format!(
                    "camera `{}` is published more than its radius outside the raster",
                    cam.id
                )));
            }
            if let Some(t) = cam.true_location {
                // Allow for rounding in the lat/lon conversion.
                let slack = ObfuscationDisk::new(disk.center, disk.radius * (1.0 + 1e-9))?;
                if !slack.contains(t) {
                    let d = ((t.0 - disk.center.0).powi(2) + (t.1 - disk.center.1).powi(2)).sqrt();
                    return Err(Error::Scenario(format!(
                        "camera `{}`: true location is {d:.1} m from the published one, beyond its {} m radius",
                        cam.id, cam.obfuscation_radius
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn camera(&self, id: &str) -> Result<&CameraRecord> {
        self.cameras.iter().find(|c| c.id == id).ok_or_else(|| Error::Name {
            kind: "camera",
            name: id.to_string(),
            available: self.cameras.iter().map(|c| c.id.clone()).collect(),
        })
    }

    pub fn polygon(&self, id: &str) -> Result<&MultiPolygon> {
        self.polygons.get(id).ok_or_else(|| Error::Name {
            kind: "polygon",
            name: id.to_string(),
            available: self.polygons.keys().cloned().collect(),
        })
    }

    /// Equirectangular projection about the anchor, which lands on the
    /// raster center.
    pub fn to_local(&self, lat: f64, lon: f64) -> Point {
        let center = self
            .stack
            .geotransform()
            .center(self.stack.width(), self.stack.height());
        project(self.anchor, center, lat, lon)
    }
}

fn check_anchor((lat, lon): (f64, f64)) -> Result<()> {
    if !(lat.abs() < 90.0 && lon.abs() <= 180.0) {
        return Err(Error::Scenario(format!("anchor ({lat}, {lon}) is not a valid lat/lon")));
    }
    Ok(())
}

fn project(anchor: (f64, f64), center: Point, lat: f64, lon: f64) -> Point {
    let (lat0, lon0) = anchor;
    (
        center.0 + (lon - lon0) * lat0.to_radians().cos() * METERS_PER_DEGREE,
        center.1 + (lat - lat0) * METERS_PER_DEGREE,
    )
}

/// How point coordinates in a manifest and its GeoJSON are written.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coords {
    /// Camera points are `[lat, lon]`; GeoJSON positions are `[lon, lat]`.
    #[default]
    Latlon,
    /// Everything is `[easting, northing]` in the raster frame.
    Meters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraEntry {
    pub id: String,
    pub published: [f64; 2],
    #[serde(default, rename = "true", skip_serializing_if = "Option::is_none")]
    pub true_point: Option<[f64; 2]>,
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioManifest {
    pub raster: PathBuf,
    pub bands_manifest: PathBuf,
    #[serde(default)]
    pub polygons: BTreeMap<String, PathBuf>,
    pub anchor: [f64; 2],
    #[serde(default)]
    pub coords: Coords,
    #[serde(default)]
    pub cameras: Vec<CameraEntry>,
}

impl ScenarioManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: ScenarioManifest = serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        check_anchor((m.anchor[0], m.anchor[1]))?;
        for c in &m.cameras {
            let finite = c
                .published
                .iter()
                .chain(c.true_point.iter().flatten())
                .all(|v| v.is_finite());
            if !finite || !(c.radius_m > 0.0 && c.radius_m.is_finite()) {
                return Err(Error::Manifest(format!(
                    "camera `{}` has invalid coordinates or radius",
                    c.id
                )));
            }
        }
        Ok(m)
    }
}

/// Loads a manifest; relative paths resolve against its directory.
pub fn load_scenario(manifest_path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let m = ScenarioManifest::from_json(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let stack = load_stack(&base.join(&m.raster), &base.join(&m.bands_manifest))?;
    let anchor = (m.anchor[0], m.anchor[1]);
    let center = stack.geotransform().center(stack.width(), stack.height());
    let point = |p: [f64; 2]| match m.coords {
        Coords::Latlon => project(anchor, center, p[0], p[1]),
        Coords::Meters => (p[0], p[1]),
    };
    let mut polygons = BTreeMap::new();
    for (id, rel) in &m.polygons {
        let path = base.join(rel);
        let gj = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mp = parse_polygons(&gj, |x, y| match m.coords {
            Coords::Latlon => project(anchor, center, y, x),
            Coords::Meters => (x, y),
        })
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
        polygons.insert(id.clone(), mp);
    }
    let cameras = m
        .cameras
        .iter()
        .map(|c| CameraRecord {
            id: c.id.clone(),
            true_location: c.true_point.map(point),
            published_location: point(c.published),
            obfuscation_radius: c.radius_m,
        })
        .collect();
    Scenario::new(stack, polygons, cameras, anchor)
}

/// Writes a scenario in meter coordinates; returns the manifest path.
/// True camera locations are included.
pub fn write_scenario(dir: &Path, scenario: &Scenario) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_stack(&scenario.stack, &dir.join("stack.tif"), &dir.join("bands.json"))?;
    let mut polygons = BTreeMap::new();
    for (id, mp) in &scenario.polygons {
        let file = format!("{id}.geojson");
        let path = dir.join(&file);
        let text = serde_json::to_string_pretty(&polygons_to_geojson(mp)).expect("geojson serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        polygons.insert(id.clone(), PathBuf::from(file));
    }
    let manifest = ScenarioManifest {
        raster: "stack.tif".into(),
        bands_manifest: "bands.json".into(),
        polygons,
        anchor: [scenario.anchor.0, scenario.anchor.1],
        coords: Coords::Meters,
        cameras: scenario
            .cameras
            .iter()
            .map(|c| CameraEntry {
                id: c.id.clone(),
                published: [c.published_location.0, c.published_location.1],
                true_point: c.true_location.map(|p| [p.0, p.1]),
                radius_m: c.obfuscation_radius,
            })
            .collect(),
    };
    let path = dir.join("scenario.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn polygons_to_geojson(mp: &MultiPolygon) -> serde_json::Value {
    let ring = |r: &[Point]| {
        let mut pts: Vec<[f64; 2]> = r.iter().map(|&(x, y)| [x, y]).collect();
        pts.push(pts[0]);
        pts
    };
    let polys: Vec<Vec<Vec<[f64; 2]>>> = mp.0.iter().map(|p| p.rings().map(ring).collect()).collect();
    json!({
        "type": "FeatureCollection",
        "features": [{
            "type": "Feature",
            "properties": {},
            "geometry": {"type": "MultiPolygon", "coordinates": polys},
        }],
    })
}

/// Uniform point on the closed disk of `radius` about `center`.
pub fn sample_disk<R: Rng>(rng: &mut R, center: Point, radius: f64) -> Point {
    let disk = ObfuscationDisk { center, radius };
    loop {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let r = radius * rng.random::<f64>().sqrt();
        let p = (center.0 + r * theta.cos(), center.1 + r * theta.sin());
        // Containment must hold in the arithmetic disk masks use; rounding
        // at r == radius can break it, so resample in that case.
        let mirrored = ObfuscationDisk { center: p, radius };
        if disk.contains(p) && mirrored.contains(center) {
            return p;
        }
    }
}

/// Published location for a camera: uniform on the disk of `radius`.
pub fn obfuscate(true_location: Point, radius: f64, seed: u64) -> Result<Point> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!(
            "obfuscation radius must be positive, got {radius}"
        )));
    }
    Ok(sample_disk(&mut ChaCha8Rng::seed_from_u64(seed), true_location, radius))
}

pub const DEFAULT_TARGET: &str = "within_polygon(park) & near(red > 0.6, min=10, max=60) & grad(elevation) > 0.2";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub pixel_size: f64,
    pub obfuscation_radius: f64,
    pub anchor: (f64, f64),
    /// Expression the camera pixel must satisfy.
    pub target_expr: String,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            pixel_size: 10.0,
            obfuscation_radius: 1000.0,
            anchor: (0.29, 36.90),
            target_expr: DEFAULT_TARGET.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub target_expr: String,
    pub camera_id: String,
    /// `(row, col)`.
    pub camera_pixel: (usize, usize),
    pub true_location: Point,
}

/// Smooth noise in `[0, 1)`: bilinear smoothstep interpolation of a random
/// lattice with `cell` pixels between lattice points.
fn value_noise(rng: &mut ChaCha8Rng, w: usize, h: usize, cell: f64) -> Vec<f64> {
    let lw = (w as f64 / cell).ceil() as usize + 2;
    let lh = (h as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..lw * lh).map(|_| rng.random()).collect();
    let at = |x: usize, y: usize| lattice[y * lw + x];
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        let fy = r as f64 / cell;
        let (y0, ty) = (fy.floor() as usize, smooth(fy.fract()));
        for c in 0..w {
            let fx = c as f64 / cell;
            let (x0, tx) = (fx.floor() as usize, smooth(fx.fract()));
            let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
            let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

fn octaves(rng: &mut ChaCha8Rng, w: usize, h: usize, cells: &[(f64, f64)]) -> Vec<f64> {
    let mut acc = vec![0.0; w * h];
    for &(cell, weight) in cells {
        for (a, v) in acc.iter_mut().zip(value_noise(rng, w, h, cell)) {
            *a += weight * v;
        }
    }
    acc
}

/// Builds a deterministic scenario with a ridge, red-soil blobs, a park and
/// one camera placed uniformly among the pixels matching the target.
pub fn generate_synthetic(seed: u64, size: usize, params: &SyntheticParams) -> Result<(Scenario, GroundTruth)> {
    if size < 64 {
        return Err(Error::Parameter(format!(
            "synthetic size must be at least 64, got {size}"
        )));
    }
    let target = parse_checked(&params.target_expr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ps = params.pixel_size;
    let extent = size as f64 * ps;
    let gt = Geotransform::new(0.0, extent, ps)?;
    let (ce, cn) = gt.center(size, size);

    // Ridge: a sigmoid step across a line through the middle of the scene.
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let off_e = rng.random_range(-0.125..0.125) * extent;
    let off_n = rng.random_range(-0.125..0.125) * extent;
    let (ridge_e, ridge_n) = (ce + off_e, cn + off_n);
    let (ne, nn) = (angle.cos(), angle.sin());
    let relief = octaves(&mut rng, size, size, &[(32.0, 8.0), (8.0, 2.0)]);
    let elevation = GridF32::from_fn(size, size, |r, c| {
        let (e, n) = gt.pixel_center(r, c);
        let across = (e - ridge_e) * ne + (n - ridge_n) * nn;
        let step = 100.0 / (1.0 + (-across / 50.0).exp());
        (1600.0 + step + relief[r * size + c]) as f32
    });

    let red = octaves(&mut rng, size, size, &[(16.0, 0.7), (4.0, 0.3)]);
    let green = octaves(&mut rng, size, size, &[(24.0, 0.6), (6.0, 0.4)]);
    let red_band = GridF32::from_fn(size, size, |r, c| red[r * size + c] as f32);
    let green_band = GridF32::from_fn(size, size, |r, c| {
        (0.8 * green[r * size + c] * (1.0 - 0.5 * red[r * size + c])) as f32
    });
    let blue_band = GridF32::from_fn(size, size, |r, c| (0.2 + 0.3 * green[r * size + c]) as f32);
    let stack = RasterStack::new(
        gt,
        vec![
            ("elevation".into(), elevation),
            ("red".into(), red_band),
            ("green".into(), green_band),
            ("blue".into(), blue_band),
        ],
    )?;

    // Park: a jittered octagon around the center.
    let park_radius = 0.4 * extent;
    let vertices = (0..8)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 8.0;
            let rr = park_radius * rng.random_range(0.85..1.1);
            (ce + rr * a.cos(), cn + rr * a.sin())
        })
        .collect();
    let mut polygons = BTreeMap::new();
    polygons.insert("park".to_string(), MultiPolygon(vec![Polygon::new(vertices, vec![])?]));

    let mut scenario = Scenario::new(stack, polygons, vec![], params.anchor)?;
    let candidates = evaluate(&target, &scenario)?;
    let n = candidates.count_ones();
    if n == 0 {
        return Err(Error::Generation(format!(
            "no pixel satisfies `{}` for seed {seed}",
            params.target_expr
        )));
    }
    let pick = rng.random_range(0..n) as usize;
    let (row, col) = candidates.iter_ones().nth(pick).expect("pick < count");
    let true_location = gt.pixel_center(row, col);
    let published = sample_disk(&mut rng, true_location, params.obfuscation_radius);
    let camera = CameraRecord {
        id: "cam0".into(),
        true_location: Some(true_location),
        published_location: published,
        obfuscation_radius: params.obfuscation_radius,
    };
    scenario.cameras.push(camera);
    scenario.validate()?;
    let truth = GroundTruth {
        target_expr: params.target_expr.clone(),
        camera_id: "cam0".into(),
        camera_pixel: (row, col),
        true_location,
    };
    Ok((scenario, truth))
}
