//! Polygon and disk rasterization plus searchable-area accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::raster::Geotransform;

pub type Point = (f64, f64);

/// Polygon in the local meter frame. Rings are implicitly closed; a
/// repeated closing vertex is dropped on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    #[serde(default)]
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self> {
        let exterior = normalize_ring(exterior, "exterior")?;
        let holes = holes
            .into_iter()
            .map(|h| normalize_ring(h, "hole"))
            .collect::<Result<Vec<_>>>()?;
        Ok(Polygon { exterior, holes })
    }

    pub fn rectangle(min: Point, max: Point) -> Result<Self> {
        Polygon::new(
            vec![(min.0, min.1), (max.0, min.1), (max.0, max.1), (min.0, max.1)],
            vec![],
        )
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn translate(&self, de: f64, dn: f64) -> Polygon {
        let mv = |r: &Vec<Point>| r.iter().map(|&(e, n)| (e + de, n + dn)).collect();
        Polygon {
            exterior: mv(&self.exterior),
            holes: self.holes.iter().map(mv).collect(),
        }
    }
}

fn normalize_ring(mut ring: Vec<Point>, what: &str) -> Result<Vec<Point>> {
    if ring.len() >= 2 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(Error::Geometry(format!(
            "{what} ring has {} distinct vertices, need at least 3",
            ring.len()
        )));
    }
    if ring.iter().any(|(e, n)| !e.is_finite() || !n.is_finite()) {
        return Err(Error::Geometry(format!("{what} ring has non-finite coordinates")));
    }
    Ok(ring)
}

/// Union of polygons, as read from a GeoJSON MultiPolygon or collection.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiPolygon(pub Vec<Polygon>);

/// Even-odd fill of pixel centers. Holes subtract because they add
/// crossings like any other ring.
pub fn rasterize_polygon(poly: &Polygon, gt: &Geotransform, w: usize, h: usize) -> BitMask {
    let mut mask = BitMask::empty(w, h);
    let mut xs = Vec::new();
    for row in 0..h {
        let y = gt.pixel_center(row, 0).1;
        xs.clear();
        for ring in poly.rings() {
            let n = ring.len();
            let mut j = n - 1;
            for i in 0..n {
                let (xi, yi) = ring[i];
                let (xj, yj) = ring[j];
                if (yi > y) != (yj > y) {
                    xs.push((xj - xi) * (y - yi) / (yj - yi) + xi);
                }
                j = i;
            }
        }
        if xs.is_empty() {
            continue;
        }
        xs.sort_by(f64::total_cmp);
        // A center x is inside when an odd number of crossings lie strictly right of it.
        let mut at_or_left = 0;
        for col in 0..w {
            let x = gt.pixel_center(row, col).0;
            while at_or_left < xs.len() && xs[at_or_left] <= x {
                at_or_left += 1;
            }
            if (xs.len() - at_or_left) % 2 == 1 {
                mask.set(row, col, true);
            }
        }
    }
    mask
}

pub fn rasterize_multipolygon(mp: &MultiPolygon, gt: &Geotransform, w: usize, h: usize) -> BitMask {
    mp.0.iter().fold(BitMask::empty(w, h), |acc, p| {
        acc.or(&rasterize_polygon(p, gt, w, h)).expect("same dimensions")
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObfuscationDisk {
    pub center: Point,
    pub radius: f64,
}

impl ObfuscationDisk {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("disk radius must be positive, got {radius}")));
        }
        if !center.0.is_finite() || !center.1.is_finite() {
            return Err(Error::Parameter("disk center must be finite".into()));
        }
        Ok(ObfuscationDisk { center, radius })
    }

    pub fn contains(&self, p: Point) -> bool {
        let (de, dn) = (p.0 - self.center.0, p.1 - self.center.1);
        de * de + dn * dn <= self.radius * self.radius
    }
}

pub fn disk_mask(disk: &ObfuscationDisk, gt: &Geotransform, w: usize, h: usize) -> BitMask {
    let mut mask = BitMask::empty(w, h);
    // Restrict the scan to the disk's bounding rows.
    let (r0, _) = gt.to_pixel(disk.center.0, disk.center.1 + disk.radius);
    let (r1, _) = gt.to_pixel(disk.center.0, disk.center.1 - disk.radius);
    let lo = (r0.floor().max(0.0) as usize).min(h);
    let hi = ((r1.ceil() + 1.0).max(0.0) as usize).min(h);
    for row in lo..hi {
        for col in 0..w {
            if disk.contains(gt.pixel_center(row, col)) {
                mask.set(row, col, true);
            }
        }
    }
    mask
}

/// Searchable area of a candidate mask, with reductions against baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaReport {
    pub pixel_count: u64,
    pub pixel_area: f64,
    pub area_m2: f64,
    pub area_km2: f64,
    pub baselines: BTreeMap<String, f64>,
    pub reductions: BTreeMap<String, f64>,
}

pub fn searchable_area(mask: &BitMask, gt: &Geotransform, baselines: &BTreeMap<String, f64>) -> Result<AreaReport> {
    if let Some((label, v)) = baselines.iter().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Parameter(format!(
            "baseline `{label}` must be positive, got {v}"
        )));
    }
    Ok(area_from_count(mask.count_ones(), gt.pixel_area(), baselines))
}

pub(crate) fn area_from_count(pixel_count: u64, pixel_area: f64, baselines: &BTreeMap<String, f64>) -> AreaReport {
    let area_m2 = pixel_count as f64 * pixel_area;
    let area_km2 = area_m2 / 1e6;
    AreaReport {
        pixel_count,
        pixel_area,
        area_m2,
        area_km2,
        baselines: baselines.clone(),
        reductions: baselines.iter().map(|(k, b)| (k.clone(), 1.0 - area_km2 / b)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt() -> Geotransform {
        Geotransform::new(0.0, 640.0, 10.0).unwrap()
    }

    #[test]
    fn covering_rectangle_is_full() {
        let p = Polygon::rectangle((-5.0, -5.0), (700.0, 700.0)).unwrap();
        assert_eq!(rasterize_polygon(&p, &gt(), 64, 64), BitMask::full(64, 64));
    }

    #[test]
    fn hole_makes_a_frame() {
        let p = Polygon::new(
            vec![(0.0, 0.0), (640.0, 0.0), (640.0, 640.0), (0.0, 640.0), (0.0, 0.0)],
            vec![vec![(160.0, 160.0), (480.0, 160.0), (480.0, 480.0), (160.0, 480.0)]],
        )
        .unwrap();
        let m = rasterize_polygon(&p, &gt(), 64, 64);
        assert_eq!(m.count_ones(), 64 * 64 - 32 * 32);
        assert!(m.get(0, 0) && !m.get(32, 32) && m.get(10, 32));
    }

    #[test]
    fn degenerate_ring_is_a_geometry_error() {
        let err = Polygon::new(vec![(0.0, 0.0), (1.0, 1.0), (0.0, 0.0)], vec![]).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn tiny_disk_on_a_center_is_one_pixel() {
        let d = ObfuscationDisk::new((315.0, 325.0), 4.0).unwrap();
        let m = disk_mask(&d, &gt(), 64, 64);
        assert_eq!(m.count_ones(), 1);
        assert!(m.get(31, 31));
    }

    #[test]
    fn far_away_disk_is_empty() {
        let d = ObfuscationDisk::new((-5000.0, 320.0), 1000.0).unwrap();
        assert!(disk_mask(&d, &gt(), 64, 64).is_empty());
        assert!(ObfuscationDisk::new((0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn kilometre_disk_area() {
        let g = Geotransform::new(0.0, 3000.0, 10.0).unwrap();
        let d = ObfuscationDisk::new((1500.0, 1500.0), 1000.0).unwrap();
        let n = disk_mask(&d, &g, 300, 300).count_ones() as f64;
        let expect = std::f64::consts::PI * 100.0 * 100.0;
        assert!((n - expect).abs() / expect < 0.02, "{n}");
    }

    #[test]
    fn area_report_arithmetic() {
        let mut bl = BTreeMap::new();
        bl.insert("park".to_string(), 2.0688);
        let r = area_from_count(2641, 100.0, &bl);
        assert_eq!(r.area_km2, 0.2641);
        assert!((r.reductions["park"] - 0.8723).abs() < 5e-4);
        let empty = searchable_area(&BitMask::empty(3, 3), &gt(), &bl).unwrap();
        assert_eq!(empty.area_m2, 0.0);
        assert_eq!(empty.reductions["park"], 1.0);
        bl.insert("bad".into(), 0.0);
        assert!(searchable_area(&BitMask::empty(3, 3), &gt(), &bl).is_err());
    }
}
