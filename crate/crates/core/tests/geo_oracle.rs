mod common;

use common::*;
use geosieve::geo::{disk_mask, rasterize_polygon, ObfuscationDisk, Polygon};
use geosieve::Geotransform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn disk_counts_track_the_analytic_area() {
    for r_px in [50usize, 100, 300] {
        let n = 2 * r_px + 11;
        let gt = Geotransform::new(0.0, n as f64 * 10.0, 10.0).unwrap();
        let center = gt.center(n, n);
        let disk = ObfuscationDisk::new(center, r_px as f64 * 10.0).unwrap();
        let count = disk_mask(&disk, &gt, n, n).count_ones() as f64;
        let area = std::f64::consts::PI * (r_px * r_px) as f64;
        assert!((count - area).abs() / area < 0.02, "r={r_px}: {count} vs {area}");
    }
}

#[test]
fn convex_polygons_match_ray_casting() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let gt = Geotransform::new(0.0, 640.0, 10.0).unwrap();
    for _ in 0..50 {
        let p = random_convex_polygon(&mut rng, 640.0);
        let m = rasterize_polygon(&p, &gt, 64, 64);
        for r in 0..64 {
            for c in 0..64 {
                assert_eq!(m.get(r, c), pnpoly(&p, gt.pixel_center(r, c)), "{p:?} at {r},{c}");
            }
        }
    }
}

#[test]
fn polygons_with_holes_match_ray_casting() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let gt = Geotransform::new(0.0, 640.0, 10.0).unwrap();
    for _ in 0..30 {
        let outer = random_convex_polygon(&mut rng, 640.0);
        let hole = random_convex_polygon(&mut rng, 640.0);
        let p = Polygon::new(outer.exterior, vec![hole.exterior]).unwrap();
        let m = rasterize_polygon(&p, &gt, 64, 64);
        for r in 0..64 {
            for c in 0..64 {
                assert_eq!(m.get(r, c), pnpoly(&p, gt.pixel_center(r, c)));
            }
        }
    }
}

/// Vertices on pixel-center rows hit the half-open crossing rule.
#[test]
fn axis_aligned_vertices_on_centers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gt = Geotransform::new(0.0, 320.0, 10.0).unwrap();
    for _ in 0..50 {
        let ring: Vec<_> = (0..rng.random_range(3..8))
            .map(|_| {
                (
                    rng.random_range(0..32) as f64 * 10.0 + 5.0,
                    rng.random_range(0..32) as f64 * 10.0 + 5.0,
                )
            })
            .collect();
        let Ok(p) = Polygon::new(ring, vec![]) else { continue };
        let m = rasterize_polygon(&p, &gt, 32, 32);
        for r in 0..32 {
            for c in 0..32 {
                assert_eq!(m.get(r, c), pnpoly(&p, gt.pixel_center(r, c)));
            }
        }
    }
}
