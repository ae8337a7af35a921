#![no_main]
use geosieve::geo::rasterize_multipolygon;
use geosieve::geojson::parse_polygons;
use geosieve::Geotransform;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mp) = parse_polygons(text, |x, y| (x, y)) {
        let gt = Geotransform::new(0.0, 160.0, 10.0).unwrap();
        let _ = rasterize_multipolygon(&mp, &gt, 16, 16);
    }
});
