#![no_main]
use geosieve::geotiff::decode;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode(data) {
        for band in &img.bands {
            assert_eq!(band.len(), img.width * img.height);
        }
    }
});
