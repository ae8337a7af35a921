#![no_main]
use geosieve::raster::BandManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = BandManifest::from_json(text) {
        for n in 0..8 {
            let _ = m.names_for(n);
        }
    }
});
