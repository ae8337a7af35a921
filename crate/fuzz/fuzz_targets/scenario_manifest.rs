#![no_main]
use geosieve::scenario::ScenarioManifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ScenarioManifest::from_json(text);
});
