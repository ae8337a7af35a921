#![no_main]
use geosieve::dsl::{format, parse, typecheck};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    match parse(src) {
        Ok(e) => {
            let _ = typecheck(&e);
            let text = format(&e);
            let again = parse(&text).expect("formatted expression parses");
            assert_eq!(again, e, "{text}");
        }
        Err(err) => assert!(err.offset <= src.len()),
    }
});
