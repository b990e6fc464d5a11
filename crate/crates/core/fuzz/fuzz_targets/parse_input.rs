#![no_main]

use heightgap::input::parse_input;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 4096 {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_input(text) {
        assert!(!spec.matrices.is_empty());
        for m in &spec.matrices {
            assert_eq!(m.matrix.dimension(), spec.d);
        }
    }
});
