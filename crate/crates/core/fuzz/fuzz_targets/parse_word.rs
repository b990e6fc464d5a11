#![no_main]

use heightgap::freeword::Word;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for rank in 1..=3 {
        if let Ok(w) = Word::parse(text, rank) {
            let again = Word::parse(&w.to_string(), rank).expect("display output parses");
            assert_eq!(again, w);
        }
    }
});
