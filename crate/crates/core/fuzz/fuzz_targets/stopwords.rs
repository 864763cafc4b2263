#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let words = rocc::text::parse_stopwords(&text);
    assert!(words.iter().all(|w| !w.is_empty() && w.trim() == w));
});
