#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = rocc::datasets::split_marked_sentences(text);
        if let Ok(instances) = rocc::datasets::adapt_multirc(text, "fuzz") {
            for inst in &instances {
                assert!(inst.validate().is_ok());
            }
        }
    }
});
