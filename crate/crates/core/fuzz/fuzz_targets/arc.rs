#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(instances) = rocc::datasets::adapt_arc(data, "fuzz") {
        assert!(instances.iter().all(|i| i.candidates.is_none()));
    }
});
