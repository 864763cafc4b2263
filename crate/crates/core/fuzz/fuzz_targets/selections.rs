#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(sel) = rocc::pipeline::parse_selections(data, "fuzz") {
        let _ = sel.predictions();
    }
});
