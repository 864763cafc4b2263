#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(instances) = rocc::datasets::parse_canonical(data, "fuzz") {
        // Whatever parses must survive a write/parse round trip.
        let mut buf = Vec::new();
        rocc::datasets::write_canonical(&instances, &mut buf).unwrap();
        let again = rocc::datasets::parse_canonical(buf.as_slice(), "fuzz").unwrap();
        assert_eq!(again, instances);
    }
});
