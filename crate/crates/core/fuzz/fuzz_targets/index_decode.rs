#![no_main]

use libfuzzer_sys::fuzz_target;
use rocc::retrieval::{decode_index, encode_index};

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = decode_index(data) {
        // Encoding is canonical: a second round trip changes nothing.
        let bytes = encode_index(&index);
        let again = decode_index(&bytes).expect("re-encoded index decodes");
        assert_eq!(encode_index(&again), bytes);
    }
});
