#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&dim, rest)) = data.split_first() else {
        return;
    };
    let expected = (dim % 4 != 0).then_some(dim as usize % 8);
    if let Ok(table) = rocc::embedding::parse_embeddings(rest, expected, "fuzz") {
        for term in ["a", "b", "the"] {
            if let Some(c) = table.cosine(term, term) {
                assert!(c.is_finite());
            }
        }
    }
});
