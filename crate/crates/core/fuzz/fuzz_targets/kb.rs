#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let kb = rocc::datasets::read_kb(data).unwrap();
    let newlines = data.iter().filter(|&&b| b == b'\n').count();
    let lines = newlines + usize::from(!data.is_empty() && !data.ends_with(b"\n"));
    assert_eq!(kb.sentences.len() + kb.skipped, lines);
});
