#![no_main]

use libfuzzer_sys::fuzz_target;
use rocc::text::{tokenize, TokenizerConfig};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let cfg = TokenizerConfig::default();
    let tokens = tokenize(&text, &cfg);
    assert!(tokens
        .iter()
        .all(|t| !t.is_empty() && t.chars().all(char::is_alphanumeric)));
    let joined: Vec<&str> = tokens.iter().map(|t| t.as_str()).collect();
    assert_eq!(tokenize(&joined.join(" "), &cfg), tokens);
});
