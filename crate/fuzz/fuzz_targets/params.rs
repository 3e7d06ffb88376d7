#![no_main]

use libfuzzer_sys::fuzz_target;
use twophase::io::parse_params;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(params) = parse_params(text, None) {
        assert!(params.validate().is_valid());
    }
});
