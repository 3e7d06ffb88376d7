#![no_main]

use libfuzzer_sys::fuzz_target;
use twophase::io::parse_cars;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((positions, markers)) = parse_cars(text) {
        assert_eq!(positions.len(), markers.len());
        assert!(positions.len() >= 2);
    }
});
