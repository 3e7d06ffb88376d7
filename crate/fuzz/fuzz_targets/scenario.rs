#![no_main]

use libfuzzer_sys::fuzz_target;
use twophase::io::{parse_scenario, ScenarioKind};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scenario) = parse_scenario(text, None) {
        // only `validate` scenarios may carry parameters that fail validation
        if !matches!(scenario.kind, ScenarioKind::Validate) {
            assert!(scenario.params.validate().is_valid());
        }
    }
});
