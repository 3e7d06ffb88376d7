#![no_main]

use libfuzzer_sys::fuzz_target;
use twophase::io::parse_psi_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(law) = parse_psi_table(text) {
        let r = law.max_density();
        for k in 0..=64 {
            let rho = r * k as f64 / 64.0;
            assert!(law.psi(rho).is_finite() && law.dpsi(rho).is_finite());
        }
    }
});
