#![no_main]

use libfuzzer_sys::fuzz_target;
use msfem::config::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(text) {
            assert!(cfg.nf % cfg.nc == 0);
            assert!(cfg.resolved_eps() > 0.0);
        }
    }
});
