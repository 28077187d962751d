#![no_main]

use libfuzzer_sys::fuzz_target;
use msfem::expr::parse_expr;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(e) = parse_expr(src) {
            let _ = e.eval(0.25, 0.75);
        }
    }
});
