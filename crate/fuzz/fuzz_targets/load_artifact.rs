#![no_main]

use libfuzzer_sys::fuzz_target;
use msfem::artifact::{from_bytes, to_bytes};

fuzz_target!(|data: &[u8]| {
    // anything that decodes must re-encode to the same bytes
    if let Ok(art) = from_bytes(data) {
        assert_eq!(to_bytes(&art), data);
    }
});
