#![no_main]

use libfuzzer_sys::fuzz_target;
use tokensteer_core::backend::Trace;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        let _ = Trace::from_json(src);
    }
});
