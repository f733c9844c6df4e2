#![no_main]

use libfuzzer_sys::fuzz_target;
use tokensteer_profiler::parse_corpus;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        let _ = parse_corpus(src);
    }
});
