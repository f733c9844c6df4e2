#![no_main]

use libfuzzer_sys::fuzz_target;
use tokensteer_core::config::Config;

const NO_ENV: [(&str, &str); 0] = [];

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(cfg) = Config::from_sources(src, NO_ENV) {
            assert!(cfg.highlight.tau < cfg.highlight.h_max);
        }
    }
});
