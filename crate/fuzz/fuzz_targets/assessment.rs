#![no_main]

use libfuzzer_sys::fuzz_target;
use tokensteer_core::analysis::validate_assessment_str;

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(a) = validate_assessment_str(src) {
            assert!((0.0..=1.0).contains(&a.importance_score));
        }
    }
});
