#![no_main]

use libfuzzer_sys::fuzz_target;
use tokensteer_core::backend::wire;

fuzz_target!(|data: &[u8]| {
    if let Ok(parsed) = wire::parse_completion_response(data, 10) {
        for completion in parsed {
            for step in &completion.steps {
                let total: f64 = step.candidates.iter().map(|c| c.prob).sum();
                assert!(total <= 1.0 + 1e-6);
            }
        }
    }
    let _ = wire::parse_text_choices(data);
});
