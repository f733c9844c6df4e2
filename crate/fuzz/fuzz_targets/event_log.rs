#![no_main]

use libfuzzer_sys::fuzz_target;
use tokensteer_core::session::events::{parse_event_line, parse_event_log};

fuzz_target!(|data: &[u8]| {
    if let Ok(src) = std::str::from_utf8(data) {
        if let Ok(events) = parse_event_log(src) {
            for w in events.windows(2) {
                assert_eq!(w[1].seq, w[0].seq + 1);
            }
        }
        if let Some(first) = src.lines().next() {
            let _ = parse_event_line(first);
        }
    }
});
