#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_core::training::ObservationRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = ObservationRecord::from_json_line(s) {
        assert!(r.available_on() >= r.day);
    }
});
