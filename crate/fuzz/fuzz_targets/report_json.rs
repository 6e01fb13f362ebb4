#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_sim::ExperimentReport;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(r) = ExperimentReport::from_json(s) {
        let again = r.to_json().unwrap();
        assert_eq!(ExperimentReport::from_json(&again).unwrap(), r);
    }
});
