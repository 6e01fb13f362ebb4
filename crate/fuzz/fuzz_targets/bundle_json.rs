#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_core::ModelBundle;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(b) = ModelBundle::from_json(s) {
        // hex-encoded floats must survive a second trip unchanged
        let again = serde_json::to_string(&b).unwrap();
        assert_eq!(serde_json::to_string(&ModelBundle::from_json(&again).unwrap()).unwrap(), again);
    }
});
