#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_sim::SimScenario;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(sc) = SimScenario::from_json(s) {
        let again = serde_json::to_string(&sc).unwrap();
        assert_eq!(SimScenario::from_json(&again).unwrap(), sc);
    }
});
