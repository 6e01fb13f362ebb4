#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_sim::SimScenario;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = SimScenario::from_toml(s);
});
