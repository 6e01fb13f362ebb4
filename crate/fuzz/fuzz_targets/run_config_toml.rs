#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml(s) {
        let _ = cfg.grid();
        let _ = cfg.initial_weights();
    }
});
