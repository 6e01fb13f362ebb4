#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_core::floatbits::{decode, encode};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Some(x) = decode(s) {
        assert_eq!(decode(&encode(x)).map(f64::to_bits), Some(x.to_bits()));
    }
});
