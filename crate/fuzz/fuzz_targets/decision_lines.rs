#![no_main]

use libfuzzer_sys::fuzz_target;
use pro_core::jsonl;
use pro_core::policy::Decision;

fuzz_target!(|data: &[u8]| {
    let _ = jsonl::read::<Decision, _>(data);
});
