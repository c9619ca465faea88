#![no_main]

use libfuzzer_sys::fuzz_target;

// The full untrusted path: raw text -> key-value map -> typed config with
// validation. Must never panic, whatever the input.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = vpfp_lab::config::LabConfig::from_text(text);
    }
});
