#![no_main]

use std::collections::BTreeMap;

use libfuzzer_sys::fuzz_target;

// --override KEY=VALUE arguments come straight from the command line; the
// parse plus the typed apply must never panic.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((key, value)) = vpfp_lab::config::parse_override(text) {
            let mut cfg = vpfp_lab::config::LabConfig::default();
            let mut kv = BTreeMap::new();
            kv.insert(key, value);
            let _ = cfg.apply_kv(&kv);
        }
    }
});
