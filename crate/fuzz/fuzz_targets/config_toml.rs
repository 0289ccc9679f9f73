#![no_main]

use evasion_kinetics::io::{parse_config, DocumentFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(loaded) = parse_config(text, DocumentFormat::Toml, "fuzz") {
            loaded.model.validate().expect("resolved config is valid");
        }
    }
});
