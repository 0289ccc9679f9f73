#![no_main]

use evasion_kinetics::io::parse_percent_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(values) = parse_percent_list(text) {
        assert!(!values.is_empty());
    }
});
