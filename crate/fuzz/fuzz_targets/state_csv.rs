#![no_main]

use evasion_kinetics::io::{parse_state_csv, state_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(x) = parse_state_csv(text) {
        let again = parse_state_csv(&state_csv(&x)).expect("emitted csv parses");
        assert_eq!(again.n(), x.n());
        assert_eq!(again.m(), x.m());
    }
});
