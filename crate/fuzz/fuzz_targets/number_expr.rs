#![no_main]

use evasion_kinetics::io::parse_number_expr;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = parse_number_expr(text);
});
