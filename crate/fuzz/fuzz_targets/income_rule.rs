#![no_main]

use evasion_kinetics::io::parse_income_rule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|input: (u8, &str)| {
    let (n, rule) = input;
    if let Ok(incomes) = parse_income_rule(rule, usize::from(n)) {
        assert_eq!(incomes.len(), usize::from(n));
    }
});
