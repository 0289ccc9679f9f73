#![allow(dead_code)]

use evasion_kinetics::{ModelConfig, PopulationState, TaxSchedule};
use proptest::prelude::*;
use rand::Rng;

/// Random admissible configuration with the given shape; `S` stays below a
/// fifth of the smallest gap so every direct coefficient lies in [0, 1].
pub fn random_config<R: Rng>(rng: &mut R, n: usize, m: usize) -> ModelConfig {
    let mut incomes = Vec::with_capacity(n);
    let mut r = rng.gen_range(1.0..20.0);
    for _ in 0..n {
        incomes.push(r);
        r += rng.gen_range(1.0..20.0);
    }
    let min_gap = incomes
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let tax = if rng.gen_bool(0.5) {
        let a: f64 = rng.gen_range(0.0..1.0);
        let b: f64 = rng.gen_range(0.0..1.0);
        TaxSchedule::Linear {
            tau_min: a.min(b),
            tau_max: a.max(b),
        }
    } else {
        let mut t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        t.sort_by(f64::total_cmp);
        TaxSchedule::Explicit(t)
    };
    let mut theta_ev: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=1.0)).collect();
    theta_ev.sort_by(|a, b| b.total_cmp(a));
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    ModelConfig {
        n,
        m,
        incomes,
        exchange_amount: rng.gen_range(0.01..0.2) * min_gap,
        tax,
        theta_ev,
        sector_shares: raw.iter().map(|w| w / total).collect(),
    }
}

/// Uniformly distributed point on the simplex (normalized exponentials).
pub fn random_simplex<R: Rng>(rng: &mut R, n: usize, m: usize) -> PopulationState {
    let raw: Vec<f64> = (0..n * m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    PopulationState::new(n, m, raw.iter().map(|v| v / total).collect()).unwrap()
}

pub fn arb_config() -> impl Strategy<Value = ModelConfig> {
    (2usize..=8, 1usize..=3, any::<u64>()).prop_map(|(n, m, seed)| {
        use rand::SeedableRng;
        random_config(&mut rand::rngs::StdRng::seed_from_u64(seed), n, m)
    })
}

pub fn arb_simplex(n: usize, m: usize) -> impl Strategy<Value = PopulationState> {
    prop::collection::vec(0.0f64..1.0, n * m)
        .prop_filter("positive mass", |v| v.iter().sum::<f64>() > 1e-3)
        .prop_map(move |v| {
            let total: f64 = v.iter().sum();
            PopulationState::new(n, m, v.iter().map(|x| x / total).collect()).unwrap()
        })
}
