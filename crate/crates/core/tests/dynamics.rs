mod common;

use evasion_kinetics::integrator::{
    check_simplex, evolve_observed, evolve_to_stationary, step, Rk4,
};
use evasion_kinetics::oracle::rhs_naive_oracle;
use evasion_kinetics::validation::{conservation_rates, oracle_relative_error};
use evasion_kinetics::{
    CoefficientTables, Error, InitialConditionSpec, IntegrationOptions, ModelConfig,
    PopulationState,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn uniform(n: usize, m: usize) -> PopulationState {
    PopulationState::new(n, m, vec![1.0 / (n * m) as f64; n * m]).unwrap()
}

fn integrate(
    tables: &CoefficientTables,
    x0: &PopulationState,
    dt: f64,
    horizon: f64,
) -> PopulationState {
    let mut x = x0.clone();
    let mut rk = Rk4::new(tables);
    let steps = (horizon / dt).round() as usize;
    for i in 0..steps {
        rk.step_in_place(x.as_mut_slice(), dt, i as f64 * dt)
            .unwrap();
    }
    x
}

#[test]
fn rhs_matches_oracle_on_reference() {
    let tables = CoefficientTables::new(&ModelConfig::reference()).unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let x = common::random_simplex(&mut rng, 9, 3);
        assert!(oracle_relative_error(&tables, &x).unwrap() <= 1e-12);
    }
}

#[test]
fn oracle_refuses_large_instances() {
    let config = ModelConfig {
        n: 40,
        m: 3,
        incomes: (1..=40).map(|j| 10.0 * j as f64).collect(),
        ..ModelConfig::reference()
    };
    let tables = CoefficientTables::new(&config).unwrap();
    assert!(matches!(
        rhs_naive_oracle(&uniform(40, 3), &tables),
        Err(Error::InstanceTooLarge { .. })
    ));
}

#[test]
fn two_class_single_sector_field_vanishes() {
    let config = ModelConfig {
        n: 2,
        m: 1,
        incomes: vec![1.2, 11.0],
        exchange_amount: 0.1,
        tax: evasion_kinetics::TaxSchedule::Explicit(vec![0.6, 0.8]),
        theta_ev: vec![0.2],
        sector_shares: vec![1.0],
    };
    let tables = CoefficientTables::new(&config).unwrap();
    let x = PopulationState::new(2, 1, vec![0.47, 0.53]).unwrap();
    assert!(tables.rhs(&x).unwrap().sup_norm() < 1e-18);
    assert!(oracle_relative_error(&tables, &x).unwrap() <= 1e-12);
}

#[test]
fn rhs_rejects_empty_population() {
    let tables = CoefficientTables::new(&ModelConfig::reference()).unwrap();
    assert!(matches!(
        tables.rhs(&PopulationState::zeros(9, 3)),
        Err(Error::SingularState(_))
    ));
}

#[test]
fn extreme_classes_are_fixed_points_of_exchange() {
    // all mass in the lowest class: nobody can pay, nothing moves
    let tables = CoefficientTables::new(&ModelConfig::reference()).unwrap();
    let mut x = PopulationState::zeros(9, 3);
    for a in 0..3 {
        x.set(0, a, 1.0 / 3.0);
    }
    assert_eq!(tables.rhs(&x).unwrap().sup_norm(), 0.0);
}

#[test]
fn step_preserves_simplex_and_income() {
    let config = ModelConfig::reference();
    let tables = CoefficientTables::new(&config).unwrap();
    let mut rng = StdRng::seed_from_u64(5);
    let x = common::random_simplex(&mut rng, 9, 3);
    let mu = x.mean_income(&config.incomes);
    let next = step(&x, &tables, 0.5).unwrap();
    assert!((next.total() - 1.0).abs() < 1e-14);
    assert!((next.mean_income(&config.incomes) - mu).abs() < 1e-12);
    check_simplex(&next).unwrap();
}

#[test]
fn step_rejects_bad_arguments() {
    let tables = CoefficientTables::new(&ModelConfig::reference()).unwrap();
    let x = uniform(9, 3);
    assert!(matches!(
        step(&x, &tables, 0.0),
        Err(Error::ContractViolation(_))
    ));
    assert!(step(&x, &tables, f64::NAN).is_err());
    assert!(step(&uniform(4, 3), &tables, 0.5).is_err());
}

#[test]
fn oversized_step_reports_negative_state() {
    let tables = CoefficientTables::new(&ModelConfig::reference()).unwrap();
    let err = step(&uniform(9, 3), &tables, 500.0).unwrap_err();
    assert!(matches!(err, Error::StepTooLarge { .. }), "{err}");
}

#[test]
fn rk4_is_fourth_order() {
    let config = ModelConfig::reference();
    let tables = CoefficientTables::new(&config).unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    let x0 = common::random_simplex(&mut rng, 9, 3);
    let horizon = 16.0;
    let reference = integrate(&tables, &x0, 1.0 / 32.0, horizon);
    let errors: Vec<f64> = [4.0, 2.0, 1.0]
        .iter()
        .map(|dt| integrate(&tables, &x0, *dt, horizon).sup_distance(&reference))
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 3.6, "errors {errors:?}");
    }
}

#[test]
fn stationary_state_is_kept() {
    let config = ModelConfig::reference();
    let tables = CoefficientTables::new(&config).unwrap();
    let opts = IntegrationOptions::default();
    let first = evolve_to_stationary(&uniform(9, 3), &tables, &opts).unwrap();
    assert!(first.converged);
    assert!(first.residual <= opts.stationarity_tol);

    let again = evolve_to_stationary(&first.state, &tables, &opts).unwrap();
    assert_eq!(again.final_time, 0.0);
    assert_eq!(again.steps, 0);
    assert_eq!(again.state, first.state);

    let nudged = step(&first.state, &tables, 0.5).unwrap();
    assert!(nudged.sup_distance(&first.state) < 1e-9);
}

#[test]
fn halving_dt_leaves_stationary_state_unchanged() {
    let config = ModelConfig::reference();
    let tables = CoefficientTables::new(&config).unwrap();
    let x0 = InitialConditionSpec::Uniform.build(&config).unwrap();
    let coarse = evolve_to_stationary(&x0, &tables, &IntegrationOptions::default()).unwrap();
    let fine = evolve_to_stationary(
        &x0,
        &tables,
        &IntegrationOptions {
            dt: 0.25,
            ..IntegrationOptions::default()
        },
    )
    .unwrap();
    assert!(coarse.converged && fine.converged);
    assert!(coarse.state.sup_distance(&fine.state) < 1e-6);
}

#[test]
fn observer_sees_every_step() {
    let config = ModelConfig::reference();
    let tables = CoefficientTables::new(&config).unwrap();
    let opts = IntegrationOptions {
        max_time: 50.0,
        ..IntegrationOptions::default()
    };
    let mut seen = Vec::new();
    let res = evolve_observed(&uniform(9, 3), &tables, &opts, |s, t, x| {
        seen.push((s, t, x.total()));
    })
    .unwrap();
    assert!(!res.converged);
    assert_eq!(res.final_time, 50.0);
    assert_eq!(res.steps, 100);
    assert_eq!(seen.len(), 101);
    assert!(seen
        .iter()
        .enumerate()
        .all(|(i, (s, t, _))| *s == i as u64 && *t == i as f64 * 0.5));
}

#[test]
fn evolve_rejects_off_simplex_start() {
    let tables = CoefficientTables::new(&ModelConfig::reference()).unwrap();
    let opts = IntegrationOptions::default();
    let mut x = uniform(9, 3);
    x.set(0, 0, x.get(0, 0) + 1e-6);
    assert!(matches!(
        evolve_to_stationary(&x, &tables, &opts),
        Err(Error::InvalidDistribution(_))
    ));
    x.set(0, 0, -1e-3);
    assert!(evolve_to_stationary(&x, &tables, &opts).is_err());
    let bad = IntegrationOptions { dt: -1.0, ..opts };
    assert!(matches!(
        evolve_to_stationary(&uniform(9, 3), &tables, &bad),
        Err(Error::InvalidConfig { .. })
    ));
}

#[test]
fn full_compliance_and_flat_tax_still_conserve() {
    let config = ModelConfig {
        tax: evasion_kinetics::TaxSchedule::Linear {
            tau_min: 0.3,
            tau_max: 0.3,
        },
        ..ModelConfig::reference()
    };
    let tables = CoefficientTables::new(&config).unwrap();
    let res =
        evolve_to_stationary(&uniform(9, 3), &tables, &IntegrationOptions::default()).unwrap();
    assert!(res.converged);
    assert!((res.state.mean_income(&config.incomes) - 50.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fast_rhs_agrees_with_oracle(config in common::arb_config(), seed in any::<u64>()) {
        let tables = CoefficientTables::new(&config).unwrap();
        let x = common::random_simplex(&mut StdRng::seed_from_u64(seed), config.n, config.m);
        prop_assert!(oracle_relative_error(&tables, &x).unwrap() <= 1e-12);
    }

    #[test]
    fn rhs_conserves_mass_and_income(config in common::arb_config(), seed in any::<u64>()) {
        let tables = CoefficientTables::new(&config).unwrap();
        let x = common::random_simplex(&mut StdRng::seed_from_u64(seed), config.n, config.m);
        let (dn, dmu) = conservation_rates(&tables, &x).unwrap();
        let scale = config.incomes[config.n - 1];
        prop_assert!(dn <= 1e-12);
        prop_assert!(dmu <= 1e-12 * scale);
    }

    #[test]
    fn steps_stay_nonnegative(x in common::arb_simplex(9, 3)) {
        let config = ModelConfig::reference();
        let tables = CoefficientTables::new(&config).unwrap();
        let next = step(&x, &tables, 0.5).unwrap();
        prop_assert!(next.as_slice().iter().all(|v| *v >= 0.0));
        prop_assert!((next.total() - 1.0).abs() <= 1e-13);
        let mu = x.mean_income(&config.incomes);
        prop_assert!((next.mean_income(&config.incomes) - mu).abs() <= 1e-11);
    }
}
