mod common;

use evasion_kinetics::metrics::{gini, metrics_report, total_evasion_level};
use evasion_kinetics::{Error, ModelConfig, PopulationState};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// Area form of the Gini index: one minus twice the area under the Lorenz curve.
fn lorenz_gini(weights: &[f64], incomes: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut pairs: Vec<(f64, f64)> = weights
        .iter()
        .map(|w| w / total)
        .zip(incomes.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mu: f64 = pairs.iter().map(|(w, r)| w * r).sum();
    let mut share = 0.0;
    let mut area = 0.0;
    for (w, r) in pairs {
        let next = share + w * r / mu;
        area += w * (share + next) / 2.0;
        share = next;
    }
    1.0 - 2.0 * area
}

#[test]
fn gini_hand_values() {
    assert!((gini(&[0.5, 0.5], &[1.0, 3.0]).unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(gini(&[0.0, 1.0, 0.0], &[10.0, 20.0, 30.0]).unwrap(), 0.0);
    // equal mass on 10..90: (1/81) sum |i-j| * 10 / (2 * 50)
    let w = vec![1.0 / 9.0; 9];
    let r: Vec<f64> = (1..=9).map(|j| 10.0 * j as f64).collect();
    assert!((gini(&w, &r).unwrap() - 240.0 / 810.0).abs() < 1e-15);
}

#[test]
fn gini_rejects_bad_input() {
    assert!(matches!(
        gini(&[0.0, 0.0], &[1.0, 2.0]),
        Err(Error::InvalidDistribution(_))
    ));
    assert!(gini(&[0.5, -0.1], &[1.0, 2.0]).is_err());
    assert!(gini(&[0.5, 0.5], &[0.0, 2.0]).is_err());
    assert!(gini(&[0.5], &[1.0, 2.0]).is_err());
    assert!(gini(&[f64::NAN, 1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn evasion_level_of_named_profiles() {
    let thirds = [1.0 / 3.0; 3];
    assert!(
        (total_evasion_level(&thirds, &[1.0, 0.5, 0.25]) - 0.75 / 3.0 - 0.5 / 3.0).abs() < 1e-15
    );
    assert!((total_evasion_level(&thirds, &[1.0, 0.75, 0.75]) - 1.0 / 6.0).abs() < 1e-15);
    assert!((total_evasion_level(&thirds, &[1.0, 1.0, 0.5]) - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(total_evasion_level(&thirds, &[1.0; 3]), 0.0);
}

#[test]
fn report_on_uniform_state() {
    let config = ModelConfig::reference();
    let x = PopulationState::new(9, 3, vec![1.0 / 27.0; 27]).unwrap();
    let report = metrics_report(&x, &config).unwrap();
    assert!((report.mu_total - 50.0).abs() < 1e-12);
    assert_eq!(report.income_gap, Some(0.0));
    for g in &report.gini_per_sector {
        assert!((g.unwrap() - report.gini_total).abs() < 1e-15);
    }
    assert_eq!(report.flat_fields().len(), 9 + 3 + 1 + 3 + 1 + 3 + 1);
}

#[test]
fn empty_sector_metrics_are_undefined() {
    let config = ModelConfig::reference();
    let mut x = PopulationState::zeros(9, 3);
    for j in 0..9 {
        x.set(j, 0, 1.0 / 18.0);
        x.set(j, 1, 1.0 / 18.0);
    }
    let report = metrics_report(&x, &config).unwrap();
    assert_eq!(report.sector_mean_income[2], None);
    assert_eq!(report.gini_per_sector[2], None);
    assert_eq!(report.income_gap, None);
    assert!(report.gini_total > 0.0);
    let fields = report.flat_fields();
    assert!(fields.iter().any(|(k, v)| k == "income_gap" && v.is_none()));
}

#[test]
fn report_rejects_wrong_shape() {
    let x = PopulationState::new(3, 1, vec![1.0 / 3.0; 3]).unwrap();
    assert!(matches!(
        metrics_report(&x, &ModelConfig::reference()),
        Err(Error::ContractViolation(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn gini_matches_lorenz_area(
        w in prop::collection::vec(0.0f64..1.0, 1..12),
        seed in any::<u64>(),
    ) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        use rand::Rng;
        let mut rng = StdRng::seed_from_u64(seed);
        let r: Vec<f64> = (0..w.len()).map(|_| rng.gen_range(0.5..100.0)).collect();
        let g = gini(&w, &r).unwrap();
        prop_assert!((g - lorenz_gini(&w, &r)).abs() < 1e-12);
        prop_assert!((0.0..1.0).contains(&g));
    }

    #[test]
    fn gini_is_scale_and_permutation_invariant(
        w in prop::collection::vec(0.01f64..1.0, 2..10),
        c in 0.01f64..100.0,
        k in 0.01f64..100.0,
        rot in 0usize..10,
    ) {
        let r: Vec<f64> = (1..=w.len()).map(|j| 7.0 * j as f64 + 3.0).collect();
        let g = gini(&w, &r).unwrap();
        let scaled_w: Vec<f64> = w.iter().map(|v| v * c).collect();
        let scaled_r: Vec<f64> = r.iter().map(|v| v * k).collect();
        prop_assert!((gini(&scaled_w, &scaled_r).unwrap() - g).abs() < 1e-12);
        let mut pw = w.clone();
        let mut pr = r.clone();
        pw.rotate_left(rot % w.len());
        pr.rotate_left(rot % w.len());
        prop_assert!((gini(&pw, &pr).unwrap() - g).abs() < 1e-12);
    }

    #[test]
    fn sector_means_recombine(x in common::arb_simplex(9, 3)) {
        let config = ModelConfig::reference();
        let report = metrics_report(&x, &config).unwrap();
        let recombined: f64 = report
            .sector_marginals
            .iter()
            .zip(&report.sector_mean_income)
            .map(|(w, mu)| w * mu.unwrap())
            .sum();
        prop_assert!((recombined - report.mu_total).abs() < 1e-10);
        prop_assert!(report.gini_total < 1.0);
    }

    #[test]
    fn relabeling_sectors_permutes_metrics(x in common::arb_simplex(6, 3)) {
        let config = ModelConfig {
            n: 6,
            incomes: (1..=6).map(|j| 10.0 * j as f64).collect(),
            ..ModelConfig::reference()
        };
        let mut swapped = PopulationState::zeros(6, 3);
        for j in 0..6 {
            for a in 0..3 {
                swapped.set(j, 2 - a, x.get(j, a));
            }
        }
        let one = metrics_report(&x, &config).unwrap();
        let two = metrics_report(&swapped, &config).unwrap();
        prop_assert!((one.gini_total - two.gini_total).abs() < 1e-14);
        for a in 0..3 {
            prop_assert_eq!(one.gini_per_sector[a], two.gini_per_sector[2 - a]);
            prop_assert_eq!(one.sector_mean_income[a], two.sector_mean_income[2 - a]);
        }
    }
}
