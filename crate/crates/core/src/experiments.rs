//! Scenario runs, the evasion-level sweep and the comparison studies.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::integrator::{evolve_to_stationary, IntegrationOptions, StationaryResult};
use crate::metrics::{metrics_report, total_evasion_level, MetricsReport};
use crate::model::CoefficientTables;
use crate::state::PopulationState;

/// Sweep grid of total evasion levels, as fractions.
pub const DEFAULT_SWEEP_ETAS: [f64; 8] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.40, 0.50];

/// Reference `(eta, d)` pairs for the three-sector gradual-spread sweep, as fractions.
#[allow(clippy::approx_constant)]
pub const REFERENCE_GAPS: [(f64, f64); 8] = [
    (0.05, 0.035),
    (0.10, 0.068),
    (0.15, 0.108),
    (0.20, 0.146),
    (0.25, 0.181),
    (0.30, 0.215),
    (0.40, 0.318),
    (0.50, 0.418),
];

/// Evasion profiles with the same total evasion level 1/6: spread over two sectors, or
/// concentrated in one.
pub const WIDESPREAD_THETA: [f64; 3] = [1.0, 0.75, 0.75];
pub const CONCENTRATED_THETA: [f64; 3] = [1.0, 1.0, 0.5];

/// How the initial population is laid out. Every mode splits each class
/// between sectors by the configured sector shares, except `Explicit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum InitialConditionSpec {
    /// `x_j^alpha = w_alpha / n`.
    #[default]
    Uniform,
    /// Full `n x m` table of fractions, one row per class.
    Explicit { x: Vec<Vec<f64>> },
    /// Class profile `u_j` (normalized to sum 1). With `target_mu`, the profile
    /// is blended with a point mass at the lowest or highest class until the
    /// global income equals the target.
    ClassProfile {
        profile: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_mu: Option<f64>,
    },
}

impl InitialConditionSpec {
    pub fn build(&self, config: &ModelConfig) -> Result<PopulationState> {
        let (n, m) = (config.n, config.m);
        match self {
            InitialConditionSpec::Uniform => Ok(PopulationState::from_class_profile(
                &vec![1.0 / n as f64; n],
                &config.sector_shares,
            )),
            InitialConditionSpec::Explicit { x } => {
                if x.len() != n || x.iter().any(|row| row.len() != m) {
                    return Err(Error::config(
                        format!("ic.x is an {n} x {m} table"),
                        format!("{} rows", x.len()),
                    ));
                }
                PopulationState::new(n, m, x.iter().flatten().copied().collect())
            }
            InitialConditionSpec::ClassProfile { profile, target_mu } => {
                let u = class_profile(profile, &config.incomes, *target_mu)?;
                Ok(PopulationState::from_class_profile(
                    &u,
                    &config.sector_shares,
                ))
            }
        }
    }
}

fn class_profile(profile: &[f64], incomes: &[f64], target_mu: Option<f64>) -> Result<Vec<f64>> {
    let n = incomes.len();
    if profile.len() != n {
        return Err(Error::config(
            format!("ic.profile has n = {n} entries"),
            profile.len(),
        ));
    }
    if let Some(u) = profile.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
        return Err(Error::config("ic.profile entries >= 0", u));
    }
    let total: f64 = profile.iter().sum();
    if total <= 0.0 {
        return Err(Error::config("ic.profile has positive mass", total));
    }
    let mut u: Vec<f64> = profile.iter().map(|v| v / total).collect();
    let Some(target) = target_mu else {
        return Ok(u);
    };
    let (lo, hi) = (incomes[0], incomes[n - 1]);
    if !(lo..=hi).contains(&target) {
        return Err(Error::config(
            format!("ic.target_mu in [{lo}, {hi}]"),
            target,
        ));
    }
    let mean: f64 = u.iter().zip(incomes).map(|(a, r)| a * r).sum();
    let anchor = if mean < target {
        n - 1
    } else if mean > target {
        0
    } else {
        return Ok(u);
    };
    // weight * mean + (1 - weight) * r_anchor = target
    let weight = (target - incomes[anchor]) / (mean - incomes[anchor]);
    u.iter_mut().for_each(|v| *v *= weight);
    u[anchor] += 1.0 - weight;
    Ok(u)
}

/// Stationary state of one configuration together with its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub stationary: StationaryResult,
    pub metrics: MetricsReport,
}

pub fn run_scenario(
    config: &ModelConfig,
    ic: &InitialConditionSpec,
    opts: &IntegrationOptions,
) -> Result<ScenarioOutcome> {
    let tables = CoefficientTables::new(config)?;
    let x0 = ic.build(config)?;
    let stationary = evolve_to_stationary(&x0, &tables, opts)?;
    if stationary.converged {
        log::info!(
            "theta_ev {:?}: stationary at t = {} ({} steps)",
            config.theta_ev,
            stationary.final_time,
            stationary.steps
        );
    } else {
        log::warn!(
            "no stationary state within t = {} (residual {:e})",
            stationary.final_time,
            stationary.residual
        );
    }
    let metrics = metrics_report(&stationary.state, config)?;
    Ok(ScenarioOutcome {
        stationary,
        metrics,
    })
}

/// One point of the evasion sweep. All quantities are fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub theta_ev: Vec<f64>,
    pub income_gap: Option<f64>,
    pub gini: f64,
    pub converged: bool,
    pub residual: f64,
    pub mu: f64,
}

/// Evasion profile `(1, 1 - eta, 1 - 2 eta)` of the gradual-spread sweep.
pub fn gradual_spread_theta(eta: f64) -> Result<Vec<f64>> {
    if !(0.0..=0.5).contains(&eta) {
        return Err(Error::InvalidSweepPoint(eta));
    }
    Ok(vec![1.0, 1.0 - eta, 1.0 - 2.0 * eta])
}

fn require_equal_thirds(config: &ModelConfig) -> Result<()> {
    if config.m != 3 {
        return Err(Error::config("three evasion sectors", config.m));
    }
    if config
        .sector_shares
        .iter()
        .any(|w| (w - 1.0 / 3.0).abs() > 1e-12)
    {
        return Err(Error::config(
            "equal sector shares of 1/3",
            format!("{:?}", config.sector_shares),
        ));
    }
    Ok(())
}

/// Runs the gradual-spread profile for every `eta` from the same initial
/// condition. Points run concurrently; rows come back sorted by `eta`.
pub fn evasion_sweep(
    base: &ModelConfig,
    etas: &[f64],
    ic: &InitialConditionSpec,
    opts: &IntegrationOptions,
) -> Result<Vec<SweepRow>> {
    require_equal_thirds(base)?;
    let mut etas = etas.to_vec();
    for &eta in &etas {
        gradual_spread_theta(eta)?;
    }
    etas.sort_by(f64::total_cmp);
    etas.par_iter()
        .map(|&eta| {
            let theta = gradual_spread_theta(eta)?;
            let config = base.with_theta_ev(theta.clone());
            let out = run_scenario(&config, ic, opts)?;
            Ok(SweepRow {
                eta,
                theta_ev: theta,
                income_gap: out.metrics.income_gap,
                gini: out.metrics.gini_total,
                converged: out.stationary.converged,
                residual: out.stationary.residual,
                mu: out.metrics.mu_total,
            })
        })
        .collect()
}

/// Least-squares fit of `d = a eta^2 + b eta` (no constant term) through the
/// 2 x 2 normal equations. Returns `(a, b)`.
pub fn fit_quadratic_through_origin(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).filter(|e| *e != 0.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::UnderdeterminedFit(format!(
            "need at least two distinct nonzero abscissae, got {}",
            distinct.len()
        )));
    }
    if points
        .iter()
        .any(|(e, d)| !(e.is_finite() && d.is_finite()))
    {
        return Err(Error::UnderdeterminedFit("non-finite point".into()));
    }
    let (mut s2, mut s3, mut s4, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(e, d) in points {
        let e2 = e * e;
        s2 += e2;
        s3 += e2 * e;
        s4 += e2 * e2;
        t1 += d * e;
        t2 += d * e2;
    }
    // [s4 s3; s3 s2] [a; b] = [t2; t1]
    let det = s4 * s2 - s3 * s3;
    if det.is_nan() || det.abs() <= 1e-14 * s4 * s2 {
        return Err(Error::UnderdeterminedFit(format!(
            "singular normal matrix (det = {det:e})"
        )));
    }
    let a = (t2 * s2 - s3 * t1) / det;
    let b = (s4 * t1 - s3 * t2) / det;
    Ok((a, b))
}

/// Per-class difference `X_j(evasion) - X_j(compliance)` between the stationary
/// states of `config` and of its fully compliant twin, from the same initial condition.
pub fn compare_compliance_vs_evasion(
    config: &ModelConfig,
    ic: &InitialConditionSpec,
    opts: &IntegrationOptions,
) -> Result<Vec<f64>> {
    let compliant = config.with_theta_ev(vec![1.0; config.m]);
    let (evading, honest) = rayon::join(
        || run_scenario(config, ic, opts),
        || run_scenario(&compliant, ic, opts),
    );
    let (evading, honest) = (evading?, honest?);
    Ok(evading
        .metrics
        .class_marginals
        .iter()
        .zip(&honest.metrics.class_marginals)
        .map(|(e, h)| e - h)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadCase {
    pub theta_ev: Vec<f64>,
    pub evasion_level: f64,
    pub gini_total: f64,
    pub gini_per_sector: Vec<Option<f64>>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub widespread: SpreadCase,
    pub concentrated: SpreadCase,
}

/// Gini indices for widespread versus concentrated evasion at equal total level.
pub fn spread_comparison(
    base: &ModelConfig,
    ic: &InitialConditionSpec,
    opts: &IntegrationOptions,
) -> Result<SpreadReport> {
    require_equal_thirds(base)?;
    let case = |theta: &[f64]| -> Result<SpreadCase> {
        let config = base.with_theta_ev(theta.to_vec());
        let out = run_scenario(&config, ic, opts)?;
        Ok(SpreadCase {
            theta_ev: theta.to_vec(),
            evasion_level: total_evasion_level(&config.sector_shares, theta),
            gini_total: out.metrics.gini_total,
            gini_per_sector: out.metrics.gini_per_sector,
            converged: out.stationary.converged,
        })
    };
    let (widespread, concentrated) =
        rayon::join(|| case(&WIDESPREAD_THETA), || case(&CONCENTRATED_THETA));
    Ok(SpreadReport {
        widespread: widespread?,
        concentrated: concentrated?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic_is_recovered() {
        let pts: Vec<(f64, f64)> = [0.05, 0.1, 0.2, 0.35, 0.5]
            .iter()
            .map(|&e| (e, 0.42 * e * e + 0.62 * e))
            .collect();
        let (a, b) = fit_quadratic_through_origin(&pts).unwrap();
        assert!(
            (a - 0.42).abs() < 1e-10 && (b - 0.62).abs() < 1e-10,
            "{a} {b}"
        );
    }

    #[test]
    fn zero_data_fits_zero() {
        let pts = [(0.1, 0.0), (0.2, 0.0), (0.3, 0.0)];
        assert_eq!(fit_quadratic_through_origin(&pts).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn reference_gaps_fit() {
        let (a, b) = fit_quadratic_through_origin(&REFERENCE_GAPS).unwrap();
        assert!((a - 0.42).abs() < 0.05, "a = {a}");
        assert!((b - 0.62).abs() < 0.05, "b = {b}");
    }

    #[test]
    fn fit_needs_two_abscissae() {
        assert!(matches!(
            fit_quadratic_through_origin(&[(0.1, 0.2), (0.1, 0.3), (0.0, 0.0)]),
            Err(Error::UnderdeterminedFit(_))
        ));
        assert!(fit_quadratic_through_origin(&[]).is_err());
    }

    #[test]
    fn sweep_rejects_large_eta() {
        assert!(matches!(
            gradual_spread_theta(0.6),
            Err(Error::InvalidSweepPoint(_))
        ));
        let cfg = ModelConfig::reference();
        let r = evasion_sweep(&cfg, &[0.1, 0.51], &Default::default(), &Default::default());
        assert!(matches!(r, Err(Error::InvalidSweepPoint(_))));
    }

    #[test]
    fn uniform_ic_has_mean_fifty() {
        let cfg = ModelConfig::reference();
        let x = InitialConditionSpec::Uniform.build(&cfg).unwrap();
        assert!((x.mean_income(&cfg.incomes) - 50.0).abs() < 1e-12);
        assert!((x.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn class_profile_hits_target_mean() {
        let cfg = ModelConfig::reference();
        for (profile, target) in [
            (vec![5.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 50.0),
            (vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 1.0], 50.0),
            (vec![1.0; 9], 30.0),
        ] {
            let ic = InitialConditionSpec::ClassProfile {
                profile,
                target_mu: Some(target),
            };
            let x = ic.build(&cfg).unwrap();
            assert!((x.mean_income(&cfg.incomes) - target).abs() < 1e-12);
            assert!((x.total() - 1.0).abs() < 1e-14);
            assert!(x.as_slice().iter().all(|v| *v >= 0.0));
        }
        let bad = InitialConditionSpec::ClassProfile {
            profile: vec![1.0; 9],
            target_mu: Some(95.0),
        };
        assert!(bad.build(&cfg).is_err());
    }
}
