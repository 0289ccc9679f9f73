//! Inequality and income statistics of a population state.

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::state::PopulationState;

/// Sectors with less mass than this have undefined per-sector metrics.
pub const EMPTY_SECTOR_TOL: f64 = 1e-12;

/// Discrete mean-absolute-difference Gini index of a class-binned distribution.
///
/// `G = sum_i sum_j w_i w_j |r_i - r_j| / (2 sum_i w_i r_i)` with weights
/// normalized to sum to one.
pub fn gini(weights: &[f64], incomes: &[f64]) -> Result<f64> {
    if weights.len() != incomes.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} weights for {} incomes",
            weights.len(),
            incomes.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "weight {w} is negative or not finite"
        )));
    }
    if let Some(r) = incomes.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "income {r} is not positive"
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("total weight is zero".into()));
    }
    let w: Vec<f64> = weights.iter().map(|v| v / total).collect();
    let mean: f64 = w.iter().zip(incomes).map(|(a, r)| a * r).sum();
    let mut spread = 0.0;
    for (wi, ri) in w.iter().zip(incomes) {
        for (wj, rj) in w.iter().zip(incomes) {
            spread += wi * wj * (ri - rj).abs();
        }
    }
    Ok(spread / (2.0 * mean))
}

/// Share-weighted fraction of due taxes that goes unpaid, `sum_alpha w_alpha (1 - theta_ev(alpha))`.
pub fn total_evasion_level(shares: &[f64], theta_ev: &[f64]) -> f64 {
    shares
        .iter()
        .zip(theta_ev)
        .map(|(w, t)| w * (1.0 - t))
        .sum()
}

/// Summary statistics of one state. Per-sector entries are `None` for empty sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub class_marginals: Vec<f64>,
    pub sector_marginals: Vec<f64>,
    pub mu_total: f64,
    pub sector_mean_income: Vec<Option<f64>>,
    pub gini_total: f64,
    pub gini_per_sector: Vec<Option<f64>>,
    /// `(mu_m - mu_1) / mu_1`, the least compliant sector against the most compliant one.
    pub income_gap: Option<f64>,
}

pub fn metrics_report(x: &PopulationState, config: &ModelConfig) -> Result<MetricsReport> {
    if x.n() != config.n || x.m() != config.m {
        return Err(Error::ContractViolation(format!(
            "state is {} x {}, config is {} x {}",
            x.n(),
            x.m(),
            config.n,
            config.m
        )));
    }
    let r = &config.incomes;
    let class_marginals = x.class_marginals();
    let sector_marginals = x.sector_marginals();
    let mu_total = x.mean_income(r);
    let gini_total = gini(&class_marginals, r)?;

    let mut sector_mean_income = Vec::with_capacity(x.m());
    let mut gini_per_sector = Vec::with_capacity(x.m());
    for (alpha, &mass) in sector_marginals.iter().enumerate() {
        if mass <= EMPTY_SECTOR_TOL {
            sector_mean_income.push(None);
            gini_per_sector.push(None);
            continue;
        }
        let column: Vec<f64> = (0..x.n()).map(|j| x.get(j, alpha)).collect();
        let income: f64 = column.iter().zip(r).map(|(c, r)| c * r).sum();
        sector_mean_income.push(Some(income / mass));
        gini_per_sector.push(Some(gini(&column, r)?));
    }
    let income_gap = match (sector_mean_income.first(), sector_mean_income.last()) {
        (Some(Some(honest)), Some(Some(worst))) => Some((worst - honest) / honest),
        _ => None,
    };

    Ok(MetricsReport {
        class_marginals,
        sector_marginals,
        mu_total,
        sector_mean_income,
        gini_total,
        gini_per_sector,
        income_gap,
    })
}

impl MetricsReport {
    /// Flat key-value pairs. Vectors expand to `<field>_<1-based index>`;
    /// undefined entries are `None`.
    pub fn flat_fields(&self) -> Vec<(String, Option<f64>)> {
        fn expand(out: &mut Vec<(String, Option<f64>)>, name: &str, values: &[Option<f64>]) {
            for (i, v) in values.iter().enumerate() {
                out.push((format!("{name}_{}", i + 1), *v));
            }
        }
        let defined = |v: &[f64]| v.iter().copied().map(Some).collect::<Vec<_>>();
        let mut out = Vec::new();
        expand(&mut out, "class_marginals", &defined(&self.class_marginals));
        expand(
            &mut out,
            "sector_marginals",
            &defined(&self.sector_marginals),
        );
        out.push(("mu_total".into(), Some(self.mu_total)));
        expand(&mut out, "sector_mean_income", &self.sector_mean_income);
        out.push(("gini_total".into(), Some(self.gini_total)));
        expand(&mut out, "gini_per_sector", &self.gini_per_sector);
        out.push(("income_gap".into(), self.income_gap));
        out
    }
}
