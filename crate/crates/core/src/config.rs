//! Model parameters and their validation.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum(sector_shares) == 1`.
pub const SHARE_SUM_TOL: f64 = 1e-12;

/// Above this fraction of the smallest class gap, `S` is accepted with a warning.
pub const EXCHANGE_WARN_FRACTION: f64 = 0.2;

/// How the per-class tax rates are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxSchedule {
    /// Progressive schedule growing linearly in the class index from `tau_min` to `tau_max`.
    Linear { tau_min: f64, tau_max: f64 },
    /// One rate per income class, given directly.
    Explicit(Vec<f64>),
}

/// All parameters of the n x m exchange model.
///
/// Classes and sectors are stored 0-based; files and reports use 1-based labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub m: usize,
    /// Average income `r_j` of each class, strictly increasing.
    pub incomes: Vec<f64>,
    /// Amount `S` paid in a single transaction.
    pub exchange_amount: f64,
    pub tax: TaxSchedule,
    /// Fraction of due taxes actually paid, per sector. Sector 0 is the most compliant.
    pub theta_ev: Vec<f64>,
    /// Population share of each sector; the same split holds in every class.
    pub sector_shares: Vec<f64>,
}

impl ModelConfig {
    /// The nine-class, three-sector setup: `S = 1`, `r_j = 10 j`, taxes from 10% to 45%,
    /// sectors paying 100%, 50% and 25% of due taxes, each a third of the population.
    pub fn reference() -> Self {
        Self::reference_with_theta(vec![1.0, 0.5, 0.25])
    }

    /// The reference setup with a different evasion profile (equal sector shares).
    pub fn reference_with_theta(theta_ev: Vec<f64>) -> Self {
        let m = theta_ev.len();
        ModelConfig {
            n: 9,
            m,
            incomes: (1..=9).map(|j| 10.0 * j as f64).collect(),
            exchange_amount: 1.0,
            tax: TaxSchedule::Linear {
                tau_min: 0.10,
                tau_max: 0.45,
            },
            theta_ev,
            sector_shares: vec![1.0 / m as f64; m],
        }
    }

    /// Same model with the evasion profile replaced.
    pub fn with_theta_ev(&self, theta_ev: Vec<f64>) -> Self {
        ModelConfig {
            theta_ev,
            ..self.clone()
        }
    }

    /// Smallest gap `r_{j+1} - r_j` between consecutive classes.
    pub fn min_gap(&self) -> f64 {
        self.incomes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks every parameter invariant. Emits a warning when `S` is large
    /// relative to the class gaps but still admissible.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n >= 2", self.n));
        }
        if self.m < 1 {
            return Err(Error::config("m >= 1", self.m));
        }
        if self.incomes.len() != self.n {
            return Err(Error::config(
                format!("incomes has n = {} entries", self.n),
                self.incomes.len(),
            ));
        }
        if let Some(r) = self.incomes.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::config("every income r_j > 0 and finite", r));
        }
        if let Some(j) = (0..self.n - 1).find(|&j| self.incomes[j + 1] <= self.incomes[j]) {
            return Err(Error::config(
                format!("incomes strictly increasing (r_{} < r_{})", j + 1, j + 2),
                format!("{} >= {}", self.incomes[j], self.incomes[j + 1]),
            ));
        }
        let s = self.exchange_amount;
        let min_gap = self.min_gap();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::config("S > 0", s));
        }
        if s >= min_gap {
            return Err(Error::config(
                format!("S < smallest class gap ({min_gap})"),
                s,
            ));
        }
        if s > EXCHANGE_WARN_FRACTION * min_gap {
            warn!(
                "exchange amount S = {s} exceeds {EXCHANGE_WARN_FRACTION} of the smallest class gap {min_gap}"
            );
        }
        match &self.tax {
            TaxSchedule::Linear { tau_min, tau_max } => {
                if !(0.0 <= *tau_min && tau_min <= tau_max && *tau_max <= 1.0) {
                    return Err(Error::config(
                        "0 <= tau_min <= tau_max <= 1",
                        format!("tau_min = {tau_min}, tau_max = {tau_max}"),
                    ));
                }
            }
            TaxSchedule::Explicit(tau) => {
                if tau.len() != self.n {
                    return Err(Error::config(
                        format!("tau has n = {} entries", self.n),
                        tau.len(),
                    ));
                }
                if let Some(t) = tau.iter().find(|t| !(0.0..=1.0).contains(*t)) {
                    return Err(Error::config("every tau_j in [0, 1]", t));
                }
                if tau.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::config("tau nondecreasing", format!("{tau:?}")));
                }
            }
        }
        if self.theta_ev.len() != self.m {
            return Err(Error::config(
                format!("theta_ev has m = {} entries", self.m),
                self.theta_ev.len(),
            ));
        }
        if let Some(t) = self.theta_ev.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::config("every theta_ev in [0, 1]", t));
        }
        // The income gap compares the last sector against the first, so the
        // sectors must be ordered from most to least compliant.
        if self.theta_ev.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::config(
                "theta_ev non-increasing across sectors",
                format!("{:?}", self.theta_ev),
            ));
        }
        if self.sector_shares.len() != self.m {
            return Err(Error::config(
                format!("sector_shares has m = {} entries", self.m),
                self.sector_shares.len(),
            ));
        }
        if let Some(w) = self
            .sector_shares
            .iter()
            .find(|w| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::config("every sector share >= 0", w));
        }
        let total: f64 = self.sector_shares.iter().sum();
        if (total - 1.0).abs() > SHARE_SUM_TOL {
            return Err(Error::config("sector_shares sum to 1", total));
        }
        Ok(())
    }
}
