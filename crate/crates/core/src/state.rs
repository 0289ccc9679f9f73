use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Population fractions `x_j^alpha`, one per (income class, evasion sector) group.
///
/// Stored row-major by class: entry `(j, alpha)` lives at `j * m + alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl PopulationState {
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * m {
            return Err(Error::ContractViolation(format!(
                "state has {} entries, expected n*m = {}",
                values.len(),
                n * m
            )));
        }
        Ok(PopulationState { n, m, values })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        PopulationState {
            n,
            m,
            values: vec![0.0; n * m],
        }
    }

    /// Builds a state from a class profile, splitting each class by the same sector shares.
    pub fn from_class_profile(profile: &[f64], shares: &[f64]) -> Self {
        let (n, m) = (profile.len(), shares.len());
        let values = profile
            .iter()
            .flat_map(|&u| shares.iter().map(move |&w| u * w))
            .collect();
        PopulationState { n, m, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, class: usize, sector: usize) -> f64 {
        self.values[class * self.m + sector]
    }

    #[inline]
    pub fn set(&mut self, class: usize, sector: usize, value: f64) {
        self.values[class * self.m + sector] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn class_row(&self, class: usize) -> &[f64] {
        &self.values[class * self.m..(class + 1) * self.m]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `X_j = sum_alpha x_j^alpha`.
    pub fn class_marginals(&self) -> Vec<f64> {
        self.values
            .chunks(self.m)
            .map(|row| row.iter().sum())
            .collect()
    }

    /// `W_alpha = sum_j x_j^alpha`.
    pub fn sector_marginals(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for row in self.values.chunks(self.m) {
            for (acc, x) in w.iter_mut().zip(row) {
                *acc += x;
            }
        }
        w
    }

    /// Global income `mu = sum_j r_j sum_alpha x_j^alpha`.
    pub fn mean_income(&self, incomes: &[f64]) -> f64 {
        self.class_marginals()
            .iter()
            .zip(incomes)
            .map(|(x, r)| x * r)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &PopulationState) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marginals_and_mean() {
        let x = PopulationState::from_class_profile(&[0.25, 0.75], &[0.5, 0.5]);
        assert_eq!(x.as_slice(), &[0.125, 0.125, 0.375, 0.375]);
        assert_eq!(x.class_marginals(), vec![0.25, 0.75]);
        assert_eq!(x.sector_marginals(), vec![0.5, 0.5]);
        assert_eq!(x.mean_income(&[10.0, 20.0]), 17.5);
    }

    #[test]
    fn shape_is_checked() {
        assert!(PopulationState::new(2, 3, vec![0.0; 5]).is_err());
    }
}
