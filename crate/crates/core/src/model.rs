//! Coefficients and right-hand side of the group-fraction dynamics.
//!
//! Indices are 0-based throughout: class `j` in `0..n`, sector `alpha` in `0..m`.
//! A coefficient `C^{(j,alpha)}_{(h,beta);(k,gamma)}` is the probability that an
//! `(h,beta)` individual ends up in group `(j,alpha)` after paying to, or being
//! paid by, a `(k,gamma)` individual. `T` is the matching variation caused by the
//! tax on the transaction and its uniform redistribution.

use crate::config::{ModelConfig, TaxSchedule};
use crate::error::{Error, Result};
use crate::state::PopulationState;

/// Per-class tax rates `tau_j = tau_min + j/(n-1) (tau_max - tau_min)` for 0-based `j`.
pub fn build_tax_rates(n: usize, tau_min: f64, tau_max: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::config("n >= 2", n));
    }
    let span = tau_max - tau_min;
    let last = (n - 1) as f64;
    Ok((0..n).map(|j| tau_min + j as f64 / last * span).collect())
}

/// Tax rates for a config, either from the linear schedule or the explicit list.
pub fn tax_rates(config: &ModelConfig) -> Result<Vec<f64>> {
    match &config.tax {
        TaxSchedule::Linear { tau_min, tau_max } => build_tax_rates(config.n, *tau_min, *tau_max),
        TaxSchedule::Explicit(tau) => Ok(tau.clone()),
    }
}

/// Probability `p[h][k]` that, when a class-`h` and a class-`k` individual meet,
/// the class-`h` one pays.
///
/// The base rule `min(r_h, r_k) / (4 r_n)` is overwritten by the exceptions in
/// this order: diagonal of the interior classes, first column, last row, then
/// the zero rules for the first row and the last column. The corner
/// `p[n-1][0]` gets `r_0 / (2 r_n)` from both the column and the row rule.
pub fn build_payment_matrix(incomes: &[f64]) -> Vec<Vec<f64>> {
    let n = incomes.len();
    let top = incomes[n - 1];
    let mut p: Vec<Vec<f64>> = (0..n)
        .map(|h| {
            (0..n)
                .map(|k| incomes[h].min(incomes[k]) / (4.0 * top))
                .collect()
        })
        .collect();
    for j in 1..n.saturating_sub(1) {
        p[j][j] = incomes[j] / (2.0 * top);
    }
    for row in p.iter_mut().skip(1) {
        row[0] = incomes[0] / (2.0 * top);
    }
    for k in 0..n - 1 {
        p[n - 1][k] = incomes[k] / (2.0 * top);
    }
    p[0].iter_mut().for_each(|v| *v = 0.0);
    for row in p.iter_mut() {
        row[n - 1] = 0.0;
    }
    p
}

/// Effective tax fractions `theta[k][alpha] = theta_ev[alpha] * tau[k]`.
pub fn build_effective_tax_table(tau: &[f64], theta_ev: &[f64]) -> Vec<Vec<f64>> {
    tau.iter()
        .map(|t| theta_ev.iter().map(|e| e * t).collect())
        .collect()
}

/// Immutable coefficient tables for one model configuration.
#[derive(Debug, Clone)]
pub struct CoefficientTables {
    n: usize,
    m: usize,
    incomes: Vec<f64>,
    exchange: f64,
    tau: Vec<f64>,
    p: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    gap_inv: Vec<f64>,
    // S (1 - theta) and S theta, flattened like a state.
    net_transfer: Vec<f64>,
    tax_transfer: Vec<f64>,
}

impl CoefficientTables {
    pub fn new(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let tau = tax_rates(config)?;
        let p = build_payment_matrix(&config.incomes);
        let theta = build_effective_tax_table(&tau, &config.theta_ev);
        let gap_inv = config
            .incomes
            .windows(2)
            .map(|w| 1.0 / (w[1] - w[0]))
            .collect();
        let s = config.exchange_amount;
        let net_transfer = theta.iter().flatten().map(|t| s * (1.0 - t)).collect();
        let tax_transfer = theta.iter().flatten().map(|t| s * t).collect();
        Ok(CoefficientTables {
            n: config.n,
            m: config.m,
            incomes: config.incomes.clone(),
            exchange: s,
            tau,
            p,
            theta,
            gap_inv,
            net_transfer,
            tax_transfer,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn incomes(&self) -> &[f64] {
        &self.incomes
    }

    pub fn exchange_amount(&self) -> f64 {
        self.exchange
    }

    pub fn tax_rates(&self) -> &[f64] {
        &self.tau
    }

    pub fn payment(&self, h: usize, k: usize) -> f64 {
        self.p[h][k]
    }

    pub fn payment_matrix(&self) -> &[Vec<f64>] {
        &self.p
    }

    pub fn effective_tax(&self, k: usize, alpha: usize) -> f64 {
        self.theta[k][alpha]
    }

    pub fn effective_tax_table(&self) -> &[Vec<f64>] {
        &self.theta
    }

    /// `1 / (r_{j+1} - r_j)` for `j` in `0..n-1`.
    pub fn gap_inv(&self) -> &[f64] {
        &self.gap_inv
    }

    fn check_group(&self, what: &str, class: usize, sector: usize) -> Result<()> {
        if class >= self.n || sector >= self.m {
            return Err(Error::ContractViolation(format!(
                "{what} index ({class}, {sector}) outside {} x {}",
                self.n, self.m
            )));
        }
        Ok(())
    }

    fn check_state(&self, x: &PopulationState) -> Result<()> {
        if x.n() != self.n || x.m() != self.m {
            return Err(Error::ContractViolation(format!(
                "state is {} x {}, tables are {} x {}",
                x.n(),
                x.m(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    /// Direct-exchange coefficient `C^{(j,alpha)}_{(h,beta);(k,gamma)}`.
    ///
    /// Nonzero only for nearest-class moves within the same sector:
    /// `h = j + 1` (the payer drops a class), `h = j` (staying put) and
    /// `h = j - 1` (the receiver climbs a class).
    #[allow(clippy::too_many_arguments)]
    pub fn direct_coefficient(
        &self,
        j: usize,
        alpha: usize,
        h: usize,
        beta: usize,
        k: usize,
        gamma: usize,
    ) -> Result<f64> {
        self.check_group("target", j, alpha)?;
        self.check_group("migrating", h, beta)?;
        self.check_group("counterpart", k, gamma)?;
        if alpha != beta {
            return Ok(0.0);
        }
        let n = self.n;
        let s = self.exchange;
        let c = if h == j + 1 {
            if k + 1 < n {
                self.p[h][k] * s * (1.0 - self.theta[k][gamma]) * self.gap_inv[j]
            } else {
                0.0
            }
        } else if h == j {
            let mut c = 1.0;
            if j + 1 < n && k >= 1 {
                c -= self.p[k][j] * s * (1.0 - self.theta[j][alpha]) * self.gap_inv[j];
            }
            if j >= 1 && k + 1 < n {
                c -= self.p[j][k] * s * (1.0 - self.theta[k][gamma]) * self.gap_inv[j - 1];
            }
            c
        } else if h + 1 == j {
            if k >= 1 {
                self.p[k][h] * s * (1.0 - self.theta[h][alpha]) * self.gap_inv[h]
            } else {
                0.0
            }
        } else {
            0.0
        };
        Ok(c)
    }

    /// Taxation/redistribution variation `T^{(j,alpha)}_{[(h,beta);(k,gamma)]}(x)`.
    ///
    /// Both population sums are taken from `x` itself, so the function is
    /// defined off the simplex as well. Returns zero whenever `p[h][k] = 0`,
    /// which includes every `h = 0` interaction.
    #[allow(clippy::too_many_arguments)]
    pub fn redistribution_term(
        &self,
        j: usize,
        alpha: usize,
        h: usize,
        beta: usize,
        k: usize,
        gamma: usize,
        x: &PopulationState,
    ) -> Result<f64> {
        self.check_group("target", j, alpha)?;
        self.check_group("payer", h, beta)?;
        self.check_group("counterpart", k, gamma)?;
        self.check_state(x)?;
        let p = self.p[h][k];
        if p == 0.0 {
            return Ok(0.0);
        }
        let n = self.n;
        let total = x.total();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::SingularState(total));
        }
        let below_top: f64 = x.as_slice()[..(n - 1) * self.m].iter().sum();
        let tax = p * self.exchange * self.theta[k][gamma];

        let mut spread = 0.0;
        if j >= 1 {
            spread += x.get(j - 1, alpha) * self.gap_inv[j - 1];
        }
        if j + 1 < n {
            spread -= x.get(j, alpha) * self.gap_inv[j];
        }

        let mut payer = 0.0;
        if alpha == beta {
            if h == j + 1 {
                payer += 1.0 / (self.incomes[h] - self.incomes[j]);
            }
            if h == j && j >= 1 {
                payer -= 1.0 / (self.incomes[h] - self.incomes[j - 1]);
            }
        }
        Ok(tax / total * spread + tax * payer * below_top / total)
    }

    /// Time derivative of every group fraction.
    pub fn rhs(&self, x: &PopulationState) -> Result<PopulationState> {
        self.check_state(x)?;
        if !x.is_finite() {
            return Err(Error::ContractViolation("non-finite state entry".into()));
        }
        let mut out = PopulationState::zeros(self.n, self.m);
        let mut scratch = RhsScratch::new(self.n);
        self.rhs_into(x.as_slice(), out.as_mut_slice(), &mut scratch)?;
        Ok(out)
    }

    /// Allocation-free right-hand side on raw state slices.
    ///
    /// The identity part of the direct coefficients cancels the loss term
    /// `x_j^alpha sum x` exactly, so only the migration flows are accumulated:
    /// payers dropping one class (net payment plus the tax share), receivers
    /// climbing one class, and the redistributed revenue lifting every class
    /// below the top.
    pub fn rhs_into(&self, x: &[f64], out: &mut [f64], scratch: &mut RhsScratch) -> Result<()> {
        let (n, m) = (self.n, self.m);
        debug_assert_eq!(x.len(), n * m);
        debug_assert_eq!(out.len(), n * m);

        let RhsScratch {
            class_mass,
            net_received,
            tax_received,
        } = scratch;
        for k in 0..n {
            let row = &x[k * m..(k + 1) * m];
            let net = &self.net_transfer[k * m..(k + 1) * m];
            let tax = &self.tax_transfer[k * m..(k + 1) * m];
            class_mass[k] = row.iter().sum();
            net_received[k] = row.iter().zip(net).map(|(a, b)| a * b).sum();
            tax_received[k] = row.iter().zip(tax).map(|(a, b)| a * b).sum();
        }
        let total: f64 = class_mass.iter().sum();
        if total == 0.0 || !total.is_finite() {
            return Err(Error::SingularState(total));
        }
        let below_top: f64 = class_mass[..n - 1].iter().sum();

        out.iter_mut().for_each(|v| *v = 0.0);
        let mut revenue = 0.0;
        for h in 0..n {
            let row = &self.p[h];
            let mut net_paid = 0.0;
            let mut tax_paid = 0.0;
            let mut paid_by = 0.0;
            for k in 0..n {
                net_paid += row[k] * net_received[k];
                tax_paid += row[k] * tax_received[k];
                paid_by += self.p[k][h] * class_mass[k];
            }
            revenue += class_mass[h] * tax_paid;

            if h >= 1 {
                let rate = (net_paid + tax_paid * below_top / total) * self.gap_inv[h - 1];
                for beta in 0..m {
                    let flow = x[h * m + beta] * rate;
                    out[h * m + beta] -= flow;
                    out[(h - 1) * m + beta] += flow;
                }
            }
            if h + 1 < n {
                let rate = paid_by * self.gap_inv[h];
                for beta in 0..m {
                    let flow = x[h * m + beta] * self.net_transfer[h * m + beta] * rate;
                    out[h * m + beta] -= flow;
                    out[(h + 1) * m + beta] += flow;
                }
            }
        }

        let lift = revenue / total;
        for j in 0..n - 1 {
            let rate = lift * self.gap_inv[j];
            for alpha in 0..m {
                let flow = x[j * m + alpha] * rate;
                out[j * m + alpha] -= flow;
                out[(j + 1) * m + alpha] += flow;
            }
        }
        Ok(())
    }
}

/// Per-class work buffers reused across right-hand-side evaluations.
#[derive(Debug, Clone)]
pub struct RhsScratch {
    class_mass: Vec<f64>,
    net_received: Vec<f64>,
    tax_received: Vec<f64>,
}

impl RhsScratch {
    pub fn new(n: usize) -> Self {
        RhsScratch {
            class_mass: vec![0.0; n],
            net_received: vec![0.0; n],
            tax_received: vec![0.0; n],
        }
    }
}
