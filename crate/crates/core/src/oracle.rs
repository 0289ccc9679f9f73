//! Brute-force evaluation of the dynamics, used to cross-check the fast path.
//!
//! The direct-exchange coefficients are rebuilt from per-interaction group
//! variations (payer drops one class, receiver climbs one class) plus the
//! absence-of-variation term, never from the closed-form coefficient table.

use crate::error::{Error, Result};
use crate::model::CoefficientTables;
use crate::state::PopulationState;

/// Largest `n * m` the quadruple-sum oracle accepts.
pub const ORACLE_MAX_GROUPS: usize = 100;

/// Who moves in a single variation entry of a paid interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mover {
    Payer,
    Receiver,
}

/// One group-fraction change caused by a single payment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub mover: Mover,
    pub class: usize,
    pub sector: usize,
    pub amount: f64,
}

/// The (up to four) group variations produced when a `payer` group pays a
/// `receiver` group: the payer partially migrates one class down, the receiver
/// one class up, each move weighted by the net amount `p S (1 - theta)` over the
/// gap crossed.
pub fn payment_variations(
    tables: &CoefficientTables,
    payer: (usize, usize),
    receiver: (usize, usize),
) -> Vec<Variation> {
    let (h, alpha) = payer;
    let (k, beta) = receiver;
    let r = tables.incomes();
    let amount =
        tables.payment(h, k) * tables.exchange_amount() * (1.0 - tables.effective_tax(k, beta));
    let mut out = Vec::with_capacity(4);
    if h >= 1 {
        let v = amount / (r[h] - r[h - 1]);
        out.push(Variation {
            mover: Mover::Payer,
            class: h - 1,
            sector: alpha,
            amount: v,
        });
        out.push(Variation {
            mover: Mover::Payer,
            class: h,
            sector: alpha,
            amount: -v,
        });
    }
    if k + 1 < tables.n() {
        let v = amount / (r[k + 1] - r[k]);
        out.push(Variation {
            mover: Mover::Receiver,
            class: k + 1,
            sector: beta,
            amount: v,
        });
        out.push(Variation {
            mover: Mover::Receiver,
            class: k,
            sector: beta,
            amount: -v,
        });
    }
    out
}

/// `b^{(j,alpha)}_{(h,beta);(k,gamma)}`: variation of group `(j,alpha)` due to the
/// `(h,beta)` individual's own move in an encounter with `(k,gamma)`, whichever
/// of the two pays.
pub fn exchange_variation(
    tables: &CoefficientTables,
    target: (usize, usize),
    mover: (usize, usize),
    counterpart: (usize, usize),
) -> f64 {
    let as_payer = payment_variations(tables, mover, counterpart)
        .into_iter()
        .filter(|v| v.mover == Mover::Payer);
    let as_receiver = payment_variations(tables, counterpart, mover)
        .into_iter()
        .filter(|v| v.mover == Mover::Receiver);
    as_payer
        .chain(as_receiver)
        .filter(|v| (v.class, v.sector) == target)
        .map(|v| v.amount)
        .sum()
}

/// `C = a + b`, with `a = 1` exactly when the target group is the mover's own group.
pub fn reconstructed_coefficient(
    tables: &CoefficientTables,
    target: (usize, usize),
    mover: (usize, usize),
    counterpart: (usize, usize),
) -> f64 {
    let stay = if target == mover { 1.0 } else { 0.0 };
    stay + exchange_variation(tables, target, mover, counterpart)
}

/// Right-hand side by literal summation over every target, mover and counterpart group.
///
/// Cost is `O((n m)^4)`; refuses instances with more than [`ORACLE_MAX_GROUPS`] groups.
pub fn rhs_naive_oracle(
    x: &PopulationState,
    tables: &CoefficientTables,
) -> Result<PopulationState> {
    let (n, m) = (tables.n(), tables.m());
    if n * m > ORACLE_MAX_GROUPS {
        return Err(Error::InstanceTooLarge {
            size: n * m,
            limit: ORACLE_MAX_GROUPS,
        });
    }
    if x.n() != n || x.m() != m {
        return Err(Error::ContractViolation(format!(
            "state is {} x {}, tables are {n} x {m}",
            x.n(),
            x.m()
        )));
    }
    let groups: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..m).map(move |a| (j, a))).collect();
    let mut out = PopulationState::zeros(n, m);
    for &(j, alpha) in &groups {
        let xj = x.get(j, alpha);
        let mut acc = CompensatedSum::default();
        for &(h, beta) in &groups {
            let xh = x.get(h, beta);
            for &(k, gamma) in &groups {
                let c = reconstructed_coefficient(tables, (j, alpha), (h, beta), (k, gamma));
                let t = tables.redistribution_term(j, alpha, h, beta, k, gamma, x)?;
                acc.add((c + t) * xh * x.get(k, gamma));
            }
        }
        // loss term x_j^alpha * sum_{k,gamma} x_k^gamma, one encounter at a time
        for &(k, gamma) in &groups {
            acc.add(-xj * x.get(k, gamma));
        }
        out.set(j, alpha, acc.value());
    }
    Ok(out)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}
