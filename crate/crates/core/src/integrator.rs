//! Explicit RK4 time stepping and stationarity detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CoefficientTables, RhsScratch};
use crate::state::PopulationState;

/// Negative entries no larger than this in magnitude are roundoff and get clamped to zero.
pub const NEGATIVE_CLAMP: f64 = 1e-14;

/// Allowed distance of an initial condition from the simplex.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationOptions {
    pub dt: f64,
    pub max_time: f64,
    /// Threshold on the sup-norm of the right-hand side.
    pub stationarity_tol: f64,
    /// Allowed drift of the total population from 1 and of the global income from its initial value.
    pub drift_tol: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            dt: 0.5,
            max_time: 1e6,
            stationarity_tol: 1e-9,
            drift_tol: 1e-9,
        }
    }
}

impl IntegrationOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{name} > 0"), v))
            }
        };
        positive("integ.dt", self.dt)?;
        positive("integ.max_time", self.max_time)?;
        positive("integ.stationarity_tol", self.stationarity_tol)?;
        positive("integ.drift_tol", self.drift_tol)
    }
}

/// Outcome of integrating towards the stationary distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryResult {
    pub state: PopulationState,
    pub final_time: f64,
    /// Sup-norm of the right-hand side at `state`.
    pub residual: f64,
    pub converged: bool,
    /// Global income of the initial condition, conserved along the trajectory.
    pub mu: f64,
    pub steps: u64,
    pub max_sum_drift: f64,
    pub max_mu_drift: f64,
}

/// RK4 stepper holding its stage buffers.
pub struct Rk4<'a> {
    tables: &'a CoefficientTables,
    scratch: RhsScratch,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl<'a> Rk4<'a> {
    pub fn new(tables: &'a CoefficientTables) -> Self {
        let len = tables.n() * tables.m();
        Rk4 {
            tables,
            scratch: RhsScratch::new(tables.n()),
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            stage: vec![0.0; len],
        }
    }

    /// Evaluates the right-hand side at `x` into the first stage buffer and
    /// returns its sup-norm.
    pub fn residual(&mut self, x: &[f64]) -> Result<f64> {
        self.tables.rhs_into(x, &mut self.k1, &mut self.scratch)?;
        Ok(self.k1.iter().fold(0.0, |acc, v| acc.max(v.abs())))
    }

    /// Advances `x` by `dt` in place, assuming the first stage already holds `f(x)`.
    fn advance_from_k1(&mut self, x: &mut [f64], dt: f64) -> Result<()> {
        let half = 0.5 * dt;
        axpy(&mut self.stage, x, half, &self.k1);
        self.tables
            .rhs_into(&self.stage, &mut self.k2, &mut self.scratch)?;
        axpy(&mut self.stage, x, half, &self.k2);
        self.tables
            .rhs_into(&self.stage, &mut self.k3, &mut self.scratch)?;
        axpy(&mut self.stage, x, dt, &self.k3);
        self.tables
            .rhs_into(&self.stage, &mut self.k4, &mut self.scratch)?;
        let sixth = dt / 6.0;
        let stages = self.k1.iter().zip(&self.k2).zip(&self.k3).zip(&self.k4);
        for (xi, (((a, b), c), d)) in x.iter_mut().zip(stages) {
            *xi += sixth * (a + 2.0 * (b + c) + d);
        }
        Ok(())
    }

    /// One full RK4 step of `x` in place, with the negativity clamp applied.
    pub fn step_in_place(&mut self, x: &mut [f64], dt: f64, time: f64) -> Result<()> {
        self.tables.rhs_into(x, &mut self.k1, &mut self.scratch)?;
        self.advance_from_k1(x, dt)?;
        clamp_negative(x, self.tables.m(), time + dt)
    }
}

/// `out = x + h k`
fn axpy(out: &mut [f64], x: &[f64], h: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + h * ki;
    }
}

fn clamp_negative(x: &mut [f64], m: usize, time: f64) -> Result<()> {
    for (i, v) in x.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -NEGATIVE_CLAMP {
                return Err(Error::StepTooLarge {
                    class: i / m,
                    sector: i % m,
                    value: *v,
                    time,
                });
            }
            *v = 0.0;
        } else if !v.is_finite() {
            return Err(Error::ContractViolation(format!(
                "non-finite entry at (class {}, sector {}) at t = {time}",
                i / m,
                i % m
            )));
        }
    }
    Ok(())
}

/// One explicit fourth-order Runge-Kutta step.
pub fn step(x: &PopulationState, tables: &CoefficientTables, dt: f64) -> Result<PopulationState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::ContractViolation(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if x.n() != tables.n() || x.m() != tables.m() || !x.is_finite() {
        return Err(Error::ContractViolation(
            "state shape mismatch or non-finite entries".into(),
        ));
    }
    let mut out = x.clone();
    Rk4::new(tables).step_in_place(out.as_mut_slice(), dt, 0.0)?;
    Ok(out)
}

/// Checks that `x` is a nonnegative point on the simplex within [`SIMPLEX_TOL`].
pub fn check_simplex(x: &PopulationState) -> Result<()> {
    if let Some((i, v)) = x
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::InvalidDistribution(format!(
            "x[class {}, sector {}] = {v} is not a nonnegative number",
            i / x.m() + 1,
            i % x.m() + 1
        )));
    }
    let total = x.total();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution(format!(
            "population fractions sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Integrates from `x0` until the right-hand side falls below the stationarity
/// tolerance or `max_time` is reached.
pub fn evolve_to_stationary(
    x0: &PopulationState,
    tables: &CoefficientTables,
    opts: &IntegrationOptions,
) -> Result<StationaryResult> {
    evolve_observed(x0, tables, opts, |_, _, _| {})
}

/// Like [`evolve_to_stationary`], calling `observe(step, t, x)` on the initial
/// state and after every accepted step.
pub fn evolve_observed<F>(
    x0: &PopulationState,
    tables: &CoefficientTables,
    opts: &IntegrationOptions,
    mut observe: F,
) -> Result<StationaryResult>
where
    F: FnMut(u64, f64, &PopulationState),
{
    opts.validate()?;
    if x0.n() != tables.n() || x0.m() != tables.m() {
        return Err(Error::ContractViolation(format!(
            "initial state is {} x {}, tables are {} x {}",
            x0.n(),
            x0.m(),
            tables.n(),
            tables.m()
        )));
    }
    check_simplex(x0)?;

    let incomes = tables.incomes();
    let mu0 = x0.mean_income(incomes);
    let mut x = x0.clone();
    let mut rk = Rk4::new(tables);
    let mut steps: u64 = 0;
    let mut time = 0.0;
    let mut max_sum_drift = (x.total() - 1.0).abs();
    let mut max_mu_drift = 0.0_f64;
    observe(0, 0.0, &x);

    loop {
        let residual = rk.residual(x.as_slice())?;
        let converged = residual <= opts.stationarity_tol;
        if converged || time >= opts.max_time {
            return Ok(StationaryResult {
                state: x,
                final_time: time,
                residual,
                converged,
                mu: mu0,
                steps,
                max_sum_drift,
                max_mu_drift,
            });
        }
        rk.advance_from_k1(x.as_mut_slice(), opts.dt)?;
        steps += 1;
        time = steps as f64 * opts.dt;
        clamp_negative(x.as_mut_slice(), tables.m(), time)?;

        let sum_drift = (x.total() - 1.0).abs();
        let mu_drift = (x.mean_income(incomes) - mu0).abs();
        max_sum_drift = max_sum_drift.max(sum_drift);
        max_mu_drift = max_mu_drift.max(mu_drift);
        if sum_drift > opts.drift_tol {
            return Err(Error::ConservationViolation {
                quantity: "population sum",
                drift: sum_drift,
                tolerance: opts.drift_tol,
                time,
            });
        }
        if mu_drift > opts.drift_tol {
            return Err(Error::ConservationViolation {
                quantity: "global income",
                drift: mu_drift,
                tolerance: opts.drift_tol,
                time,
            });
        }
        observe(steps, time, &x);
    }
}
