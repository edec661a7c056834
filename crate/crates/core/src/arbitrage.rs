//! Arbitrage probability `P_N`, its decay in `N`, and one-step arbitrage
//! witnesses.
//!
//! `P_N` is the probability that a Rademacher path reaches a step `n` with
//! `d_n ≥ ρ` or `u_n ≤ ρ`. Because that event only depends on the prefix
//! `ξ_1, …, ξ_{n-1}`, mass can be assigned at the first violating step.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{evolve_market, step_bounds, MarketParams, BOUNDARY_RTOL};
use crate::processes::{CoefficientTable, Engine};
use crate::rng::InnovationSpec;
use crate::stats::{least_squares, normal_quantile, wilson_interval};

/// Default depth limit for [`exact_pn`].
pub const DEFAULT_ENUMERATION_BUDGET: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageReport {
    pub mode: ReportMode,
    pub p_hat: f64,
    /// 95% Wilson interval; collapses to `[p_hat, p_hat]` in exact mode.
    pub ci: [f64; 2],
    /// Sampled paths, or the `2^{m-1}` prefixes covered by the enumeration.
    pub trials: u64,
    /// Paths with a violation (Monte Carlo only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits: Option<u64>,
    /// Probability mass of the first violation, by step.
    pub histogram: BTreeMap<usize, f64>,
}

impl ArbitrageReport {
    /// Wilson interval at another confidence level (Monte Carlo reports).
    pub fn wilson(&self, confidence: f64) -> [f64; 2] {
        match self.hits {
            Some(hits) => {
                let (lo, hi) = wilson_interval(hits, self.trials, normal_quantile(confidence));
                [lo, hi]
            }
            None => self.ci,
        }
    }
}

/// First step `n` at which `xi` (at least `m - 1` values) violates
/// `d_n < ρ < u_n`.
pub fn violation_step(table: &CoefficientTable, params: &MarketParams, xi: &[f64]) -> Result<Option<usize>> {
    params.check_table(table)?;
    let m = table.steps();
    if xi.len() + 1 < m {
        return Err(Error::LengthMismatch { expected: m - 1, actual: xi.len() });
    }
    let h = params.half_spread();
    Ok((1..=m).find(|&n| params.violates(h * table.memory_sum(n, &xi[..n - 1]))))
}

/// Exact `P_N` by depth-first traversal of the prefix tree, pruning below the
/// first violation.
pub fn exact_pn(table: &CoefficientTable, params: &MarketParams, budget: usize) -> Result<ArbitrageReport> {
    params.check_table(table)?;
    let m = table.steps();
    if m > budget {
        return Err(Error::BudgetExceeded { steps: m, budget });
    }

    struct Walk<'a> {
        table: &'a CoefficientTable,
        params: &'a MarketParams,
        half: f64,
        prefix: Vec<f64>,
        histogram: BTreeMap<usize, f64>,
    }

    impl Walk<'_> {
        fn visit(&mut self) {
            let n = self.prefix.len() + 1;
            let mu = self.half * self.table.memory_sum(n, &self.prefix);
            if self.params.violates(mu) {
                *self.histogram.entry(n).or_insert(0.0) += 0.5f64.powi(self.prefix.len() as i32);
                return;
            }
            if n == self.table.steps() {
                return;
            }
            for x in [-1.0, 1.0] {
                self.prefix.push(x);
                self.visit();
                self.prefix.pop();
            }
        }
    }

    let mut walk =
        Walk { table, params, half: params.half_spread(), prefix: Vec::with_capacity(m), histogram: BTreeMap::new() };
    walk.visit();
    // dyadic masses with at most 26 binary digits: the sum is exact
    let p_hat: f64 = walk.histogram.values().sum();
    Ok(ArbitrageReport {
        mode: ReportMode::Exact,
        p_hat,
        ci: [p_hat, p_hat],
        trials: 1u64 << (m - 1),
        hits: None,
        histogram: walk.histogram,
    })
}

/// Monte Carlo `P_N`. Trial `i` draws its innovations from stream `i` of
/// `seed`, so the estimate does not depend on the size of the thread pool.
pub fn mc_pn(engine: &Engine, params: &MarketParams, trials: u64, seed: u64) -> Result<ArbitrageReport> {
    params.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is required".into()));
    }
    if engine.n() != params.n || engine.steps() != params.steps() {
        return Err(Error::InvalidParameter(format!(
            "engine lattice (N = {}, m = {}) does not match the market (N = {}, m = {})",
            engine.n(),
            engine.steps(),
            params.n,
            params.steps()
        )));
    }
    let m = engine.steps();
    let h = params.half_spread();

    let first: Vec<Option<usize>> = (0..trials)
        .into_par_iter()
        .map_init(
            || engine.stepper(),
            |stepper, trial| {
                stepper.reset();
                let mut stream = InnovationSpec::rademacher(seed, trial).stream();
                for n in 1..=m {
                    if params.violates(h * stepper.memory_sum()) {
                        return Some(n);
                    }
                    if n < m {
                        stepper.push(stream.next_value());
                    }
                }
                None
            },
        )
        .collect();

    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for n in first.into_iter().flatten() {
        *counts.entry(n).or_insert(0) += 1;
    }
    let hits: u64 = counts.values().sum();
    let (lo, hi) = wilson_interval(hits, trials, normal_quantile(0.95));
    Ok(ArbitrageReport {
        mode: ReportMode::MonteCarlo,
        p_hat: hits as f64 / trials as f64,
        ci: [lo, hi],
        trials,
        hits: Some(hits),
        histogram: counts.into_iter().map(|(n, c)| (n, c as f64 / trials as f64)).collect(),
    })
}

/// Smallest `N(α)` such that for all `N ≥ N(α)`:
/// `N^{β/2} C √T < √N - |(r-b)/σ|` and `N^{β/2} > 4`, with `β = (α+1)/2`.
pub fn decay_n_alpha(alpha: f64, params: &MarketParams, lipschitz: f64) -> Result<u64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let gamma = (alpha + 1.0) / 4.0;
    let a = lipschitz * params.horizon.sqrt();
    let k = ((params.r - params.b) / params.sigma).abs();

    let growth = |n: u64| {
        let nf = n as f64;
        nf.powf(gamma) * a < nf.sqrt() - k
    };
    // √N - a N^γ decreases until N = (2aγ)^{1/(1/2-γ)}
    let turning = if a > 0.0 { (2.0 * a * gamma).powf(1.0 / (0.5 - gamma)) } else { 0.0 };
    let n1 = crate::market::eventual_threshold(growth, turning)?;
    let n2 = crate::market::eventual_threshold(|n| (n as f64).powf(gamma) > 4.0, 0.0)?;
    Ok(n1.max(n2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(N, ln p̂ - fitted)` for every point used in the fit.
    pub residuals: Vec<(f64, f64)>,
}

/// Least-squares fit of `ln p̂` against `ln N` over the points with `p̂ > 0`.
pub fn decay_fit(points: &[(f64, f64)]) -> Result<DecayFit> {
    if !points.is_empty() && points.iter().all(|&(_, p)| p == 0.0) {
        return Err(Error::IdenticallyZero);
    }
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|&(n, p)| p > 0.0 && n > 0.0).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 3 points with positive probability, got {}",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, p)| p.ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let residuals =
        used.iter().zip(xs.iter().zip(&ys)).map(|(&(n, _), (x, y))| (n, y - (slope * x + intercept))).collect();
    Ok(DecayFit { slope, intercept, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Short one bond unit at `n-1` and buy stock with the proceeds.
    LongStock,
    /// Short stock worth one bond unit at `n-1` and hold the bond.
    ShortStock,
}

/// A one-step arbitrage at step `n` after `prefix = (ξ_1, …, ξ_{n-1})`.
///
/// Payoffs are the step-`n` values per unit of money committed at `n-1`, net
/// of financing at `r/N`: `S_n/S_{n-1} - (1 + r/N)` for the long position and
/// its negative for the short one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyWitness {
    pub prefix: Vec<f64>,
    pub step: usize,
    pub direction: Direction,
    pub stake: f64,
    pub payoff_down: f64,
    pub payoff_up: f64,
}

pub fn extract_strategy(
    table: &CoefficientTable,
    params: &MarketParams,
    prefix: &[f64],
    step: usize,
) -> Result<StrategyWitness> {
    if step == 0 || prefix.len() + 1 < step {
        return Err(Error::LengthMismatch { expected: step.saturating_sub(1), actual: prefix.len() });
    }
    let prefix = &prefix[..step - 1];
    let bounds = step_bounds(table, params, prefix)?;
    if !params.violates(bounds.mu) {
        return Err(Error::NoViolation { step });
    }
    let rho = params.rho();
    let (direction, payoff_down, payoff_up) = if bounds.mu >= rho {
        (Direction::LongStock, bounds.down - rho, bounds.up - rho)
    } else {
        (Direction::ShortStock, rho - bounds.down, rho - bounds.up)
    };
    Ok(StrategyWitness { prefix: prefix.to_vec(), step, direction, stake: 1.0, payoff_down, payoff_up })
}

/// Re-simulates both continuations of the witness with [`evolve_market`] and
/// checks the recorded payoffs and the arbitrage property.
pub fn verify_strategy(witness: &StrategyWitness, table: &CoefficientTable, params: &MarketParams) -> bool {
    if witness.step == 0 || witness.prefix.len() + 1 != witness.step || witness.step > table.steps() {
        return false;
    }
    let slack = BOUNDARY_RTOL * params.half_spread();
    let payoff = |last: f64| -> Option<f64> {
        let mut xi = witness.prefix.clone();
        xi.push(last);
        let path = evolve_market(table, params, &xi).ok()?;
        let n = witness.step;
        let excess = path.stock[n] / path.stock[n - 1] - path.bond[n] / path.bond[n - 1];
        Some(match witness.direction {
            Direction::LongStock => excess,
            Direction::ShortStock => -excess,
        })
    };
    let (Some(down), Some(up)) = (payoff(-1.0), payoff(1.0)) else {
        return false;
    };
    let agrees = |a: f64, b: f64| (a - b).abs() <= slack;
    agrees(down, witness.payoff_down)
        && agrees(up, witness.payoff_up)
        && down >= -slack
        && up >= -slack
        && down.max(up) > slack
}
