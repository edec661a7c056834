//! The `⌊NT⌋`-period binary market: money market `B_n = (1 + r/N)^n` and
//! stock `S_n = S_{n-1}(1 + b/N + X_n)` where `X_n = σΔY_{n/N}` takes one of
//! two path-dependent values `d_n < u_n`.
//!
//! The market is free of arbitrage iff `d_n < ρ < u_n` at every step along
//! every path, with `ρ = (r - b)/N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::{lattice_steps, CoefficientTable};

/// Relative slack, in units of `σ/√N`, under which a margin counts as zero.
///
/// Worst-case drifts are sums of up to `m` rounded coefficients, so an
/// exact boundary such as `c(n-1)/N = 1` can land a few ulps to either side.
/// Margins within the slack are classified as violations, matching the
/// non-strict complement of the no-arbitrage event.
pub const BOUNDARY_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Periods per unit time.
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Money-market rate.
    pub r: f64,
    /// Stock drift.
    pub b: f64,
    pub sigma: f64,
    pub s0: f64,
}

impl MarketParams {
    pub fn new(n: usize, horizon: f64, r: f64, b: f64, sigma: f64, s0: f64) -> Result<Self> {
        let params = Self { n, horizon, r, b, sigma, s0 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        lattice_steps(self.n, self.horizon)?;
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::InvalidParameter(format!("s0 must be positive, got {}", self.s0)));
        }
        if !(self.r.is_finite() && self.b.is_finite()) {
            return Err(Error::InvalidParameter("rates must be finite".into()));
        }
        Ok(())
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    /// `m = ⌊NT⌋`.
    pub fn steps(&self) -> usize {
        lattice_steps(self.n, self.horizon).unwrap_or(0)
    }

    /// `r⁽ᴺ⁾ = r/N`.
    pub fn rate_step(&self) -> f64 {
        self.r / self.n as f64
    }

    /// `b⁽ᴺ⁾ = b/N`.
    pub fn drift_step(&self) -> f64 {
        self.b / self.n as f64
    }

    /// `ρ = r⁽ᴺ⁾ - b⁽ᴺ⁾`.
    pub fn rho(&self) -> f64 {
        (self.r - self.b) / self.n as f64
    }

    /// `σ/√N`, half the spread `u_n - d_n`.
    pub fn half_spread(&self) -> f64 {
        self.sigma / (self.n as f64).sqrt()
    }

    fn boundary_slack(&self) -> f64 {
        BOUNDARY_RTOL * self.half_spread()
    }

    /// Whether a step with memory drift `mu` admits a one-step arbitrage,
    /// i.e. `d ≥ ρ` or `u ≤ ρ`.
    pub fn violates(&self, mu: f64) -> bool {
        (mu - self.rho()).abs() >= self.half_spread() - self.boundary_slack()
    }

    pub(crate) fn check_table(&self, table: &CoefficientTable) -> Result<()> {
        self.validate()?;
        if table.n() != self.n {
            return Err(Error::InvalidParameter(format!(
                "table built for N = {} but market has N = {}",
                table.n(),
                self.n
            )));
        }
        if table.steps() != self.steps() {
            return Err(Error::LengthMismatch { expected: self.steps(), actual: table.steps() });
        }
        Ok(())
    }
}

/// The two possible moves at step `n` given `ξ_1, …, ξ_{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepBounds {
    pub step: usize,
    /// `(σ/√N) Σ_{i<n} δ[n][i] ξ_i`.
    pub mu: f64,
    pub down: f64,
    pub up: f64,
}

pub fn step_bounds(table: &CoefficientTable, params: &MarketParams, prefix: &[f64]) -> Result<StepBounds> {
    params.check_table(table)?;
    let step = prefix.len() + 1;
    if step > table.steps() {
        return Err(Error::LengthMismatch { expected: table.steps() - 1, actual: prefix.len() });
    }
    let h = params.half_spread();
    let mu = h * table.memory_sum(step, prefix);
    Ok(StepBounds { step, mu, down: mu - h, up: mu + h })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Free,
    Arbitrage,
}

/// Worst-case margins `σ/√N - (|ρ| + (σ/√N)·Σ_{i<n}|δ[n][i]|)` per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoArbCertificate {
    pub verdict: Verdict,
    pub min_margin: f64,
    pub argmin_step: usize,
    pub margins: Vec<f64>,
    /// Minimal period count from the sufficient condition, when `T < 1/C`.
    #[serde(rename = "N0")]
    pub n0: Option<u64>,
}

/// Decides absence of arbitrage over all `2^{m-1}` paths at once.
///
/// At step `n` the memory drift ranges over a signed sum with free signs, so
/// `max_ξ |μ_n - ρ| = |ρ| + (σ/√N)·Σ|δ[n][i]|`; the market is free iff that
/// stays strictly below `σ/√N` at every step.
pub fn is_arbitrage_free_exact(table: &CoefficientTable, params: &MarketParams) -> Result<NoArbCertificate> {
    params.check_table(table)?;
    let h = params.half_spread();
    let rho = params.rho().abs();
    let margins: Vec<f64> = (1..=table.steps()).map(|n| h - (rho + h * table.row_abs_sum(n))).collect();
    let (argmin, min_margin) =
        margins.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &m)| if m < acc.1 { (i, m) } else { acc });
    let verdict = if min_margin > params.boundary_slack() { Verdict::Free } else { Verdict::Arbitrage };
    Ok(NoArbCertificate {
        verdict,
        min_margin,
        argmin_step: argmin + 1,
        margins,
        n0: sufficient_n0(params, table.lipschitz()).ok(),
    })
}

/// Smallest `N₀ ≥ 1` with `pred(N)` for every `N ≥ N₀`.
///
/// `pred` must come from a quantity that decreases in `N` up to `turning`
/// and increases afterwards (monotone when `turning ≤ 1`), so over the
/// integers its minimum sits at `⌊turning⌋` or `⌊turning⌋ + 1`.
pub(crate) fn eventual_threshold<P: Fn(u64) -> bool>(pred: P, turning: f64) -> Result<u64> {
    const LIMIT: u64 = 1 << 62;
    let lo = if turning.is_finite() && turning > 1.0 { (turning.floor() as u64).min(LIMIT) } else { 1 };
    if pred(lo) && pred(lo + 1) {
        return Ok(1);
    }
    let start = if lo > 1 { lo + 1 } else { 1 };
    let mut hi = start;
    while !pred(hi) {
        if hi >= LIMIT {
            return Err(Error::Precondition("no admissible period count below 2^62".into()));
        }
        hi = hi.saturating_mul(2).min(LIMIT);
    }
    let mut left = start;
    while left < hi {
        let mid = left + (hi - left) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            left = mid + 1;
        }
    }
    Ok(left)
}

/// Smallest `N₀` such that for all `N ≥ N₀`:
/// `b/N - (σ/√N)(TC + 1) > -1` and `|r - b| < √N (1 - TC) σ`.
///
/// Only available when `T < 1/C`.
pub fn sufficient_n0(params: &MarketParams, lipschitz: f64) -> Result<u64> {
    let tc = params.horizon * lipschitz;
    if !(tc < 1.0) {
        return Err(Error::Precondition(format!("T·C = {tc} is not below 1; the sufficient condition does not apply")));
    }
    let (b, sigma, gap) = (params.b, params.sigma, (params.r - params.b).abs());

    let a = sigma * (tc + 1.0);
    let positivity = |n: u64| {
        let nf = n as f64;
        b / nf - sigma / nf.sqrt() * (tc + 1.0) > -1.0
    };
    let turning = if b > 0.0 { (2.0 * b / a).powi(2) } else { 0.0 };
    let n_pos = eventual_threshold(positivity, turning)?;

    let spread = |n: u64| gap < (n as f64).sqrt() * (1.0 - tc) * sigma;
    let n_spread = eventual_threshold(spread, 0.0)?;
    Ok(n_pos.max(n_spread))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketPath {
    pub bond: Vec<f64>,
    pub stock: Vec<f64>,
}

/// Runs the market along `xi` (any length up to `m`), choosing `u_n` when
/// `ξ_n = +1` and `d_n` otherwise.
pub fn evolve_market(table: &CoefficientTable, params: &MarketParams, xi: &[f64]) -> Result<MarketPath> {
    params.check_table(table)?;
    if xi.len() > table.steps() {
        return Err(Error::LengthMismatch { expected: table.steps(), actual: xi.len() });
    }
    let h = params.half_spread();
    let (rate, drift) = (params.rate_step(), params.drift_step());
    let mut bond = Vec::with_capacity(xi.len() + 1);
    let mut stock = Vec::with_capacity(xi.len() + 1);
    bond.push(1.0);
    stock.push(params.s0);
    for n in 1..=xi.len() {
        let mu = h * table.memory_sum(n, &xi[..n - 1]);
        let factor = 1.0 + drift + mu + xi[n - 1] * h;
        if !(factor > 0.0) {
            return Err(Error::NonPositiveFactor { step: n, factor });
        }
        bond.push(bond[n - 1] * (1.0 + rate));
        stock.push(stock[n - 1] * factor);
    }
    Ok(MarketPath { bond, stock })
}

/// One-step risk-neutral weight `q = (ρ - d)/(u - d)` of the up move.
pub fn risk_neutral_step_prob(bounds: &StepBounds, params: &MarketParams) -> Result<f64> {
    if params.violates(bounds.mu) {
        return Err(Error::Precondition(format!("step {} admits arbitrage: ρ ∉ (d, u)", bounds.step)));
    }
    Ok((params.rho() - bounds.down) / (bounds.up - bounds.down))
}
