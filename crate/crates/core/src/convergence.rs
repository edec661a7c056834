//! Finite-`n` diagnostics for the limit behaviour of `Y⁽ⁿ⁾` and `S⁽ⁿ⁾`.
//!
//! Every Monte Carlo statistic draws path `i` from innovation stream `i` of
//! the given seed and reduces per-path values in path order, so reports are
//! bit-identical for any thread pool size.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelModel;
use crate::lattice_floor;
use crate::processes::{decompose_by_jump_threshold, fmt17, quadratic_variation, sample_s, Engine, EngineChoice};
use crate::quadrature::{adaptive_simpson, DEFAULT_BUDGET};
use crate::rng::{sample_innovations, InnovationSpec};
use crate::stats::{ks_critical_99, ks_point_mass, ks_statistic, log_log_slope, mean_and_stderr, normal_cdf};

const LIMIT_QUAD_TOL: f64 = 1e-12;
const FOURTH_MOMENT_BLOCK: u64 = 256;

/// Acceptance rule applied to the per-`n` discrepancies of a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Band {
    /// Fitted log-log slope in `[lo, hi]`.
    Slope { lo: f64, hi: f64 },
    /// Discrepancy at `n` (every `n` if absent) at most `value`.
    AtMost {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
    },
    /// `d_{k+1} ≤ d_k + z·(noise_k + noise_{k+1})`.
    NonIncreasing { z: f64 },
    /// `d_k ≤ factor·d_0`.
    BoundedRelative { factor: f64 },
}

impl Band {
    fn holds(&self, report: &ConvergenceReport) -> bool {
        let d = &report.discrepancies;
        match *self {
            Band::Slope { lo, hi } => report.slope.is_some_and(|s| lo <= s && s <= hi),
            Band::AtMost { value, n: None } => d.iter().all(|&x| x <= value),
            Band::AtMost { value, n: Some(n) } => {
                report.n_values.iter().position(|&k| k == n).is_some_and(|i| d[i] <= value)
            }
            Band::NonIncreasing { z } => {
                (1..d.len()).all(|k| d[k] <= d[k - 1] + z * (report.noise[k - 1] + report.noise[k]))
            }
            Band::BoundedRelative { factor } => d.iter().all(|&x| x <= factor * d[0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub statistic: String,
    pub n_values: Vec<usize>,
    pub discrepancies: Vec<f64>,
    /// Standard error for Monte Carlo means, the 99% KS critical value for
    /// KS distances, zero for deterministic statistics.
    pub noise: Vec<f64>,
    /// Log-log slope of discrepancy against `n`; absent when fewer than two
    /// points or some discrepancy is zero.
    pub slope: Option<f64>,
    pub bands: Vec<Band>,
    pub passed: bool,
}

impl ConvergenceReport {
    fn new(statistic: &str, n_values: Vec<usize>, discrepancies: Vec<f64>, noise: Vec<f64>, bands: &[Band]) -> Self {
        let slope = (n_values.len() >= 2 && discrepancies.iter().all(|&d| d > 0.0)).then(|| {
            let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
            log_log_slope(&xs, &discrepancies)
        });
        let mut report = Self {
            statistic: statistic.to_string(),
            n_values,
            discrepancies,
            noise,
            slope,
            bands: bands.to_vec(),
            passed: false,
        };
        report.passed = bands.iter().all(|b| b.holds(&report));
        report
    }

    /// One row per `n`: `n,discrepancy,noise`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "n,discrepancy,noise")?;
        for ((n, d), e) in self.n_values.iter().zip(&self.discrepancies).zip(&self.noise) {
            writeln!(out, "{n},{},{}", fmt17(*d), fmt17(*e))?;
        }
        Ok(())
    }
}

fn check_grid(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("n grid is empty".into()));
    }
    if n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("n grid must be positive and strictly increasing: {n_list:?}")));
    }
    Ok(())
}

fn check_paths(paths: u64) -> Result<()> {
    if paths == 0 {
        return Err(Error::InvalidParameter("at least one path is required".into()));
    }
    Ok(())
}

/// Gaussian limit of `Y⁽ⁿ⁾`: `Cov(Y_s, Y_t) = ∫₀^{s∧t} y(s,u) y(t,u) du`.
#[derive(Debug, Clone)]
pub struct LimitLaw {
    kernel: KernelModel,
}

impl LimitLaw {
    pub fn new(kernel: KernelModel) -> Self {
        Self { kernel }
    }

    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        let horizon = self.kernel.horizon();
        for x in [s, t] {
            if !(x > 0.0 && x <= horizon) {
                return Err(Error::Domain(format!("time {x} outside (0, {horizon}]")));
            }
        }
        let k = &self.kernel;
        // y is continuous, so the integrand is too; domain errors cannot occur
        let integrand = |u: f64| k.eval_y(s, u).unwrap_or(f64::NAN) * k.eval_y(t, u).unwrap_or(f64::NAN);
        let v = adaptive_simpson(integrand, 0.0, s.min(t), LIMIT_QUAD_TOL, DEFAULT_BUDGET)?;
        if v.is_nan() {
            return Err(Error::Domain(format!("kernel could not be evaluated on [0, {}]", s.min(t))));
        }
        Ok(v)
    }

    pub fn variance(&self, t: f64) -> Result<f64> {
        self.covariance(t, t)
    }

    pub fn covariance_matrix(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        times.iter().map(|&s| times.iter().map(|&t| self.covariance(s, t)).collect()).collect()
    }

    /// Mean and standard deviation of `log S_T` under the limit model.
    pub fn log_price(&self, model: &PriceModel) -> Result<(f64, f64)> {
        model.validate()?;
        let t = model.horizon;
        let mean = model.s0.ln() + model.b * t - 0.5 * model.sigma * model.sigma * t;
        Ok((mean, model.sigma * self.variance(t)?.sqrt()))
    }
}

/// Price dynamics `S_k = s₀ Π (1 + σΔY_j + b/n)` with constant drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceModel {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub b: f64,
    /// May be zero, in which case the limit law is a point mass.
    pub sigma: f64,
    pub s0: f64,
}

impl PriceModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial price must be positive, got {}", self.s0)));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        Ok(())
    }
}

/// `n⁻¹ Σ_{i ≤ ⌊n(s∧t)⌋} y(⌊ns⌋/n, i/n) y(⌊nt⌋/n, i/n)`.
pub fn discrete_covariance(kernel: &KernelModel, n: usize, s: f64, t: f64) -> Result<f64> {
    let nf = n as f64;
    let ks = lattice_floor(nf * s);
    let kt = lattice_floor(nf * t);
    let ts = ks as f64 / nf;
    let tt = kt as f64 / nf;
    let mut acc = 0.0;
    for i in 1..=ks.min(kt) {
        let u = i as f64 / nf;
        acc += kernel.eval_y(ts, u)? * kernel.eval_y(tt, u)?;
    }
    Ok(acc / nf)
}

pub fn discrete_covariance_matrix(kernel: &KernelModel, n: usize, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    times.iter().map(|&s| times.iter().map(|&t| discrete_covariance(kernel, n, s, t)).collect()).collect()
}

/// Largest `|discrete - limit|` covariance gap over all pairs of `t_list`,
/// for each `n`. Deterministic.
pub fn variance_discrepancy(
    kernel: &KernelModel,
    t_list: &[f64],
    n_list: &[usize],
    bands: &[Band],
) -> Result<ConvergenceReport> {
    check_grid(n_list)?;
    if t_list.is_empty() {
        return Err(Error::InvalidParameter("time list is empty".into()));
    }
    let law = LimitLaw::new(kernel.clone());
    let limit = law.covariance_matrix(t_list)?;
    let discrepancies = n_list
        .par_iter()
        .map(|&n| {
            let discrete = discrete_covariance_matrix(kernel, n, t_list)?;
            Ok(discrete.iter().flatten().zip(limit.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let noise = vec![0.0; n_list.len()];
    Ok(ConvergenceReport::new("variance", n_list.to_vec(), discrepancies, noise, bands))
}

/// Applies `f` to `√n·Y⁽ⁿ⁾` on `paths` Rademacher paths, in path order.
fn per_path<F>(engine: &Engine, paths: u64, seed: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let m = engine.steps();
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let xi = sample_innovations(&InnovationSpec::rademacher(seed, i), m);
            engine.sample_y_unscaled(&xi).map(|u| f(&u))
        })
        .collect()
}

/// `sup_{t ≤ T} |[Y]_t - t|` for the step path `[Y]_t = [Y]_{⌊nt⌋}`, given
/// `√n·Y`. The supremum over each segment is attained at one of its ends.
pub fn qv_sup_discrepancy(unscaled: &[f64], n: usize, horizon: f64) -> f64 {
    let nf = n as f64;
    let m = unscaled.len() - 1;
    let mut acc = 0.0;
    let mut sup = 0.0f64;
    for k in 0..=m {
        if k > 0 {
            acc += (unscaled[k] - unscaled[k - 1]).powi(2);
        }
        let q = acc / nf;
        let right = if k == m { horizon } else { (k + 1) as f64 / nf };
        sup = sup.max((q - k as f64 / nf).abs()).max((q - right).abs());
    }
    sup
}

/// Monte Carlo `E[sup_{t≤T} |[Y⁽ⁿ⁾]_t - t|]` on `[0, T]` with `T` the
/// kernel horizon.
pub fn qv_convergence(
    kernel: &KernelModel,
    n_list: &[usize],
    paths: u64,
    seed: u64,
    bands: &[Band],
) -> Result<ConvergenceReport> {
    check_grid(n_list)?;
    check_paths(paths)?;
    let horizon = kernel.horizon();
    let mut means = Vec::with_capacity(n_list.len());
    let mut errors = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let engine = Engine::for_kernel(kernel, n, horizon, EngineChoice::Auto)?;
        let values = per_path(&engine, paths, seed, |u| qv_sup_discrepancy(u, n, horizon))?;
        let (mean, se) = mean_and_stderr(&values);
        means.push(mean);
        errors.push(se);
    }
    Ok(ConvergenceReport::new("quadratic-variation", n_list.to_vec(), means, errors, bands))
}

/// Monte Carlo `n·E[sup_k |ΔY⁽ⁿ⁾_k|⁴]`.
pub fn jump_convergence(
    kernel: &KernelModel,
    n_list: &[usize],
    paths: u64,
    seed: u64,
    bands: &[Band],
) -> Result<ConvergenceReport> {
    check_grid(n_list)?;
    check_paths(paths)?;
    let horizon = kernel.horizon();
    let mut means = Vec::with_capacity(n_list.len());
    let mut errors = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let engine = Engine::for_kernel(kernel, n, horizon, EngineChoice::Auto)?;
        let nf = n as f64;
        // n·(max|Δ(√n Y)| / √n)⁴ = max|Δ(√n Y)|⁴ / n
        let values = per_path(&engine, paths, seed, |u| {
            let jump = u.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
            jump.powi(4) / nf
        })?;
        let (mean, se) = mean_and_stderr(&values);
        means.push(mean);
        errors.push(se);
    }
    Ok(ConvergenceReport::new("jump", n_list.to_vec(), means, errors, bands))
}

/// KS distance between `samples` draws of `Y⁽ⁿ⁾_t` and its normal limit.
pub fn fdd_distance(kernel: &KernelModel, t: f64, n: usize, samples: u64, seed: u64) -> Result<f64> {
    check_paths(samples)?;
    let sd = LimitLaw::new(kernel.clone()).variance(t)?.sqrt();
    let engine = Engine::for_kernel(kernel, n, t, EngineChoice::Auto)?;
    let root_n = (n as f64).sqrt();
    let mut values = per_path(&engine, samples, seed, |u| u[u.len() - 1] / root_n)?;
    Ok(ks_statistic(&mut values, |x| normal_cdf(x, 0.0, sd)))
}

/// Simulated terminal prices `S⁽ⁿ⁾_T`, in path order.
pub fn sample_terminal_prices(
    model: &PriceModel,
    kernel: &KernelModel,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    model.validate()?;
    check_paths(samples)?;
    let engine = Engine::for_kernel(kernel, n, model.horizon, EngineChoice::Auto)?;
    let m = engine.steps();
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let xi = sample_innovations(&InnovationSpec::rademacher(seed, i), m);
            let y = engine.sample_y(&xi)?;
            let s = sample_s(&y, n, |_| model.b, model.sigma, model.s0)?;
            Ok(s[m])
        })
        .collect()
}

/// KS distance between simulated `S⁽ⁿ⁾_T` and the lognormal limit, or the
/// point mass at `s₀e^{bT}` when `σ = 0`.
///
/// The statistic is computed on `log S_T` against the normal CDF, which
/// gives the same value since `log` is increasing.
pub fn terminal_price_distance(
    model: &PriceModel,
    kernel: &KernelModel,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    let prices = sample_terminal_prices(model, kernel, n, samples, seed)?;
    if model.sigma == 0.0 {
        return Ok(ks_point_mass(&prices, model.s0 * (model.b * model.horizon).exp()));
    }
    let (mean, sd) = LimitLaw::new(kernel.clone()).log_price(model)?;
    let mut logs: Vec<f64> = prices.iter().map(|s| s.ln()).collect();
    Ok(ks_statistic(&mut logs, |x| normal_cdf(x, mean, sd)))
}

/// `fdd_distance` along `n_list`, with the 99% KS critical value as noise.
pub fn fdd_convergence(
    kernel: &KernelModel,
    t: f64,
    n_list: &[usize],
    samples: u64,
    seed: u64,
    bands: &[Band],
) -> Result<ConvergenceReport> {
    check_grid(n_list)?;
    let d = n_list.iter().map(|&n| fdd_distance(kernel, t, n, samples, seed)).collect::<Result<Vec<_>>>()?;
    let noise = vec![ks_critical_99(samples as usize); n_list.len()];
    Ok(ConvergenceReport::new("fdd-ks", n_list.to_vec(), d, noise, bands))
}

/// `terminal_price_distance` along `n_list`, with the 99% KS critical value
/// as noise.
pub fn terminal_price_convergence(
    model: &PriceModel,
    kernel: &KernelModel,
    n_list: &[usize],
    samples: u64,
    seed: u64,
    bands: &[Band],
) -> Result<ConvergenceReport> {
    check_grid(n_list)?;
    let d =
        n_list.iter().map(|&n| terminal_price_distance(model, kernel, n, samples, seed)).collect::<Result<Vec<_>>>()?;
    let noise = vec![ks_critical_99(samples as usize); n_list.len()];
    Ok(ConvergenceReport::new("terminal-price-ks", n_list.to_vec(), d, noise, bands))
}

/// `(sup_k |Y²_k|, [Y²]_T)` for the large-jump part of `y`.
pub fn decomposition_diagnostics(y: &[f64], sigma: f64) -> Result<(f64, f64)> {
    let (_, y2) = decompose_by_jump_threshold(y, sigma)?;
    let sup = y2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let qv = quadratic_variation(&y2).last().copied().unwrap_or(0.0);
    Ok((sup, qv))
}

/// `max_{k<l} E|Y_l - Y_k|⁴ / ((l-k)/n)²` over all lattice pairs, estimated
/// from `paths` Rademacher paths.
///
/// Paths are summed in fixed blocks and the block sums added in order, so
/// the estimate does not depend on scheduling.
pub fn increment_fourth_moment_ratio(engine: &Engine, paths: u64, seed: u64) -> Result<f64> {
    check_paths(paths)?;
    let m = engine.steps();
    let n = engine.n() as f64;
    let len = m * (m + 1) / 2;
    let index = |k: usize, l: usize| l * (l - 1) / 2 + k;
    let blocks = paths.div_ceil(FOURTH_MOMENT_BLOCK);
    let partial = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut sums = vec![0.0; len];
            let end = ((b + 1) * FOURTH_MOMENT_BLOCK).min(paths);
            for i in b * FOURTH_MOMENT_BLOCK..end {
                let xi = sample_innovations(&InnovationSpec::rademacher(seed, i), m);
                let y = engine.sample_y(&xi)?;
                for l in 1..=m {
                    for k in 0..l {
                        sums[index(k, l)] += (y[l] - y[k]).powi(4);
                    }
                }
            }
            Ok(sums)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut total = vec![0.0; len];
    for sums in &partial {
        for (t, s) in total.iter_mut().zip(sums) {
            *t += s;
        }
    }
    let p = paths as f64;
    let mut ratio = 0.0f64;
    for l in 1..=m {
        for k in 0..l {
            let gap = (l - k) as f64 / n;
            ratio = ratio.max(total[index(k, l)] / p / (gap * gap));
        }
    }
    Ok(ratio)
}
