//! Lattice processes `W⁽ⁿ⁾`, `Y⁽ⁿ⁾`, `S⁽ⁿ⁾` and their path functionals.
//!
//! With `m = ⌊nT⌋` steps, `Y_k = n^{-1/2} Σ_{i≤k} y(k/n, i/n) ξ_i`. Its
//! increments split into the fresh innovation and a memory term:
//! `ΔY_k = n^{-1/2} (ξ_k + Σ_{i<k} δ[k][i] ξ_i)` with
//! `δ[k][i] = y(k/n, i/n) - y((k-1)/n, i/n)`.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{KernelModel, MemoryKernelParams};
use crate::lattice_floor;
use crate::rng::InnovationSpec;

/// `⌊nT⌋`, rejecting empty lattices.
pub fn lattice_steps(n: usize, horizon: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter("periods per unit time must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let m = lattice_floor(n as f64 * horizon);
    if m == 0 {
        return Err(Error::InvalidParameter(format!("⌊nT⌋ = 0 for n = {n}, T = {horizon}")));
    }
    Ok(m)
}

/// Precomputed weights `y(k/N, i/N)` for `1 ≤ i ≤ k ≤ m` and the increment
/// coefficients `δ[k][i]` for `i < k`, stored as packed triangles.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    n: usize,
    horizon: f64,
    steps: usize,
    lipschitz: f64,
    y: Vec<f64>,
    delta: Vec<f64>,
    row_abs_sum: Vec<f64>,
}

impl CoefficientTable {
    pub fn build(kernel: &KernelModel, n: usize, horizon: f64) -> Result<Self> {
        if horizon > kernel.horizon() * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "lattice horizon {horizon} exceeds kernel horizon {}",
                kernel.horizon()
            )));
        }
        let m = lattice_steps(n, horizon)?;
        let nf = n as f64;
        let rows: Vec<Vec<f64>> = (1..=m)
            .into_par_iter()
            .map(|k| (1..=k).map(|i| kernel.eval_y(k as f64 / nf, i as f64 / nf)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;

        let mut y = Vec::with_capacity(m * (m + 1) / 2);
        for row in &rows {
            y.extend_from_slice(row);
        }
        let mut delta = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        let mut row_abs_sum = vec![0.0; m + 1];
        for k in 2..=m {
            let (cur, prev) = (&rows[k - 1], &rows[k - 2]);
            let start = delta.len();
            delta.extend(prev.iter().zip(cur).map(|(p, c)| c - p));
            row_abs_sum[k] = delta[start..].iter().map(|d| d.abs()).sum();
        }
        Ok(Self { n, horizon, steps: m, lipschitz: kernel.lipschitz(), y, delta, row_abs_sum })
    }

    /// Periods per unit time `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `m = ⌊NT⌋`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Lipschitz constant of the kernel the table was built from.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `y(k/N, i/N)` for `i = 1..=k`.
    pub fn y_row(&self, k: usize) -> &[f64] {
        assert!((1..=self.steps).contains(&k), "row {k} outside 1..={}", self.steps);
        let start = (k - 1) * k / 2;
        &self.y[start..start + k]
    }

    pub fn y(&self, k: usize, i: usize) -> f64 {
        self.y_row(k)[i - 1]
    }

    /// `δ[k][i]` for `i = 1..k`; empty for `k = 1`.
    pub fn delta_row(&self, k: usize) -> &[f64] {
        assert!((1..=self.steps).contains(&k), "row {k} outside 1..={}", self.steps);
        if k == 1 {
            return &[];
        }
        let start = (k - 2) * (k - 1) / 2;
        &self.delta[start..start + k - 1]
    }

    pub fn delta(&self, k: usize, i: usize) -> f64 {
        self.delta_row(k)[i - 1]
    }

    /// `Σ_{i<k} |δ[k][i]|`.
    pub fn row_abs_sum(&self, k: usize) -> f64 {
        self.row_abs_sum[k]
    }

    /// `Σ_{i<k} δ[k][i] ξ_i` for `prefix = (ξ_1, …, ξ_{k-1})`.
    pub fn memory_sum(&self, k: usize, prefix: &[f64]) -> f64 {
        self.delta_row(k).iter().zip(prefix).map(|(d, x)| d * x).sum()
    }
}

/// Reference engine: `Y_k` by full re-summation at every step, `O(m²)`.
///
/// Returns `Y_0, …, Y_m` with `Y_0 = 0`.
pub fn sample_y_direct(table: &CoefficientTable, xi: &[f64]) -> Result<Vec<f64>> {
    let root_n = (table.n() as f64).sqrt();
    Ok(sample_y_direct_unscaled(table, xi)?.into_iter().map(|v| v / root_n).collect())
}

fn sample_y_direct_unscaled(table: &CoefficientTable, xi: &[f64]) -> Result<Vec<f64>> {
    let m = table.steps();
    if xi.len() != m {
        return Err(Error::LengthMismatch { expected: m, actual: xi.len() });
    }
    let mut out = Vec::with_capacity(m + 1);
    out.push(0.0);
    for k in 1..=m {
        out.push(table.y_row(k).iter().zip(xi).map(|(w, x)| w * x).sum());
    }
    Ok(out)
}

/// `O(1)`-per-step recursion for the exponential memory kernel.
///
/// The memory term of step `k` equals `-(p/κ)(1 - e^{-κ/N}) M_k` where
/// `M_1 = 0` and `M_{k+1} = e^{-κ/N} M_k + g(k/N) ξ_k`, `κ = p + q`.
#[derive(Debug, Clone)]
pub struct ExponentialEngine {
    params: MemoryKernelParams,
    n: usize,
    steps: usize,
    decay: f64,
    coeff: f64,
    state: f64,
    consumed: usize,
    updates: usize,
}

impl ExponentialEngine {
    pub fn new(params: MemoryKernelParams, n: usize, horizon: f64) -> Result<Self> {
        params.validate()?;
        if horizon > params.horizon * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "lattice horizon {horizon} exceeds kernel horizon {}",
                params.horizon
            )));
        }
        let steps = lattice_steps(n, horizon)?;
        let rate = params.decay_rate() / n as f64;
        let coeff = if params.p == 0.0 { 0.0 } else { (params.p / params.decay_rate()) * (-rate).exp_m1() };
        Ok(Self { params, n, steps, decay: (-rate).exp(), coeff, state: 0.0, consumed: 0, updates: 0 })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of recursion updates performed since construction.
    pub fn updates(&self) -> usize {
        self.updates
    }

    /// Rewinds to step 1 without touching the update counter.
    pub fn reset(&mut self) {
        self.state = 0.0;
        self.consumed = 0;
    }

    /// Memory term `Σ_{i<k} δ[k][i] ξ_i` of the next step `k`.
    #[inline]
    pub fn memory_sum(&self) -> f64 {
        self.coeff * self.state
    }

    /// Feeds `ξ_k` for the next step `k`.
    #[inline]
    pub fn push(&mut self, xi: f64) {
        self.consumed += 1;
        let g = self.params.weight(self.consumed as f64 / self.n as f64);
        self.state = self.decay * self.state + g * xi;
        self.updates += 1;
    }

    /// `Y_0, …, Y_m` for the given innovations.
    pub fn run(&mut self, xi: &[f64]) -> Result<Vec<f64>> {
        let root_n = (self.n as f64).sqrt();
        Ok(self.run_unscaled(xi)?.into_iter().map(|v| v / root_n).collect())
    }

    /// `√N·Y_0, …, √N·Y_m`, accumulated without the `1/√N` factor.
    pub fn run_unscaled(&mut self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.steps {
            return Err(Error::LengthMismatch { expected: self.steps, actual: xi.len() });
        }
        self.reset();
        let mut raw = 0.0;
        let mut out = Vec::with_capacity(xi.len() + 1);
        out.push(0.0);
        for &x in xi {
            raw += x + self.memory_sum();
            self.push(x);
            out.push(raw);
        }
        Ok(out)
    }
}

/// Fast engine for the exponential memory kernel; see [`ExponentialEngine`].
pub fn sample_y_fast(params: MemoryKernelParams, n: usize, horizon: f64, xi: &[f64]) -> Result<Vec<f64>> {
    ExponentialEngine::new(params, n, horizon)?.run(xi)
}

/// Incremental access to the memory term, one step at a time.
#[derive(Debug, Clone)]
pub enum MemoryStepper<'a> {
    Table { table: &'a CoefficientTable, history: Vec<f64> },
    Exponential(ExponentialEngine),
}

impl MemoryStepper<'_> {
    #[inline]
    pub fn memory_sum(&self) -> f64 {
        match self {
            MemoryStepper::Table { table, history } => table.memory_sum(history.len() + 1, history),
            MemoryStepper::Exponential(e) => e.memory_sum(),
        }
    }

    #[inline]
    pub fn push(&mut self, xi: f64) {
        match self {
            MemoryStepper::Table { history, .. } => history.push(xi),
            MemoryStepper::Exponential(e) => e.push(xi),
        }
    }

    pub fn reset(&mut self) {
        match self {
            MemoryStepper::Table { history, .. } => history.clear(),
            MemoryStepper::Exponential(e) => e.reset(),
        }
    }
}

/// Which path engine to use for a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineChoice {
    /// Fast recursion when the kernel supports it, table otherwise.
    #[default]
    Auto,
    Fast,
    Direct,
}

/// A path engine bound to a lattice `(N, T)`.
#[derive(Debug, Clone)]
pub enum Engine {
    Exponential(ExponentialEngine),
    Table(Arc<CoefficientTable>),
}

impl Engine {
    pub fn for_kernel(kernel: &KernelModel, n: usize, horizon: f64, choice: EngineChoice) -> Result<Self> {
        match (choice, kernel.memory_params()) {
            (EngineChoice::Fast | EngineChoice::Auto, Some(params)) => {
                Ok(Engine::Exponential(ExponentialEngine::new(params, n, horizon)?))
            }
            (EngineChoice::Fast, None) => {
                Err(Error::UnsupportedKernel(format!("{:?} has no exponential structure", kernel.kernel())))
            }
            _ => Ok(Engine::Table(Arc::new(CoefficientTable::build(kernel, n, horizon)?))),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Engine::Exponential(e) => e.n,
            Engine::Table(t) => t.n(),
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            Engine::Exponential(e) => e.steps(),
            Engine::Table(t) => t.steps(),
        }
    }

    pub fn stepper(&self) -> MemoryStepper<'_> {
        match self {
            Engine::Exponential(e) => {
                let mut e = e.clone();
                e.reset();
                MemoryStepper::Exponential(e)
            }
            Engine::Table(t) => MemoryStepper::Table { table: t, history: Vec::with_capacity(t.steps()) },
        }
    }

    pub fn sample_y(&self, xi: &[f64]) -> Result<Vec<f64>> {
        match self {
            Engine::Exponential(e) => e.clone().run(xi),
            Engine::Table(t) => sample_y_direct(t, xi),
        }
    }

    /// `√N·Y_k`; squared increments of this sequence divided by `N` give
    /// `[Y⁽ᴺ⁾]` without rounding the `1/√N` factor twice.
    pub fn sample_y_unscaled(&self, xi: &[f64]) -> Result<Vec<f64>> {
        match self {
            Engine::Exponential(e) => e.clone().run_unscaled(xi),
            Engine::Table(t) => sample_y_direct_unscaled(t, xi),
        }
    }

    /// Draws innovations from `spec` and builds the full path.
    pub fn simulate(&self, spec: &InnovationSpec) -> Result<DiscretePath> {
        let xi = crate::rng::sample_innovations(spec, self.steps());
        let y = self.sample_y(&xi)?;
        Ok(DiscretePath::new(self.n(), xi, y))
    }
}

/// Innovations and lattice values of `W⁽ⁿ⁾`, `Y⁽ⁿ⁾` and optionally `S⁽ⁿ⁾`.
/// Index `k` holds the value at `t = k/n`; `xi[k-1]` is `ξ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePath {
    pub n: usize,
    pub xi: Vec<f64>,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Option<Vec<f64>>,
}

impl DiscretePath {
    pub fn new(n: usize, xi: Vec<f64>, y: Vec<f64>) -> Self {
        let root_n = (n as f64).sqrt();
        let mut w = Vec::with_capacity(xi.len() + 1);
        let mut sum = 0.0;
        w.push(0.0);
        for &x in &xi {
            sum += x;
            w.push(sum / root_n);
        }
        Self { n, xi, w, y, s: None }
    }

    pub fn steps(&self) -> usize {
        self.xi.len()
    }

    /// `[W⁽ⁿ⁾]_k = n^{-1} Σ_{i≤k} ξ_i²`, accumulated on the unscaled
    /// innovations so Rademacher paths give exactly `k/n`.
    pub fn w_quadratic_variation(&self) -> Vec<f64> {
        let nf = self.n as f64;
        let mut acc = 0.0;
        std::iter::once(0.0)
            .chain(self.xi.iter().map(|x| {
                acc += x * x;
                acc / nf
            }))
            .collect()
    }

    /// Attaches `S⁽ⁿ⁾` computed by [`sample_s`].
    pub fn with_price<B: Fn(f64) -> f64>(mut self, drift: B, sigma: f64, s0: f64) -> Result<Self> {
        self.s = Some(sample_s(&self.y, self.n, drift, sigma, s0)?);
        Ok(self)
    }

    /// CSV with header `step,t,xi,W,Y,S`; floats carry 17 significant digits.
    /// `xi` at step 0 is written as 0, `S` is empty when no price is attached.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,t,xi,W,Y,S")?;
        let nf = self.n as f64;
        for k in 0..=self.steps() {
            let xi = if k == 0 { 0.0 } else { self.xi[k - 1] };
            let s = self.s.as_ref().map(|s| fmt17(s[k])).unwrap_or_default();
            writeln!(out, "{k},{},{},{},{},{s}", fmt17(k as f64 / nf), fmt17(xi), fmt17(self.w[k]), fmt17(self.y[k]))?;
        }
        Ok(())
    }
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `S_k = s₀ Π_{j≤k} (1 + σΔY_j + b(j/n)/n)`.
///
/// Fails on the first factor that is not strictly positive.
pub fn sample_s<B: Fn(f64) -> f64>(y: &[f64], n: usize, drift: B, sigma: f64, s0: f64) -> Result<Vec<f64>> {
    if !(s0 > 0.0) {
        return Err(Error::InvalidParameter(format!("initial price must be positive, got {s0}")));
    }
    let nf = n as f64;
    let mut s = Vec::with_capacity(y.len());
    s.push(s0);
    for k in 1..y.len() {
        let factor = 1.0 + sigma * (y[k] - y[k - 1]) + drift(k as f64 / nf) / nf;
        if !(factor > 0.0) {
            return Err(Error::NonPositiveFactor { step: k, factor });
        }
        s.push(s[k - 1] * factor);
    }
    Ok(s)
}

/// `[X]_k = Σ_{j≤k} (X_j - X_{j-1})²`.
pub fn quadratic_variation(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(values.len());
    if values.is_empty() {
        return out;
    }
    out.push(0.0);
    for w in values.windows(2) {
        acc += (w[1] - w[0]).powi(2);
        out.push(acc);
    }
    out
}

/// `max_k |X_k - X_{k-1}|`.
pub fn sup_jump(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Splits `Y` into `Y¹` (increments with `|ΔY| < 1/(2σ)`) and `Y²` (the rest).
///
/// `Y²` accumulates the large increments and `Y¹ = Y - Y²`, so `Y¹ = Y`
/// bit-for-bit whenever no increment crosses the threshold.
pub fn decompose_by_jump_threshold(y: &[f64], sigma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let threshold = 0.5 / sigma;
    let mut y2 = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for (k, &v) in y.iter().enumerate() {
        if k > 0 {
            let d = v - y[k - 1];
            if d.abs() >= threshold {
                acc += d;
            }
        }
        y2.push(acc);
    }
    let y1 = y.iter().zip(&y2).map(|(a, b)| a - b).collect();
    Ok((y1, y2))
}
