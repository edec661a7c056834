//! Volterra kernels and the derived weights `z(t,u) = ∫ᵤᵗ l(s,u) ds` and
//! `y(t,u) = 1 - z(t,u)`.
//!
//! Kernels vanish above the diagonal (`s > t`), so `z(t,u) = 0` and
//! `y(t,u) = 1` whenever `u ≥ t`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, DEFAULT_BUDGET};

/// Grid points per axis used by [`sup_bound`] when a kernel has no analytic
/// supremum.
pub const DEFAULT_SUP_GRID: usize = 10_000;

/// Tolerance used when the closed form of `z` is unavailable.
pub const DEFAULT_QUAD_TOL: f64 = 1e-12;

/// A bounded Volterra kernel `l(t,s)` on `[0,T]²`.
pub trait VolterraKernel: fmt::Debug + Send + Sync {
    fn horizon(&self) -> f64;

    /// `l(t,s)` for `0 ≤ s ≤ t ≤ T`. Callers handle `s > t`.
    fn value(&self, t: f64, s: f64) -> f64;

    /// `∫ᵤᵗ l(s,u) ds` for `u ≤ t`, when an exact expression is known.
    fn closed_form_z(&self, _t: f64, _u: f64) -> Option<f64> {
        None
    }

    /// Exact `sup |l|` over the domain, when known.
    fn analytic_sup(&self) -> Option<f64> {
        None
    }

    /// Parameters of the exponential memory kernel, for engines that exploit
    /// its structure.
    fn memory_params(&self) -> Option<MemoryKernelParams> {
        None
    }
}

/// The exponential memory kernel
/// `l(t,s) = p·e^{-(p+q)(t-s)}·g(s)` with
/// `g(s) = 1 - 2pq / ((2q+p)² e^{2qs} - p²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemoryKernelParams {
    pub p: f64,
    pub q: f64,
    pub horizon: f64,
}

impl MemoryKernelParams {
    pub fn new(p: f64, q: f64, horizon: f64) -> Result<Self> {
        let params = Self { p, q, horizon };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { p, q, horizon } = *self;
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q must be positive and finite, got {q}")));
        }
        if !(p > -q && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must exceed -q = {}, got {p}", -q)));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(())
    }

    /// Decay rate `p + q` of the exponential factor.
    pub fn decay_rate(&self) -> f64 {
        self.p + self.q
    }

    /// The bracket `g(s)`.
    pub fn weight(&self, s: f64) -> f64 {
        let (p, q) = (self.p, self.q);
        let denom = (2.0 * q + p).powi(2) * (2.0 * q * s).exp() - p * p;
        debug_assert!(denom > 0.0, "denominator of g vanished at s = {s}");
        1.0 - 2.0 * p * q / denom
    }

    /// `l(t,s)`, zero above the diagonal.
    pub fn l(&self, t: f64, s: f64) -> Result<f64> {
        self.validate()?;
        check_domain(self.horizon, t, s)?;
        Ok(if s > t { 0.0 } else { self.value(t, s) })
    }

    /// `z(t,u)` in closed form, zero for `u ≥ t`.
    pub fn z(&self, t: f64, u: f64) -> Result<f64> {
        self.validate()?;
        check_domain(self.horizon, t, u)?;
        Ok(if u >= t { 0.0 } else { self.z_unchecked(t, u) })
    }

    fn z_unchecked(&self, t: f64, u: f64) -> f64 {
        if self.p == 0.0 {
            return 0.0;
        }
        let k = self.decay_rate();
        self.weight(u) * (self.p / k) * -(-k * (t - u)).exp_m1()
    }
}

impl VolterraKernel for MemoryKernelParams {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, t: f64, s: f64) -> f64 {
        if self.p == 0.0 {
            return 0.0;
        }
        self.p * (-self.decay_rate() * (t - s)).exp() * self.weight(s)
    }

    fn closed_form_z(&self, t: f64, u: f64) -> Option<f64> {
        Some(self.z_unchecked(t, u))
    }

    fn analytic_sup(&self) -> Option<f64> {
        // g is monotone in s and the exponential factor peaks on the diagonal
        let g = self.weight(0.0).abs().max(self.weight(self.horizon).abs());
        Some(self.p.abs() * g)
    }

    fn memory_params(&self) -> Option<MemoryKernelParams> {
        Some(*self)
    }
}

/// `l(t,s) = c` on `0 ≤ s ≤ t ≤ T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantKernel {
    pub c: f64,
    pub horizon: f64,
}

impl ConstantKernel {
    pub fn new(c: f64, horizon: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("kernel level must be finite, got {c}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { c, horizon })
    }
}

impl VolterraKernel for ConstantKernel {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value(&self, _t: f64, _s: f64) -> f64 {
        self.c
    }

    fn closed_form_z(&self, t: f64, u: f64) -> Option<f64> {
        Some(self.c * (t - u))
    }

    fn analytic_sup(&self) -> Option<f64> {
        Some(self.c.abs())
    }
}

fn check_domain(horizon: f64, t: f64, s: f64) -> Result<()> {
    let slack = 1e-12 * horizon.max(1.0);
    let inside = |x: f64| x >= -slack && x <= horizon + slack;
    if inside(t) && inside(s) {
        Ok(())
    } else {
        Err(Error::Domain(format!("({t}, {s}) is outside [0, {horizon}]²")))
    }
}

/// Upper bound for `sup_{0≤s≤t≤T} |l(t,s)|`.
///
/// Samples a `grid_resolution × grid_resolution` triangular grid and returns
/// the larger of the grid maximum and the kernel's analytic supremum, so the
/// result dominates every grid sample.
pub fn sup_bound(kernel: &dyn VolterraKernel, grid_resolution: usize) -> Result<f64> {
    if grid_resolution < 2 {
        return Err(Error::InvalidParameter(format!("grid resolution must be at least 2, got {grid_resolution}")));
    }
    let horizon = kernel.horizon();
    let h = horizon / (grid_resolution - 1) as f64;
    let grid_max = (0..grid_resolution)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 * h;
            (0..=i).map(|j| kernel.value(t, j as f64 * h).abs()).fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(kernel.analytic_sup().map_or(grid_max, |s| s.max(grid_max)))
}

/// A kernel together with its supremum bound `M` and Lipschitz constant `C`
/// for `t ↦ z(t,u)`. The canonical choice `C = M` is used throughout.
#[derive(Clone)]
pub struct KernelModel {
    inner: Arc<dyn VolterraKernel>,
    sup_bound: f64,
    lipschitz: f64,
}

impl fmt::Debug for KernelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelModel")
            .field("kernel", &self.inner)
            .field("sup_bound", &self.sup_bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl KernelModel {
    pub fn memory(p: f64, q: f64, horizon: f64) -> Result<Self> {
        Self::new(MemoryKernelParams::new(p, q, horizon)?)
    }

    pub fn constant(c: f64, horizon: f64) -> Result<Self> {
        Self::new(ConstantKernel::new(c, horizon)?)
    }

    /// Wraps any kernel. Kernels without an analytic supremum are scanned on a
    /// [`DEFAULT_SUP_GRID`] grid.
    pub fn new<K: VolterraKernel + 'static>(kernel: K) -> Result<Self> {
        let sup = match kernel.analytic_sup() {
            Some(s) => s,
            None => sup_bound(&kernel, DEFAULT_SUP_GRID)?,
        };
        if !sup.is_finite() {
            return Err(Error::InvalidParameter("kernel is unbounded on its domain".into()));
        }
        Ok(Self { inner: Arc::new(kernel), sup_bound: sup, lipschitz: sup })
    }

    pub fn kernel(&self) -> &dyn VolterraKernel {
        self.inner.as_ref()
    }

    pub fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    /// The bound `M ≥ sup |l|`.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// `C` with `|z(t₁,u) - z(t₂,u)| ≤ C|t₁ - t₂|`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn memory_params(&self) -> Option<MemoryKernelParams> {
        self.inner.memory_params()
    }

    pub fn eval_l(&self, t: f64, s: f64) -> Result<f64> {
        check_domain(self.horizon(), t, s)?;
        Ok(if s > t { 0.0 } else { self.inner.value(t, s) })
    }

    /// `z(t,u)`: closed form where the kernel provides one, adaptive
    /// quadrature otherwise.
    pub fn eval_z(&self, t: f64, u: f64) -> Result<f64> {
        check_domain(self.horizon(), t, u)?;
        if u >= t {
            return Ok(0.0);
        }
        match self.inner.closed_form_z(t, u) {
            Some(z) => Ok(z),
            None => self.integrate_z(t, u, DEFAULT_QUAD_TOL),
        }
    }

    pub fn eval_y(&self, t: f64, u: f64) -> Result<f64> {
        self.eval_z(t, u).map(|z| 1.0 - z)
    }

    /// `∫ᵤᵗ l(s,u) ds` by adaptive quadrature, independent of any closed form.
    pub fn quad_z(&self, t: f64, u: f64, tol: f64) -> Result<f64> {
        check_domain(self.horizon(), t, u)?;
        if u >= t {
            return Ok(0.0);
        }
        self.integrate_z(t, u, tol)
    }

    fn integrate_z(&self, t: f64, u: f64, tol: f64) -> Result<f64> {
        let k = &self.inner;
        adaptive_simpson(|s| k.value(s, u), u, t, tol, DEFAULT_BUDGET)
    }
}

/// Serializable kernel description used in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Memory { p: f64, q: f64 },
    Constant { c: f64 },
}

impl KernelSpec {
    pub fn build(&self, horizon: f64) -> Result<KernelModel> {
        match *self {
            KernelSpec::Memory { p, q } => KernelModel::memory(p, q, horizon),
            KernelSpec::Constant { c } => KernelModel::constant(c, horizon),
        }
    }
}
