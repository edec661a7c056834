//! Binary market models driven by a Gaussian process with Volterra memory.
//!
//! The crate builds the lattice approximation of the driving process
//! `Y_t = W_t - ∫₀ᵗ ∫₀ˢ l(s,u) dW_u ds`, the resulting `⌊NT⌋`-period binary
//! market, and tooling to certify or refute absence of arbitrage, measure the
//! arbitrage probability and check the weak-convergence behaviour of the
//! approximation numerically.
//!
//! Module map:
//!
//! - [`kernel`]: Volterra kernels, `z(t,u)`, `y(t,u)` and their bounds.
//! - [`processes`]: coefficient lattice, path engines, price products and
//!   path functionals.
//! - [`market`]: move bounds, the exact no-arbitrage certificate and the
//!   minimal period count for the sufficient condition.
//! - [`arbitrage`]: exact and Monte Carlo arbitrage probability, decay fits and
//!   one-step arbitrage witnesses.
//! - [`convergence`]: finite-`n` diagnostics against the continuous limits.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod convergence;
mod error;
pub mod kernel;
pub mod market;
pub mod processes;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use kernel::{ConstantKernel, KernelModel, MemoryKernelParams, VolterraKernel};
pub use market::MarketParams;
pub use processes::CoefficientTable;

/// `⌊x⌋` for lattice counts such as `⌊nt⌋`.
///
/// Products like `0.29 * 100.0` land a few ulps below the integer they
/// represent; a relative slack of `1e-9` absorbs that before flooring.
pub fn lattice_floor(x: f64) -> usize {
    if x <= 0.0 {
        return 0;
    }
    (x + 1e-9 * x.max(1.0)).floor() as usize
}
