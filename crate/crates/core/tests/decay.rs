//! Decay of the arbitrage probability on a kernel whose markets do admit
//! arbitrage at small `N`.

use memmarket::arbitrage::{decay_fit, mc_pn};
use memmarket::processes::{Engine, EngineChoice};
use memmarket::{Error, KernelModel, MarketParams};

fn estimates(kernel: &KernelModel, horizon: f64, n_list: &[usize], trials: u64) -> Vec<(f64, f64)> {
    n_list
        .iter()
        .map(|&n| {
            let params = MarketParams::new(n, horizon, 0.03, 0.03, 0.2, 1.0).unwrap();
            let engine = Engine::for_kernel(kernel, n, horizon, EngineChoice::Auto).unwrap();
            (n as f64, mc_pn(&engine, &params, trials, 42).unwrap().p_hat)
        })
        .collect()
}

#[test]
fn constant_kernel_probability_decays_faster_than_root_n() {
    let kernel = KernelModel::constant(2.0, 1.0).unwrap();
    let points = estimates(&kernel, 1.0, &[8, 12, 16, 24, 32], 100_000);
    let fit = decay_fit(&points).unwrap();
    assert!(fit.slope <= -0.5, "{points:?}: slope {}", fit.slope);
    let (n_top, p_top) = points.iter().copied().fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let c = p_top * n_top.sqrt();
    assert!(points.iter().all(|&(n, p)| p <= c / n.sqrt()), "{points:?}");
}

#[test]
fn memory_kernel_with_equal_rates_never_admits_arbitrage() {
    // Σ|δ| < p/(p+q) < 1 at every step, so ρ = 0 sits strictly inside (d, u)
    let kernel = KernelModel::memory(1.0, 1.0, 3.0).unwrap();
    let points = estimates(&kernel, 3.0, &[8, 16, 32], 20_000);
    assert!(points.iter().all(|&(_, p)| p == 0.0));
    assert_eq!(decay_fit(&points).unwrap_err(), Error::IdenticallyZero);
}
