//! Property-based invariants across kernels, engines and markets.

use memmarket::arbitrage::{exact_pn, violation_step, DEFAULT_ENUMERATION_BUDGET};
use memmarket::convergence::{discrete_covariance_matrix, increment_fourth_moment_ratio};
use memmarket::market::{is_arbitrage_free_exact, risk_neutral_step_prob, step_bounds, Verdict};
use memmarket::processes::{
    decompose_by_jump_threshold, quadratic_variation, sample_y_direct, sample_y_fast, Engine, EngineChoice,
};
use memmarket::rng::{sample_innovations, InnovationSpec};
use memmarket::{CoefficientTable, KernelModel, MarketParams, MemoryKernelParams};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn memory_params() -> impl Strategy<Value = (f64, f64)> {
    (0.05f64..3.0).prop_flat_map(|q| (-0.95 * q..3.0, Just(q)))
}

fn signs(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![Just(-1.0), Just(1.0)], len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn y_is_lipschitz_in_time((p, q) in memory_params(), a in 0.0f64..1.0, b in 0.0f64..1.0, u in 0.0f64..1.0) {
        let kernel = KernelModel::memory(p, q, 1.0).unwrap();
        let lhs = (kernel.eval_y(a, u).unwrap() - kernel.eval_y(b, u).unwrap()).abs();
        prop_assert!(lhs <= kernel.lipschitz() * (a - b).abs() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn z_vanishes_above_the_diagonal((p, q) in memory_params(), t in 0.0f64..1.0, gap in 0.0f64..1.0) {
        let kernel = KernelModel::memory(p, q, 1.0).unwrap();
        let u = (t + gap).min(1.0);
        prop_assert_eq!(kernel.eval_z(t, u).unwrap(), 0.0);
        prop_assert_eq!(kernel.eval_y(t, u).unwrap(), 1.0);
    }

    #[test]
    fn fast_and_direct_engines_agree((p, q) in memory_params(), n in 1usize..200, seed in any::<u64>()) {
        let params = MemoryKernelParams::new(p, q, 1.0).unwrap();
        let table = CoefficientTable::build(&KernelModel::memory(p, q, 1.0).unwrap(), n, 1.0).unwrap();
        let xi = sample_innovations(&InnovationSpec::rademacher(seed, 0), n);
        let fast = sample_y_fast(params, n, 1.0, &xi).unwrap();
        let direct = sample_y_direct(&table, &xi).unwrap();
        for (a, b) in fast.iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
        }
    }

    #[test]
    fn spread_is_twice_the_half_spread(c in 0.0f64..3.0, n in 2usize..40, sigma in 0.01f64..2.0, prefix in signs(39)) {
        let kernel = KernelModel::constant(c, 1.0).unwrap();
        let table = CoefficientTable::build(&kernel, n, 1.0).unwrap();
        let params = MarketParams::new(n, 1.0, 0.05, 0.03, sigma, 1.0).unwrap();
        let step = 1 + prefix.len() % n;
        let bounds = step_bounds(&table, &params, &prefix[..step - 1]).unwrap();
        let h = params.half_spread();
        prop_assert!((bounds.up - bounds.down - 2.0 * h).abs() <= 4.0 * f64::EPSILON * (bounds.mu.abs() + h));
    }

    #[test]
    fn verdict_depends_only_on_the_rate_gap(
        (p, q) in memory_params(), n in 1usize..60, r in -1.0f64..1.0, b in -1.0f64..1.0, shift in -1.0f64..1.0,
    ) {
        let kernel = KernelModel::memory(p, q, 1.0).unwrap();
        let table = CoefficientTable::build(&kernel, n, 1.0).unwrap();
        let base = is_arbitrage_free_exact(&table, &MarketParams::new(n, 1.0, r, b, 0.1, 1.0).unwrap()).unwrap();
        let moved =
            is_arbitrage_free_exact(&table, &MarketParams::new(n, 1.0, r + shift, b + shift, 0.1, 1.0).unwrap()).unwrap();
        let h = 0.1 / (n as f64).sqrt();
        // identical up to the rounding of r - b
        if base.min_margin.abs() > 1e-9 * h {
            prop_assert_eq!(base.verdict, moved.verdict);
        }
        prop_assert!((base.min_margin - moved.min_margin).abs() <= 1e-12);
    }

    #[test]
    fn brownian_market_is_free_iff_gap_below_sigma_root_n(n in 1usize..500, gap in 0.0f64..10.0, sigma in 0.01f64..1.0) {
        let kernel = KernelModel::memory(0.0, 1.0, 1.0).unwrap();
        let table = CoefficientTable::build(&kernel, n, 1.0).unwrap();
        let params = MarketParams::new(n, 1.0, gap, 0.0, sigma, 1.0).unwrap();
        let threshold = sigma * (n as f64).sqrt();
        prop_assume!((gap - threshold).abs() > 1e-9 * threshold);
        let free = is_arbitrage_free_exact(&table, &params).unwrap().verdict == Verdict::Free;
        prop_assert_eq!(free, gap < threshold);
    }

    #[test]
    fn risk_neutral_probability_is_a_martingale_weight(
        (p, q) in memory_params(), n in 2usize..60, prefix in signs(59), gap in -0.05f64..0.05,
    ) {
        let kernel = KernelModel::memory(p, q, 1.0).unwrap();
        let table = CoefficientTable::build(&kernel, n, 1.0).unwrap();
        let params = MarketParams::new(n, 1.0, 0.03 + gap, 0.03, 0.2, 1.0).unwrap();
        let step = 1 + prefix.len() % n;
        let bounds = step_bounds(&table, &params, &prefix[..step - 1]).unwrap();
        if let Ok(prob) = risk_neutral_step_prob(&bounds, &params) {
            prop_assert!(prob > 0.0 && prob < 1.0);
            let mean = prob * bounds.up + (1.0 - prob) * bounds.down;
            prop_assert!((mean - params.rho()).abs() <= 1e-14);
        }
    }

    #[test]
    fn quadratic_variation_is_nondecreasing((p, q) in memory_params(), n in 1usize..300, seed in any::<u64>()) {
        let engine = Engine::for_kernel(&KernelModel::memory(p, q, 1.0).unwrap(), n, 1.0, EngineChoice::Auto).unwrap();
        let path = engine.simulate(&InnovationSpec::rademacher(seed, 1)).unwrap();
        let qv = quadratic_variation(&path.y);
        prop_assert!(qv.windows(2).all(|w| w[1] >= w[0]));
        let wqv = path.w_quadratic_variation();
        prop_assert!(wqv.iter().enumerate().all(|(k, &v)| v == k as f64 / n as f64));
    }

    #[test]
    fn decomposition_adds_back_up(
        (p, q) in memory_params(), n in 1usize..200, seed in any::<u64>(), sigma in 0.1f64..20.0,
    ) {
        let engine = Engine::for_kernel(&KernelModel::memory(p, q, 1.0).unwrap(), n, 1.0, EngineChoice::Auto).unwrap();
        let path = engine.simulate(&InnovationSpec::rademacher(seed, 2)).unwrap();
        let (y1, y2) = decompose_by_jump_threshold(&path.y, sigma).unwrap();
        for k in 0..path.y.len() {
            prop_assert!((y1[k] + y2[k] - path.y[k]).abs() <= 8.0 * f64::EPSILON * path.y[k].abs().max(1.0));
            if y2.iter().all(|&v| v == 0.0) {
                prop_assert_eq!(y1[k], path.y[k]);
            }
        }
    }

    #[test]
    fn equal_rates_make_violations_sign_symmetric(c in 0.0f64..4.0, n in 2usize..30, xi in signs(29)) {
        let kernel = KernelModel::constant(c, 1.0).unwrap();
        let table = CoefficientTable::build(&kernel, n, 1.0).unwrap();
        let params = MarketParams::new(n, 1.0, 0.03, 0.03, 0.2, 1.0).unwrap();
        let xi = &xi[..n - 1];
        let flipped: Vec<f64> = xi.iter().map(|x| -x).collect();
        prop_assert_eq!(
            violation_step(&table, &params, xi).unwrap(),
            violation_step(&table, &params, &flipped).unwrap()
        );
    }

    #[test]
    fn discrete_covariance_is_positive_semidefinite(
        (p, q) in memory_params(), n in 1usize..200, times in proptest::collection::vec(0.01f64..1.0, 1..6),
    ) {
        let kernel = KernelModel::memory(p, q, 1.0).unwrap();
        let cov = discrete_covariance_matrix(&kernel, n, &times).unwrap();
        let d = times.len();
        let matrix = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        let smallest = SymmetricEigen::new(matrix).eigenvalues.min();
        prop_assert!(smallest >= -1e-10, "{}", smallest);
    }
}

#[test]
fn equal_rates_histogram_matches_either_half_of_the_tree() {
    // r = b: the first-violation law of a prefix and its negation coincide,
    // so the histogram built from either half of the tree is the same
    let kernel = KernelModel::constant(2.0, 1.0).unwrap();
    let table = CoefficientTable::build(&kernel, 10, 1.0).unwrap();
    let params = MarketParams::new(10, 1.0, 0.03, 0.03, 0.2, 1.0).unwrap();
    let report = exact_pn(&table, &params, DEFAULT_ENUMERATION_BUDGET).unwrap();
    let mut half = std::collections::BTreeMap::new();
    for bits in 0u32..(1 << 8) {
        let mut xi: Vec<f64> = (0..8).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        xi.insert(0, 1.0);
        if let Some(step) = violation_step(&table, &params, &xi).unwrap() {
            *half.entry(step).or_insert(0.0) += 1.0 / 256.0;
        }
    }
    for (step, mass) in &report.histogram {
        assert_eq!(half.get(step).copied().unwrap_or(0.0), *mass, "step {step}");
    }
}

#[test]
fn fourth_moment_ratio_stays_bounded_under_refinement() {
    let kernel = KernelModel::memory(1.0, 1.0, 1.0).unwrap();
    let coarse = Engine::for_kernel(&kernel, 64, 1.0, EngineChoice::Auto).unwrap();
    let fine = Engine::for_kernel(&kernel, 256, 1.0, EngineChoice::Auto).unwrap();
    let r64 = increment_fourth_moment_ratio(&coarse, 10_000, 11).unwrap();
    let r256 = increment_fourth_moment_ratio(&fine, 10_000, 11).unwrap();
    assert!(r256 <= 3.0 * r64, "{r256} vs {r64}");
}
