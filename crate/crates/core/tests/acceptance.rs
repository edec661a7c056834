//! Acceptance suite. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p memmarket-core --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use memmarket::arbitrage::{
    decay_fit, exact_pn, extract_strategy, mc_pn, verify_strategy, violation_step, DEFAULT_ENUMERATION_BUDGET,
};
use memmarket::convergence::{
    fdd_distance, qv_convergence, terminal_price_convergence, variance_discrepancy, Band, PriceModel,
};
use memmarket::market::{is_arbitrage_free_exact, sufficient_n0, Verdict};
use memmarket::processes::{sample_y_direct, sample_y_fast, Engine, EngineChoice};
use memmarket::rng::{sample_innovations, InnovationSpec};
use memmarket::{CoefficientTable, KernelModel, MarketParams, MemoryKernelParams};
use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

fn verdict(id: u32, name: &str, start: Instant, budget: Duration, pass: bool, detail: String) {
    let elapsed = start.elapsed();
    let within = elapsed <= budget;
    let ok = pass && within;
    println!(
        "criterion {id:>2} {name}: {} ({detail}; {:.2}s of {}s)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
    assert!(within, "criterion {id} ({name}) exceeded its runtime budget");
}

#[test]
fn criterion_01_kernel_oracle() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (p, q) in [(1.0, 1.0), (0.5, 2.0), (-0.5, 1.0), (3.0, 0.25)] {
        let kernel = KernelModel::memory(p, q, 1.0).unwrap();
        for a in 0..=100 {
            for b in 0..=100 {
                let (t, u) = (a as f64 / 100.0, b as f64 / 100.0);
                let closed = kernel.eval_z(t, u).unwrap();
                let quad = kernel.quad_z(t, u, 1e-12).unwrap();
                worst = worst.max((closed - quad).abs());
            }
        }
    }
    verdict(1, "kernel oracle", start, Duration::from_secs(10), worst <= 1e-9, format!("max |z - quad| = {worst:.3e}"));
}

#[test]
fn criterion_02_engine_equivalence() {
    let start = Instant::now();
    let mut rng = Xoshiro256StarStar::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut configs = 0;
    for seed in 0..25u64 {
        for n in [4usize, 16, 64, 256] {
            let q = rng.random_range(0.1..3.0);
            let p = rng.random_range(-0.9 * q..3.0);
            let horizon = [0.5, 1.0, 2.0][rng.random_range(0..3)];
            let params = MemoryKernelParams::new(p, q, horizon).unwrap();
            let kernel = KernelModel::memory(p, q, horizon).unwrap();
            let table = CoefficientTable::build(&kernel, n, horizon).unwrap();
            let xi = sample_innovations(&InnovationSpec::rademacher(seed, n as u64), table.steps());
            let fast = sample_y_fast(params, n, horizon, &xi).unwrap();
            let direct = sample_y_direct(&table, &xi).unwrap();
            assert_eq!(fast.len(), direct.len());
            for (a, b) in fast.iter().zip(&direct) {
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
            }
            configs += 1;
        }
    }
    verdict(
        2,
        "engine equivalence",
        start,
        Duration::from_secs(30),
        configs == 100 && worst <= 1e-10,
        format!("{configs} configurations, max relative gap {worst:.3e}"),
    );
}

/// Checks `d_n < ρ < u_n` on every prefix of every step, with `y` evaluated
/// straight from the kernel. Ties within `1e-12·σ/√N` count as violations.
fn brute_force_free(kernel: &KernelModel, params: &MarketParams) -> bool {
    let nf = params.n as f64;
    let m = params.steps();
    let h = params.sigma / nf.sqrt();
    let rho = (params.r - params.b) / nf;
    let slack = 1e-12 * h;
    for n in 1..=m {
        let coeff: Vec<f64> = (1..n)
            .map(|i| {
                let u = i as f64 / nf;
                kernel.eval_y(n as f64 / nf, u).unwrap() - kernel.eval_y((n - 1) as f64 / nf, u).unwrap()
            })
            .collect();
        for bits in 0u32..(1 << (n - 1)) {
            let memory: f64 = coeff.iter().enumerate().map(|(i, c)| if bits >> i & 1 == 1 { *c } else { -*c }).sum();
            let down = h * memory - h;
            let up = h * memory + h;
            if !(down < rho - slack && rho + slack < up) {
                return false;
            }
        }
    }
    true
}

#[test]
fn criterion_03_exact_checker_soundness() {
    let start = Instant::now();
    let kernels: Vec<(&str, f64, KernelModel)> = [1.0, 2.0]
        .iter()
        .flat_map(|&horizon| {
            vec![
                ("brownian", horizon, KernelModel::memory(0.0, 1.0, horizon).unwrap()),
                ("constant 0.5", horizon, KernelModel::constant(0.5, horizon).unwrap()),
                ("constant 2", horizon, KernelModel::constant(2.0, horizon).unwrap()),
                ("constant 3", horizon, KernelModel::constant(3.0, horizon).unwrap()),
                ("memory 1,1", horizon, KernelModel::memory(1.0, 1.0, horizon).unwrap()),
                ("memory 3,0.25", horizon, KernelModel::memory(3.0, 0.25, horizon).unwrap()),
                ("memory -0.5,1", horizon, KernelModel::memory(-0.5, 1.0, horizon).unwrap()),
            ]
        })
        .collect();
    let rates = [(0.05, 0.03), (0.03, 0.05), (0.04, 0.04), (1.0, 0.0), (0.0, 0.9)];
    let (mut total, mut agree, mut free, mut arbitrage) = (0, 0, 0, 0);
    for (name, horizon, kernel) in &kernels {
        for n in [2usize, 3, 4, 6, 8, 12] {
            for &(r, b) in &rates {
                for sigma in [0.1, 0.5] {
                    let Ok(params) = MarketParams::new(n, *horizon, r, b, sigma, 1.0) else { continue };
                    if params.steps() > 12 {
                        continue;
                    }
                    let table = CoefficientTable::build(kernel, n, *horizon).unwrap();
                    let cert = is_arbitrage_free_exact(&table, &params).unwrap();
                    let oracle = brute_force_free(kernel, &params);
                    total += 1;
                    if (cert.verdict == Verdict::Free) == oracle {
                        agree += 1;
                    } else {
                        println!("  disagreement: {name} T={horizon} N={n} r={r} b={b} sigma={sigma}");
                    }
                    if oracle {
                        free += 1;
                    } else {
                        arbitrage += 1;
                    }
                }
            }
        }
    }
    verdict(
        3,
        "exact-checker soundness",
        start,
        Duration::from_secs(60),
        total >= 50 && agree == total && free > 0 && arbitrage > 0,
        format!("{agree}/{total} configurations agree ({free} free, {arbitrage} with arbitrage)"),
    );
}

#[test]
fn criterion_04_sufficient_condition() {
    let start = Instant::now();
    let kernel = KernelModel::memory(1.0, 1.0, 0.5).unwrap();
    let params = MarketParams::new(2, 0.5, 0.05, 0.03, 0.1, 1.0).unwrap();
    let n0 = sufficient_n0(&params, kernel.lipschitz()).unwrap();
    // a lattice with ⌊NT⌋ = 0 has no trading period and is vacuously free
    let empty: Vec<u64> = (n0..=n0 + 50).filter(|&n| (n as f64 * 0.5) < 1.0).collect();
    let failures: Vec<u64> = (n0..=n0 + 50)
        .filter(|n| !empty.contains(n))
        .filter(|&n| {
            let p = params.with_n(n as usize);
            let table = CoefficientTable::build(&kernel, n as usize, 0.5).unwrap();
            is_arbitrage_free_exact(&table, &p).unwrap().verdict != Verdict::Free
        })
        .collect();
    verdict(
        4,
        "free beyond N0",
        start,
        Duration::from_secs(30),
        failures.is_empty(),
        format!("N0 = {n0}, T·C = {:.6}, empty lattices {empty:?}, non-free N: {failures:?}", 0.5 * kernel.lipschitz()),
    );
}

#[test]
fn criterion_05_arbitrage_construction() {
    let start = Instant::now();
    let kernel = KernelModel::constant(2.0, 1.0).unwrap();
    let params = MarketParams::new(20, 1.0, 0.03, 0.03, 0.2, 1.0).unwrap();
    let table = CoefficientTable::build(&kernel, 20, 1.0).unwrap();
    let down = vec![-1.0; params.steps() - 1];
    let step = violation_step(&table, &params, &down).unwrap();
    let verified = step.is_some_and(|step| {
        extract_strategy(&table, &params, &down[..step - 1], step)
            .map(|w| verify_strategy(&w, &table, &params) && w.payoff_down.max(w.payoff_up) > 0.0)
            .unwrap_or(false)
    });
    verdict(
        5,
        "arbitrage construction",
        start,
        Duration::from_secs(1),
        step == Some(11) && verified,
        format!("first violation at {step:?}, witness verified: {verified}"),
    );
}

#[test]
fn criterion_06_exact_probability() {
    let start = Instant::now();
    let kernel = KernelModel::constant(2.0, 1.0).unwrap();
    let params = MarketParams::new(8, 1.0, 0.03, 0.03, 0.2, 1.0).unwrap();
    let table = CoefficientTable::build(&kernel, 8, 1.0).unwrap();
    let exact = exact_pn(&table, &params, DEFAULT_ENUMERATION_BUDGET).unwrap();

    let m = params.steps();
    let mut hits = 0u32;
    for bits in 0u32..(1 << (m - 1)) {
        let xi: Vec<f64> = (0..m - 1).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        if violation_step(&table, &params, &xi).unwrap().is_some() {
            hits += 1;
        }
    }
    let full = hits as f64 / (1u32 << (m - 1)) as f64;

    let engine = Engine::for_kernel(&kernel, 8, 1.0, EngineChoice::Auto).unwrap();
    let mc = mc_pn(&engine, &params, 100_000, 6).unwrap();
    let [lo, hi] = mc.wilson(0.99);
    let pass = exact.p_hat == 0.25 && exact.p_hat.to_bits() == full.to_bits() && lo <= 0.25 && 0.25 <= hi;
    verdict(
        6,
        "exact arbitrage probability",
        start,
        Duration::from_secs(10),
        pass,
        format!("pruned {}, full {full}, Monte Carlo {} with 99% interval [{lo:.5}, {hi:.5}]", exact.p_hat, mc.p_hat),
    );
}

#[test]
fn criterion_07_decay_consistency() {
    let start = Instant::now();
    let horizon = 3.0;
    let kernel = KernelModel::memory(1.0, 1.0, horizon).unwrap();
    let mut points = Vec::new();
    for n in [8usize, 12, 16, 24, 32] {
        let params = MarketParams::new(n, horizon, 0.03, 0.03, 0.1, 1.0).unwrap();
        let engine = Engine::for_kernel(&kernel, n, horizon, EngineChoice::Auto).unwrap();
        let report = mc_pn(&engine, &params, 100_000, 7).unwrap();
        points.push((n as f64, report.p_hat));
    }
    let (pass, detail) = match decay_fit(&points) {
        Ok(fit) => {
            // C' taken from the point with the largest estimate
            let (n_top, p_top) = points.iter().copied().fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            let c = p_top * n_top.sqrt();
            let bounded = points.iter().all(|&(n, p)| p <= c / n.sqrt());
            (fit.slope <= -0.5 && bounded, format!("slope {:.4}, bounded by C'/N^0.5: {bounded}", fit.slope))
        }
        Err(e) => (false, format!("estimates {points:?}; no slope: {e}")),
    };
    verdict(7, "decay consistency", start, Duration::from_secs(180), pass, detail);
}

#[test]
fn criterion_08_variance_convergence() {
    let start = Instant::now();
    let kernel = KernelModel::memory(1.0, 1.0, 1.0).unwrap();
    let n_list = [50, 100, 200, 400, 800, 1600, 3200];
    let report = variance_discrepancy(&kernel, &[1.0], &n_list, &[Band::Slope { lo: -1.2, hi: -0.8 }]).unwrap();
    verdict(
        8,
        "variance convergence",
        start,
        Duration::from_secs(30),
        report.passed,
        format!("slope {:?}, discrepancies {:?}", report.slope, report.discrepancies),
    );
}

#[test]
fn criterion_09_quadratic_variation() {
    let start = Instant::now();
    let kernel = KernelModel::memory(1.0, 1.0, 1.0).unwrap();
    let bands = [Band::AtMost { value: 0.05, n: Some(1000) }, Band::NonIncreasing { z: 1.96 }];
    let report = qv_convergence(&kernel, &[250, 500, 1000], 200, 9, &bands).unwrap();

    let brownian = KernelModel::memory(0.0, 1.0, 1.0).unwrap();
    let mut exact = true;
    for n in [250usize, 1000] {
        let engine = Engine::for_kernel(&brownian, n, 1.0, EngineChoice::Auto).unwrap();
        for i in 0..200 {
            let path = engine.simulate(&InnovationSpec::rademacher(9, i)).unwrap();
            let qv = path.w_quadratic_variation();
            exact &= qv.iter().enumerate().all(|(k, &v)| v == k as f64 / n as f64);
        }
    }
    verdict(
        9,
        "quadratic variation",
        start,
        Duration::from_secs(120),
        report.passed && exact,
        format!("E sup|[Y]_t - t| = {:?} (s.e. {:?}), [W] identity exact: {exact}", report.discrepancies, report.noise),
    );
}

#[test]
fn criterion_10_weak_convergence() {
    let start = Instant::now();
    let kernel = KernelModel::memory(1.0, 1.0, 1.0).unwrap();
    let fdd = fdd_distance(&kernel, 1.0, 2000, 10_000, 10).unwrap();
    let model = PriceModel { horizon: 1.0, b: 0.05, sigma: 0.2, s0: 1.0 };
    let prices =
        terminal_price_convergence(&model, &kernel, &[250, 1000, 4000], 10_000, 10, &[Band::NonIncreasing { z: 0.5 }])
            .unwrap();
    verdict(
        10,
        "weak convergence",
        start,
        Duration::from_secs(180),
        fdd <= 0.03 && prices.passed,
        format!(
            "KS(Y_1) = {fdd:.4}, KS(S_T) along n = {:.4?} (99% critical value {:.4})",
            prices.discrepancies, prices.noise[0]
        ),
    );
}
