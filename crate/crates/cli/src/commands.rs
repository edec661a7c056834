//! The four subcommands. Each writes its primary artifacts plus
//! `config_echo.json` into the output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use memmarket::arbitrage::{
    decay_fit, decay_n_alpha, exact_pn, extract_strategy, mc_pn, verify_strategy, violation_step, ArbitrageReport,
};
use memmarket::convergence::{
    fdd_convergence, jump_convergence, qv_convergence, terminal_price_convergence, variance_discrepancy,
    ConvergenceReport,
};
use memmarket::market::{is_arbitrage_free_exact, sufficient_n0, Verdict};
use memmarket::processes::{fmt17, Engine};
use memmarket::rng::{sample_innovations, InnovationSpec};
use memmarket::{CoefficientTable, KernelModel, MarketParams};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ArbitrageMode, RunConfig, Statistic};
use crate::error::CliError;

/// Outcome of a command that completed without error.
pub enum Outcome {
    Ok,
    BandFailure,
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn prepare(config: &RunConfig) -> Result<&Path, CliError> {
    config.validate()?;
    let dir = config.output.dir.as_path();
    fs::create_dir_all(dir)?;
    write_json(dir, "config_echo.json", config)?;
    Ok(dir)
}

pub fn kernel_table(config: &RunConfig) -> Result<Outcome, CliError> {
    let dir = prepare(config)?;
    let kernel = config.kernel()?;
    let g = config.experiment.grid;
    let horizon = config.market.horizon;
    let points: Vec<f64> = (0..g).map(|i| horizon * i as f64 / (g - 1) as f64).collect();
    let rows = points
        .par_iter()
        .map(|&t| {
            points
                .iter()
                .map(|&u| {
                    // l is only defined on s ≥ u; the table reports 0 above the diagonal
                    let l = if u > t { 0.0 } else { kernel.eval_l(t, u)? };
                    Ok(format!(
                        "{},{},{},{},{}",
                        fmt17(t),
                        fmt17(u),
                        fmt17(l),
                        fmt17(kernel.eval_z(t, u)?),
                        fmt17(kernel.eval_y(t, u)?)
                    ))
                })
                .collect::<memmarket::Result<Vec<String>>>()
        })
        .collect::<memmarket::Result<Vec<_>>>()?;
    let mut out = create(dir, "kernel_table.csv")?;
    writeln!(out, "t,u,l,z,y")?;
    for line in rows.iter().flatten() {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(Outcome::Ok)
}

pub fn simulate(config: &RunConfig) -> Result<Outcome, CliError> {
    let dir = prepare(config)?;
    let kernel = config.kernel()?;
    let n = config.base_n()?;
    let exp = &config.experiment;
    let engine = Engine::for_kernel(&kernel, n, config.market.horizon, exp.engine)?;
    let paths = (0..exp.paths)
        .into_par_iter()
        .map(|i| {
            let spec = InnovationSpec { law: exp.innovations, seed: exp.seed, stream_index: i };
            let path = engine.simulate(&spec)?;
            match config.market.sigma {
                Some(sigma) => path.with_price(|_| config.market.b, sigma, config.market.s0),
                None => Ok(path),
            }
        })
        .collect::<memmarket::Result<Vec<_>>>()?;
    let width = (exp.paths - 1).to_string().len().max(4);
    for (i, path) in paths.iter().enumerate() {
        let mut out = create(dir, &format!("path_{i:0width$}.csv"))?;
        path.write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(Outcome::Ok)
}

fn arbitrage_report(
    config: &RunConfig,
    kernel: &KernelModel,
    params: &MarketParams,
) -> Result<ArbitrageReport, CliError> {
    let exp = &config.experiment;
    let exact = match exp.mode {
        ArbitrageMode::Exact => true,
        ArbitrageMode::MonteCarlo => false,
        ArbitrageMode::Auto => params.steps() <= exp.enumeration_budget,
    };
    if exact {
        let table = CoefficientTable::build(kernel, params.n, params.horizon)?;
        Ok(exact_pn(&table, params, exp.enumeration_budget)?)
    } else {
        let engine = Engine::for_kernel(kernel, params.n, params.horizon, exp.engine)?;
        Ok(mc_pn(&engine, params, exp.trials, exp.seed)?)
    }
}

pub fn arbitrage(config: &RunConfig) -> Result<Outcome, CliError> {
    let dir = prepare(config)?;
    let kernel = config.kernel()?;
    let exp = &config.experiment;
    let params = config.market_params(config.base_n()?)?;
    if exp.require_sufficient_condition {
        sufficient_n0(&params, kernel.lipschitz())?;
    }

    let table = CoefficientTable::build(&kernel, params.n, params.horizon)?;
    let certificate = is_arbitrage_free_exact(&table, &params)?;
    write_json(dir, "certificate.json", &certificate)?;

    let report = arbitrage_report(config, &kernel, &params)?;
    let mut value = serde_json::to_value(&report)?;
    value["config_echo"] = serde_json::to_value(config)?;
    write_json(dir, "report.json", &value)?;

    if let Some(sweep) = &config.market.n_sweep {
        let mut out = create(dir, "sweep.csv")?;
        writeln!(out, "N,p_hat,ci_lo,ci_hi,trials,seed")?;
        let mut points = Vec::with_capacity(sweep.len());
        for &n in sweep {
            let r = arbitrage_report(config, &kernel, &config.market_params(n)?)?;
            writeln!(out, "{n},{},{},{},{},{}", fmt17(r.p_hat), fmt17(r.ci[0]), fmt17(r.ci[1]), r.trials, exp.seed)?;
            points.push((n as f64, r.p_hat));
        }
        out.flush()?;
        let mut summary = json!({ "points": points });
        match decay_fit(&points) {
            Ok(fit) => {
                summary["slope"] = json!(fit.slope);
                summary["intercept"] = json!(fit.intercept);
                summary["residuals"] = json!(fit.residuals);
            }
            Err(e) => summary["error"] = json!(e.to_string()),
        }
        if let Some(alpha) = exp.alpha {
            summary["alpha"] = json!(alpha);
            summary["N_alpha"] = match decay_n_alpha(alpha, &params, kernel.lipschitz()) {
                Ok(n) => json!(n),
                Err(e) => json!(e.to_string()),
            };
        }
        write_json(dir, "decay_fit.json", &summary)?;
    }

    if exp.witness && certificate.verdict == Verdict::Arbitrage {
        write_json(dir, "witness.json", &find_witness(config, &table, &params)?)?;
    }
    Ok(Outcome::Ok)
}

/// Tries the constant-sign paths, then the sampled paths in stream order.
fn find_witness(config: &RunConfig, table: &CoefficientTable, params: &MarketParams) -> Result<Value, CliError> {
    let m = table.steps();
    let exp = &config.experiment;
    let candidates = [vec![-1.0; m - 1], vec![1.0; m - 1]]
        .into_iter()
        .chain((0..exp.trials).map(|i| sample_innovations(&InnovationSpec::rademacher(exp.seed, i), m - 1)));
    for xi in candidates {
        if let Some(step) = violation_step(table, params, &xi)? {
            let witness = extract_strategy(table, params, &xi[..step - 1], step)?;
            let verified = verify_strategy(&witness, table, params);
            let mut value = serde_json::to_value(&witness)?;
            value["found"] = json!(true);
            value["verified"] = json!(verified);
            return Ok(value);
        }
    }
    Ok(json!({ "found": false }))
}

pub fn convergence(config: &RunConfig) -> Result<Outcome, CliError> {
    let dir = prepare(config)?;
    let exp = &config.experiment;
    if exp.statistics.is_empty() {
        return Err(CliError::Config("experiment.statistics is empty".into()));
    }
    if exp.n_list.is_empty() {
        return Err(CliError::Config("experiment.n_list is empty".into()));
    }
    let kernel = config.kernel()?;
    let horizon = config.market.horizon;
    let mut reports: Vec<ConvergenceReport> = Vec::new();
    for &stat in &exp.statistics {
        let bands = exp.bands.get(&stat).map(Vec::as_slice).unwrap_or(&[]);
        let n_list = &exp.n_list;
        let report = match stat {
            Statistic::Variance => {
                let times = exp.t_list.clone().unwrap_or_else(|| vec![horizon]);
                variance_discrepancy(&kernel, &times, n_list, bands)?
            }
            Statistic::QuadraticVariation => qv_convergence(&kernel, n_list, exp.trials, exp.seed, bands)?,
            Statistic::Jump => jump_convergence(&kernel, n_list, exp.trials, exp.seed, bands)?,
            Statistic::Fdd => {
                fdd_convergence(&kernel, exp.fdd_time.unwrap_or(horizon), n_list, exp.trials, exp.seed, bands)?
            }
            Statistic::TerminalPrice => {
                terminal_price_convergence(&config.price_model()?, &kernel, n_list, exp.trials, exp.seed, bands)?
            }
        };
        let mut out = create(dir, &format!("convergence_{}.csv", stat.name()))?;
        report.write_csv(&mut out)?;
        out.flush()?;
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    write_json(dir, "convergence.json", &json!({ "passed": passed, "reports": reports }))?;
    Ok(if passed { Outcome::Ok } else { Outcome::BandFailure })
}
