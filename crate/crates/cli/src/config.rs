//! Run configuration: a JSON file with `kernel`, `market`, `experiment` and
//! `output` blocks. Unknown keys are rejected at every level.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use memmarket::convergence::{Band, PriceModel};
use memmarket::kernel::KernelSpec;
use memmarket::processes::EngineChoice;
use memmarket::rng::InnovationLaw;
use memmarket::{KernelModel, MarketParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub market: MarketBlock,
    #[serde(default)]
    pub experiment: ExperimentBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketBlock {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N_sweep", default, skip_serializing_if = "Option::is_none")]
    pub n_sweep: Option<Vec<usize>>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "one")]
    pub s0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArbitrageMode {
    /// Exact enumeration when `⌊NT⌋` fits the enumeration budget.
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Variance,
    QuadraticVariation,
    Jump,
    Fdd,
    TerminalPrice,
}

impl Statistic {
    pub fn name(self) -> &'static str {
        match self {
            Statistic::Variance => "variance",
            Statistic::QuadraticVariation => "quadratic-variation",
            Statistic::Jump => "jump",
            Statistic::Fdd => "fdd",
            Statistic::TerminalPrice => "terminal-price",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentBlock {
    pub seed: u64,
    /// Monte Carlo paths (arbitrage, quadratic variation, jumps) or samples
    /// (KS distances).
    pub trials: u64,
    pub engine: EngineChoice,
    /// Points per axis of the kernel table.
    pub grid: usize,
    /// Paths written by `simulate`.
    pub paths: u64,
    pub innovations: InnovationLaw,
    pub mode: ArbitrageMode,
    pub enumeration_budget: usize,
    /// Fail unless the sufficient condition `T·C < 1` applies.
    pub require_sufficient_condition: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub witness: bool,
    pub statistics: Vec<Statistic>,
    pub n_list: Vec<usize>,
    /// Times for the covariance check; defaults to `[T]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_list: Option<Vec<f64>>,
    /// Time of the finite-dimensional KS check; defaults to `T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fdd_time: Option<f64>,
    pub bands: BTreeMap<Statistic, Vec<Band>>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 10_000,
            engine: EngineChoice::Auto,
            grid: 11,
            paths: 1,
            innovations: InnovationLaw::Rademacher,
            mode: ArbitrageMode::Auto,
            enumeration_budget: memmarket::arbitrage::DEFAULT_ENUMERATION_BUDGET,
            require_sufficient_condition: false,
            alpha: None,
            witness: false,
            statistics: Vec::new(),
            n_list: Vec::new(),
            t_list: None,
            fdd_time: None,
            bands: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn one() -> f64 {
    1.0
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    pub engine: Option<EngineChoice>,
    pub require_sufficient_condition: bool,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.apply(overrides);
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        let exp = &mut self.experiment;
        if let Some(seed) = overrides.seed {
            exp.seed = seed;
        }
        if let Some(trials) = overrides.trials {
            exp.trials = trials;
        }
        if let Some(engine) = overrides.engine {
            exp.engine = engine;
        }
        exp.require_sufficient_condition |= overrides.require_sufficient_condition;
        if let Some(out) = &overrides.out {
            self.output.dir = out.clone();
        }
    }

    pub fn kernel(&self) -> Result<KernelModel, CliError> {
        Ok(self.kernel.build(self.market.horizon)?)
    }

    /// The base `N`: `market.N`, else the first sweep entry.
    pub fn base_n(&self) -> Result<usize, CliError> {
        self.market
            .n
            .or_else(|| self.market.n_sweep.as_ref().and_then(|s| s.first().copied()))
            .ok_or_else(|| CliError::Config("market needs N or N_sweep".into()))
    }

    pub fn sigma(&self) -> Result<f64, CliError> {
        self.market.sigma.ok_or_else(|| CliError::Config("market.sigma is required for this command".into()))
    }

    pub fn market_params(&self, n: usize) -> Result<MarketParams, CliError> {
        let m = &self.market;
        Ok(MarketParams::new(n, m.horizon, m.r, m.b, self.sigma()?, m.s0)?)
    }

    pub fn price_model(&self) -> Result<PriceModel, CliError> {
        let model =
            PriceModel { horizon: self.market.horizon, b: self.market.b, sigma: self.sigma()?, s0: self.market.s0 };
        model.validate()?;
        Ok(model)
    }

    /// Checks invariants shared by every command.
    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.market;
        if !(m.horizon > 0.0 && m.horizon.is_finite()) {
            return Err(CliError::Config(format!("market.T must be positive, got {}", m.horizon)));
        }
        if let Some(sweep) = &m.n_sweep {
            if sweep.is_empty() || sweep.contains(&0) || sweep.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CliError::Config(format!("N_sweep must be positive and strictly increasing: {sweep:?}")));
            }
        }
        if m.n == Some(0) {
            return Err(CliError::Config("N must be at least 1".into()));
        }
        if !(m.s0 > 0.0 && m.s0.is_finite()) {
            return Err(CliError::Config(format!("s0 must be positive, got {}", m.s0)));
        }
        if let Some(sigma) = m.sigma {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(CliError::Config(format!("sigma must be nonnegative, got {sigma}")));
            }
        }
        let e = &self.experiment;
        if e.trials == 0 || e.paths == 0 {
            return Err(CliError::Config("trials and paths must be at least 1".into()));
        }
        if e.grid < 2 {
            return Err(CliError::Config("grid needs at least 2 points per axis".into()));
        }
        if let Some(alpha) = e.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
            }
        }
        self.kernel()?;
        Ok(())
    }
}
