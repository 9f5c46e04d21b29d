//! Run configuration, read from TOML and overridable from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use exqr_core::dependence::DependencePrior;
use exqr_core::regions::{GRID_HI, GRID_LO};
use exqr_core::samplers::{ChainConfig, MarginalPrior, RobbinsMonro};
use exqr_core::testbeds::{Bivariate, QuadraticLocationStudy, TestbedSpec, Univariate};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Draw a dataset from a testbed and write it as CSV.
    Simulate,
    /// Fit one margin and summarize its extreme quantiles.
    #[default]
    FitUni,
    /// Fit two margins and the dependence structure, then extract regions.
    FitBiv,
    /// Recompute region summaries from a previous bivariate fit.
    Regions,
    /// Convergence diagnostics of a previous fit.
    Diagnostics,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::FitUni => "fit-uni",
            Mode::FitBiv => "fit-biv",
            Mode::Regions => "regions",
            Mode::Diagnostics => "diagnostics",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Column names of the input CSV. Other columns are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Columns {
    pub y1: String,
    pub y2: String,
    pub covariate: Option<String>,
}

impl Default for Columns {
    fn default() -> Self {
        Self {
            y1: "y1".into(),
            y2: "y2".into(),
            covariate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub tau0: f64,
    pub marginal_prior: MarginalPrior,
    pub precondition: bool,
}

impl Default for ChainSettings {
    fn default() -> Self {
        let c = ChainConfig::default();
        Self {
            iterations: c.iterations,
            burn_in: c.burn_in,
            tau0: c.tau0,
            marginal_prior: c.marginal_prior,
            precondition: c.precondition,
        }
    }
}

/// Which distribution `simulate` draws from: a short name
/// (`frechet`, `cauchy2`, `quadratic_location`, ...) or a parameterized table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestbedChoice {
    Named(String),
    Testbed(TestbedSpec),
    Regression { quadratic_location: QuadraticLocationStudy },
}

/// A resolved simulation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Simulator {
    Univariate(Univariate),
    Bivariate(Bivariate),
    Regression(QuadraticLocationStudy),
}

impl TestbedChoice {
    pub fn resolve(&self) -> Result<Simulator> {
        let spec = match self {
            TestbedChoice::Named(name) if name == "quadratic_location" => {
                return Ok(Simulator::Regression(QuadraticLocationStudy::default()))
            }
            TestbedChoice::Named(name) => {
                TestbedSpec::from_str(name).map_err(|e| CliError::Config(e.to_string()))?
            }
            TestbedChoice::Testbed(spec) => *spec,
            TestbedChoice::Regression { quadratic_location } => {
                return Ok(Simulator::Regression(*quadratic_location))
            }
        };
        Ok(match spec {
            TestbedSpec::Univariate(u) => Simulator::Univariate(u),
            TestbedSpec::Bivariate(b) => {
                b.validate().map_err(|e| CliError::Config(e.to_string()))?;
                Simulator::Bivariate(b)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub testbed: TestbedChoice,
    pub n: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self {
            testbed: TestbedChoice::Named("frechet".into()),
            n: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Data CSV for the fitting modes; the output directory of an earlier
    /// fit for `regions` and `diagnostics`. Fitting modes without an input
    /// simulate their data from `[simulate]` first.
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub censoring_level: f64,
    pub probabilities: Vec<f64>,
    /// Credibility of reported intervals and bands.
    pub credibility: f64,
    pub grid_points: usize,
    /// Keep every `thin`-th retained draw for region summaries.
    pub thin: usize,
    /// Covariate value at which regression margins are summarized; defaults
    /// to the sample median of the covariate.
    pub covariate_value: Option<f64>,
    /// Fail the run when adaptation checks do not pass.
    pub check_invariants: bool,
    pub columns: Columns,
    pub chain: ChainSettings,
    pub dependence: DependencePrior,
    pub simulate: SimulateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            seed: 1,
            input: None,
            output_dir: PathBuf::from("out"),
            censoring_level: 0.9,
            probabilities: vec![1.0 / 750.0, 1.0 / 1500.0, 1.0 / 3000.0],
            credibility: 0.9,
            grid_points: 199,
            thin: 5,
            covariate_value: None,
            check_invariants: false,
            columns: Columns::default(),
            chain: ChainSettings::default(),
            dependence: DependencePrior::simulation(),
            simulate: SimulateSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Canonical serialization; its hash identifies the run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.censoring_level > 0.0 && self.censoring_level < 1.0) {
            return bad(format!("censoring_level must lie in (0, 1), got {}", self.censoring_level));
        }
        if !(self.credibility > 0.0 && self.credibility < 1.0) {
            return bad(format!("credibility must lie in (0, 1), got {}", self.credibility));
        }
        if self.probabilities.is_empty() {
            return bad("probabilities must not be empty".into());
        }
        if let Some(p) = self.probabilities.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return bad(format!("probability {p} outside (0, 1)"));
        }
        if self.grid_points < 2 {
            return bad(format!("grid_points must be at least 2, got {}", self.grid_points));
        }
        if self.thin == 0 {
            return bad("thin must be at least 1".into());
        }
        if self.simulate.n < 2 {
            return bad(format!("simulate.n must be at least 2, got {}", self.simulate.n));
        }
        self.chain_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        match self.mode {
            Mode::Simulate => {
                self.simulate.testbed.resolve()?;
            }
            Mode::FitUni | Mode::FitBiv => {
                if self.input.is_none() {
                    let sim = self.simulate.testbed.resolve()?;
                    if self.mode == Mode::FitBiv && !matches!(sim, Simulator::Bivariate(_)) {
                        return bad("fit-biv without input needs a bivariate testbed".into());
                    }
                }
            }
            Mode::Regions | Mode::Diagnostics => {
                if self.input.is_none() {
                    return bad(format!("{} needs input = <output directory of a fit>", self.mode));
                }
            }
        }
        Ok(())
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.chain.iterations,
            burn_in: self.chain.burn_in,
            seed: self.seed,
            robbins_monro: RobbinsMonro::default(),
            tau0: self.chain.tau0,
            marginal_prior: self.chain.marginal_prior,
            dependence_prior: self.dependence,
            uncorrected_degree_factor: false,
            precondition: self.chain.precondition,
            fixed_dependence: None,
        }
    }

    /// Equally spaced interior angles spanning the default grid's range.
    pub fn w_grid(&self) -> Vec<f64> {
        let step = (GRID_HI - GRID_LO) / (self.grid_points - 1) as f64;
        (0..self.grid_points).map(|i| GRID_LO + i as f64 * step).collect()
    }
}
