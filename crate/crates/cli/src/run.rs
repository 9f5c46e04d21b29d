//! Mode dispatch, artifact writing and the run manifest.

use std::path::{Path, PathBuf};

use exqr_core::dependence::EtaCoefficients;
use exqr_core::likelihoods::BivariateSample;
use exqr_core::margins::CensoredSample;
use exqr_core::regions::{
    summarize_posterior_quantiles, summarize_posterior_regions, Interval, QuantileSummary, QuantileTarget,
    RegionCurve, SummaryOptions,
};
use exqr_core::samplers::{run_bivariate_chain, run_univariate_chain, PosteriorChain};
use exqr_core::{rng_from_seed, stats, Rng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain_io::{draws_csv, read_chain, ChainMeta, DRAWS_FILE, META_FILE};
use crate::config::{Mode, RunConfig, Simulator};
use crate::data::{dataset_csv, format_f64, load_csv, Dataset, Needs};
use crate::error::{CliError, Result, StageExt};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATA_FILE: &str = "data.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const QUANTILES_FILE: &str = "quantiles.csv";
pub const HISTOGRAMS_FILE: &str = "quantile_histograms.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const REGIONS_FILE: &str = "regions.json";
pub const INVERSE_Q_STAR_FILE: &str = "inverse_q_star.csv";
pub const BASIC_SET_FILE: &str = "basic_set.csv";

/// Target acceptance of the marginal blocks and the tolerance of the check.
const PI_STAR: f64 = 0.234;
const ACCEPTANCE_TOLERANCE: f64 = 0.03;
/// Window length and tolerance of the `log τ` stability check.
const TAU_WINDOW: usize = 10_000;
const TAU_TOLERANCE: f64 = 0.05;
const HISTOGRAM_BINS: usize = 50;

/// File name of the region polyline for the `j`-th probability (1-based).
pub fn region_file(j: usize) -> String {
    format!("region_{j}.csv")
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub exqr_cli: String,
    pub exqr_core: String,
}

/// Everything needed to repeat a run: the resolved configuration, its hash,
/// the input fingerprint and the code versions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: Mode,
    pub seed: u64,
    pub config_sha256: String,
    pub input_sha256: Option<String>,
    pub versions: Versions,
    pub config: RunConfig,
    pub outputs: Vec<OutputRecord>,
    pub checks_passed: bool,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
    }
}

/// An invariant evaluated on a finished chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub manifest: Manifest,
    pub checks: Vec<Check>,
}

impl RunReport {
    /// False only when invariant checks were requested and one failed.
    pub fn success(&self) -> bool {
        !self.manifest.config.check_invariants || self.checks.iter().all(|c| c.passed)
    }
}

/// Files written so far; removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    records: Vec<OutputRecord>,
}

impl Outputs {
    fn open(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            created_dir,
            written: Vec::new(),
            records: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.records.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::format(name, e.to_string()))?;
        text.push(b'\n');
        self.write(name, &text)
    }

    fn discard(self) {
        for path in &self.written {
            if let Err(e) = std::fs::remove_file(path) {
                if e.kind() != std::io::ErrorKind::NotFound {
                    log::warn!("could not remove partial output {}: {e}", path.display());
                }
            }
        }
        if self.created_dir {
            // Only succeeds when nothing else landed in the directory.
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

/// Execute one run. On error every file written by this run is removed.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let mut out = Outputs::open(&config.output_dir)?;
    match execute(config, &mut out) {
        Ok(report) => Ok(report),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

/// Repeat the run recorded in a manifest, optionally into another directory.
pub fn replay(manifest: &Path, output_dir: Option<PathBuf>) -> Result<RunReport> {
    let recorded = Manifest::load(manifest)?;
    let mut config = recorded.config;
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    let report = run(&config)?;
    if report.manifest.input_sha256 != recorded.input_sha256 {
        log::warn!("input differs from the one recorded in {}", manifest.display());
    }
    Ok(report)
}

fn execute(config: &RunConfig, out: &mut Outputs) -> Result<RunReport> {
    let mut rng = rng_from_seed(config.seed);
    let (input_sha256, checks) = match config.mode {
        Mode::Simulate => {
            let data = simulate(config, &mut rng)?;
            out.write(DATA_FILE, &dataset_csv(&data, &config.columns)?)?;
            (None, Vec::new())
        }
        Mode::FitUni => fit_univariate(config, out, &mut rng)?,
        Mode::FitBiv => fit_bivariate(config, out, &mut rng)?,
        Mode::Regions => {
            let (chain, meta, hash) = load_fit(config)?;
            if meta.margins != 2 {
                return Err(CliError::Config("regions needs the output of a bivariate fit".into()));
            }
            write_regions(config, out, &chain, &meta)?;
            (Some(hash), Vec::new())
        }
        Mode::Diagnostics => {
            let (chain, _, hash) = load_fit(config)?;
            let diagnostics = diagnose(&chain, config.credibility);
            out.json(DIAGNOSTICS_FILE, &diagnostics)?;
            (Some(hash), diagnostics.checks)
        }
    };
    let text = config.to_toml();
    let manifest = Manifest {
        mode: config.mode,
        seed: config.seed,
        config_sha256: sha256_hex(text.as_bytes()),
        input_sha256,
        versions: Versions {
            exqr_cli: env!("CARGO_PKG_VERSION").into(),
            exqr_core: exqr_core::VERSION.into(),
        },
        config: config.clone(),
        outputs: out.records.clone(),
        checks_passed: checks.iter().all(|c| c.passed),
    };
    out.json(MANIFEST_FILE, &manifest)?;
    for c in checks.iter().filter(|c| !c.passed) {
        log::warn!("check failed: {} = {:.4}", c.name, c.value);
    }
    Ok(RunReport { manifest, checks })
}

fn simulate(config: &RunConfig, rng: &mut Rng) -> Result<Dataset> {
    let n = config.simulate.n;
    let data = match config.simulate.testbed.resolve()? {
        Simulator::Univariate(u) => Dataset {
            y1: u.sample(n, rng).stage("simulate")?,
            y2: None,
            covariate: None,
            dropped_rows: Vec::new(),
        },
        Simulator::Bivariate(b) => {
            let (y1, y2) = b.sample(n, rng).stage("simulate")?;
            Dataset {
                y1,
                y2: Some(y2),
                covariate: None,
                dropped_rows: Vec::new(),
            }
        }
        Simulator::Regression(r) => {
            let (y, z) = r.sample(n, rng).stage("simulate")?;
            Dataset {
                y1: y,
                y2: None,
                covariate: Some(z),
                dropped_rows: Vec::new(),
            }
        }
    };
    Ok(data)
}

/// Data from the input CSV, or simulated on the run's stream when no input
/// is given (the chain then continues on the same stream).
fn acquire(config: &RunConfig, needs_y2: bool, rng: &mut Rng) -> Result<(Dataset, Option<String>)> {
    match &config.input {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
            let needs = Needs {
                y2: needs_y2,
                covariate: config.columns.covariate.is_some(),
            };
            Ok((load_csv(path, &config.columns, needs)?, Some(sha256_hex(&bytes))))
        }
        None => Ok((simulate(config, rng)?, None)),
    }
}

fn load_fit(config: &RunConfig) -> Result<(PosteriorChain, ChainMeta, String)> {
    let dir = config.input.as_deref().expect("validated");
    let (chain, meta) = read_chain(dir)?;
    let draws = dir.join(DRAWS_FILE);
    let bytes = std::fs::read(&draws).map_err(|e| CliError::io(&draws, e))?;
    Ok((chain, meta, sha256_hex(&bytes)))
}

fn median(xs: &[f64]) -> f64 {
    stats::quantile(xs, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub interval: Interval,
    pub ess: f64,
    pub mcse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub margin: usize,
    pub threshold: f64,
    pub k: usize,
    pub parameters: Vec<ParameterSummary>,
    pub acceptance_rate: f64,
    pub final_tau: f64,
    pub quantiles: Vec<QuantileSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub kappa: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSummary {
    pub acceptance_rate: f64,
    pub kappa: Vec<KappaRow>,
    /// Point masses of the angular measure at 0 and 1.
    pub p0: Interval,
    pub p1: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub n: usize,
    pub iterations: usize,
    pub retained: usize,
    pub covariate_value: Option<f64>,
    pub margins: Vec<MarginSummary>,
    pub dependence: Option<DependenceSummary>,
    pub checks: Vec<Check>,
}

fn parameter_traces(chain: &PosteriorChain, i: usize) -> Vec<(String, Vec<f64>)> {
    let mut out = Vec::new();
    if chain.regression {
        for j in 0..3 {
            out.push((format!("beta{j}"), chain.trace(|d| d.margins[i].beta[j])));
        }
    } else {
        out.push(("mu".into(), chain.trace(|d| d.margins[i].beta[0])));
    }
    out.push(("sigma".into(), chain.trace(|d| d.margins[i].sigma)));
    out.push(("gamma".into(), chain.trace(|d| d.margins[i].gamma)));
    out
}

fn parameter_summaries(chain: &PosteriorChain, i: usize, level: f64) -> Vec<ParameterSummary> {
    parameter_traces(chain, i)
        .into_iter()
        .map(|(name, xs)| ParameterSummary {
            name,
            interval: Interval::from_draws(&xs, level),
            ess: stats::effective_sample_size(&xs),
            mcse: stats::batch_means_mcse(&xs),
        })
        .collect()
}

fn margin_summary(chain: &PosteriorChain, i: usize, config: &RunConfig, z: Option<f64>) -> Result<MarginSummary> {
    let quantiles = summarize_posterior_quantiles(chain, i, &config.probabilities, z, config.credibility, HISTOGRAM_BINS)
        .stage("quantiles")?;
    Ok(MarginSummary {
        margin: i + 1,
        threshold: chain.thresholds[i],
        k: chain.k[i],
        parameters: parameter_summaries(chain, i, config.credibility),
        acceptance_rate: chain.acceptance_rate(i),
        final_tau: chain.draws.last().map_or(f64::NAN, |d| d.tau[i]),
        quantiles,
    })
}

fn dependence_summary(chain: &PosteriorChain, level: f64) -> Result<DependenceSummary> {
    let mut p0 = Vec::new();
    let mut p1 = Vec::new();
    for d in chain.retained() {
        let eta = EtaCoefficients::new(d.eta.clone().unwrap_or_default()).stage("dependence summary")?;
        p0.push(eta.p0());
        p1.push(eta.p1());
    }
    Ok(DependenceSummary {
        acceptance_rate: chain.acceptance_rate(2),
        kappa: chain
            .kappa_table()
            .into_iter()
            .map(|(kappa, probability)| KappaRow { kappa, probability })
            .collect(),
        p0: Interval::from_draws(&p0, level),
        p1: Interval::from_draws(&p1, level),
    })
}

fn adaptation_checks(chain: &PosteriorChain) -> Vec<Check> {
    let mut checks = Vec::new();
    for i in 0..chain.k.len() {
        let rate = chain.acceptance_rate(i);
        checks.push(Check {
            name: format!("acceptance_rate_{}", i + 1),
            value: rate,
            passed: (rate - PI_STAR).abs() <= ACCEPTANCE_TOLERANCE,
        });
        let log_tau: Vec<f64> = chain.draws.iter().map(|d| d.tau[i].ln()).collect();
        let w = TAU_WINDOW.min(log_tau.len() / 2);
        if w > 0 {
            let n = log_tau.len();
            let drift = (stats::mean(&log_tau[n - w..]) - stats::mean(&log_tau[n - 2 * w..n - w])).abs();
            checks.push(Check {
                name: format!("log_tau_drift_{}", i + 1),
                value: drift,
                passed: drift < TAU_TOLERANCE,
            });
        }
    }
    checks
}

fn quantile_tables(margins: &[MarginSummary]) -> Result<(Vec<u8>, Vec<u8>)> {
    let to_err = |e: csv::Error| CliError::csv(QUANTILES_FILE, e);
    let mut table = csv::Writer::from_writer(Vec::new());
    table
        .write_record([
            "margin", "p", "mean", "lower", "upper", "log_mean", "log_lower", "log_upper", "level", "extrapolation",
        ])
        .map_err(to_err)?;
    let mut hist = csv::Writer::from_writer(Vec::new());
    hist.write_record(["margin", "p", "scale", "bin_lo", "bin_hi", "density"])
        .map_err(to_err)?;
    for m in margins {
        for q in &m.quantiles {
            let opt = |f: fn(&Interval) -> f64| q.log_value.as_ref().map(f).map(format_f64).unwrap_or_default();
            table
                .write_record([
                    m.margin.to_string(),
                    format_f64(q.p),
                    format_f64(q.value.mean),
                    format_f64(q.value.lower),
                    format_f64(q.value.upper),
                    opt(|i| i.mean),
                    opt(|i| i.lower),
                    opt(|i| i.upper),
                    format_f64(q.value.level),
                    q.extrapolation.to_string(),
                ])
                .map_err(to_err)?;
            let scale = if q.log_value.is_some() { "log" } else { "linear" };
            for (b, density) in q.histogram_density.iter().enumerate() {
                hist.write_record([
                    m.margin.to_string(),
                    format_f64(q.p),
                    scale.to_string(),
                    format_f64(q.histogram_edges[b]),
                    format_f64(q.histogram_edges[b + 1]),
                    format_f64(*density),
                ])
                .map_err(to_err)?;
            }
        }
    }
    let finish = |w: csv::Writer<Vec<u8>>| w.into_inner().map_err(|e| CliError::format(QUANTILES_FILE, e.to_string()));
    Ok((finish(table)?, finish(hist)?))
}

fn write_fit(
    config: &RunConfig,
    out: &mut Outputs,
    chain: &PosteriorChain,
    meta: &ChainMeta,
    z: Option<f64>,
) -> Result<Vec<Check>> {
    out.write(DRAWS_FILE, &draws_csv(chain)?)?;
    out.json(META_FILE, meta)?;
    let margins = (0..meta.margins)
        .map(|i| margin_summary(chain, i, config, z))
        .collect::<Result<Vec<_>>>()?;
    let (table, hist) = quantile_tables(&margins)?;
    out.write(QUANTILES_FILE, &table)?;
    out.write(HISTOGRAMS_FILE, &hist)?;
    let dependence = if meta.margins == 2 {
        Some(dependence_summary(chain, config.credibility)?)
    } else {
        None
    };
    let checks = adaptation_checks(chain);
    out.json(
        SUMMARY_FILE,
        &FitSummary {
            n: chain.n,
            iterations: chain.draws.len(),
            retained: chain.retained().len(),
            covariate_value: z,
            margins,
            dependence,
            checks: checks.clone(),
        },
    )?;
    Ok(checks)
}

fn fit_univariate(config: &RunConfig, out: &mut Outputs, rng: &mut Rng) -> Result<(Option<String>, Vec<Check>)> {
    let (data, hash) = acquire(config, false, rng)?;
    let reference = data.covariate.as_deref().map(median);
    let sample = CensoredSample::from_level(data.y1, data.covariate, config.censoring_level).stage("threshold")?;
    let chain = run_univariate_chain(&sample, &config.chain_config(), rng).stage("chain")?;
    let meta = ChainMeta::of(&chain, reference);
    let z = config.covariate_value.or(reference);
    Ok((hash, write_fit(config, out, &chain, &meta, z)?))
}

fn fit_bivariate(config: &RunConfig, out: &mut Outputs, rng: &mut Rng) -> Result<(Option<String>, Vec<Check>)> {
    let (data, hash) = acquire(config, true, rng)?;
    let y2 = data
        .y2
        .ok_or_else(|| CliError::Config("fit-biv needs a second response column".into()))?;
    let reference = data.covariate.as_deref().map(median);
    let sample = BivariateSample::from_level(data.y1, y2, data.covariate, config.censoring_level).stage("threshold")?;
    let chain = run_bivariate_chain(&sample, &config.chain_config(), rng).stage("chain")?;
    let meta = ChainMeta::of(&chain, reference);
    let z = config.covariate_value.or(reference);
    let checks = write_fit(config, out, &chain, &meta, z)?;
    write_regions(config, out, &chain, &meta)?;
    Ok((hash, checks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegionsReport {
    probabilities: Vec<f64>,
    credibility: f64,
    covariate_value: Option<f64>,
    nu_s: Interval,
    endpoint_masses: [f64; 2],
    draws_used: usize,
    files: Vec<String>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn curve_csv(curve: &RegionCurve) -> Result<Vec<u8>> {
    let to_err = |e: csv::Error| CliError::csv("<region>", e);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["w", "x_mean", "y_mean", "x_lo", "x_hi", "y_lo", "y_hi", "p", "level"])
        .map_err(to_err)?;
    for r in curve.rows() {
        w.write_record([
            format_f64(r.w),
            format_f64(r.x_mean),
            format_f64(r.y_mean),
            opt_cell(r.x_lo),
            opt_cell(r.x_hi),
            opt_cell(r.y_lo),
            opt_cell(r.y_hi),
            opt_cell(r.p),
            opt_cell(r.level),
        ])
        .map_err(to_err)?;
    }
    w.into_inner().map_err(|e| CliError::format("<region>", e.to_string()))
}

fn write_regions(config: &RunConfig, out: &mut Outputs, chain: &PosteriorChain, meta: &ChainMeta) -> Result<()> {
    let k = [meta.k[0], meta.k[1]];
    let targets = config
        .probabilities
        .iter()
        .map(|&p| QuantileTarget::per_margin(p, k, meta.n))
        .collect::<exqr_core::Result<Vec<_>>>()
        .stage("regions")?;
    let covariate = if meta.regression {
        config.covariate_value.or(meta.covariate_reference)
    } else {
        None
    };
    let options = SummaryOptions {
        level: config.credibility,
        thin: config.thin,
        w_grid: config.w_grid(),
        covariate,
        ..SummaryOptions::default()
    };
    let summary = summarize_posterior_regions(chain, &targets, &options).stage("regions")?;

    let band = &summary.inverse_q_star;
    let to_err = |e: csv::Error| CliError::csv(INVERSE_Q_STAR_FILE, e);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["w", "mean", "lo", "hi", "level"]).map_err(to_err)?;
    for j in 0..band.w.len() {
        w.write_record([
            format_f64(band.w[j]),
            format_f64(band.mean[j]),
            format_f64(band.lo[j]),
            format_f64(band.hi[j]),
            format_f64(band.level),
        ])
        .map_err(to_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::format(INVERSE_Q_STAR_FILE, e.to_string()))?;
    out.write(INVERSE_Q_STAR_FILE, &bytes)?;
    out.write(BASIC_SET_FILE, &curve_csv(&summary.basic_set)?)?;
    let mut files = vec![INVERSE_Q_STAR_FILE.to_string(), BASIC_SET_FILE.to_string()];
    for (j, region) in summary.regions.iter().enumerate() {
        let name = region_file(j + 1);
        out.write(&name, &curve_csv(region)?)?;
        files.push(name);
    }
    out.json(
        REGIONS_FILE,
        &RegionsReport {
            probabilities: config.probabilities.clone(),
            credibility: config.credibility,
            covariate_value: covariate,
            nu_s: summary.nu_s,
            endpoint_masses: summary.endpoint_masses,
            draws_used: summary.draws_used,
            files,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginDiagnostics {
    pub margin: usize,
    pub parameters: Vec<ParameterSummary>,
    pub acceptance_rate: f64,
    pub mean_acceptance_prob: f64,
    pub final_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub retained: usize,
    pub margins: Vec<MarginDiagnostics>,
    pub dependence_acceptance_rate: Option<f64>,
    pub kappa: Vec<KappaRow>,
    pub log_likelihood_ess: f64,
    pub checks: Vec<Check>,
}

/// Effective sample sizes, Monte Carlo errors and adaptation checks.
pub fn diagnose(chain: &PosteriorChain, level: f64) -> Diagnostics {
    let bivariate = chain.k.len() == 2;
    Diagnostics {
        iterations: chain.draws.len(),
        retained: chain.retained().len(),
        margins: (0..chain.k.len())
            .map(|i| MarginDiagnostics {
                margin: i + 1,
                parameters: parameter_summaries(chain, i, level),
                acceptance_rate: chain.acceptance_rate(i),
                mean_acceptance_prob: chain.mean_acceptance_prob(i),
                final_tau: chain.draws.last().map_or(f64::NAN, |d| d.tau[i]),
            })
            .collect(),
        dependence_acceptance_rate: bivariate.then(|| chain.acceptance_rate(2)),
        kappa: chain
            .kappa_table()
            .into_iter()
            .map(|(kappa, probability)| KappaRow { kappa, probability })
            .collect(),
        log_likelihood_ess: stats::effective_sample_size(&chain.trace(|d| d.log_likelihood)),
        checks: adaptation_checks(chain),
    }
}
