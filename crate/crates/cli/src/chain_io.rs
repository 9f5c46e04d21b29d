//! Posterior draws as CSV, plus the metadata needed to rebuild the chain.
//!
//! One row per iteration, burn-in included. Per margin `i` (1-based):
//! `beta0_i, beta1_i, beta2_i, sigma_i, gamma_i, tau_i, accepted_i,
//! acceptance_prob_i`. Bivariate chains add `kappa`, `eta` (space-separated
//! coefficients) and `accepted_dependence`. Every chain ends with
//! `log_likelihood`.

use std::path::Path;

use exqr_core::margins::MarginalModel;
use exqr_core::samplers::{Draw, PosteriorChain};
use serde::{Deserialize, Serialize};

use crate::data::format_f64;
use crate::error::{CliError, Result};

pub const DRAWS_FILE: &str = "draws.csv";
pub const META_FILE: &str = "chain.json";

/// Everything about a chain except its draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub margins: usize,
    pub burn_in: usize,
    pub regression: bool,
    pub thresholds: Vec<f64>,
    pub k: Vec<usize>,
    pub n: usize,
    /// Median of the covariate, the default evaluation point for regression
    /// summaries.
    pub covariate_reference: Option<f64>,
}

impl ChainMeta {
    pub fn of(chain: &PosteriorChain, covariate_reference: Option<f64>) -> Self {
        Self {
            margins: chain.k.len(),
            burn_in: chain.burn_in,
            regression: chain.regression,
            thresholds: chain.thresholds.clone(),
            k: chain.k.clone(),
            n: chain.n,
            covariate_reference,
        }
    }
}

fn header(margins: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_string()];
    for i in 1..=margins {
        for name in ["beta0", "beta1", "beta2", "sigma", "gamma", "tau", "accepted", "acceptance_prob"] {
            h.push(format!("{name}_{i}"));
        }
    }
    if margins == 2 {
        h.extend(["kappa", "eta", "accepted_dependence"].map(String::from));
    }
    h.push("log_likelihood".into());
    h
}

pub fn draws_csv(chain: &PosteriorChain) -> Result<Vec<u8>> {
    let margins = chain.k.len();
    let mut writer = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| CliError::csv(DRAWS_FILE, e);
    writer.write_record(header(margins)).map_err(to_err)?;
    for (it, d) in chain.draws.iter().enumerate() {
        let mut row = vec![it.to_string()];
        for i in 0..margins {
            let m = &d.margins[i];
            row.extend(m.beta.iter().map(|b| format_f64(*b)));
            row.push(format_f64(m.sigma));
            row.push(format_f64(m.gamma));
            row.push(format_f64(d.tau[i]));
            row.push(u8::from(d.accepted[i]).to_string());
            row.push(format_f64(d.acceptance_prob[i]));
        }
        if margins == 2 {
            let eta = d.eta.as_deref().unwrap_or_default();
            row.push(eta.len().to_string());
            row.push(eta.iter().map(|v| format_f64(*v)).collect::<Vec<_>>().join(" "));
            row.push(u8::from(d.accepted.get(2).copied().unwrap_or(false)).to_string());
        }
        row.push(format_f64(d.log_likelihood));
        writer.write_record(&row).map_err(to_err)?;
    }
    writer
        .into_inner()
        .map_err(|e| CliError::format(DRAWS_FILE, e.to_string()))
}

/// Rebuild a chain from a fit's output directory.
pub fn read_chain(dir: &Path) -> Result<(PosteriorChain, ChainMeta)> {
    let meta_path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: ChainMeta =
        serde_json::from_str(&text).map_err(|e| CliError::format(&meta_path, e.to_string()))?;
    if meta.margins == 0 || meta.margins > 2 || meta.k.len() != meta.margins {
        return Err(CliError::format(&meta_path, "inconsistent margin count"));
    }

    let path = dir.join(DRAWS_FILE);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::csv(&path, e))?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::csv(&path, e))?
        .iter()
        .map(String::from)
        .collect();
    let expected = header(meta.margins);
    if found != expected {
        return Err(CliError::format(&path, format!("expected columns {expected:?}")));
    }
    let mut draws = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::csv(&path, e))?;
        let row = r + 1;
        let num = |c: usize| -> Result<f64> {
            record[c].parse::<f64>().map_err(|_| CliError::Malformed {
                path: path.clone(),
                row,
                column: expected[c].clone(),
                value: record[c].to_string(),
            })
        };
        let flag = |c: usize| -> Result<bool> { Ok(num(c)? != 0.0) };
        let mut margins = Vec::with_capacity(meta.margins);
        let (mut tau, mut accepted, mut acceptance_prob) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..meta.margins {
            let c = 1 + 8 * i;
            margins.push(MarginalModel {
                beta: [num(c)?, num(c + 1)?, num(c + 2)?],
                sigma: num(c + 3)?,
                gamma: num(c + 4)?,
            });
            tau.push(num(c + 5)?);
            accepted.push(flag(c + 6)?);
            acceptance_prob.push(num(c + 7)?);
        }
        let mut c = 1 + 8 * meta.margins;
        let eta = if meta.margins == 2 {
            let eta = record[c + 1]
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| CliError::Malformed {
                        path: path.clone(),
                        row,
                        column: "eta".into(),
                        value: v.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            accepted.push(flag(c + 2)?);
            c += 3;
            Some(eta)
        } else {
            None
        };
        draws.push(Draw {
            margins,
            eta,
            accepted,
            acceptance_prob,
            tau,
            log_likelihood: num(c)?,
        });
    }
    let chain = PosteriorChain {
        draws,
        burn_in: meta.burn_in,
        regression: meta.regression,
        thresholds: meta.thresholds.clone(),
        k: meta.k.clone(),
        n: meta.n,
    };
    Ok((chain, meta))
}
