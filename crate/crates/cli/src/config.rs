//! Run configuration file and report provenance.

use std::path::Path;

use anyhow::{bail, Context, Result};
use dkseq::discrepancy::DigitPairing;
use dkseq::gf_poly::Prime;
use dkseq::laurent::LaurentSeries;
use dkseq::sequence::SeriesSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Second event of a pair measurement.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSide {
    pub ks: Vec<u64>,
    pub m: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    Auto,
    Exact,
    MonteCarlo,
}

/// Every key is optional; each subcommand reads the ones it needs and
/// command-line flags override file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub q: Option<u32>,
    pub s: Option<usize>,
    pub fs: Option<Vec<SeriesSpec>>,
    pub m: Option<usize>,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub pairing: Option<DigitPairing>,
    /// Polynomials as base-`q` integers, least significant digit first.
    pub ks: Option<Vec<u64>>,
    pub betas: Option<Vec<u64>>,
    pub pair_with: Option<PairSide>,
    pub mode: Option<ModeChoice>,
    #[serde(rename = "J")]
    pub j_trunc: Option<u32>,
    #[serde(rename = "R")]
    pub r_max: Option<u32>,
    pub integrand: Option<String>,
    pub alphas: Option<Vec<f64>>,
}

pub struct Loaded {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load(path: Option<&Path>) -> Result<Loaded> {
    let bytes = match path {
        Some(p) => std::fs::read(p).with_context(|| format!("reading config {}", p.display()))?,
        None => Vec::new(),
    };
    let config = if bytes.is_empty() {
        RunConfig::default()
    } else {
        serde_json::from_slice(&bytes).context("parsing config JSON")?
    };
    Ok(Loaded { config, hash: hex::encode(Sha256::digest(&bytes)) })
}

impl RunConfig {
    pub fn prime(&self) -> Result<Prime> {
        Ok(Prime::new(self.q.unwrap_or(2))?)
    }

    /// The configured series; `seed`, when given, replaces the seed of
    /// every random entry (entry `j` gets `seed + j`).
    pub fn series(&self, seed: Option<u64>) -> Result<Vec<LaurentSeries>> {
        let q = self.prime()?;
        let Some(specs) = &self.fs else { bail!("config needs an \"fs\" array") };
        if let Some(s) = self.s {
            if s != specs.len() {
                bail!("config has s = {s} but {} series", specs.len());
            }
        }
        specs
            .iter()
            .enumerate()
            .map(|(j, spec)| {
                let spec = match (spec, seed) {
                    (SeriesSpec::Random { random, precision, .. }, Some(seed)) => {
                        SeriesSpec::Random { random: *random, seed: seed.wrapping_add(j as u64), precision: *precision }
                    }
                    _ => spec.clone(),
                };
                Ok(spec.resolve(q)?)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub provenance: Provenance,
    pub report: T,
}
