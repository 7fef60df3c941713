//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "rough-white"          # output subdirectory
//! output_dir = "runs/rough"     # optional, overrides $MONOLOC_OUTPUT/<name>
//!
//! [device]
//! kind = "rough"                # rough | smooth | file
//! # path = "device.mlc"         # for kind = "file": a fine-grid device with impulse responses
//! seed = 2024
//! fine_directions = 360         # source grid
//! model_directions = 36         # model grid
//! sample_rate = 16000
//! window_len = 1024
//!
//! [band]
//! fmin_hz = 0.0
//! fmax_hz = 8000.0
//!
//! [method]
//! kind = "white"                # white | nmf-prototype | nmf-usm
//! divergence = "itakura-saito"  # or "euclidean"
//! lambda = 1.0
//! gamma = 0.1
//! iters = 100
//! init = { type = "deterministic" }   # or { type = "random", seed = 1 }
//! # dictionary = "usm.mlc"      # nmf-usm: a trained dictionary, or train one on the fly:
//! # train = { female = 20, male = 0, first_identity = 0, k = 10, duration_s = 2.0, iters = 200, seed = 1 }
//!
//! [multires]                    # optional, NMF methods only
//! candidates = 7
//! fine_step_deg = 2.0
//! neighbors = 4
//! lambda = 1.0
//! gamma = 0.1
//!
//! [sources]
//! kind = "white"                # white | speakers
//! duration_s = 1.0
//! count = 10                    # white pool size
//! # female = 10                # speakers: class counts
//! # male = 0
//! # first_identity = 1000
//! seed = 1
//! # fresh_content = true        # defaults to false for nmf-prototype
//!
//! [trials]
//! j = [1, 2]
//! snr_db = [10.0, 20.0, 30.0]   # inf for noiseless
//! trials = 100
//! seed = 7
//! bin_width_deg = 10.0
//! ```

use std::path::{Path, PathBuf};

use monoloc::doa::{Init, MultiresConfig};
use monoloc::experiment::Method;
use monoloc::nmf::Divergence;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Environment variable holding the default output root.
pub const OUTPUT_ENV: &str = "MONOLOC_OUTPUT";
pub const DEFAULT_OUTPUT: &str = "monoloc-out";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub device: DeviceConfig,
    #[serde(default)]
    pub band: BandConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub multires: Option<MultiresConfig>,
    pub sources: SourcesConfig,
    pub trials: TrialsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    Rough,
    Smooth,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub kind: DeviceKind,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d360")]
    pub fine_directions: usize,
    #[serde(default = "d36")]
    pub model_directions: usize,
    #[serde(default = "sr")]
    pub sample_rate: u32,
    #[serde(default = "wl")]
    pub window_len: usize,
}

fn d360() -> usize {
    360
}
fn d36() -> usize {
    36
}
fn sr() -> u32 {
    16000
}
fn wl() -> usize {
    1024
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            fmin_hz: 0.0,
            fmax_hz: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub kind: Method,
    #[serde(default = "is")]
    pub divergence: Divergence,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "iters")]
    pub iters: usize,
    #[serde(default = "deterministic")]
    pub init: Init,
    #[serde(default)]
    pub dictionary: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
}

fn is() -> Divergence {
    Divergence::ItakuraSaito
}
fn iters() -> usize {
    100
}
fn deterministic() -> Init {
    Init::Deterministic
}

/// Inline USM training on synthetic speakers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub female: usize,
    #[serde(default)]
    pub male: usize,
    #[serde(default)]
    pub first_identity: u64,
    #[serde(default = "k10")]
    pub k: usize,
    #[serde(default = "two")]
    pub duration_s: f64,
    #[serde(default = "train_iters")]
    pub iters: usize,
    #[serde(default)]
    pub seed: u64,
}

fn k10() -> usize {
    10
}
fn two() -> f64 {
    2.0
}
fn train_iters() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKindConfig {
    White,
    Speakers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    pub kind: SourceKindConfig,
    pub duration_s: f64,
    #[serde(default = "ten")]
    pub count: usize,
    #[serde(default)]
    pub female: usize,
    #[serde(default)]
    pub male: usize,
    #[serde(default)]
    pub first_identity: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fresh_content: Option<bool>,
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsConfig {
    pub j: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "bin")]
    pub bin_width_deg: f64,
}

fn bin() -> f64 {
    10.0
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(bad("name must be a nonempty plain file name"));
        }
        let d = &self.device;
        if d.kind == DeviceKind::File {
            match &d.path {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(bad(format!("device file {} does not exist", p.display()))),
                None => return Err(bad("device kind `file` needs a path")),
            }
        }
        if d.model_directions == 0 || d.fine_directions == 0 {
            return Err(bad("direction grids must be nonempty"));
        }
        if d.kind != DeviceKind::File && !d.fine_directions.is_multiple_of(d.model_directions) {
            return Err(bad("fine_directions must be a multiple of model_directions"));
        }
        if !(self.band.fmin_hz >= 0.0 && self.band.fmax_hz > self.band.fmin_hz) {
            return Err(bad("band needs 0 <= fmin_hz < fmax_hz"));
        }
        let m = &self.method;
        if !(m.lambda >= 0.0 && m.gamma >= 0.0) || m.iters == 0 {
            return Err(bad("method needs lambda, gamma >= 0 and iters >= 1"));
        }
        if m.kind == Method::NmfUsm {
            match (&m.dictionary, &m.train) {
                (Some(p), None) if p.is_file() => {}
                (Some(p), None) => return Err(bad(format!("dictionary {} does not exist", p.display()))),
                (None, Some(t)) if t.female + t.male > 0 && t.k > 0 && t.iters > 0 => {}
                (None, Some(_)) => return Err(bad("method.train needs speakers, k >= 1 and iters >= 1")),
                _ => return Err(bad("nmf-usm needs exactly one of method.dictionary and method.train")),
            }
        } else if m.dictionary.is_some() || m.train.is_some() {
            return Err(bad("only nmf-usm takes a dictionary"));
        }
        if let Some(mr) = &self.multires {
            if m.kind == Method::White {
                return Err(bad("multires applies to NMF methods only"));
            }
            for &j in &self.trials.j {
                mr.validate(j).map_err(|e| bad(e.to_string()))?;
            }
        }
        let s = &self.sources;
        if !(s.duration_s > 0.0) {
            return Err(bad("sources.duration_s must be positive"));
        }
        match s.kind {
            SourceKindConfig::White if s.count == 0 => return Err(bad("sources.count must be positive")),
            SourceKindConfig::Speakers if s.female + s.male == 0 => {
                return Err(bad("sources need at least one speaker"))
            }
            _ => {}
        }
        let t = &self.trials;
        if t.j.is_empty() || t.snr_db.is_empty() || t.trials == 0 {
            return Err(bad("trials need nonempty j and snr_db lists and trials >= 1"));
        }
        if t.j.iter().any(|&j| j == 0 || j > monoloc::eval::MAX_SOURCES || j > d.model_directions) {
            return Err(bad("every J must be between 1 and min(8, model_directions)"));
        }
        if t.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(bad("snr_db entries must be numbers or inf"));
        }
        if !(t.bin_width_deg > 0.0) {
            return Err(bad("bin_width_deg must be positive"));
        }
        Ok(())
    }

    /// Prototype runs replay the exact pool content unless told otherwise.
    pub fn fresh_content(&self) -> bool {
        self.sources
            .fresh_content
            .unwrap_or(self.method.kind != Method::NmfPrototype)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| output_root().join(&self.name))
    }

    /// Hex SHA-256 of the canonical JSON form of the parsed config. The
    /// output location does not count.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}
