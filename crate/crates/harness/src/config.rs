//! Experiment configuration: schema, defaults, path resolution, validation
//! and the config hash.

use std::path::{Path, PathBuf};

use msclab::bp::DEFAULT_BP_ITERATIONS;
use msclab::confidence::{DEFAULT_T_HARQ, DEFAULT_T_SEC};
use msclab::crc::CrcSpec;
use msclab::harq::{SelectionPolicy, DEFAULT_MAX_ROUNDS};
use msclab::semantic::DEFAULT_NUM_CANDIDATES;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// How a short code is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeFamily {
    /// Seeded random systematic generator.
    Random,
    /// Generator matrix in the `n k` text layout.
    File,
    /// Parity-check matrix in alist format.
    Alist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    pub family: CodeFamily,
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<PathBuf>,
    /// Filled in from the minimum distance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osd_order: Option<usize>,
}

impl CodeSpec {
    pub fn random(n: usize, k: usize, seed: u64) -> Self {
        CodeSpec { family: CodeFamily::Random, n, k, seed, matrix: None, osd_order: None }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.osd_order = Some(order);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProviderSpec {
    Identity,
    /// Nearest-sentence lookup; `corpus` defaults to the experiment corpus.
    Dictionary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corpus: Option<PathBuf>,
    },
    Ngram {
        #[serde(default = "default_ngram_order")]
        order: usize,
        #[serde(default = "default_beam")]
        beam: usize,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corpus: Option<PathBuf>,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout_s")]
        timeout_s: u64,
    },
}

impl ProviderSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ProviderSpec::Identity => "identity",
            ProviderSpec::Dictionary { .. } => "dictionary",
            ProviderSpec::Ngram { .. } => "ngram",
            ProviderSpec::External { .. } => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarqSpec {
    pub mother: CodeSpec,
    /// Round sizes over the mother code, taken in column order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_sizes: Option<Vec<usize>>,
    /// Explicit schedule: one line of column indices per round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PathBuf>,
    #[serde(default = "default_budget")]
    pub budget_bits: usize,
    #[serde(default = "default_policy")]
    pub policy: SelectionPolicy,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    /// Adds the CRC-HARQ baseline when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crc: Option<CrcSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcSpec {
    pub alist: PathBuf,
    #[serde(default = "default_bp_iterations")]
    pub bp_iterations: usize,
    /// Positions sent in the first LC-HARQ round; no LC-HARQ row without it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_bits: Option<usize>,
    #[serde(default)]
    pub budget_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: CodeSpec,
    pub q: usize,
    pub snr_db: Vec<f64>,
    pub num_sentences: usize,
    pub seed: u64,
    /// One sentence per line; sentence `i` is line `i mod len`.
    pub corpus: PathBuf,
    pub provider: ProviderSpec,
    #[serde(default = "default_t_sec")]
    pub t_sec: f64,
    #[serde(default = "default_t_harq")]
    pub t_harq: f64,
    #[serde(default = "default_num_candidates")]
    pub num_candidates: usize,
    #[serde(default)]
    pub harq: Option<HarqSpec>,
    #[serde(default)]
    pub lc: Option<LcSpec>,
    pub output: PathBuf,
    /// Wall-clock columns stay empty unless set, keeping output reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_ngram_order() -> usize {
    msclab::semantic::ngram::DEFAULT_ORDER
}
fn default_beam() -> usize {
    16
}
fn default_delta() -> f64 {
    msclab::semantic::ngram::DEFAULT_SMOOTHING
}
fn default_timeout_s() -> u64 {
    msclab::semantic::bridge::DEFAULT_TIMEOUT.as_secs()
}
fn default_budget() -> usize {
    128
}
fn default_policy() -> SelectionPolicy {
    SelectionPolicy::Confidence
}
fn default_max_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}
fn default_bp_iterations() -> usize {
    DEFAULT_BP_ITERATIONS
}
fn default_t_sec() -> f64 {
    DEFAULT_T_SEC
}
fn default_t_harq() -> f64 {
    DEFAULT_T_HARQ
}
fn default_num_candidates() -> usize {
    DEFAULT_NUM_CANDIDATES
}

impl ExperimentConfig {
    /// Parses JSON and rebases relative paths on `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(vec![format!("schema: {e}")]))?;
        cfg.rebase(base_dir);
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output);
        if let Some(m) = self.code.matrix.as_mut() {
            fix(m);
        }
        match &mut self.provider {
            ProviderSpec::Dictionary { corpus: Some(c) } | ProviderSpec::Ngram { corpus: Some(c), .. } => fix(c),
            _ => {}
        }
        if let Some(h) = self.harq.as_mut() {
            if let Some(m) = h.mother.matrix.as_mut() {
                fix(m);
            }
            if let Some(s) = h.schedule.as_mut() {
                fix(s);
            }
        }
        if let Some(lc) = self.lc.as_mut() {
            fix(&mut lc.alist);
        }
    }

    /// Checks every field and referenced file; returns all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        check_code(&self.code, "code", &mut errs);
        if self.q == 0 {
            errs.push("q must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            errs.push("snr_db must list at least one point".into());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            errs.push("snr_db values must be finite".into());
        }
        if self.num_sentences == 0 {
            errs.push("num_sentences must be at least 1".into());
        }
        need_file(&self.corpus, "corpus", &mut errs);
        for (name, t) in [("t_sec", self.t_sec), ("t_harq", self.t_harq)] {
            if !(0.0..=1.0).contains(&t) {
                errs.push(format!("{name} must lie in [0, 1], got {t}"));
            }
        }
        if self.num_candidates == 0 {
            errs.push("num_candidates must be at least 1".into());
        }
        match &self.provider {
            ProviderSpec::Identity => {}
            ProviderSpec::Dictionary { corpus } => {
                if let Some(c) = corpus {
                    need_file(c, "provider.corpus", &mut errs);
                }
            }
            ProviderSpec::Ngram { order, beam, delta, corpus } => {
                if *order == 0 || *beam == 0 {
                    errs.push("provider.order and provider.beam must be at least 1".into());
                }
                if !(*delta > 0.0) {
                    errs.push("provider.delta must be positive".into());
                }
                if let Some(c) = corpus {
                    need_file(c, "provider.corpus", &mut errs);
                }
            }
            ProviderSpec::External { command, timeout_s } => {
                if command.is_empty() {
                    errs.push("provider.command must not be empty".into());
                }
                if *timeout_s == 0 {
                    errs.push("provider.timeout_s must be positive".into());
                }
            }
        }
        if let Some(h) = &self.harq {
            check_code(&h.mother, "harq.mother", &mut errs);
            match (&h.round_sizes, &h.schedule) {
                (Some(sizes), None) => {
                    if sizes.iter().sum::<usize>() != h.mother.n {
                        errs.push(format!("harq.round_sizes must sum to the mother length {}", h.mother.n));
                    }
                }
                (None, Some(path)) => need_file(path, "harq.schedule", &mut errs),
                _ => errs.push("harq needs exactly one of round_sizes or schedule".into()),
            }
            if h.max_rounds == 0 {
                errs.push("harq.max_rounds must be at least 1".into());
            }
            if let Some(crc) = h.crc {
                let payload = h.mother.k.saturating_sub(crc.width());
                if payload == 0 || payload % 8 != 0 {
                    errs.push(format!("harq.crc leaves {payload} payload bits; need a positive multiple of 8"));
                }
            }
        }
        if let Some(lc) = &self.lc {
            need_file(&lc.alist, "lc.alist", &mut errs);
            if lc.bp_iterations == 0 {
                errs.push("lc.bp_iterations must be at least 1".into());
            }
            if lc.first_bits == Some(0) {
                errs.push("lc.first_bits must be positive".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(errs))
        }
    }

    /// Canonical JSON (fields in declaration order, no whitespace).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let mut s = hex::encode(digest);
        s.truncate(16);
        s
    }
}

fn check_code(spec: &CodeSpec, name: &str, errs: &mut Vec<String>) {
    if spec.k == 0 || spec.k >= spec.n {
        errs.push(format!("{name}: need 0 < k < n, got n={}, k={}", spec.n, spec.k));
    }
    if spec.k % 8 != 0 {
        errs.push(format!("{name}: k={} is not a whole number of characters", spec.k));
    }
    match spec.family {
        CodeFamily::File | CodeFamily::Alist => match &spec.matrix {
            Some(p) => need_file(p, &format!("{name}.matrix"), errs),
            None => errs.push(format!("{name}: family {:?} needs a matrix path", spec.family)),
        },
        CodeFamily::Random => {}
    }
    if let Some(m) = spec.osd_order {
        if m > spec.k {
            errs.push(format!("{name}: osd_order {m} exceeds k={}", spec.k));
        }
    }
}

fn need_file(path: &Path, what: &str, errs: &mut Vec<String>) {
    if !path.is_file() {
        errs.push(format!("{what}: file {} does not exist", path.display()));
    }
}
