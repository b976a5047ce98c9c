//! Builds the simulation objects from a config and runs the Monte Carlo
//! sweep, one independent work item per (SNR point, sentence).

use std::path::Path;
use std::time::{Duration, Instant};

use msclab::bp::LdpcCode;
use msclab::channel::sentence_rng;
use msclab::code::MAX_DMIN_K;
use msclab::crc::{crc_augment, CrcCodec};
use msclab::harq::{run_crc_harq, run_sharq, HarqConfig, LongCodeLink};
use msclab::metrics::{summarize, Proportion, ScoreRow, Stage};
use msclab::pipeline::{frame_sentence, run_pipeline, transmit_frame, FrameShape, PipelineConfig};
use msclab::semantic::{CandidateProvider, DictionaryProvider, ExternalProvider, IdentityProvider, NgramProvider};
use msclab::textcodec::{from_bits, to_bits, Corpus, PAD};
use msclab::{LinearCode, MotherCodeSchedule, SimRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CodeFamily, CodeSpec, ExperimentConfig, ProviderSpec};
use crate::error::{io_err, HarnessError, Result};

/// Builds the code a spec describes and checks its dimensions.
pub fn build_code(spec: &CodeSpec) -> Result<LinearCode> {
    let code = match spec.family {
        CodeFamily::Random => LinearCode::random(spec.n, spec.k, spec.seed)?,
        CodeFamily::File => LinearCode::from_generator_file(matrix_path(spec)?)?,
        CodeFamily::Alist => {
            let path = matrix_path(spec)?;
            let ldpc = LdpcCode::from_alist_file(path, msclab::bp::DEFAULT_BP_ITERATIONS)?;
            let g = ldpc.to_linear_code()?;
            LinearCode::new(g.generator().clone(), Some(ldpc.parity_check().clone()), format!("alist({})", path.display()))?
        }
    };
    if (code.n(), code.k()) != (spec.n, spec.k) {
        return Err(HarnessError::Config(vec![format!(
            "code is ({},{}) but the config says ({},{})",
            code.n(),
            code.k(),
            spec.n,
            spec.k
        )]));
    }
    Ok(code)
}

fn matrix_path(spec: &CodeSpec) -> Result<&Path> {
    spec.matrix.as_deref().ok_or_else(|| HarnessError::Config(vec!["code family needs a matrix path".into()]))
}

/// OSD order from the spec, or ⌊d_min/4 − 1⌋ when d_min is computable,
/// or 2.
pub fn resolve_order(spec: &CodeSpec, code: &LinearCode) -> Result<usize> {
    if let Some(m) = spec.osd_order {
        return Ok(m);
    }
    if code.k() <= MAX_DMIN_K {
        if let Some(m) = code.clone().with_min_distance()?.default_osd_order() {
            return Ok(m);
        }
    }
    Ok(2)
}

/// Starts the configured provider.
pub fn build_provider(spec: &ProviderSpec, default_corpus: &[String]) -> Result<Box<dyn CandidateProvider>> {
    let corpus_for = |path: &Option<std::path::PathBuf>| -> Result<Vec<String>> {
        match path {
            Some(p) => Ok(Corpus::load(p)?.sentences),
            None => Ok(default_corpus.to_vec()),
        }
    };
    let startup = |e: msclab::Error| HarnessError::ProviderStartup(e.to_string());
    Ok(match spec {
        ProviderSpec::Identity => Box::new(IdentityProvider),
        ProviderSpec::Dictionary { corpus } => Box::new(DictionaryProvider::new(&corpus_for(corpus)?).map_err(startup)?),
        ProviderSpec::Ngram { order, beam, delta, corpus } => {
            Box::new(NgramProvider::train(&corpus_for(corpus)?, *order, *delta, *beam).map_err(startup)?)
        }
        ProviderSpec::External { command, timeout_s } => {
            Box::new(ExternalProvider::spawn(command, Duration::from_secs(*timeout_s)).map_err(startup)?)
        }
    })
}

/// Reads a schedule file: one line of whitespace-separated positions per round.
pub fn load_schedule(mother: LinearCode, path: &Path) -> Result<MotherCodeSchedule> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut rounds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let round = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::Config(vec![format!("{}:{}: {e}", path.display(), i + 1)]))?;
        rounds.push(round);
    }
    Ok(MotherCodeSchedule::new(mother, rounds)?)
}

/// Counters collected alongside the scores.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub sentences: usize,
    pub sec_fallbacks: usize,
    pub fill_errors: usize,
    pub extraction_errors: usize,
    pub non_ascii_candidates: usize,
    pub sld_replaced_segments: usize,
    pub harq_bits_used: usize,
    pub harq_retransmitted_segments: usize,
    pub harq_unresolved_segments: usize,
    pub crc_bits_used: usize,
    pub crc_undetected_segments: usize,
    pub lc_unconverged: usize,
    pub lc_harq_bits_used: usize,
}

impl Diagnostics {
    fn merge(&mut self, o: &Diagnostics) {
        self.sentences += o.sentences;
        self.sec_fallbacks += o.sec_fallbacks;
        self.fill_errors += o.fill_errors;
        self.extraction_errors += o.extraction_errors;
        self.non_ascii_candidates += o.non_ascii_candidates;
        self.sld_replaced_segments += o.sld_replaced_segments;
        self.harq_bits_used += o.harq_bits_used;
        self.harq_retransmitted_segments += o.harq_retransmitted_segments;
        self.harq_unresolved_segments += o.harq_unresolved_segments;
        self.crc_bits_used += o.crc_bits_used;
        self.crc_undetected_segments += o.crc_undetected_segments;
        self.lc_unconverged += o.lc_unconverged;
        self.lc_harq_bits_used += o.lc_harq_bits_used;
    }
}

/// One aggregate line of the result table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub config_hash: String,
    pub stage: Stage,
    pub snr_db: f64,
    pub bler: Proportion,
    pub bleu: f64,
    pub rouge_l: f64,
    pub frames: usize,
    pub time_ms_mean: Option<f64>,
    pub provider: String,
    pub code_source: String,
}

/// All sentences simulated at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub scores: Vec<ScoreRow>,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub config_hash: String,
    pub points: Vec<SnrPoint>,
    pub rows: Vec<ResultRow>,
}

impl RunOutput {
    pub fn row(&self, snr_db: f64, stage: Stage) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.stage == stage && r.snr_db == snr_db)
    }
}

// stream tags; tag 0 leaves the master seed unchanged
const TAG_SHARQ: u64 = 1;
const TAG_CRC: u64 = 2;
const TAG_LC: u64 = 3;
const TAG_LC_HARQ: u64 = 4;

fn stage_rng(seed: u64, tag: u64, snr_idx: usize, sentence: usize) -> SimRng {
    sentence_rng(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15), snr_idx, sentence)
}

struct HarqSetup {
    schedule: MotherCodeSchedule,
    config: HarqConfig,
    osd_order: usize,
    crc: Option<(CrcCodec, usize)>,
}

struct LcSetup {
    link: LongCodeLink,
    chars: usize,
    first_bits: Option<usize>,
    budget_bits: usize,
    source: String,
}

/// A validated experiment with its codes and provider ready.
pub struct Experiment {
    config: ExperimentConfig,
    hash: String,
    code: LinearCode,
    provider: Box<dyn CandidateProvider>,
    sentences: Vec<String>,
    harq: Option<HarqSetup>,
    lc: Option<LcSetup>,
}

impl std::fmt::Debug for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Experiment").field("hash", &self.hash).field("provider", &self.provider.name()).finish()
    }
}

impl Experiment {
    /// Validates the config, builds codes and starts the provider. OSD
    /// orders left open are filled in, so `config()` is the resolved form.
    pub fn new(mut config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let code = build_code(&config.code)?;
        config.code.osd_order = Some(resolve_order(&config.code, &code)?);

        let corpus = Corpus::load(&config.corpus)?;
        if corpus.is_empty() {
            return Err(HarnessError::Config(vec![format!("corpus {} has no usable sentences", config.corpus.display())]));
        }
        let used = config.num_sentences.min(corpus.len());
        let sentences = corpus.sentences[..used].to_vec();
        let longest = sentences.iter().map(|s| s.chars().count()).max().unwrap_or(0);
        let mut errs = Vec::new();
        let msc_chars = config.q * config.code.k / 8;
        if longest > msc_chars {
            errs.push(format!("longest sentence has {longest} chars; q={} segments of the code carry {msc_chars}", config.q));
        }

        let harq = match config.harq.as_mut() {
            None => None,
            Some(h) => {
                let mother = build_code(&h.mother)?;
                h.mother.osd_order = Some(resolve_order(&h.mother, &mother)?);
                let schedule = match (&h.round_sizes, &h.schedule) {
                    (Some(sizes), _) => MotherCodeSchedule::from_round_sizes(mother, sizes)?,
                    (None, Some(path)) => load_schedule(mother, path)?,
                    (None, None) => unreachable!("validated"),
                };
                let chars = config.q * h.mother.k / 8;
                if longest > chars {
                    errs.push(format!("longest sentence has {longest} chars; the HARQ frame carries {chars}"));
                }
                let crc = match h.crc {
                    None => None,
                    Some(spec) => {
                        let codec = crc_augment(h.mother.k, spec)?;
                        let per = codec.payload_len() / 8;
                        Some((codec, chars.div_ceil(per)))
                    }
                };
                let config = HarqConfig { budget_bits: h.budget_bits, policy: h.policy, max_rounds: h.max_rounds, t_harq: config.t_harq };
                Some(HarqSetup { schedule, config, osd_order: h.mother.osd_order.unwrap_or(2), crc })
            }
        };

        let lc = match &config.lc {
            None => None,
            Some(spec) => {
                let ldpc = LdpcCode::from_alist_file(&spec.alist, spec.bp_iterations)?;
                let link = LongCodeLink::new(ldpc)?;
                if link.k() < 8 * msc_chars {
                    errs.push(format!("lc code carries {} bits; the sentence frame needs {}", link.k(), 8 * msc_chars));
                }
                if spec.first_bits.is_some_and(|f| f > link.n()) {
                    errs.push(format!("lc.first_bits exceeds n = {}", link.n()));
                }
                let source = format!("ldpc-alist({},n={},k={})", spec.alist.display(), link.n(), link.k());
                Some(LcSetup { link, chars: msc_chars, first_bits: spec.first_bits, budget_bits: spec.budget_bits, source })
            }
        };
        if !errs.is_empty() {
            return Err(HarnessError::Config(errs));
        }

        let provider = build_provider(&config.provider, &corpus.sentences)?;
        let hash = config.hash();
        Ok(Experiment { config, hash, code, provider, sentences, harq, lc })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    fn pipeline_config(&self, osd_order: usize) -> PipelineConfig {
        PipelineConfig { osd_order, t_sec: self.config.t_sec, num_candidates: self.config.num_candidates }
    }

    fn sentence(&self, i: usize) -> &str {
        &self.sentences[i % self.sentences.len()]
    }

    fn ms(&self, d: Duration) -> f64 {
        if self.config.record_timing {
            d.as_secs_f64() * 1e3
        } else {
            0.0
        }
    }

    fn simulate(&self, snr_idx: usize, snr: f64, id: usize) -> Result<(Vec<ScoreRow>, Diagnostics)> {
        let text = self.sentence(id);
        let seed = self.config.seed;
        let mut rows = Vec::with_capacity(7);
        let mut diag = Diagnostics { sentences: 1, ..Default::default() };

        let frame = frame_sentence(text, self.config.q, self.code.k())?;
        let mut rng = sentence_rng(seed, snr_idx, id);
        let obs = transmit_frame(&self.code, &frame, snr, &mut rng)?;
        let res = run_pipeline(
            &self.code,
            self.provider.as_ref(),
            FrameShape::of(&frame),
            &obs,
            &self.pipeline_config(self.config.code.osd_order.unwrap_or(2)),
        )?;
        let t = res.timings;
        rows.push(ScoreRow::score(id, Stage::Msc, &res.msc, text, self.ms(t.msc)));
        rows.push(ScoreRow::score(id, Stage::MscSec, &res.sec, text, self.ms(t.msc + t.sec)));
        rows.push(ScoreRow::score(id, Stage::MscSld, &res.sld, text, self.ms(t.msc + t.sec + t.sld)));
        diag.sec_fallbacks += res.sec_fallback.is_some() as usize;
        diag.fill_errors += res.sld_diagnostics.fill_error.is_some() as usize;
        diag.extraction_errors += res.sld_diagnostics.extraction_errors.len();
        diag.non_ascii_candidates += res.sld_diagnostics.non_ascii_candidates;
        diag.sld_replaced_segments += res.selected.len();

        if let Some(h) = &self.harq {
            let frame = frame_sentence(text, self.config.q, h.schedule.mother().k())?;
            let mut rng = stage_rng(seed, TAG_SHARQ, snr_idx, id);
            let start = Instant::now();
            let out = run_sharq(
                &h.schedule,
                h.config,
                self.provider.as_ref(),
                &frame,
                snr,
                &self.pipeline_config(h.osd_order),
                &mut rng,
            )?;
            rows.push(ScoreRow::score(id, Stage::Sharq, &out.last.sld, text, self.ms(start.elapsed())));
            diag.harq_bits_used += out.bits_used;
            diag.harq_retransmitted_segments += out.retransmitted.iter().map(Vec::len).sum::<usize>();
            diag.harq_unresolved_segments += out.unresolved.len();

            if let Some((codec, q_crc)) = &h.crc {
                let frame = frame_sentence(text, *q_crc, codec.payload_len())?;
                let mut rng = stage_rng(seed, TAG_CRC, snr_idx, id);
                let start = Instant::now();
                let out = run_crc_harq(&h.schedule, codec, h.config, &frame, snr, h.osd_order, &mut rng)?;
                rows.push(ScoreRow::score(id, Stage::CrcHarq, &out.text, text, self.ms(start.elapsed())));
                diag.crc_bits_used += out.bits_used;
                diag.crc_undetected_segments += out.undetected;
            }
        }

        if let Some(lc) = &self.lc {
            let padded: String = text.chars().chain(std::iter::repeat(PAD)).take(lc.chars).collect();
            let payload = to_bits(&padded)?;
            let n = lc.link.n();
            let mut rng = stage_rng(seed, TAG_LC, snr_idx, id);
            let start = Instant::now();
            let out = lc.link.transmit(&payload, snr, n, 0, &mut rng)?;
            rows.push(ScoreRow::score(id, Stage::Lc, &from_bits(&out.payload), text, self.ms(start.elapsed())));
            diag.lc_unconverged += !out.converged as usize;
            if let Some(first) = lc.first_bits {
                let mut rng = stage_rng(seed, TAG_LC_HARQ, snr_idx, id);
                let start = Instant::now();
                let out = lc.link.transmit(&payload, snr, first, lc.budget_bits, &mut rng)?;
                rows.push(ScoreRow::score(id, Stage::LcHarq, &from_bits(&out.payload), text, self.ms(start.elapsed())));
                diag.lc_harq_bits_used += out.bits_used;
            }
        }
        Ok((rows, diag))
    }

    fn code_source(&self, stage: Stage) -> String {
        match stage {
            Stage::Msc | Stage::MscSec | Stage::MscSld => self.code.source().to_string(),
            Stage::Sharq | Stage::CrcHarq => match &self.harq {
                Some(h) => format!("{} schedule={:?}", h.schedule.mother().source(), h.schedule.rounds().iter().map(Vec::len).collect::<Vec<_>>()),
                None => String::new(),
            },
            Stage::Lc | Stage::LcHarq => self.lc.as_ref().map(|l| l.source.clone()).unwrap_or_default(),
        }
    }

    /// Runs every (SNR, sentence) cell on `threads` worker threads (0 picks
    /// the machine default). Output does not depend on the thread count.
    pub fn run(&self, threads: usize) -> Result<RunOutput> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
        let n = self.config.num_sentences;
        let mut points = Vec::with_capacity(self.config.snr_db.len());
        for (snr_idx, &snr) in self.config.snr_db.iter().enumerate() {
            let cells: Vec<(Vec<ScoreRow>, Diagnostics)> =
                pool.install(|| (0..n).into_par_iter().map(|id| self.simulate(snr_idx, snr, id)).collect::<Result<_>>())?;
            let mut scores = Vec::with_capacity(n * 3);
            let mut diagnostics = Diagnostics::default();
            for (rows, d) in cells {
                scores.extend(rows);
                diagnostics.merge(&d);
            }
            points.push(SnrPoint { snr_db: snr, scores, diagnostics });
        }
        let provider = self.provider.name().to_string();
        let mut rows = Vec::new();
        for p in &points {
            for s in summarize(&p.scores) {
                rows.push(ResultRow {
                    config_hash: self.hash.clone(),
                    stage: s.stage,
                    snr_db: p.snr_db,
                    bler: s.bler,
                    bleu: s.bleu,
                    rouge_l: s.rouge_l,
                    frames: s.bler.trials,
                    time_ms_mean: self.config.record_timing.then_some(s.time_ms_mean),
                    provider: provider.clone(),
                    code_source: self.code_source(s.stage),
                });
            }
        }
        Ok(RunOutput { config_hash: self.hash.clone(), points, rows })
    }
}

/// Convenience: validate, build and run in one call.
pub fn run_experiment(config: ExperimentConfig, threads: usize) -> Result<(Experiment, RunOutput)> {
    let exp = Experiment::new(config)?;
    let out = exp.run(threads)?;
    Ok((exp, out))
}
