//! The multiple-short-code receiver: per-segment OSD, sentence-level
//! correction, confidence-based error identification, and list decoding of
//! the unreliable segments.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{modulate, transmit, SoftObservation};
use crate::code::LinearCode;
use crate::confidence::{form_error_set, SegmentVerdict, DEFAULT_T_SEC};
use crate::error::{invalid, Error, Result};
use crate::osd::{decode_view, prepare, reencode_candidate, DecodeResult, PermutedView};
use crate::semantic::{extract, mask_segments, CandidateProvider, CorrectionRequest, ExtractionReport, DEFAULT_NUM_CANDIDATES};
use crate::textcodec::{from_bits, segment_to, split_segments, to_bits, to_bits_lossless, SentenceFrame, PAD};

/// Receiver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub osd_order: usize,
    pub t_sec: f64,
    /// List size V requested from the provider.
    pub num_candidates: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { osd_order: 2, t_sec: DEFAULT_T_SEC, num_candidates: DEFAULT_NUM_CANDIDATES }
    }
}

/// What the receiver knows about a frame: q segments of `l_msc` chars.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameShape {
    pub q: usize,
    pub l_msc: usize,
}

impl FrameShape {
    pub fn of(frame: &SentenceFrame) -> Self {
        FrameShape { q: frame.q, l_msc: frame.l_msc }
    }

    pub fn frame_len(&self) -> usize {
        self.q * self.l_msc
    }
}

/// Splits `text` into `q` segments of exactly `k_bits / 8` chars each,
/// padding with NULs. Fails when the sentence does not fit.
pub fn frame_sentence(text: &str, q: usize, k_bits: usize) -> Result<SentenceFrame> {
    if k_bits % 8 != 0 || k_bits == 0 {
        return Err(invalid(format!("segment payload of {k_bits} bits is not a whole number of chars")));
    }
    let l = k_bits / 8;
    let frame = segment_to(text, q, q * l)?;
    if frame.l_msc != l {
        return Err(invalid(format!("sentence of {} chars does not fit {q} segments of {l} chars", text.chars().count())));
    }
    Ok(frame)
}

/// Encodes every segment and passes it through the channel.
pub fn transmit_frame<R: Rng + ?Sized>(
    code: &LinearCode,
    frame: &SentenceFrame,
    snr_db: f64,
    rng: &mut R,
) -> Result<Vec<SoftObservation>> {
    frame
        .bitstreams
        .iter()
        .map(|b| Ok(transmit(&modulate(&code.encode(b)?), snr_db, rng)))
        .collect()
}

/// Per-segment decoding context: the code a segment was decoded with and
/// the ordered view of its observation.
#[derive(Debug, Clone)]
pub struct SegmentContext<'a> {
    pub code: &'a LinearCode,
    pub view: PermutedView,
}

/// Output of the channel-decoding stage.
#[derive(Debug, Clone)]
pub struct MscOutput<'a> {
    /// Padded sentence, `q * l_msc` chars.
    pub text: String,
    pub decodes: Vec<DecodeResult>,
    pub contexts: Vec<SegmentContext<'a>>,
}

/// Decodes each segment independently (in parallel) and reassembles the
/// padded sentence.
pub fn run_msc<'a>(
    code: &'a LinearCode,
    shape: FrameShape,
    observations: &[SoftObservation],
    osd_order: usize,
) -> Result<MscOutput<'a>> {
    if observations.len() != shape.q {
        return Err(invalid(format!("expected {} observations, got {}", shape.q, observations.len())));
    }
    if code.k() != 8 * shape.l_msc {
        return Err(invalid(format!("code carries {} bits, segments need {}", code.k(), 8 * shape.l_msc)));
    }
    let decoded: Vec<(PermutedView, DecodeResult)> = observations
        .par_iter()
        .map(|obs| {
            let view = prepare(code, obs)?;
            let dec = decode_view(&view, osd_order)?;
            Ok((view, dec))
        })
        .collect::<Result<_>>()?;
    let mut text = String::new();
    let mut decodes = Vec::with_capacity(shape.q);
    let mut contexts = Vec::with_capacity(shape.q);
    for (view, dec) in decoded {
        text.push_str(&from_bits(&dec.info));
        decodes.push(dec);
        contexts.push(SegmentContext { code, view });
    }
    Ok(MscOutput { text, decodes, contexts })
}

/// Sentence correction outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SecOutput {
    /// Padded sentence, `frame_len` chars.
    pub text: String,
    /// Provider failure message when the input was passed through.
    pub fallback: Option<String>,
}

/// Asks the provider to correct the (unpadded) sentence. Any provider
/// failure, or an answer that does not fit the frame, leaves the input
/// unchanged.
pub fn run_sec(provider: &dyn CandidateProvider, msc_text: &str, shape: FrameShape) -> SecOutput {
    let request = CorrectionRequest::correct(msc_text.trim_end_matches(PAD), shape.l_msc);
    let outcome = provider.correct(&request).and_then(|out| {
        let n = out.chars().count();
        if n > shape.frame_len() {
            return Err(Error::Provider(format!("corrected sentence has {n} chars, frame holds {}", shape.frame_len())));
        }
        if let Some(c) = out.chars().find(|&c| c as u32 > 0xFF) {
            return Err(Error::Provider(format!("corrected sentence contains {c:?}")));
        }
        Ok(pad_to(&out, shape.frame_len()))
    });
    match outcome {
        Ok(text) => SecOutput { text, fallback: None },
        Err(e) => SecOutput { text: msc_text.to_string(), fallback: Some(e.to_string()) },
    }
}

fn pad_to(s: &str, len: usize) -> String {
    let mut out = s.to_string();
    out.extend(std::iter::repeat_n(PAD, len.saturating_sub(s.chars().count())));
    out
}

/// Confidence verdict for every segment of a padded sentence.
pub fn segment_verdicts(contexts: &[SegmentContext<'_>], text: &str, shape: FrameShape, threshold: f64) -> Result<Vec<SegmentVerdict>> {
    let segs = split_segments(text, shape.l_msc);
    if segs.len() != contexts.len() {
        return Err(invalid(format!("{} segments for {} contexts", segs.len(), contexts.len())));
    }
    segs.iter()
        .zip(contexts)
        .enumerate()
        .map(|(i, (s, ctx))| {
            let info = to_bits_lossless(s)?;
            SegmentVerdict::evaluate(i, ctx.code, &ctx.view, &info, threshold)
        })
        .collect()
}

/// Scores every segment of the corrected sentence and returns the indices
/// scoring below `t_sec` with all verdicts.
pub fn identify_errors(
    contexts: &[SegmentContext<'_>],
    sec_text: &str,
    shape: FrameShape,
    t_sec: f64,
) -> Result<(Vec<usize>, Vec<SegmentVerdict>)> {
    let verdicts = segment_verdicts(contexts, sec_text, shape, t_sec)?;
    let scores: Vec<f64> = verdicts.iter().map(|v| v.score).collect();
    Ok((form_error_set(&scores, t_sec), verdicts))
}

/// The candidate chosen for one segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub candidate: String,
    pub whd: f64,
    /// Position of the winner in the segment's candidate list.
    pub rank: usize,
}

/// Degradations met while list decoding.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SldDiagnostics {
    /// Provider failure message; the corrected sentence was kept.
    pub fill_error: Option<String>,
    pub extraction: ExtractionReport,
    /// Candidates dropped because they are not 7-bit ASCII.
    pub non_ascii_candidates: usize,
    /// Error-set segments left unchanged for lack of usable candidates.
    pub extraction_errors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SldOutput {
    pub text: String,
    pub selected: BTreeMap<usize, Selection>,
    pub diagnostics: SldDiagnostics,
}

/// Masks the error set, asks for `v` completions, cuts per-segment
/// candidates out of them and keeps, per segment, the candidate whose
/// re-encoding is closest in WHD to the observation. Ties go to the earlier
/// candidate.
pub fn run_sld(
    provider: &dyn CandidateProvider,
    contexts: &[SegmentContext<'_>],
    sec_text: &str,
    s_err: &[usize],
    shape: FrameShape,
    v: usize,
) -> Result<SldOutput> {
    let mut diagnostics = SldDiagnostics::default();
    let mut selected = BTreeMap::new();
    if s_err.is_empty() {
        return Ok(SldOutput { text: sec_text.to_string(), selected, diagnostics });
    }
    let l = shape.l_msc;
    let mut segments = split_segments(sec_text, l);
    if segments.len() != shape.q || segments.iter().any(|s| s.chars().count() != l) {
        return Err(invalid("corrected sentence does not match the frame shape"));
    }
    let masked = mask_segments(sec_text, s_err, l);
    let request = CorrectionRequest::fill(masked.trim_end_matches(PAD), s_err.to_vec(), l, v);
    let candidates = match provider.fill(&request) {
        Ok(c) => c,
        Err(e) => {
            diagnostics.fill_error = Some(e.to_string());
            diagnostics.extraction_errors = s_err.to_vec();
            return Ok(SldOutput { text: sec_text.to_string(), selected, diagnostics });
        }
    };
    let layout: Vec<Option<String>> =
        segments.iter().enumerate().map(|(i, s)| if s_err.contains(&i) { None } else { Some(s.clone()) }).collect();
    let (sets, report) = extract(&candidates, &layout, l, shape.frame_len());
    diagnostics.extraction = report;

    for (&i, set) in &sets {
        let ctx = &contexts[i];
        let mut best: Option<Selection> = None;
        for (rank, cand) in set.candidates.iter().enumerate() {
            let Ok(info) = to_bits(cand) else {
                diagnostics.non_ascii_candidates += 1;
                continue;
            };
            let whd = reencode_candidate(ctx.code, &ctx.view, &info)?.whd;
            if best.as_ref().is_none_or(|b| whd < b.whd) {
                best = Some(Selection { candidate: cand.clone(), whd, rank });
            }
        }
        match best {
            Some(sel) => {
                segments[i] = sel.candidate.clone();
                selected.insert(i, sel);
            }
            None => diagnostics.extraction_errors.push(i),
        }
    }
    Ok(SldOutput { text: segments.concat(), selected, diagnostics })
}

/// Wall-clock time spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub msc: Duration,
    pub sec: Duration,
    pub sld: Duration,
}

/// Everything the receiver produced for one sentence. Texts are padded to
/// the frame length.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub msc: String,
    pub sec: String,
    pub sld: String,
    pub error_set: Vec<usize>,
    pub msc_verdicts: Vec<SegmentVerdict>,
    pub sec_verdicts: Vec<SegmentVerdict>,
    pub sld_verdicts: Vec<SegmentVerdict>,
    pub selected: BTreeMap<usize, Selection>,
    pub sec_fallback: Option<String>,
    pub sld_diagnostics: SldDiagnostics,
    pub timings: StageTimings,
}

impl PipelineResult {
    /// Sentence-level scores used to pick segments for retransmission.
    pub fn sld_scores(&self) -> Vec<f64> {
        self.sld_verdicts.iter().map(|v| v.score).collect()
    }
}

/// Runs correction, error identification and list decoding on an already
/// channel-decoded sentence.
pub fn run_semantic(
    provider: &dyn CandidateProvider,
    contexts: &[SegmentContext<'_>],
    msc_text: &str,
    shape: FrameShape,
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    let msc_verdicts = segment_verdicts(contexts, msc_text, shape, config.t_sec)?;

    let t = Instant::now();
    let sec = run_sec(provider, msc_text, shape);
    let sec_time = t.elapsed();

    let t = Instant::now();
    let (error_set, sec_verdicts) = identify_errors(contexts, &sec.text, shape, config.t_sec)?;
    let sld = run_sld(provider, contexts, &sec.text, &error_set, shape, config.num_candidates)?;
    let sld_time = t.elapsed();
    let sld_verdicts = if sld.selected.is_empty() {
        sec_verdicts.clone()
    } else {
        segment_verdicts(contexts, &sld.text, shape, config.t_sec)?
    };

    Ok(PipelineResult {
        msc: msc_text.to_string(),
        sec: sec.text,
        sld: sld.text,
        error_set,
        msc_verdicts,
        sec_verdicts,
        sld_verdicts,
        selected: sld.selected,
        sec_fallback: sec.fallback,
        sld_diagnostics: sld.diagnostics,
        timings: StageTimings { msc: Duration::ZERO, sec: sec_time, sld: sld_time },
    })
}

/// The full receiver for one sentence.
pub fn run_pipeline(
    code: &LinearCode,
    provider: &dyn CandidateProvider,
    shape: FrameShape,
    observations: &[SoftObservation],
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    let t = Instant::now();
    let msc = run_msc(code, shape, observations, config.osd_order)?;
    let msc_time = t.elapsed();
    let mut result = run_semantic(provider, &msc.contexts, &msc.text, shape, config)?;
    result.timings.msc = msc_time;
    Ok(result)
}
