//! Segment-selective incremental-redundancy retransmission driven by
//! confidence scores, with CRC-triggered and long-code baselines.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bp::{bp_decode_llr, LdpcCode};
use crate::channel::{modulate, noise_variance, SoftObservation};
use crate::code::{systematic_form, LinearCode, MotherCodeSchedule};
use crate::confidence::{form_error_set, rank_for_retransmission, DEFAULT_T_HARQ};
use crate::crc::CrcCodec;
use crate::error::{invalid, Error, Result};
use crate::gf2::{BitVec, Gf2Matrix};
use crate::osd::{decode_view, prepare, DecodeResult};
use crate::pipeline::{run_pipeline, run_semantic, FrameShape, PipelineConfig, PipelineResult, SegmentContext};
use crate::semantic::CandidateProvider;
use crate::textcodec::{from_bits, split_segments, SentenceFrame};

pub const DEFAULT_MAX_ROUNDS: usize = 2;

/// How segments are picked from the retransmission set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPolicy {
    /// Lowest scores first.
    Confidence,
    /// Uniform sample from the set.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarqConfig {
    pub budget_bits: usize,
    pub policy: SelectionPolicy,
    pub max_rounds: usize,
    pub t_harq: f64,
}

impl Default for HarqConfig {
    fn default() -> Self {
        HarqConfig { budget_bits: 128, policy: SelectionPolicy::Confidence, max_rounds: DEFAULT_MAX_ROUNDS, t_harq: DEFAULT_T_HARQ }
    }
}

/// Overhead-free throughput advantage over a CRC of `k_crc` bits in a
/// `k`-bit payload: `k_crc / (k - k_crc)`.
pub fn throughput_gain(k: usize, k_crc: usize) -> Result<f64> {
    if k <= k_crc {
        return Err(invalid(format!("CRC of {k_crc} bits does not fit {k} bits")));
    }
    Ok(k_crc as f64 / (k - k_crc) as f64)
}

/// Fraction of the payload spent on the CRC.
pub fn crc_overhead(k: usize, k_crc: usize) -> Result<f64> {
    if k == 0 || k_crc > k {
        return Err(invalid(format!("CRC of {k_crc} bits does not fit {k} bits")));
    }
    Ok(k_crc as f64 / k as f64)
}

#[derive(Debug, Clone)]
struct SegmentState {
    /// Mother codeword in ±1 form plus the noise realization, drawn once so
    /// every position has a fixed received value.
    received: Vec<f64>,
    rounds: usize,
}

/// State of one sentence's retransmission session.
#[derive(Debug, Clone)]
pub struct HarqSession<'a> {
    schedule: &'a MotherCodeSchedule,
    codes: Vec<LinearCode>,
    config: HarqConfig,
    noise_variance: f64,
    round: usize,
    segments: Vec<SegmentState>,
    requested: Vec<usize>,
    budget_bits: usize,
}

impl<'a> HarqSession<'a> {
    pub fn new(schedule: &'a MotherCodeSchedule, config: HarqConfig) -> Result<Self> {
        if config.max_rounds == 0 {
            return Err(invalid("max_rounds must be at least 1"));
        }
        let codes = (1..=schedule.num_rounds()).map(|r| schedule.puncture(r)).collect::<Result<Vec<_>>>()?;
        Ok(HarqSession {
            schedule,
            codes,
            config,
            noise_variance: 1.0,
            round: 0,
            segments: Vec::new(),
            requested: Vec::new(),
            budget_bits: config.budget_bits,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn budget_bits(&self) -> usize {
        self.budget_bits
    }

    /// Every segment index ever selected for retransmission, in order.
    pub fn requested(&self) -> &[usize] {
        &self.requested
    }

    /// Rounds received so far by segment `i`.
    pub fn segment_rounds(&self, i: usize) -> usize {
        self.segments[i].rounds
    }

    /// Positions of the mother codeword received for segment `i`.
    pub fn received_positions(&self, i: usize) -> Vec<usize> {
        self.schedule.positions_through(self.segments[i].rounds)
    }

    /// Code matching what segment `i` has received.
    pub fn code_for(&self, i: usize) -> &LinearCode {
        &self.codes[self.segments[i].rounds - 1]
    }

    /// Accumulated observation of segment `i`, aligned with
    /// [`HarqSession::code_for`].
    pub fn observation(&self, i: usize) -> SoftObservation {
        let s = &self.segments[i];
        let values = self.received_positions(i).iter().map(|&p| s.received[p]).collect();
        SoftObservation::new(values, self.noise_variance).expect("positive variance")
    }

    /// Encodes each segment with the mother code and sends the first-round
    /// positions. Noise for all mother positions is drawn here.
    pub fn first_transmission<R: Rng + ?Sized>(
        &mut self,
        frame: &SentenceFrame,
        snr_db: f64,
        rng: &mut R,
    ) -> Result<Vec<SoftObservation>> {
        if self.round != 0 {
            return Err(invalid("first transmission already happened"));
        }
        self.noise_variance = noise_variance(snr_db);
        let sigma = self.noise_variance.sqrt();
        let mother = self.schedule.mother();
        self.segments = frame
            .bitstreams
            .iter()
            .map(|b| {
                let x = modulate(&mother.encode(b)?);
                let received = x
                    .iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(rng);
                        v + sigma * z
                    })
                    .collect();
                Ok(SegmentState { received, rounds: 1 })
            })
            .collect::<Result<_>>()?;
        self.round = 1;
        Ok((0..self.segments.len()).map(|i| self.observation(i)).collect())
    }

    /// Bits needed to send the next round of segment `i`, if there is one.
    fn next_round_bits(&self, i: usize) -> Option<usize> {
        self.schedule.rounds().get(self.segments[i].rounds).map(Vec::len)
    }

    /// Segments to retransmit given per-segment scores. Empty when the
    /// round limit is reached or nothing scores below the threshold.
    pub fn select_retransmissions<R: Rng + ?Sized>(&self, scores: &[f64], rng: &mut R) -> Vec<usize> {
        if self.round >= self.config.max_rounds || self.round == 0 {
            return Vec::new();
        }
        let eligible: Vec<usize> =
            form_error_set(scores, self.config.t_harq).into_iter().filter(|&i| self.next_round_bits(i).is_some()).collect();
        let Some(size) = eligible.first().and_then(|&i| self.next_round_bits(i)) else {
            return Vec::new();
        };
        let m = self.budget_bits / size;
        match self.config.policy {
            SelectionPolicy::Confidence => {
                let mut masked = scores.to_vec();
                for (i, s) in masked.iter_mut().enumerate() {
                    if !eligible.contains(&i) {
                        *s = f64::INFINITY;
                    }
                }
                rank_for_retransmission(&masked, self.config.t_harq, m)
            }
            SelectionPolicy::Random => {
                let take = m.min(eligible.len());
                let mut picked: Vec<usize> =
                    rand::seq::index::sample(rng, eligible.len(), take).into_iter().map(|j| eligible[j]).collect();
                picked.sort_unstable();
                picked
            }
        }
    }

    /// Delivers the next round of positions for `indices`.
    pub fn retransmit_and_combine(&mut self, indices: &[usize]) -> Result<()> {
        let mut needed = 0;
        for &i in indices {
            if i >= self.segments.len() {
                return Err(invalid(format!("segment {i} out of range")));
            }
            needed += self.next_round_bits(i).ok_or_else(|| invalid(format!("segment {i} has no rounds left")))?;
        }
        if needed > self.budget_bits {
            return Err(Error::Budget { needed, remaining: self.budget_bits });
        }
        for &i in indices {
            self.segments[i].rounds += 1;
            self.requested.push(i);
        }
        self.budget_bits -= needed;
        self.round += 1;
        Ok(())
    }
}

/// Result of one sentence under confidence-guided retransmission.
#[derive(Debug, Clone)]
pub struct SharqOutcome {
    /// Receiver output after the first transmission.
    pub first: PipelineResult,
    /// Receiver output after the last round.
    pub last: PipelineResult,
    /// Segments retransmitted in each extra round.
    pub retransmitted: Vec<Vec<usize>>,
    pub bits_used: usize,
    /// Segments still below the threshold when the session ended.
    pub unresolved: Vec<usize>,
}

/// Runs a full session: first transmission, receiver, then up to
/// `max_rounds - 1` retransmission rounds, each followed by a fresh pass of
/// correction and list decoding over the combined estimate.
pub fn run_sharq<R: Rng + ?Sized>(
    schedule: &MotherCodeSchedule,
    harq: HarqConfig,
    provider: &dyn CandidateProvider,
    frame: &SentenceFrame,
    snr_db: f64,
    config: &PipelineConfig,
    rng: &mut R,
) -> Result<SharqOutcome> {
    let mut session = HarqSession::new(schedule, harq)?;
    let shape = FrameShape::of(frame);
    let observations = session.first_transmission(frame, snr_db, rng)?;
    let first = run_pipeline(session.code_for(0), provider, shape, &observations, config)?;

    let mut last = first.clone();
    let mut retransmitted = Vec::new();
    loop {
        let selected = session.select_retransmissions(&last.sld_scores(), rng);
        if selected.is_empty() {
            break;
        }
        session.retransmit_and_combine(&selected)?;
        // selected segments are re-decoded; the others keep their list-decoded text
        let mut segments = split_segments(&last.sld, shape.l_msc);
        let mut contexts: Vec<SegmentContext<'_>> = Vec::with_capacity(shape.q);
        for i in 0..shape.q {
            let code = session.code_for(i);
            let view = prepare(code, &session.observation(i))?;
            if selected.contains(&i) {
                let dec: DecodeResult = decode_view(&view, config.osd_order)?;
                segments[i] = from_bits(&dec.info);
            }
            contexts.push(SegmentContext { code, view });
        }
        last = run_semantic(provider, &contexts, &segments.concat(), shape, config)?;
        retransmitted.push(selected);
    }
    let unresolved = form_error_set(&last.sld_scores(), harq.t_harq);
    Ok(SharqOutcome { first, last, retransmitted, bits_used: harq.budget_bits - session.budget_bits(), unresolved })
}

/// Segments whose decoded word fails the CRC.
pub fn crc_harq_round(codec: &CrcCodec, decodes: &[DecodeResult]) -> Vec<usize> {
    decodes.iter().enumerate().filter(|(_, d)| !codec.check(&d.info)).map(|(i, _)| i).collect()
}

/// Result of one sentence under CRC-triggered retransmission.
#[derive(Debug, Clone, PartialEq)]
pub struct CrcHarqOutcome {
    /// Padded sentence recovered from the payloads.
    pub text: String,
    /// Segments failing the CRC after the first round.
    pub first_failures: Vec<usize>,
    pub retransmitted: Vec<Vec<usize>>,
    pub bits_used: usize,
    /// Segments that passed the CRC with a wrong payload.
    pub undetected: usize,
}

/// CRC-aided baseline: each segment carries `payload + CRC` in the mother
/// code's `k` bits; failing segments are retransmitted in index order as
/// far as the budget allows.
pub fn run_crc_harq<R: Rng + ?Sized>(
    schedule: &MotherCodeSchedule,
    codec: &CrcCodec,
    harq: HarqConfig,
    frame: &SentenceFrame,
    snr_db: f64,
    osd_order: usize,
    rng: &mut R,
) -> Result<CrcHarqOutcome> {
    if codec.k() != schedule.mother().k() {
        return Err(invalid(format!("CRC codec covers {} bits, code carries {}", codec.k(), schedule.mother().k())));
    }
    let words: Vec<BitVec> = frame.bitstreams.iter().map(|b| codec.append(b)).collect::<Result<_>>()?;
    let wrapped = SentenceFrame { bitstreams: words, ..frame.clone() };
    let mut session = HarqSession::new(schedule, harq)?;
    session.first_transmission(&wrapped, snr_db, rng)?;
    let decode = |session: &HarqSession<'_>, i: usize| -> Result<DecodeResult> {
        let view = prepare(session.code_for(i), &session.observation(i))?;
        decode_view(&view, osd_order)
    };
    let mut decodes: Vec<DecodeResult> = (0..frame.q).map(|i| decode(&session, i)).collect::<Result<_>>()?;
    let first_failures = crc_harq_round(codec, &decodes);
    let mut failing = first_failures.clone();
    let mut retransmitted = Vec::new();
    while session.round() < harq.max_rounds {
        let mut affordable = Vec::new();
        let mut cost = 0;
        for &i in &failing {
            if let Some(b) = session.next_round_bits(i) {
                if cost + b <= session.budget_bits() {
                    cost += b;
                    affordable.push(i);
                }
            }
        }
        if affordable.is_empty() {
            break;
        }
        session.retransmit_and_combine(&affordable)?;
        for &i in &affordable {
            decodes[i] = decode(&session, i)?;
        }
        failing = crc_harq_round(codec, &decodes);
        retransmitted.push(affordable);
    }
    let payloads: Vec<BitVec> = decodes.iter().map(|d| codec.payload(&d.info)).collect();
    let undetected =
        payloads.iter().zip(&frame.bitstreams).zip(&decodes).filter(|((p, b), d)| codec.check(&d.info) && p != b).count();
    let text = payloads.iter().map(from_bits).collect();
    Ok(CrcHarqOutcome { text, first_failures, retransmitted, bits_used: harq.budget_bits - session.budget_bits(), undetected })
}

/// A whole sentence carried by one LDPC codeword and decoded by BP.
#[derive(Debug, Clone)]
pub struct LongCodeLink {
    ldpc: LdpcCode,
    g_sys: Gf2Matrix,
    /// Column order putting the information positions first.
    order: Vec<usize>,
}

/// Outcome of a long-code transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct LongCodeOutcome {
    pub payload: BitVec,
    pub converged: bool,
    /// Extra positions sent after the first round.
    pub bits_used: usize,
}

impl LongCodeLink {
    pub fn new(ldpc: LdpcCode) -> Result<Self> {
        let code = ldpc.to_linear_code()?;
        let (g_sys, order) = systematic_form(code.generator())?;
        Ok(LongCodeLink { ldpc, g_sys, order })
    }

    pub fn ldpc(&self) -> &LdpcCode {
        &self.ldpc
    }

    pub fn k(&self) -> usize {
        self.ldpc.k()
    }

    pub fn n(&self) -> usize {
        self.ldpc.n()
    }

    /// Codeword in original coordinates; `payload` is zero-extended to k.
    pub fn encode(&self, payload: &BitVec) -> Result<BitVec> {
        let k = self.k();
        if payload.len() > k {
            return Err(invalid(format!("payload of {} bits exceeds k = {k}", payload.len())));
        }
        let mut u = payload.to_bits();
        u.resize(k, 0);
        let c_t = self.g_sys.vec_mul(&BitVec::from_bits(&u));
        let mut c = BitVec::zeros(self.n());
        for (t, &col) in self.order.iter().enumerate() {
            c.set(col, c_t.get(t));
        }
        Ok(c)
    }

    fn payload_of(&self, c: &BitVec, len: usize) -> BitVec {
        BitVec::from_bools(&self.order[..len].iter().map(|&p| c.get(p)).collect::<Vec<_>>())
    }

    /// Sends the first `first_bits` positions (information positions come
    /// first), decodes, and when BP fails to converge sends up to
    /// `budget_bits` further positions and decodes again. Unsent positions
    /// enter BP as erasures.
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        payload: &BitVec,
        snr_db: f64,
        first_bits: usize,
        budget_bits: usize,
        rng: &mut R,
    ) -> Result<LongCodeOutcome> {
        let n = self.n();
        if first_bits == 0 || first_bits > n {
            return Err(invalid(format!("first round of {first_bits} positions for n = {n}")));
        }
        let var = noise_variance(snr_db);
        let sigma = var.sqrt();
        let x = modulate(&self.encode(payload)?);
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + sigma * z
            })
            .collect();
        let decode_with = |sent: usize| {
            let mut llr = vec![0.0; n];
            for &p in &self.order[..sent] {
                llr[p] = 2.0 * y[p] / var;
            }
            bp_decode_llr(&self.ldpc, &llr)
        };
        let mut res = decode_with(first_bits);
        let mut extra = 0;
        if !res.converged && budget_bits > 0 && first_bits < n {
            extra = budget_bits.min(n - first_bits);
            res = decode_with(first_bits + extra);
        }
        Ok(LongCodeOutcome { payload: self.payload_of(&res.codeword, payload.len()), converged: res.converged, bits_used: extra })
    }
}
