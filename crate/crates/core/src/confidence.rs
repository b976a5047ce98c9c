//! A-posteriori success probability of a re-encoded candidate and
//! threshold-based error-set formation.

use crate::channel::ln_flip_probabilities;
use crate::code::LinearCode;
use crate::error::Result;
use crate::gf2::BitVec;
use crate::osd::{reencode_candidate, PermutedView};

/// Lower bound applied to every log-domain factor.
const LN_FLOOR: f64 = -700.0;

/// Default SEC reliability threshold.
pub const DEFAULT_T_SEC: f64 = 0.001;
/// Default retransmission threshold.
pub const DEFAULT_T_HARQ: f64 = 0.1;

/// Probability that `candidate_t` (a codeword in the view's permuted
/// coordinates) is the transmitted codeword.
///
/// With e the TEP implied on the most reliable basis and d the difference
/// to the hard decisions on the parity positions,
/// `score = 1 / (1 + (1 − P(e))·2^{k−n} / (P(e)·Pr(d | e)))`.
pub fn success_probability(view: &PermutedView, candidate_t: &BitVec, noise_variance: f64) -> f64 {
    let k = view.k();
    let n = view.n();
    let alpha = view.alpha_t();
    let diff = candidate_t.xor(view.r_t());

    let mut ln_pe = 0.0;
    let mut ln_pd = 0.0;
    for j in 0..n {
        let (lp, lq) = ln_flip_probabilities(alpha[j], noise_variance);
        let term = if diff.get(j) { lp } else { lq };
        if j < k {
            ln_pe += term.max(LN_FLOOR);
        } else {
            ln_pd += term.max(LN_FLOOR);
        }
    }
    // ln(1 − P(e)) without cancellation when P(e) ≈ 1
    let ln_not_pe = (-ln_pe.exp_m1()).ln().max(LN_FLOOR);
    let ln_ratio = ln_not_pe + (k as f64 - n as f64) * std::f64::consts::LN_2 - ln_pe - ln_pd;
    logistic(-ln_ratio)
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Confidence verdict for one segment's candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentVerdict {
    pub segment_index: usize,
    pub candidate_info: BitVec,
    pub implied_tep: BitVec,
    /// c̃ ⊕ r̃ over all n permuted positions.
    pub difference_pattern: BitVec,
    pub whd: f64,
    pub score: f64,
    pub reliable: bool,
}

impl SegmentVerdict {
    /// Re-encodes `info`, scores it and compares against `threshold`.
    pub fn evaluate(
        segment_index: usize,
        code: &LinearCode,
        view: &PermutedView,
        info: &BitVec,
        threshold: f64,
    ) -> Result<SegmentVerdict> {
        let re = reencode_candidate(code, view, info)?;
        let score = success_probability(view, &re.codeword_t, view.noise_variance());
        Ok(SegmentVerdict {
            segment_index,
            candidate_info: info.clone(),
            difference_pattern: re.codeword_t.xor(view.r_t()),
            implied_tep: re.implied_tep,
            whd: re.whd,
            score,
            reliable: score >= threshold,
        })
    }
}

/// Indices whose score falls strictly below `threshold`, ascending.
pub fn form_error_set(scores: &[f64], threshold: f64) -> Vec<usize> {
    scores.iter().enumerate().filter(|(_, &s)| s < threshold).map(|(i, _)| i).collect()
}

/// Up to `budget` indices with score below `threshold`, lowest score first
/// (ties by index).
pub fn rank_for_retransmission(scores: &[f64], threshold: f64, budget: usize) -> Vec<usize> {
    let mut idx = form_error_set(scores, threshold);
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx.truncate(budget);
    idx
}
