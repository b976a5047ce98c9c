//! Sentence-level error accounting, BLEU-4 and ROUGE-L.
//!
//! Both text metrics work on whitespace-separated, case-sensitive words
//! after trailing NUL padding is removed. BLEU uses add-one smoothing for
//! n-gram orders 2..4 whose clipped match count is zero; ROUGE-L is the
//! LCS F1 score.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::textcodec::PAD;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// A binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub count: usize,
    pub trials: usize,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Proportion {
    /// Monte Carlo standard deviation of the rate.
    pub fn sigma(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.rate * (1.0 - self.rate) / self.trials as f64).sqrt()
    }
}

/// Wilson 95% interval for `count` successes in `trials`.
pub fn wilson_interval(count: usize, trials: usize) -> Proportion {
    if trials == 0 {
        return Proportion { count, trials, rate: 0.0, ci_lo: 0.0, ci_hi: 1.0 };
    }
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the closed-form endpoints are exactly 0 and 1 at the extremes; avoid round-off there
    let ci_lo = if count == 0 { 0.0 } else { (centre - half).max(0.0) };
    let ci_hi = if count == trials { 1.0 } else { (centre + half).min(1.0) };
    Proportion { count, trials, rate: p, ci_lo, ci_hi }
}

fn tokens(text: &str) -> Vec<&str> {
    text.trim_end_matches(PAD).split_whitespace().collect()
}

fn ngram_counts<'t, 'a>(toks: &'t [&'a str], n: usize) -> HashMap<&'t [&'a str], usize> {
    let mut m = HashMap::new();
    for w in toks.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Sentence BLEU-4 in [0, 100].
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let cand = tokens(candidate);
    let refs = tokens(reference);
    if cand.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0f64;
    for n in 1..=4 {
        let total = cand.len().saturating_sub(n - 1);
        let ref_counts = ngram_counts(&refs, n);
        let matched: usize = ngram_counts(&cand, n)
            .iter()
            .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if n == 1 {
            return 0.0;
        } else {
            1.0 / (total as f64 + 1.0)
        };
        log_sum += 0.25 * p.ln();
    }
    let (c, r) = (cand.len() as f64, refs.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    (100.0 * bp * log_sum.exp()).clamp(0.0, 100.0)
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Word-level ROUGE-L F1 in [0, 100].
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let cand = tokens(candidate);
    let refs = tokens(reference);
    if cand.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&cand, &refs) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / refs.len() as f64;
    100.0 * 2.0 * p * r / (p + r)
}

/// Receiver variant a score belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "msc")]
    Msc,
    #[serde(rename = "msc-sec")]
    MscSec,
    #[serde(rename = "msc-sld")]
    MscSld,
    #[serde(rename = "msc-sld-sharq")]
    Sharq,
    #[serde(rename = "crc-harq")]
    CrcHarq,
    #[serde(rename = "lc")]
    Lc,
    #[serde(rename = "lc-harq")]
    LcHarq,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Msc => "msc",
            Stage::MscSec => "msc-sec",
            Stage::MscSld => "msc-sld",
            Stage::Sharq => "msc-sld-sharq",
            Stage::CrcHarq => "crc-harq",
            Stage::Lc => "lc",
            Stage::LcHarq => "lc-harq",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scores of one sentence at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sentence_id: usize,
    pub stage: Stage,
    pub bler_error: bool,
    pub bleu: f64,
    pub rouge_l: f64,
    /// Cumulative wall-clock time up to and including this stage.
    pub time_ms: f64,
}

impl ScoreRow {
    /// Compares `recovered` against `original` after stripping padding.
    pub fn score(sentence_id: usize, stage: Stage, recovered: &str, original: &str, time_ms: f64) -> Self {
        let rec = recovered.trim_end_matches(PAD);
        let orig = original.trim_end_matches(PAD);
        ScoreRow {
            sentence_id,
            stage,
            bler_error: rec != orig,
            bleu: bleu(rec, orig),
            rouge_l: rouge_l(rec, orig),
            time_ms,
        }
    }
}

/// Per-stage summary of a set of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub bler: Proportion,
    pub bleu: f64,
    pub rouge_l: f64,
    pub time_ms_mean: f64,
}

/// Groups rows by stage. The result does not depend on row order.
pub fn summarize(rows: &[ScoreRow]) -> Vec<StageSummary> {
    let mut groups: BTreeMap<Stage, Vec<&ScoreRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.stage).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(stage, mut rs)| {
            // fixed summation order keeps floating-point sums reproducible
            rs.sort_by_key(|r| r.sentence_id);
            let n = rs.len() as f64;
            let errors = rs.iter().filter(|r| r.bler_error).count();
            StageSummary {
                stage,
                bler: wilson_interval(errors, rs.len()),
                bleu: rs.iter().map(|r| r.bleu).sum::<f64>() / n,
                rouge_l: rs.iter().map(|r| r.rouge_l).sum::<f64>() / n,
                time_ms_mean: rs.iter().map(|r| r.time_ms).sum::<f64>() / n,
            }
        })
        .collect()
}
