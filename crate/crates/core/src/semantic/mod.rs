//! Candidate providers for semantic correction and list decoding, together
//! with segment masking and anchor-based extraction of per-segment
//! candidates from reconstructed sentences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::textcodec::PAD;

pub mod bridge;
pub mod dictionary;
pub mod ngram;

pub use bridge::{serve, ExternalProvider};
pub use dictionary::DictionaryProvider;
pub use ngram::NgramProvider;

/// Placeholder substituted for each masked segment.
pub const MASK: &str = "<mask>";

/// Default list size for fill requests.
pub const DEFAULT_NUM_CANDIDATES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Correct,
    Fill,
}

/// A single request to a provider. Segment indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionRequest {
    pub mode: Mode,
    pub text: String,
    pub masked_indices: Vec<usize>,
    pub segment_len: usize,
    pub num_candidates: usize,
}

impl CorrectionRequest {
    pub fn correct(text: impl Into<String>, segment_len: usize) -> Self {
        CorrectionRequest {
            mode: Mode::Correct,
            text: text.into(),
            masked_indices: Vec::new(),
            segment_len,
            num_candidates: 1,
        }
    }

    pub fn fill(masked_text: impl Into<String>, masked_indices: Vec<usize>, segment_len: usize, v: usize) -> Self {
        CorrectionRequest { mode: Mode::Fill, text: masked_text.into(), masked_indices, segment_len, num_candidates: v }
    }

    /// Checks the structural invariants of the request.
    pub fn validate(&self) -> Result<()> {
        if self.segment_len == 0 {
            return Err(invalid("segment_len must be positive"));
        }
        if self.mode == Mode::Fill {
            if self.masked_indices.is_empty() || self.num_candidates == 0 {
                return Err(invalid("fill needs masked segments and at least one candidate"));
            }
            let runs = mask_runs(&self.masked_indices).len();
            let found = self.text.matches(MASK).count();
            if found != self.masked_indices.len() {
                return Err(invalid(format!(
                    "{found} placeholders for {} masked segments in {runs} runs",
                    self.masked_indices.len()
                )));
            }
        }
        Ok(())
    }
}

/// Something that can correct a noisy sentence and propose completions for
/// masked segments.
pub trait CandidateProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Returns a corrected sentence.
    fn correct(&self, request: &CorrectionRequest) -> Result<String>;

    /// Returns exactly `request.num_candidates` sentences without placeholders,
    /// best first.
    fn fill(&self, request: &CorrectionRequest) -> Result<Vec<String>>;
}

impl<P: CandidateProvider + ?Sized> CandidateProvider for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn correct(&self, request: &CorrectionRequest) -> Result<String> {
        (**self).correct(request)
    }
    fn fill(&self, request: &CorrectionRequest) -> Result<Vec<String>> {
        (**self).fill(request)
    }
}

/// Leaves text untouched and declines to fill.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityProvider;

impl CandidateProvider for IdentityProvider {
    fn name(&self) -> &str {
        "identity"
    }

    fn correct(&self, request: &CorrectionRequest) -> Result<String> {
        Ok(request.text.clone())
    }

    fn fill(&self, _request: &CorrectionRequest) -> Result<Vec<String>> {
        Err(Error::Provider("identity provider produces no candidates".into()))
    }
}

/// Per-segment candidate list after extraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub segment_index: usize,
    pub candidates: Vec<String>,
}

/// Maximal runs of consecutive indices, as inclusive `(first, last)` pairs.
pub fn mask_runs(indices: &[usize]) -> Vec<(usize, usize)> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in sorted {
        match runs.last_mut() {
            Some((_, last)) if *last + 1 == i => *last = i,
            _ => runs.push((i, i)),
        }
    }
    runs
}

/// Replaces each segment listed in `s_err` by one placeholder.
pub fn mask_segments(text: &str, s_err: &[usize], l_msc: usize) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, seg) in chars.chunks(l_msc.max(1)).enumerate() {
        if s_err.contains(&i) {
            out.push_str(MASK);
        } else {
            out.extend(seg);
        }
    }
    out
}

/// Recovers the segment layout of a masked sentence: `None` for masked
/// segments, the text of the others. A trailing unmasked segment may be
/// shorter than `l_msc` when padding has been stripped.
pub fn parse_masked(masked: &str, masked_indices: &[usize], l_msc: usize) -> Result<Vec<Option<String>>> {
    if l_msc == 0 {
        return Err(invalid("segment length must be positive"));
    }
    let chars: Vec<char> = masked.chars().collect();
    let mask: Vec<char> = MASK.chars().collect();
    let last_masked = masked_indices.iter().copied().max();
    let mut out = Vec::new();
    let mut pos = 0;
    let mut i = 0;
    while pos < chars.len() || last_masked.is_some_and(|m| i <= m) {
        if masked_indices.contains(&i) {
            if !chars[pos.min(chars.len())..].starts_with(&mask) {
                return Err(invalid(format!("placeholder for segment {i} missing")));
            }
            out.push(None);
            pos += mask.len();
        } else {
            let end = (pos + l_msc).min(chars.len());
            out.push(Some(chars[pos..end].iter().collect()));
            pos = end;
        }
        i += 1;
    }
    Ok(out)
}

/// Per-candidate bookkeeping from [`extract`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExtractionReport {
    /// (candidate, segment) pairs dropped because an anchor was not found or
    /// the candidate was too short.
    pub invalid: usize,
    /// Anchor lookups where the anchor text occurred more than once.
    pub ambiguous_anchors: usize,
}

/// Cuts per-segment candidates for the masked segments out of each full
/// sentence candidate.
///
/// Segments are walked left to right with a cursor. A masked run at the
/// start is read from the first characters; a masked run after an anchor
/// (unmasked segment) is read right after that anchor's first occurrence at
/// or beyond the cursor. Candidates are NUL-padded to `frame_len` first so
/// trailing padding segments line up. Candidates lacking an anchor or long
/// enough text are skipped for the affected segments.
pub fn extract(
    candidates: &[String],
    segments: &[Option<String>],
    l_msc: usize,
    frame_len: usize,
) -> (BTreeMap<usize, CandidateSet>, ExtractionReport) {
    let mut sets: BTreeMap<usize, CandidateSet> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_none())
        .map(|(i, _)| (i, CandidateSet { segment_index: i, candidates: Vec::new() }))
        .collect();
    let mut report = ExtractionReport::default();

    for cand in candidates {
        let mut chars: Vec<char> = cand.chars().collect();
        if chars.len() < frame_len {
            chars.resize(frame_len, PAD);
        }
        let mut cursor = 0usize;
        // position right after the latest located anchor, if any
        let mut anchor_end: Option<usize> = Some(0);
        let mut i = 0;
        while i < segments.len() {
            match &segments[i] {
                Some(anchor) => {
                    let mut a: Vec<char> = anchor.chars().collect();
                    a.resize(l_msc, PAD);
                    match find_from(&chars, &a, cursor) {
                        Some(p) => {
                            if find_from(&chars, &a, p + 1).is_some() {
                                report.ambiguous_anchors += 1;
                            }
                            cursor = p + l_msc;
                            anchor_end = Some(cursor);
                        }
                        None => anchor_end = None,
                    }
                    i += 1;
                }
                None => {
                    let mut j = i;
                    while j < segments.len() && segments[j].is_none() {
                        j += 1;
                    }
                    for (b, seg) in (i..j).enumerate() {
                        let block = anchor_end.map(|s| s + b * l_msc).filter(|&s| s + l_msc <= chars.len());
                        match block {
                            Some(s) => {
                                let text: String = chars[s..s + l_msc].iter().collect();
                                sets.get_mut(&seg).expect("masked segment").candidates.push(text);
                            }
                            None => report.invalid += 1,
                        }
                    }
                    if let Some(s) = anchor_end {
                        cursor = s + (j - i) * l_msc;
                        anchor_end = Some(cursor);
                    }
                    i = j;
                }
            }
        }
    }
    (sets, report)
}

fn find_from(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || from + needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&p| hay[p..p + needle.len()] == *needle)
}

/// Replaces every masked segment of `masked` with the chars at the same
/// offsets of a full-length filled sentence.
pub(crate) fn splice(segments: &[Option<String>], filled: &[char], l_msc: usize) -> String {
    let mut out = String::new();
    for (i, s) in segments.iter().enumerate() {
        match s {
            Some(t) => out.push_str(t),
            None => out.extend(filled[i * l_msc..((i + 1) * l_msc).min(filled.len())].iter()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn segs(s: &[&str], masked: &[usize]) -> Vec<Option<String>> {
        s.iter().enumerate().map(|(i, t)| if masked.contains(&i) { None } else { Some(t.to_string()) }).collect()
    }

    #[test]
    fn masking_examples() {
        let t = "AAAABBBBCCCCDDDD";
        assert_eq!(mask_segments(t, &[], 4), t);
        assert_eq!(mask_segments(t, &[1], 4), "AAAA<mask>CCCCDDDD");
        assert_eq!(mask_segments(t, &[0, 1], 4), "<mask><mask>CCCCDDDD");
    }

    #[test]
    fn runs() {
        assert_eq!(mask_runs(&[4, 0, 3]), vec![(0, 0), (3, 4)]);
        assert!(mask_runs(&[]).is_empty());
    }

    #[test]
    fn parse_round_trip() {
        let m = mask_segments("AAAABBBBCCCCDD", &[1, 3], 4);
        assert_eq!(
            parse_masked(&m, &[1, 3], 4).unwrap(),
            vec![Some("AAAA".into()), None, Some("CCCC".into()), None]
        );
        assert!(parse_masked("AAAABBBB", &[1], 4).is_err());
    }

    #[test]
    fn leading_rule() {
        let s = segs(&["", "EFGH", "IJKL"], &[0]);
        let (sets, _) = extract(&["WXYZEFGHIJKL".into()], &s, 4, 12);
        assert_eq!(sets[&0].candidates, vec!["WXYZ"]);
    }

    #[test]
    fn anchored_rule() {
        let s = segs(&["ABCD", "", "IJKL"], &[1]);
        let (sets, _) = extract(&["ABCDQRSTIJKL".into()], &s, 4, 12);
        assert_eq!(sets[&1].candidates, vec!["QRST"]);
        // a longer reconstruction still aligns on the anchor
        let (sets, _) = extract(&["xxABCDQRSTIJKL".into()], &s, 4, 12);
        assert_eq!(sets[&1].candidates, vec!["QRST"]);
    }

    #[test]
    fn leading_and_consecutive_runs() {
        let s = segs(&["", "BBBB", "CCCC", "", ""], &[0, 3, 4]);
        let (sets, _) = extract(&["1234BBBBCCCC5678abcd".into()], &s, 4, 20);
        assert_eq!(sets[&0].candidates, vec!["1234"]);
        assert_eq!(sets[&3].candidates, vec!["5678"]);
        assert_eq!(sets[&4].candidates, vec!["abcd"]);
    }

    #[test]
    fn missing_anchor_invalidates_candidate() {
        let s = segs(&["ABCD", "", "IJKL"], &[1]);
        let (sets, rep) = extract(&["ZZZZQRSTIJKL".into(), "ABCDWXYZIJKL".into()], &s, 4, 12);
        assert_eq!(sets[&1].candidates, vec!["WXYZ"]);
        assert_eq!(rep.invalid, 1);
    }

    #[test]
    fn too_short_candidate_is_skipped() {
        let s = segs(&["ABCD", "", ""], &[1, 2]);
        let (sets, rep) = extract(&["xxxxxxxABCDQRST".into()], &s, 4, 12);
        assert_eq!(sets[&1].candidates, vec!["QRST"]);
        assert!(sets[&2].candidates.is_empty());
        assert_eq!(rep.invalid, 1);
    }

    #[test]
    fn repeated_anchor_is_reported() {
        let s = segs(&["abab", "", "abab", ""], &[1, 3]);
        let clean = "ababXXXXababYYYY".to_string();
        let (sets, rep) = extract(&[clean], &s, 4, 16);
        assert_eq!(sets[&1].candidates, vec!["XXXX"]);
        assert_eq!(sets[&3].candidates, vec!["YYYY"]);
        assert!(rep.ambiguous_anchors >= 1);
    }

    #[test]
    fn identity_provider_contract() {
        let p = IdentityProvider;
        let r = CorrectionRequest::correct("a b c", 2);
        assert_eq!(p.correct(&r).unwrap(), "a b c");
        assert!(matches!(p.fill(&CorrectionRequest::fill("<mask>", vec![0], 2, 3)), Err(Error::Provider(_))));
    }

    #[test]
    fn request_validation() {
        assert!(CorrectionRequest::fill("ab<mask>", vec![1], 2, 3).validate().is_ok());
        assert!(CorrectionRequest::fill("ab<mask>", vec![1, 2], 2, 3).validate().is_err());
        assert!(CorrectionRequest::fill("ab<mask>", vec![1], 2, 0).validate().is_err());
    }

    proptest! {
        #[test]
        fn clean_sentence_extracts_to_itself(
            text in "[ab ]{4,40}",
            l in 1usize..6,
            mask_bits in proptest::collection::vec(any::<bool>(), 40),
        ) {
            let chars: Vec<char> = text.chars().collect();
            let q = chars.len().div_ceil(l);
            let mut padded = chars.clone();
            padded.resize(q * l, PAD);
            let padded: String = padded.into_iter().collect();
            let s_err: Vec<usize> = (0..q).filter(|&i| mask_bits[i % 40]).collect();
            prop_assume!(!s_err.is_empty());
            let masked = mask_segments(&padded, &s_err, l);
            let layout = parse_masked(&masked, &s_err, l).unwrap();
            let (sets, rep) = extract(&[padded.clone()], &layout, l, q * l);
            prop_assert_eq!(rep.invalid, 0);
            let pc: Vec<char> = padded.chars().collect();
            for &i in &s_err {
                let want: String = pc[i * l..(i + 1) * l].iter().collect();
                prop_assert_eq!(&sets[&i].candidates, &vec![want]);
            }
        }

        #[test]
        fn extracted_blocks_have_segment_length(
            cands in proptest::collection::vec("[a-d]{0,30}", 1..6),
            l in 1usize..5,
        ) {
            let layout = vec![Some("ab".repeat(l).chars().take(l).collect()), None, None, Some("c".repeat(l)), None];
            let (sets, _) = extract(&cands, &layout, l, 5 * l);
            for set in sets.values() {
                prop_assert!(set.candidates.iter().all(|c| c.chars().count() == l));
            }
        }
    }
}
