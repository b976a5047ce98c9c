//! Closed-corpus provider: corrections and fills are nearest corpus entries.

use super::{parse_masked, CandidateProvider, CorrectionRequest, Mode};
use crate::error::{invalid, Error, Result};
use crate::textcodec::PAD;

/// Answers every request with sentences from a fixed corpus, ranked by
/// character Hamming distance over the positions the request pins down.
#[derive(Debug, Clone)]
pub struct DictionaryProvider {
    entries: Vec<Vec<char>>,
}

impl DictionaryProvider {
    pub fn new(corpus: &[String]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(invalid("dictionary provider needs a nonempty corpus"));
        }
        Ok(DictionaryProvider { entries: corpus.iter().map(|s| s.chars().collect()).collect() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn entry(&self, i: usize) -> String {
        self.entries[i].iter().collect()
    }

    /// Corpus indices sorted by (distance, index).
    fn ranked(&self, distance: impl Fn(&[char]) -> usize) -> Vec<usize> {
        let mut scored: Vec<(usize, usize)> = self.entries.iter().enumerate().map(|(i, e)| (distance(e), i)).collect();
        scored.sort_unstable();
        scored.into_iter().map(|(_, i)| i).collect()
    }
}

fn char_at(s: &[char], i: usize) -> char {
    s.get(i).copied().unwrap_or(PAD)
}

/// Hamming distance after NUL-padding both sides to a common length.
pub fn padded_hamming(a: &[char], b: &[char]) -> usize {
    (0..a.len().max(b.len())).filter(|&i| char_at(a, i) != char_at(b, i)).count()
}

impl CandidateProvider for DictionaryProvider {
    fn name(&self) -> &str {
        "dictionary"
    }

    fn correct(&self, request: &CorrectionRequest) -> Result<String> {
        if request.mode != Mode::Correct {
            return Err(Error::Provider("expected a correct request".into()));
        }
        let text: Vec<char> = request.text.chars().collect();
        // only entries of the input's length are considered; none means no correction
        let best = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.len() == text.len())
            .map(|(i, e)| (padded_hamming(e, &text), i))
            .min();
        Ok(match best {
            Some((_, i)) => self.entry(i),
            None => request.text.clone(),
        })
    }

    fn fill(&self, request: &CorrectionRequest) -> Result<Vec<String>> {
        request.validate().map_err(|e| Error::Provider(e.to_string()))?;
        let l = request.segment_len;
        let layout = parse_masked(&request.text, &request.masked_indices, l)
            .map_err(|e| Error::Provider(e.to_string()))?;
        // pinned (position, char) pairs from unmasked segments
        let pinned: Vec<(usize, char)> = layout
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|t| (i, t)))
            .flat_map(|(i, t)| {
                let tc: Vec<char> = t.chars().collect();
                (0..l).map(move |j| (i * l + j, char_at(&tc, j)))
            })
            .collect();
        let order = self.ranked(|e| pinned.iter().filter(|&&(p, c)| char_at(e, p) != c).count());
        let v = request.num_candidates;
        let mut out: Vec<String> = order.iter().take(v).map(|&i| self.entry(i)).collect();
        while out.len() < v {
            out.push(out[0].clone());
        }
        Ok(out)
    }
}
