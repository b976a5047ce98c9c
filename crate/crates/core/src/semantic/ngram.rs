//! Character n-gram provider with beam search over masked positions.

use std::collections::HashMap;

use super::{parse_masked, splice, CandidateProvider, CorrectionRequest, Mode};
use crate::error::{invalid, Error, Result};
use crate::textcodec::PAD;

pub const DEFAULT_ORDER: usize = 4;
pub const DEFAULT_SMOOTHING: f64 = 0.01;
/// Segments whose mean per-char log-probability falls below this are
/// treated as corrupted by `correct`.
pub const DEFAULT_CORRECT_THRESHOLD: f64 = -4.0;

// sentence-start context symbol, outside the byte range
const BOS: u16 = 0x100;

/// Add-δ smoothed character n-gram model over the training alphabet
/// (plus NUL, which marks the end of a sentence and its padding).
#[derive(Debug, Clone)]
pub struct NgramProvider {
    order: usize,
    delta: f64,
    beam: usize,
    threshold: f64,
    alphabet: Vec<u16>,
    counts: HashMap<Vec<u16>, (u32, HashMap<u16, u32>)>,
}

impl NgramProvider {
    pub fn train(corpus: &[String], order: usize, delta: f64, beam: usize) -> Result<Self> {
        if order < 1 || corpus.is_empty() || delta <= 0.0 || beam == 0 {
            return Err(invalid("n-gram provider needs order >= 1, delta > 0, beam >= 1 and a corpus"));
        }
        let mut alphabet: Vec<u16> = vec![PAD as u16];
        let mut counts: HashMap<Vec<u16>, (u32, HashMap<u16, u32>)> = HashMap::new();
        for s in corpus {
            let mut seq: Vec<u16> = vec![BOS; order - 1];
            for c in s.chars() {
                let v = c as u32;
                if v > 0xFF {
                    return Err(invalid(format!("corpus char {c:?} outside the byte range")));
                }
                seq.push(v as u16);
            }
            seq.extend(std::iter::repeat_n(PAD as u16, order));
            for w in seq.windows(order) {
                let (ctx, c) = w.split_at(order - 1);
                if !alphabet.contains(&c[0]) {
                    alphabet.push(c[0]);
                }
                let e = counts.entry(ctx.to_vec()).or_default();
                e.0 += 1;
                *e.1.entry(c[0]).or_default() += 1;
            }
        }
        alphabet.sort_unstable();
        Ok(NgramProvider { order, delta, beam, threshold: DEFAULT_CORRECT_THRESHOLD, alphabet, counts })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn ln_prob(&self, ctx: &[u16], c: u16) -> f64 {
        let a = self.alphabet.len() as f64;
        let (total, hits) = match self.counts.get(ctx) {
            Some((t, m)) => (*t as f64, *m.get(&c).unwrap_or(&0) as f64),
            None => (0.0, 0.0),
        };
        ((hits + self.delta) / (total + self.delta * a)).ln()
    }

    fn context<'a>(&self, history: &'a [u16]) -> &'a [u16] {
        &history[history.len() - (self.order - 1)..]
    }

    /// Top `width` completions of `frame` (None = free position), each with
    /// its total log-probability, best first.
    fn beam_search(&self, frame: &[Option<u16>], width: usize) -> Vec<(f64, Vec<u16>)> {
        let start: Vec<u16> = vec![BOS; self.order - 1];
        let mut beams: Vec<(f64, Vec<u16>)> = vec![(0.0, start)];
        for slot in frame {
            let mut next: Vec<(f64, Vec<u16>)> = Vec::new();
            for (score, hist) in &beams {
                let ctx = self.context(hist);
                let choices: Vec<u16> = match slot {
                    Some(c) => vec![*c],
                    None => self.alphabet.clone(),
                };
                for c in choices {
                    let mut h = hist.clone();
                    h.push(c);
                    next.push((score + self.ln_prob(ctx, c), h));
                }
            }
            // stable sort keeps alphabet order among ties
            next.sort_by(|a, b| b.0.total_cmp(&a.0));
            next.truncate(width);
            beams = next;
        }
        beams.into_iter().map(|(s, h)| (s, h[self.order - 1..].to_vec())).collect()
    }

    /// Mean log-probability of the chars of each `l`-char segment of `text`
    /// in context; `-inf` for segments with chars outside the alphabet.
    fn segment_scores(&self, text: &[u16], l: usize) -> Vec<f64> {
        let mut hist: Vec<u16> = vec![BOS; self.order - 1];
        hist.extend_from_slice(text);
        let off = self.order - 1;
        text.chunks(l)
            .enumerate()
            .map(|(i, seg)| {
                if seg.iter().any(|c| !self.alphabet.contains(c)) {
                    return f64::NEG_INFINITY;
                }
                let total: f64 = (0..seg.len())
                    .map(|j| {
                        let p = off + i * l + j;
                        self.ln_prob(&hist[p - off..p], hist[p])
                    })
                    .sum();
                total / seg.len() as f64
            })
            .collect()
    }
}

fn to_codes(s: &str) -> Option<Vec<u16>> {
    s.chars().map(|c| u16::try_from(c as u32).ok().filter(|&v| v <= 0xFF)).collect()
}

fn from_codes(v: &[u16]) -> Vec<char> {
    v.iter().map(|&c| char::from(c as u8)).collect()
}

impl CandidateProvider for NgramProvider {
    fn name(&self) -> &str {
        "ngram"
    }

    fn correct(&self, request: &CorrectionRequest) -> Result<String> {
        if request.mode != Mode::Correct {
            return Err(Error::Provider("expected a correct request".into()));
        }
        let l = request.segment_len.max(1);
        let codes = to_codes(&request.text).ok_or_else(|| Error::Provider("text outside the byte range".into()))?;
        let bad: Vec<usize> = self
            .segment_scores(&codes, l)
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < self.threshold)
            .map(|(i, _)| i)
            .collect();
        if bad.is_empty() {
            return Ok(request.text.clone());
        }
        let masked = super::mask_segments(&request.text, &bad, l);
        let mut fill = self.fill(&CorrectionRequest::fill(masked, bad, l, 1))?;
        let out = fill.remove(0);
        // keep the request length: trailing padding the model appended is dropped
        Ok(out.chars().take(request.text.chars().count()).collect())
    }

    fn fill(&self, request: &CorrectionRequest) -> Result<Vec<String>> {
        request.validate().map_err(|e| Error::Provider(e.to_string()))?;
        let l = request.segment_len;
        let layout =
            parse_masked(&request.text, &request.masked_indices, l).map_err(|e| Error::Provider(e.to_string()))?;
        let mut frame: Vec<Option<u16>> = Vec::new();
        for seg in &layout {
            match seg {
                Some(t) => {
                    let codes = to_codes(t).ok_or_else(|| Error::Provider("text outside the byte range".into()))?;
                    frame.extend(codes.into_iter().map(Some));
                }
                None => frame.extend(std::iter::repeat_n(None, l)),
            }
        }
        let v = request.num_candidates;
        let beams = self.beam_search(&frame, self.beam.max(v));
        let mut out: Vec<String> = beams
            .iter()
            .take(v)
            .map(|(_, codes)| {
                let filled = from_codes(codes);
                let s = splice(&layout, &filled, l);
                s.trim_end_matches(PAD).to_string()
            })
            .collect();
        while out.len() < v {
            out.push(out[0].clone());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::mask_segments;

    fn corpus() -> Vec<String> {
        ["A man is sleeping.", "A dog is running.", "A man is running.", "The cat is sleeping."]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn probabilities_normalize() {
        let p = NgramProvider::train(&corpus(), 4, 0.01, 8).unwrap();
        for ctx in [vec![BOS, BOS, BOS], vec![b'm' as u16, b'a' as u16, b'n' as u16], vec![1, 2, 3]] {
            let total: f64 = p.alphabet.iter().map(|&c| p.ln_prob(&ctx, c).exp()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_candidate_is_the_beam_argmax() {
        let p = NgramProvider::train(&corpus(), 4, 0.01, 16).unwrap();
        let masked = mask_segments("A man is sleeping.", &[1], 4);
        let one = p.fill(&CorrectionRequest::fill(masked.clone(), vec![1], 4, 1)).unwrap();
        let many = p.fill(&CorrectionRequest::fill(masked, vec![1], 4, 5)).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(many.len(), 5);
        assert_eq!(one[0], many[0]);
        assert!(many.iter().all(|s| !s.contains("<mask>")));
        assert_eq!(one[0], "A man is sleeping.");
    }

    #[test]
    fn fill_keeps_anchors() {
        let p = NgramProvider::train(&corpus(), 4, 0.01, 16).unwrap();
        let out = p.fill(&CorrectionRequest::fill(mask_segments("A dog is running.", &[3], 4), vec![3], 4, 3)).unwrap();
        for s in &out {
            assert!(s.starts_with("A dog is run") && s.ends_with('.'), "{s:?}");
            assert_eq!(s.chars().count(), 17);
        }
    }

    #[test]
    fn correct_repairs_garbage_segment() {
        let p = NgramProvider::train(&corpus(), 4, 0.01, 16).unwrap();
        let noisy = "A man is sl\u{9f}\u{e4}#ing.";
        let out = p.correct(&CorrectionRequest::correct(noisy, 4)).unwrap();
        assert_eq!(out.chars().count(), noisy.chars().count());
        assert_eq!(out, "A man is sleeping.");
        let clean = "A dog is running.";
        assert_eq!(p.correct(&CorrectionRequest::correct(clean, 4)).unwrap(), clean);
    }
}
