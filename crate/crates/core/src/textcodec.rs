//! Fixed-rate 8-bit character coding, segmentation into equal-length
//! segments, and reassembly.
//!
//! Decoded bytes are mapped one-to-one onto the chars U+0000..U+00FF, so
//! garbled output (bytes above 0x7F, control codes) survives as text and can
//! be re-encoded exactly.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::gf2::BitVec;

/// Padding character.
pub const PAD: char = '\0';

/// Big-endian 8-bit expansion of a 7-bit ASCII string.
pub fn to_bits(text: &str) -> Result<BitVec> {
    if let Some((offset, ch)) = text.chars().enumerate().find(|(_, c)| !c.is_ascii()) {
        return Err(Error::Encoding { offset, ch });
    }
    Ok(bytes_to_bits(text.bytes()))
}

/// Like [`to_bits`] but admits every char below U+0100, i.e. anything
/// [`from_bits`] can produce.
pub fn to_bits_lossless(text: &str) -> Result<BitVec> {
    let mut bytes = Vec::with_capacity(text.len());
    for (offset, ch) in text.chars().enumerate() {
        let v = ch as u32;
        if v > 0xFF {
            return Err(Error::Encoding { offset, ch });
        }
        bytes.push(v as u8);
    }
    Ok(bytes_to_bits(bytes))
}

fn bytes_to_bits(bytes: impl IntoIterator<Item = u8>) -> BitVec {
    let bits: Vec<u8> = bytes.into_iter().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1)).collect();
    BitVec::from_bits(&bits)
}

/// Inverse of [`to_bits_lossless`]; a trailing partial byte is ignored.
pub fn from_bits(bits: &BitVec) -> String {
    (0..bits.len() / 8)
        .map(|b| {
            let byte = (0..8).fold(0u8, |acc, i| (acc << 1) | bits.get(8 * b + i) as u8);
            char::from(byte)
        })
        .collect()
}

/// Number of chars (not bytes) in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// A sentence split into `q` equal segments, each carried by one codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceFrame {
    pub text: String,
    pub q: usize,
    pub l_msc: usize,
    pub segments: Vec<String>,
    pub bitstreams: Vec<BitVec>,
    pub pad_len: usize,
}

impl SentenceFrame {
    /// Padded length ℓ = q·l_msc.
    pub fn padded_len(&self) -> usize {
        self.q * self.l_msc
    }

    /// Information bits per segment.
    pub fn k(&self) -> usize {
        8 * self.l_msc
    }

    pub fn padded_text(&self) -> String {
        self.segments.concat()
    }

    /// Char span of segment `i` in the padded text.
    pub fn span(&self, i: usize) -> std::ops::Range<usize> {
        i * self.l_msc..(i + 1) * self.l_msc
    }
}

/// Pads `text` with NULs to the next multiple of `q` and splits it.
pub fn segment(text: &str, q: usize) -> Result<SentenceFrame> {
    segment_to(text, q, 0)
}

/// Pads `text` to at least `min_len` chars, then up to a multiple of `q`.
pub fn segment_to(text: &str, q: usize, min_len: usize) -> Result<SentenceFrame> {
    if q == 0 {
        return Err(invalid("q must be at least 1"));
    }
    to_bits(text)?;
    let len = char_len(text);
    let target = len.max(min_len).div_ceil(q).max(1) * q;
    let pad_len = target - len;
    let mut padded: Vec<char> = text.chars().collect();
    padded.resize(target, PAD);
    let l_msc = target / q;
    let segments: Vec<String> = padded.chunks(l_msc).map(|c| c.iter().collect()).collect();
    let bitstreams = segments.iter().map(|s| to_bits(s)).collect::<Result<Vec<_>>>()?;
    Ok(SentenceFrame { text: text.to_string(), q, l_msc, segments, bitstreams, pad_len })
}

/// Concatenates decoded segments and strips up to `pad_len` trailing NULs.
pub fn reassemble(frame: &SentenceFrame, segment_texts: &[String]) -> Result<String> {
    let joined = join_segments(frame, segment_texts)?;
    Ok(strip_padding(&joined, frame.pad_len))
}

/// Concatenation without stripping, after checking the segment shapes.
pub fn join_segments(frame: &SentenceFrame, segment_texts: &[String]) -> Result<String> {
    if segment_texts.len() != frame.q {
        return Err(invalid(format!("expected {} segments, got {}", frame.q, segment_texts.len())));
    }
    if let Some((i, s)) = segment_texts.iter().enumerate().find(|(_, s)| char_len(s) != frame.l_msc) {
        return Err(invalid(format!("segment {i} has {} chars, expected {}", char_len(s), frame.l_msc)));
    }
    Ok(segment_texts.concat())
}

/// Removes at most `pad_len` trailing NULs.
pub fn strip_padding(text: &str, pad_len: usize) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let mut removed = 0;
    while removed < pad_len && chars.last() == Some(&PAD) {
        chars.pop();
        removed += 1;
    }
    chars.into_iter().collect()
}

/// Splits a padded sentence back into segments of `l_msc` chars.
pub fn split_segments(padded: &str, l_msc: usize) -> Vec<String> {
    let chars: Vec<char> = padded.chars().collect();
    chars.chunks(l_msc.max(1)).map(|c| c.iter().collect()).collect()
}

/// Sentences read from a text file, one per line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<String>,
    /// Lines dropped because they contain non-ASCII characters.
    pub rejected: usize,
}

impl Corpus {
    pub fn parse(text: &str) -> Corpus {
        let mut corpus = Corpus::default();
        for line in text.lines() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if line.is_ascii() && !line.contains(PAD) {
                corpus.sentences.push(line.to_string());
            } else {
                corpus.rejected += 1;
            }
        }
        corpus
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        Ok(Corpus::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}
