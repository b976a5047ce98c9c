//! CRC augmentation of segment payloads for the CRC-HARQ baseline.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gf2::BitVec;

/// Supported CRC polynomials (MSB-first, no reflection, no final XOR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrcSpec {
    /// poly 0x07, init 0x00
    #[serde(rename = "crc-8")]
    Crc8,
    /// poly 0x1021, init 0xFFFF
    #[serde(rename = "crc-16-ccitt")]
    Crc16Ccitt,
}

impl CrcSpec {
    pub fn width(self) -> usize {
        match self {
            CrcSpec::Crc8 => 8,
            CrcSpec::Crc16Ccitt => 16,
        }
    }

    pub fn poly(self) -> u16 {
        match self {
            CrcSpec::Crc8 => 0x07,
            CrcSpec::Crc16Ccitt => 0x1021,
        }
    }

    pub fn init(self) -> u16 {
        match self {
            CrcSpec::Crc8 => 0x00,
            CrcSpec::Crc16Ccitt => 0xFFFF,
        }
    }

    fn mask(self) -> u16 {
        if self.width() == 16 {
            0xFFFF
        } else {
            (1u16 << self.width()) - 1
        }
    }
}

/// Table-driven CRC engine over arbitrary-length bit strings.
#[derive(Debug, Clone)]
pub struct Crc {
    spec: CrcSpec,
    table: [u16; 256],
}

impl Crc {
    pub fn new(spec: CrcSpec) -> Self {
        let w = spec.width();
        let top = 1u16 << (w - 1);
        let mut table = [0u16; 256];
        for (byte, slot) in table.iter_mut().enumerate() {
            let mut reg: u16 = if w >= 8 { (byte as u16) << (w - 8) } else { byte as u16 };
            for _ in 0..8 {
                reg = if reg & top != 0 { (reg << 1) ^ spec.poly() } else { reg << 1 };
            }
            *slot = reg & spec.mask();
        }
        Crc { spec, table }
    }

    pub fn spec(&self) -> CrcSpec {
        self.spec
    }

    /// CRC of `bits` read in order, MSB-first.
    pub fn checksum(&self, bits: &BitVec) -> u16 {
        let w = self.spec.width();
        let mask = self.spec.mask();
        let mut reg = self.spec.init();
        let full = bits.len() / 8;
        for b in 0..full {
            let mut byte = 0u8;
            for i in 0..8 {
                byte = (byte << 1) | bits.get(8 * b + i) as u8;
            }
            let idx = ((reg >> (w - 8)) as u8 ^ byte) as usize;
            reg = ((reg << 8) ^ self.table[idx]) & mask;
        }
        let top = 1u16 << (w - 1);
        for i in 8 * full..bits.len() {
            let fb = ((reg & top) != 0) ^ bits.get(i);
            reg = (reg << 1) & mask;
            if fb {
                reg ^= self.spec.poly();
            }
        }
        reg & mask
    }

    pub fn checksum_bytes(&self, data: &[u8]) -> u16 {
        let bits: Vec<u8> = data.iter().flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1)).collect();
        self.checksum(&BitVec::from_bits(&bits))
    }
}

/// Appender/checker pair mapping `(k − k_crc)`-bit payloads to `k`-bit words.
#[derive(Debug, Clone)]
pub struct CrcCodec {
    crc: Crc,
    k: usize,
}

/// Builds the appender/checker for a `k`-bit information word.
pub fn crc_augment(k: usize, spec: CrcSpec) -> Result<CrcCodec> {
    if k <= spec.width() {
        return Err(invalid(format!("k = {k} must exceed CRC width {}", spec.width())));
    }
    Ok(CrcCodec { crc: Crc::new(spec), k })
}

impl CrcCodec {
    pub fn payload_len(&self) -> usize {
        self.k - self.crc.spec.width()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        self.crc.spec.width()
    }

    /// Payload followed by its CRC, MSB first.
    pub fn append(&self, payload: &BitVec) -> Result<BitVec> {
        if payload.len() != self.payload_len() {
            return Err(invalid(format!("payload has {} bits, expected {}", payload.len(), self.payload_len())));
        }
        let c = self.crc.checksum(payload);
        let w = self.width();
        let tail: Vec<u8> = (0..w).map(|i| ((c >> (w - 1 - i)) & 1) as u8).collect();
        Ok(payload.concat(&BitVec::from_bits(&tail)))
    }

    pub fn check(&self, word: &BitVec) -> bool {
        if word.len() != self.k {
            return false;
        }
        let payload = word.slice(0, self.payload_len());
        self.append(&payload).map(|w| &w == word).unwrap_or(false)
    }

    pub fn payload(&self, word: &BitVec) -> BitVec {
        word.slice(0, self.payload_len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Long division of the init-adjusted, zero-augmented message by the
    /// generator polynomial, one bit at a time.
    fn long_division_crc(spec: CrcSpec, msg: &[u8]) -> u16 {
        let w = spec.width();
        let mut bits: Vec<u8> = msg.to_vec();
        for i in 0..w.min(bits.len()) {
            bits[i] ^= ((spec.init() >> (w - 1 - i)) & 1) as u8;
        }
        bits.extend(std::iter::repeat_n(0, w));
        let mut gen = vec![1u8];
        gen.extend((0..w).map(|i| ((spec.poly() >> (w - 1 - i)) & 1) as u8));
        for i in 0..msg.len() {
            if bits[i] == 1 {
                for (j, g) in gen.iter().enumerate() {
                    bits[i + j] ^= g;
                }
            }
        }
        bits[msg.len()..].iter().fold(0u16, |acc, &b| (acc << 1) | b as u16)
    }

    fn ascii_bits(s: &str) -> Vec<u8> {
        s.bytes().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1)).collect()
    }

    #[test]
    fn ccitt_check_string_matches_bit_serial_oracle() {
        let crc = Crc::new(CrcSpec::Crc16Ccitt);
        let oracle = long_division_crc(CrcSpec::Crc16Ccitt, &ascii_bits("123456789"));
        assert_eq!(crc.checksum_bytes(b"123456789"), oracle);
        assert_eq!(oracle, 0x29B1);
        let crc8 = Crc::new(CrcSpec::Crc8);
        assert_eq!(crc8.checksum_bytes(b"123456789"), long_division_crc(CrcSpec::Crc8, &ascii_bits("123456789")));
    }

    #[test]
    fn odd_lengths_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in [CrcSpec::Crc8, CrcSpec::Crc16Ccitt] {
            let crc = Crc::new(spec);
            for len in [17usize, 24, 31, 56, 120] {
                let bits: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
                assert_eq!(crc.checksum(&BitVec::from_bits(&bits)), long_division_crc(spec, &bits));
            }
        }
    }

    #[test]
    fn round_trip_and_single_flip_detection() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for spec in [CrcSpec::Crc8, CrcSpec::Crc16Ccitt] {
            let codec = crc_augment(32, spec).unwrap();
            for _ in 0..1000 {
                let p: Vec<u8> = (0..codec.payload_len()).map(|_| rng.random_range(0..2)).collect();
                assert!(codec.check(&codec.append(&BitVec::from_bits(&p)).unwrap()));
            }
            let word = codec.append(&BitVec::from_bits(&vec![1; codec.payload_len()])).unwrap();
            for i in 0..word.len() {
                let mut bad = word.clone();
                bad.flip(i);
                assert!(!codec.check(&bad), "flip at {i} undetected");
            }
        }
    }

    #[test]
    fn short_info_is_rejected() {
        assert!(crc_augment(8, CrcSpec::Crc8).is_err());
        assert!(crc_augment(16, CrcSpec::Crc16Ccitt).is_err());
        assert_eq!(crc_augment(16, CrcSpec::Crc8).unwrap().payload_len(), 8);
    }

    #[test]
    fn bursts_up_to_width_are_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for spec in [CrcSpec::Crc8, CrcSpec::Crc16Ccitt] {
            let codec = crc_augment(64, spec).unwrap();
            let w = codec.width();
            for _ in 0..10_000 {
                let p: Vec<u8> = (0..codec.payload_len()).map(|_| rng.random_range(0..2)).collect();
                let mut word = codec.append(&BitVec::from_bits(&p)).unwrap();
                let len = rng.random_range(1..=w);
                let start = rng.random_range(0..=64 - len);
                // a burst starts and ends with a flipped bit
                word.flip(start);
                if len > 1 {
                    word.flip(start + len - 1);
                    for i in start + 1..start + len - 1 {
                        if rng.random::<bool>() {
                            word.flip(i);
                        }
                    }
                }
                assert!(!codec.check(&word));
            }
        }
    }
}
