//! BPSK over AWGN, reliabilities and per-bit flip probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::gf2::BitVec;

/// Generator used for every stochastic operation in the crate.
pub type SimRng = ChaCha8Rng;

/// Independent stream for one (SNR point, sentence) pair of an experiment.
///
/// Streams are addressed by counter so results do not depend on the order
/// in which sentences are simulated.
pub fn sentence_rng(master_seed: u64, snr_index: usize, sentence_index: usize) -> SimRng {
    let mut rng = SimRng::seed_from_u64(master_seed);
    rng.set_stream(((snr_index as u64) << 32) | (sentence_index as u64 & 0xFFFF_FFFF));
    rng
}

/// Noise variance for an SNR in dB under the SNR = 1/σ² convention.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// x = 1 − 2c.
pub fn modulate(c: &BitVec) -> Vec<f64> {
    (0..c.len()).map(|i| if c.get(i) { -1.0 } else { 1.0 }).collect()
}

/// i.i.d. N(0, σ²) samples.
pub fn gaussian_noise<R: Rng + ?Sized>(len: usize, variance: f64, rng: &mut R) -> Vec<f64> {
    let sd = variance.sqrt();
    (0..len).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// y = x + z with z ~ N(0, 10^(−snr_db/10)).
pub fn transmit<R: Rng + ?Sized>(x: &[f64], snr_db: f64, rng: &mut R) -> SoftObservation {
    let variance = noise_variance(snr_db);
    let z = gaussian_noise(x.len(), variance, rng);
    SoftObservation {
        values: x.iter().zip(&z).map(|(a, b)| a + b).collect(),
        noise_variance: variance,
    }
}

/// P(j) = 1 / (1 + exp(2α/σ²)).
pub fn bit_flip_probability(alpha: f64, noise_variance: f64) -> f64 {
    let t = 2.0 * alpha / noise_variance;
    if t > 700.0 {
        (-t).exp()
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// ln P(j) and ln(1 − P(j)), computed without cancellation.
pub fn ln_flip_probabilities(alpha: f64, noise_variance: f64) -> (f64, f64) {
    let t = 2.0 * alpha / noise_variance;
    // ln(1 + e^t) and ln(1 + e^-t)
    let softplus = |x: f64| if x > 30.0 { x + (-x).exp() } else { x.exp().ln_1p() };
    (-softplus(t), -softplus(-t))
}

/// Received real vector together with its noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftObservation {
    values: Vec<f64>,
    noise_variance: f64,
}

impl SoftObservation {
    pub fn new(values: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(invalid(format!("noise variance must be positive, got {noise_variance}")));
        }
        Ok(SoftObservation { values, noise_variance })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn reliability(&self, j: usize) -> f64 {
        self.values[j].abs()
    }

    pub fn reliabilities(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.abs()).collect()
    }

    pub fn hard_decision(&self) -> BitVec {
        let bits: Vec<bool> = self.values.iter().map(|&v| v < 0.0).collect();
        BitVec::from_bools(&bits)
    }

    pub fn bit_flip_probability(&self, j: usize) -> f64 {
        bit_flip_probability(self.reliability(j), self.noise_variance)
    }

    /// Channel LLRs 2y/σ² (positive favours bit 0).
    pub fn llrs(&self) -> Vec<f64> {
        self.values.iter().map(|v| 2.0 * v / self.noise_variance).collect()
    }

    /// Observation restricted to `positions`, in that order.
    pub fn select(&self, positions: &[usize]) -> SoftObservation {
        SoftObservation {
            values: positions.iter().map(|&p| self.values[p]).collect(),
            noise_variance: self.noise_variance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn modulation_examples() {
        assert_eq!(modulate(&BitVec::from_bits(&[0, 1])), vec![1.0, -1.0]);
        assert!(modulate(&BitVec::zeros(5)).iter().all(|&x| x == 1.0));
        let c = BitVec::from_bits(&[1, 0, 0, 1, 1]);
        let obs = SoftObservation::new(modulate(&c), 1.0).unwrap();
        assert_eq!(obs.hard_decision(), c);
    }

    #[test]
    fn zero_db_is_unit_variance() {
        assert_eq!(noise_variance(0.0), 1.0);
        assert!((noise_variance(10.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn very_high_snr_is_error_free() {
        let mut rng = SimRng::seed_from_u64(3);
        let c = BitVec::from_bits(&[0, 1, 1, 0, 1, 0, 0, 0, 1, 1]);
        for _ in 0..100 {
            let obs = transmit(&modulate(&c), 80.0, &mut rng);
            assert_eq!(obs.hard_decision(), c);
            assert!(obs.values().iter().zip(modulate(&c)).all(|(y, x)| (y - x).abs() < 1e-3));
        }
    }

    #[test]
    fn raw_ber_at_zero_db_matches_gaussian_tail() {
        // Q(1) = erfc(1/√2)/2
        let q1 = 0.5 * statrs::function::erf::erfc(1.0 / 2f64.sqrt());
        assert!((q1 - 0.158_655).abs() < 1e-5);
        let mut rng = SimRng::seed_from_u64(17);
        let n = 1_000_000;
        let x = vec![1.0; n];
        let obs = transmit(&x, 0.0, &mut rng);
        let ber = obs.hard_decision().weight() as f64 / n as f64;
        assert!((ber - q1).abs() < 0.005, "ber {ber}");
    }

    #[test]
    fn transmit_is_deterministic() {
        let x = vec![1.0, -1.0, 1.0];
        let a = transmit(&x, 2.0, &mut SimRng::seed_from_u64(9));
        let b = transmit(&x, 2.0, &mut SimRng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn flip_probability_examples() {
        assert_eq!(bit_flip_probability(0.0, 1.0), 0.5);
        assert!(bit_flip_probability(1e6, 1.0) < 1e-300);
        let expected = 1.0 / (1.0 + 1f64.exp().powi(2));
        assert!((bit_flip_probability(1.0, 1.0) - expected).abs() < 1e-15);
        assert!((expected - 0.1192).abs() < 1e-4);
    }

    #[test]
    fn log_flip_probabilities_agree_with_linear() {
        for &a in &[0.0, 0.3, 1.0, 4.0, 12.0] {
            for &v in &[0.25, 1.0, 2.0] {
                let p = bit_flip_probability(a, v);
                let (lp, lq) = ln_flip_probabilities(a, v);
                assert!((lp.exp() - p).abs() < 1e-14);
                assert!((lq.exp() - (1.0 - p)).abs() < 1e-14);
            }
        }
        let (lp, _) = ln_flip_probabilities(1e4, 1.0);
        assert!(lp.is_finite() && lp < -1e4);
    }

    #[test]
    fn sentence_streams_are_independent_of_order() {
        let a: f64 = sentence_rng(1, 0, 5).random();
        let _skip: f64 = sentence_rng(1, 0, 4).random();
        let b: f64 = sentence_rng(1, 0, 5).random();
        assert_eq!(a, b);
        let c: f64 = sentence_rng(1, 1, 5).random();
        assert_ne!(a, c);
    }

    #[test]
    fn flip_frequency_is_calibrated_per_reliability_bin() {
        let mut rng = SimRng::seed_from_u64(2024);
        let n = 1_000_000;
        let obs = transmit(&vec![1.0; n], 1.0, &mut rng);
        let bins = 20;
        let width = 0.1;
        let mut count = vec![0usize; bins];
        let mut flips = vec![0usize; bins];
        let mut mean_p = vec![0f64; bins];
        for j in 0..n {
            let b = ((obs.reliability(j) / width) as usize).min(bins - 1);
            count[b] += 1;
            flips[b] += (obs.values()[j] < 0.0) as usize;
            mean_p[b] += obs.bit_flip_probability(j);
        }
        for b in 0..bins {
            if count[b] < 5000 {
                continue;
            }
            let freq = flips[b] as f64 / count[b] as f64;
            let mp = mean_p[b] / count[b] as f64;
            assert!((freq - mp).abs() <= 0.01, "bin {b}: freq {freq} vs {mp}");
        }
    }

    proptest! {
        #[test]
        fn flip_probability_bounded_and_decreasing(a in 0.0f64..50.0, d in 1e-3f64..5.0, v in 0.25f64..4.0) {
            let p = bit_flip_probability(a, v);
            prop_assert!(p > 0.0 && p <= 0.5);
            prop_assert!(bit_flip_probability(a + d, v) < p);
        }
    }
}
