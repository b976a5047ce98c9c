//! Closed-form BLER predictors: the finite-blocklength normal approximation
//! for the binary-input AWGN channel, binomial segment-error mixtures with a
//! recovery profile, and Fano-type bounds. Monte Carlo helpers check them.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI, SQRT_2};
use std::path::Path;
use std::sync::OnceLock;

use gauss_quad::hermite::GaussHermite;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};
use statrs::function::erf::erfc;

use crate::channel::{modulate, noise_variance, transmit};
use crate::code::LinearCode;
use crate::error::{invalid, Result};
use crate::gf2::BitVec;
use crate::metrics::{wilson_interval, Proportion};
use crate::osd::decode;

/// Nodes of the default quadrature rule.
pub const DEFAULT_QUADRATURE_NODES: usize = 100;

fn default_rule() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(DEFAULT_QUADRATURE_NODES).expect("degree >= 2"))
}

/// ln(1 + e^t) without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// Capacity (bits per use) and dispersion (bits² per use) of BPSK over
/// AWGN at `snr_db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelMoments {
    pub capacity: f64,
    pub dispersion: f64,
}

/// Mean and variance of the information density `1 − log₂(1 + e^{−2Y/σ²})`
/// with `Y ~ N(1, σ²)`, by Gauss–Hermite quadrature with `nodes` nodes.
pub fn bi_awgn_moments_with(snr_db: f64, nodes: usize) -> Result<ChannelMoments> {
    if nodes < 64 {
        return Err(invalid(format!("quadrature needs at least 64 nodes, got {nodes}")));
    }
    let owned;
    let rule = if nodes == DEFAULT_QUADRATURE_NODES {
        default_rule()
    } else {
        owned = GaussHermite::new(nodes).map_err(|e| invalid(e.to_string()))?;
        &owned
    };
    Ok(moments(rule, snr_db))
}

fn moments(rule: &GaussHermite, snr_db: f64) -> ChannelMoments {
    let var = noise_variance(snr_db);
    let sigma = var.sqrt();
    let density = |x: f64| {
        let y = 1.0 + SQRT_2 * sigma * x;
        1.0 - softplus(-2.0 * y / var) / LN_2
    };
    let norm = 1.0 / PI.sqrt();
    let mean = norm * rule.integrate(density);
    let second = norm * rule.integrate(|x| density(x).powi(2));
    ChannelMoments { capacity: mean, dispersion: (second - mean * mean).max(0.0) }
}

pub fn bi_awgn_moments(snr_db: f64) -> ChannelMoments {
    moments(default_rule(), snr_db)
}

/// Binary-input AWGN capacity in bits per channel use.
pub fn capacity(snr_db: f64) -> f64 {
    bi_awgn_moments(snr_db).capacity
}

/// ln Q(x) for the standard normal tail, accurate far into the tail.
pub fn ln_q(x: f64) -> f64 {
    if x < 20.0 {
        (0.5 * erfc(x / SQRT_2)).ln()
    } else {
        // asymptotic series of the Mills ratio
        let x2 = x * x;
        -0.5 * x2 - (x * (2.0 * PI).sqrt()).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2)).ln()
    }
}

/// Argument of Q in the normal approximation for an (n, k) code.
fn na_argument(n: usize, k: usize, m: &ChannelMoments) -> f64 {
    let n_f = n as f64;
    let rate = k as f64 / n_f;
    // in nats: (C − R)·ln 2 + ln(n) / (2n), scaled by sqrt(n / V)
    let v_nats = m.dispersion * LN_2 * LN_2;
    (n_f / v_nats).sqrt() * ((m.capacity - rate) * LN_2 + n_f.ln() / (2.0 * n_f))
}

/// ln ε* of the normal approximation.
pub fn na_bound_ln(n: usize, k: usize, snr_db: f64) -> Result<f64> {
    if k == 0 || k >= n {
        return Err(invalid(format!("normal approximation needs 0 < k < n, got ({n}, {k})")));
    }
    Ok(ln_q(na_argument(n, k, &bi_awgn_moments(snr_db))))
}

/// Normal-approximation estimate of the best achievable BLER of an (n, k)
/// code, kept strictly inside (0, 1).
pub fn na_bound(n: usize, k: usize, snr_db: f64) -> Result<f64> {
    let e = na_bound_ln(n, k, snr_db)?.exp();
    Ok(e.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
}

/// Binomial(q, pe) pmf over the number of erroneous segments.
pub fn segment_error_pmf(q: usize, pe: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&pe) {
        return Err(invalid(format!("segment error probability {pe} outside [0, 1]")));
    }
    let b = Binomial::new(pe, q as u64).map_err(|e| invalid(e.to_string()))?;
    Ok((0..=q as u64).map(|i| b.pmf(i)).collect())
}

/// Recovery probability per number of simultaneous segment failures.
/// Zero failures always count as recovered; unlisted counts as 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecoveryProfile {
    values: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryProfileFile {
    pub code: String,
    pub q: usize,
    pub p_rec: BTreeMap<String, f64>,
}

impl RecoveryProfile {
    /// Profile with `values[i]` at q_e = i + 1.
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        RecoveryProfile::from_map(values.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect())
    }

    pub fn from_map(values: BTreeMap<usize, f64>) -> Result<Self> {
        if let Some((q, v)) = values.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("recovery probability {v} at q_e = {q} outside [0, 1]")));
        }
        if values.get(&0).is_some_and(|&v| v != 1.0) {
            return Err(invalid("recovery probability at q_e = 0 must be 1"));
        }
        Ok(RecoveryProfile { values })
    }

    /// Constant profile η for every q_e ≥ 1 up to `q`.
    pub fn constant(value: f64, q: usize) -> Result<Self> {
        RecoveryProfile::from_slice(&vec![value; q])
    }

    pub fn get(&self, q_e: usize) -> f64 {
        if q_e == 0 {
            1.0
        } else {
            self.values.get(&q_e).copied().unwrap_or(0.0)
        }
    }

    pub fn entries(&self) -> &BTreeMap<usize, f64> {
        &self.values
    }

    pub fn to_file(&self, code: &str, q: usize) -> RecoveryProfileFile {
        RecoveryProfileFile {
            code: code.to_string(),
            q,
            p_rec: self.values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn from_file(file: &RecoveryProfileFile) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (k, v) in &file.p_rec {
            let q: usize = k.parse().map_err(|_| invalid(format!("bad q_e key {k:?}")))?;
            values.insert(q, *v);
        }
        RecoveryProfile::from_map(values)
    }

    pub fn load(path: &Path) -> Result<(Self, RecoveryProfileFile)> {
        let text = std::fs::read_to_string(path)?;
        let file: RecoveryProfileFile =
            serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Ok((RecoveryProfile::from_file(&file)?, file))
    }
}

/// Measured recovery probabilities at 1.5 dB: (code, q, P_rec for q_e = 1..).
pub const TABLE_II: [(&str, usize, &[f64]); 3] = [
    ("64x32", 16, &[0.898, 0.827, 0.735, 0.608]),
    ("128x64", 8, &[0.635, 0.525, 0.111]),
    ("256x128", 4, &[0.227, 0.250]),
];

/// Table II column for `code` ("64x32", "128x64" or "256x128").
pub fn table_ii_profile(code: &str) -> Option<(usize, RecoveryProfile)> {
    TABLE_II
        .iter()
        .find(|(c, _, _)| *c == code)
        .map(|(_, q, v)| (*q, RecoveryProfile::from_slice(v).expect("table values in range")))
}

/// η = Σ_{q_e ≥ 1} P_rec(q_e)·pmf(q_e).
pub fn recovery_rate(q: usize, pe: f64, profile: &RecoveryProfile) -> Result<f64> {
    let pmf = segment_error_pmf(q, pe)?;
    Ok((1..=q).map(|e| profile.get(e) * pmf[e]).sum())
}

/// 1 − Σ pmf(q_e)·P_rec(q_e)^{q_e}, recoveries independent given q_e.
pub fn bler_exact(q: usize, pe: f64, profile: &RecoveryProfile) -> Result<f64> {
    let pmf = segment_error_pmf(q, pe)?;
    let ok: f64 = (0..=q).map(|e| pmf[e] * profile.get(e).powi(e as i32)).sum();
    Ok((1.0 - ok).max(0.0))
}

/// 1 − (1 − Pe·(1 − η))^q.
pub fn bler_approx(q: usize, pe: f64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pe) || !(0.0..=1.0).contains(&eta) {
        return Err(invalid(format!("Pe = {pe} and eta = {eta} must lie in [0, 1]")));
    }
    Ok(1.0 - (1.0 - pe * (1.0 - eta)).powi(q as i32))
}

/// Lower bound on the recovery error probability of a k-bit segment given
/// its residual conditional entropy (bits), using log₂(2^k − 1) ≈ k.
pub fn fano_lower_bound(h_cond: f64, k: usize) -> Result<f64> {
    if k == 0 || h_cond < 0.0 {
        return Err(invalid("Fano bound needs k >= 1 and nonnegative entropy"));
    }
    Ok(((h_cond - 1.0) / k as f64).max(0.0))
}

/// Same bound with the exact denominator log₂(2^k − 1).
pub fn fano_lower_bound_exact(h_cond: f64, k: usize) -> Result<f64> {
    if k <= 1 || h_cond < 0.0 {
        return Err(invalid("exact Fano bound needs k >= 2 and nonnegative entropy"));
    }
    let denom = k as f64 + (-(2f64.powi(-(k as i32)))).ln_1p() / LN_2;
    Ok(((h_cond - 1.0) / denom).max(0.0))
}

/// Per-segment OSD error rate on random information words.
pub fn estimate_pe<R: Rng + ?Sized>(
    code: &LinearCode,
    snr_db: f64,
    osd_order: usize,
    frames: usize,
    rng: &mut R,
) -> Result<Proportion> {
    if frames < 100 {
        return Err(invalid(format!("need at least 100 frames, got {frames}")));
    }
    let mut errors = 0;
    for _ in 0..frames {
        let info = BitVec::from_bools(&(0..code.k()).map(|_| rng.random::<bool>()).collect::<Vec<_>>());
        let obs = transmit(&modulate(&code.encode(&info)?), snr_db, rng);
        errors += (decode(code, &obs, osd_order)?.info != info) as usize;
    }
    Ok(wilson_interval(errors, frames))
}

/// Sentence error rate of a synthetic receiver: each of q segments fails
/// with probability `pe`, and each failed segment is repaired independently
/// with probability P_rec(q_e).
pub fn synthetic_recovery_bler<R: Rng + ?Sized>(
    q: usize,
    pe: f64,
    profile: &RecoveryProfile,
    sentences: usize,
    rng: &mut R,
) -> Result<Proportion> {
    if !(0.0..=1.0).contains(&pe) || sentences == 0 {
        return Err(invalid("synthetic run needs Pe in [0, 1] and at least one sentence"));
    }
    let mut errors = 0;
    for _ in 0..sentences {
        let q_e = (0..q).filter(|_| rng.random::<f64>() < pe).count();
        let p = profile.get(q_e);
        let repaired = (0..q_e).all(|_| rng.random::<f64>() < p);
        errors += (!repaired) as usize;
    }
    Ok(wilson_interval(errors, sentences))
}
