//! Ordered statistics decoding: reliability ordering, systematic
//! re-encoding of candidate information words and weighted Hamming distance.

use crate::channel::SoftObservation;
use crate::code::LinearCode;
use crate::error::{invalid, Result};
use crate::gf2::{BitVec, Gf2Matrix};

/// The code and observation re-expressed in decreasing-reliability order.
///
/// `order[t]` is the original position placed at permuted position `t`; it
/// is the composition of the reliability sort `pi1` and the column swaps
/// `pi2` needed to make the leading `k` columns independent.
#[derive(Debug, Clone)]
pub struct PermutedView {
    pi1: Vec<usize>,
    pi2: Vec<usize>,
    order: Vec<usize>,
    g_sys: Gf2Matrix,
    // row operations taking G to G_sys, so info = c̃_B · transform
    transform: Gf2Matrix,
    y_t: Vec<f64>,
    alpha_t: Vec<f64>,
    r_t: BitVec,
    noise_variance: f64,
}

impl PermutedView {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn k(&self) -> usize {
        self.g_sys.rows()
    }

    /// `pi1[t]` is the original position with the `t`-th largest reliability.
    pub fn pi1(&self) -> &[usize] {
        &self.pi1
    }

    /// `pi2[t]` is the sorted position moved to permuted position `t`.
    pub fn pi2(&self) -> &[usize] {
        &self.pi2
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn g_sys(&self) -> &Gf2Matrix {
        &self.g_sys
    }

    pub fn y_t(&self) -> &[f64] {
        &self.y_t
    }

    pub fn alpha_t(&self) -> &[f64] {
        &self.alpha_t
    }

    pub fn r_t(&self) -> &BitVec {
        &self.r_t
    }

    /// Hard decisions on the most reliable basis.
    pub fn r_b(&self) -> BitVec {
        self.r_t.slice(0, self.k())
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Original-order vector to permuted order.
    pub fn permute(&self, v: &BitVec) -> BitVec {
        v.select(&self.order)
    }

    /// Permuted-order vector back to original order.
    pub fn unpermute(&self, v: &BitVec) -> BitVec {
        let mut out = BitVec::zeros(v.len());
        for (t, &p) in self.order.iter().enumerate() {
            if v.get(t) {
                out.set(p, true);
            }
        }
        out
    }

    /// `u · G̃` for a basis word `u`.
    pub fn encode_basis(&self, u: &BitVec) -> BitVec {
        self.g_sys.vec_mul(u)
    }

    /// Information word of the original code producing permuted codeword `c_t`.
    pub fn info_of(&self, c_t: &BitVec) -> BitVec {
        self.transform.vec_mul(&c_t.slice(0, self.k()))
    }

    /// WHD of a permuted codeword against the permuted hard decisions.
    pub fn whd(&self, c_t: &BitVec) -> f64 {
        c_t.xor(&self.r_t).iter_ones().map(|j| self.alpha_t[j]).sum()
    }
}

/// Sorts positions by reliability and reduces the generator to `[I_k | P̃]`
/// on the most reliable independent basis.
pub fn prepare(code: &LinearCode, obs: &SoftObservation) -> Result<PermutedView> {
    let n = code.n();
    let k = code.k();
    if obs.len() != n {
        return Err(invalid(format!("observation has length {}, code length is {n}", obs.len())));
    }
    let alpha = obs.reliabilities();
    let mut pi1: Vec<usize> = (0..n).collect();
    pi1.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]));

    // [G | I_k]: elimination restricted to the first n columns also records
    // the row operations in the trailing block
    let g = code.generator();
    let aug_rows: Vec<BitVec> = (0..k)
        .map(|i| {
            let mut e = BitVec::zeros(k);
            e.set(i, true);
            g.row(i).concat(&e)
        })
        .collect();
    let aug = Gf2Matrix::from_bitvecs(aug_rows, n + k)?;
    let ech = aug.echelon_in_order(&pi1, k);
    debug_assert_eq!(ech.pivots.len(), k, "generator has full rank");

    let mut rank_of = vec![0usize; n];
    for (t, &p) in pi1.iter().enumerate() {
        rank_of[p] = t;
    }
    let mut is_pivot = vec![false; n];
    let mut pi2: Vec<usize> = ech.pivots.iter().map(|&p| rank_of[p]).collect();
    for &t in &pi2 {
        is_pivot[t] = true;
    }
    pi2.extend((0..n).filter(|&t| !is_pivot[t]));
    let order: Vec<usize> = pi2.iter().map(|&t| pi1[t]).collect();

    let g_sys = ech.matrix.select_columns(&order);
    let transform = ech.matrix.select_columns(&(n..n + k).collect::<Vec<_>>());
    let y = obs.values();
    let y_t: Vec<f64> = order.iter().map(|&p| y[p]).collect();
    let alpha_t: Vec<f64> = y_t.iter().map(|v| v.abs()).collect();
    let r_t = BitVec::from_bools(&y_t.iter().map(|&v| v < 0.0).collect::<Vec<_>>());
    Ok(PermutedView { pi1, pi2, order, g_sys, transform, y_t, alpha_t, r_t, noise_variance: obs.noise_variance() })
}

/// Weighted Hamming distance: Σ α_j over positions where the codeword
/// disagrees with the hard decision.
pub fn whd(codeword: &BitVec, obs: &SoftObservation) -> f64 {
    let r = obs.hard_decision();
    codeword.xor(&r).iter_ones().map(|j| obs.reliability(j)).sum()
}

/// Outcome of an order-m decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Decoded codeword in original order.
    pub codeword: BitVec,
    pub info: BitVec,
    pub whd: f64,
    /// Winning TEP over the permuted most reliable basis.
    pub tep: BitVec,
    pub tep_weight: usize,
    pub teps_evaluated: usize,
}

/// Order-m OSD on a fresh observation.
pub fn decode(code: &LinearCode, obs: &SoftObservation, order: usize) -> Result<DecodeResult> {
    let view = prepare(code, obs)?;
    decode_view(&view, order)
}

/// Order-m OSD on a prepared view. TEPs are visited by weight, then
/// lexicographically over basis positions; the first minimum wins.
pub fn decode_view(view: &PermutedView, order: usize) -> Result<DecodeResult> {
    let k = view.k();
    if order > k {
        return Err(invalid(format!("OSD order {order} exceeds k = {k}")));
    }
    let r_b = view.r_b();
    let base = view.encode_basis(&r_b).xor(&view.r_t);
    let rows = view.g_sys.row_vecs();

    let mut best = Best { whd: f64::INFINITY, tep: Vec::new() };
    let mut evaluated = 0usize;
    let mut chosen: Vec<usize> = Vec::with_capacity(order);
    for w in 0..=order {
        enumerate(&base, rows, &view.alpha_t, 0, w, &mut chosen, &mut best, &mut evaluated);
    }

    let mut tep = BitVec::zeros(k);
    for &i in &best.tep {
        tep.set(i, true);
    }
    let c_t = view.encode_basis(&r_b.xor(&tep));
    let codeword = view.unpermute(&c_t);
    let info = view.info_of(&c_t);
    let whd: f64 = codeword_whd_original(view, &codeword);
    Ok(DecodeResult { codeword, info, whd, tep_weight: best.tep.len(), tep, teps_evaluated: evaluated })
}

fn codeword_whd_original(view: &PermutedView, codeword: &BitVec) -> f64 {
    let mut alpha = vec![0f64; view.n()];
    let mut r = BitVec::zeros(view.n());
    for (t, &p) in view.order.iter().enumerate() {
        alpha[p] = view.alpha_t[t];
        r.set(p, view.r_t.get(t));
    }
    codeword.xor(&r).iter_ones().map(|j| alpha[j]).sum()
}

struct Best {
    whd: f64,
    tep: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    diff: &BitVec,
    rows: &[BitVec],
    alpha: &[f64],
    start: usize,
    remaining: usize,
    chosen: &mut Vec<usize>,
    best: &mut Best,
    evaluated: &mut usize,
) {
    if remaining == 0 {
        *evaluated += 1;
        // partial sums of nonnegative terms only grow, so stopping at the
        // incumbent cannot change the outcome
        let mut acc = 0.0;
        for j in diff.iter_ones() {
            acc += alpha[j];
            if acc >= best.whd {
                return;
            }
        }
        best.whd = acc;
        best.tep.clone_from(chosen);
        return;
    }
    for i in start..=rows.len() - remaining {
        let next = diff.xor(&rows[i]);
        chosen.push(i);
        enumerate(&next, rows, alpha, i + 1, remaining - 1, chosen, best, evaluated);
        chosen.pop();
    }
}

/// Re-encoded candidate in permuted coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Reencoded {
    pub codeword_t: BitVec,
    /// r̃_B ⊕ c̃_B
    pub implied_tep: BitVec,
    pub whd: f64,
}

/// Encodes an arbitrary information word and expresses it against the
/// view, exposing the TEP it implicitly corresponds to.
pub fn reencode_candidate(code: &LinearCode, view: &PermutedView, info: &BitVec) -> Result<Reencoded> {
    let c = code.encode(info)?;
    let codeword_t = view.permute(&c);
    let implied_tep = view.r_b().xor(&codeword_t.slice(0, view.k()));
    let whd = view.whd(&codeword_t);
    Ok(Reencoded { codeword_t, implied_tep, whd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{modulate, transmit, SimRng};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn obs(values: &[f64]) -> SoftObservation {
        SoftObservation::new(values.to_vec(), 1.0).unwrap()
    }

    fn all_codewords(code: &LinearCode) -> Vec<BitVec> {
        let k = code.k();
        (0..1u64 << k)
            .map(|m| {
                let bits: Vec<u8> = (0..k).map(|i| ((m >> i) & 1) as u8).collect();
                code.encode(&BitVec::from_bits(&bits)).unwrap()
            })
            .collect()
    }

    #[test]
    fn sorted_input_keeps_identity_permutations() {
        let code = LinearCode::random(6, 3, 4).unwrap();
        let view = prepare(&code, &obs(&[3.0, -2.5, 2.0, 1.5, -1.0, 0.5])).unwrap();
        assert_eq!(view.pi1(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(view.pi2(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn reliability_sort_swaps() {
        let code = LinearCode::repetition(2).unwrap();
        let view = prepare(&code, &obs(&[0.1, 0.9])).unwrap();
        assert_eq!(view.pi1(), &[1, 0]);
    }

    #[test]
    fn dependent_leading_columns_trigger_pi2() {
        // columns 0 and 1 are equal, so the second most reliable column is skipped
        let g = Gf2Matrix::from_rows(&[[1u8, 1, 0, 1], [0, 0, 1, 1]]).unwrap();
        let code = LinearCode::new(g, None, "test").unwrap();
        let view = prepare(&code, &obs(&[2.0, 1.5, 1.0, 0.5])).unwrap();
        assert_eq!(view.pi2(), &[0, 2, 1, 3]);
        assert_eq!(view.g_sys().select_columns(&[0, 1]), Gf2Matrix::identity(2));
    }

    #[test]
    fn round_trip_permutation_randomized() {
        let mut rng = SimRng::seed_from_u64(1);
        for trial in 0..1000 {
            let code = LinearCode::random(12, 5, trial).unwrap();
            let info: Vec<u8> = (0..5).map(|_| rng.random_range(0..2)).collect();
            let c = code.encode(&BitVec::from_bits(&info)).unwrap();
            let o = transmit(&modulate(&c), 1.0, &mut rng);
            let view = prepare(&code, &o).unwrap();
            assert_eq!(view.unpermute(&view.permute(&c)), c);
            let sorted: Vec<f64> = view.pi1().iter().map(|&p| o.reliability(p)).collect();
            assert!(sorted.windows(2).all(|w| w[0] >= w[1]));
            // every row of G̃ maps back to a codeword of the original code
            for r in view.g_sys().row_vecs() {
                let back = view.unpermute(r);
                assert!(code.generator().null_space().mul_vec(&back).is_zero());
            }
            assert_eq!(view.info_of(&view.permute(&c)), BitVec::from_bits(&info));
        }
    }

    #[test]
    fn whd_examples() {
        let o = obs(&[0.9, -1.2, 0.3, -0.1]);
        assert_eq!(whd(&o.hard_decision(), &o), 0.0);
        let c = BitVec::from_bits(&[0, 1, 1, 0]);
        assert!((whd(&c, &o) - 0.4).abs() < 1e-12);
        let comp = o.hard_decision().xor(&BitVec::ones(4));
        assert!((whd(&comp, &o) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn noiseless_decode_returns_transmitted() {
        let code = LinearCode::random(16, 8, 3).unwrap();
        let info = BitVec::from_bits(&[1, 0, 1, 1, 0, 0, 1, 0]);
        let c = code.encode(&info).unwrap();
        let res = decode(&code, &obs(&modulate(&c)), 2).unwrap();
        assert_eq!(res.codeword, c);
        assert_eq!(res.info, info);
        assert_eq!(res.tep_weight, 0);
        assert_eq!(res.whd, 0.0);
        assert_eq!(res.teps_evaluated, 1 + 8 + 28);
    }

    #[test]
    fn order_zero_fixes_parity_part_error() {
        let code = LinearCode::random(16, 8, 9).unwrap();
        let info = BitVec::from_bits(&[0, 1, 1, 0, 1, 0, 0, 1]);
        let c = code.encode(&info).unwrap();
        let mut y = modulate(&c);
        // graded reliabilities; the least reliable symbol is flipped
        for (j, v) in y.iter_mut().enumerate() {
            *v *= 2.0 - 0.1 * j as f64;
        }
        y[15] = -y[15];
        let res = decode(&code, &obs(&y), 0).unwrap();
        assert_eq!(res.codeword, c);
        assert_eq!(res.tep_weight, 0);
    }

    #[test]
    fn full_order_is_ml_on_extended_hamming() {
        let code = LinearCode::extended_hamming_8_4();
        let words = all_codewords(&code);
        let mut rng = SimRng::seed_from_u64(77);
        for _ in 0..10_000 {
            let info: Vec<u8> = (0..4).map(|_| rng.random_range(0..2)).collect();
            let c = code.encode(&BitVec::from_bits(&info)).unwrap();
            let o = transmit(&modulate(&c), 1.0, &mut rng);
            let res = decode(&code, &o, 4).unwrap();
            let ml = words.iter().map(|w| whd(w, &o)).fold(f64::INFINITY, f64::min);
            assert!((res.whd - ml).abs() < 1e-9);
            assert_eq!(code.encode(&res.info).unwrap(), res.codeword);
        }
    }

    #[test]
    fn reencode_examples() {
        let code = LinearCode::random(12, 6, 5).unwrap();
        let mut rng = SimRng::seed_from_u64(8);
        let info: Vec<u8> = (0..6).map(|_| rng.random_range(0..2)).collect();
        let c = code.encode(&BitVec::from_bits(&info)).unwrap();
        let o = transmit(&modulate(&c), 3.0, &mut rng);
        let view = prepare(&code, &o).unwrap();
        let zero = decode_view(&view, 0).unwrap();
        let re = reencode_candidate(&code, &view, &zero.info).unwrap();
        assert!(re.implied_tep.is_zero());

        // the complement of r̃_B on the basis implies a weight-k TEP
        let u = view.r_b().xor(&BitVec::ones(6));
        let far_info = view.info_of(&view.encode_basis(&u));
        let far = reencode_candidate(&code, &view, &far_info).unwrap();
        assert_eq!(far.implied_tep.weight(), 6);
        let orig = code.encode(&far_info).unwrap();
        assert!((far.whd - whd(&orig, &o)).abs() < 1e-9);
    }

    #[test]
    fn decode_is_deterministic() {
        let code = LinearCode::random(32, 16, 2).unwrap();
        let o = transmit(&vec![1.0; 32], 1.0, &mut SimRng::seed_from_u64(4));
        assert_eq!(decode(&code, &o, 2).unwrap(), decode(&code, &o, 2).unwrap());
    }

    #[test]
    fn order_above_k_is_rejected() {
        let code = LinearCode::repetition(3).unwrap();
        assert!(decode(&code, &obs(&[1.0, 1.0, 1.0]), 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn whd_non_increasing_in_order(seed in 0u64..10_000, snr in -1.0f64..4.0) {
            let code = LinearCode::random(24, 12, seed).unwrap();
            let mut rng = SimRng::seed_from_u64(seed ^ 0xABCD);
            let o = transmit(&vec![1.0; 24], snr, &mut rng);
            let view = prepare(&code, &o).unwrap();
            let mut prev = f64::INFINITY;
            for m in 0..=3 {
                let r = decode_view(&view, m).unwrap();
                prop_assert!(r.whd <= prev + 1e-12);
                prev = r.whd;
            }
        }

        #[test]
        fn full_order_matches_exhaustive(seed in 0u64..10_000, n in 4usize..=10, kk in 1usize..=5, snr in -2.0f64..3.0) {
            let k = kk.min(n - 1);
            let code = LinearCode::random(n, k, seed).unwrap();
            let mut rng = SimRng::seed_from_u64(seed + 1);
            let o = transmit(&vec![1.0; n], snr, &mut rng);
            let res = decode(&code, &o, k).unwrap();
            let ml = all_codewords(&code).iter().map(|w| whd(w, &o)).fold(f64::INFINITY, f64::min);
            prop_assert!((res.whd - ml).abs() < 1e-9);
        }

        #[test]
        fn whd_is_permutation_invariant(seed in 0u64..10_000) {
            let code = LinearCode::random(20, 8, seed).unwrap();
            let mut rng = SimRng::seed_from_u64(seed);
            let o = transmit(&vec![1.0; 20], 1.0, &mut rng);
            let view = prepare(&code, &o).unwrap();
            let info: Vec<u8> = (0..8).map(|_| rng.random_range(0..2)).collect();
            let info = BitVec::from_bits(&info);
            let re = reencode_candidate(&code, &view, &info).unwrap();
            let direct = whd(&code.encode(&info).unwrap(), &o);
            prop_assert!((re.whd - direct).abs() < 1e-9);
        }
    }
}
