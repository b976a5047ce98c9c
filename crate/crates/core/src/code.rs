//! Binary linear block codes, systematic forms and mother-code puncturing.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::gf2::{BitVec, Gf2Matrix};

/// Largest `k` for which the exhaustive minimum-distance scan is allowed.
pub const MAX_DMIN_K: usize = 24;

/// A binary linear block code `C(n, k)` described by its generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearCode {
    n: usize,
    k: usize,
    generator: Gf2Matrix,
    parity_check: Option<Gf2Matrix>,
    d_min: Option<usize>,
    source: String,
}

impl LinearCode {
    /// Wraps a generator matrix. The generator must have full row rank and,
    /// if a parity-check matrix is supplied, `G·Hᵀ` must vanish.
    pub fn new(generator: Gf2Matrix, parity_check: Option<Gf2Matrix>, source: impl Into<String>) -> Result<Self> {
        let (k, n) = (generator.rows(), generator.cols());
        if k == 0 || k > n {
            return Err(invalid(format!("generator must be k x n with 0 < k <= n, got {k} x {n}")));
        }
        let rank = generator.rank();
        if rank != k {
            return Err(Error::Rank { expected: k, found: rank });
        }
        if let Some(h) = &parity_check {
            if h.cols() != n {
                return Err(invalid(format!("parity-check has {} columns, code length is {n}", h.cols())));
            }
            if !generator.mul_transpose(h).is_zero() {
                return Err(invalid("G·Hᵀ is not zero"));
            }
        }
        Ok(LinearCode { n, k, generator, parity_check, d_min: None, source: source.into() })
    }

    /// Computes and stores the minimum distance by exhaustive enumeration.
    pub fn with_min_distance(mut self) -> Result<Self> {
        self.d_min = Some(self.minimum_distance()?);
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn generator(&self) -> &Gf2Matrix {
        &self.generator
    }

    pub fn parity_check(&self) -> Option<&Gf2Matrix> {
        self.parity_check.as_ref()
    }

    pub fn d_min(&self) -> Option<usize> {
        self.d_min
    }

    /// Human-readable provenance, e.g. `random(32,16,seed=1)`.
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// `c = b·G`.
    pub fn encode(&self, info: &BitVec) -> Result<BitVec> {
        if info.len() != self.k {
            return Err(invalid(format!("information word has {} bits, code expects {}", info.len(), self.k)));
        }
        Ok(self.generator.vec_mul(info))
    }

    /// Minimum nonzero codeword weight, by Gray-code enumeration of all
    /// `2^k - 1` nonzero messages. Refused for `k > 24`.
    pub fn minimum_distance(&self) -> Result<usize> {
        if let Some(d) = self.d_min {
            return Ok(d);
        }
        if self.k > MAX_DMIN_K {
            return Err(invalid(format!("exhaustive d_min refused for k = {} > {MAX_DMIN_K}", self.k)));
        }
        let mut word = BitVec::zeros(self.n);
        let mut best = usize::MAX;
        for i in 1u64..(1u64 << self.k) {
            let bit = i.trailing_zeros() as usize;
            word.xor_assign(self.generator.row(bit));
            best = best.min(word.weight());
        }
        Ok(best)
    }

    /// OSD order `⌊d/4 − 1⌋` (floored at zero) when `d_min` is known.
    pub fn default_osd_order(&self) -> Option<usize> {
        self.d_min.map(|d| (d / 4).saturating_sub(1))
    }

    /// The `(n, 1)` repetition code.
    pub fn repetition(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("repetition code needs n >= 1"));
        }
        let g = Gf2Matrix::from_bitvecs(vec![BitVec::ones(n)], n)?;
        let mut code = LinearCode::new(g, None, format!("repetition({n})"))?;
        code.d_min = Some(n);
        Ok(code)
    }

    /// The `(8, 4, 4)` extended Hamming code.
    pub fn extended_hamming_8_4() -> Self {
        let g = Gf2Matrix::from_rows(&[
            [1u8, 0, 0, 0, 0, 1, 1, 1],
            [0, 1, 0, 0, 1, 0, 1, 1],
            [0, 0, 1, 0, 1, 1, 0, 1],
            [0, 0, 0, 1, 1, 1, 1, 0],
        ])
        .expect("static matrix");
        // self-dual
        let h = g.clone();
        let mut code = LinearCode::new(g, Some(h), "ext-hamming(8,4)").expect("static code");
        code.d_min = Some(4);
        code
    }

    /// Random systematic code `[I_k | P]` with `P` drawn from a seeded
    /// ChaCha8 stream; identical `(n, k, seed)` give identical codes.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(invalid(format!("random code needs 0 < k < n, got n={n}, k={k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = Gf2Matrix::zeros(k, n);
        for r in 0..k {
            g.set(r, r, true);
            for c in k..n {
                if rng.random::<bool>() {
                    g.set(r, c, true);
                }
            }
        }
        LinearCode::new(g, None, format!("random({n},{k},seed={seed})"))
    }

    /// Loads a generator in the `n k` text layout.
    pub fn from_generator_text(text: &str, source: impl Into<String>) -> Result<Self> {
        let g = Gf2Matrix::from_text(text)?;
        LinearCode::new(g, None, source)
    }

    pub fn from_generator_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        LinearCode::from_generator_text(&text, format!("file({})", path.display()))
    }

    /// Restriction to a subset of coordinates. Fails if the rank drops.
    pub fn restrict(&self, columns: &[usize]) -> Result<LinearCode> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n) {
            return Err(invalid(format!("position {c} out of range for n = {}", self.n)));
        }
        let g = self.generator.select_columns(columns);
        let rank = g.rank();
        if rank != self.k {
            return Err(Error::Rank { expected: self.k, found: rank });
        }
        Ok(LinearCode {
            n: columns.len(),
            k: self.k,
            generator: g,
            parity_check: None,
            d_min: None,
            source: format!("{}[{} of {}]", self.source, columns.len(), self.n),
        })
    }
}

/// Reduces `G` to `[I_k | P̃]`, permuting columns only when the leading `k`
/// columns are dependent. `perm[t]` is the original column placed at `t`.
pub fn systematic_form(g: &Gf2Matrix) -> Result<(Gf2Matrix, Vec<usize>)> {
    let k = g.rows();
    let ech = g.echelon();
    if ech.pivots.len() != k {
        return Err(Error::Rank { expected: k, found: ech.pivots.len() });
    }
    let mut is_pivot = vec![false; g.cols()];
    for &p in &ech.pivots {
        is_pivot[p] = true;
    }
    let mut perm = ech.pivots.clone();
    perm.extend((0..g.cols()).filter(|&c| !is_pivot[c]));
    Ok((ech.matrix.select_columns(&perm), perm))
}

/// A low-rate mother code together with the disjoint position sets sent in
/// each transmission round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotherCodeSchedule {
    mother: LinearCode,
    rounds: Vec<Vec<usize>>,
}

impl MotherCodeSchedule {
    /// `rounds` hold 0-based positions. The sets must be disjoint and the
    /// first one must carry an information set.
    pub fn new(mother: LinearCode, rounds: Vec<Vec<usize>>) -> Result<Self> {
        if rounds.is_empty() {
            return Err(invalid("schedule needs at least one round"));
        }
        let mut seen = vec![false; mother.n()];
        for (r, set) in rounds.iter().enumerate() {
            if set.is_empty() {
                return Err(invalid(format!("round {} is empty", r + 1)));
            }
            for &p in set {
                if p >= mother.n() {
                    return Err(invalid(format!("round {}: position {p} out of range", r + 1)));
                }
                if std::mem::replace(&mut seen[p], true) {
                    return Err(invalid(format!("round {}: position {p} repeated", r + 1)));
                }
            }
        }
        let sched = MotherCodeSchedule { mother, rounds };
        sched.puncture(1)?;
        Ok(sched)
    }

    /// Consecutive position blocks of the given sizes.
    pub fn from_round_sizes(mother: LinearCode, sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut rounds = Vec::with_capacity(sizes.len());
        for &s in sizes {
            rounds.push((start..start + s).collect());
            start += s;
        }
        MotherCodeSchedule::new(mother, rounds)
    }

    pub fn mother(&self) -> &LinearCode {
        &self.mother
    }

    pub fn rounds(&self) -> &[Vec<usize>] {
        &self.rounds
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Positions of rounds `1..=round`, in transmission order.
    pub fn positions_through(&self, round: usize) -> Vec<usize> {
        self.rounds[..round.min(self.rounds.len())].iter().flatten().copied().collect()
    }

    /// The code seen by a receiver holding rounds `1..=round`.
    pub fn puncture(&self, round: usize) -> Result<LinearCode> {
        if round == 0 || round > self.rounds.len() {
            return Err(invalid(format!("round {round} outside 1..={}", self.rounds.len())));
        }
        let cols = self.positions_through(round);
        let full = cols.len() == self.mother.n() && cols.iter().enumerate().all(|(i, &c)| i == c);
        if full {
            return Ok(self.mother.clone());
        }
        self.mother.restrict(&cols)
    }
}
