//! Sum-product LDPC decoding and MacKay alist I/O.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::SoftObservation;
use crate::code::LinearCode;
use crate::error::{invalid, Error, Result};
use crate::gf2::{parse_ints, BitVec, Gf2Matrix};

pub const DEFAULT_BP_ITERATIONS: usize = 80;

// keeps atanh finite
const TANH_CLAMP: f64 = 1.0 - 1e-15;

/// An LDPC code described by its parity-check matrix.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: Gf2Matrix,
    k: usize,
    max_iterations: usize,
    check_vars: Vec<Vec<usize>>,
    var_edges: Vec<Vec<usize>>,
}

impl LdpcCode {
    pub fn new(h: Gf2Matrix, max_iterations: usize) -> Result<Self> {
        if max_iterations == 0 {
            return Err(invalid("BP needs at least one iteration"));
        }
        let n = h.cols();
        let rank = h.rank();
        let check_vars: Vec<Vec<usize>> = h.row_vecs().iter().map(|r| r.iter_ones().collect()).collect();
        let mut var_edges = vec![Vec::new(); n];
        let mut e = 0;
        for vars in &check_vars {
            for &v in vars {
                var_edges[v].push(e);
                e += 1;
            }
        }
        Ok(LdpcCode { k: n - rank, h, max_iterations, check_vars, var_edges })
    }

    pub fn n(&self) -> usize {
        self.h.cols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parity_check(&self) -> &Gf2Matrix {
        &self.h
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    pub fn with_max_iterations(mut self, iterations: usize) -> Result<Self> {
        if iterations == 0 {
            return Err(invalid("BP needs at least one iteration"));
        }
        self.max_iterations = iterations;
        Ok(self)
    }

    /// Generator spanning the null space of H, systematic on its free columns.
    pub fn to_linear_code(&self) -> Result<LinearCode> {
        let g = self.h.null_space();
        LinearCode::new(g, Some(self.h.clone()), format!("ldpc({},{})", self.n(), self.k))
    }

    pub fn syndrome_is_zero(&self, word: &BitVec) -> bool {
        self.check_vars.iter().all(|vars| vars.iter().filter(|&&v| word.get(v)).count() % 2 == 0)
    }

    pub fn from_alist(text: &str, max_iterations: usize) -> Result<Self> {
        LdpcCode::new(parse_alist(text)?, max_iterations)
    }

    pub fn from_alist_file(path: &Path, max_iterations: usize) -> Result<Self> {
        LdpcCode::from_alist(&std::fs::read_to_string(path)?, max_iterations)
    }

    pub fn to_alist(&self) -> String {
        write_alist(&self.h)
    }
}

/// Outcome of a BP decode.
#[derive(Debug, Clone, PartialEq)]
pub struct BpResult {
    pub codeword: BitVec,
    pub converged: bool,
    pub iterations: usize,
}

/// Flooding sum-product on channel LLRs 2y/σ².
pub fn bp_decode(code: &LdpcCode, obs: &SoftObservation) -> Result<BpResult> {
    if obs.len() != code.n() {
        return Err(invalid(format!("observation has length {}, code length is {}", obs.len(), code.n())));
    }
    Ok(bp_decode_llr(code, &obs.llrs()))
}

/// Sum-product on explicit LLRs (positive favours 0; punctured positions
/// carry 0).
pub fn bp_decode_llr(code: &LdpcCode, llr: &[f64]) -> BpResult {
    let n = code.n();
    assert_eq!(llr.len(), n, "LLR vector length");
    let edges: usize = code.check_vars.iter().map(Vec::len).sum();
    let mut v2c = vec![0f64; edges];
    let mut c2v = vec![0f64; edges];
    let mut e = 0;
    for vars in &code.check_vars {
        for &v in vars {
            v2c[e] = llr[v];
            e += 1;
        }
    }

    let mut hard = BitVec::zeros(n);
    let mut tanhs: Vec<f64> = Vec::new();
    for it in 1..=code.max_iterations {
        let mut base = 0;
        for vars in &code.check_vars {
            let d = vars.len();
            tanhs.clear();
            tanhs.extend(v2c[base..base + d].iter().map(|m| (m / 2.0).tanh()));
            for i in 0..d {
                let mut prod = 1.0;
                for (j, t) in tanhs.iter().enumerate() {
                    if j != i {
                        prod *= t;
                    }
                }
                c2v[base + i] = 2.0 * prod.clamp(-TANH_CLAMP, TANH_CLAMP).atanh();
            }
            base += d;
        }
        for v in 0..n {
            let total: f64 = llr[v] + code.var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
            hard.set(v, total < 0.0);
            for &e in &code.var_edges[v] {
                v2c[e] = total - c2v[e];
            }
        }
        if code.syndrome_is_zero(&hard) {
            return BpResult { codeword: hard, converged: true, iterations: it };
        }
    }
    BpResult { codeword: hard, converged: false, iterations: code.max_iterations }
}

/// Reads a MacKay alist description of H.
pub fn parse_alist(text: &str) -> Result<Gf2Matrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| -> Result<(usize, Vec<usize>)> {
        let (no, line) = lines.next().ok_or_else(|| Error::Parse { line: 0, message: format!("missing {what}") })?;
        Ok((no, parse_ints(line, no)?))
    };
    let perr = |line: usize, message: String| Error::Parse { line, message };

    let (no, dims) = next("dimensions")?;
    let [n, m] = dims[..] else {
        return Err(perr(no, "expected `N M`".into()));
    };
    let (no, maxes) = next("maximum weights")?;
    let [max_col, max_row] = maxes[..] else {
        return Err(perr(no, "expected maximum column and row weights".into()));
    };
    let (no, col_w) = next("column weights")?;
    if col_w.len() != n {
        return Err(perr(no, format!("expected {n} column weights, found {}", col_w.len())));
    }
    if let Some(w) = col_w.iter().find(|&&w| w > max_col) {
        return Err(perr(no, format!("column weight {w} exceeds maximum {max_col}")));
    }
    let (no, row_w) = next("row weights")?;
    if row_w.len() != m {
        return Err(perr(no, format!("expected {m} row weights, found {}", row_w.len())));
    }
    if let Some(w) = row_w.iter().find(|&&w| w > max_row) {
        return Err(perr(no, format!("row weight {w} exceeds maximum {max_row}")));
    }

    let mut h = Gf2Matrix::zeros(m, n);
    for (c, &w) in col_w.iter().enumerate() {
        let (no, idx) = next("column list")?;
        let entries = list_entries(&idx, w, m, no)?;
        for r in entries {
            if h.get(r, c) {
                return Err(perr(no, format!("row {} repeated in column {}", r + 1, c + 1)));
            }
            h.set(r, c, true);
        }
    }
    for (r, &w) in row_w.iter().enumerate() {
        let (no, idx) = next("row list")?;
        let entries = list_entries(&idx, w, n, no)?;
        let listed: Vec<usize> = {
            let mut e = entries;
            e.sort_unstable();
            e
        };
        let from_cols: Vec<usize> = h.row(r).iter_ones().collect();
        if listed != from_cols {
            return Err(perr(no, format!("row {} disagrees with the column lists", r + 1)));
        }
    }
    Ok(h)
}

fn list_entries(idx: &[usize], weight: usize, bound: usize, line: usize) -> Result<Vec<usize>> {
    if idx.len() < weight {
        return Err(Error::Parse { line, message: format!("expected {weight} indices, found {}", idx.len()) });
    }
    if idx[weight..].iter().any(|&x| x != 0) {
        return Err(Error::Parse { line, message: "nonzero entry past the stated weight".into() });
    }
    idx[..weight]
        .iter()
        .map(|&x| {
            if x == 0 || x > bound {
                Err(Error::Parse { line, message: format!("index {x} out of range 1..={bound}") })
            } else {
                Ok(x - 1)
            }
        })
        .collect()
}

/// Canonical alist: ascending 1-based indices, zero-padded to the maximum
/// weight, single spaces.
pub fn write_alist(h: &Gf2Matrix) -> String {
    let (m, n) = (h.rows(), h.cols());
    let cols: Vec<Vec<usize>> = (0..n).map(|c| h.column(c).iter_ones().collect()).collect();
    let rows: Vec<Vec<usize>> = (0..m).map(|r| h.row(r).iter_ones().collect()).collect();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = rows.iter().map(Vec::len).max().unwrap_or(0);
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let padded = |v: &[usize], w: usize| {
        let mut out: Vec<usize> = v.iter().map(|x| x + 1).collect();
        out.resize(w, 0);
        join(&out)
    };
    let mut s = String::new();
    let _ = writeln!(s, "{n} {m}");
    let _ = writeln!(s, "{max_col} {max_row}");
    let _ = writeln!(s, "{}", join(&cols.iter().map(Vec::len).collect::<Vec<_>>()));
    let _ = writeln!(s, "{}", join(&rows.iter().map(Vec::len).collect::<Vec<_>>()));
    for c in &cols {
        let _ = writeln!(s, "{}", padded(c, max_col));
    }
    for r in &rows {
        let _ = writeln!(s, "{}", padded(r, max_row));
    }
    s
}

/// Regular LDPC parity-check matrix with column weight `wc` and row weight
/// `wr` and no 4-cycles, filled column by column, each column taking the
/// least loaded rows that share no column with its other rows.
pub fn regular_ldpc(n: usize, wc: usize, wr: usize, seed: u64) -> Result<Gf2Matrix> {
    if wc < 2 || wr < 2 || (n * wc) % wr != 0 {
        return Err(invalid(format!("need wc, wr >= 2 and wr | n·wc, got n={n}, wc={wc}, wr={wr}")));
    }
    let m = n * wc / wr;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..1000 {
        let mut rows: Vec<BitVec> = vec![BitVec::zeros(n); m];
        for c in 0..n {
            let mut chosen: Vec<usize> = Vec::with_capacity(wc);
            for _ in 0..wc {
                let mut cands: Vec<usize> = (0..m)
                    .filter(|&r| rows[r].weight() < wr && !chosen.contains(&r))
                    .filter(|&r| chosen.iter().all(|&s| rows[r].overlap(&rows[s]) == 0))
                    .collect();
                if cands.is_empty() {
                    continue 'attempt;
                }
                cands.shuffle(&mut rng);
                let r = *cands.iter().min_by_key(|&&r| rows[r].weight()).expect("nonempty");
                chosen.push(r);
            }
            for &r in &chosen {
                rows[r].set(c, true);
            }
        }
        return Gf2Matrix::from_bitvecs(rows, n);
    }
    Err(invalid("could not construct a 4-cycle-free matrix"))
}
