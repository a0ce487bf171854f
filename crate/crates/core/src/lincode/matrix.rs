use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bits::{dot_unchecked, BitString};
use super::CodeError;

/// Largest dimension whose codewords we enumerate exhaustively.
pub const MAX_ENUM_DIM: usize = 24;

/// Parameters of a binary linear `(n, k, d)` code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub n: usize,
    pub k: usize,
    pub d_target: usize,
}

impl CodeSpec {
    pub fn new(n: usize, k: usize, d_target: usize) -> Result<Self, CodeError> {
        if n == 0 || k == 0 || k > n {
            return Err(CodeError::InvalidSpec(format!("need 1 <= k <= n, got n={n}, k={k}")));
        }
        if d_target == 0 || d_target > n - k + 1 {
            return Err(CodeError::InvalidSpec(format!(
                "d={d_target} violates the Singleton bound d <= n-k+1 = {}",
                n - k + 1
            )));
        }
        Ok(Self { n, k, d_target })
    }

    pub fn ratio_k(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn ratio_d(&self) -> f64 {
        self.d_target as f64 / self.n as f64
    }

    /// Whether the dimension ratio is large enough for concealment counting.
    pub fn conceals(&self) -> bool {
        2 * self.k > self.n
    }
}

/// Reduced row-echelon basis used for membership tests.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Echelon {
    rows: Vec<BitString>,
    pivots: Vec<usize>,
}

impl Echelon {
    fn build(rows: &[BitString], n: usize) -> Self {
        let mut work: Vec<BitString> = rows.to_vec();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(sel) = (rank..work.len()).find(|&r| work[r].get(col) == 1) else {
                continue;
            };
            work.swap(rank, sel);
            let pivot_row = work[rank].clone();
            for (r, row) in work.iter_mut().enumerate() {
                if r != rank && row.get(col) == 1 {
                    row.xor_assign_unchecked(&pivot_row);
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == work.len() {
                break;
            }
        }
        work.truncate(rank);
        Self { rows: work, pivots }
    }

    fn reduces_to_zero(&self, c: &BitString) -> bool {
        let mut v = c.clone();
        for (row, &p) in self.rows.iter().zip(self.pivots.iter()) {
            if v.get(p) == 1 {
                v.xor_assign_unchecked(row);
            }
        }
        v.is_zero()
    }
}

/// Full-rank `k × n` generator matrix over GF(2) with brute-force verified distance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    n: usize,
    rows: Vec<BitString>,
    d: usize,
    echelon: Echelon,
}

#[derive(Serialize, Deserialize)]
struct GeneratorMatrixJson {
    n: usize,
    k: usize,
    d: usize,
    rows: Vec<BitString>,
}

impl GeneratorMatrix {
    /// Validates rank and computes the exact minimum distance (k <= 24).
    pub fn from_rows(rows: Vec<BitString>) -> Result<Self, CodeError> {
        let k = rows.len();
        if k == 0 {
            return Err(CodeError::InvalidArgument("generator matrix has no rows".into()));
        }
        if k > MAX_ENUM_DIM {
            return Err(CodeError::UnsupportedScale { k, max: MAX_ENUM_DIM });
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(CodeError::InvalidArgument("rows must share a nonzero length".into()));
        }
        let echelon = Echelon::build(&rows, n);
        if echelon.rows.len() != k {
            return Err(CodeError::RankDeficient { rank: echelon.rows.len(), k });
        }
        let mut g = Self { n, rows, d: 0, echelon };
        g.d = g.scan_min_weight(0).expect("full rank code has nonzero codewords");
        Ok(g)
    }

    /// The `n × n` identity generator, distance 1.
    pub fn identity(n: usize) -> Result<Self, CodeError> {
        let rows = (0..n)
            .map(|i| {
                let mut r = BitString::zeros(n);
                r.set(i, 1);
                r
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// Minimum distance recorded at construction by exhaustive scan.
    pub fn verified_min_distance(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[BitString] {
        &self.rows
    }

    pub fn spec(&self) -> CodeSpec {
        CodeSpec { n: self.n, k: self.k(), d_target: self.d }
    }

    /// Walks all `2^k` codewords in Gray-code order (zero codeword first).
    pub fn for_each_codeword(&self, mut f: impl FnMut(&BitString)) {
        let mut cw = BitString::zeros(self.n);
        f(&cw);
        let total: u64 = 1 << self.k();
        for i in 1..total {
            let row = i.trailing_zeros() as usize;
            cw.xor_assign_unchecked(&self.rows[row]);
            f(&cw);
        }
    }

    /// Exact minimum nonzero weight; returns `None` as soon as a weight
    /// below `floor` is found (used for rejection sampling).
    fn scan_min_weight(&self, floor: usize) -> Option<usize> {
        let k = self.k();
        let width = self.rows[0].words().len();
        let mut cw = vec![0u64; width];
        let mut best = usize::MAX;
        for i in 1u64..(1u64 << k) {
            let row = i.trailing_zeros() as usize;
            for (a, b) in cw.iter_mut().zip(self.rows[row].words()) {
                *a ^= b;
            }
            let w: usize = cw.iter().map(|x| x.count_ones() as usize).sum();
            if w < best {
                best = w;
                if best < floor {
                    return None;
                }
            }
        }
        Some(best)
    }

    pub fn is_codeword(&self, c: &BitString) -> Result<bool, CodeError> {
        self.check_len(c)?;
        Ok(self.echelon.reduces_to_zero(c))
    }

    fn check_len(&self, c: &BitString) -> Result<(), CodeError> {
        if c.len() != self.n {
            return Err(CodeError::InvalidArgument(format!(
                "expected length {}, got {}",
                self.n,
                c.len()
            )));
        }
        Ok(())
    }

    /// Coefficients `g_j = row_j ⊙ r` of the functional `m ↦ (mG) ⊙ r`.
    pub fn parity_functional(&self, r: &BitString) -> Result<BitString, CodeError> {
        self.check_len(r)?;
        let mut g = BitString::zeros(self.k());
        for (j, row) in self.rows.iter().enumerate() {
            g.set(j, dot_unchecked(row, r));
        }
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix serializes")
    }
}

impl Serialize for GeneratorMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GeneratorMatrixJson { n: self.n, k: self.k(), d: self.d, rows: self.rows.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for GeneratorMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = GeneratorMatrixJson::deserialize(d)?;
        if raw.rows.len() != raw.k || raw.rows.iter().any(|r| r.len() != raw.n) {
            return Err(D::Error::custom("rows do not match declared n and k"));
        }
        let g = GeneratorMatrix::from_rows(raw.rows).map_err(D::Error::custom)?;
        if g.d != raw.d {
            return Err(D::Error::custom(format!(
                "declared distance {} but exhaustive scan finds {}",
                raw.d, g.d
            )));
        }
        Ok(g)
    }
}

/// Rejection-samples a random full-rank generator whose exhaustive minimum
/// distance is at least `spec.d_target`.
pub fn generate_code<R: Rng + ?Sized>(
    spec: &CodeSpec,
    rng: &mut R,
    max_attempts: usize,
) -> Result<GeneratorMatrix, CodeError> {
    let spec = CodeSpec::new(spec.n, spec.k, spec.d_target)?;
    if spec.k > MAX_ENUM_DIM {
        return Err(CodeError::UnsupportedScale { k: spec.k, max: MAX_ENUM_DIM });
    }
    for _ in 0..max_attempts {
        let rows: Vec<BitString> = (0..spec.k).map(|_| BitString::random(spec.n, rng)).collect();
        let echelon = Echelon::build(&rows, spec.n);
        if echelon.rows.len() != spec.k {
            continue;
        }
        let mut g = GeneratorMatrix { n: spec.n, rows, d: 0, echelon };
        if let Some(d) = g.scan_min_weight(spec.d_target) {
            g.d = d;
            return Ok(g);
        }
    }
    Err(CodeError::GenerationFailed { spec, attempts: max_attempts })
}

/// GF(2) vector-matrix product `message · G`.
pub fn encode(g: &GeneratorMatrix, message: &BitString) -> Result<BitString, CodeError> {
    if message.len() != g.k() {
        return Err(CodeError::InvalidArgument(format!(
            "message length {} does not match k = {}",
            message.len(),
            g.k()
        )));
    }
    let mut out = BitString::zeros(g.n);
    for (j, row) in g.rows.iter().enumerate() {
        if message.get(j) == 1 {
            out.xor_assign_unchecked(row);
        }
    }
    Ok(out)
}

pub fn min_distance(g: &GeneratorMatrix) -> usize {
    g.scan_min_weight(0).expect("full rank")
}

/// Draws a uniformly random message `m` with `m · functional = b`.
pub(crate) fn sample_message_with_parity<R: Rng + ?Sized>(
    functional: &BitString,
    b: u8,
    rng: &mut R,
) -> Result<BitString, CodeError> {
    let mut m = BitString::random(functional.len(), rng);
    if functional.is_zero() {
        return if b == 0 { Ok(m) } else { Err(CodeError::DegenerateMask) };
    }
    if dot_unchecked(&m, functional) != b {
        // flipping one coordinate in the functional's support is a bijection
        // between the two parity classes, so the result stays uniform
        let j = (0..functional.len()).find(|&j| functional.get(j) == 1).expect("nonzero");
        m.flip(j);
    }
    Ok(m)
}

/// Uniform codeword `c` with `c ⊙ r = b`.
pub fn sample_codeword_with_parity<R: Rng + ?Sized>(
    g: &GeneratorMatrix,
    r: &BitString,
    b: u8,
    rng: &mut R,
) -> Result<BitString, CodeError> {
    let functional = g.parity_functional(r)?;
    let m = sample_message_with_parity(&functional, b & 1, rng)?;
    encode(g, &m)
}

/// Number of codewords at Hamming distance exactly `d0` from `c`.
pub fn count_codewords_at_distance(g: &GeneratorMatrix, c: &BitString, d0: usize) -> Result<u64, CodeError> {
    g.check_len(c)?;
    let mut count = 0u64;
    g.for_each_codeword(|w| {
        let dist: u32 = w
            .words()
            .iter()
            .zip(c.words())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        if dist as usize == d0 {
            count += 1;
        }
    });
    Ok(count)
}

/// `A_w` for `w = 0..=n`.
pub fn weight_distribution(g: &GeneratorMatrix) -> Vec<u64> {
    let mut dist = vec![0u64; g.n + 1];
    g.for_each_codeword(|w| dist[w.weight()] += 1);
    dist
}

/// Closest codeword to `c` whose parity under `r` equals `parity`, with its distance.
pub fn nearest_codeword_with_parity(
    g: &GeneratorMatrix,
    c: &BitString,
    r: &BitString,
    parity: u8,
) -> Result<Option<(BitString, usize)>, CodeError> {
    g.check_len(c)?;
    g.check_len(r)?;
    let mut best: Option<(BitString, usize)> = None;
    g.for_each_codeword(|w| {
        if dot_unchecked(w, r) != parity {
            return;
        }
        let dist = w.hamming_distance(c).expect("same length");
        if best.as_ref().is_none_or(|(_, d)| dist < *d) {
            best = Some((w.clone(), dist));
        }
    });
    Ok(best)
}
