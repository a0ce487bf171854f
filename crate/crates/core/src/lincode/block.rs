use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bits::{dot_unchecked, BitString};
use super::matrix::{generate_code, sample_message_with_parity, CodeSpec, GeneratorMatrix, MAX_ENUM_DIM};
use super::CodeError;

const BLOCK_ATTEMPTS: usize = 400;

/// Direct sum of independently verified generator blocks.
///
/// Codes longer than the exhaustive-scan limit are assembled from blocks of
/// at most `block_len` columns. The minimum distance of a direct sum is the
/// minimum over its blocks, each of which is verified exhaustively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCode {
    blocks: Vec<GeneratorMatrix>,
}

/// Outcome of [`BlockCode::generate`].
#[derive(Debug, Clone)]
pub struct GeneratedCode {
    pub code: BlockCode,
    /// Distance targets that had to be lowered because random search failed.
    pub relaxed_blocks: usize,
}

/// Block lengths for splitting `n` into near-equal parts no longer than `block_len`.
pub fn block_lengths(n: usize, block_len: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let count = n.div_ceil(block_len.max(1));
    let base = n / count;
    let extra = n % count;
    (0..count).map(|i| base + usize::from(i < extra)).collect()
}

/// `(k, d)` for one block at the agreed ratios.
pub fn block_parameters(n_b: usize, ratio_k: f64, ratio_d: f64) -> (usize, usize) {
    let k = ((ratio_k * n_b as f64) - 1e-9).ceil().clamp(1.0, n_b as f64) as usize;
    let d = ((ratio_d * n_b as f64) - 1e-9).ceil().max(1.0) as usize;
    (k, d.min(n_b - k + 1))
}

impl BlockCode {
    pub fn new(blocks: Vec<GeneratorMatrix>) -> Result<Self, CodeError> {
        if blocks.is_empty() {
            return Err(CodeError::InvalidArgument("block code needs at least one block".into()));
        }
        Ok(Self { blocks })
    }

    pub fn single(g: GeneratorMatrix) -> Self {
        Self { blocks: vec![g] }
    }

    /// Samples a length-`n` code at the given ratios.
    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        ratio_k: f64,
        ratio_d: f64,
        block_len: usize,
        rng: &mut R,
    ) -> Result<GeneratedCode, CodeError> {
        if n == 0 {
            return Err(CodeError::InvalidArgument("cannot build a code of length 0".into()));
        }
        if block_len == 0 || block_len > MAX_ENUM_DIM {
            return Err(CodeError::InvalidArgument(format!(
                "block length must be in 1..={MAX_ENUM_DIM}, got {block_len}"
            )));
        }
        let mut blocks = Vec::new();
        let mut relaxed_blocks = 0;
        for n_b in block_lengths(n, block_len) {
            let (k_b, mut d_b) = block_parameters(n_b, ratio_k, ratio_d);
            if k_b == n_b {
                blocks.push(GeneratorMatrix::identity(n_b)?);
                continue;
            }
            let g = loop {
                let spec = CodeSpec::new(n_b, k_b, d_b)?;
                match generate_code(&spec, rng, BLOCK_ATTEMPTS) {
                    Ok(g) => break g,
                    Err(CodeError::GenerationFailed { .. }) if d_b > 1 => {
                        d_b -= 1;
                        relaxed_blocks += 1;
                    }
                    Err(e) => return Err(e),
                }
            };
            blocks.push(g);
        }
        Ok(GeneratedCode { code: Self { blocks }, relaxed_blocks })
    }

    pub fn blocks(&self) -> &[GeneratorMatrix] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.blocks.iter().map(|b| b.n()).sum()
    }

    pub fn k(&self) -> usize {
        self.blocks.iter().map(|b| b.k()).sum()
    }

    pub fn min_distance(&self) -> usize {
        self.blocks.iter().map(|b| b.verified_min_distance()).min().expect("nonempty")
    }

    fn check_len(&self, c: &BitString) -> Result<(), CodeError> {
        if c.len() != self.n() {
            return Err(CodeError::InvalidArgument(format!(
                "expected length {}, got {}",
                self.n(),
                c.len()
            )));
        }
        Ok(())
    }

    /// Column and row offsets of each block.
    fn layout(&self) -> impl Iterator<Item = (&GeneratorMatrix, usize, usize)> {
        let mut col = 0;
        let mut row = 0;
        self.blocks.iter().map(move |b| {
            let out = (b, col, row);
            col += b.n();
            row += b.k();
            out
        })
    }

    pub fn encode(&self, message: &BitString) -> Result<BitString, CodeError> {
        if message.len() != self.k() {
            return Err(CodeError::InvalidArgument(format!(
                "message length {} does not match k = {}",
                message.len(),
                self.k()
            )));
        }
        let mut out = BitString::zeros(self.n());
        for (b, col, row) in self.layout() {
            let part = super::matrix::encode(b, &message.slice(row, b.k()))?;
            out.splice(col, &part);
        }
        Ok(out)
    }

    pub fn is_codeword(&self, c: &BitString) -> Result<bool, CodeError> {
        self.check_len(c)?;
        for (b, col, _) in self.layout() {
            if !b.is_codeword(&c.slice(col, b.n()))? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn parity_functional(&self, r: &BitString) -> Result<BitString, CodeError> {
        self.check_len(r)?;
        let parts = self
            .layout()
            .map(|(b, col, _)| b.parity_functional(&r.slice(col, b.n())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BitString::concat(&parts))
    }

    /// True when `c ↦ c ⊙ r` vanishes on the whole code.
    pub fn mask_is_degenerate(&self, r: &BitString) -> Result<bool, CodeError> {
        Ok(self.parity_functional(r)?.is_zero())
    }

    /// Uniform codeword with `c ⊙ r = b`.
    pub fn sample_with_parity<R: Rng + ?Sized>(
        &self,
        r: &BitString,
        b: u8,
        rng: &mut R,
    ) -> Result<BitString, CodeError> {
        let functional = self.parity_functional(r)?;
        let m = sample_message_with_parity(&functional, b & 1, rng)?;
        self.encode(&m)
    }

    /// The assembled `k × n` generator, re-verified exhaustively (k <= 24).
    pub fn assembled(&self) -> Result<GeneratorMatrix, CodeError> {
        if self.blocks.len() == 1 {
            return Ok(self.blocks[0].clone());
        }
        let n = self.n();
        let mut rows = Vec::with_capacity(self.k());
        for (b, col, _) in self.layout() {
            for r in b.rows() {
                let mut full = BitString::zeros(n);
                full.splice(col, r);
                rows.push(full);
            }
        }
        GeneratorMatrix::from_rows(rows)
    }

    pub fn parity(&self, c: &BitString, r: &BitString) -> Result<u8, CodeError> {
        self.check_len(c)?;
        self.check_len(r)?;
        Ok(dot_unchecked(c, r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lengths_split_evenly() {
        assert_eq!(block_lengths(22, 20), vec![11, 11]);
        assert_eq!(block_lengths(20, 20), vec![20]);
        assert_eq!(block_lengths(41, 20), vec![14, 14, 13]);
        assert!(block_lengths(0, 20).is_empty());
        assert_eq!(block_lengths(1800, 20).len(), 90);
    }

    #[test]
    fn parameters_respect_ratios() {
        assert_eq!(block_parameters(20, 0.6, 0.1), (12, 2));
        assert_eq!(block_parameters(10, 0.6, 0.1), (6, 1));
        assert_eq!(block_parameters(19, 0.6, 0.1), (12, 2));
        assert_eq!(block_parameters(16, 1.0, 0.0), (16, 1));
        let (k, d) = block_parameters(5, 0.9, 0.9);
        assert!(d <= 5 - k + 1);
    }

    #[test]
    fn large_block_code_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gen = BlockCode::generate(900, 0.6, 0.1, 20, &mut rng).unwrap();
        let code = gen.code;
        assert_eq!(code.n(), 900);
        assert!(2 * code.k() > code.n());
        assert!(code.min_distance() >= 1);
        let r = BitString::random_nonzero(900, &mut rng);
        for b in 0..2 {
            let c = code.sample_with_parity(&r, b, &mut rng).unwrap();
            assert!(code.is_codeword(&c).unwrap());
            assert_eq!(code.parity(&c, &r).unwrap(), b);
            let mut bad = c.clone();
            bad.flip(417);
            assert!(!code.is_codeword(&bad).unwrap());
        }
    }

    #[test]
    fn assembled_distance_is_block_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let code = BlockCode::generate(22, 0.6, 0.2, 20, &mut rng).unwrap().code;
        assert_eq!(code.blocks().len(), 2);
        let g = code.assembled().unwrap();
        assert_eq!(g.verified_min_distance(), code.min_distance());
        let json = serde_json::to_string(&code).unwrap();
        let back: BlockCode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, code);
    }

    #[test]
    fn identity_blocks_for_full_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let code = BlockCode::generate(16, 1.0, 0.0, 20, &mut rng).unwrap().code;
        assert_eq!(code.k(), 16);
        assert_eq!(code.min_distance(), 1);
    }
}
