//! Binary linear codes over GF(2): sampling with verified distance, encoding,
//! parity-constrained codeword sampling and distance-spectrum counting.

mod bits;
mod block;
mod entropy;
mod matrix;

use thiserror::Error;

pub use bits::{dot, BitString};
pub use block::{block_lengths, block_parameters, BlockCode, GeneratedCode};
pub use entropy::{binary_entropy, binomial, binomial_bound, codeword_count_bound, gamma, inv_binary_entropy};
pub use matrix::{
    count_codewords_at_distance, encode, generate_code, min_distance, nearest_codeword_with_parity,
    sample_codeword_with_parity, weight_distribution, CodeSpec, GeneratorMatrix, MAX_ENUM_DIM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible code parameters: {0}")]
    InvalidSpec(String),
    #[error("no ({}, {}, >={}) code found after {attempts} attempts; relax the parameters", spec.n, spec.k, spec.d_target)]
    GenerationFailed { spec: CodeSpec, attempts: usize },
    #[error("dimension k={k} exceeds the exhaustive-scan limit {max}")]
    UnsupportedScale { k: usize, max: usize },
    #[error("rows have rank {rank}, expected {k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("mask makes the parity functional vanish on the code")]
    DegenerateMask,
}
