use serde::{Deserialize, Serialize};

use crate::lincode::{dot, BitString};
use crate::protocol::{carrier_posterior, BobObservation, Commitment, ProtocolError};

/// Largest code length and dimension Bob enumerates.
pub const EXTRACT_MAX_N: usize = 20;
pub const EXTRACT_MAX_K: usize = 16;

/// Bob's knowledge before unveil, restricted to the carrier positions
/// (pairs outside D, ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct BobView {
    pub theta: f64,
    /// Bob's own data and announcement for each carrier position.
    pub observations: Vec<(BobObservation, (u8, u8))>,
    pub commitment: Commitment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractMethod {
    /// Exact per-pair posteriors combined over every codeword.
    #[default]
    ExactPosterior,
}

/// Guesses the committed bit: every codeword `c` implies `c0 = c ⊕ c'`,
/// weighted by the product of per-pair posteriors. Returns the guess and
/// the posterior probability of the guessed value.
pub fn bob_early_extract(view: &BobView) -> Result<(u8, f64), ProtocolError> {
    let n = view.commitment.n;
    let code = &view.commitment.code;
    if n > EXTRACT_MAX_N || code.k() > EXTRACT_MAX_K {
        return Err(ProtocolError::UnsupportedScale(format!(
            "early extraction enumerates codes with n <= {EXTRACT_MAX_N} and k <= {EXTRACT_MAX_K}, got n = {n}, k = {}",
            code.k()
        )));
    }
    if view.observations.len() != n {
        return Err(ProtocolError::InvalidParams(format!(
            "view covers {} positions, commitment has {n}",
            view.observations.len()
        )));
    }
    let post: Vec<f64> = view
        .observations
        .iter()
        .map(|&(obs, ann)| carrier_posterior(view.theta, obs, ann))
        .collect();
    let g = code.assembled()?;
    let c_prime = &view.commitment.c_prime;
    let r = &view.commitment.r;
    let mut weight = [0.0f64; 2];
    let mut failure: Option<ProtocolError> = None;
    g.for_each_codeword(|c| {
        let c0 = match c.xor(c_prime) {
            Ok(x) => x,
            Err(e) => {
                failure.get_or_insert(e.into());
                return;
            }
        };
        let w: f64 = post
            .iter()
            .enumerate()
            .map(|(j, &p1)| if c0.get(j) == 1 { p1 } else { 1.0 - p1 })
            .product();
        let parity = dot(c, r).expect("lengths match") as usize;
        weight[parity] += w;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let total = weight[0] + weight[1];
    if total <= 0.0 {
        return Ok((0, 0.5));
    }
    let guess = u8::from(weight[1] > weight[0]);
    Ok((guess, weight[guess as usize] / total))
}

/// Posterior-weighted bit guess for an explicit list of posteriors; exposed
/// for small exhaustive checks.
pub fn posterior_over_codewords(
    codewords: &[BitString],
    c_prime: &BitString,
    r: &BitString,
    post: &[f64],
) -> [f64; 2] {
    let mut weight = [0.0; 2];
    for c in codewords {
        let c0 = c.xor(c_prime).expect("same length");
        let w: f64 = post
            .iter()
            .enumerate()
            .map(|(j, &p1)| if c0.get(j) == 1 { p1 } else { 1.0 - p1 })
            .product();
        weight[dot(c, r).expect("same length") as usize] += w;
    }
    weight
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincode::{BlockCode, GeneratorMatrix};

    fn view_for(code: BlockCode, r: &str, c_prime: &str, obs: Vec<(BobObservation, (u8, u8))>) -> BobView {
        let n = code.n();
        BobView {
            theta: std::f64::consts::FRAC_PI_4,
            observations: obs,
            commitment: Commitment { code, r: r.parse().unwrap(), c_prime: c_prime.parse().unwrap(), n },
        }
    }

    #[test]
    fn identity_code_leaks_through_certain_positions() {
        // a lie-b announcement outside D is certainly a zero in c0, so c = c'
        // there; with r supported on that position the bit is exposed
        let code = BlockCode::single(GeneratorMatrix::identity(2).unwrap());
        let lie_b = (BobObservation::Measured { basis: 0, outcome: 0 }, (1, 0));
        let view = view_for(code, "10", "10", vec![lie_b, lie_b]);
        let (guess, post) = bob_early_extract(&view).unwrap();
        assert_eq!(guess, 1);
        assert!((post - 1.0).abs() < 1e-12);
    }

    #[test]
    fn repetition_code_with_symmetric_posteriors_is_blind() {
        let code = BlockCode::single(GeneratorMatrix::from_rows(vec!["11".parse().unwrap()]).unwrap());
        let s_prime = (BobObservation::Delayed, (0, 1));
        let view = view_for(code, "10", "00", vec![s_prime, s_prime]);
        let (_, post) = bob_early_extract(&view).unwrap();
        // c0 in {00, 11}: weights (2/3)^2 and (1/3)^2 decide c
        assert!((post - 0.8).abs() < 1e-12);
    }

    #[test]
    fn scale_limit() {
        let code = BlockCode::single(GeneratorMatrix::identity(17).unwrap());
        let view = view_for(code, &"1".repeat(17), &"0".repeat(17), vec![(BobObservation::Delayed, (0, 0)); 17]);
        assert!(matches!(bob_early_extract(&view), Err(ProtocolError::UnsupportedScale(_))));
    }
}
