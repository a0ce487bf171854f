use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::CodeError;

/// Fixed-length string of bits, packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; word_count(len)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut out = Self::zeros(len);
        for i in 0..len {
            out.set(i, 1);
        }
        out
    }

    /// Builds a bit string from 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Result<Self, CodeError> {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => out.set(i, 1),
                other => {
                    return Err(CodeError::InvalidArgument(format!(
                        "bit {i} has value {other}, expected 0 or 1"
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(len);
        for w in out.words.iter_mut() {
            *w = rng.random();
        }
        out.mask_tail();
        out
    }

    pub fn random_nonzero<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        assert!(len > 0, "no nonzero string of length 0");
        loop {
            let s = Self::random(len, rng);
            if !s.is_zero() {
                return s;
            }
        }
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        ((self.words[i / 64] >> (i % 64)) & 1) as u8
    }

    pub fn set(&mut self, i: usize, bit: u8) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit & 1 == 1 {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of set bits in ascending order.
    pub fn ones_positions(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i) == 1).collect()
    }

    fn check_len(&self, other: &Self) -> Result<(), CodeError> {
        if self.len != other.len {
            return Err(CodeError::InvalidArgument(format!(
                "length mismatch: {} vs {}",
                self.len, other.len
            )));
        }
        Ok(())
    }

    pub fn xor(&self, other: &Self) -> Result<Self, CodeError> {
        self.check_len(other)?;
        let mut out = self.clone();
        out.xor_assign_unchecked(other);
        Ok(out)
    }

    pub(crate) fn xor_assign_unchecked(&mut self, other: &Self) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= b;
        }
    }

    pub fn hamming_distance(&self, other: &Self) -> Result<usize, CodeError> {
        self.check_len(other)?;
        Ok(self
            .words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Copies `len` bits starting at `start`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        let mut out = Self::zeros(len);
        for i in 0..len {
            out.set(i, self.get(start + i));
        }
        out
    }

    /// Writes `src` into `self` starting at `start`.
    pub fn splice(&mut self, start: usize, src: &Self) {
        for i in 0..src.len {
            self.set(start + i, src.get(i));
        }
    }

    pub fn concat(parts: &[BitString]) -> Self {
        let total = parts.iter().map(|p| p.len).sum();
        let mut out = Self::zeros(total);
        let mut at = 0;
        for p in parts {
            out.splice(at, p);
            at += p.len;
        }
        out
    }
}

/// `c ⊙ r`: XOR over positions of `c_i AND r_i`.
pub fn dot(c: &BitString, r: &BitString) -> Result<u8, CodeError> {
    c.check_len(r)?;
    Ok(dot_unchecked(c, r))
}

pub(crate) fn dot_unchecked(c: &BitString, r: &BitString) -> u8 {
    let ones: u32 = c
        .words
        .iter()
        .zip(r.words.iter())
        .map(|(a, b)| (a & b).count_ones())
        .sum();
    (ones & 1) as u8
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = CodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(CodeError::InvalidArgument(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Self::from_bits(&bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dot_examples() {
        let b = |s: &str| s.parse::<BitString>().unwrap();
        assert_eq!(dot(&b("0000"), &b("1011")).unwrap(), 0);
        assert_eq!(dot(&b("1010"), &b("1110")).unwrap(), 0);
        assert_eq!(dot(&b("1111"), &b("1111")).unwrap(), 0);
        assert_eq!(dot(&b("1000"), &b("1110")).unwrap(), 1);
        assert!(dot(&b("101"), &b("1110")).is_err());
    }

    #[test]
    fn parse_and_display() {
        let s: BitString = "0110001".parse().unwrap();
        assert_eq!(s.to_string(), "0110001");
        assert_eq!(s.weight(), 3);
        assert!("01x".parse::<BitString>().is_err());
        assert!(BitString::from_bits(&[0, 2]).is_err());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "\"0110001\"");
    }

    proptest! {
        #[test]
        fn dot_matches_direct_evaluation(bits in proptest::collection::vec((0u8..2, 0u8..2), 1..150)) {
            let c = BitString::from_bits(&bits.iter().map(|p| p.0).collect::<Vec<_>>()).unwrap();
            let r = BitString::from_bits(&bits.iter().map(|p| p.1).collect::<Vec<_>>()).unwrap();
            let direct = bits.iter().fold(0u8, |acc, (a, b)| acc ^ (a & b));
            prop_assert_eq!(dot(&c, &r).unwrap(), direct);
        }

        #[test]
        fn xor_is_involutive(a in proptest::collection::vec(0u8..2, 1..130), seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = BitString::from_bits(&a).unwrap();
            let b = BitString::random(a.len(), &mut rng);
            prop_assert_eq!(a.xor(&b).unwrap().xor(&b).unwrap(), a.clone());
            prop_assert_eq!(a.hamming_distance(&b).unwrap(), a.xor(&b).unwrap().weight());
        }
    }
}
