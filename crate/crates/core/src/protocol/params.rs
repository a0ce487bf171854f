use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ProtocolError;

pub const DEFAULT_BLOCK_LEN: usize = 20;
pub const DEFAULT_TOLERANCE_Z: f64 = 4.0;

/// How Alice picks the preparation angle of each pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPolicy {
    Fixed(f64),
    /// Independent angle per pair, uniform on `[low, high]`.
    Uniform { low: f64, high: f64 },
}

impl Default for ThetaPolicy {
    fn default() -> Self {
        ThetaPolicy::Fixed(FRAC_PI_4)
    }
}

fn in_open_quarter_turn(t: f64) -> bool {
    t > 0.0 && t < FRAC_PI_2
}

impl ThetaPolicy {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        match *self {
            ThetaPolicy::Fixed(t) if in_open_quarter_turn(t) => Ok(()),
            ThetaPolicy::Uniform { low, high }
                if in_open_quarter_turn(low) && in_open_quarter_turn(high) && low <= high =>
            {
                Ok(())
            }
            other => Err(ProtocolError::InvalidParams(format!(
                "theta policy {other:?} must stay inside (0, pi/2)"
            ))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ThetaPolicy::Fixed(t) => t,
            ThetaPolicy::Uniform { low, high } if low == high => low,
            ThetaPolicy::Uniform { low, high } => rng.random_range(low..=high),
        }
    }

    pub fn fixed(&self) -> Option<f64> {
        match *self {
            ThetaPolicy::Fixed(t) => Some(t),
            ThetaPolicy::Uniform { low, high } if low == high => Some(low),
            ThetaPolicy::Uniform { .. } => None,
        }
    }

    /// Quadrature nodes (angle, weight) for averaging over the policy.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match (self.fixed(), *self) {
            (Some(t), _) => vec![(t, 1.0)],
            (None, ThetaPolicy::Uniform { low, high }) => {
                const N: usize = 64;
                let h = (high - low) / N as f64;
                (0..N).map(|i| (low + (i as f64 + 0.5) * h, 1.0 / N as f64)).collect()
            }
            (None, ThetaPolicy::Fixed(_)) => unreachable!("fixed policies always have an angle"),
        }
    }
}

/// Number of pairs Bob assigns to each lie type on his measured set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LieCounts {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

impl LieCounts {
    /// `|L_x| = round(f_x s - s'/4)`; fails when a count would be negative
    /// or the lies do not fit into the measured set.
    pub fn from_frequencies(s: usize, s_prime: usize, f: [f64; 3]) -> Result<Self, ProtocolError> {
        if s_prime > s {
            return Err(ProtocolError::InvalidParams(format!("s' = {s_prime} exceeds s = {s}")));
        }
        let shift = s_prime as f64 / 4.0;
        let mut counts = [0usize; 3];
        for (slot, (name, fx)) in counts.iter_mut().zip(["f_a", "f_b", "f_c"].into_iter().zip(f)) {
            let raw = (fx * s as f64 - shift).round();
            if raw < 0.0 {
                return Err(ProtocolError::InvalidParams(format!(
                    "{name} = {fx} gives a negative lie count at s = {s}, s' = {s_prime}"
                )));
            }
            *slot = raw as usize;
        }
        let out = LieCounts { a: counts[0], b: counts[1], c: counts[2] };
        if out.total() > s - s_prime {
            return Err(ProtocolError::InvalidParams(format!(
                "{} lies do not fit into {} measured pairs",
                out.total(),
                s - s_prime
            )));
        }
        Ok(out)
    }

    pub fn total(&self) -> usize {
        self.a + self.b + self.c
    }

    pub fn honest(&self, s: usize, s_prime: usize) -> usize {
        s - s_prime - self.total()
    }
}

/// Parameters both parties agree on before the commit phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub s: usize,
    #[serde(default)]
    pub theta_policy: ThetaPolicy,
    pub f_a: f64,
    pub f_b: f64,
    pub f_c: f64,
    #[serde(default)]
    pub s_prime: usize,
    pub ratio_k: f64,
    pub ratio_d: f64,
    #[serde(default = "default_block_len")]
    pub block_len: usize,
    #[serde(default = "default_tolerance_z")]
    pub tolerance_z: f64,
}

fn default_block_len() -> usize {
    DEFAULT_BLOCK_LEN
}

fn default_tolerance_z() -> f64 {
    DEFAULT_TOLERANCE_Z
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            s: 1000,
            theta_policy: ThetaPolicy::default(),
            f_a: 0.10,
            f_b: 0.15,
            f_c: 0.05,
            s_prime: 0,
            ratio_k: 0.6,
            ratio_d: 0.1,
            block_len: DEFAULT_BLOCK_LEN,
            tolerance_z: DEFAULT_TOLERANCE_Z,
        }
    }
}

impl ProtocolParams {
    pub fn frequencies(&self) -> [f64; 3] {
        [self.f_a, self.f_b, self.f_c]
    }

    /// Checks every constraint and returns the agreed lie counts.
    pub fn validate(&self) -> Result<LieCounts, ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::InvalidParams(msg));
        if self.s == 0 {
            return bad("s must be positive".into());
        }
        for (name, f) in [("f_a", self.f_a), ("f_b", self.f_b), ("f_c", self.f_c)] {
            if !(f > 0.0 && f < 0.25) {
                return bad(format!("{name} = {f} must lie in (0, 1/4)"));
            }
        }
        if self.f_b <= self.f_c {
            return bad(format!("f_b = {} must exceed f_c = {}", self.f_b, self.f_c));
        }
        if !(self.ratio_k > 0.5 && self.ratio_k <= 1.0) {
            return bad(format!("ratio_k = {} must lie in (1/2, 1]", self.ratio_k));
        }
        if !(0.0..1.0).contains(&self.ratio_d) {
            return bad(format!("ratio_d = {} must lie in [0, 1)", self.ratio_d));
        }
        if self.block_len == 0 || self.block_len > crate::lincode::MAX_ENUM_DIM {
            return bad(format!(
                "block_len = {} must lie in 1..={}",
                self.block_len,
                crate::lincode::MAX_ENUM_DIM
            ));
        }
        if !(self.tolerance_z > 0.0 && self.tolerance_z.is_finite()) {
            return bad(format!("tolerance_z = {} must be positive", self.tolerance_z));
        }
        self.theta_policy.validate()?;
        LieCounts::from_frequencies(self.s, self.s_prime, self.frequencies())
    }

    /// Frequencies including the delayed set's share: `(|L_x| + s'/4) / s`.
    pub fn effective_frequencies(&self, counts: &LieCounts) -> [f64; 3] {
        let shift = self.s_prime as f64 / 4.0;
        let s = self.s as f64;
        [counts.a, counts.b, counts.c].map(|n| (n as f64 + shift) / s)
    }

    /// Closed-form expected `(|M|, |D|, |M-D|) / s`.
    pub fn expected_ratios(&self, counts: &LieCounts) -> (f64, f64, f64) {
        let [fa, fb, fc] = self.effective_frequencies(counts);
        (
            0.25 + (fa + fc) / 2.0,
            fa / 2.0 + fb / 4.0 + fc / 4.0,
            (1.0 - fb + fc) / 4.0,
        )
    }
}
