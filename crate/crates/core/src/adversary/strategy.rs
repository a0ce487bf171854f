use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::protocol::{CheckId, Party, Preparation, ProtocolError};

/// How many carrier bits a faking Alice moves, and how she picks them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipPlan {
    /// Move `m` random carrier ones into U. The unveiled codeword is not
    /// checked against the code, so U5 is left out of the success test.
    Count(usize),
    /// `Count(ceil(d/2))` with `d = max(1, round(ratio * n))`.
    DistanceRatio(f64),
    /// Unveil the nearest codeword of opposite parity, moving bits in both
    /// directions. Needs the assembled code to be enumerable.
    NearestCodeword,
}

/// State Alice puts into a register she pretends was never measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FakePolicy {
    SendX,
    /// Maximize the worst-case pass probability over the expected states
    /// Bob can hold given everything Alice knows.
    SendBestGuess,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amount {
    Count(usize),
    FractionOfS(f64),
}

impl Amount {
    pub fn resolve(&self, s: usize) -> usize {
        match *self {
            Amount::Count(n) => n,
            Amount::FractionOfS(f) => (f * s as f64).round().max(0.0) as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreparationVariant {
    Conforming,
    AllProduct,
    VariantB,
    VariantC,
}

impl PreparationVariant {
    pub fn preparation(self) -> Preparation {
        match self {
            PreparationVariant::Conforming => Preparation::Conforming,
            PreparationVariant::AllProduct => Preparation::Product,
            PreparationVariant::VariantB => Preparation::SameBasis,
            PreparationVariant::VariantC => Preparation::CrossValue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AliceStrategy {
    #[default]
    Honest,
    FakeUnmeasured { flips: FlipPlan, policy: FakePolicy },
    OverMeasure { extra: Amount },
    WrongPreparation { variant: PreparationVariant },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BobStrategy {
    #[default]
    Honest,
    /// Guess the committed bit from the commitment before unveil.
    EarlyExtract,
    /// Lie with frequencies other than the agreed ones.
    FrequencyCheat { f_a: f64, f_b: f64, f_c: f64 },
}

impl AliceStrategy {
    pub fn is_honest(&self) -> bool {
        matches!(
            self,
            AliceStrategy::Honest
                | AliceStrategy::WrongPreparation { variant: PreparationVariant::Conforming }
        )
    }

    pub fn preparation(&self) -> Preparation {
        match self {
            AliceStrategy::WrongPreparation { variant } => variant.preparation(),
            _ => Preparation::Conforming,
        }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match *self {
            AliceStrategy::FakeUnmeasured { flips: FlipPlan::DistanceRatio(r), .. } if !(r > 0.0 && r < 1.0) => {
                Err(ProtocolError::InvalidStrategy(format!("distance ratio {r} must lie in (0, 1)")))
            }
            AliceStrategy::OverMeasure { extra: Amount::FractionOfS(f) } if !(0.0..=1.0).contains(&f) => {
                Err(ProtocolError::InvalidStrategy(format!("extra fraction {f} must lie in [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

impl BobStrategy {
    pub fn is_honest(&self) -> bool {
        matches!(self, BobStrategy::Honest | BobStrategy::EarlyExtract)
    }
}

/// Result of one attempted cheat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheatOutcome {
    pub party: Party,
    pub attempted: bool,
    /// First check that exposed the cheat.
    pub caught_at: Option<CheckId>,
    pub unveiled_bit_accepted: Option<u8>,
    pub flips_down: usize,
    pub flips_up: usize,
    /// True when the unveiled string was never required to be a codeword.
    pub abstract_code: bool,
}

impl CheatOutcome {
    pub fn succeeded(&self) -> bool {
        self.attempted && self.caught_at.is_none()
    }
}

fn parse_err(s: &str, what: &str) -> ProtocolError {
    ProtocolError::InvalidStrategy(format!("cannot parse {what} strategy {s:?}"))
}

impl FromStr for AliceStrategy {
    type Err = ProtocolError;

    /// `honest`, `fake-unmeasured:<m>[:best-guess]`,
    /// `fake-unmeasured:ratio=<r>[:best-guess]`, `fake-unmeasured:nearest[:best-guess]`,
    /// `over-measure:<n>` or `over-measure:<f>s`, `wrong-preparation:<variant>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || parse_err(s, "alice");
        let mut parts = s.split(':');
        let kind = parts.next().unwrap_or_default();
        let out = match kind {
            "honest" => AliceStrategy::Honest,
            "fake-unmeasured" => {
                let arg = parts.next().ok_or_else(err)?;
                let flips = if arg == "nearest" {
                    FlipPlan::NearestCodeword
                } else if let Some(r) = arg.strip_prefix("ratio=") {
                    FlipPlan::DistanceRatio(r.parse().map_err(|_| err())?)
                } else {
                    FlipPlan::Count(arg.parse().map_err(|_| err())?)
                };
                let policy = match parts.next() {
                    None | Some("send-x") => FakePolicy::SendX,
                    Some("best-guess") | Some("send-best-guess") => FakePolicy::SendBestGuess,
                    Some(_) => return Err(err()),
                };
                AliceStrategy::FakeUnmeasured { flips, policy }
            }
            "over-measure" => {
                let arg = parts.next().ok_or_else(err)?;
                let extra = match arg.strip_suffix('s') {
                    Some(f) => Amount::FractionOfS(f.parse().map_err(|_| err())?),
                    None => Amount::Count(arg.parse().map_err(|_| err())?),
                };
                AliceStrategy::OverMeasure { extra }
            }
            "wrong-preparation" => {
                let variant = match parts.next().ok_or_else(err)? {
                    "conforming" => PreparationVariant::Conforming,
                    "all-product" => PreparationVariant::AllProduct,
                    "variant-b" | "b" => PreparationVariant::VariantB,
                    "variant-c" | "c" => PreparationVariant::VariantC,
                    _ => return Err(err()),
                };
                AliceStrategy::WrongPreparation { variant }
            }
            _ => return Err(err()),
        };
        if parts.next().is_some() {
            return Err(err());
        }
        out.validate()?;
        Ok(out)
    }
}

impl FromStr for BobStrategy {
    type Err = ProtocolError;

    /// `honest`, `early-extract`, `frequency-cheat:<f_a>,<f_b>,<f_c>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || parse_err(s, "bob");
        match s.split_once(':') {
            None if s == "honest" => Ok(BobStrategy::Honest),
            None if s == "early-extract" => Ok(BobStrategy::EarlyExtract),
            Some(("frequency-cheat", f)) => {
                let v = f
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| err()))
                    .collect::<Result<Vec<_>, _>>()?;
                match v[..] {
                    [f_a, f_b, f_c] => Ok(BobStrategy::FrequencyCheat { f_a, f_b, f_c }),
                    _ => Err(err()),
                }
            }
            _ => Err(err()),
        }
    }
}

impl fmt::Display for AliceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let policy = |p: &FakePolicy| match p {
            FakePolicy::SendX => "",
            FakePolicy::SendBestGuess => ":best-guess",
        };
        match self {
            AliceStrategy::Honest => write!(f, "honest"),
            AliceStrategy::FakeUnmeasured { flips, policy: p } => match flips {
                FlipPlan::Count(m) => write!(f, "fake-unmeasured:{m}{}", policy(p)),
                FlipPlan::DistanceRatio(r) => write!(f, "fake-unmeasured:ratio={r}{}", policy(p)),
                FlipPlan::NearestCodeword => write!(f, "fake-unmeasured:nearest{}", policy(p)),
            },
            AliceStrategy::OverMeasure { extra: Amount::Count(n) } => write!(f, "over-measure:{n}"),
            AliceStrategy::OverMeasure { extra: Amount::FractionOfS(x) } => write!(f, "over-measure:{x}s"),
            AliceStrategy::WrongPreparation { variant } => {
                let v = match variant {
                    PreparationVariant::Conforming => "conforming",
                    PreparationVariant::AllProduct => "all-product",
                    PreparationVariant::VariantB => "variant-b",
                    PreparationVariant::VariantC => "variant-c",
                };
                write!(f, "wrong-preparation:{v}")
            }
        }
    }
}

impl fmt::Display for BobStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BobStrategy::Honest => write!(f, "honest"),
            BobStrategy::EarlyExtract => write!(f, "early-extract"),
            BobStrategy::FrequencyCheat { f_a, f_b, f_c } => write!(f, "frequency-cheat:{f_a},{f_b},{f_c}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        for s in [
            "honest",
            "fake-unmeasured:3",
            "fake-unmeasured:ratio=0.01:best-guess",
            "fake-unmeasured:nearest",
            "over-measure:200",
            "over-measure:0.2s",
            "wrong-preparation:variant-b",
            "wrong-preparation:all-product",
        ] {
            let a: AliceStrategy = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        for s in ["honest", "early-extract", "frequency-cheat:0.2,0.2,0.05"] {
            let b: BobStrategy = s.parse().unwrap();
            assert_eq!(b.to_string(), s);
        }
        assert!("fake-unmeasured".parse::<AliceStrategy>().is_err());
        assert!("fake-unmeasured:ratio=1.5".parse::<AliceStrategy>().is_err());
        assert!("over-measure:3:4".parse::<AliceStrategy>().is_err());
        assert!("frequency-cheat:0.1".parse::<BobStrategy>().is_err());
    }

    #[test]
    fn json_shape() {
        let a = AliceStrategy::FakeUnmeasured { flips: FlipPlan::Count(2), policy: FakePolicy::SendX };
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, r#"{"kind":"fake-unmeasured","flips":{"count":2},"policy":"send-x"}"#);
        assert_eq!(serde_json::from_str::<AliceStrategy>(&json).unwrap(), a);
        assert_eq!(Amount::FractionOfS(0.2).resolve(1000), 200);
    }
}
