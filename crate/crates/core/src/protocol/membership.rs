//! Exact per-pair probabilities of landing in M and D, obtained by
//! enumerating Alice's value, Bob's basis and both measurement outcomes.

use serde::{Deserialize, Serialize};

use super::params::{LieCounts, ProtocolParams, ThetaPolicy};
use super::types::Lie;
use crate::qstate::{conditional_alpha, ket_x, ket_y, photon_outcome_prob, prepare_pair, PairState, QubitState};

/// Probabilities that one pair ends up in M and in D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub m: f64,
    pub d: f64,
}

impl Membership {
    pub fn m_minus_d(&self) -> f64 {
        self.m - self.d
    }
}

fn alice_ket(p: u8) -> QubitState {
    if p == 0 {
        ket_x()
    } else {
        ket_y()
    }
}

fn pair(theta: f64, q: u8) -> PairState {
    prepare_pair(theta, q).expect("theta validated by the caller")
}

/// Membership probabilities for a pair with the given lie rule at angle `theta`.
pub fn membership(theta: f64, lie: Lie) -> Membership {
    let mut m = 0.0;
    let mut d = 0.0;
    for q in 0..2u8 {
        let psi = pair(theta, q);
        if lie == Lie::RandomSPrime {
            for (p2, q2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                if q2 != q {
                    let w = 0.5 * 0.25;
                    m += w;
                    d += w * psi.alpha_marginal(p2);
                }
            }
            continue;
        }
        for p1 in 0..2u8 {
            for q1 in 0..2u8 {
                let w = 0.25 * photon_outcome_prob(&psi, p1, q1);
                let (p2, q2) = lie.apply(p1, q1);
                if q2 == q || w == 0.0 {
                    continue;
                }
                let alpha = conditional_alpha(&psi, p1, q1).expect("outcome has positive weight");
                m += w;
                d += w * alice_ket(p2).fidelity(&alpha);
            }
        }
    }
    Membership { m, d }
}

/// Membership averaged over a theta policy.
pub fn membership_for_policy(policy: &ThetaPolicy, lie: Lie) -> Membership {
    let mut acc = Membership { m: 0.0, d: 0.0 };
    for (theta, w) in policy.nodes() {
        let x = membership(theta, lie);
        acc.m += w * x.m;
        acc.d += w * x.d;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
}

impl Moments {
    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }

    /// `|x - mean| <= z sigma`, with a small absolute slack for degenerate variance.
    pub fn contains(&self, x: f64, z: f64) -> bool {
        (x - self.mean).abs() <= z * self.std() + 1e-9
    }
}

/// Expected sizes of M, D and M-D for a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetExpectations {
    pub m: Moments,
    pub d: Moments,
    pub m_minus_d: Moments,
}

/// Sums the independent per-pair indicators over all pairs of a run with
/// the given lie counts.
pub fn set_expectations(params: &ProtocolParams, counts: &LieCounts) -> SetExpectations {
    let groups = [
        (counts.honest(params.s, params.s_prime), Lie::Honest),
        (counts.a, Lie::A),
        (counts.b, Lie::B),
        (counts.c, Lie::C),
        (params.s_prime, Lie::RandomSPrime),
    ];
    let mut out = SetExpectations {
        m: Moments { mean: 0.0, var: 0.0 },
        d: Moments { mean: 0.0, var: 0.0 },
        m_minus_d: Moments { mean: 0.0, var: 0.0 },
    };
    for (n, lie) in groups {
        let p = membership_for_policy(&params.theta_policy, lie);
        let n = n as f64;
        for (mom, prob) in [(&mut out.m, p.m), (&mut out.d, p.d), (&mut out.m_minus_d, p.m_minus_d())] {
            mom.mean += n * prob;
            mom.var += n * prob * (1.0 - prob);
        }
    }
    out
}

/// What Bob knows about one pair before unveil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BobObservation {
    Measured { basis: u8, outcome: u8 },
    Delayed,
}

/// Probability that `c0_i = 1` for a pair outside D, given Bob's own data and
/// his announcement.
pub fn carrier_posterior(theta: f64, obs: BobObservation, announced: (u8, u8)) -> f64 {
    let (p2, q2) = announced;
    let mut w0 = 0.0;
    let mut w1 = 0.0;
    for q in 0..2u8 {
        let psi = pair(theta, q);
        match obs {
            BobObservation::Measured { basis, outcome } => {
                let w = 0.5 * photon_outcome_prob(&psi, basis, outcome);
                if w == 0.0 {
                    continue;
                }
                if q2 == q {
                    w0 += w;
                } else {
                    let alpha = conditional_alpha(&psi, basis, outcome).expect("positive weight");
                    w1 += w * (1.0 - alice_ket(p2).fidelity(&alpha));
                }
            }
            BobObservation::Delayed => {
                if q2 == q {
                    w0 += 0.5;
                } else {
                    w1 += 0.5 * (1.0 - psi.alpha_marginal(p2));
                }
            }
        }
    }
    let total = w0 + w1;
    if total <= 0.0 {
        0.0
    } else {
        w1 / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn table_at_quarter_pi() {
        let cases = [
            (Lie::RandomSPrime, 0.5, 0.25),
            (Lie::Honest, 0.25, 0.0),
            (Lie::A, 0.75, 0.5),
            (Lie::B, 0.25, 0.25),
            (Lie::C, 0.75, 0.25),
        ];
        for (lie, m, d) in cases {
            let got = membership(FRAC_PI_4, lie);
            assert!(close(got.m, m) && close(got.d, d), "{lie:?}: {got:?}");
        }
    }

    #[test]
    fn averages_do_not_depend_on_theta() {
        for theta in [0.2, 0.6, 1.1, 1.4] {
            for lie in [Lie::Honest, Lie::A, Lie::B, Lie::C, Lie::RandomSPrime] {
                let a = membership(theta, lie);
                let b = membership(FRAC_PI_4, lie);
                assert!(close(a.m, b.m) && close(a.d, b.d), "{lie:?} at {theta}");
            }
        }
    }

    #[test]
    fn expectations_match_closed_forms() {
        for s_prime in [0, 200, 500] {
            let params = ProtocolParams { s: 1000, s_prime, f_a: 0.15, f_b: 0.2, f_c: 0.15, ..Default::default() };
            let Ok(counts) = params.validate() else { continue };
            let e = set_expectations(&params, &counts);
            let (m, d, md) = params.expected_ratios(&counts);
            assert!((e.m.mean / 1000.0 - m).abs() < 1e-12);
            assert!((e.d.mean / 1000.0 - d).abs() < 1e-12);
            assert!((e.m_minus_d.mean / 1000.0 - md).abs() < 1e-12);
        }
    }

    #[test]
    fn posteriors() {
        // a lie-b pair outside D can never carry a one
        let post = carrier_posterior(FRAC_PI_4, BobObservation::Measured { basis: 0, outcome: 0 }, (1, 0));
        assert!(close(post, 0.0));
        let post = carrier_posterior(FRAC_PI_4, BobObservation::Delayed, (0, 1));
        assert!(close(post, 1.0 / 3.0));
        // an honest announcement: U with weight 3/4, M-D with weight 1/4
        let post = carrier_posterior(FRAC_PI_4, BobObservation::Measured { basis: 0, outcome: 0 }, (0, 0));
        assert!(close(post, 0.25));
    }
}
