use std::collections::BTreeSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::env::{Party, RegisterEnvironment, Subsystem};
use super::membership::{set_expectations, BobObservation};
use super::params::{LieCounts, ProtocolParams};
use super::transcript::{Actor, Transcript};
use super::types::*;
use super::ProtocolError;
use crate::adversary::{
    best_guess_state, AliceStrategy, BobStrategy, BobView, CheatOutcome, FakePolicy, FlipPlan,
};
use crate::lincode::{dot, nearest_codeword_with_parity, BitString, BlockCode, CodeError, MAX_ENUM_DIM};
use crate::qstate::{conditional_alpha, ket_x, pol_ket, prepare_general, prepare_pair, QubitState};

const MASK_RETRIES: usize = 64;

/// Which bit an honest Alice commits to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitChoice {
    #[default]
    Random,
    Zero,
    One,
}

impl BitChoice {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> u8 {
        match self {
            BitChoice::Random => rng.random::<bool>() as u8,
            BitChoice::Zero => 0,
            BitChoice::One => 1,
        }
    }
}

/// Everything needed to execute one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub params: ProtocolParams,
    #[serde(default)]
    pub alice: AliceStrategy,
    #[serde(default)]
    pub bob: BobStrategy,
    #[serde(default)]
    pub bit: BitChoice,
}

impl TrialSpec {
    pub fn honest(params: ProtocolParams) -> Self {
        Self { params, alice: AliceStrategy::Honest, bob: BobStrategy::Honest, bit: BitChoice::Random }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SetSizes {
    pub m: usize,
    pub d: usize,
    pub m_minus_d: usize,
    /// Registers Alice measured before unveil.
    pub measured: usize,
}

/// Properties that hold exactly in every honest run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub d_soundness: bool,
    pub lie_b_annihilation: bool,
    pub c5_empty: bool,
    /// Absent when the run stopped before encoding.
    pub u5_parity: Option<bool>,
    pub locality: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSummary {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub relaxed_blocks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuessOutcome {
    pub guess: u8,
    pub posterior: f64,
    pub correct: bool,
}

/// Bob's view of the unveil phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnveilReport {
    pub verdict: Verdict,
    pub pair_tests: Vec<PairTest>,
}

/// Result of [`run_protocol`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub s: usize,
    pub sizes: SetSizes,
    pub commit_accepted: bool,
    pub unveil_accepted: Option<bool>,
    pub rejected_at: Option<CheckId>,
    pub commit_verdict: Verdict,
    pub unveil: Option<UnveilReport>,
    pub invariants: InvariantReport,
    pub cheat: Option<CheatOutcome>,
    pub guess: Option<GuessOutcome>,
    pub bit: Option<u8>,
    pub code: Option<CodeSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Stage {
    New,
    Prepared,
    Measured,
    Announced,
    Detected,
    Encoded,
}

struct CommitState {
    commitment: Commitment,
    carrier: Vec<usize>,
    c0: BitString,
    c: BitString,
    b: u8,
    relaxed_blocks: usize,
}

/// One protocol execution between simulated parties. The step methods must
/// be called in protocol order; each acts for exactly one party and only
/// touches registers that party holds.
pub struct Session {
    params: ProtocolParams,
    agreed: LieCounts,
    actual: LieCounts,
    alice_strategy: AliceStrategy,
    bob_strategy: BobStrategy,
    env: RegisterEnvironment,
    records: Vec<PairRecord>,
    d: Vec<usize>,
    c5_hits: usize,
    commit: Option<CommitState>,
    faked: BTreeSet<usize>,
    relabelled: BTreeSet<usize>,
    transcript: Option<Transcript>,
    stage: Stage,
}

fn bit(rng: &mut (impl Rng + ?Sized)) -> u8 {
    rng.random::<bool>() as u8
}

fn diagonal_alpha() -> QubitState {
    QubitState::from_real(1.0, 1.0).expect("nonzero")
}

impl Session {
    pub fn new(spec: &TrialSpec, record_transcript: bool) -> Result<Self, ProtocolError> {
        let agreed = spec.params.validate()?;
        spec.alice.validate()?;
        if spec.bob == BobStrategy::EarlyExtract && spec.params.theta_policy.fixed().is_none() {
            return Err(ProtocolError::InvalidStrategy("early extraction needs a fixed preparation angle".into()));
        }
        let actual = match spec.bob {
            BobStrategy::FrequencyCheat { f_a, f_b, f_c } => {
                LieCounts::from_frequencies(spec.params.s, spec.params.s_prime, [f_a, f_b, f_c])?
            }
            _ => agreed,
        };
        let mut transcript = record_transcript.then(Transcript::new);
        if let Some(t) = transcript.as_mut() {
            t.push(Actor::Harness, "config", serde_json::to_value(spec).expect("spec serializes"));
        }
        Ok(Self {
            params: spec.params.clone(),
            agreed,
            actual,
            alice_strategy: spec.alice,
            bob_strategy: spec.bob,
            env: RegisterEnvironment::new(),
            records: Vec::with_capacity(spec.params.s),
            d: Vec::new(),
            c5_hits: 0,
            commit: None,
            faked: BTreeSet::new(),
            relabelled: BTreeSet::new(),
            transcript,
            stage: Stage::New,
        })
    }

    fn advance(&mut self, from: Stage, to: Stage, what: &'static str) -> Result<(), ProtocolError> {
        if self.stage != from {
            return Err(ProtocolError::OutOfOrder(what));
        }
        self.stage = to;
        Ok(())
    }

    fn log(&mut self, actor: Actor, kind: &str, payload: impl FnOnce() -> serde_json::Value) {
        if let Some(t) = self.transcript.as_mut() {
            t.push(actor, kind, payload());
        }
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    pub fn env(&self) -> &RegisterEnvironment {
        &self.env
    }

    pub fn d(&self) -> &[usize] {
        &self.d
    }

    pub fn bob_strategy(&self) -> BobStrategy {
        self.bob_strategy
    }

    pub fn agreed_counts(&self) -> LieCounts {
        self.agreed
    }

    pub fn transcript(&self) -> Option<&Transcript> {
        self.transcript.as_ref()
    }

    pub fn take_transcript(&mut self) -> Option<Transcript> {
        self.transcript.take()
    }

    pub fn commitment(&self) -> Option<&Commitment> {
        self.commit.as_ref().map(|c| &c.commitment)
    }

    /// Alice's committed carrier string and codeword, once encoded.
    pub fn committed_strings(&self) -> Option<(&BitString, &BitString, u8)> {
        self.commit.as_ref().map(|c| (&c.c0, &c.c, c.b))
    }

    /// Step C1: prepare every pair and send the photons.
    pub fn alice_commit_prepare<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), ProtocolError> {
        self.advance(Stage::New, Stage::Prepared, "prepare twice")?;
        let prep = self.alice_strategy.preparation();
        for i in 0..self.params.s {
            let q = bit(rng);
            let theta = self.params.theta_policy.sample(rng);
            let state = match prep {
                Preparation::Conforming | Preparation::Product => prepare_pair(theta, q)?,
                Preparation::SameBasis => prepare_general(theta, (0, 0), (0, 1)),
                Preparation::CrossValue => prepare_general(theta, (0, 0), (1, 1)),
            };
            let idx = self.env.prepare(Party::Alice, state);
            debug_assert_eq!(idx, i);
            let mut rec = PairRecord::new(i, q, theta, prep);
            if prep == Preparation::Product {
                rec.alice_outcome = Some(self.env.measure_alpha(Party::Alice, i, &ket_x(), rng)?);
            }
            self.env.send(Party::Alice, i, Subsystem::Photon, Party::Bob)?;
            self.records.push(rec);
            self.log(Actor::Alice, "prepare", || {
                json!({"i": i, "q": q, "theta": theta, "preparation": prep, "amplitudes": state.to_reals()})
            });
            self.log(Actor::Alice, "send", || json!({"i": i, "register": "photon", "to": "bob"}));
        }
        Ok(())
    }

    /// Step C2: pick S' and measure every other photon in a random basis.
    pub fn bob_partition_measure<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), ProtocolError> {
        self.advance(Stage::Prepared, Stage::Measured, "measure before prepare")?;
        let delayed = index::sample(rng, self.params.s, self.params.s_prime).into_vec();
        for &i in &delayed {
            self.records[i].bob_set = BobSet::Delayed;
            self.records[i].lie = Lie::RandomSPrime;
        }
        let mut delayed_sorted = delayed;
        delayed_sorted.sort_unstable();
        self.log(Actor::Bob, "partition", || json!({"s_prime": delayed_sorted}));
        for i in 0..self.params.s {
            if self.records[i].bob_set == BobSet::Delayed {
                continue;
            }
            let basis = bit(rng);
            let outcome = self.env.measure_photon(Party::Bob, i, &pol_ket(basis, 0), rng)?;
            self.records[i].bob_basis = Some(basis);
            self.records[i].bob_outcome = Some(outcome);
            self.log(Actor::Bob, "measure", || json!({"i": i, "basis": basis, "outcome": outcome}));
        }
        Ok(())
    }

    /// Step C3: assign lies on S'' and announce.
    pub fn bob_announce<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), ProtocolError> {
        self.advance(Stage::Measured, Stage::Announced, "announce before measuring")?;
        let mut measured: Vec<usize> =
            (0..self.params.s).filter(|&i| self.records[i].bob_set == BobSet::Measured).collect();
        if self.actual.total() > measured.len() {
            return Err(ProtocolError::InvalidParams("lie counts exceed the measured set".into()));
        }
        measured.shuffle(rng);
        let LieCounts { a, b, c } = self.actual;
        for (pos, &i) in measured.iter().enumerate() {
            self.records[i].lie = if pos < a {
                Lie::A
            } else if pos < a + b {
                Lie::B
            } else if pos < a + b + c {
                Lie::C
            } else {
                Lie::Honest
            };
        }
        for i in 0..self.params.s {
            let rec = &mut self.records[i];
            rec.announced = match (rec.bob_basis, rec.bob_outcome) {
                (Some(p1), Some(q1)) => rec.lie.apply(p1, q1),
                _ => (bit(rng), bit(rng)),
            };
        }
        if let Some(t) = self.transcript.as_mut() {
            let ann: Vec<[u8; 2]> = self.records.iter().map(|r| [r.announced.0, r.announced.1]).collect();
            t.push(Actor::Bob, "announce", json!(ann));
        }
        Ok(())
    }

    /// Step C4: measure M and detect lies.
    pub fn alice_detect<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<(), ProtocolError> {
        self.advance(Stage::Announced, Stage::Detected, "detect before announcements")?;
        for i in 0..self.params.s {
            let rec = self.records[i].clone();
            let (p2, q2) = rec.announced;
            let mut out = rec.clone();
            match rec.preparation {
                Preparation::Conforming if q2 != rec.q => {
                    let p = self.env.measure_alpha(Party::Alice, i, &ket_x(), rng)?;
                    out.alice_set = AliceSet::Measured;
                    out.alice_outcome = Some(p);
                    out.in_d = p == p2;
                }
                Preparation::Product if q2 != rec.q => {
                    out.alice_set = AliceSet::Measured;
                    out.in_d = rec.alice_outcome == Some(p2);
                }
                Preparation::SameBasis if q2 != rec.q => {
                    // forces the photon into basis p''; v is the value it lands on
                    let vec = if p2 == 0 { ket_x() } else { diagonal_alpha() };
                    let v = self.env.measure_alpha(Party::Alice, i, &vec, rng)?;
                    let detected = v != q2;
                    out.alice_set = AliceSet::Measured;
                    out.alice_outcome = Some(if detected { p2 } else { p2 ^ 1 });
                    out.in_d = detected;
                }
                Preparation::CrossValue if p2 != q2 => {
                    let p = self.env.measure_alpha(Party::Alice, i, &ket_x(), rng)?;
                    out.alice_set = AliceSet::Measured;
                    out.alice_outcome = Some(p);
                    out.in_d = p == p2;
                }
                _ => {}
            }
            if out.alice_set == AliceSet::Measured {
                let p = out.alice_outcome;
                self.log(Actor::Alice, "measure", || json!({"i": i, "register": "alpha", "outcome": p}));
            }
            self.records[i] = out;
        }
        self.d = (0..self.params.s).filter(|&i| self.records[i].in_d).collect();
        let d = self.d.clone();
        self.log(Actor::Alice, "announce-d", || json!(d));
        Ok(())
    }

    pub fn set_sizes(&self) -> SetSizes {
        let m = self.records.iter().filter(|r| r.alice_set == AliceSet::Measured).count();
        let measured = self.records.iter().filter(|r| r.alice_outcome.is_some()).count();
        SetSizes { m, d: self.d.len(), m_minus_d: m - self.d.len(), measured }
    }

    /// Alice's guard against a Bob who lies more or less often than agreed:
    /// |M| and |D| must sit inside the bands implied by the agreed counts.
    pub fn alice_check_announcements(&mut self) -> CheckResult {
        let prep = self.alice_strategy.preparation();
        if matches!(prep, Preparation::SameBasis | Preparation::CrossValue) {
            return CheckResult {
                check: CheckId::AliceCountBand,
                passed: true,
                detail: "not applied by a non-conforming preparer".into(),
            };
        }
        let expect = set_expectations(&self.params, &self.agreed);
        let m = self.records.iter().filter(|r| r.announced.1 != r.q).count();
        let d = self.d.len();
        let z = self.params.tolerance_z;
        let passed = expect.m.contains(m as f64, z) && expect.d.contains(d as f64, z);
        let detail = format!(
            "|M| = {m} (expected {:.1} ± {:.1}), |D| = {d} (expected {:.1} ± {:.1})",
            expect.m.mean,
            z * expect.m.std(),
            expect.d.mean,
            z * expect.d.std()
        );
        self.log(Actor::Alice, "check", || json!({"check": CheckId::AliceCountBand, "passed": passed, "detail": detail}));
        CheckResult { check: CheckId::AliceCountBand, passed, detail }
    }

    /// Step C5: Bob's conditions for continuing.
    pub fn bob_check_commit<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Verdict, ProtocolError> {
        if self.stage < Stage::Detected {
            return Err(ProtocolError::OutOfOrder("commit checks before detection"));
        }
        let mut verdict = Verdict::default();
        let mut hits = Vec::new();
        for &i in &self.d {
            let rec = &self.records[i];
            if rec.bob_set != BobSet::Delayed {
                continue;
            }
            let (p2, q2) = rec.announced;
            let outcome = self.env.measure_photon(Party::Bob, i, &pol_ket(p2, 0), rng)?;
            if outcome == q2 {
                hits.push(i);
            }
        }
        self.c5_hits = hits.len();
        verdict.push(CheckId::C5Photon, hits.is_empty(), format!("photons found as announced: {hits:?}"));
        let honest_in_d: Vec<usize> =
            self.d.iter().copied().filter(|&i| self.records[i].lie == Lie::Honest).collect();
        verdict.push(CheckId::C5Subset, honest_in_d.is_empty(), format!("honest indices in D: {honest_in_d:?}"));
        let expect = set_expectations(&self.params, &self.actual);
        let z = self.params.tolerance_z;
        let d = self.d.len();
        verdict.push(
            CheckId::C5Band,
            expect.d.contains(d as f64, z),
            format!("|D| = {d}, expected {:.2} ± {:.2}", expect.d.mean, z * expect.d.std()),
        );
        let v = verdict.clone();
        self.log(Actor::Bob, "check", || json!(v));
        Ok(verdict)
    }

    /// Over-measuring cheat: measure `extra` random unmeasured registers so
    /// that they encode as ones.
    pub fn alice_over_measure<R: Rng + ?Sized>(&mut self, extra: usize, rng: &mut R) -> Result<(), ProtocolError> {
        if self.stage != Stage::Detected {
            return Err(ProtocolError::OutOfOrder("over-measure outside the commit phase"));
        }
        let u: Vec<usize> =
            (0..self.params.s).filter(|&i| self.records[i].alice_set == AliceSet::Unmeasured).collect();
        if extra > u.len() {
            return Err(ProtocolError::InvalidStrategy(format!(
                "cannot over-measure {extra} registers with only {} unmeasured",
                u.len()
            )));
        }
        for pick in index::sample(rng, u.len(), extra).into_vec() {
            let i = u[pick];
            let p = self.env.measure_alpha(Party::Alice, i, &ket_x(), rng)?;
            let rec = &mut self.records[i];
            rec.alice_set = AliceSet::Measured;
            rec.alice_outcome = Some(p);
            self.relabelled.insert(i);
        }
        Ok(())
    }

    /// Steps C6 and C7: Bob picks the code, Alice commits to `b`.
    pub fn alice_encode_commit<R: Rng + ?Sized>(&mut self, b: u8, rng: &mut R) -> Result<&Commitment, ProtocolError> {
        self.advance(Stage::Detected, Stage::Encoded, "encode before detection")?;
        let carrier: Vec<usize> = (0..self.params.s).filter(|&i| !self.records[i].in_d).collect();
        let n = carrier.len();
        if n == 0 {
            return Err(ProtocolError::InvalidParams("every pair landed in D; nothing left to encode".into()));
        }
        let c0 = BitString::from_bits(
            &carrier.iter().map(|&i| self.records[i].carries_one() as u8).collect::<Vec<_>>(),
        )?;
        let p = &self.params;
        let generated = BlockCode::generate(n, p.ratio_k, p.ratio_d, p.block_len, rng)?;
        let code = generated.code;
        self.log(Actor::Bob, "code", || json!(code));
        let mut r = None;
        for _ in 0..MASK_RETRIES {
            let cand = BitString::random_nonzero(n, rng);
            if !code.mask_is_degenerate(&cand)? {
                r = Some(cand);
                break;
            }
        }
        let r = r.ok_or(CodeError::DegenerateMask)?;
        let c = code.sample_with_parity(&r, b, rng)?;
        let c_prime = c.xor(&c0)?;
        let commitment = Commitment { code, r, c_prime, n };
        self.log(Actor::Alice, "commit", || json!({"r": commitment.r, "c_prime": commitment.c_prime}));
        self.commit = Some(CommitState {
            commitment,
            carrier,
            c0,
            c,
            b: b & 1,
            relaxed_blocks: generated.relaxed_blocks,
        });
        Ok(&self.commit.as_ref().expect("just set").commitment)
    }

    /// Everything Bob knows before unveil.
    pub fn bob_view(&self) -> Result<BobView, ProtocolError> {
        let commit = self.commit.as_ref().ok_or(ProtocolError::OutOfOrder("bob_view before commit"))?;
        let theta = self.params.theta_policy.fixed().ok_or_else(|| {
            ProtocolError::InvalidStrategy("early extraction needs a fixed theta policy".into())
        })?;
        let observations = commit
            .carrier
            .iter()
            .map(|&i| {
                let r = &self.records[i];
                let obs = match (r.bob_basis, r.bob_outcome) {
                    (Some(basis), Some(outcome)) => BobObservation::Measured { basis, outcome },
                    _ => BobObservation::Delayed,
                };
                (obs, r.announced)
            })
            .collect();
        Ok(BobView { theta, observations, commitment: commit.commitment.clone() })
    }

    fn honest_claims(&self) -> (Vec<u8>, Vec<Option<u8>>) {
        let mut q = Vec::with_capacity(self.params.s);
        let mut p = Vec::with_capacity(self.params.s);
        for r in &self.records {
            let (p2, q2) = r.announced;
            if r.alice_set == AliceSet::Measured {
                q.push(q2 ^ 1);
                p.push(Some(if r.in_d { p2 } else { p2 ^ 1 }));
            } else {
                q.push(q2);
                p.push(None);
            }
        }
        (q, p)
    }

    /// Steps U1 and U2, including any unveil-time cheat. Returns the package
    /// and the cheat bookkeeping for fake-unmeasured strategies.
    pub fn alice_unveil<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<(UnveilPackage, Option<CheatOutcome>), ProtocolError> {
        let commit = self.commit.as_ref().ok_or(ProtocolError::OutOfOrder("unveil before commit"))?;
        let commitment = commit.commitment.clone();
        let carrier = commit.carrier.clone();
        let mut c0 = commit.c0.clone();
        let mut c = commit.c.clone();
        let mut b = commit.b;
        let (mut q, mut p) = self.honest_claims();
        let theta: Vec<f64> = self.records.iter().map(|r| r.theta).collect();
        let mut cheat = None;

        if let AliceStrategy::FakeUnmeasured { flips, policy } = self.alice_strategy {
            let ones = c0.ones_positions();
            let (down, up, target_b, abstract_code) = match flips {
                FlipPlan::Count(m) => (pick(&ones, m, rng)?, Vec::new(), b ^ 1, true),
                FlipPlan::DistanceRatio(ratio) => {
                    let d = ((ratio * commitment.n as f64).round() as usize).max(1);
                    (pick(&ones, d.div_ceil(2), rng)?, Vec::new(), b ^ 1, true)
                }
                FlipPlan::NearestCodeword => {
                    let code = &commitment.code;
                    if code.k() > MAX_ENUM_DIM {
                        return Err(ProtocolError::UnsupportedScale(format!(
                            "nearest-codeword search needs k <= {MAX_ENUM_DIM}, got {}",
                            code.k()
                        )));
                    }
                    let g = code.assembled()?;
                    let (target, _) = nearest_codeword_with_parity(&g, &c, &commitment.r, b ^ 1)?
                        .ok_or(CodeError::DegenerateMask)?;
                    let diff = target.xor(&c)?.ones_positions();
                    let (down, up): (Vec<usize>, Vec<usize>) = diff.into_iter().partition(|&j| c0.get(j) == 1);
                    (down, up, b ^ 1, false)
                }
            };
            if !down.is_empty() || !up.is_empty() {
                let total = self.agreed.honest(self.params.s, self.params.s_prime) as f64;
                let priors = [total, self.agreed.a as f64, self.agreed.b as f64, self.agreed.c as f64];
                for &j in &down {
                    let i = carrier[j];
                    let rec = &self.records[i];
                    let fake = match policy {
                        FakePolicy::SendX => ket_x(),
                        FakePolicy::SendBestGuess => best_guess_state(
                            rec.theta,
                            rec.q,
                            rec.alice_outcome.expect("carrier ones were measured"),
                            rec.announced,
                            priors,
                        ),
                    };
                    self.env.replace_alpha(Party::Alice, i, &fake)?;
                    q[i] = rec.announced.1;
                    p[i] = None;
                    c0.flip(j);
                    c.flip(j);
                    self.faked.insert(i);
                }
                for &j in &up {
                    let i = carrier[j];
                    let outcome = self.env.measure_alpha(Party::Alice, i, &ket_x(), rng)?;
                    let (p2, q2) = self.records[i].announced;
                    self.records[i].alice_outcome = Some(outcome);
                    q[i] = q2 ^ 1;
                    p[i] = Some(p2 ^ 1);
                    c0.flip(j);
                    c.flip(j);
                    self.relabelled.insert(i);
                }
                b = target_b;
                cheat = Some(CheatOutcome {
                    party: Party::Alice,
                    attempted: true,
                    caught_at: None,
                    unveiled_bit_accepted: None,
                    flips_down: down.len(),
                    flips_up: up.len(),
                    abstract_code,
                });
                self.log(Actor::Alice, "cheat", || json!({"down": down, "up": up, "policy": policy}));
            }
        }

        let transferred: Vec<usize> =
            (0..self.params.s).filter(|&i| q[i] == self.records[i].announced.1).collect();
        for &i in &transferred {
            self.env.send(Party::Alice, i, Subsystem::Alpha, Party::Bob)?;
        }
        let package = UnveilPackage { b, c, c0, q, theta, p, transferred };
        self.log(Actor::Alice, "unveil", || json!(package));
        Ok((package, cheat))
    }

    fn origin(&self, i: usize) -> PairOrigin {
        if self.faked.contains(&i) {
            PairOrigin::Fake
        } else if self.relabelled.contains(&i) {
            PairOrigin::Relabelled
        } else if self.records[i].preparation != Preparation::Conforming {
            PairOrigin::Nonconforming
        } else {
            PairOrigin::Honest
        }
    }

    /// Steps U3 to U5. Every check runs; the verdict lists all failures.
    pub fn bob_verify_unveil<R: Rng + ?Sized>(
        &mut self,
        pkg: &UnveilPackage,
        rng: &mut R,
    ) -> Result<UnveilReport, ProtocolError> {
        let commit = self.commit.as_ref().ok_or(ProtocolError::OutOfOrder("verify before commit"))?;
        let commitment = commit.commitment.clone();
        let carrier = commit.carrier.clone();
        let s = self.params.s;
        let mut verdict = Verdict::default();
        let mut tests = Vec::new();

        let shapes_ok = pkg.q.len() == s
            && pkg.theta.len() == s
            && pkg.p.len() == s
            && pkg.c.len() == commitment.n
            && pkg.c0.len() == commitment.n
            && pkg.q.iter().all(|&x| x <= 1)
            && pkg.p.iter().flatten().all(|&x| x <= 1);
        if !shapes_ok {
            verdict.push(CheckId::U1Consistency, false, "malformed unveil package");
            return Ok(UnveilReport { verdict, pair_tests: tests });
        }

        // U1: the claims must reproduce D and c0
        let in_m: Vec<bool> = (0..s).map(|i| pkg.q[i] != self.records[i].announced.1).collect();
        let mut problems = Vec::new();
        for &i in &self.d {
            if !in_m[i] {
                problems.push(format!("D index {i} claimed unmeasured"));
            } else if pkg.p[i] != Some(self.records[i].announced.0) {
                problems.push(format!("D index {i} claims p != p''"));
            }
        }
        let mut expected_c0 = BitString::zeros(commitment.n);
        for (j, &i) in carrier.iter().enumerate() {
            if in_m[i] {
                let p2 = self.records[i].announced.0;
                if pkg.p[i] != Some(p2 ^ 1) {
                    problems.push(format!("index {i} in M-D claims p = {:?}", pkg.p[i]));
                }
                expected_c0.set(j, 1);
            }
        }
        if expected_c0 != pkg.c0 {
            problems.push("c0 does not match the claimed measured set".into());
        }
        let unmeasured: Vec<usize> = (0..s).filter(|&i| !in_m[i]).collect();
        if unmeasured != pkg.transferred {
            problems.push("transferred registers differ from the claimed unmeasured set".into());
        }
        let bad_theta: Vec<usize> = unmeasured
            .iter()
            .copied()
            .filter(|&i| !(pkg.theta[i] > 0.0 && pkg.theta[i] < std::f64::consts::FRAC_PI_2))
            .collect();
        if !bad_theta.is_empty() {
            problems.push(format!("angles outside (0, pi/2) at {bad_theta:?}"));
        }
        verdict.push(CheckId::U1Consistency, problems.is_empty(), problems.join("; "));

        // U3a / U3b on the returned registers
        let mut fails_a = Vec::new();
        let mut fails_b = Vec::new();
        for &i in &unmeasured {
            let rec = &self.records[i];
            let target = prepare_pair(pkg.theta[i], pkg.q[i]).ok();
            let origin = self.origin(i);
            let held = self.env.owner(i, Subsystem::Alpha) == Party::Bob;
            match rec.bob_set {
                BobSet::Delayed => {
                    let passed = match (target, held) {
                        (Some(t), true) => self.env.project(Party::Bob, i, &t, rng)?,
                        _ => false,
                    };
                    if !passed {
                        fails_a.push(i);
                    }
                    tests.push(PairTest { check: CheckId::U3a, index: i, passed, origin, expected: None });
                }
                BobSet::Measured => {
                    let (p1, q1) = (rec.bob_basis.expect("measured"), rec.bob_outcome.expect("measured"));
                    let e = target.and_then(|t| conditional_alpha(&t, p1, q1));
                    let passed = match (e, held) {
                        (Some(e), true) => self.env.measure_alpha(Party::Bob, i, &e, rng)? == 0,
                        _ => false,
                    };
                    if !passed {
                        fails_b.push(i);
                    }
                    tests.push(PairTest { check: CheckId::U3b, index: i, passed, origin, expected: e });
                }
            }
        }
        verdict.push(CheckId::U3a, fails_a.is_empty(), format!("failed pairs: {fails_a:?}"));
        verdict.push(CheckId::U3b, fails_b.is_empty(), format!("failed pairs: {fails_b:?}"));

        // U3c: stored photons of claimed M-D pairs
        let mut fails_c = Vec::new();
        for &i in &carrier {
            if !in_m[i] || self.records[i].bob_set != BobSet::Delayed {
                continue;
            }
            let basis = pkg.p[i].unwrap_or(0);
            let outcome = self.env.measure_photon(Party::Bob, i, &pol_ket(basis, 0), rng)?;
            let passed = outcome == pkg.q[i];
            if !passed {
                fails_c.push(i);
            }
            tests.push(PairTest { check: CheckId::U3c, index: i, passed, origin: self.origin(i), expected: None });
        }
        verdict.push(CheckId::U3c, fails_c.is_empty(), format!("failed pairs: {fails_c:?}"));

        // U4
        let m = in_m.iter().filter(|&&x| x).count();
        let expect = set_expectations(&self.params, &self.actual);
        let z = self.params.tolerance_z;
        verdict.push(
            CheckId::U4Band,
            expect.m.contains(m as f64, z),
            format!("|M| = {m}, expected {:.2} ± {:.2}", expect.m.mean, z * expect.m.std()),
        );
        let lie_b: Vec<usize> = commit
            .carrier
            .iter()
            .copied()
            .filter(|&i| in_m[i] && self.records[i].lie == Lie::B)
            .collect();
        verdict.push(CheckId::U4LieB, lie_b.is_empty(), format!("lie-b indices in M-D: {lie_b:?}"));

        // U5
        let code = &commitment.code;
        let is_cw = code.is_codeword(&pkg.c)?;
        let mask_ok = pkg.c.xor(&pkg.c0)? == commitment.c_prime;
        let parity_ok = dot(&pkg.c, &commitment.r)? == pkg.b;
        verdict.push(
            CheckId::U5,
            is_cw && mask_ok && parity_ok,
            format!("codeword: {is_cw}, c xor c0 = c': {mask_ok}, parity: {parity_ok}"),
        );
        let v = verdict.clone();
        self.log(Actor::Bob, "verify", || json!(v));
        let accepted = verdict.accepted();
        self.log(Actor::Bob, if accepted { "accept" } else { "reject" }, || json!({"b": pkg.b}));
        Ok(UnveilReport { verdict, pair_tests: tests })
    }

    /// God-view check of the exact invariants.
    pub fn invariants(&self) -> InvariantReport {
        let d_soundness = self.d.iter().all(|&i| self.records[i].lie.is_lie());
        let lie_b_annihilation = self
            .records
            .iter()
            .filter(|r| r.announced.1 != r.q && r.alice_set == AliceSet::Measured && !r.in_d)
            .all(|r| r.lie != Lie::B);
        let u5_parity = self.commit.as_ref().map(|c| dot(&c.c, &c.commitment.r).ok() == Some(c.b));
        InvariantReport {
            d_soundness,
            lie_b_annihilation,
            c5_empty: self.c5_hits == 0,
            u5_parity,
            locality: self.env.audit().is_ok(),
        }
    }

    fn code_summary(&self) -> Option<CodeSummary> {
        self.commit.as_ref().map(|c| CodeSummary {
            n: c.commitment.n,
            k: c.commitment.code.k(),
            d: c.commitment.code.min_distance(),
            relaxed_blocks: c.relaxed_blocks,
        })
    }
}

fn pick<R: Rng + ?Sized>(pool: &[usize], m: usize, rng: &mut R) -> Result<Vec<usize>, ProtocolError> {
    if m > pool.len() {
        return Err(ProtocolError::InvalidStrategy(format!(
            "cannot move {m} carrier bits, only {} are set",
            pool.len()
        )));
    }
    let mut out: Vec<usize> = index::sample(rng, pool.len(), m).into_iter().map(|k| pool[k]).collect();
    out.sort_unstable();
    Ok(out)
}

/// Runs one full protocol execution under the given strategies.
pub fn run_protocol<R: Rng + ?Sized>(
    spec: &TrialSpec,
    rng: &mut R,
    record_transcript: bool,
) -> Result<(RunOutcome, Option<Transcript>), ProtocolError> {
    let mut session = Session::new(spec, record_transcript)?;
    session.alice_commit_prepare(rng)?;
    session.bob_partition_measure(rng)?;
    session.bob_announce(rng)?;
    session.alice_detect(rng)?;
    let sizes = session.set_sizes();

    let mut commit_verdict = Verdict::default();
    let alice_check = session.alice_check_announcements();
    commit_verdict.checks.push(alice_check);
    let bob_cheat = |caught: Option<CheckId>| match spec.bob {
        BobStrategy::FrequencyCheat { .. } => Some(CheatOutcome {
            party: Party::Bob,
            attempted: true,
            caught_at: caught,
            unveiled_bit_accepted: None,
            flips_down: 0,
            flips_up: 0,
            abstract_code: false,
        }),
        _ => None,
    };
    let finish = |session: &Session, commit_verdict: Verdict, rejected_at: Option<CheckId>| {
        let wrong_prep = matches!(spec.alice, AliceStrategy::WrongPreparation { .. }) && !spec.alice.is_honest();
        let cheat = if wrong_prep {
            Some(CheatOutcome {
                party: Party::Alice,
                attempted: true,
                caught_at: rejected_at,
                unveiled_bit_accepted: None,
                flips_down: 0,
                flips_up: 0,
                abstract_code: false,
            })
        } else {
            bob_cheat(rejected_at)
        };
        RunOutcome {
            s: spec.params.s,
            sizes,
            commit_accepted: false,
            unveil_accepted: None,
            rejected_at,
            commit_verdict,
            unveil: None,
            invariants: session.invariants(),
            cheat,
            guess: None,
            bit: None,
            code: None,
        }
    };
    if !commit_verdict.accepted() {
        let out = finish(&session, commit_verdict, Some(CheckId::AliceCountBand));
        return Ok((out, session.take_transcript()));
    }
    let c5 = session.bob_check_commit(rng)?;
    commit_verdict.checks.extend(c5.checks);
    if let Some(first) = commit_verdict.first_failure() {
        let out = finish(&session, commit_verdict, Some(first));
        return Ok((out, session.take_transcript()));
    }

    let b = spec.bit.draw(rng);
    let mut over = 0;
    if let AliceStrategy::OverMeasure { extra } = spec.alice {
        over = extra.resolve(spec.params.s);
        session.alice_over_measure(over, rng)?;
    }
    session.alice_encode_commit(b, rng)?;

    let guess = match spec.bob {
        BobStrategy::EarlyExtract => {
            let (guess, posterior) = crate::adversary::bob_early_extract(&session.bob_view()?)?;
            session.log(Actor::Bob, "extract", || json!({"guess": guess, "posterior": posterior}));
            Some(GuessOutcome { guess, posterior, correct: guess == b })
        }
        _ => None,
    };

    let (pkg, fake_cheat) = session.alice_unveil(rng)?;
    let report = session.bob_verify_unveil(&pkg, rng)?;
    let accepted = report.verdict.accepted();
    let rejected_at = report.verdict.first_failure();

    let cheat = match spec.alice {
        AliceStrategy::FakeUnmeasured { .. } => fake_cheat.map(|mut c| {
            let failures: Vec<CheckId> = report
                .verdict
                .failures()
                .into_iter()
                .filter(|&f| !(c.abstract_code && f == CheckId::U5))
                .collect();
            c.caught_at = failures.first().copied();
            c.unveiled_bit_accepted = c.caught_at.is_none().then_some(pkg.b);
            c
        }),
        AliceStrategy::OverMeasure { .. } if over > 0 => Some(CheatOutcome {
            party: Party::Alice,
            attempted: true,
            caught_at: rejected_at,
            unveiled_bit_accepted: accepted.then_some(pkg.b),
            flips_down: 0,
            flips_up: over,
            abstract_code: false,
        }),
        AliceStrategy::WrongPreparation { .. } if !spec.alice.is_honest() => Some(CheatOutcome {
            party: Party::Alice,
            attempted: true,
            caught_at: rejected_at,
            unveiled_bit_accepted: accepted.then_some(pkg.b),
            flips_down: 0,
            flips_up: 0,
            abstract_code: false,
        }),
        _ => bob_cheat(None),
    };

    let out = RunOutcome {
        s: spec.params.s,
        sizes,
        commit_accepted: true,
        unveil_accepted: Some(accepted),
        rejected_at,
        commit_verdict,
        invariants: session.invariants(),
        unveil: Some(report),
        cheat,
        guess,
        bit: Some(b),
        code: session.code_summary(),
    };
    Ok((out, session.take_transcript()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{Amount, PreparationVariant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(s: usize, s_prime: usize, alice: AliceStrategy) -> TrialSpec {
        TrialSpec { params: ProtocolParams { s, s_prime, ..Default::default() }, alice, bob: BobStrategy::Honest, bit: BitChoice::Random }
    }

    #[test]
    fn honest_runs_are_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (out, t) = run_protocol(&spec(300, 40, AliceStrategy::Honest), &mut rng, true).unwrap();
            assert!(out.commit_accepted && out.unveil_accepted == Some(true), "{:?}", out.rejected_at);
            let inv = out.invariants;
            assert!(inv.d_soundness && inv.lie_b_annihilation && inv.c5_empty && inv.locality);
            assert_eq!(inv.u5_parity, Some(true));
            assert!(out.cheat.is_none());
            let t = t.unwrap();
            assert_eq!(t.of_kind("accept").count(), 1);
        }
    }

    #[test]
    fn steps_must_run_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = Session::new(&spec(50, 0, AliceStrategy::Honest), false).unwrap();
        assert!(matches!(s.bob_announce(&mut rng), Err(ProtocolError::OutOfOrder(_))));
        assert!(s.bob_view().is_err());
    }

    #[test]
    fn zero_flips_is_an_honest_unveil() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let alice = AliceStrategy::FakeUnmeasured { flips: FlipPlan::Count(0), policy: FakePolicy::SendX };
        for _ in 0..10 {
            let (out, _) = run_protocol(&spec(200, 0, alice), &mut rng, false).unwrap();
            assert_eq!(out.unveil_accepted, Some(true));
            assert!(out.cheat.as_ref().is_none_or(|c| !c.attempted));
        }
    }

    #[test]
    fn too_many_flips_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alice = AliceStrategy::FakeUnmeasured { flips: FlipPlan::Count(10_000), policy: FakePolicy::SendX };
        assert!(matches!(run_protocol(&spec(100, 0, alice), &mut rng, false), Err(ProtocolError::InvalidStrategy(_))));
    }

    #[test]
    fn faked_unveil_claims_the_other_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alice = AliceStrategy::FakeUnmeasured { flips: FlipPlan::Count(2), policy: FakePolicy::SendX };
        let mut caught = 0;
        for _ in 0..40 {
            let (out, _) = run_protocol(&spec(200, 0, alice), &mut rng, false).unwrap();
            let cheat = out.cheat.unwrap();
            assert!(cheat.attempted && cheat.abstract_code);
            assert_eq!(cheat.flips_down, 2);
            caught += cheat.caught_at.is_some() as usize;
            assert!(out.invariants.locality);
        }
        assert!(caught > 0);
    }

    #[test]
    fn over_measure_zero_is_honest() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let alice = AliceStrategy::OverMeasure { extra: Amount::Count(0) };
        let (out, _) = run_protocol(&spec(300, 0, alice), &mut rng, false).unwrap();
        assert_eq!(out.unveil_accepted, Some(true));
    }

    #[test]
    fn product_states_fail_the_projective_test() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alice = AliceStrategy::WrongPreparation { variant: PreparationVariant::AllProduct };
        let (mut failed, mut total) = (0, 0);
        for _ in 0..60 {
            let (out, _) = run_protocol(&spec(200, 40, alice), &mut rng, false).unwrap();
            if let Some(u) = out.unveil {
                for t in u.pair_tests.iter().filter(|t| t.check == CheckId::U3a) {
                    total += 1;
                    failed += !t.passed as usize;
                }
            }
            assert!(out.cheat.unwrap().attempted);
        }
        assert!(total > 200);
        let rate = failed as f64 / total as f64;
        assert!((rate - 0.5).abs() < 4.0 * (0.25 / total as f64).sqrt(), "{rate} over {total}");
    }

    #[test]
    fn transcript_reflects_protocol_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (_, t) = run_protocol(&spec(30, 5, AliceStrategy::Honest), &mut rng, true).unwrap();
        let kinds: Vec<&str> = t.as_ref().unwrap().events().iter().map(|e| e.kind.as_str()).collect();
        let pos = |k: &str| kinds.iter().position(|x| *x == k).unwrap();
        assert!(pos("config") < pos("prepare"));
        assert!(pos("announce") < pos("announce-d"));
        assert!(pos("commit") < pos("unveil"));
        assert!(pos("unveil") < pos("accept"));
    }
}
