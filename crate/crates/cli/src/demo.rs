//! Narrated single execution at small `s`. Every printed probability is
//! computed twice: from closed-form trigonometry and from the simulated
//! register state.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::process::ExitCode;

use clap::Args;
use qbc_core::adversary::{bob_early_extract, AliceStrategy, BobStrategy, FakePolicy};
use qbc_core::harness::trial_rng;
use qbc_core::protocol::{
    state_label, AliceSet, BitChoice, BobSet, CheckId, CheckResult, Lie, PairOrigin, PairRecord, Preparation,
    ProtocolError, ProtocolParams, Session, ThetaPolicy, TrialSpec,
};
use qbc_core::qstate::{photon_outcome_prob, PairState, QubitState};

use crate::{parse_bit, CmdResult, Fail};

pub const MAX_DEMO_S: usize = 16;
const TOL: f64 = 1e-9;

#[derive(Args, Debug)]
pub struct DemoArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long = "s", default_value_t = 8)]
    s: usize,
    /// Defaults to `s/8`.
    #[arg(long = "s-prime")]
    s_prime: Option<usize>,
    #[arg(long = "f-a")]
    f_a: Option<f64>,
    #[arg(long = "f-b")]
    f_b: Option<f64>,
    #[arg(long = "f-c")]
    f_c: Option<f64>,
    #[arg(long, default_value_t = FRAC_PI_4)]
    theta: f64,
    #[arg(long = "ratio-k")]
    ratio_k: Option<f64>,
    #[arg(long = "ratio-d")]
    ratio_d: Option<f64>,
    #[arg(long = "alice-strategy", default_value = "honest")]
    alice_strategy: AliceStrategy,
    #[arg(long = "bob-strategy", default_value = "honest")]
    bob_strategy: BobStrategy,
    #[arg(long, value_parser = parse_bit, default_value = "random")]
    bit: BitChoice,
}

impl DemoArgs {
    fn spec(&self) -> TrialSpec {
        let d = ProtocolParams::default();
        let params = ProtocolParams {
            s: self.s,
            s_prime: self.s_prime.unwrap_or(self.s / 8),
            f_a: self.f_a.unwrap_or(d.f_a),
            f_b: self.f_b.unwrap_or(d.f_b),
            f_c: self.f_c.unwrap_or(d.f_c),
            theta_policy: ThetaPolicy::Fixed(self.theta),
            ratio_k: self.ratio_k.unwrap_or(d.ratio_k),
            ratio_d: self.ratio_d.unwrap_or(d.ratio_d),
            ..d
        };
        TrialSpec { params, alice: self.alice_strategy, bob: self.bob_strategy, bit: self.bit }
    }
}

/// Polarization angle of `|p,q>`: 0°, 90°, 45°, 135°.
fn angle(p: u8, q: u8) -> f64 {
    FRAC_PI_4 * p as f64 + FRAC_PI_2 * q as f64
}

/// Signed real overlap `<a|b>` of two polarization kets.
fn pol_overlap(a: (u8, u8), b: (u8, u8)) -> f64 {
    (angle(a.0, a.1) - angle(b.0, b.1)).cos()
}

/// The two branches `(amplitude of |x>, photon ket)` and `(amplitude of |y>, photon ket)`
/// Alice actually prepared.
fn branches(rec: &PairRecord) -> [(f64, (u8, u8)); 2] {
    let (s, c) = rec.theta.sin_cos();
    match rec.preparation {
        Preparation::Conforming => [(c, (0, rec.q)), (s, (1, rec.q))],
        Preparation::Product => match rec.alice_outcome {
            Some(0) => [(1.0, (0, rec.q)), (0.0, (1, rec.q))],
            _ => [(0.0, (0, rec.q)), (1.0, (1, rec.q))],
        },
        Preparation::SameBasis => [(c, (0, 0)), (s, (0, 1))],
        Preparation::CrossValue => [(c, (0, 0)), (s, (1, 1))],
    }
}

/// Real alpha amplitudes (unnormalized) after Bob found the photon as `seen`.
fn alpha_after(rec: &PairRecord, seen: (u8, u8)) -> (f64, f64) {
    let [(ax, kx), (ay, ky)] = branches(rec);
    (ax * pol_overlap(seen, kx), ay * pol_overlap(seen, ky))
}

fn ket(p: u8, q: u8) -> String {
    format!("|{p},{q}⟩")
}

fn lie_name(lie: Lie) -> &'static str {
    match lie {
        Lie::Honest => "honest",
        Lie::A => "lie a (value flipped)",
        Lie::B => "lie b (basis flipped)",
        Lie::C => "lie c (both flipped)",
        Lie::RandomSPrime => "random (photon kept)",
    }
}

fn mark(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "FAIL"
    }
}

struct Narrator {
    mismatches: usize,
}

impl Narrator {
    fn prob(&mut self, closed: f64, oracle: f64) -> String {
        if (closed - oracle).abs() > TOL {
            self.mismatches += 1;
            format!("{closed:.4} (register {oracle:.4}, MISMATCH)")
        } else {
            format!("{closed:.4} (register {oracle:.4})")
        }
    }

    fn checks(&self, checks: &[CheckResult]) {
        for c in checks {
            println!("    {:<17} {}  {}", c.check.name(), mark(c.passed), c.detail);
        }
    }
}

fn verdict_line(accepted: bool, why: Option<CheckId>) {
    match why {
        Some(check) if !accepted => println!("verdict: REJECT at {check}"),
        _ => println!("verdict: {}", if accepted { "ACCEPT" } else { "REJECT" }),
    }
}

pub fn cmd_demo(args: &DemoArgs) -> CmdResult {
    if args.s == 0 || args.s > MAX_DEMO_S {
        return Err(Fail(format!("demo needs 1 <= s <= {MAX_DEMO_S}, got {}", args.s)));
    }
    let spec = args.spec();
    let mut session = Session::new(&spec, false)?;
    let mut rng = trial_rng(args.seed, 0);
    let mut nar = Narrator { mismatches: 0 };
    let p = &spec.params;
    let counts = session.agreed_counts();
    println!(
        "demo: seed {}, s = {}, s' = {}, theta = {:.4}, f = ({}, {}, {})",
        args.seed, p.s, p.s_prime, args.theta, p.f_a, p.f_b, p.f_c
    );
    println!("alice: {}, bob: {}", spec.alice, spec.bob);
    println!("agreed lie counts: a = {}, b = {}, c = {}", counts.a, counts.b, counts.c);

    println!();
    println!("C1  Alice prepares each pair and sends the photon to Bob");
    session.alice_commit_prepare(&mut rng)?;
    let prepared: Vec<PairState> = (0..p.s).map(|i| *session.env().state(i)).collect();
    for r in session.records() {
        let [(ax, kx), (ay, ky)] = branches(r);
        let note = match r.preparation {
            Preparation::Conforming => String::new(),
            Preparation::Product => format!("  (alpha measured at once: p = {})", r.alice_outcome.unwrap_or(0)),
            other => format!("  ({other:?})"),
        };
        println!(
            "  pair {:>2}: q = {}  {ax:.4}|x⟩{} {:+.4}|y⟩{}{note}",
            r.index,
            r.q,
            ket(kx.0, kx.1),
            ay,
            ket(ky.0, ky.1)
        );
    }

    println!();
    println!("C2  Bob keeps S' unmeasured and measures every other photon in a random basis");
    session.bob_partition_measure(&mut rng)?;
    let after_bob: Vec<PairState> = (0..p.s).map(|i| *session.env().state(i)).collect();
    for r in session.records() {
        match (r.bob_set, r.bob_basis, r.bob_outcome) {
            (BobSet::Measured, Some(b), Some(o)) => {
                let (x, y) = alpha_after(r, (b, o));
                let closed = x * x + y * y;
                let oracle = photon_outcome_prob(&prepared[r.index], b, o);
                println!("  pair {:>2}: basis {b}, outcome {o}, P = {}", r.index, nar.prob(closed, oracle));
            }
            _ => println!("  pair {:>2}: kept in S'", r.index),
        }
    }

    println!();
    println!("C3  Bob assigns lies on S'' and announces (p'', q'') for every pair");
    session.bob_announce(&mut rng)?;
    for r in session.records() {
        let (p2, q2) = r.announced;
        match (r.bob_basis, r.bob_outcome) {
            (Some(b), Some(o)) => {
                println!("  pair {:>2}: {}, ({b},{o}) announced as ({p2},{q2})", r.index, lie_name(r.lie))
            }
            _ => println!("  pair {:>2}: {}, announced ({p2},{q2})", r.index, lie_name(r.lie)),
        }
    }

    println!();
    println!("C4  Alice measures alpha wherever q'' != q and puts p == p'' into D");
    session.alice_detect(&mut rng)?;
    for r in session.records() {
        if r.alice_set == AliceSet::Unmeasured {
            println!("  pair {:>2}: q'' = q, left unmeasured (U)", r.index);
            continue;
        }
        let outcome = r.alice_outcome.unwrap_or(0);
        let measured_here = matches!(r.preparation, Preparation::Conforming | Preparation::CrossValue);
        let prob = if measured_here {
            let px = match (r.bob_basis, r.bob_outcome) {
                (Some(b), Some(o)) => {
                    let (x, y) = alpha_after(r, (b, o));
                    x * x / (x * x + y * y)
                }
                _ => branches(r)[0].0.powi(2),
            };
            let closed = if outcome == 0 { px } else { 1.0 - px };
            format!(", P = {}", nar.prob(closed, after_bob[r.index].alpha_marginal(outcome)))
        } else {
            String::new()
        };
        let set = if r.in_d { "D" } else { "M-D" };
        println!("  pair {:>2}: q'' != q, p = {outcome}{prob} vs p'' = {} -> {set}", r.index, r.announced.0);
    }
    let sizes = session.set_sizes();
    println!("  |M| = {}, |D| = {}, |M-D| = {}, D = {:?}", sizes.m, sizes.d, sizes.m_minus_d, session.d());

    println!();
    println!("C5  checks before encoding");
    let alice_check = session.alice_check_announcements();
    nar.checks(std::slice::from_ref(&alice_check));
    if !alice_check.passed {
        return finish(&nar, false, Some(CheckId::AliceCountBand));
    }
    let c5 = session.bob_check_commit(&mut rng)?;
    nar.checks(&c5.checks);
    if let Some(first) = c5.first_failure() {
        return finish(&nar, false, Some(first));
    }

    let b = spec.bit.draw(&mut rng);
    if let AliceStrategy::OverMeasure { extra } = spec.alice {
        let extra = extra.resolve(p.s);
        session.alice_over_measure(extra, &mut rng)?;
        println!("    Alice secretly measures {extra} more unmeasured registers");
    }

    println!();
    println!("C6  Bob picks a code; C7 Alice commits to b = {b}");
    let commitment = session.alice_encode_commit(b, &mut rng)?.clone();
    let code = &commitment.code;
    println!(
        "  code: n = {}, k = {}, d = {} in {} block(s)",
        code.n(),
        code.k(),
        code.min_distance(),
        code.blocks().len()
    );
    if let Some((c0, c, b)) = session.committed_strings() {
        println!("  c0 (1 = measured, outside D) = {c0}");
        println!("  c  (codeword, r·c = {b})      = {c}");
    }
    println!("  r                            = {}", commitment.r);
    println!("  c' = c xor c0 (sent to Bob)  = {}", commitment.c_prime);

    if spec.bob == BobStrategy::EarlyExtract {
        let (guess, posterior) = bob_early_extract(&session.bob_view()?)?;
        println!("  Bob guesses b = {guess} early, his posterior {posterior:.4} ({})", if guess == b { "right" } else { "wrong" });
    }

    println!();
    println!("U1  Alice reveals b, c, c0, her claims and the unmeasured registers");
    let (pkg, cheat) = match session.alice_unveil(&mut rng) {
        Ok(x) => x,
        Err(e @ ProtocolError::InvalidStrategy(_)) => {
            println!("  Alice cannot carry out her cheat here: {e}");
            println!();
            println!("verdict: NO UNVEIL");
            return finish_checks(&nar);
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(ch) = &cheat {
        println!(
            "  cheat: {} carrier bit(s) moved down, {} up; unveiling b = {}",
            ch.flips_down, ch.flips_up, pkg.b
        );
        if ch.abstract_code {
            println!("  (abstract flip plan: a failed u5 is not counted as catching her)");
        }
    }
    println!("  b = {}, c = {}, c0 = {}", pkg.b, pkg.c, pkg.c0);
    let before_tests: Vec<PairState> = (0..p.s).map(|i| *session.env().state(i)).collect();
    let fake_policy = match spec.alice {
        AliceStrategy::FakeUnmeasured { policy, .. } => Some(policy),
        _ => None,
    };

    println!();
    println!("U3  Bob tests single pairs");
    let report = session.bob_verify_unveil(&pkg, &mut rng)?;
    for t in &report.pair_tests {
        let r = &session.records()[t.index];
        let what = match t.check {
            CheckId::U3a => "stored photon and register projected on the claimed pair state".to_string(),
            CheckId::U3c => "stored photon measured against the claimed outcome".to_string(),
            _ => match &t.expected {
                Some(e) => {
                    let oracle = before_tests[t.index].photon_given_alpha(e).0;
                    let closed = u3b_pass_probability(r, e, t.origin, fake_policy, &before_tests[t.index]);
                    format!("register tested along {}, pass P = {}", state_label(e), nar.prob(closed, oracle))
                }
                None => "no valid expected state".to_string(),
            },
        };
        let origin = match t.origin {
            PairOrigin::Honest => String::new(),
            o => format!(" [{o:?}]").to_lowercase(),
        };
        println!("  {} pair {:>2}{origin}: {what}: {}", t.check.name(), t.index, mark(t.passed));
    }

    println!();
    println!("U4-U5 statistics and parity");
    nar.checks(&report.verdict.checks);
    let accepted = report.verdict.accepted();
    if accepted {
        println!("  Bob accepts b = {}", pkg.b);
    }
    finish(&nar, accepted, report.verdict.first_failure())
}

/// Closed form of the U3b pass probability for the register actually handed over.
fn u3b_pass_probability(
    r: &PairRecord,
    e: &QubitState,
    origin: PairOrigin,
    policy: Option<FakePolicy>,
    state: &PairState,
) -> f64 {
    let [e0, e1] = e.amplitudes();
    match (origin, policy, r.bob_basis, r.bob_outcome) {
        (PairOrigin::Fake, Some(FakePolicy::SendX), _, _) => e0.norm_sqr(),
        (PairOrigin::Honest, _, Some(b), Some(o)) => {
            let (x, y) = alpha_after(r, (b, o));
            let amp = e0.re * x + e1.re * y;
            amp * amp / (x * x + y * y)
        }
        _ => match state.factorize(1e-9) {
            // the register is a product with the photon; overlap its alpha factor
            Some((alpha, _)) => {
                let [a0, a1] = alpha.amplitudes();
                (e0.conj() * a0 + e1.conj() * a1).norm_sqr()
            }
            None => f64::NAN,
        },
    }
}

fn finish(nar: &Narrator, accepted: bool, why: Option<CheckId>) -> CmdResult {
    println!();
    verdict_line(accepted, why);
    finish_checks(nar)
}

fn finish_checks(nar: &Narrator) -> CmdResult {
    if nar.mismatches > 0 {
        return Err(Fail(format!("{} probabilities disagree with the register state", nar.mismatches)));
    }
    Ok(ExitCode::SUCCESS)
}
