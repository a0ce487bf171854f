//! End-to-end checks of the protocol's quantitative claims, each with a
//! fixed seed, an independently computed target and a runtime budget.

use std::f64::consts::FRAC_PI_4;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{measure_binding, AliceStrategy, Amount, BindingEstimate, BobStrategy, FakePolicy, FlipPlan};
use crate::harness::{run_batch, run_batch_with, trial_rng, BatchOptions, HarnessError, RunConfig, RunReport, RunStats};
use crate::lincode::{count_codewords_at_distance, generate_code, inv_binary_entropy, BitString, CodeSpec};
use crate::protocol::{solve_problem_p, ProtocolParams, SolverKind, Transcript};
use crate::qstate::{conditional_alpha, measure_photon, photon_outcome_prob, prepare_pair, QubitState};

const Z: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub target: f64,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, observed: f64, target: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, observed, target, detail: detail.into() }
    }

    /// `|observed - target| <= tol`.
    fn band(name: impl Into<String>, observed: f64, target: f64, tol: f64) -> Self {
        let passed = (observed - target).abs() <= tol;
        Self::new(name, passed, observed, target, format!("{observed:.6} vs {target:.6} ± {tol:.6}"))
    }

    fn at_most(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self::new(name, observed <= limit, observed, limit, format!("{observed:.6} <= {limit:.6}"))
    }

    fn at_least(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self::new(name, observed >= limit, observed, limit, format!("{observed:.6} >= {limit:.6}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub key: String,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub elapsed_s: f64,
    pub limit_s: f64,
    /// Set when the criterion could not be evaluated at all.
    pub error: Option<String>,
}

impl CriterionReport {
    pub fn summary_line(&self) -> String {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let tail = match (&self.error, failed.is_empty()) {
            (Some(e), _) => format!("error: {e}"),
            (None, true) => format!("{} checks", self.checks.len()),
            (None, false) => format!("failed: {}", failed.join(", ")),
        };
        format!(
            "criterion {} [{}] {}: {} ({tail}; {:.1}s of {:.0}s)",
            self.id,
            self.key,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed_s,
            self.limit_s
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub key: &'static str,
    pub title: &'static str,
    pub limit_s: f64,
    run: fn() -> Result<Vec<Check>, HarnessError>,
}

pub const CRITERIA: [Criterion; 9] = [
    Criterion { id: 1, key: "born", title: "Born rule and collapse table", limit_s: 5.0, run: born },
    Criterion { id: 2, key: "counting", title: "lie-detection set sizes", limit_s: 30.0, run: counting },
    Criterion { id: 3, key: "invariants", title: "exact honest-run invariants", limit_s: 60.0, run: invariants },
    Criterion { id: 4, key: "solvers", title: "detection method measurement counts", limit_s: 30.0, run: solvers },
    Criterion { id: 5, key: "binding", title: "binding against faked registers", limit_s: 180.0, run: binding },
    Criterion { id: 6, key: "over-measure", title: "over-measurement detection", limit_s: 60.0, run: over_measure },
    Criterion { id: 7, key: "concealing", title: "concealment against early extraction", limit_s: 120.0, run: concealing },
    Criterion { id: 8, key: "combinatorics", title: "code combinatorics", limit_s: 10.0, run: combinatorics },
    Criterion { id: 9, key: "determinism", title: "determinism across runs and threads", limit_s: 30.0, run: determinism },
];

/// Resolves `--only` selectors (ids or keys, comma separated).
pub fn select(only: &str) -> Result<Vec<u8>, String> {
    let mut ids = Vec::new();
    for part in only.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let c = CRITERIA
            .iter()
            .find(|c| c.key == part || part.parse::<u8>() == Ok(c.id))
            .ok_or_else(|| format!("unknown criterion {part:?}"))?;
        if !ids.contains(&c.id) {
            ids.push(c.id);
        }
    }
    if ids.is_empty() {
        return Err("no criteria selected".into());
    }
    ids.sort_unstable();
    Ok(ids)
}

pub fn run_criterion(id: u8) -> Option<CriterionReport> {
    let c = CRITERIA.iter().find(|c| c.id == id)?;
    let start = Instant::now();
    let result = (c.run)();
    let elapsed_s = start.elapsed().as_secs_f64();
    let (checks, error) = match result {
        Ok(mut checks) => {
            checks.push(Check::at_most("runtime", elapsed_s, c.limit_s));
            (checks, None)
        }
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let passed = error.is_none() && checks.iter().all(|k| k.passed);
    Some(CriterionReport {
        id: c.id,
        key: c.key.into(),
        title: c.title.into(),
        passed,
        checks,
        elapsed_s,
        limit_s: c.limit_s,
        error,
    })
}

pub fn run_selected(ids: &[u8]) -> Vec<CriterionReport> {
    ids.iter().filter_map(|&id| run_criterion(id)).collect()
}

pub fn run_all() -> Vec<CriterionReport> {
    run_selected(&CRITERIA.iter().map(|c| c.id).collect::<Vec<_>>())
}

fn params(s: usize) -> ProtocolParams {
    ProtocolParams { s, ..Default::default() }
}

fn config(seed: u64, trials: usize, params: ProtocolParams) -> RunConfig {
    RunConfig { master_seed: seed, trials, params, ..Default::default() }
}

fn metric(stats: &RunStats, name: &str) -> Result<(f64, f64, usize), HarnessError> {
    stats
        .metric(name)
        .map(|m| (m.mean, m.std, m.count))
        .ok_or_else(|| HarnessError::Config(format!("metric {name} missing from report")))
}

// criterion 1

/// `(q, (basis, outcome), alpha amplitudes, probability)`.
type BornRow = (u8, (u8, u8), (f64, f64), f64);

fn born() -> Result<Vec<Check>, HarnessError> {
    let mut checks = Vec::new();
    let theta = FRAC_PI_4;
    let (r3, r23) = ((1.0f64 / 3.0).sqrt(), (2.0f64 / 3.0).sqrt());
    // alpha state left by each photon result, written out by hand for both
    // prepared values
    let table: [BornRow; 8] = [
        (0, (0, 0), (r23, r3), 0.75),
        (0, (1, 0), (r3, r23), 0.75),
        (0, (0, 1), (0.0, 1.0), 0.25),
        (0, (1, 1), (1.0, 0.0), 0.25),
        (1, (0, 1), (r23, r3), 0.75),
        (1, (1, 1), (r3, r23), 0.75),
        (1, (0, 0), (0.0, 1.0), 0.25),
        (1, (1, 0), (1.0, 0.0), 0.25),
    ];
    let mut worst_state = 0.0f64;
    let mut worst_prob = 0.0f64;
    for (q, (p1, q1), (ax, ay), prob) in table {
        let psi = prepare_pair(theta, q)?;
        let expected = QubitState::from_real(ax, ay)?;
        let got = conditional_alpha(&psi, p1, q1).ok_or_else(|| HarnessError::Config("zero-probability outcome".into()))?;
        worst_state = worst_state.max(1.0 - got.fidelity(&expected));
        worst_prob = worst_prob.max((photon_outcome_prob(&psi, p1, q1) - prob).abs());
    }
    checks.push(Check::at_most("conditional alpha states", worst_state, 1e-12));
    checks.push(Check::at_most("outcome probabilities", worst_prob, 1e-12));

    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut same = 0usize;
    for _ in 0..n {
        let q = rng.random::<bool>() as u8;
        let basis = rng.random::<bool>() as u8;
        let (outcome, _) = measure_photon(&prepare_pair(theta, q)?, basis, &mut rng);
        same += (outcome == q) as usize;
    }
    let sigma = (0.75f64 * 0.25 / n as f64).sqrt();
    checks.push(Check::band("P(q' = q)", same as f64 / n as f64, 0.75, Z * sigma));
    Ok(checks)
}

// criterion 2

fn counting() -> Result<Vec<Check>, HarnessError> {
    let s = 2000;
    let trials = 50;
    let p = params(s);
    let stats = run_batch(&config(2, trials, p.clone()))?;
    let (fa, fb, fc) = (p.f_a, p.f_b, p.f_c);
    let [a, b, c] = [fa, fb, fc].map(|f| (f * s as f64).round());
    let h = s as f64 - a - b - c;
    // per-pair membership at theta = pi/4: P(M) is 1/4 for honest and lie-b
    // pairs, 3/4 for lie-a and lie-c pairs; P(D) is 0, 1/2, 1/4, 1/4
    let var_m = s as f64 * 3.0 / 16.0;
    let var_d = a * 0.25 + (b + c) * 3.0 / 16.0;
    let var_md = (h + a) * 3.0 / 16.0 + c * 0.25;
    let root_t = (trials as f64).sqrt();
    let sf = s as f64;
    let mut checks = Vec::new();
    for (name, target, var) in [
        ("ratio_M", 0.25 + (fa + fc) / 2.0, var_m),
        ("ratio_D", fa / 2.0 + fb / 4.0 + fc / 4.0, var_d),
        ("ratio_MminusD", (1.0 - fb + fc) / 4.0, var_md),
    ] {
        let (mean, _, _) = metric(&stats, name)?;
        checks.push(Check::band(name, mean, target, Z * var.sqrt() / sf / root_t));
    }
    Ok(checks)
}

// criterion 3

fn invariants() -> Result<Vec<Check>, HarnessError> {
    let trials = 1000;
    let p = ProtocolParams { s: 40, s_prime: 8, ..Default::default() };
    let stats = run_batch(&config(3, trials, p))?;
    let v = stats.violations;
    let encoded = stats.metric("code_n").map_or(0, |m| m.count);
    Ok(vec![
        Check::at_most("D within lies and S'", v.d_soundness as f64, 0.0),
        Check::at_most("(M-D) free of lie-b", v.lie_b_annihilation as f64, 0.0),
        Check::at_most("C5 set empty", v.c5_empty as f64, 0.0),
        Check::at_most("U5 parity", v.u5_parity as f64, 0.0),
        Check::at_most("register locality", v.locality as f64, 0.0),
        Check::at_least("runs reaching encoding", encoded as f64, 0.99 * trials as f64),
    ])
}

// criterion 4

fn solvers() -> Result<Vec<Check>, HarnessError> {
    let s = 2000;
    let runs = 40;
    let p = params(s);
    let (fa, fb, fc) = (p.f_a, p.f_b, p.f_c);
    let mut checks = Vec::new();
    let mut means = Vec::new();
    for (kind, target) in [
        (SolverKind::SemiClassical, 1.0),
        (SolverKind::Optimal, 0.25 + (fa + fc) / 2.0),
        (SolverKind::VariantB, 0.5),
        (SolverKind::VariantC, 0.25 + (fa + fb) / 2.0),
    ] {
        let mut ratios = Vec::with_capacity(runs);
        let mut all_valid = true;
        for t in 0..runs {
            let mut rng = trial_rng(4, t);
            let out = solve_problem_p(kind, &p, &mut rng).map_err(|source| HarnessError::Protocol { trial: t, source })?;
            all_valid &= out.d_valid;
            ratios.push(out.measured_count as f64 / s as f64);
        }
        let mean = ratios.iter().sum::<f64>() / runs as f64;
        let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (runs - 1) as f64).sqrt();
        let name = format!("{kind:?} measured/s");
        checks.push(if kind == SolverKind::SemiClassical {
            Check::band(name, mean, target, 0.0)
        } else {
            Check::band(name, mean, target, Z * sd / (runs as f64).sqrt())
        });
        checks.push(Check::new(format!("{kind:?} D valid"), all_valid, all_valid as u8 as f64, 1.0, ""));
        means.push(mean);
    }
    let (opt, b, c) = (means[1], means[2], means[3]);
    checks.push(Check::new(
        "optimal < C < B",
        opt < c && c < b,
        opt,
        c,
        format!("{opt:.4} < {c:.4} < {b:.4}"),
    ));
    Ok(checks)
}

// criterion 5

fn fake_config(seed: u64, s: usize, trials: usize, flips: FlipPlan, policy: FakePolicy) -> RunConfig {
    RunConfig {
        alice_strategy: AliceStrategy::FakeUnmeasured { flips, policy },
        ..config(seed, trials, params(s))
    }
}

fn bound_check(name: String, est: &BindingEstimate) -> Check {
    Check::new(
        name,
        est.attempted > 0 && est.within_bound(Z),
        est.rate,
        est.bound,
        format!("rate {:.4} ± {:.4} over {} attempts, bound {:.4}", est.rate, est.std_err, est.attempted, est.bound),
    )
}

fn binding() -> Result<Vec<Check>, HarnessError> {
    let mut checks = Vec::new();
    let mut caught = 0usize;
    let mut total = 0usize;
    for (m, seed) in [(3usize, 51u64), (5, 52)] {
        let cfg = fake_config(seed, 200, 2000, FlipPlan::Count(m), FakePolicy::SendX);
        let stats = run_batch(&cfg)?;
        let t = stats.tally("u3b/fake/0.8165x+0.5774y");
        caught += t.failed();
        total += t.total;
        let est = measure_binding(&cfg)?;
        checks.push(bound_check(format!("success at d = {}", 2 * m), &est));
    }
    let rate = caught as f64 / total.max(1) as f64;
    let sigma = (1.0f64 / 3.0 * 2.0 / 3.0 / total.max(1) as f64).sqrt();
    checks.push(Check::band("send-x catch rate at sqrt(2/3)x+sqrt(1/3)y", rate, 1.0 / 3.0, Z * sigma));

    let mut prev: Option<f64> = None;
    for (i, s) in [500usize, 1000, 2000].into_iter().enumerate() {
        let cfg = fake_config(53 + i as u64, s, 400, FlipPlan::DistanceRatio(0.01), FakePolicy::SendX);
        let est = measure_binding(&cfg)?;
        checks.push(bound_check(format!("success at s = {s}"), &est));
        if let Some(p) = prev {
            checks.push(Check::at_most(format!("non-increasing at s = {s}"), est.rate, p));
        }
        prev = Some(est.rate);
    }
    Ok(checks)
}

// criterion 6

fn over_measure() -> Result<Vec<Check>, HarnessError> {
    let trials = 1000;
    let cfg = RunConfig {
        alice_strategy: AliceStrategy::OverMeasure { extra: Amount::FractionOfS(0.2) },
        ..config(6, trials, params(1000))
    };
    let stats = run_batch(&cfg)?;
    let at_u4: usize = stats.rejections.iter().filter(|(k, _)| k.starts_with("u4")).map(|(_, v)| v).sum();
    Ok(vec![Check::at_least("rejected at U4", at_u4 as f64 / trials as f64, 0.999)])
}

// criterion 7

fn concealing() -> Result<Vec<Check>, HarnessError> {
    let trials = 2000;
    let p = ProtocolParams { s: 20, s_prime: 4, ratio_k: 0.75, ..Default::default() };
    let cfg = RunConfig { bob_strategy: BobStrategy::EarlyExtract, ..config(7, trials, p.clone()) };
    let stats = run_batch(&cfg)?;
    let (acc, _, count) = metric(&stats, "bob_guess_accuracy")?;
    let (n, _, _) = metric(&stats, "code_n")?;
    let (k, _, _) = metric(&stats, "code_k")?;
    let mut checks = vec![
        Check::band("guess accuracy", acc, 0.5, Z * (0.25 / count as f64).sqrt()),
        Check::at_most("mean n", n, 20.0),
        Check::at_least("mean k/n", k / n, 0.5 + 1e-9),
    ];

    // the identity code conceals nothing and binds nothing: Alice moves
    // to the opposite parity with a single flip
    let neg = RunConfig {
        alice_strategy: AliceStrategy::FakeUnmeasured { flips: FlipPlan::NearestCodeword, policy: FakePolicy::SendBestGuess },
        ..config(71, 500, ProtocolParams { s: 16, ratio_k: 1.0, ratio_d: 0.0, ..Default::default() })
    };
    let broken = measure_binding(&neg)?;
    checks.push(Check::at_least("identity code cheat success", broken.rate, 0.5));
    let coded = RunConfig { params: p, ..neg };
    let held = measure_binding(&coded)?;
    checks.push(Check::at_most("coded cheat success below identity", held.rate, broken.rate));
    Ok(checks)
}

// criterion 8

fn binomial_exact(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn combinatorics() -> Result<Vec<Check>, HarnessError> {
    let mut checks = Vec::new();
    let gamma = inv_binary_entropy(0.5)?;
    checks.push(Check::band("inverse entropy at 1/2", gamma, 0.1100279, 1e-6));

    let mut worst = f64::INFINITY;
    for n in 8u64..=64 {
        let k = (gamma * n as f64).ceil() as u64;
        let lhs = binomial_exact(n, k) as f64;
        let rhs = 2f64.powf(n as f64 / 2.0) / (n as f64).sqrt();
        worst = worst.min(lhs / rhs);
    }
    checks.push(Check::at_least("min C(n, ceil(gamma n)) / (2^(n/2)/sqrt n)", worst, 1.0));

    let p = ProtocolParams::default();
    let carrier_ratio = (1.0 - p.f_b + p.f_c) / 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (n, k) in [(16usize, 14usize), (20, 17), (24, 18), (24, 19), (24, 20)] {
        let g = generate_code(&CodeSpec::new(n, k, 2)?, &mut rng, 1000)?;
        let d0 = ((carrier_ratio * n as f64).round() as usize).max((gamma * n as f64).ceil() as usize);
        let count = count_codewords_at_distance(&g, &BitString::zeros(n), d0)? as f64;
        let bound = 2f64.powf(k as f64 - n as f64 / 2.0) / (n as f64).sqrt();
        checks.push(Check::at_least(format!("({n},{k}) codewords at distance {d0}"), count, bound));
    }
    Ok(checks)
}

// criterion 9

fn fingerprint(cfg: &RunConfig, threads: usize) -> Result<String, HarnessError> {
    let opts = BatchOptions { threads: Some(threads), keep_transcripts: true, keep_outcomes: false };
    let res = run_batch_with(cfg, &opts)?;
    let mut out = serde_json::to_string(&RunReport { config: cfg.clone(), stats: res.stats })?;
    for t in &res.transcripts {
        out.push_str(&t.to_jsonl());
    }
    Ok(out)
}

fn determinism() -> Result<Vec<Check>, HarnessError> {
    let configs = [
        ("honest", config(9, 40, ProtocolParams { s: 300, s_prime: 30, ..Default::default() })),
        ("faking", fake_config(9, 200, 40, FlipPlan::Count(2), FakePolicy::SendBestGuess)),
    ];
    let mut checks = Vec::new();
    for (label, cfg) in configs {
        let a = fingerprint(&cfg, 8)?;
        let b = fingerprint(&cfg, 8)?;
        let c = fingerprint(&cfg, 1)?;
        checks.push(Check::new(format!("{label}: repeat"), a == b, (a == b) as u8 as f64, 1.0, format!("{} bytes", a.len())));
        checks.push(Check::new(format!("{label}: 1 vs 8 threads"), a == c, (a == c) as u8 as f64, 1.0, ""));
        let parsed = Transcript::from_jsonl(&cfg_first_transcript(&cfg)?).is_ok();
        checks.push(Check::new(format!("{label}: transcript parses"), parsed, parsed as u8 as f64, 1.0, ""));
    }
    Ok(checks)
}

fn cfg_first_transcript(cfg: &RunConfig) -> Result<String, HarnessError> {
    let (_, t) = crate::harness::run_trial(cfg, 0, true)?;
    Ok(t.map(|t| t.to_jsonl()).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectors() {
        assert_eq!(select("binding").unwrap(), vec![5]);
        assert_eq!(select("9, born,1").unwrap(), vec![1, 9]);
        assert!(select("nope").is_err());
        assert!(select("").is_err());
    }

    #[test]
    fn exact_binomials() {
        assert_eq!(binomial_exact(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(binomial_exact(8, 1), 8);
    }

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 8] {
            let r = run_criterion(id).unwrap();
            assert!(r.passed, "{}", r.summary_line());
        }
    }
}
