use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{Gate, MetricSummary, RunStats, Tally, ViolationCounts};
use super::HarnessError;
use crate::adversary::{AliceStrategy, BobStrategy};
use crate::protocol::{
    run_protocol, set_expectations, state_label, BitChoice, ProtocolParams, RunOutcome, Transcript, TrialSpec,
};

/// Trials needed before statistical gates are evaluated.
pub const MIN_GATE_TRIALS: usize = 30;
/// Sigma multiplier of the statistical gates.
pub const GATE_Z: f64 = 4.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Directory receiving one JSON-lines transcript per trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<PathBuf>,
}

/// One experiment: a protocol configuration run `trials` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub master_seed: u64,
    pub trials: usize,
    pub params: ProtocolParams,
    #[serde(default)]
    pub alice_strategy: AliceStrategy,
    #[serde(default)]
    pub bob_strategy: BobStrategy,
    #[serde(default)]
    pub bit: BitChoice,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 1,
            trials: 100,
            params: ProtocolParams::default(),
            alice_strategy: AliceStrategy::Honest,
            bob_strategy: BobStrategy::Honest,
            bit: BitChoice::Random,
            outputs: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        self.params.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.alice_strategy.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if let BobStrategy::FrequencyCheat { f_a, f_b, f_c } = self.bob_strategy {
            crate::protocol::LieCounts::from_frequencies(self.params.s, self.params.s_prime, [f_a, f_b, f_c])
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if self.bob_strategy == BobStrategy::EarlyExtract && self.params.theta_policy.fixed().is_none() {
            return Err(HarnessError::Config("early extraction needs a fixed preparation angle".into()));
        }
        Ok(())
    }

    pub fn trial_spec(&self) -> TrialSpec {
        TrialSpec {
            params: self.params.clone(),
            alice: self.alice_strategy,
            bob: self.bob_strategy,
            bit: self.bit,
        }
    }

    pub fn is_honest(&self) -> bool {
        self.alice_strategy.is_honest() && self.bob_strategy.is_honest()
    }

    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Independent stream for each trial, fixed by `(master_seed, trial)`.
pub fn trial_rng(master_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub keep_transcripts: bool,
    pub keep_outcomes: bool,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub stats: RunStats,
    pub outcomes: Vec<RunOutcome>,
    pub transcripts: Vec<Transcript>,
}

pub fn run_trial(
    config: &RunConfig,
    trial: usize,
    transcript: bool,
) -> Result<(RunOutcome, Option<Transcript>), HarnessError> {
    let mut rng = trial_rng(config.master_seed, trial);
    run_protocol(&config.trial_spec(), &mut rng, transcript).map_err(|source| HarnessError::Protocol { trial, source })
}

pub fn run_batch(config: &RunConfig) -> Result<RunStats, HarnessError> {
    run_batch_with(config, &BatchOptions::default()).map(|b| b.stats)
}

pub fn run_batch_with(config: &RunConfig, opts: &BatchOptions) -> Result<BatchResult, HarnessError> {
    config.validate()?;
    let work = || -> Vec<Result<(RunOutcome, Option<Transcript>), HarnessError>> {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t, opts.keep_transcripts))
            .collect()
    };
    let results = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::Config(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut outcomes = Vec::with_capacity(results.len());
    let mut transcripts = Vec::new();
    for r in results {
        let (o, t) = r?;
        outcomes.push(o);
        transcripts.extend(t);
    }
    let stats = aggregate(config, &outcomes);
    if !opts.keep_outcomes {
        outcomes.clear();
    }
    Ok(BatchResult { stats, outcomes, transcripts })
}

fn tally_key(o: &crate::protocol::PairTest, fixed_theta: bool) -> String {
    let origin = serde_json::to_value(o.origin).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    let label = match (&o.expected, fixed_theta) {
        (Some(e), true) => state_label(e),
        _ => "-".to_string(),
    };
    format!("{}/{origin}/{label}", o.check)
}

/// Folds per-trial outcomes (in trial order) into a report.
pub fn aggregate(config: &RunConfig, outcomes: &[RunOutcome]) -> RunStats {
    let s = config.params.s as f64;
    let fixed_theta = config.params.theta_policy.fixed().is_some();
    let mut series: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    let mut push = |name: &'static str, v: f64| series.entry(name).or_default().push(v);
    let mut violations = ViolationCounts::default();
    let mut rejections: BTreeMap<String, usize> = BTreeMap::new();
    let mut pair_tests: BTreeMap<String, Tally> = BTreeMap::new();
    let mut relaxed_blocks = 0;

    for o in outcomes {
        push("ratio_M", o.sizes.m as f64 / s);
        push("ratio_D", o.sizes.d as f64 / s);
        push("ratio_MminusD", o.sizes.m_minus_d as f64 / s);
        push("measured_ratio", o.sizes.measured as f64 / s);
        push("commit_accept_rate", o.commit_accepted as u8 as f64);
        if let Some(a) = o.unveil_accepted {
            push("unveil_accept_rate", a as u8 as f64);
        }
        if let Some(c) = &o.cheat {
            if c.attempted {
                push("cheat_success_rate", c.succeeded() as u8 as f64);
                push("flips_down", c.flips_down as f64);
                push("flips_up", c.flips_up as f64);
                push("binding_bound", (2.0f64 / 3.0).powi(c.flips_down as i32));
            }
        }
        if let Some(g) = &o.guess {
            push("bob_guess_accuracy", g.correct as u8 as f64);
            push("bob_guess_posterior", g.posterior);
        }
        if let Some(code) = &o.code {
            push("code_n", code.n as f64);
            push("code_k", code.k as f64);
            push("code_d", code.d as f64);
            relaxed_blocks += code.relaxed_blocks;
        }
        let inv = &o.invariants;
        violations.d_soundness += !inv.d_soundness as usize;
        violations.lie_b_annihilation += !inv.lie_b_annihilation as usize;
        violations.c5_empty += !inv.c5_empty as usize;
        violations.u5_parity += (inv.u5_parity == Some(false)) as usize;
        violations.locality += !inv.locality as usize;
        if let Some(r) = o.rejected_at {
            *rejections.entry(r.to_string()).or_default() += 1;
        }
        if let Some(u) = &o.unveil {
            for t in &u.pair_tests {
                let e = pair_tests.entry(tally_key(t, fixed_theta)).or_default();
                e.total += 1;
                e.passed += t.passed as usize;
            }
        }
    }

    let metrics: BTreeMap<String, MetricSummary> = series
        .into_iter()
        .filter_map(|(k, v)| MetricSummary::from_values(&v).map(|m| (k.to_string(), m)))
        .collect();
    let gates = if config.is_honest() { honest_gates(config, &metrics, &violations) } else { Vec::new() };
    RunStats { trials: outcomes.len(), metrics, violations, rejections, pair_tests, gates, relaxed_blocks }
}

fn honest_gates(config: &RunConfig, metrics: &BTreeMap<String, MetricSummary>, v: &ViolationCounts) -> Vec<Gate> {
    let mut gates = Vec::new();
    for (name, count) in [
        ("d_soundness", v.d_soundness),
        ("lie_b_annihilation", v.lie_b_annihilation),
        ("c5_empty", v.c5_empty),
        ("u5_parity", v.u5_parity),
        ("locality", v.locality),
    ] {
        gates.push(Gate { name: name.into(), passed: count == 0, observed: count as f64, target: 0.0, tolerance: 0.0 });
    }
    if config.trials < MIN_GATE_TRIALS {
        return gates;
    }
    let p = &config.params;
    let counts = p.validate().expect("validated config");
    let (m, d, md) = p.expected_ratios(&counts);
    let e = set_expectations(p, &counts);
    let s = p.s as f64;
    let root_t = (config.trials as f64).sqrt();
    for (name, target, sigma) in [
        ("ratio_M", m, e.m.std() / s),
        ("ratio_D", d, e.d.std() / s),
        ("ratio_MminusD", md, e.m_minus_d.std() / s),
    ] {
        let observed = metrics.get(name).map_or(f64::NAN, |x| x.mean);
        let tolerance = GATE_Z * sigma / root_t;
        gates.push(Gate {
            name: name.into(),
            passed: (observed - target).abs() <= tolerance + 1e-12,
            observed,
            target,
            tolerance,
        });
    }
    gates
}
