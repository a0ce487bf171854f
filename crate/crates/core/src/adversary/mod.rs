//! Dishonest strategies for both parties and the measurements that
//! quantify how often each is caught.

mod extract;
mod fake;
mod strategy;

use serde::{Deserialize, Serialize};

pub use extract::{bob_early_extract, posterior_over_codewords, BobView, ExtractMethod, EXTRACT_MAX_K, EXTRACT_MAX_N};
pub use fake::{best_guess_state, expected_state, lie_posterior};
pub use strategy::{
    AliceStrategy, Amount, BobStrategy, CheatOutcome, FakePolicy, FlipPlan, PreparationVariant,
};

use crate::harness::{run_batch, HarnessError, RunConfig};

/// Monte Carlo estimate of how often a faking Alice gets the opposite bit
/// accepted, next to the survival bound `(2/3)^flips`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingEstimate {
    pub trials: usize,
    /// Trials in which a cheat was actually attempted.
    pub attempted: usize,
    pub rate: f64,
    pub std_err: f64,
    pub ci95: (f64, f64),
    /// Mean of `(2/3)^flips_down` over attempted trials.
    pub bound: f64,
    pub mean_flips_down: f64,
}

impl BindingEstimate {
    /// `rate <= bound + z * std_err`, with the binomial error at the bound
    /// used when the empirical one is zero.
    pub fn within_bound(&self, z: f64) -> bool {
        let n = self.attempted.max(1) as f64;
        let se = self.std_err.max((self.bound * (1.0 - self.bound) / n).sqrt());
        self.rate <= self.bound + z * se
    }
}

pub fn measure_binding(config: &RunConfig) -> Result<BindingEstimate, HarnessError> {
    if !matches!(config.alice_strategy, AliceStrategy::FakeUnmeasured { .. }) {
        return Err(HarnessError::Config(format!(
            "binding is measured against a fake-unmeasured Alice, got {}",
            config.alice_strategy
        )));
    }
    let stats = run_batch(config)?;
    let est = match stats.metric("cheat_success_rate") {
        Some(m) => BindingEstimate {
            trials: stats.trials,
            attempted: m.count,
            rate: m.mean,
            std_err: m.std_err(),
            ci95: (m.ci95_low, m.ci95_high),
            bound: stats.metric("binding_bound").map_or(1.0, |b| b.mean),
            mean_flips_down: stats.metric("flips_down").map_or(0.0, |b| b.mean),
        },
        None => BindingEstimate {
            trials: stats.trials,
            attempted: 0,
            rate: 0.0,
            std_err: 0.0,
            ci95: (0.0, 0.0),
            bound: 1.0,
            mean_flips_down: 0.0,
        },
    };
    Ok(est)
}
