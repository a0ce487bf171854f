use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Mean, sample standard deviation and a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl MetricSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * std / (n as f64).sqrt();
        Some(Self { mean, std, count: n, ci95_low: mean - half, ci95_high: mean + half })
    }

    pub fn std_err(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }
}

/// Violations of properties that must hold exactly in honest runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationCounts {
    pub d_soundness: usize,
    pub lie_b_annihilation: usize,
    pub c5_empty: usize,
    pub u5_parity: usize,
    pub locality: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.d_soundness + self.lie_b_annihilation + self.c5_empty + self.u5_parity + self.locality
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub passed: usize,
    pub total: usize,
}

impl Tally {
    pub fn failed(&self) -> usize {
        self.total - self.passed
    }

    pub fn fail_rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.failed() as f64 / self.total as f64)
    }
}

/// A statistical or exact pass/fail check attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
}

/// Aggregated results of a batch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub trials: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
    pub violations: ViolationCounts,
    /// Runs rejected, keyed by the first failing check.
    pub rejections: BTreeMap<String, usize>,
    /// Single-pair test outcomes keyed by `check/origin/expected-state`.
    pub pair_tests: BTreeMap<String, Tally>,
    pub gates: Vec<Gate>,
    pub relaxed_blocks: usize,
}

impl RunStats {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }

    pub fn gates_passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    /// Sums all tallies whose key starts with `prefix`.
    pub fn tally(&self, prefix: &str) -> Tally {
        self.pair_tests
            .iter()
            .filter(|(k, _)| k.starts_with(prefix))
            .fold(Tally::default(), |acc, (_, t)| Tally { passed: acc.passed + t.passed, total: acc.total + t.total })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_of_known_values() {
        let m = MetricSummary::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(m.ci95_low < 2.5 && m.ci95_high > 2.5);
        assert!(MetricSummary::from_values(&[]).is_none());
        let one = MetricSummary::from_values(&[7.0]).unwrap();
        assert_eq!((one.std, one.ci95_low), (0.0, 7.0));
    }

    #[test]
    fn tallies_by_prefix() {
        let mut s = RunStats::default();
        s.pair_tests.insert("u3b/fake/a".into(), Tally { passed: 2, total: 3 });
        s.pair_tests.insert("u3b/fake/b".into(), Tally { passed: 1, total: 1 });
        s.pair_tests.insert("u3b/honest/a".into(), Tally { passed: 5, total: 5 });
        assert_eq!(s.tally("u3b/fake/"), Tally { passed: 3, total: 4 });
        assert_eq!(s.tally("u3b/fake/a").fail_rate(), Some(1.0 / 3.0));
    }
}
