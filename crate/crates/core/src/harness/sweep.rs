use serde::{Deserialize, Serialize};

use super::batch::{run_batch, RunConfig};
use super::stats::RunStats;
use super::HarnessError;

/// Axes of a parameter sweep. An empty axis keeps the base config's value;
/// a grid with every axis empty has no points.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    #[serde(default)]
    pub s: Vec<usize>,
    /// `s'/s`, rounded to the nearest count.
    #[serde(default)]
    pub s_prime_ratio: Vec<f64>,
    #[serde(default)]
    pub f: Vec<[f64; 3]>,
    /// `(k/n, d/n)` pairs.
    #[serde(default)]
    pub code_ratios: Vec<(f64, f64)>,
}

fn or_base<T: Clone>(axis: &[T], base: T) -> Vec<T> {
    if axis.is_empty() {
        vec![base]
    } else {
        axis.to_vec()
    }
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.s.is_empty() && self.s_prime_ratio.is_empty() && self.f.is_empty() && self.code_ratios.is_empty()
    }

    /// Cartesian product in axis order `s`, `s'/s`, `f`, code ratios.
    pub fn points(&self, base: &RunConfig) -> Vec<GridPoint> {
        if self.is_empty() {
            return Vec::new();
        }
        let p = &base.params;
        let ss = or_base(&self.s, p.s);
        let base_ratio = if p.s == 0 { 0.0 } else { p.s_prime as f64 / p.s as f64 };
        let spr = or_base(&self.s_prime_ratio, base_ratio);
        let fs = or_base(&self.f, [p.f_a, p.f_b, p.f_c]);
        let crs = or_base(&self.code_ratios, (p.ratio_k, p.ratio_d));
        let mut out = Vec::new();
        for &s in &ss {
            for &r in &spr {
                for &f in &fs {
                    for &(ratio_k, ratio_d) in &crs {
                        out.push(GridPoint {
                            index: out.len(),
                            s,
                            s_prime: (r * s as f64).round().max(0.0) as usize,
                            f,
                            ratio_k,
                            ratio_d,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    pub s: usize,
    pub s_prime: usize,
    pub f: [f64; 3],
    pub ratio_k: f64,
    pub ratio_d: f64,
}

impl GridPoint {
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        c.params.s = self.s;
        c.params.s_prime = self.s_prime;
        [c.params.f_a, c.params.f_b, c.params.f_c] = self.f;
        c.params.ratio_k = self.ratio_k;
        c.params.ratio_d = self.ratio_d;
        c.outputs = Default::default();
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "kebab-case")]
pub enum PointStatus {
    Completed,
    Skipped(String),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: GridPoint,
    pub status: PointStatus,
    pub stats: Option<RunStats>,
    /// All gates passed; absent when the point did not complete.
    pub targets_met: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub base: RunConfig,
    pub grid: SweepGrid,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn all_targets_met(&self) -> bool {
        self.rows.iter().all(|r| r.targets_met != Some(false))
    }
}

/// Runs every grid point with the base seed. Infeasible points are
/// recorded as skipped and failing points as failed; neither stops the
/// sweep.
pub fn run_sweep(grid: &SweepGrid, base: &RunConfig) -> SweepReport {
    let rows = grid
        .points(base)
        .into_iter()
        .map(|point| {
            let config = point.apply(base);
            if let Err(e) = config.validate() {
                let reason = match e {
                    HarnessError::Config(m) => m,
                    other => other.to_string(),
                };
                return SweepRow { point, status: PointStatus::Skipped(reason), stats: None, targets_met: None };
            }
            match run_batch(&config) {
                Ok(stats) => {
                    let met = stats.gates_passed();
                    SweepRow { point, status: PointStatus::Completed, stats: Some(stats), targets_met: Some(met) }
                }
                Err(e) => SweepRow { point, status: PointStatus::Failed(e.to_string()), stats: None, targets_met: None },
            }
        })
        .collect();
    SweepReport { base: base.clone(), grid: grid.clone(), rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_has_no_points() {
        let report = run_sweep(&SweepGrid::default(), &RunConfig::default());
        assert!(report.rows.is_empty());
        assert!(report.all_targets_met());
    }

    #[test]
    fn product_order_and_defaults() {
        let base = RunConfig::default();
        let grid = SweepGrid { s: vec![100, 200], s_prime_ratio: vec![0.0, 0.5], ..Default::default() };
        let pts = grid.points(&base);
        assert_eq!(pts.len(), 4);
        assert_eq!((pts[1].s, pts[1].s_prime), (100, 50));
        assert_eq!((pts[3].s, pts[3].s_prime), (200, 100));
        assert!(pts.iter().all(|p| p.f == [0.10, 0.15, 0.05] && p.ratio_k == 0.6));
    }

    #[test]
    fn infeasible_point_is_skipped() {
        let base = RunConfig { trials: 2, params: crate::protocol::ProtocolParams { s: 200, ..Default::default() }, ..Default::default() };
        let grid = SweepGrid { f: vec![[0.10, 0.05, 0.10], [0.10, 0.15, 0.05]], ..Default::default() };
        let report = run_sweep(&grid, &base);
        assert!(matches!(report.rows[0].status, PointStatus::Skipped(_)));
        assert_eq!(report.rows[1].status, PointStatus::Completed);
    }
}
