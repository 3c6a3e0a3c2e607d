//! Thresholding-bandit high-level planner: per-cell confidence intervals,
//! top-D goal selection and monotone keep/reject updates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::environment::{CellIndex, Scenario};
use crate::error::{domain, Result};

/// Sufficient statistics of a cell's measurement history.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellStats {
    pub samples: u64,
    pub successes: u64,
}

impl CellStats {
    /// Empirical mean, or `None` before the first sample.
    pub fn mean(&self) -> Option<f64> {
        (self.samples > 0).then(|| self.successes as f64 / self.samples as f64)
    }
}

/// Confidence radius `U(n)` for a cell with `samples` observations.
///
/// Infinite for an unvisited cell.
pub fn confidence_radius(samples: u64, n_candidates: usize, delta: f64) -> f64 {
    if samples == 0 {
        return f64::INFINITY;
    }
    let n = samples as f64;
    let iterated = (2.0 * n).log2().ln();
    let union = (12.0 * n_candidates as f64 / delta).ln();
    2.0 * ((2.0 * iterated + union) / (2.0 * n)).sqrt()
}

/// Optimistic score `J = mean + U`, infinite for an unvisited cell.
pub fn score(stats: CellStats, n_candidates: usize, delta: f64) -> f64 {
    match stats.mean() {
        None => f64::INFINITY,
        Some(m) => m + confidence_radius(stats.samples, n_candidates, delta),
    }
}

/// Threshold, tolerance and error probability used by the set updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl Thresholds {
    pub fn of(scenario: &Scenario) -> Self {
        Self { theta: scenario.theta(), epsilon: scenario.epsilon(), delta: scenario.delta() }
    }
}

/// The high-level planner's entire memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BanditState {
    pub stats: BTreeMap<CellIndex, CellStats>,
    pub keep: BTreeSet<CellIndex>,
    pub reject: BTreeSet<CellIndex>,
    pub epoch: u64,
}

impl BanditState {
    /// Fresh state over the given candidate cells.
    pub fn new(candidates: impl IntoIterator<Item = CellIndex>) -> Self {
        Self {
            stats: candidates.into_iter().map(|c| (c, CellStats::default())).collect(),
            keep: BTreeSet::new(),
            reject: BTreeSet::new(),
            epoch: 0,
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.candidates().iter().copied())
    }

    pub fn n_candidates(&self) -> usize {
        self.stats.len()
    }

    pub fn is_classified(&self, l: CellIndex) -> bool {
        self.keep.contains(&l) || self.reject.contains(&l)
    }

    /// Candidate cells that are in neither set, ascending.
    pub fn unclassified(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.stats.keys().copied().filter(|l| !self.is_classified(*l))
    }

    /// Top `d_goals` unclassified cells by descending score, ties by ascending
    /// index. Empty when every cell is classified.
    pub fn select_epoch_goals(&self, d_goals: usize, delta: f64) -> Result<Vec<CellIndex>> {
        if d_goals == 0 {
            return domain("epoch goal count D must be at least 1");
        }
        let n = self.n_candidates();
        let mut scored: Vec<(f64, CellIndex)> =
            self.unclassified().map(|l| (score(self.stats[&l], n, delta), l)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(scored.into_iter().take(d_goals).map(|(_, l)| l).collect())
    }

    /// Adds a batch of binary outcomes to the history of `l`.
    pub fn record_samples(&mut self, l: CellIndex, batch: &[bool]) -> Result<()> {
        if batch.is_empty() {
            return domain("sample batch must be nonempty");
        }
        let Some(stats) = self.stats.get_mut(&l) else {
            return domain(format!("cell {l} is not a candidate"));
        };
        stats.samples += batch.len() as u64;
        stats.successes += batch.iter().filter(|&&b| b).count() as u64;
        Ok(())
    }

    /// Classifies every unclassified cell whose interval has left the tolerance
    /// band and advances the epoch counter. A cell meeting both rules is kept.
    pub fn update_sets(&mut self, t: Thresholds) {
        let n = self.n_candidates();
        let mut newly_kept = Vec::new();
        let mut newly_rejected = Vec::new();
        for l in self.unclassified() {
            let stats = self.stats[&l];
            let Some(m) = stats.mean() else { continue };
            let u = confidence_radius(stats.samples, n, t.delta);
            if m - u >= t.theta - t.epsilon {
                newly_kept.push(l);
            } else if m + u <= t.theta + t.epsilon {
                newly_rejected.push(l);
            }
        }
        self.keep.extend(newly_kept);
        self.reject.extend(newly_rejected);
        self.epoch += 1;
    }

    pub fn is_terminated(&self) -> bool {
        self.keep.len() + self.reject.len() == self.n_candidates()
    }
}
