use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    GoalReached,
    StepLimit,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    /// Stopped at something that was not the goal.
    Detection,
    /// The goal was never detected.
    NotFound,
    /// The detected goal could not be reached by any plan.
    TargetSurrounded,
    /// The goal was detected and plannable but not reached in time.
    PathPlanning,
    /// The agent kept colliding with unmapped geometry.
    MapQuality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: usize,
    /// Sum of executed forward translations, meters.
    pub traveled_length: f64,
    /// Oracle geodesic length, meters; absent for invalid episodes.
    pub shortest_length: Option<f64>,
    pub spl: f64,
    pub termination_reason: TerminationReason,
    pub failure_category: Option<FailureCategory>,
}

impl EpisodeResult {
    pub fn is_valid(&self) -> bool {
        self.termination_reason != TerminationReason::Invalid
    }
}

/// Success weighted by path length: `l / max(p, l)` on success, else 0.
/// A zero-length optimal path walked with zero length scores 1.
pub fn spl(success: bool, shortest: f64, traveled: f64) -> f64 {
    if !success {
        return 0.0;
    }
    let denom = traveled.max(shortest);
    if denom <= 0.0 {
        1.0
    } else {
        (shortest / denom).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sr: f64,
    pub spl: f64,
    pub valid: usize,
    pub invalid: usize,
}

/// SR and mean SPL over valid episodes. Values are summed in sorted order so
/// the floating-point result does not depend on episode order.
pub fn aggregate(results: &[EpisodeResult]) -> Result<Aggregate> {
    let valid: Vec<&EpisodeResult> = results.iter().filter(|r| r.is_valid()).collect();
    if valid.is_empty() {
        return Err(Error::NoValidEpisodes);
    }
    let n = valid.len() as f64;
    let successes = valid.iter().filter(|r| r.success).count() as f64;
    let mut spls: Vec<f64> = valid.iter().map(|r| r.spl).collect();
    spls.sort_by(f64::total_cmp);
    Ok(Aggregate {
        sr: successes / n,
        spl: spls.iter().sum::<f64>() / n,
        valid: valid.len(),
        invalid: results.len() - valid.len(),
    })
}
