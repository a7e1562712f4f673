//! Trajectory summaries: infected ratios, stock depletion, outcome classes and
//! the healthcare-cap metric.

use crate::model::{Community, Trajectory};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_DEPLETION_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_HEALTHCARE_CAP: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    /// The run did not finish or an epidemic was still active at the end.
    /// The value computed from the available samples is attached.
    #[error("trajectory is incomplete (value from available samples: {value})")]
    IncompleteRun { value: f64 },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
}

/// Phase-diagram state of a two-community run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OutcomeClass {
    /// Both communities depleted their stock.
    Red,
    /// Only community A depleted.
    WhiteA,
    /// Only community B depleted.
    WhiteB,
    /// Neither community depleted.
    Blue,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 4] = [
        OutcomeClass::Red,
        OutcomeClass::WhiteA,
        OutcomeClass::WhiteB,
        OutcomeClass::Blue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::Red => "RED",
            OutcomeClass::WhiteA => "WHITE_A",
            OutcomeClass::WhiteB => "WHITE_B",
            OutcomeClass::Blue => "BLUE",
        }
    }

    pub fn is_white(self) -> bool {
        matches!(self, OutcomeClass::WhiteA | OutcomeClass::WhiteB)
    }

    /// 2 for Red, 1 for either White, 0 for Blue.
    pub fn severity(self) -> u8 {
        match self {
            OutcomeClass::Red => 2,
            OutcomeClass::WhiteA | OutcomeClass::WhiteB => 1,
            OutcomeClass::Blue => 0,
        }
    }

    /// The same outcome with the community labels exchanged.
    pub fn mirrored(self) -> OutcomeClass {
        match self {
            OutcomeClass::WhiteA => OutcomeClass::WhiteB,
            OutcomeClass::WhiteB => OutcomeClass::WhiteA,
            other => other,
        }
    }
}

impl fmt::Display for OutcomeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OutcomeClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown outcome `{s}`"))
    }
}

pub fn classify(depleted_a: bool, depleted_b: bool) -> OutcomeClass {
    match (depleted_a, depleted_b) {
        (true, true) => OutcomeClass::Red,
        (true, false) => OutcomeClass::WhiteA,
        (false, true) => OutcomeClass::WhiteB,
        (false, false) => OutcomeClass::Blue,
    }
}

/// Fraction of community `c` that was ever infected, `(n − u(t_end)) / n`.
pub fn infected_ratio(traj: &Trajectory, c: Community) -> Result<f64, MetricsError> {
    let last = traj.last_state().ok_or(MetricsError::EmptyTrajectory)?;
    let n = traj.scenario.community(c).n;
    let value = ((n - last.community(c).u) / n).clamp(0.0, 1.0);
    if traj.complete {
        Ok(value)
    } else {
        Err(MetricsError::IncompleteRun { value })
    }
}

/// Infected ratio whether or not the run completed.
pub fn infected_ratio_lenient(traj: &Trajectory, c: Community) -> f64 {
    match infected_ratio(traj, c) {
        Ok(v) | Err(MetricsError::IncompleteRun { value: v }) => v,
        Err(MetricsError::EmptyTrajectory) => 0.0,
    }
}

/// Lowest sampled `s / s_max` of community `c` (1 for an empty trajectory).
pub fn min_stock_ratio(traj: &Trajectory, c: Community) -> f64 {
    let s_max = traj.scenario.community(c).s_max;
    traj.community(c).map(|y| y.s / s_max).fold(1.0, f64::min)
}

/// True iff the sampled stock ratio of `c` ever drops below `delta`.
pub fn stock_depleted(traj: &Trajectory, c: Community, delta: f64) -> bool {
    assert!(delta > 0.0 && delta <= 0.05, "depletion threshold must lie in (0, 0.05]");
    min_stock_ratio(traj, c) < delta
}

pub fn peak_infected(traj: &Trajectory, c: Community) -> f64 {
    traj.community(c).map(|y| y.i).fold(0.0, f64::max)
}

/// New infections accumulated while more than `cap_fraction · n` people
/// are infected, as a fraction of `n`. Trapezoid rule over the samples;
/// samples below the cap contribute zero.
pub fn unserved_infected_ratio(traj: &Trajectory, c: Community, cap_fraction: f64) -> f64 {
    assert!(cap_fraction > 0.0 && cap_fraction <= 1.0, "cap fraction must lie in (0, 1]");
    let n = traj.scenario.community(c).n;
    let cap = cap_fraction * n;
    let k = c.index();
    let flux = |j: usize| {
        if traj.states[j].community(c).i > cap {
            traj.aux[j].incidence[k].max(0.0)
        } else {
            0.0
        }
    };
    let total: f64 = (1..traj.len())
        .map(|j| 0.5 * (flux(j - 1) + flux(j)) * (traj.times[j] - traj.times[j - 1]))
        .sum();
    total / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub infected_ratio_a: f64,
    pub infected_ratio_b: f64,
    pub infected_ratio_mean: f64,
    pub depleted_a: bool,
    pub depleted_b: bool,
    pub min_stock_ratio_a: f64,
    pub min_stock_ratio_b: f64,
    pub unserved_ratio_a: f64,
    pub unserved_ratio_b: f64,
    pub peak_infected_a: f64,
    pub peak_infected_b: f64,
    pub complete: bool,
    pub outcome: OutcomeClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryOptions {
    pub depletion_threshold: f64,
    pub healthcare_cap: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            depletion_threshold: DEFAULT_DEPLETION_THRESHOLD,
            healthcare_cap: DEFAULT_HEALTHCARE_CAP,
        }
    }
}

impl ScenarioSummary {
    /// Placeholder for a cell whose run could not be started; all ratios NaN.
    pub fn unavailable() -> Self {
        Self {
            infected_ratio_a: f64::NAN,
            infected_ratio_b: f64::NAN,
            infected_ratio_mean: f64::NAN,
            depleted_a: false,
            depleted_b: false,
            min_stock_ratio_a: f64::NAN,
            min_stock_ratio_b: f64::NAN,
            unserved_ratio_a: f64::NAN,
            unserved_ratio_b: f64::NAN,
            peak_infected_a: f64::NAN,
            peak_infected_b: f64::NAN,
            complete: false,
            outcome: OutcomeClass::Blue,
        }
    }

    pub fn from_trajectory(traj: &Trajectory, opts: &SummaryOptions) -> Self {
        let ra = infected_ratio_lenient(traj, Community::A);
        let rb = infected_ratio_lenient(traj, Community::B);
        let min_a = min_stock_ratio(traj, Community::A);
        let min_b = min_stock_ratio(traj, Community::B);
        let depleted_a = min_a < opts.depletion_threshold;
        let depleted_b = min_b < opts.depletion_threshold;
        Self {
            infected_ratio_a: ra,
            infected_ratio_b: rb,
            infected_ratio_mean: 0.5 * (ra + rb),
            depleted_a,
            depleted_b,
            min_stock_ratio_a: min_a,
            min_stock_ratio_b: min_b,
            unserved_ratio_a: unserved_infected_ratio(traj, Community::A, opts.healthcare_cap),
            unserved_ratio_b: unserved_infected_ratio(traj, Community::B, opts.healthcare_cap),
            peak_infected_a: peak_infected(traj, Community::A),
            peak_infected_b: peak_infected(traj, Community::B),
            complete: traj.complete,
            outcome: classify(depleted_a, depleted_b),
        }
    }
}
