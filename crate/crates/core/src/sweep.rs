//! Two-parameter grids of scenario runs for phase diagrams.

use crate::io::ScenarioConfig;
use crate::metrics::{OutcomeClass, ScenarioSummary, SummaryOptions};
use crate::model::{self, ModelError, Scenario};
use crate::solver::Method;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::thread;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("invalid axis: {0}")]
    InvalidAxis(String),
    #[error("axes `{0}` and `{1}` vary the same parameter")]
    OverlappingAxes(SweepParameter, SweepParameter),
    #[error("asymmetry report needs an onset_b axis symmetric about 0: {0}")]
    AxisError(String),
    #[error("worker count must be positive")]
    NoWorkers,
    #[error(transparent)]
    InvalidBase(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Sharing threshold.
    Theta,
    /// Onset of community B relative to A (days).
    OnsetB,
    SMaxA,
    SMaxB,
    /// Maximum stock of both communities together.
    SMaxBoth,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 5] = [
        SweepParameter::Theta,
        SweepParameter::OnsetB,
        SweepParameter::SMaxA,
        SweepParameter::SMaxB,
        SweepParameter::SMaxBoth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Theta => "theta",
            SweepParameter::OnsetB => "onset_b",
            SweepParameter::SMaxA => "s_max_a",
            SweepParameter::SMaxB => "s_max_b",
            SweepParameter::SMaxBoth => "s_max_both",
        }
    }

    pub fn apply(self, sc: &mut Scenario, value: f64) {
        match self {
            SweepParameter::Theta => sc.sharing.theta = value,
            SweepParameter::OnsetB => sc.community_b.onset = value,
            SweepParameter::SMaxA => sc.community_a.s_max = value,
            SweepParameter::SMaxB => sc.community_b.s_max = value,
            SweepParameter::SMaxBoth => {
                sc.community_a.s_max = value;
                sc.community_b.s_max = value;
            }
        }
    }

    fn touches_s_max_a(self) -> bool {
        matches!(self, SweepParameter::SMaxA | SweepParameter::SMaxBoth)
    }

    fn touches_s_max_b(self) -> bool {
        matches!(self, SweepParameter::SMaxB | SweepParameter::SMaxBoth)
    }

    pub fn overlaps(self, other: SweepParameter) -> bool {
        self == other
            || (self.touches_s_max_a() && other.touches_s_max_a())
            || (self.touches_s_max_b() && other.touches_s_max_b())
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParameter {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| SweepError::InvalidAxis(format!("unknown parameter `{s}`")))
    }
}

/// Evenly spaced values of one parameter, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SweepAxis {
    pub fn new(parameter: SweepParameter, min: f64, max: f64, steps: usize) -> Result<Self, SweepError> {
        let axis = Self {
            parameter,
            min,
            max,
            steps,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let name = self.parameter;
        let bad = |msg: String| Err(SweepError::InvalidAxis(format!("{name}: {msg}")));
        if self.steps < 2 {
            return bad(format!("steps must be >= 2 (got {})", self.steps));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min >= self.max {
            return bad(format!("need finite min < max (got {}..{})", self.min, self.max));
        }
        match self.parameter {
            SweepParameter::Theta if self.min < 0.0 || self.max > 1.0 => {
                bad(format!("theta must stay within [0, 1] (got {}..{})", self.min, self.max))
            }
            SweepParameter::SMaxA | SweepParameter::SMaxB | SweepParameter::SMaxBoth if self.min <= 0.0 => {
                bad(format!("maximum stock must be > 0 (got {})", self.min))
            }
            _ => Ok(()),
        }
    }

    /// Value at grid index `k`; the last index maps exactly to `max`.
    pub fn value(&self, k: usize) -> f64 {
        if self.steps <= 1 {
            return self.min;
        }
        if k + 1 == self.steps {
            return self.max;
        }
        self.min + (self.max - self.min) * k as f64 / (self.steps - 1) as f64
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(|k| self.value(k))
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.parameter, self.min, self.max, self.steps)
    }
}

/// Parses `parameter:min:max:steps`.
impl FromStr for SweepAxis {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [param, min, max, steps] = parts.as_slice() else {
            return Err(SweepError::InvalidAxis(format!(
                "`{s}` is not of the form parameter:min:max:steps"
            )));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| SweepError::InvalidAxis(format!("`{v}` is not a number in `{s}`")))
        };
        let steps = steps
            .trim()
            .parse::<usize>()
            .map_err(|_| SweepError::InvalidAxis(format!("`{steps}` is not a step count in `{s}`")))?;
        SweepAxis::new(param.trim().parse()?, num(min)?, num(max)?, steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub ix: usize,
    pub iy: usize,
    pub x: f64,
    pub y: f64,
    pub summary: ScenarioSummary,
    /// Why the run stopped early, if it did.
    pub failure: Option<String>,
}

impl PhasePoint {
    pub fn outcome(&self) -> OutcomeClass {
        self.summary.outcome
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub engine_version: String,
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub horizon: f64,
    pub dense_output_dt: f64,
    pub depletion_threshold: f64,
    pub healthcare_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_x: SweepAxis,
    pub axis_y: SweepAxis,
    pub base: ScenarioConfig,
    /// Row-major: index `iy * nx + ix`.
    pub points: Vec<PhasePoint>,
    pub metadata: SweepMetadata,
}

impl SweepResult {
    pub fn nx(&self) -> usize {
        self.axis_x.steps
    }

    pub fn ny(&self) -> usize {
        self.axis_y.steps
    }

    pub fn point(&self, ix: usize, iy: usize) -> &PhasePoint {
        &self.points[iy * self.nx() + ix]
    }

    pub fn count(&self, outcome: OutcomeClass) -> usize {
        self.points.iter().filter(|p| p.outcome() == outcome).count()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.failure.is_some()).count()
    }
}

fn evaluate_cell(base: &ScenarioConfig, ax: &SweepAxis, ay: &SweepAxis, ix: usize, iy: usize, opts: &SummaryOptions) -> PhasePoint {
    let (x, y) = (ax.value(ix), ay.value(iy));
    let mut scenario = base.scenario;
    ax.parameter.apply(&mut scenario, x);
    ay.parameter.apply(&mut scenario, y);
    let settings = scenario.integrator_settings(&base.run);
    let (summary, failure) = match model::simulate(&scenario, &settings) {
        Ok(run) => (
            ScenarioSummary::from_trajectory(&run.trajectory, opts),
            run.failure.map(|e| e.to_string()),
        ),
        Err(e) => (ScenarioSummary::unavailable(), Some(e.to_string())),
    };
    if let Some(reason) = &failure {
        log::warn!("cell ({ix}, {iy}) at {}={x}, {}={y}: {reason}", ax.parameter, ay.parameter);
    }
    PhasePoint {
        ix,
        iy,
        x,
        y,
        summary,
        failure,
    }
}

/// Evaluate every grid cell. Cells are dealt to workers round-robin and
/// merged by grid index, so the result does not depend on `workers`.
pub fn run_sweep(base: &ScenarioConfig, ax: &SweepAxis, ay: &SweepAxis, workers: usize) -> Result<SweepResult, SweepError> {
    if workers == 0 {
        return Err(SweepError::NoWorkers);
    }
    ax.validate()?;
    ay.validate()?;
    if ax.parameter.overlaps(ay.parameter) {
        return Err(SweepError::OverlappingAxes(ax.parameter, ay.parameter));
    }
    base.scenario.validate()?;
    base.run.validate("numerics")?;
    for (x, y) in [(ax.min, ay.min), (ax.max, ay.max), (ax.min, ay.max), (ax.max, ay.min)] {
        let mut corner = base.scenario;
        ax.parameter.apply(&mut corner, x);
        ay.parameter.apply(&mut corner, y);
        corner.validate()?;
    }

    let opts = SummaryOptions::default();
    let (nx, ny) = (ax.steps, ay.steps);
    let cells = nx * ny;
    let workers = workers.min(cells);
    let mut slots: Vec<Option<PhasePoint>> = vec![None; cells];

    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let opts = &opts;
                scope.spawn(move || {
                    (w..cells)
                        .step_by(workers)
                        .map(|k| (k, evaluate_cell(base, ax, ay, k % nx, k / nx, opts)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, p) in h.join().expect("sweep worker panicked") {
                slots[k] = Some(p);
            }
        }
    });

    let points: Vec<PhasePoint> = slots.into_iter().map(|p| p.expect("every cell evaluated")).collect();
    Ok(SweepResult {
        axis_x: *ax,
        axis_y: *ay,
        base: *base,
        points,
        metadata: SweepMetadata {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            method: base.run.method,
            rel_tol: base.run.rel_tol,
            abs_tol: base.run.abs_tol,
            horizon: base.run.horizon,
            dense_output_dt: base.run.dense_output_dt,
            depletion_threshold: opts.depletion_threshold,
            healthcare_cap: opts.healthcare_cap,
        },
    })
}

/// Outcomes at `+Δt` and `−Δt` for one value of the other axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymmetryPair {
    pub other: f64,
    pub plus: OutcomeClass,
    pub minus: OutcomeClass,
    pub infected_ratio_mean_plus: f64,
    pub infected_ratio_mean_minus: f64,
}

impl AsymmetryPair {
    /// True when `−Δt` gives the label-swapped outcome of `+Δt`.
    pub fn mirrored(&self) -> bool {
        self.minus == self.plus.mirrored()
    }

    pub fn infected_ratio_diff(&self) -> f64 {
        (self.infected_ratio_mean_plus - self.infected_ratio_mean_minus).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymmetryEntry {
    pub abs_onset: f64,
    pub pairs: Vec<AsymmetryPair>,
}

impl AsymmetryEntry {
    pub fn all_mirrored(&self) -> bool {
        self.pairs.iter().all(AsymmetryPair::mirrored)
    }

    pub fn max_infected_ratio_diff(&self) -> f64 {
        self.pairs.iter().map(AsymmetryPair::infected_ratio_diff).fold(0.0, f64::max)
    }
}

/// Pair every `(other, +Δt)` cell with `(other, −Δt)`; one entry per
/// distinct `|Δt|`, in increasing order.
pub fn asymmetry_report(res: &SweepResult) -> Result<Vec<AsymmetryEntry>, SweepError> {
    let onset_is_x = match (res.axis_x.parameter, res.axis_y.parameter) {
        (SweepParameter::OnsetB, _) => true,
        (_, SweepParameter::OnsetB) => false,
        _ => return Err(SweepError::AxisError("no onset_b axis".into())),
    };
    let (onset, other) = if onset_is_x {
        (&res.axis_x, &res.axis_y)
    } else {
        (&res.axis_y, &res.axis_x)
    };
    let n = onset.steps;
    let tol = 1e-9 * onset.max.abs().max(1.0);
    for k in 0..n {
        if (onset.value(k) + onset.value(n - 1 - k)).abs() > tol {
            return Err(SweepError::AxisError(format!(
                "values {} and {} are not opposite",
                onset.value(k),
                onset.value(n - 1 - k)
            )));
        }
    }
    let cell = |k_onset: usize, k_other: usize| {
        if onset_is_x {
            res.point(k_onset, k_other)
        } else {
            res.point(k_other, k_onset)
        }
    };
    Ok((n / 2..n)
        .map(|kp| {
            let km = n - 1 - kp;
            let pairs = (0..other.steps)
                .map(|j| {
                    let (plus, minus) = (cell(kp, j), cell(km, j));
                    AsymmetryPair {
                        other: other.value(j),
                        plus: plus.outcome(),
                        minus: minus.outcome(),
                        infected_ratio_mean_plus: plus.summary.infected_ratio_mean,
                        infected_ratio_mean_minus: minus.summary.infected_ratio_mean,
                    }
                })
                .collect();
            AsymmetryEntry {
                abs_onset: onset.value(kp).abs(),
                pairs,
            }
        })
        .collect())
}
