//! Two coupled communities, each with an SIR epidemic driving a
//! demand/stock/production (DSP) chain for protective equipment, plus a
//! threshold switch that moves stock from the better-supplied community to
//! the one in need.
//!
//! State layout (12 components): `[u, i, rec, d, s, p]` for community A
//! followed by the same six for community B.

use crate::solver::{self, sigmoid, IntegratorSettings, Method, OdeSystem, SolverError, SolverStats};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const COMMUNITY_DIM: usize = 6;
pub const STATE_DIM: usize = 2 * COMMUNITY_DIM;

/// Days simulated before the earliest onset.
pub const LEAD_IN: f64 = 5.0;

/// Width of the smooth stock floor/ceiling band, as a fraction of `s_max`.
const CLAMP_BAND: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("integration must start at or before t = {required} (got {t_start})")]
    InvalidWindow { t_start: f64, required: f64 },
    #[error("right-hand side is not finite at t = {t}")]
    NonFiniteDerivative { t: f64 },
    #[error(transparent)]
    Integration(#[from] SolverError),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Community {
    A,
    B,
}

impl Community {
    pub const BOTH: [Community; 2] = [Community::A, Community::B];

    pub fn index(self) -> usize {
        match self {
            Community::A => 0,
            Community::B => 1,
        }
    }

    pub fn other(self) -> Community {
        match self {
            Community::A => Community::B,
            Community::B => Community::A,
        }
    }
}

impl fmt::Display for Community {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Community::A => "A",
            Community::B => "B",
        })
    }
}

/// Disease constants shared by both communities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    /// Basic reproduction number.
    pub r0: f64,
    /// Recovery rate (1/day).
    pub gamma: f64,
    /// Fractional reduction of the reproduction number while stock lasts.
    pub r: f64,
    /// Protective-equipment units used per infected individual per day.
    pub w: f64,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        Self {
            r0: 2.3,
            gamma: 1.0 / 6.0,
            r: 0.4,
            w: 4.0,
        }
    }
}

impl EpidemicParams {
    pub fn validate(&self, section: &str) -> Result<(), ModelError> {
        let f = |k: &str| format!("{section}.{k}");
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return Err(invalid(f("r0"), "must be > 0"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid(f("gamma"), "must be > 0"));
        }
        if !(self.r.is_finite() && (0.0..1.0).contains(&self.r)) {
            return Err(invalid(f("r"), "must lie in [0, 1)"));
        }
        if !(self.w.is_finite() && self.w >= 0.0) {
            return Err(invalid(f("w"), "must be >= 0"));
        }
        Ok(())
    }
}

/// Per-community population and supply-chain constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommunityParams {
    pub n: f64,
    pub s_max: f64,
    /// Baseline production (units/day).
    pub p0: f64,
    pub p_max: f64,
    /// Baseline demand (units/day); equals `p0` at equilibrium.
    pub d0: f64,
    /// Epidemic onset (days). Community A conventionally starts at 0.
    pub onset: f64,
}

impl Default for CommunityParams {
    fn default() -> Self {
        Self::with_stock(3e7)
    }
}

impl CommunityParams {
    pub const DEFAULT_N: f64 = 1.7e7;
    pub const DEFAULT_P0: f64 = 5e5;

    /// Default community (n = 1.7e7, p0 = d0 = 5e5, p_max = 4 p0) with the
    /// given maximum stock and onset 0.
    pub fn with_stock(s_max: f64) -> Self {
        Self {
            n: Self::DEFAULT_N,
            s_max,
            p0: Self::DEFAULT_P0,
            p_max: 4.0 * Self::DEFAULT_P0,
            d0: Self::DEFAULT_P0,
            onset: 0.0,
        }
    }

    pub fn onset_at(mut self, onset: f64) -> Self {
        self.onset = onset;
        self
    }

    pub fn validate(&self, section: &str) -> Result<(), ModelError> {
        let f = |k: &str| format!("{section}.{k}");
        let positive = [("n", self.n), ("s_max", self.s_max), ("p0", self.p0)];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(f(key), "must be > 0"));
            }
        }
        if !(self.p_max.is_finite() && self.p_max >= self.p0) {
            return Err(invalid(f("p_max"), "must be >= p0"));
        }
        if !self.d0.is_finite() || (self.d0 - self.p0).abs() > 1e-12 * self.p0 {
            return Err(invalid(f("d0"), "baseline demand must equal p0"));
        }
        if !self.onset.is_finite() {
            return Err(invalid(f("onset"), "must be finite"));
        }
        Ok(())
    }

    /// Typical magnitude of each state component, used to scale the
    /// absolute integration tolerance.
    fn component_scale(&self) -> [f64; COMMUNITY_DIM] {
        [self.n, self.n, self.n, self.p_max, self.s_max, self.p_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharingParams {
    /// Stock ratio below which a community asks for help and above which it
    /// can give.
    pub theta: f64,
    pub k_switch: f64,
    pub enabled: bool,
}

impl Default for SharingParams {
    fn default() -> Self {
        Self {
            theta: 1.0,
            k_switch: 1000.0,
            enabled: true,
        }
    }
}

impl SharingParams {
    pub fn with_threshold(theta: f64) -> Self {
        Self {
            theta,
            ..Self::default()
        }
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    /// Sharing is off when disabled and also at θ = 1: no community can
    /// hold a stock ratio strictly above 1, so there is never a donor.
    pub fn is_active(&self) -> bool {
        self.enabled && self.theta < 1.0
    }

    pub fn validate(&self, section: &str) -> Result<(), ModelError> {
        if !(self.theta.is_finite() && (0.0..=1.0).contains(&self.theta)) {
            return Err(invalid(format!("{section}.theta"), "must lie in [0, 1]"));
        }
        if !(self.k_switch.is_finite() && self.k_switch > 0.0) {
            return Err(invalid(format!("{section}.k_switch"), "must be > 0"));
        }
        Ok(())
    }
}

/// How demand responds to the epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DemandMode {
    /// `d = d0 + w (i − i(0))`: demand follows the current number infected.
    #[default]
    TracksInfected,
    /// `dd/dt = w i`: demand accumulates infected-days and never returns to
    /// baseline.
    IntegratesInfected,
}

impl DemandMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DemandMode::TracksInfected => "tracks_infected",
            DemandMode::IntegratesInfected => "integrates_infected",
        }
    }
}

impl fmt::Display for DemandMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemandMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tracks_infected" => Ok(DemandMode::TracksInfected),
            "integrates_infected" => Ok(DemandMode::IntegratesInfected),
            other => Err(format!(
                "unknown demand mode `{other}` (expected tracks_infected or integrates_infected)"
            )),
        }
    }
}

/// Steepness and offsets of the smooth step functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelNumerics {
    /// Steepness of the onset gate (1/day).
    pub k_delay: f64,
    /// Steepness of the stock-availability step in the reproduction number
    /// (1/unit).
    pub k_stock_step: f64,
    /// Midpoint of the stock-availability step (units).
    pub s_offset: f64,
    /// Steepness of the stock floor/ceiling, relative to a band of
    /// 0.1% of `s_max`.
    pub k_clamp: f64,
    pub demand_mode: DemandMode,
}

impl Default for ModelNumerics {
    fn default() -> Self {
        Self {
            k_delay: 1.0,
            k_stock_step: 1.0,
            s_offset: 1.0,
            k_clamp: 1.0,
            demand_mode: DemandMode::TracksInfected,
        }
    }
}

impl ModelNumerics {
    pub fn validate(&self, section: &str) -> Result<(), ModelError> {
        let fields = [
            ("k_delay", self.k_delay),
            ("k_stock_step", self.k_stock_step),
            ("s_offset", self.s_offset),
            ("k_clamp", self.k_clamp),
        ];
        for (key, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{section}.{key}"), "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CommunityState {
    pub u: f64,
    pub i: f64,
    pub rec: f64,
    pub d: f64,
    pub s: f64,
    pub p: f64,
}

impl CommunityState {
    fn from_slice(v: &[f64]) -> Self {
        Self {
            u: v[0],
            i: v[1],
            rec: v[2],
            d: v[3],
            s: v[4],
            p: v[5],
        }
    }

    fn write(&self, out: &mut [f64]) {
        out[..COMMUNITY_DIM].copy_from_slice(&[self.u, self.i, self.rec, self.d, self.s, self.p]);
    }

    pub fn population(&self) -> f64 {
        self.u + self.i + self.rec
    }
}

/// Full system state (or its time derivative).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub a: CommunityState,
    pub b: CommunityState,
}

impl SystemState {
    pub fn from_slice(v: &[f64]) -> Self {
        assert_eq!(v.len(), STATE_DIM, "state must have {STATE_DIM} components");
        Self {
            a: CommunityState::from_slice(&v[..COMMUNITY_DIM]),
            b: CommunityState::from_slice(&v[COMMUNITY_DIM..]),
        }
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        self.a.write(&mut out[..COMMUNITY_DIM]);
        self.b.write(&mut out[COMMUNITY_DIM..]);
        out
    }

    pub fn community(&self, c: Community) -> &CommunityState {
        match c {
            Community::A => &self.a,
            Community::B => &self.b,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Reproduction number given the current stock: `r0 (1 − σ(s − s_offset) r)`.
pub fn effective_reproduction(ep: &EpidemicParams, s: f64, num: &ModelNumerics) -> f64 {
    ep.r0 * (1.0 - sigmoid(s - num.s_offset, num.k_stock_step) * ep.r)
}

/// Smooth "exactly one ratio below θ" detector: ≈1 when exactly one of the
/// two stock ratios is under the threshold, ≈0 when both are above or both
/// below. Saturates once both ratios are more than about 5/k from θ.
pub fn switch(ratio_a: f64, ratio_b: f64, theta: f64, k: f64) -> f64 {
    let both_above = sigmoid(sigmoid(ratio_a - theta, k) + sigmoid(ratio_b - theta, k) - 1.5, k);
    let both_below = sigmoid(sigmoid(theta - ratio_a, k) + sigmoid(theta - ratio_b, k) - 1.5, k);
    1.0 - both_above - both_below
}

/// Transfer rate into community A (units/day) that would equalize the two
/// stock ratios; community B receives the negative of this.
pub fn share_flow(s_a: f64, s_b: f64, ca: &CommunityParams, cb: &CommunityParams) -> f64 {
    (ca.s_max + cb.s_max) * (s_b / cb.s_max - s_a / ca.s_max) / 2.0
}

/// Pre-epidemic equilibrium with one infected individual in each community.
pub fn initial_state(ca: &CommunityParams, cb: &CommunityParams) -> SystemState {
    let community = |c: &CommunityParams| CommunityState {
        u: c.n - 1.0,
        i: 1.0,
        rec: 0.0,
        d: c.d0,
        s: c.s_max,
        p: c.p0,
    };
    SystemState {
        a: community(ca),
        b: community(cb),
    }
}

/// Integration tolerances and horizon for a scenario run. The time window is
/// derived from the onsets, see [`Scenario::integrator_settings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub dense_output_dt: f64,
    /// Days simulated after the later onset.
    pub horizon: f64,
    pub method: Method,
    pub max_steps: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-6,
            h_init: 1e-3,
            h_min: 1e-12,
            h_max: 0.25,
            dense_output_dt: 0.5,
            horizon: 600.0,
            method: Method::Rodas4,
            max_steps: 2_000_000,
        }
    }
}

impl RunSettings {
    pub fn validate(&self, section: &str) -> Result<(), ModelError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!("{section}.horizon"), "must be > 0"));
        }
        let probe = IntegratorSettings {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            h_init: self.h_init,
            h_min: self.h_min,
            h_max: self.h_max,
            t_start: 0.0,
            t_end: self.horizon,
            dense_output_dt: self.dense_output_dt,
            method: self.method,
            max_steps: self.max_steps,
        };
        probe
            .validate()
            .map_err(|e| invalid(section.to_string(), e.to_string()))
    }
}

/// Everything that defines the dynamics of one two-community run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Scenario {
    pub epidemic: EpidemicParams,
    pub community_a: CommunityParams,
    pub community_b: CommunityParams,
    pub sharing: SharingParams,
    pub numerics: ModelNumerics,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.epidemic.validate("epidemic")?;
        self.community_a.validate("community_a")?;
        self.community_b.validate("community_b")?;
        self.sharing.validate("sharing")?;
        self.numerics.validate("numerics")
    }

    pub fn community(&self, c: Community) -> &CommunityParams {
        match c {
            Community::A => &self.community_a,
            Community::B => &self.community_b,
        }
    }

    pub fn initial_state(&self) -> SystemState {
        initial_state(&self.community_a, &self.community_b)
    }

    pub fn component_scale(&self) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        out[..COMMUNITY_DIM].copy_from_slice(&self.community_a.component_scale());
        out[COMMUNITY_DIM..].copy_from_slice(&self.community_b.component_scale());
        out
    }

    pub fn earliest_onset(&self) -> f64 {
        self.community_a.onset.min(self.community_b.onset)
    }

    pub fn latest_onset(&self) -> f64 {
        self.community_a.onset.max(self.community_b.onset)
    }

    /// Integration window `[earliest onset − 5, latest onset + horizon]`.
    pub fn integrator_settings(&self, run: &RunSettings) -> IntegratorSettings {
        IntegratorSettings {
            rel_tol: run.rel_tol,
            abs_tol: run.abs_tol,
            h_init: run.h_init,
            h_min: run.h_min,
            h_max: run.h_max,
            t_start: self.earliest_onset() - LEAD_IN,
            t_end: self.latest_onset() + run.horizon,
            dense_output_dt: run.dense_output_dt,
            method: run.method,
            max_steps: run.max_steps,
        }
    }

    /// The same system with the community labels exchanged. Onsets are
    /// shifted so that the new community A keeps the old A's onset time; the
    /// resulting trajectory equals the original shifted by
    /// `community_b.onset − community_a.onset`.
    pub fn label_swapped(&self) -> Scenario {
        let shift = self.community_b.onset - self.community_a.onset;
        let mut out = *self;
        out.community_a = self.community_b;
        out.community_b = self.community_a;
        out.community_a.onset = self.community_b.onset - shift;
        out.community_b.onset = self.community_a.onset - shift;
        out
    }

    /// Right-hand side of the coupled system.
    pub fn coupled_rhs(&self, t: f64, y: &SystemState) -> Result<SystemState, ModelError> {
        let mut dy = [0.0; STATE_DIM];
        self.eval_into(t, &y.to_array(), &mut dy);
        if dy.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteDerivative { t });
        }
        Ok(SystemState::from_slice(&dy))
    }

    /// Switch value and transfer rate into A (units/day) at a state.
    fn sharing_terms(&self, s_a: f64, s_b: f64) -> (f64, f64) {
        if !self.sharing.is_active() {
            return (0.0, 0.0);
        }
        let ca = &self.community_a;
        let cb = &self.community_b;
        let sw = switch(s_a / ca.s_max, s_b / cb.s_max, self.sharing.theta, self.sharing.k_switch);
        (sw, sw * share_flow(s_a, s_b, ca, cb))
    }

    fn eval_into(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let (s_a, s_b) = (y[4], y[COMMUNITY_DIM + 4]);
        let (_, transfer_a) = self.sharing_terms(s_a, s_b);
        let (ya, yb) = y.split_at(COMMUNITY_DIM);
        let (da, db) = dy.split_at_mut(COMMUNITY_DIM);
        self.community_rhs(t, ya, &self.community_a, transfer_a, da);
        self.community_rhs(t, yb, &self.community_b, -transfer_a, db);
    }

    /// Derivative of one community given the transfer it receives. Returns
    /// the new-infection rate.
    fn community_rhs(&self, t: f64, y: &[f64], c: &CommunityParams, transfer: f64, dy: &mut [f64]) -> f64 {
        let ep = &self.epidemic;
        let num = &self.numerics;
        let (u, i, d, s, p) = (y[0], y[1], y[3], y[4], y[5]);

        let gate = sigmoid(t - c.onset, num.k_delay);
        let beta = effective_reproduction(ep, s, num) * ep.gamma / c.n;
        let incidence = gate * beta * u * i;
        let recovery = gate * ep.gamma * i;
        dy[0] = -incidence;
        dy[1] = incidence - recovery;
        dy[2] = recovery;

        dy[3] = match num.demand_mode {
            DemandMode::TracksInfected => ep.w * dy[1],
            DemandMode::IntegratesInfected => ep.w * i,
        };

        let replenish = (c.p_max - p) * (1.0 - s / c.s_max) * sigmoid(c.s_max - s, 1.0);
        let overshoot = (p - d) * sigmoid(p - d, 1.0);
        // The production cap only limits increases; a falling demand is
        // followed once it is back within capacity.
        let rise = dy[3].max(0.0) + replenish;
        let fall = dy[3].min(0.0) * sigmoid(c.p_max - d, 1.0) - overshoot;
        dy[5] = rise * sigmoid(c.p_max - p, 1.0) + fall;

        let net = p - d * sigmoid(s, 1.0) + transfer;
        let k_c = num.k_clamp / (CLAMP_BAND * c.s_max);
        let clamp = if net < 0.0 {
            sigmoid(s, k_c)
        } else {
            sigmoid(c.s_max - s, k_c)
        };
        dy[4] = net * clamp;
        incidence
    }

    /// Auxiliary signals at one state.
    pub fn aux_signals(&self, t: f64, y: &SystemState) -> AuxSignals {
        let (sw, transfer_a) = self.sharing_terms(y.a.s, y.b.s);
        let mut scratch = [0.0; COMMUNITY_DIM];
        let arr = y.to_array();
        let inc_a = self.community_rhs(t, &arr[..COMMUNITY_DIM], &self.community_a, transfer_a, &mut scratch);
        let inc_b = self.community_rhs(t, &arr[COMMUNITY_DIM..], &self.community_b, -transfer_a, &mut scratch);
        AuxSignals {
            switch_value: sw,
            transfer_rate: transfer_a,
            r_effective: [
                effective_reproduction(&self.epidemic, y.a.s, &self.numerics),
                effective_reproduction(&self.epidemic, y.b.s, &self.numerics),
            ],
            incidence: [inc_a, inc_b],
        }
    }
}

impl OdeSystem for Scenario {
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self.eval_into(t, y, dydt)
    }
}

/// Derived signals logged alongside each sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AuxSignals {
    /// Applied switch value (0 when sharing is inactive).
    pub switch_value: f64,
    /// Stock transfer into A (units/day); B receives the negative.
    pub transfer_rate: f64,
    pub r_effective: [f64; 2],
    /// New infections per day.
    pub incidence: [f64; 2],
}

/// Sampled scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scenario: Scenario,
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub aux: Vec<AuxSignals>,
    /// False when the run stopped early or an epidemic was still active
    /// (more than one infected) at the final sample.
    pub complete: bool,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&SystemState> {
        self.states.last()
    }

    pub fn community(&self, c: Community) -> impl Iterator<Item = &CommunityState> + '_ {
        self.states.iter().map(move |s| s.community(c))
    }

    fn from_solution(scenario: &Scenario, sol: solver::Solution, finished: bool) -> Self {
        let states: Vec<SystemState> = sol.iter().map(|(_, y)| SystemState::from_slice(y)).collect();
        let aux = sol
            .times
            .iter()
            .zip(&states)
            .map(|(&t, y)| scenario.aux_signals(t, y))
            .collect();
        let settled = states
            .last()
            .is_some_and(|last| last.a.i <= 1.0 && last.b.i <= 1.0);
        Self {
            scenario: *scenario,
            times: sol.times,
            states,
            aux,
            complete: finished && settled,
            stats: sol.stats,
        }
    }
}

/// Outcome of [`simulate`]: the samples that were produced and, if the
/// integrator gave up, why.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trajectory: Trajectory,
    pub failure: Option<ModelError>,
}

/// Run a scenario and keep partial output on integration failure. Invalid
/// parameters or settings are still returned as `Err`.
pub fn simulate(scenario: &Scenario, settings: &IntegratorSettings) -> Result<ScenarioRun, ModelError> {
    scenario.validate()?;
    let required = scenario.earliest_onset() - LEAD_IN;
    if settings.t_start > required {
        return Err(ModelError::InvalidWindow {
            t_start: settings.t_start,
            required,
        });
    }
    let y0 = scenario.initial_state().to_array();
    let scale = scenario.component_scale();
    let run = solver::integrate_partial(scenario, &y0, &scale, settings)?;
    let finished = run.error.is_none();
    Ok(ScenarioRun {
        trajectory: Trajectory::from_solution(scenario, run.solution, finished),
        failure: run.error.map(ModelError::from),
    })
}

/// Run a scenario to completion.
pub fn run_scenario(scenario: &Scenario, settings: &IntegratorSettings) -> Result<Trajectory, ModelError> {
    let run = simulate(scenario, settings)?;
    match run.failure {
        None => Ok(run.trajectory),
        Some(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn effective_reproduction_examples() {
        let ep = EpidemicParams::default();
        let num = ModelNumerics::default();
        assert_abs_diff_eq!(effective_reproduction(&ep, 1e7, &num), 1.38, epsilon = 1e-6);
        // 2.3 (1 − 0.4 σ(−1)) with σ(−1) = 1 / (1 + e)
        let sigma_m1 = 1.0 / (1.0 + std::f64::consts::E);
        assert_abs_diff_eq!(effective_reproduction(&ep, 0.0, &num), 2.3 * (1.0 - 0.4 * sigma_m1), epsilon = 1e-12);
        assert_abs_diff_eq!(effective_reproduction(&ep, 0.0, &num), 2.05257, epsilon = 1e-4);
        let unprotected = EpidemicParams { r: 0.0, ..ep };
        for s in [-5.0, 0.0, 3.0, 1e9] {
            assert_eq!(effective_reproduction(&unprotected, s, &num), 2.3);
        }
    }

    #[test]
    fn switch_examples() {
        assert_abs_diff_eq!(switch(0.9, 0.9, 0.5, 1000.0), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(switch(0.2, 0.9, 0.5, 1000.0), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(switch(0.9, 0.2, 0.5, 1000.0), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(switch(0.2, 0.2, 0.5, 1000.0), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn switch_reads_ratio_at_threshold_as_a_donor() {
        // A ratio sitting exactly on θ counts as half above and half below,
        // so θ = 1 is treated as sharing off (see `SharingParams::is_active`).
        assert_abs_diff_eq!(switch(0.9, 1.0, 1.0, 1000.0), 0.5, epsilon = 1e-6);
        assert!(!SharingParams::with_threshold(1.0).is_active());
        assert!(SharingParams::with_threshold(0.999).is_active());
    }

    #[test]
    fn share_flow_examples() {
        let c = CommunityParams::with_stock(3e7);
        assert_abs_diff_eq!(share_flow(1.2e7, 2.4e7, &c, &c), 1.2e7, epsilon = 1e-3);
        assert_eq!(share_flow(1.5e7, 1.5e7, &c, &c), 0.0);
        let low = CommunityParams::with_stock(1e7);
        let high = CommunityParams::with_stock(7e7);
        // Equal ratios on unequal communities
        assert_abs_diff_eq!(share_flow(0.5e7, 3.5e7, &low, &high), 0.0, epsilon = 1e-6);
        let f = share_flow(0.2e7, 5e7, &low, &high);
        assert_eq!(share_flow(5e7, 0.2e7, &high, &low), -f);
        assert!(f > 0.0);
    }

    #[test]
    fn initial_state_matches_baseline() {
        let c = CommunityParams {
            p0: 5e7,
            p_max: 2e8,
            d0: 5e7,
            ..CommunityParams::with_stock(3e7)
        };
        let y = initial_state(&c, &c);
        assert_eq!(y.a.u, 16_999_999.0);
        assert_eq!(y.a.i, 1.0);
        assert_eq!(y.a.rec, 0.0);
        assert_eq!(y.a.d, 5e7);
        assert_eq!(y.a.s, 3e7);
        assert_eq!(y.a.p, 5e7);
        assert_eq!(y.a.population(), c.n);
        assert_eq!(y.a, y.b);
    }

    #[test]
    fn pre_onset_state_is_at_equilibrium() {
        let sc = Scenario {
            community_b: CommunityParams::default().onset_at(180.0),
            ..Scenario::default()
        };
        let dy = sc.coupled_rhs(-60.0, &sc.initial_state()).unwrap();
        let scale = sc.component_scale();
        for (v, s) in dy.to_array().iter().zip(scale) {
            assert!(v.abs() < 1e-6 * s, "{dy:?}");
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, sc: &Scenario) -> SystemState {
        let mut community = |c: &CommunityParams| {
            let i = rng.gen_range(0.0..0.3) * c.n;
            let rec = rng.gen_range(0.0..0.5) * c.n;
            CommunityState {
                u: c.n - i - rec,
                i,
                rec,
                d: c.d0 + rng.gen_range(0.0..4.0) * c.p0,
                s: rng.gen_range(0.0..1.0) * c.s_max,
                p: rng.gen_range(c.p0..c.p_max),
            }
        };
        SystemState {
            a: community(&sc.community_a),
            b: community(&sc.community_b),
        }
    }

    #[test]
    fn threshold_one_matches_disabled_sharing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let on = Scenario {
            sharing: SharingParams::with_threshold(1.0),
            ..Scenario::default()
        };
        let off = Scenario {
            sharing: SharingParams::disabled(),
            ..on
        };
        for _ in 0..100 {
            let y = random_state(&mut rng, &on);
            let t = rng.gen_range(-5.0..400.0);
            assert_eq!(on.coupled_rhs(t, &y).unwrap(), off.coupled_rhs(t, &y).unwrap());
        }
    }

    #[test]
    fn sharing_term_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let shared = Scenario {
            community_a: CommunityParams::with_stock(1e7),
            community_b: CommunityParams::with_stock(7e7).onset_at(40.0),
            sharing: SharingParams::with_threshold(0.5),
            ..Scenario::default()
        };
        let isolated = Scenario {
            sharing: SharingParams::disabled(),
            ..shared
        };
        let mut active = 0;
        for _ in 0..100 {
            let mut y = random_state(&mut rng, &shared);
            // keep both stocks inside the clamp band's flat region
            y.a.s = y.a.s.clamp(0.05 * 1e7, 0.95 * 1e7);
            y.b.s = y.b.s.clamp(0.05 * 7e7, 0.95 * 7e7);
            let t = rng.gen_range(0.0..300.0);
            let with = shared.coupled_rhs(t, &y).unwrap();
            let without = isolated.coupled_rhs(t, &y).unwrap();
            let delta_a = with.a.s - without.a.s;
            let delta_b = with.b.s - without.b.s;
            let aux = shared.aux_signals(t, &y);
            if aux.switch_value > 0.5 {
                active += 1;
            }
            let scale = aux.transfer_rate.abs().max(1.0);
            assert!((delta_a + delta_b).abs() <= 1e-6 * scale, "{delta_a} {delta_b}");
        }
        assert!(active > 10, "too few states exercised the transfer: {active}");
    }

    #[test]
    fn label_swap_exchanges_onsets_consistently() {
        let sc = Scenario {
            community_a: CommunityParams::with_stock(1e7),
            community_b: CommunityParams::with_stock(7e7).onset_at(50.0),
            ..Scenario::default()
        };
        let sw = sc.label_swapped();
        assert_eq!(sw.community_a.s_max, 7e7);
        assert_eq!(sw.community_a.onset, 0.0);
        assert_eq!(sw.community_b.onset, -50.0);
        assert_eq!(sw.label_swapped(), sc);
    }

    #[test]
    fn validation_names_the_field() {
        let mut sc = Scenario::default();
        sc.sharing.theta = 1.5;
        match sc.validate() {
            Err(ModelError::InvalidParameter { field, .. }) => assert_eq!(field, "sharing.theta"),
            other => panic!("{other:?}"),
        }
        let mut sc = Scenario::default();
        sc.community_b.d0 = 2.0 * sc.community_b.p0;
        assert!(matches!(sc.validate(), Err(ModelError::InvalidParameter { field, .. }) if field == "community_b.d0"));
        let mut sc = Scenario::default();
        sc.epidemic.r = 1.0;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn window_must_cover_lead_in() {
        let sc = Scenario::default();
        let mut settings = sc.integrator_settings(&RunSettings::default());
        settings.t_start = 0.0;
        assert!(matches!(run_scenario(&sc, &settings), Err(ModelError::InvalidWindow { .. })));
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let sc = Scenario::default();
        let mut y = sc.initial_state();
        y.a.i = f64::NAN;
        assert!(matches!(sc.coupled_rhs(0.0, &y), Err(ModelError::NonFiniteDerivative { .. })));
    }
}
