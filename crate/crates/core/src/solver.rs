//! Adaptive Runge–Kutta integration for small dense systems.
//!
//! Two embedded pairs share one driver:
//!
//! - [`Method::DormandPrince45`]: explicit 5(4) pair with FSAL and local
//!   extrapolation.
//! - [`Method::Rodas4`]: stiffly accurate linearly-implicit Rosenbrock 4(3)
//!   pair (RODAS4 of Hairer and Wanner) with a finite-difference Jacobian. Use it when the right-hand
//!   side has fast components, e.g. steep sigmoids acting on a state that
//!   sits inside the sigmoid's transition band.
//!
//! Step sizes follow a PI controller on a weighted RMS error norm. The
//! trajectory is sampled on a uniform grid by linear interpolation between
//! accepted steps.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Largest exponent argument passed to `exp` inside [`sigmoid`].
pub const SIGMOID_EXP_CLAMP: f64 = 700.0;

/// Logistic function `1 / (1 + exp(-k x))`.
///
/// The exponent is clamped to ±700 so that very steep switches never
/// overflow.
#[inline]
pub fn sigmoid(x: f64, k: f64) -> f64 {
    let z = (-k * x).clamp(-SIGMOID_EXP_CLAMP, SIGMOID_EXP_CLAMP);
    1.0 / (1.0 + z.exp())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),
    #[error("state has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("required step {h:e} fell below h_min at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxStepsExceeded { t: f64, max_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    DormandPrince45,
    Rodas4,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::DormandPrince45 => "dormand_prince45",
            Method::Rodas4 => "rodas4",
        }
    }

    /// Order of the local error estimate, used as the controller exponent.
    fn error_order(self) -> f64 {
        match self {
            Method::DormandPrince45 => 5.0,
            Method::Rodas4 => 4.0,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dormand_prince45" | "dopri45" => Ok(Method::DormandPrince45),
            "rodas4" => Ok(Method::Rodas4),
            other => Err(format!(
                "unknown method `{other}` (expected dormand_prince45 or rodas4)"
            )),
        }
    }
}

/// Tolerances, step bounds, time window and output sampling for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    /// Absolute tolerance, applied to each component after multiplying by
    /// that component's scale (see [`integrate_scaled`]).
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Spacing of the stored trajectory samples.
    pub dense_output_dt: f64,
    pub method: Method,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-6,
            h_init: 1e-2,
            h_min: 1e-10,
            h_max: 0.25,
            t_start: 0.0,
            t_end: 1.0,
            dense_output_dt: 0.5,
            method: Method::DormandPrince45,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidSettings(msg.to_string()));
        let all_finite = [
            self.rel_tol,
            self.abs_tol,
            self.h_init,
            self.h_min,
            self.h_max,
            self.t_start,
            self.t_end,
            self.dense_output_dt,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("all settings must be finite");
        }
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return bad("rel_tol and abs_tol must be > 0");
        }
        if !(0.0 < self.h_min && self.h_min <= self.h_init && self.h_init <= self.h_max) {
            return bad("step bounds must satisfy 0 < h_min <= h_init <= h_max");
        }
        if self.t_end <= self.t_start {
            return bad("t_end must be greater than t_start");
        }
        if self.dense_output_dt <= 0.0 {
            return bad("dense_output_dt must be > 0");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be > 0");
        }
        Ok(())
    }

    /// Number of output samples, including both ends of the window when the
    /// window is a whole multiple of `dense_output_dt`.
    pub fn sample_count(&self) -> usize {
        let intervals = (self.t_end - self.t_start) / self.dense_output_dt;
        (intervals + 1e-9).floor() as usize + 1
    }

    fn sample_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dense_output_dt
    }
}

/// A vector field `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

impl<F> OdeSystem for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn eval(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self(t, y, dydt)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Uniformly sampled solution, stored row-major (`dim` values per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub dim: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stats: SolverStats,
}

impl Solution {
    fn with_capacity(dim: usize, samples: usize) -> Self {
        Self {
            dim,
            times: Vec::with_capacity(samples),
            values: Vec::with_capacity(samples * dim),
            stats: SolverStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.state(self.len() - 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.values.chunks(self.dim))
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.values.extend_from_slice(y);
    }
}

/// Result of a run that may have stopped early: the samples produced before
/// the failure are kept.
#[derive(Debug, Clone)]
pub struct PartialSolution {
    pub solution: Solution,
    pub error: Option<SolverError>,
}

/// Integrate with unit component scales.
pub fn integrate<S: OdeSystem + ?Sized>(
    rhs: &S,
    y0: &[f64],
    settings: &IntegratorSettings,
) -> Result<Solution, SolverError> {
    let scale = vec![1.0; y0.len()];
    integrate_scaled(rhs, y0, &scale, settings)
}

/// Integrate with per-component magnitudes: component `i` is accepted when its
/// local error is below `abs_tol * scale[i] + rel_tol * |y_i|`.
pub fn integrate_scaled<S: OdeSystem + ?Sized>(
    rhs: &S,
    y0: &[f64],
    scale: &[f64],
    settings: &IntegratorSettings,
) -> Result<Solution, SolverError> {
    let run = integrate_partial(rhs, y0, scale, settings)?;
    match run.error {
        None => Ok(run.solution),
        Some(e) => Err(e),
    }
}

/// Like [`integrate_scaled`] but keeps whatever was sampled before a
/// step-size or finiteness failure. Only invalid inputs are returned as `Err`.
pub fn integrate_partial<S: OdeSystem + ?Sized>(
    rhs: &S,
    y0: &[f64],
    scale: &[f64],
    settings: &IntegratorSettings,
) -> Result<PartialSolution, SolverError> {
    settings.validate()?;
    if scale.len() != y0.len() {
        return Err(SolverError::DimensionMismatch {
            expected: y0.len(),
            got: scale.len(),
        });
    }
    if scale.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(SolverError::InvalidSettings(
            "component scales must be finite and > 0".into(),
        ));
    }
    let mut driver = Driver::new(rhs, y0, scale, settings);
    let error = driver.run().err();
    Ok(PartialSolution {
        solution: driver.out,
        error,
    })
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th and 4th order weights.
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// Rodas4: stiffly accurate Rosenbrock 4(3) pair (Hairer & Wanner), stage form
//   (I/(h·γ) − J) k_i = f(t + α_i h, y + Σ a_ij k_j) + Σ (c_ij / h) k_j + h γ_i ∂f/∂t
//   y_new = y + Σ m_i k_i,   err = Σ e_i k_i
// Lower-triangular tables are packed row by row: entry (i, j), j < i, sits at
// i(i−1)/2 + j.
const ROS_STAGES: usize = 6;
const ROS_GAMMA: f64 = 0.25;
const ROS_A: [f64; 15] = [
    1.544,
    0.9466785280815826,
    0.2557011698983284,
    3.314825187068521,
    2.896124015972201,
    0.9986419139977817,
    1.221224509226641,
    6.019134481288629,
    12.53708332932087,
    -0.6878860361058950,
    1.221224509226641,
    6.019134481288629,
    12.53708332932087,
    -0.6878860361058950,
    1.0,
];
const ROS_C: [f64; 15] = [
    -5.6688,
    -2.430093356833875,
    -0.2063599157091915,
    -0.1073529058151375,
    -9.594562251023355,
    -20.47028614809616,
    7.496443313967647,
    -10.24680431464352,
    -33.99990352819905,
    11.70890893206160,
    8.083246795921522,
    -7.981132988064893,
    -31.52159432874371,
    16.31930543123136,
    -6.058818238834054,
];
const ROS_M: [f64; 6] = [
    1.221224509226641,
    6.019134481288629,
    12.53708332932087,
    -0.6878860361058950,
    1.0,
    1.0,
];
const ROS_E: [f64; 6] = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
const ROS_ALPHA: [f64; 6] = [0.0, 0.386, 0.21, 0.63, 1.0, 1.0];
const ROS_STAGE_GAMMA: [f64; 6] = [0.25, -0.1043, 0.1035, -0.0362, 0.0, 0.0];

const SAFETY: f64 = 0.9;
const PI_BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Driver<'a, S: ?Sized> {
    rhs: &'a S,
    scale: &'a [f64],
    settings: &'a IntegratorSettings,
    dim: usize,
    t: f64,
    y: Vec<f64>,
    // f(t, y) at the current point
    f0: Vec<f64>,
    out: Solution,
    next_sample: usize,
    n_samples: usize,
    // work arrays
    stages: Vec<Vec<f64>>,
    y_new: Vec<f64>,
    err: Vec<f64>,
    tmp: Vec<f64>,
    f_new: Vec<f64>,
    jac: Vec<f64>,
    dfdt: Vec<f64>,
    lu: Vec<f64>,
    piv: Vec<usize>,
    jac_valid: bool,
}

impl<'a, S: OdeSystem + ?Sized> Driver<'a, S> {
    fn new(rhs: &'a S, y0: &[f64], scale: &'a [f64], settings: &'a IntegratorSettings) -> Self {
        let dim = y0.len();
        let n_samples = settings.sample_count();
        Self {
            rhs,
            scale,
            settings,
            dim,
            t: settings.t_start,
            y: y0.to_vec(),
            f0: vec![0.0; dim],
            out: Solution::with_capacity(dim, n_samples),
            next_sample: 0,
            n_samples,
            stages: vec![vec![0.0; dim]; 7],
            y_new: vec![0.0; dim],
            err: vec![0.0; dim],
            tmp: vec![0.0; dim],
            f_new: vec![0.0; dim],
            jac: vec![0.0; dim * dim],
            dfdt: vec![0.0; dim],
            lu: vec![0.0; dim * dim],
            piv: vec![0; dim],
            jac_valid: false,
        }
    }

    fn eval(&mut self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self.out.stats.rhs_evals += 1;
        self.rhs.eval(t, y, dydt);
    }

    fn run(&mut self) -> Result<(), SolverError> {
        let settings = self.settings;
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteState { t: self.t });
        }
        let mut f0 = std::mem::take(&mut self.f0);
        let y = self.y.clone();
        self.eval(self.t, &y, &mut f0);
        self.f0 = f0;
        if self.f0.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteState { t: self.t });
        }
        self.out.push(self.t, &y);
        self.next_sample = 1;

        let method = settings.method;
        let expo = 1.0 / method.error_order() - 0.75 * PI_BETA;
        let mut h = settings.h_init.min(settings.h_max);
        let mut err_old: f64 = 1e-4;
        let mut last_rejected = false;
        let mut steps = 0usize;
        let span = settings.t_end - settings.t_start;

        while self.t < settings.t_end {
            if steps >= settings.max_steps {
                return Err(SolverError::MaxStepsExceeded {
                    t: self.t,
                    max_steps: settings.max_steps,
                });
            }
            steps += 1;

            let remaining = settings.t_end - self.t;
            let is_last = h >= remaining * (1.0 - 1e-12) || remaining <= span * 1e-14;
            let h_try = if is_last { remaining } else { h };

            let finite = match method {
                Method::DormandPrince45 => self.dopri_attempt(h_try),
                Method::Rodas4 => self.rosenbrock_attempt(h_try),
            };
            if !finite {
                self.out.stats.rejected += 1;
                last_rejected = true;
                h = h_try * 0.25;
                if h < settings.h_min {
                    return Err(SolverError::NonFiniteState { t: self.t });
                }
                continue;
            }

            let err = self.error_norm();
            if err <= 1.0 {
                let t_new = if is_last { settings.t_end } else { self.t + h_try };
                self.accept(t_new, method);
                self.out.stats.accepted += 1;

                let fac11 = err.powf(expo);
                let mut fac = fac11 / err_old.powf(PI_BETA) / SAFETY;
                fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h_try / fac;
                if last_rejected {
                    h_new = h_new.min(h_try);
                }
                err_old = err.max(1e-4);
                last_rejected = false;
                // Truncation to hit t_end must not shrink the controller's step.
                h = h_new.max(if is_last { h } else { 0.0 }).min(settings.h_max);
            } else {
                self.out.stats.rejected += 1;
                last_rejected = true;
                let fac = (err.powf(expo) / SAFETY).min(1.0 / FAC_MIN);
                h = h_try / fac;
                if h < settings.h_min {
                    return Err(SolverError::StepUnderflow { t: self.t, h });
                }
                // A failed step at the same point keeps the Jacobian.
            }
        }
        Ok(())
    }

    fn error_norm(&self) -> f64 {
        let s = self.settings;
        let mut acc = 0.0;
        for i in 0..self.dim {
            let sc = s.abs_tol * self.scale[i] + s.rel_tol * self.y[i].abs().max(self.y_new[i].abs());
            let r = self.err[i] / sc;
            acc += r * r;
        }
        (acc / self.dim as f64).sqrt()
    }

    fn accept(&mut self, t_new: f64, method: Method) {
        let settings = self.settings;
        let t_old = self.t;
        let h = t_new - t_old;
        while self.next_sample < self.n_samples {
            let ts = settings.sample_time(self.next_sample);
            if ts > t_new + 1e-9 * settings.dense_output_dt {
                break;
            }
            let theta = ((ts - t_old) / h).clamp(0.0, 1.0);
            for i in 0..self.dim {
                self.tmp[i] = self.y[i] + theta * (self.y_new[i] - self.y[i]);
            }
            self.out.times.push(ts.min(settings.t_end));
            self.out.values.extend_from_slice(&self.tmp);
            self.next_sample += 1;
        }
        std::mem::swap(&mut self.y, &mut self.y_new);
        self.t = t_new;
        match method {
            // FSAL: the last stage was evaluated at (t_new, y_new).
            Method::DormandPrince45 => std::mem::swap(&mut self.f0, &mut self.stages[6]),
            Method::Rodas4 => {
                let mut f0 = std::mem::take(&mut self.f0);
                let y = std::mem::take(&mut self.y);
                self.eval(self.t, &y, &mut f0);
                self.y = y;
                self.f0 = f0;
            }
        }
        self.jac_valid = false;
    }

    /// One Dormand–Prince trial step. Returns false if anything went
    /// non-finite.
    fn dopri_attempt(&mut self, h: f64) -> bool {
        let dim = self.dim;
        let t = self.t;
        let mut stages = std::mem::take(&mut self.stages);
        stages[0].copy_from_slice(&self.f0);
        let mut ytmp = std::mem::take(&mut self.tmp);
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, stage) in stages.iter().enumerate().take(s) {
                    acc += DP_A[s][j] * stage[i];
                }
                ytmp[i] = self.y[i] + h * acc;
            }
            if s == 6 {
                self.y_new.copy_from_slice(&ytmp);
            }
            let (done, rest) = stages.split_at_mut(s);
            let _ = done;
            self.out.stats.rhs_evals += 1;
            self.rhs.eval(t + DP_C[s] * h, &ytmp, &mut rest[0]);
        }
        for i in 0..dim {
            let mut e = 0.0;
            for (s, stage) in stages.iter().enumerate() {
                e += DP_E[s] * stage[i];
            }
            self.err[i] = h * e;
        }
        let finite = self.y_new.iter().chain(self.err.iter()).chain(stages[6].iter()).all(|v| v.is_finite());
        self.stages = stages;
        self.tmp = ytmp;
        finite
    }

    fn compute_jacobian(&mut self) {
        let dim = self.dim;
        let t = self.t;
        let mut yp = self.y.clone();
        let mut fp = vec![0.0; dim];
        let sqrt_eps = f64::EPSILON.sqrt();
        for j in 0..dim {
            let orig = yp[j];
            let delta = sqrt_eps * orig.abs().max(1.0);
            yp[j] = orig + delta;
            let actual = yp[j] - orig;
            self.eval(t, &yp, &mut fp);
            yp[j] = orig;
            for i in 0..dim {
                self.jac[i * dim + j] = (fp[i] - self.f0[i]) / actual;
            }
        }
        let dt = sqrt_eps * t.abs().max(1.0);
        let y = std::mem::take(&mut self.y);
        self.eval(t + dt, &y, &mut fp);
        self.y = y;
        for i in 0..dim {
            self.dfdt[i] = (fp[i] - self.f0[i]) / dt;
        }
        self.jac_valid = true;
    }

    fn rosenbrock_attempt(&mut self, h: f64) -> bool {
        let dim = self.dim;
        if !self.jac_valid {
            self.compute_jacobian();
        }
        // W = I / (h γ) − J
        let diag = 1.0 / (h * ROS_GAMMA);
        for i in 0..dim {
            for j in 0..dim {
                self.lu[i * dim + j] = -self.jac[i * dim + j];
            }
            self.lu[i * dim + i] += diag;
        }
        if !lu_factor(&mut self.lu, &mut self.piv, dim) {
            return false;
        }

        let mut stages = std::mem::take(&mut self.stages);
        let mut fval = std::mem::take(&mut self.f_new);
        let mut ytmp = std::mem::take(&mut self.tmp);
        fval.copy_from_slice(&self.f0);
        for s in 0..ROS_STAGES {
            let row = s * s.saturating_sub(1) / 2;
            if s > 0 {
                for i in 0..dim {
                    let mut acc = self.y[i];
                    for (j, stage) in stages.iter().enumerate().take(s) {
                        acc += ROS_A[row + j] * stage[i];
                    }
                    ytmp[i] = acc;
                }
                self.out.stats.rhs_evals += 1;
                self.rhs.eval(self.t + ROS_ALPHA[s] * h, &ytmp, &mut fval);
            }
            let (prev, cur) = stages.split_at_mut(s);
            let k = &mut cur[0];
            for i in 0..dim {
                let mut acc = fval[i] + h * ROS_STAGE_GAMMA[s] * self.dfdt[i];
                for (j, stage) in prev.iter().enumerate() {
                    acc += ROS_C[row + j] / h * stage[i];
                }
                k[i] = acc;
            }
            lu_solve(&self.lu, &self.piv, dim, k);
        }
        for i in 0..dim {
            let mut yn = self.y[i];
            let mut e = 0.0;
            for s in 0..ROS_STAGES {
                yn += ROS_M[s] * stages[s][i];
                e += ROS_E[s] * stages[s][i];
            }
            self.y_new[i] = yn;
            self.err[i] = e;
        }
        self.stages = stages;
        self.f_new = fval;
        self.tmp = ytmp;
        self.y_new.iter().chain(self.err.iter()).all(|v| v.is_finite())
    }
}

/// In-place LU factorization with partial pivoting of a row-major `n × n`
/// matrix. Returns false if the matrix is numerically singular.
fn lu_factor(a: &mut [f64], piv: &mut [usize], n: usize) -> bool {
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].abs();
        for i in (k + 1)..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if !(best > 0.0) || !best.is_finite() {
            return false;
        }
        piv[k] = p;
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let factor = a[i * n + k] / pivot;
            a[i * n + k] = factor;
            if factor != 0.0 {
                for j in (k + 1)..n {
                    a[i * n + j] -= factor * a[k * n + j];
                }
            }
        }
    }
    true
}

fn lu_solve(lu: &[f64], piv: &[usize], n: usize, b: &mut [f64]) {
    for k in 0..n {
        b.swap(k, piv[k]);
    }
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= lu[i * n + j] * b[j];
        }
        b[i] = acc;
    }
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in (i + 1)..n {
            acc -= lu[i * n + j] * b[j];
        }
        b[i] = acc / lu[i * n + i];
    }
}
