//! Scenario configuration files, CSV output and SVG heatmaps.
//!
//! # Configuration grammar
//!
//! ```text
//! # comment (also `;`)
//! [section]
//! key = value
//! ```
//!
//! Keys may also be written fully qualified (`sharing.theta = 0.6`) outside
//! any section; command-line overrides use that form. Sections and keys:
//!
//! - `epidemic`: `r0`, `gamma`, `r`, `w`
//! - `community_a`, `community_b`: `n`, `s_max`, `p0`, `p_max`, `d0`, `onset`
//! - `sharing`: `theta`, `k_switch`, `enabled`
//! - `numerics`: `rel_tol`, `abs_tol`, `h_init`, `h_min`, `h_max`,
//!   `dense_output_dt`, `horizon`, `method`, `max_steps`, `k_delay`,
//!   `k_stock_step`, `s_offset`, `k_clamp`, `demand_mode`
//!
//! Numbers accept a simple fraction (`gamma = 1/6`). Missing keys take their
//! defaults; `p_max` defaults to `4 * p0` and `d0` to `p0`. A key assigned
//! more than once keeps the last value.

use crate::metrics::{OutcomeClass, ScenarioSummary};
use crate::model::{CommunityParams, DemandMode, ModelError, RunSettings, Scenario, Trajectory};
use crate::solver::Method;
use crate::sweep::{PhasePoint, SweepAxis, SweepMetadata, SweepResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use thiserror::Error;

pub const TIMESERIES_FORMAT: &str = "stockshare-timeseries v1";
pub const PHASE_FORMAT: &str = "stockshare-phase v1";

/// Scenario parameters plus integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub run: RunSettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate().map_err(ConfigError::from)?;
        self.run.validate("numerics").map_err(ConfigError::from)
    }

    pub fn integrator_settings(&self) -> crate::solver::IntegratorSettings {
        self.scenario.integrator_settings(&self.run)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter { field, reason } => ConfigError::Validation { field, message: reason },
            other => ConfigError::Validation {
                field: "numerics".into(),
                message: other.to_string(),
            },
        }
    }
}

const SECTIONS: [&str; 5] = ["epidemic", "community_a", "community_b", "sharing", "numerics"];

fn known_keys(section: &str) -> &'static [&'static str] {
    match section {
        "epidemic" => &["r0", "gamma", "r", "w"],
        "community_a" | "community_b" => &["n", "s_max", "p0", "p_max", "d0", "onset"],
        "sharing" => &["theta", "k_switch", "enabled"],
        "numerics" => &[
            "rel_tol",
            "abs_tol",
            "h_init",
            "h_min",
            "h_max",
            "dense_output_dt",
            "horizon",
            "method",
            "max_steps",
            "k_delay",
            "k_stock_step",
            "s_offset",
            "k_clamp",
            "demand_mode",
        ],
        _ => &[],
    }
}

fn check_key(key: &str) -> Result<(), ConfigError> {
    let unknown = || ConfigError::UnknownKey { key: key.to_string() };
    let (section, name) = key.split_once('.').ok_or_else(unknown)?;
    if known_keys(section).contains(&name) {
        Ok(())
    } else {
        Err(unknown())
    }
}

/// One `key = value` assignment with its source (for diagnostics).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub key: String,
    pub value: String,
    pub origin: String,
}

/// Split a document into fully qualified assignments, in order.
pub fn parse_assignments(text: &str) -> Result<Vec<Assignment>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                message: format!("unterminated section header `{line}`"),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownKey { key: format!("[{name}]") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Parse {
                line: line_no,
                message: "empty key".into(),
            });
        }
        let key = match (&section, k.contains('.')) {
            (_, true) => k.to_string(),
            (Some(s), false) => format!("{s}.{k}"),
            (None, false) => {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("key `{k}` outside any section"),
                })
            }
        };
        check_key(&key)?;
        out.push(Assignment {
            key,
            value: v.to_string(),
            origin: format!("line {line_no}"),
        });
    }
    Ok(out)
}

/// Parse a `section.key=value` override.
pub fn parse_override(spec: &str) -> Result<Assignment, ConfigError> {
    let (k, v) = spec.split_once('=').ok_or_else(|| ConfigError::Parse {
        line: 0,
        message: format!("override `{spec}` is not of the form section.key=value"),
    })?;
    let key = k.trim().to_string();
    check_key(&key)?;
    Ok(Assignment {
        key,
        value: v.trim().to_string(),
        origin: format!("--set {spec}"),
    })
}

fn parse_number(field: &str, value: &str) -> Result<f64, ConfigError> {
    let bad = || ConfigError::Validation {
        field: field.to_string(),
        message: format!("`{value}` is not a number"),
    };
    let v = match value.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            num / den
        }
        None => value.parse().map_err(|_| bad())?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_bool(field: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::Validation {
            field: field.to_string(),
            message: format!("`{value}` is not a boolean"),
        }),
    }
}

fn apply_community(c: &mut CommunityParams, name: &str, field: &str, value: &str) -> Result<(), ConfigError> {
    let v = parse_number(field, value)?;
    match name {
        "n" => c.n = v,
        "s_max" => c.s_max = v,
        "p0" => c.p0 = v,
        "p_max" => c.p_max = v,
        "d0" => c.d0 = v,
        "onset" => c.onset = v,
        _ => unreachable!("key checked"),
    }
    Ok(())
}

fn apply(cfg: &mut ScenarioConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let (section, name) = key.split_once('.').expect("qualified key");
    let num = || parse_number(key, value);
    let sc = &mut cfg.scenario;
    let run = &mut cfg.run;
    match (section, name) {
        ("epidemic", "r0") => sc.epidemic.r0 = num()?,
        ("epidemic", "gamma") => sc.epidemic.gamma = num()?,
        ("epidemic", "r") => sc.epidemic.r = num()?,
        ("epidemic", "w") => sc.epidemic.w = num()?,
        ("community_a", n) => apply_community(&mut sc.community_a, n, key, value)?,
        ("community_b", n) => apply_community(&mut sc.community_b, n, key, value)?,
        ("sharing", "theta") => sc.sharing.theta = num()?,
        ("sharing", "k_switch") => sc.sharing.k_switch = num()?,
        ("sharing", "enabled") => sc.sharing.enabled = parse_bool(key, value)?,
        ("numerics", "rel_tol") => run.rel_tol = num()?,
        ("numerics", "abs_tol") => run.abs_tol = num()?,
        ("numerics", "h_init") => run.h_init = num()?,
        ("numerics", "h_min") => run.h_min = num()?,
        ("numerics", "h_max") => run.h_max = num()?,
        ("numerics", "dense_output_dt") => run.dense_output_dt = num()?,
        ("numerics", "horizon") => run.horizon = num()?,
        ("numerics", "method") => {
            run.method = value.parse::<Method>().map_err(|e| ConfigError::Validation {
                field: key.into(),
                message: e.to_string(),
            })?
        }
        ("numerics", "max_steps") => {
            run.max_steps = value.parse().map_err(|_| ConfigError::Validation {
                field: key.into(),
                message: format!("`{value}` is not a positive integer"),
            })?
        }
        ("numerics", "k_delay") => sc.numerics.k_delay = num()?,
        ("numerics", "k_stock_step") => sc.numerics.k_stock_step = num()?,
        ("numerics", "s_offset") => sc.numerics.s_offset = num()?,
        ("numerics", "k_clamp") => sc.numerics.k_clamp = num()?,
        ("numerics", "demand_mode") => {
            sc.numerics.demand_mode = value.parse::<DemandMode>().map_err(|message| ConfigError::Validation {
                field: key.into(),
                message,
            })?
        }
        _ => return Err(ConfigError::UnknownKey { key: key.into() }),
    }
    Ok(())
}

/// Resolve assignments (later ones win) into a validated configuration.
pub fn resolve(assignments: &[Assignment]) -> Result<ScenarioConfig, ConfigError> {
    let mut last: BTreeMap<&str, &Assignment> = BTreeMap::new();
    for a in assignments {
        check_key(&a.key)?;
        if let Some(prev) = last.insert(&a.key, a) {
            if prev.value != a.value {
                log::warn!(
                    "`{}` set more than once; {} (`{}`) overrides {} (`{}`)",
                    a.key,
                    a.origin,
                    a.value,
                    prev.origin,
                    prev.value
                );
            }
        }
    }
    let mut cfg = ScenarioConfig::default();
    for (key, a) in &last {
        apply(&mut cfg, key, &a.value)?;
    }
    for (section, c) in [("community_a", &mut cfg.scenario.community_a), ("community_b", &mut cfg.scenario.community_b)] {
        if !last.contains_key(format!("{section}.p_max").as_str()) {
            c.p_max = 4.0 * c.p0;
        }
        if !last.contains_key(format!("{section}.d0").as_str()) {
            c.d0 = c.p0;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    resolve(&parse_assignments(text)?)
}

/// Load a document and apply `section.key=value` overrides on top.
pub fn load_config_with_overrides(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let mut all = parse_assignments(text)?;
    for o in overrides {
        all.push(parse_override(o)?);
    }
    resolve(&all)
}

/// Fully resolved configuration in the file grammar.
pub fn echo_config(cfg: &ScenarioConfig) -> String {
    let sc = &cfg.scenario;
    let run = &cfg.run;
    let mut s = String::new();
    let ep = &sc.epidemic;
    let _ = writeln!(s, "[epidemic]\nr0 = {}\ngamma = {}\nr = {}\nw = {}\n", ep.r0, ep.gamma, ep.r, ep.w);
    for (name, c) in [("community_a", &sc.community_a), ("community_b", &sc.community_b)] {
        let _ = writeln!(
            s,
            "[{name}]\nn = {}\ns_max = {}\np0 = {}\np_max = {}\nd0 = {}\nonset = {}\n",
            c.n, c.s_max, c.p0, c.p_max, c.d0, c.onset
        );
    }
    let sh = &sc.sharing;
    let _ = writeln!(s, "[sharing]\ntheta = {}\nk_switch = {}\nenabled = {}\n", sh.theta, sh.k_switch, sh.enabled);
    let num = &sc.numerics;
    let _ = writeln!(
        s,
        "[numerics]\nmethod = {}\nrel_tol = {}\nabs_tol = {}\nh_init = {}\nh_min = {}\nh_max = {}\n\
         dense_output_dt = {}\nhorizon = {}\nmax_steps = {}\nk_delay = {}\nk_stock_step = {}\n\
         s_offset = {}\nk_clamp = {}\ndemand_mode = {}",
        run.method,
        run.rel_tol,
        run.abs_tol,
        run.h_init,
        run.h_min,
        run.h_max,
        run.dense_output_dt,
        run.horizon,
        run.max_steps,
        num.k_delay,
        num.k_stock_step,
        num.s_offset,
        num.k_clamp,
        num.demand_mode
    );
    s
}

/// One sample of a scenario run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRecord {
    pub t: f64,
    pub u_a: f64,
    pub i_a: f64,
    pub rec_a: f64,
    pub d_a: f64,
    pub s_a: f64,
    pub p_a: f64,
    pub r_effective_a: f64,
    pub u_b: f64,
    pub i_b: f64,
    pub rec_b: f64,
    pub d_b: f64,
    pub s_b: f64,
    pub p_b: f64,
    pub r_effective_b: f64,
    pub switch_value: f64,
    pub transfer_rate: f64,
}

pub const TIMESERIES_HEADER: [&str; 17] = [
    "t",
    "u_a",
    "i_a",
    "rec_a",
    "d_a",
    "s_a",
    "p_a",
    "r_effective_a",
    "u_b",
    "i_b",
    "rec_b",
    "d_b",
    "s_b",
    "p_b",
    "r_effective_b",
    "switch_value",
    "transfer_rate",
];

impl TimeseriesRecord {
    fn values(&self) -> [f64; 17] {
        [
            self.t,
            self.u_a,
            self.i_a,
            self.rec_a,
            self.d_a,
            self.s_a,
            self.p_a,
            self.r_effective_a,
            self.u_b,
            self.i_b,
            self.rec_b,
            self.d_b,
            self.s_b,
            self.p_b,
            self.r_effective_b,
            self.switch_value,
            self.transfer_rate,
        ]
    }
}

pub fn timeseries_records(traj: &Trajectory) -> Vec<TimeseriesRecord> {
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&traj.aux)
        .map(|((&t, y), aux)| TimeseriesRecord {
            t,
            u_a: y.a.u,
            i_a: y.a.i,
            rec_a: y.a.rec,
            d_a: y.a.d,
            s_a: y.a.s,
            p_a: y.a.p,
            r_effective_a: aux.r_effective[0],
            u_b: y.b.u,
            i_b: y.b.i,
            rec_b: y.b.rec,
            d_b: y.b.d,
            s_b: y.b.s,
            p_b: y.b.p,
            r_effective_b: aux.r_effective[1],
            switch_value: aux.switch_value,
            transfer_rate: aux.transfer_rate,
        })
        .collect()
}

/// 17 significant digits.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::new(io::ErrorKind::InvalidData, format!("{other:?}")),
    }
}

/// Write the header and one row per sample; returns the number of rows.
pub fn write_timeseries_csv<W: Write>(traj: &Trajectory, mut sink: W) -> io::Result<usize> {
    writeln!(sink, "# {TIMESERIES_FORMAT}")?;
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(TIMESERIES_HEADER).map_err(csv_io)?;
    let records = timeseries_records(traj);
    for r in &records {
        w.write_record(r.values().map(fmt_f64)).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(records.len())
}

pub fn read_timeseries_csv<R: io::Read>(source: R) -> io::Result<Vec<TimeseriesRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(source);
    let header = r.headers().map_err(csv_io)?;
    if header.iter().ne(TIMESERIES_HEADER) {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "unexpected timeseries header"));
    }
    r.deserialize().map(|row| row.map_err(csv_io)).collect()
}

pub const PHASE_HEADER: [&str; 11] = [
    "x",
    "y",
    "infected_ratio_a",
    "infected_ratio_b",
    "infected_ratio_mean",
    "depleted_a",
    "depleted_b",
    "outcome",
    "unserved_a",
    "unserved_b",
    "complete",
];

/// One sweep cell as stored in `phase.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub x: f64,
    pub y: f64,
    pub infected_ratio_a: f64,
    pub infected_ratio_b: f64,
    pub infected_ratio_mean: f64,
    pub depleted_a: bool,
    pub depleted_b: bool,
    pub outcome: OutcomeClass,
    pub unserved_a: f64,
    pub unserved_b: f64,
    pub complete: bool,
}

impl From<&PhasePoint> for PhaseRecord {
    fn from(p: &PhasePoint) -> Self {
        let s = &p.summary;
        Self {
            x: p.x,
            y: p.y,
            infected_ratio_a: s.infected_ratio_a,
            infected_ratio_b: s.infected_ratio_b,
            infected_ratio_mean: s.infected_ratio_mean,
            depleted_a: s.depleted_a,
            depleted_b: s.depleted_b,
            outcome: s.outcome,
            unserved_a: s.unserved_ratio_a,
            unserved_b: s.unserved_ratio_b,
            complete: s.complete && p.failure.is_none(),
        }
    }
}

/// Metadata lines, the base configuration, then one row per cell.
pub fn write_phase_csv<W: Write>(res: &SweepResult, mut sink: W) -> io::Result<usize> {
    let m = &res.metadata;
    writeln!(sink, "# {PHASE_FORMAT}")?;
    writeln!(sink, "# axis_x = {}", res.axis_x)?;
    writeln!(sink, "# axis_y = {}", res.axis_y)?;
    writeln!(sink, "# engine_version = {}", m.engine_version)?;
    writeln!(sink, "# method = {}", m.method)?;
    writeln!(sink, "# rel_tol = {}", m.rel_tol)?;
    writeln!(sink, "# abs_tol = {}", m.abs_tol)?;
    writeln!(sink, "# horizon = {}", m.horizon)?;
    writeln!(sink, "# dense_output_dt = {}", m.dense_output_dt)?;
    writeln!(sink, "# depletion_threshold = {}", m.depletion_threshold)?;
    writeln!(sink, "# healthcare_cap = {}", m.healthcare_cap)?;
    for line in echo_config(&res.base).lines() {
        writeln!(sink, "#| {line}")?;
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(PHASE_HEADER).map_err(csv_io)?;
    for p in &res.points {
        let r = PhaseRecord::from(p);
        w.write_record([
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_f64(r.infected_ratio_a),
            fmt_f64(r.infected_ratio_b),
            fmt_f64(r.infected_ratio_mean),
            r.depleted_a.to_string(),
            r.depleted_b.to_string(),
            r.outcome.to_string(),
            fmt_f64(r.unserved_a),
            fmt_f64(r.unserved_b),
            r.complete.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(res.points.len())
}

fn invalid_data(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Rebuild a sweep result from `phase.csv`. Fields not stored in the file
/// (minimum stock ratios, peaks) come back as NaN.
pub fn read_phase_csv<R: BufRead>(mut source: R) -> io::Result<SweepResult> {
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut config_text = String::new();
    let mut body = String::new();
    let mut line = String::new();
    while source.read_line(&mut line)? > 0 {
        if let Some(cfg) = line.strip_prefix("#| ") {
            config_text.push_str(cfg);
        } else if let Some(rest) = line.strip_prefix("# ") {
            if let Some((k, v)) = rest.split_once(" = ") {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if !line.starts_with('#') {
            body.push_str(&line);
        }
        line.clear();
    }
    let get = |k: &str| meta.get(k).ok_or_else(|| invalid_data(format!("missing `{k}` metadata")));
    let num = |k: &str| -> io::Result<f64> { get(k)?.parse().map_err(|_| invalid_data(format!("bad `{k}`"))) };
    let axis = |k: &str| -> io::Result<SweepAxis> { get(k)?.parse().map_err(|e| invalid_data(format!("{e}"))) };
    let (axis_x, axis_y) = (axis("axis_x")?, axis("axis_y")?);
    let base = load_config(&config_text).map_err(|e| invalid_data(e.to_string()))?;
    let metadata = SweepMetadata {
        engine_version: get("engine_version")?.clone(),
        method: get("method")?.parse().map_err(|e| invalid_data(format!("{e}")))?,
        rel_tol: num("rel_tol")?,
        abs_tol: num("abs_tol")?,
        horizon: num("horizon")?,
        dense_output_dt: num("dense_output_dt")?,
        depletion_threshold: num("depletion_threshold")?,
        healthcare_cap: num("healthcare_cap")?,
    };
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let mut points = Vec::new();
    for (k, row) in r.deserialize::<PhaseRecord>().enumerate() {
        let rec = row.map_err(csv_io)?;
        points.push(PhasePoint {
            ix: k % axis_x.steps,
            iy: k / axis_x.steps,
            x: rec.x,
            y: rec.y,
            summary: ScenarioSummary {
                infected_ratio_a: rec.infected_ratio_a,
                infected_ratio_b: rec.infected_ratio_b,
                infected_ratio_mean: rec.infected_ratio_mean,
                depleted_a: rec.depleted_a,
                depleted_b: rec.depleted_b,
                min_stock_ratio_a: f64::NAN,
                min_stock_ratio_b: f64::NAN,
                unserved_ratio_a: rec.unserved_a,
                unserved_ratio_b: rec.unserved_b,
                peak_infected_a: f64::NAN,
                peak_infected_b: f64::NAN,
                complete: rec.complete,
                outcome: rec.outcome,
            },
            failure: None,
        });
    }
    if points.len() != axis_x.steps * axis_y.steps {
        return Err(invalid_data(format!(
            "expected {} rows, found {}",
            axis_x.steps * axis_y.steps,
            points.len()
        )));
    }
    Ok(SweepResult {
        axis_x,
        axis_y,
        base,
        points,
        metadata,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapChannel {
    InfectedRatioMean,
    Outcome,
    UnservedMean,
}

impl HeatmapChannel {
    pub const ALL: [HeatmapChannel; 3] = [
        HeatmapChannel::InfectedRatioMean,
        HeatmapChannel::Outcome,
        HeatmapChannel::UnservedMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeatmapChannel::InfectedRatioMean => "infected_ratio_mean",
            HeatmapChannel::Outcome => "outcome",
            HeatmapChannel::UnservedMean => "unserved_mean",
        }
    }

    fn value(self, p: &PhasePoint) -> f64 {
        match self {
            HeatmapChannel::InfectedRatioMean => p.summary.infected_ratio_mean,
            HeatmapChannel::UnservedMean => 0.5 * (p.summary.unserved_ratio_a + p.summary.unserved_ratio_b),
            HeatmapChannel::Outcome => f64::NAN,
        }
    }
}

impl std::str::FromStr for HeatmapChannel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        HeatmapChannel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown heatmap channel `{s}`"))
    }
}

pub const COLOR_RED: &str = "#c0392b";
pub const COLOR_WHITE: &str = "#ffffff";
pub const COLOR_BLUE: &str = "#2e6da4";
const COLOR_MISSING: &str = "#9e9e9e";
const RGB_LOW: [f64; 3] = [46.0, 109.0, 164.0];
const RGB_HIGH: [f64; 3] = [192.0, 57.0, 43.0];

pub fn outcome_color(c: OutcomeClass) -> &'static str {
    match c {
        OutcomeClass::Red => COLOR_RED,
        OutcomeClass::WhiteA | OutcomeClass::WhiteB => COLOR_WHITE,
        OutcomeClass::Blue => COLOR_BLUE,
    }
}

/// Linear blue (`frac = 0`) to red (`frac = 1`) map.
pub fn continuous_color(frac: f64) -> String {
    let f = frac.clamp(0.0, 1.0);
    let c: Vec<u8> = (0..3)
        .map(|k| (RGB_LOW[k] + (RGB_HIGH[k] - RGB_LOW[k]) * f).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn fmt_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

const CELL: f64 = 18.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const LEGEND_WIDTH: f64 = 130.0;

/// Standalone SVG heatmap: x axis left to right, y axis bottom to top.
pub fn render_heatmap_svg<W: Write>(res: &SweepResult, channel: HeatmapChannel, mut sink: W) -> io::Result<()> {
    if res.points.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "empty sweep result"));
    }
    let (nx, ny) = (res.nx().max(1), res.ny().max(1));
    let plot_w = CELL * nx as f64;
    let plot_h = CELL * ny as f64;
    let width = MARGIN_LEFT + plot_w + LEGEND_WIDTH;
    let height = MARGIN_TOP + plot_h + MARGIN_BOTTOM;

    let values: Vec<f64> = res.points.iter().map(|p| channel.value(p)).filter(|v| v.is_finite()).collect();
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        channel.as_str()
    );

    for p in &res.points {
        let x = MARGIN_LEFT + CELL * p.ix as f64;
        let y = MARGIN_TOP + CELL * (ny - 1 - p.iy.min(ny - 1)) as f64;
        let fill = match channel {
            HeatmapChannel::Outcome if p.summary.infected_ratio_mean.is_nan() => COLOR_MISSING.to_string(),
            HeatmapChannel::Outcome => outcome_color(p.outcome()).to_string(),
            _ => {
                let v = channel.value(p);
                if !v.is_finite() {
                    COLOR_MISSING.to_string()
                } else if vmax > vmin {
                    continuous_color((v - vmin) / (vmax - vmin))
                } else {
                    continuous_color(0.0)
                }
            }
        };
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#dddddd" stroke-width="0.5"/>"##
        );
        if channel == HeatmapChannel::Outcome {
            let glyph = match p.outcome() {
                OutcomeClass::WhiteA => Some("A"),
                OutcomeClass::WhiteB => Some("B"),
                _ => None,
            };
            if let Some(g) = glyph {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle" font-size="10" fill="{COLOR_RED}">{g}</text>"#,
                    x + CELL / 2.0,
                    y + CELL * 0.72
                );
            }
        }
    }

    let bottom = MARGIN_TOP + plot_h;
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#000000"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN_LEFT}" y="{}" text-anchor="start">{}</text>"#,
        bottom + 15.0,
        fmt_label(res.axis_x.min)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN_LEFT + plot_w,
        bottom + 15.0,
        fmt_label(res.axis_x.max)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        bottom + 35.0,
        res.axis_x.parameter
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{bottom}" text-anchor="end">{}</text>"#,
        MARGIN_LEFT - 5.0,
        fmt_label(res.axis_y.min)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
        MARGIN_LEFT - 5.0,
        MARGIN_TOP + 10.0,
        fmt_label(res.axis_y.max)
    );
    let (ly_x, ly_y) = (25.0, MARGIN_TOP + plot_h / 2.0);
    let _ = writeln!(
        s,
        r#"<text x="{ly_x}" y="{ly_y}" text-anchor="middle" transform="rotate(-90 {ly_x} {ly_y})">{}</text>"#,
        res.axis_y.parameter
    );

    let lx = MARGIN_LEFT + plot_w + 20.0;
    match channel {
        HeatmapChannel::Outcome => {
            let entries = [
                (COLOR_RED, "RED: both depleted"),
                (COLOR_WHITE, "WHITE: one depleted"),
                (COLOR_BLUE, "BLUE: none depleted"),
            ];
            for (k, (color, label)) in entries.iter().enumerate() {
                let y = MARGIN_TOP + 20.0 * k as f64;
                let _ = writeln!(
                    s,
                    r##"<rect x="{lx}" y="{y}" width="12" height="12" fill="{color}" stroke="#000000" stroke-width="0.5"/>"##
                );
                let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="9">{label}</text>"#, lx + 16.0, y + 10.0);
            }
        }
        _ => {
            let lh = plot_h.max(60.0);
            let _ = writeln!(
                s,
                r#"<defs><linearGradient id="legend" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
                continuous_color(0.0),
                continuous_color(1.0)
            );
            let _ = writeln!(
                s,
                r##"<rect x="{lx}" y="{MARGIN_TOP}" width="14" height="{lh}" fill="url(#legend)" stroke="#000000" stroke-width="0.5"/>"##
            );
            let (lo, hi) = if values.is_empty() {
                ("n/a".to_string(), "n/a".to_string())
            } else {
                (fmt_label(vmin), fmt_label(vmax))
            };
            let _ = writeln!(s, r#"<text x="{}" y="{}">{hi}</text>"#, lx + 18.0, MARGIN_TOP + 10.0);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{lo}</text>"#, lx + 18.0, MARGIN_TOP + lh);
        }
    }
    s.push_str("</svg>\n");
    sink.write_all(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        let ep = cfg.scenario.epidemic;
        assert_eq!((ep.r0, ep.gamma, ep.r, ep.w), (2.3, 1.0 / 6.0, 0.4, 4.0));
        assert_eq!(cfg.scenario.community_a.n, 1.7e7);
        assert_eq!(cfg.scenario.community_b.p_max, 4.0 * cfg.scenario.community_b.p0);
    }

    #[test]
    fn sections_and_qualified_keys() {
        let cfg = load_config(
            "# preset\n[epidemic]\ngamma = 1/6\n\n[community_b]\nonset = -60\np0 = 1e6\n; note\nsharing.theta = 0.25\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.community_b.onset, -60.0);
        assert_eq!(cfg.scenario.community_b.p_max, 4e6);
        assert_eq!(cfg.scenario.community_b.d0, 1e6);
        assert_eq!(cfg.scenario.sharing.theta, 0.25);
    }

    #[test]
    fn errors_name_the_problem() {
        assert!(matches!(
            load_config("[sharing]\ntheta = 1.5"),
            Err(ConfigError::Validation { field, .. }) if field == "sharing.theta"
        ));
        assert!(matches!(
            load_config("[epidemic]\nbeta = 0.3"),
            Err(ConfigError::UnknownKey { key }) if key == "epidemic.beta"
        ));
        assert!(matches!(load_config("[oops]\n"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(load_config("[epidemic\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(load_config("r0 = 2"), Err(ConfigError::Parse { .. })));
        assert!(matches!(load_config("[epidemic]\nr0"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(load_config("[epidemic]\nr0 = two"), Err(ConfigError::Validation { .. })));
        assert!(matches!(load_config("[numerics]\nmethod = euler"), Err(ConfigError::Validation { .. })));
    }

    #[test]
    fn overrides_are_last_wins() {
        let overrides = vec!["sharing.theta=0.3".to_string(), "sharing.theta=0.6".to_string()];
        let cfg = load_config_with_overrides("[sharing]\ntheta = 0.1\n", &overrides).unwrap();
        assert_eq!(cfg.scenario.sharing.theta, 0.6);
        assert!(parse_override("sharing.theta").is_err());
        assert!(parse_override("sharing.beta=1").is_err());
    }

    #[test]
    fn echo_is_idempotent() {
        let cfg = load_config("[community_b]\nonset = 37.5\ns_max = 7e7\n[numerics]\ndemand_mode = integrates_infected\n").unwrap();
        let again = load_config(&echo_config(&cfg)).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(echo_config(&again), echo_config(&cfg));
    }

    #[test]
    fn continuous_map_endpoints() {
        assert_eq!(continuous_color(0.0), COLOR_BLUE);
        assert_eq!(continuous_color(1.0), COLOR_RED);
        assert_eq!(continuous_color(7.0), COLOR_RED);
    }
}
