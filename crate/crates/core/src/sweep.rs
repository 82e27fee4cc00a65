//! Parameter sweeps over the protocol bounds, figure presets, and
//! machine-readable output.
//!
//! A sweep evaluates a list of protocols over one axis (`g`, `n_s`,
//! `m_probes`, or `a`) and emits one row per (axis point, protocol). Points
//! that leave the physical region are kept as rows with a skip reason rather
//! than dropped, so the row count is always `points x protocols`. Points are
//! evaluated in parallel; output order is deterministic (axis order, then
//! protocol order).

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{evaluate, Protocol, ProtocolBound};
use crate::error::{Error, Result};
use crate::nla_map::{g_max, ns_max, NlaConfig};
use crate::qi_states::QiScenario;

/// Figure presets shipped with the crate (see `data/figures.json`).
pub const EMBEDDED_PRESETS: &str = include_str!("../data/figures.json");

/// A numeric parameter that may also be the symbolic value `"g_max"`,
/// resolved against the sweep's `(kappa, n_b)` at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Symbol(SymbolicParam),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolicParam {
    #[serde(rename = "g_max")]
    GMax,
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "g")]
    Gain,
    #[serde(rename = "n_s")]
    SignalPhotons,
    #[serde(rename = "m_probes")]
    Probes,
    #[serde(rename = "a")]
    EfficiencyDivisor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    #[default]
    Linear,
    Log,
}

/// How the signal energy is chosen at each axis point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NsPolicy {
    /// Use the spec's base `n_s` everywhere.
    #[default]
    Fixed,
    /// Set `n_s` to the given fraction of the local maximum `ns_max(g)`;
    /// points where no maximum exists are skipped with a reason.
    LocalMaxFraction(f64),
}

/// Declarative description of one sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub protocols: Vec<Protocol>,
    pub n_s: f64,
    pub n_b: f64,
    pub kappa: f64,
    pub m_probes: u64,
    #[serde(default = "one")]
    pub g: ParamValue,
    #[serde(default = "one_f")]
    pub a: f64,
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: ParamValue,
    pub points: usize,
    #[serde(default)]
    pub scale: AxisScale,
    #[serde(default)]
    pub ns_policy: NsPolicy,
}

fn one() -> ParamValue {
    ParamValue::Number(1.0)
}

fn one_f() -> f64 {
    1.0
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.protocols.is_empty() {
            return Err(Error::InvalidSpec("no protocols selected".into()));
        }
        if self.points < 2 {
            return Err(Error::InvalidSpec(format!(
                "points = {} must be >= 2",
                self.points
            )));
        }
        if let NsPolicy::LocalMaxFraction(f) = self.ns_policy {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "ns_policy fraction {f} outside (0, 1]"
                )));
            }
        }
        QiScenario::new(self.n_s, self.n_b, self.kappa, self.m_probes)?;
        let stop = self.resolve(self.stop)?;
        if !stop.is_finite() || !self.start.is_finite() {
            return Err(Error::InvalidSpec("axis endpoints must be finite".into()));
        }
        if self.scale == AxisScale::Log && (self.start <= 0.0 || stop <= 0.0) {
            return Err(Error::InvalidSpec(
                "log scale requires positive endpoints".into(),
            ));
        }
        Ok(())
    }

    /// Resolves `"g_max"` against this spec's `(kappa, n_b)`.
    pub fn resolve(&self, v: ParamValue) -> Result<f64> {
        match v {
            ParamValue::Number(x) => Ok(x),
            ParamValue::Symbol(SymbolicParam::GMax) => {
                g_max(self.kappa, 2.0 * self.n_b / self.kappa)
            }
        }
    }

    pub fn axis_values(&self) -> Result<Vec<f64>> {
        let stop = self.resolve(self.stop)?;
        let n = self.points;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let x = match self.scale {
                AxisScale::Linear => self.start + (stop - self.start) * t,
                AxisScale::Log => (self.start.ln() + (stop.ln() - self.start.ln()) * t).exp(),
            };
            // the probe count is an integer axis
            values.push(if self.axis == SweepAxis::Probes {
                x.round().max(1.0)
            } else {
                x
            });
        }
        Ok(values)
    }
}

/// One evaluated (axis point, protocol) record.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub protocol: Protocol,
    pub probability: Option<f64>,
    pub log_probability: Option<f64>,
    pub exponent_per_use: Option<f64>,
    pub s_star: Option<f64>,
    pub physical: bool,
    pub skip_reason: Option<String>,
}

impl SweepRow {
    fn evaluated(axis_value: f64, pb: &ProtocolBound) -> Self {
        SweepRow {
            axis_value,
            protocol: pb.protocol,
            probability: Some(pb.bound.probability),
            log_probability: Some(pb.bound.log_probability),
            exponent_per_use: Some(pb.bound.exponent_per_use),
            s_star: pb.bound.s_star,
            physical: true,
            skip_reason: None,
        }
    }

    fn skipped(axis_value: f64, protocol: Protocol, reason: String) -> Self {
        SweepRow {
            axis_value,
            protocol,
            probability: None,
            log_probability: None,
            exponent_per_use: None,
            s_star: None,
            physical: false,
            skip_reason: Some(reason),
        }
    }
}

/// Evaluates the whole sweep. The returned rows are ordered by axis point,
/// then by the spec's protocol order; every requested point appears, either
/// populated or carrying a skip reason.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let values = spec.axis_values()?;
    let per_point: Vec<Vec<SweepRow>> = values
        .par_iter()
        .map(|&x| evaluate_point(spec, x))
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn evaluate_point(spec: &SweepSpec, axis_value: f64) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(spec.protocols.len());
    let skip_all = |reason: String, rows: &mut Vec<SweepRow>| {
        for &p in &spec.protocols {
            rows.push(SweepRow::skipped(axis_value, p, reason.clone()));
        }
    };

    // apply the axis to the base point
    let mut n_s = spec.n_s;
    let mut m = spec.m_probes;
    let mut gain = spec.resolve(spec.g)?;
    let mut a = spec.a;
    match spec.axis {
        SweepAxis::Gain => gain = axis_value,
        SweepAxis::SignalPhotons => n_s = axis_value,
        SweepAxis::Probes => m = axis_value as u64,
        SweepAxis::EfficiencyDivisor => a = axis_value,
    }

    if let NsPolicy::LocalMaxFraction(f) = spec.ns_policy {
        match ns_max(spec.n_b, spec.kappa, gain) {
            Ok(cap) => n_s = f * cap,
            Err(e) => {
                skip_all(format!("ns_max unavailable: {e}"), &mut rows);
                return Ok(rows);
            }
        }
    }

    let scenario = match QiScenario::new(n_s, spec.n_b, spec.kappa, m) {
        Ok(sc) => sc,
        Err(e) => {
            skip_all(e.to_string(), &mut rows);
            return Ok(rows);
        }
    };
    let nla = match NlaConfig::new(gain, a) {
        Ok(n) => n,
        Err(e) => {
            skip_all(e.to_string(), &mut rows);
            return Ok(rows);
        }
    };

    for &protocol in &spec.protocols {
        match evaluate(protocol, &scenario, &nla) {
            Ok(pb) => rows.push(SweepRow::evaluated(axis_value, &pb)),
            Err(
                e @ (Error::PhysicalityViolation { .. }
                | Error::Domain(_)
                | Error::GainOutOfRange(_)
                | Error::NonPhysical(_)),
            ) => rows.push(SweepRow::skipped(axis_value, protocol, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Fixed CSV schema shared by every sweep output.
pub const CSV_HEADER: &str =
    "axis,protocol,probability,log_probability,exponent_per_use,s_star,physical,skip_reason";

/// Renders rows to CSV ('.' decimal, no locale, deterministic formatting).
pub fn csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
    for r in rows {
        let reason = r
            .skip_reason
            .as_deref()
            .unwrap_or("")
            .replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.axis_value,
            r.protocol,
            fmt(r.probability),
            fmt(r.log_probability),
            fmt(r.exponent_per_use),
            fmt(r.s_star),
            r.physical,
            reason
        ));
    }
    out
}

#[derive(Debug, Serialize)]
struct SweepMetadata<'a> {
    spec: &'a SweepSpec,
    resolved_stop: f64,
    resolved_gain: f64,
    library_version: &'static str,
    wall_time_ms: u128,
    rows: usize,
}

/// Runs a sweep and writes `out_path` (CSV) plus an adjacent
/// `<out_path>.meta.json` with the spec echo, library version and wall time.
pub fn write_sweep(spec: &SweepSpec, out_path: &Path) -> Result<Vec<SweepRow>> {
    let started = Instant::now();
    let rows = run_sweep(spec)?;
    std::fs::write(out_path, csv_string(&rows))?;
    let meta = SweepMetadata {
        spec,
        resolved_stop: spec.resolve(spec.stop)?,
        resolved_gain: spec.resolve(spec.g)?,
        library_version: env!("CARGO_PKG_VERSION"),
        wall_time_ms: started.elapsed().as_millis(),
        rows: rows.len(),
    };
    let meta_path = meta_path(out_path);
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
    Ok(rows)
}

fn meta_path(csv_path: &Path) -> PathBuf {
    let mut os = csv_path.as_os_str().to_owned();
    os.push(".meta.json");
    PathBuf::from(os)
}

/// One named sweep belonging to a figure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigurePreset {
    pub name: String,
    pub spec: SweepSpec,
}

/// Parses the presets for one figure from a presets JSON document.
pub fn figure_presets_from_str(json: &str, figure: &str) -> Result<Vec<FigurePreset>> {
    let all: std::collections::BTreeMap<String, Vec<FigurePreset>> = serde_json::from_str(json)?;
    all.get(figure).cloned().ok_or_else(|| {
        Error::InvalidSpec(format!(
            "unknown figure '{figure}' (available: {})",
            all.keys().cloned().collect::<Vec<_>>().join(", ")
        ))
    })
}

/// Presets for one figure from the embedded data file.
pub fn figure_presets(figure: &str) -> Result<Vec<FigurePreset>> {
    figure_presets_from_str(EMBEDDED_PRESETS, figure)
}

/// Names of all embedded figures.
pub fn figure_names() -> Vec<String> {
    let all: std::collections::BTreeMap<String, serde_json::Value> =
        serde_json::from_str(EMBEDDED_PRESETS).expect("embedded presets parse");
    all.keys().cloned().collect()
}

/// Runs every preset of a figure, writing `<out_dir>/<name>.csv` (+ metadata)
/// per panel. Returns the CSV paths.
pub fn run_figure(figure: &str, out_dir: &Path) -> Result<Vec<PathBuf>> {
    run_figure_with_presets(EMBEDDED_PRESETS, figure, out_dir)
}

pub fn run_figure_with_presets(
    presets_json: &str,
    figure: &str,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let presets = figure_presets_from_str(presets_json, figure)?;
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    for preset in &presets {
        let path = out_dir.join(format!("{}.csv", preset.name));
        write_sweep(&preset.spec, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
