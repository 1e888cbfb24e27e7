//! Run configuration: JSON parsing with defaults, presets and path-tagged
//! errors.
//!
//! Antenna fields are merged over a base geometry (the preset's, or the
//! reference geometry when no preset is named). Objects carrying a `kind`
//! tag replace the base object instead of merging into it.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::constants::{C0, F_DESIGN};
use crate::error::{Error, Result};
use crate::fdtd::{CpmlParams, SimConfig};
use crate::ports::SourceWaveform;
use crate::scene::{AntennaParams, Location, VoxelOptions};

pub const PRESETS: [&str; 2] = ["paper-table1", "paper-table1-1ml"];

/// Antenna geometry for a named preset.
pub fn preset_antenna(name: &str) -> Option<AntennaParams> {
    match name {
        "paper-table1" => Some(AntennaParams::paper_table1()),
        "paper-table1-1ml" => Some(AntennaParams::paper_table1_1ml()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// Cell size (m).
    pub delta: f64,
    pub courant_factor: f64,
    pub max_steps: usize,
    pub decay_stop_db: f64,
    pub pml_cells: usize,
    /// Vacuum gap between the antenna and the PML (m), at least a quarter
    /// wavelength at the pattern frequency.
    pub air_margin: f64,
    /// Cells between the PML and the near-to-far-field box.
    pub ntff_gap_cells: usize,
    pub cpml: CpmlParams,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            delta: 0.5e-3,
            courant_factor: 0.99,
            max_steps: 60_000,
            decay_stop_db: -60.0,
            pml_cells: 10,
            air_margin: C0 / F_DESIGN / 4.0,
            ntff_gap_cells: 3,
            cpml: CpmlParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    pub f_min: f64,
    pub f_max: f64,
    pub f_step: f64,
    pub bandwidth_threshold_db: f64,
    /// Frequency of the reported pattern, beam map and metrics (Hz).
    pub pattern_frequency: f64,
    /// Additional far-field frequencies (Hz). Metrics at resonance use the
    /// recorded frequency nearest to the S11 minimum.
    pub extra_pattern_frequencies: Vec<f64>,
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
    pub beam_tolerance_deg: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            f_min: 2.0e9,
            f_max: 9.0e9,
            f_step: 10.0e6,
            bandwidth_threshold_db: -10.0,
            pattern_frequency: F_DESIGN,
            extra_pattern_frequencies: vec![5.0e9, 5.25e9, 5.75e9, 6.0e9],
            theta_step_deg: 2.0,
            phi_step_deg: 2.0,
            beam_tolerance_deg: 15.0,
        }
    }
}

impl AnalysisSettings {
    /// Pattern frequency first, then the extras in ascending order.
    pub fn ntff_frequencies(&self) -> Vec<f64> {
        let mut extra: Vec<f64> = self
            .extra_pattern_frequencies
            .iter()
            .copied()
            .filter(|f| *f != self.pattern_frequency)
            .collect();
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        let mut out = vec![self.pattern_frequency];
        out.extend(extra);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: String,
    pub touchstone: bool,
    pub pattern_csv: bool,
    pub summary: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            touchstone: true,
            pattern_csv: true,
            summary: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub antenna: AntennaParams,
    pub states: Vec<Location>,
    pub sim: SimSettings,
    pub source: SourceWaveform,
    pub analysis: AnalysisSettings,
    pub outputs: OutputSettings,
}

/// Source block with an optional delay, filled in from the bandwidth.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceInput {
    #[serde(default = "default_f0")]
    f0: f64,
    #[serde(default = "default_f_bw")]
    f_bw: f64,
    #[serde(default = "default_amplitude")]
    amplitude: f64,
    delay: Option<f64>,
}

fn default_f0() -> f64 {
    SourceWaveform::default().f0
}

fn default_f_bw() -> f64 {
    SourceWaveform::default().f_bw
}

fn default_amplitude() -> f64 {
    1.0
}

impl Default for SourceInput {
    fn default() -> Self {
        Self {
            f0: default_f0(),
            f_bw: default_f_bw(),
            amplitude: default_amplitude(),
            delay: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    #[serde(default)]
    antenna: Option<Value>,
    states: Option<Vec<String>>,
    #[serde(default)]
    sim: SimSettings,
    #[serde(default)]
    source: SourceInput,
    #[serde(default)]
    analysis: AnalysisSettings,
    #[serde(default)]
    outputs: OutputSettings,
}

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner == ".") {
            (true, _) => inner,
            (false, true) => prefix.to_string(),
            (false, false) => format!("{prefix}.{inner}"),
        };
        parse_err(path, e.into_inner().to_string())
    })
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) if !p.contains_key("kind") => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

/// Parse a JSON run configuration, applying defaults and checking every
/// nested invariant. Errors name the offending JSON path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Value = {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| parse_err(e.path().to_string(), e.into_inner().to_string()))?
    };
    if !root.is_object() {
        return Err(parse_err(".", "top level must be a JSON object"));
    }
    let raw: RawConfig = from_value(root, "")?;

    let base = match &raw.preset {
        Some(name) => preset_antenna(name).ok_or_else(|| {
            parse_err("preset", format!("unknown preset `{name}`, expected one of {PRESETS:?}"))
        })?,
        None => AntennaParams::paper_table1(),
    };
    let mut antenna_value = serde_json::to_value(&base)?;
    if let Some(patch) = raw.antenna {
        if !patch.is_object() {
            return Err(parse_err("antenna", "must be an object"));
        }
        merge(&mut antenna_value, patch);
    }
    let antenna: AntennaParams = from_value(antenna_value, "antenna")?;
    antenna
        .validate()
        .map_err(|(field, msg)| parse_err(format!("antenna.{field}"), msg))?;

    let states = match raw.states {
        Some(list) => {
            if list.is_empty() {
                return Err(parse_err("states", "states must be non-empty"));
            }
            list.iter()
                .enumerate()
                .map(|(n, s)| {
                    Location::parse(s).ok_or_else(|| parse_err(format!("states[{n}]"), format!("unknown state `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?
        }
        None if raw.preset.is_some() => Location::ALL.to_vec(),
        None => return Err(parse_err("states", "states required")),
    };

    let src = raw.source;
    let mut source = SourceWaveform::new(src.f0, src.f_bw, src.amplitude);
    if let Some(d) = src.delay {
        source.delay = d;
    }
    source.validate().map_err(|e| parse_err("source", e.to_string()))?;

    let cfg = RunConfig {
        preset: raw.preset,
        antenna,
        states,
        sim: raw.sim,
        source,
        analysis: raw.analysis,
        outputs: raw.outputs,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<RunConfig> {
        parse_config(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sim;
        let positive = [
            ("sim.delta", s.delta),
            ("sim.courant_factor", s.courant_factor),
            ("analysis.f_min", self.analysis.f_min),
            ("analysis.f_step", self.analysis.f_step),
            ("analysis.pattern_frequency", self.analysis.pattern_frequency),
            ("analysis.theta_step_deg", self.analysis.theta_step_deg),
            ("analysis.phi_step_deg", self.analysis.phi_step_deg),
            ("analysis.beam_tolerance_deg", self.analysis.beam_tolerance_deg),
        ];
        for (path, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(parse_err(path, format!("must be finite and > 0, got {v}")));
            }
        }
        let quarter = C0 / self.analysis.pattern_frequency / 4.0;
        if !(s.air_margin >= quarter * (1.0 - 1e-9)) || !s.air_margin.is_finite() {
            return Err(parse_err(
                "sim.air_margin",
                format!("must be at least a quarter wavelength ({quarter:.6e} m), got {}", s.air_margin),
            ));
        }
        if self.analysis.f_max <= self.analysis.f_min {
            return Err(parse_err("analysis.f_max", "must exceed f_min"));
        }
        if self.analysis.bandwidth_threshold_db >= 0.0 {
            return Err(parse_err("analysis.bandwidth_threshold_db", "must be < 0"));
        }
        if let Some((n, f)) = self
            .analysis
            .extra_pattern_frequencies
            .iter()
            .enumerate()
            .find(|(_, f)| !(**f > 0.0) || !f.is_finite())
        {
            return Err(parse_err(
                format!("analysis.extra_pattern_frequencies[{n}]"),
                format!("must be finite and > 0, got {f}"),
            ));
        }
        if self.outputs.dir.is_empty() {
            return Err(parse_err("outputs.dir", "must be non-empty"));
        }
        if self.states.is_empty() {
            return Err(parse_err("states", "states must be non-empty"));
        }
        self.sim_config()
            .map_err(|e| parse_err("sim", e.to_string()))?;
        Ok(())
    }

    /// Solver configuration derived from the `sim`, `source` and
    /// `analysis` blocks.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(self.sim.delta, self.sim.courant_factor, self.source.clone())?;
        cfg.max_steps = self.sim.max_steps;
        cfg.decay_stop_db = self.sim.decay_stop_db;
        cfg.cpml = self.sim.cpml;
        cfg.recorded_frequencies = self.analysis.ntff_frequencies();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn voxel_options(&self) -> VoxelOptions {
        VoxelOptions {
            air_margin: self.sim.air_margin,
            ..VoxelOptions::new(self.sim.delta, self.sim.pml_cells, self.analysis.pattern_frequency)
        }
    }
}

/// Round-trip helper: the effective config must re-parse to itself.
pub fn echo(cfg: &RunConfig) -> Result<String> {
    cfg.to_json()
}
