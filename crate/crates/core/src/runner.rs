//! Per-state simulation pipeline and the multi-state reports.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::farfield::{directivity_and_gain, ntff_transform, FarFieldPattern, NtffSurface, PatternMetrics};
use crate::fdtd::{Simulation, Termination};
use crate::ports::{fractional_bandwidth, frequency_grid, port_spectra, resonant_frequency, PortRecorder, PortSpectra};
use crate::scene::{build_scene, voxelize_with, Location, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TerminationInfo {
    pub reason: &'static str,
    pub level_db: f64,
    pub warning: bool,
}

impl From<Termination> for TerminationInfo {
    fn from(t: Termination) -> Self {
        let (reason, level_db) = match t {
            Termination::Decayed { level_db } => ("decayed", level_db),
            Termination::MaxSteps { level_db } => ("max_steps", level_db),
        };
        Self {
            reason,
            level_db,
            warning: t.is_warning(),
        }
    }
}

/// Far-field pattern and its metrics at one recorded frequency.
#[derive(Debug, Clone)]
pub struct PatternResult {
    pub pattern: FarFieldPattern,
    pub metrics: PatternMetrics,
}

#[derive(Debug, Clone)]
pub struct StateResult {
    pub state: Location,
    pub spectra: PortSpectra,
    pub resonance_hz: Option<f64>,
    pub min_s11_db: f64,
    /// −10 dB fractional bandwidth (%) or the reason it is unavailable.
    pub bandwidth: std::result::Result<f64, String>,
    /// One entry per recorded far-field frequency, the pattern frequency first.
    pub patterns: Vec<PatternResult>,
    pub termination: TerminationInfo,
    pub steps: usize,
    pub cells: usize,
    pub wall_seconds: f64,
}

impl StateResult {
    /// Pattern at the configured pattern frequency.
    pub fn design(&self) -> &PatternResult {
        &self.patterns[0]
    }

    /// Pattern at the recorded frequency nearest to resonance.
    pub fn at_resonance(&self) -> &PatternResult {
        let Some(fr) = self.resonance_hz else {
            return self.design();
        };
        self.patterns
            .iter()
            .min_by(|a, b| (a.pattern.f - fr).abs().total_cmp(&(b.pattern.f - fr).abs()))
            .unwrap_or(self.design())
    }
}

/// Voxel grid of one state.
pub fn state_grid(cfg: &RunConfig, state: Location) -> Result<VoxelGrid> {
    let scene = build_scene(&cfg.antenna, state)?;
    voxelize_with(&scene, &cfg.voxel_options())
}

/// Run one state end to end.
pub fn run_state(cfg: &RunConfig, state: Location) -> Result<StateResult> {
    let started = Instant::now();
    let grid = state_grid(cfg, state)?;
    let sim_cfg = cfg.sim_config()?;
    let mut sim = Simulation::new(&grid, &sim_cfg)?;
    let mut port = PortRecorder::new(&grid, sim_cfg.dt)?;
    let mut ntff = NtffSurface::enclosing(&grid, cfg.sim.ntff_gap_cells, &sim_cfg.recorded_frequencies, sim_cfg.dt)?;
    log::info!(
        "{state}: {}x{}x{} cells, dt = {:.3e} s",
        grid.dims[0],
        grid.dims[1],
        grid.dims[2],
        sim_cfg.dt
    );
    let outcome = sim.run(&mut [&mut port, &mut ntff])?;
    let record = port.finish();

    let a = &cfg.analysis;
    let spectra = port_spectra(&record, &frequency_grid(a.f_min, a.f_max, a.f_step))?;
    let resonance_hz = resonant_frequency(&spectra).ok();
    let min_s11_db = spectra
        .s11_db()
        .iter()
        .zip(&spectra.valid)
        .filter(|(_, v)| **v)
        .map(|(d, _)| *d)
        .fold(f64::INFINITY, f64::min);
    let bandwidth = fractional_bandwidth(&spectra, a.bandwidth_threshold_db).map_err(|e| e.to_string());

    let mut patterns = Vec::new();
    for &f in ntff.frequencies() {
        let pattern = ntff_transform(&ntff, f, a.theta_step_deg, a.phi_step_deg)?;
        let at_f = port_spectra(&record, &[f])?;
        let p_acc = 0.5 * (at_f.v[0] * at_f.i[0].conj()).re;
        let metrics = if p_acc > 0.0 {
            directivity_and_gain(&pattern, p_acc)?
        } else {
            // no usable accepted power (fully reflected band edge): keep
            // the directivity, leave the gain undefined
            log::warn!("{state}: accepted power {p_acc:e} W at {f} Hz, gain undefined");
            let mut m = directivity_and_gain(&pattern, pattern.radiated_power())?;
            m.gain_dbi = f64::NAN;
            m.accepted_power = p_acc;
            m
        };
        patterns.push(PatternResult { pattern, metrics });
    }

    let [nx, ny, nz] = grid.dims;
    Ok(StateResult {
        state,
        spectra,
        resonance_hz,
        min_s11_db,
        bandwidth,
        patterns,
        termination: outcome.termination.into(),
        steps: outcome.steps,
        cells: nx * ny * nz,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// A failed state keeps its label and error message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateError {
    pub state: Location,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamEntry {
    pub state: Location,
    pub peak_theta_deg: f64,
    pub peak_azimuth_deg: f64,
    pub matched_beam: String,
    pub expected_beam: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamMap {
    pub tolerance_deg: f64,
    pub entries: Vec<BeamEntry>,
    /// True when six distinct states each claim a distinct label.
    pub bijection: bool,
    pub violations: Vec<String>,
}

/// Smallest absolute angular difference (degrees).
pub fn azimuth_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Label whose azimuth lies within `tol` of `phi`, nearest first.
pub fn match_beam(phi: f64, tol: f64) -> Option<&'static str> {
    Location::ALL
        .iter()
        .map(|l| l.beam())
        .filter(|(_, az)| azimuth_distance(phi, *az) <= tol)
        .min_by(|a, b| azimuth_distance(phi, a.1).total_cmp(&azimuth_distance(phi, b.1)))
        .map(|(label, _)| label)
}

/// Beam map from `(state, peak θ, peak φ)` triples.
pub fn beam_map(peaks: &[(Location, f64, f64)], tol: f64, failed: &[Location]) -> BeamMap {
    let entries: Vec<BeamEntry> = peaks
        .iter()
        .map(|&(state, theta, phi)| BeamEntry {
            state,
            peak_theta_deg: theta,
            peak_azimuth_deg: phi,
            matched_beam: match_beam(phi, tol).unwrap_or("unmatched").to_string(),
            expected_beam: state.beam().0.to_string(),
        })
        .collect();
    let mut violations = Vec::new();
    for s in failed {
        violations.push(format!("{s}: simulation failed"));
    }
    for e in &entries {
        if e.matched_beam == "unmatched" {
            violations.push(format!("{}: peak azimuth {} deg matches no beam", e.state, e.peak_azimuth_deg));
        }
    }
    for (label, _) in Location::ALL.iter().map(|l| l.beam()) {
        let n = entries.iter().filter(|e| e.matched_beam == label).count();
        if n > 1 {
            violations.push(format!("{label} claimed by {n} states"));
        } else if n == 0 {
            violations.push(format!("{label} not claimed"));
        }
    }
    let mut states: Vec<Location> = entries.iter().map(|e| e.state).collect();
    states.sort();
    states.dedup();
    if states.len() != entries.len() {
        violations.push("duplicate states in the run".into());
    }
    BeamMap {
        tolerance_deg: tol,
        bijection: violations.is_empty(),
        entries,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stability {
    pub resonances_hz: Vec<(Location, f64)>,
    /// Largest `|f_a − f_b| / ((f_a + f_b)/2)` over all pairs.
    pub max_pairwise_deviation: f64,
}

/// `None` for fewer than two resonances.
pub fn stability(res: &[(Location, f64)]) -> Option<Stability> {
    if res.len() < 2 {
        return None;
    }
    let mut worst = 0.0f64;
    for (n, a) in res.iter().enumerate() {
        for b in &res[n + 1..] {
            worst = worst.max((a.1 - b.1).abs() / (0.5 * (a.1 + b.1)));
        }
    }
    Some(Stability {
        resonances_hz: res.to_vec(),
        max_pairwise_deviation: worst,
    })
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// In the order of `cfg.states`.
    pub results: Vec<std::result::Result<StateResult, StateError>>,
    pub beam_map: BeamMap,
    pub stability: Option<Stability>,
}

impl RunReport {
    pub fn ok(&self) -> impl Iterator<Item = &StateResult> {
        self.results.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn get(&self, state: Location) -> Option<&StateResult> {
        self.ok().find(|r| r.state == state)
    }
}

/// Run every configured state, at most `jobs` at a time. A failing state is
/// recorded and does not stop the others.
pub fn run_states(cfg: &RunConfig, jobs: usize) -> Result<RunReport> {
    cfg.validate()?;
    let jobs = jobs.max(1);
    let run = |s: &Location| {
        run_state(cfg, *s).map_err(|e| {
            log::error!("{s}: {e}");
            StateError {
                state: *s,
                error: e.to_string(),
            }
        })
    };
    let results: Vec<_> = if jobs == 1 {
        cfg.states.iter().map(run).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| cfg.states.par_iter().map(run).collect())
    };
    Ok(assemble(cfg, results))
}

fn assemble(cfg: &RunConfig, results: Vec<std::result::Result<StateResult, StateError>>) -> RunReport {
    let peaks: Vec<_> = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|r| {
            let (t, p) = r.design().metrics.peak;
            (r.state, t, p)
        })
        .collect();
    let failed: Vec<_> = results.iter().filter_map(|r| r.as_ref().err()).map(|e| e.state).collect();
    let res: Vec<_> = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter_map(|r| r.resonance_hz.map(|f| (r.state, f)))
        .collect();
    RunReport {
        beam_map: beam_map(&peaks, cfg.analysis.beam_tolerance_deg, &failed),
        stability: stability(&res),
        results,
    }
}
