//! Yee-grid leapfrog Maxwell solver.
//!
//! E lives on cell edges and H on cell faces of the node-padded layout
//! described in [`crate::scene::VoxelGrid`]. One step advances H by half a
//! step from curl E, then E by a full step from curl H, lumped sources and
//! CPML corrections.

mod coeffs;
mod cpml;
mod engine;

pub use coeffs::{init_coeffs, UpdateCoeffs};
pub use cpml::CpmlParams;
pub use engine::{FieldState, Recorder, RunOutcome, Simulation, Termination};

use serde::{Deserialize, Serialize};

use crate::constants::C0;
use crate::error::{Error, Result};
use crate::ports::SourceWaveform;

/// Stable time step `factor · Δ / (c √3)` for cubic cells.
pub fn courant_dt(delta: f64, factor: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::Domain(format!(
            "courant factor must be in (0, 1], got {factor}"
        )));
    }
    Ok(factor * delta / (C0 * 3f64.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub delta: f64,
    pub dt: f64,
    pub courant_factor: f64,
    pub max_steps: usize,
    /// Stop once the port-voltage envelope is this far below its peak (dB, < 0).
    pub decay_stop_db: f64,
    /// Frequencies for running-DFT accumulators (Hz).
    pub recorded_frequencies: Vec<f64>,
    pub cpml: CpmlParams,
    pub source: SourceWaveform,
}

impl SimConfig {
    pub fn new(delta: f64, courant_factor: f64, source: SourceWaveform) -> Result<Self> {
        let cfg = Self {
            delta,
            dt: courant_dt(delta, courant_factor)?,
            courant_factor,
            max_steps: 60_000,
            decay_stop_db: -60.0,
            recorded_frequencies: vec![crate::constants::F_DESIGN],
            cpml: CpmlParams::default(),
            source,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let limit = courant_dt(self.delta, 1.0)?;
        if !(self.dt > 0.0) || self.dt > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt {:e} s exceeds the Courant limit {:e} s",
                self.dt, limit
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be > 0".into()));
        }
        if !(self.decay_stop_db < 0.0) {
            return Err(Error::Config("decay_stop_db must be < 0".into()));
        }
        if self.recorded_frequencies.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config("recorded frequencies must be > 0".into()));
        }
        self.cpml.validate()?;
        self.source.validate()?;
        Ok(())
    }
}
