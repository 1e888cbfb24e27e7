//! Material models: graphene-liquid conductivity (intra-band Kubo term),
//! lossy dielectrics, and their reduction to the real (εr, σ) pairs the
//! time-domain solver consumes.
//!
//! Time convention for complex conductivities is `exp(-iωt)`, so a passive
//! conductor has `Re σ ≥ 0` and the Drude pole sits at `ω = -i/τ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{EPS0, HBAR, K_B, Q_E};
use crate::error::{Error, Result};

/// Conductivity above which a bulk conductor is treated as PEC by the solver.
pub const PEC_SIGMA_THRESHOLD: f64 = 1.0e8;

/// How the graphene liquid enters the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GrapheneModel {
    Sheet,
    Bulk { thickness: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrapheneSpec {
    /// Chemical potential (eV).
    pub mu_c: f64,
    /// Relaxation time (s).
    pub tau: f64,
    /// Temperature (K).
    pub temperature: f64,
    pub model: GrapheneModel,
    /// Bulk conductivity (S/m) that replaces the Kubo-derived value when set.
    pub bulk_sigma_override: Option<f64>,
}

impl Default for GrapheneSpec {
    fn default() -> Self {
        Self {
            mu_c: 0.5,
            tau: 1.0e-12,
            temperature: 300.0,
            model: GrapheneModel::Bulk { thickness: 3.0e-3 },
            bulk_sigma_override: Some(1.0e6),
        }
    }
}

impl GrapheneSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = self.mu_c.is_finite() && self.tau.is_finite() && self.temperature.is_finite();
        if !finite {
            return Err(Error::Domain("graphene parameters must be finite".into()));
        }
        if self.tau <= 0.0 {
            return Err(Error::Domain(format!("tau must be > 0, got {}", self.tau)));
        }
        if self.temperature <= 0.0 {
            return Err(Error::Domain(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if self.mu_c < 0.0 {
            return Err(Error::Domain(format!("mu_c must be >= 0, got {}", self.mu_c)));
        }
        if let GrapheneModel::Bulk { thickness } = self.model {
            if !(thickness > 0.0) {
                return Err(Error::Domain(format!(
                    "bulk thickness must be > 0, got {thickness}"
                )));
            }
        }
        if let Some(s) = self.bulk_sigma_override {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::Domain(format!(
                    "bulk_sigma_override must be finite and > 0, got {s}"
                )));
            }
        }
        Ok(())
    }

    /// Effective bulk conductivity (S/m) at `f`: the override if present,
    /// otherwise the Kubo sheet conductivity spread over the bulk thickness.
    pub fn bulk_sigma(&self, f: f64) -> Result<Complex64> {
        self.validate()?;
        if let Some(s) = self.bulk_sigma_override {
            return Ok(Complex64::new(s, 0.0));
        }
        let sheet = kubo_intraband(self, f)?;
        match self.model {
            GrapheneModel::Bulk { thickness } => sheet_to_bulk(sheet, thickness),
            GrapheneModel::Sheet => Err(Error::Domain(
                "sheet model has no bulk conductivity without an override".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DielectricSpec {
    pub eps_r: f64,
    pub tan_delta: f64,
    /// Frequency at which `tan_delta` is specified (Hz).
    pub f_ref: f64,
}

impl DielectricSpec {
    /// Liquid crystal polymer substrate.
    pub const LCP: DielectricSpec = DielectricSpec {
        eps_r: 2.9,
        tan_delta: 0.0025,
        f_ref: 5.5e9,
    };
    /// Polymethyl methacrylate channel wall.
    pub const PMMA: DielectricSpec = DielectricSpec {
        eps_r: 2.55,
        tan_delta: 0.002,
        f_ref: 5.5e9,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_r >= 1.0) || !self.eps_r.is_finite() {
            return Err(Error::Domain(format!("eps_r must be >= 1, got {}", self.eps_r)));
        }
        if !(self.tan_delta >= 0.0) || !self.tan_delta.is_finite() {
            return Err(Error::Domain(format!(
                "tan_delta must be >= 0, got {}",
                self.tan_delta
            )));
        }
        if !(self.f_ref > 0.0) || !self.f_ref.is_finite() {
            return Err(Error::Domain(format!("f_ref must be > 0, got {}", self.f_ref)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum MaterialSpec {
    Vacuum,
    Pec,
    Dielectric(DielectricSpec),
    BulkConductor { sigma: f64 },
    /// Complex sheet conductance (S), stored as `[re, im]`.
    SheetConductor { sigma_s: [f64; 2] },
    /// Graphene liquid described through its Kubo parameters.
    Graphene(GrapheneSpec),
}

/// Real, frequency-independent parameters for an FDTD edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverMaterial {
    Pec,
    Lossy { eps_r: f64, sigma: f64 },
}

/// Drawing priority used to resolve overlapping regions during rasterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MaterialClass {
    Vacuum = 0,
    Dielectric = 1,
    Conductor = 2,
    Pec = 3,
}

impl MaterialSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            MaterialSpec::Vacuum | MaterialSpec::Pec => Ok(()),
            MaterialSpec::Dielectric(d) => d.validate(),
            MaterialSpec::BulkConductor { sigma } => {
                if *sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain(format!("bulk conductor sigma must be > 0, got {sigma}")))
                }
            }
            MaterialSpec::SheetConductor { sigma_s } => {
                if sigma_s[0] >= 0.0 && sigma_s.iter().all(|v| v.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::Domain("sheet conductance must have Re >= 0".into()))
                }
            }
            MaterialSpec::Graphene(g) => g.validate(),
        }
    }

    pub fn class(&self) -> MaterialClass {
        match self {
            MaterialSpec::Vacuum => MaterialClass::Vacuum,
            MaterialSpec::Pec => MaterialClass::Pec,
            MaterialSpec::Dielectric(_) => MaterialClass::Dielectric,
            MaterialSpec::BulkConductor { .. }
            | MaterialSpec::SheetConductor { .. }
            | MaterialSpec::Graphene(_) => MaterialClass::Conductor,
        }
    }

    /// Reduce to the solver's real (εr, σ) representation at frequency `f`.
    ///
    /// Sheet conductors are spread over one cell of thickness `delta`.
    /// Conductors above [`PEC_SIGMA_THRESHOLD`] become PEC.
    pub fn to_solver(&self, f: f64, delta: f64) -> Result<SolverMaterial> {
        self.validate()?;
        let conductor = |sigma: f64| {
            if sigma > PEC_SIGMA_THRESHOLD {
                SolverMaterial::Pec
            } else {
                SolverMaterial::Lossy { eps_r: 1.0, sigma }
            }
        };
        Ok(match self {
            MaterialSpec::Vacuum => SolverMaterial::Lossy { eps_r: 1.0, sigma: 0.0 },
            MaterialSpec::Pec => SolverMaterial::Pec,
            MaterialSpec::Dielectric(d) => SolverMaterial::Lossy {
                eps_r: d.eps_r,
                sigma: dielectric_loss_sigma(d, d.f_ref)?,
            },
            MaterialSpec::BulkConductor { sigma } => conductor(*sigma),
            MaterialSpec::SheetConductor { sigma_s } => {
                conductor(sheet_to_bulk(Complex64::new(sigma_s[0], sigma_s[1]), delta)?.re)
            }
            MaterialSpec::Graphene(g) => {
                let bulk = match (g.bulk_sigma_override, g.model) {
                    (Some(_), _) | (None, GrapheneModel::Bulk { .. }) => g.bulk_sigma(f)?,
                    (None, GrapheneModel::Sheet) => sheet_to_bulk(kubo_intraband(g, f)?, delta)?,
                };
                conductor(bulk.re)
            }
        })
    }
}

/// Intra-band (Drude-like) Kubo sheet conductivity of graphene, in S.
///
/// `σ(ω) = e² kB T / (π ħ²) · τ / (1 − iωτ) · [μc/(kB T) + 2 ln(1 + exp(−μc/(kB T)))]`
pub fn kubo_intraband(spec: &GrapheneSpec, f: f64) -> Result<Complex64> {
    if !f.is_finite() {
        return Err(Error::Domain(format!("frequency must be finite, got {f}")));
    }
    if f < 0.0 {
        return Err(Error::Domain(format!("frequency must be >= 0, got {f}")));
    }
    spec.validate()?;
    Ok(kubo_intraband_omega(spec, 2.0 * std::f64::consts::PI * f))
}

/// Same as [`kubo_intraband`] but takes a signed angular frequency.
pub fn kubo_intraband_omega(spec: &GrapheneSpec, omega: f64) -> Complex64 {
    let kt = K_B * spec.temperature;
    let x = spec.mu_c * Q_E / kt;
    // ln_1p keeps the thermal term accurate once exp(-x) underflows relative to 1.
    let bracket = x + 2.0 * (-x).exp().ln_1p();
    let prefactor = Q_E * Q_E * kt / (std::f64::consts::PI * HBAR * HBAR);
    let drude = Complex64::new(spec.tau, 0.0) / Complex64::new(1.0, -omega * spec.tau);
    drude * (prefactor * bracket)
}

pub fn sheet_to_bulk(sigma_s: Complex64, thickness: f64) -> Result<Complex64> {
    if !(thickness > 0.0) || !thickness.is_finite() {
        return Err(Error::Domain(format!("thickness must be > 0, got {thickness}")));
    }
    Ok(sigma_s / thickness)
}

/// Equivalent conductivity `σ = 2πf ε0 εr tanδ` of a lossy dielectric.
pub fn dielectric_loss_sigma(spec: &DielectricSpec, f: f64) -> Result<f64> {
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::Domain(format!("frequency must be > 0, got {f}")));
    }
    Ok(2.0 * std::f64::consts::PI * f * EPS0 * spec.eps_r * spec.tan_delta)
}
