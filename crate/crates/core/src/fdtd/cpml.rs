//! Convolutional PML (recursive-convolution form).
//!
//! Auxiliary ψ arrays exist only on the absorbing slabs. Each slab layer
//! carries the recursion pair `(b, c)` and `1/κ − 1` for its position.

use serde::{Deserialize, Serialize};

use crate::constants::{eta0, EPS0};
use crate::error::{Error, Result};
use crate::scene::{Boundary, VoxelGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpmlParams {
    /// Polynomial grading order.
    pub order: f64,
    /// Target normal-incidence reflection.
    pub reflection: f64,
    pub kappa_max: f64,
    /// Maximum CFS α (S/m), graded linearly to zero at the outer wall.
    pub alpha_max: f64,
}

impl Default for CpmlParams {
    fn default() -> Self {
        Self {
            order: 3.0,
            reflection: 1e-8,
            kappa_max: 1.0,
            alpha_max: 0.05,
        }
    }
}

impl CpmlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.order >= 1.0) {
            return Err(Error::Config("cpml order must be >= 1".into()));
        }
        if !(self.reflection > 0.0 && self.reflection < 1.0) {
            return Err(Error::Config("cpml reflection must be in (0, 1)".into()));
        }
        if !(self.kappa_max >= 1.0) || !(self.alpha_max >= 0.0) {
            return Err(Error::Config("cpml requires kappa_max >= 1, alpha_max >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Layer {
    /// Grid index along the absorbing axis.
    pub pos: usize,
    pub b: f64,
    pub c: f64,
    pub kinv_m1: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct AxisLayers {
    /// Layers at integer (E-node) positions.
    pub e: Vec<Layer>,
    /// Layers at half-integer (H) positions; `pos` means `pos + 1/2`.
    pub h: Vec<Layer>,
}

#[derive(Debug, Clone)]
pub(crate) struct Cpml {
    pub axes: [AxisLayers; 3],
    /// ψ for the two E components affected by each axis, `layers × plane`
    /// (layer-fastest for the z axis).
    pub psi_e: [[Vec<f64>; 2]; 3],
    pub psi_h: [[Vec<f64>; 2]; 3],
}

fn layer(rho: f64, pos: usize, p: &CpmlParams, sigma_max: f64, dt: f64) -> Layer {
    let sigma = sigma_max * rho.powf(p.order);
    let kappa = 1.0 + (p.kappa_max - 1.0) * rho.powf(p.order);
    let alpha = p.alpha_max * (1.0 - rho);
    let b = (-(sigma / kappa + alpha) * dt / EPS0).exp();
    let c = if sigma > 0.0 {
        sigma / (sigma * kappa + kappa * kappa * alpha) * (b - 1.0)
    } else {
        0.0
    };
    Layer {
        pos,
        b,
        c,
        kinv_m1: 1.0 / kappa - 1.0,
    }
}

impl Cpml {
    pub fn new(grid: &VoxelGrid, params: &CpmlParams, dt: f64) -> Cpml {
        let npml = grid.pml;
        let d = npml as f64 * grid.delta;
        let sigma_max = if npml > 0 {
            -(params.order + 1.0) * params.reflection.ln() / (2.0 * eta0() * d)
        } else {
            0.0
        };
        let mut axes: [AxisLayers; 3] = Default::default();
        for a in 0..3 {
            let n = grid.dims[a];
            let lo = grid.boundaries[2 * a] == Boundary::Cpml && npml > 0;
            let hi = grid.boundaries[2 * a + 1] == Boundary::Cpml && npml > 0;
            let np = npml as f64;
            for p in 1..n {
                let mut rho = 0.0;
                if lo && p < npml {
                    rho = (np - p as f64) / np;
                }
                if hi && p > n - npml {
                    rho = (p as f64 - (n - npml) as f64) / np;
                }
                if rho > 0.0 {
                    axes[a].e.push(layer(rho, p, params, sigma_max, dt));
                }
            }
            for p in 0..n {
                let mut rho = 0.0;
                if lo && p < npml {
                    rho = (np - p as f64 - 0.5) / np;
                }
                if hi && p >= n - npml {
                    rho = (p as f64 + 0.5 - (n - npml) as f64) / np;
                }
                if rho > 0.0 {
                    axes[a].h.push(layer(rho, p, params, sigma_max, dt));
                }
            }
        }
        let plane = |a: usize| {
            let mut s = 1;
            for b in 0..3 {
                if b != a {
                    s *= grid.dims[b] + 1;
                }
            }
            s
        };
        let psi_e = std::array::from_fn(|a| {
            std::array::from_fn(|_| vec![0.0; axes[a].e.len() * plane(a)])
        });
        let psi_h = std::array::from_fn(|a| {
            std::array::from_fn(|_| vec![0.0; axes[a].h.len() * plane(a)])
        });
        Cpml { axes, psi_e, psi_h }
    }

    pub fn is_active(&self) -> bool {
        self.axes.iter().any(|a| !a.e.is_empty() || !a.h.is_empty())
    }
}
