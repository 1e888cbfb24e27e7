//! Field storage, leapfrog stepping and the run loop.

use rayon::prelude::*;

use super::coeffs::{init_coeffs, UpdateCoeffs};
use super::cpml::{Cpml, Layer};
use super::SimConfig;
use crate::constants::{EPS0, MU0};
use crate::error::{Error, Result};
use crate::scene::{Boundary, PortSite, VoxelGrid};

/// Staggered E and H arrays, all in the node-padded layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub e: [Vec<f64>; 3],
    pub h: [Vec<f64>; 3],
    pub step_index: usize,
    pub time: f64,
    dims: [usize; 3],
    delta: f64,
}

impl FieldState {
    pub fn zeros(dims: [usize; 3], delta: f64) -> Self {
        let n = (dims[0] + 1) * (dims[1] + 1) * (dims[2] + 1);
        Self {
            e: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            h: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            step_index: 0,
            time: 0.0,
            dims,
            delta,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * (self.dims[1] + 1) + j) * (self.dims[2] + 1) + k
    }

    /// Voltage of the upper node of a z-edge relative to its lower node.
    pub fn z_edge_voltage(&self, node: [usize; 3]) -> f64 {
        -self.e[2][self.idx(node[0], node[1], node[2])] * self.delta
    }

    /// Current in +z through the z-edge at `node`, from the H loop around it.
    pub fn z_loop_current(&self, node: [usize; 3]) -> f64 {
        let [i, j, k] = node;
        let hy = &self.h[1];
        let hx = &self.h[0];
        let c = self.idx(i, j, k);
        let circ = (hy[c] - hy[self.idx(i - 1, j, k)]) - (hx[c] - hx[self.idx(i, j - 1, k)]);
        circ * self.delta
    }

    /// Electric energy `½ Σ ε E² Δ³` (J).
    pub fn electric_energy(&self, coeffs: &UpdateCoeffs) -> f64 {
        let v = self.delta.powi(3);
        let mut w = 0.0;
        for a in 0..3 {
            for (e, &id) in self.e[a].iter().zip(&coeffs.ids[a]) {
                w += coeffs.eps_r[id as usize] * e * e;
            }
        }
        0.5 * EPS0 * w * v
    }

    /// Magnetic energy from the product of two consecutive half-step H
    /// states, which together with [`Self::electric_energy`] forms the
    /// quantity the Yee scheme conserves in lossless media.
    pub fn magnetic_cross_energy(&self, h_prev: &[Vec<f64>; 3]) -> f64 {
        let v = self.delta.powi(3);
        let mut w = 0.0;
        for a in 0..3 {
            w += self.h[a].iter().zip(&h_prev[a]).map(|(x, y)| x * y).sum::<f64>();
        }
        0.5 * MU0 * w * v
    }

    /// Discrete divergence of H in cell `(i, j, k)` scaled by Δ (A/m).
    pub fn div_h(&self, i: usize, j: usize, k: usize) -> f64 {
        let c = self.idx(i, j, k);
        (self.h[0][self.idx(i + 1, j, k)] - self.h[0][c])
            + (self.h[1][self.idx(i, j + 1, k)] - self.h[1][c])
            + (self.h[2][self.idx(i, j, k + 1)] - self.h[2][c])
    }
}

/// Observer invoked after every half step.
pub trait Recorder {
    /// Called with H at `t = (n + 1/2)·dt`.
    fn on_h(&mut self, _fields: &FieldState, _t: f64) {}
    /// Called with E at `t = (n + 1)·dt`.
    fn on_e(&mut self, _fields: &FieldState, _t: f64) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Port-voltage envelope fell below the stop level.
    Decayed { level_db: f64 },
    /// Ran out of steps; reported as a warning.
    MaxSteps { level_db: f64 },
}

impl Termination {
    pub fn is_warning(&self) -> bool {
        matches!(self, Termination::MaxSteps { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub steps: usize,
    pub termination: Termination,
    pub peak_voltage: f64,
}

pub struct Simulation {
    grid: VoxelGrid,
    cfg: SimConfig,
    coeffs: UpdateCoeffs,
    fields: FieldState,
    cpml: Cpml,
    pmc: bool,
}

impl Simulation {
    pub fn new(grid: &VoxelGrid, cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let coeffs = init_coeffs(grid, cfg)?;
        let cpml = Cpml::new(grid, &cfg.cpml, cfg.dt);
        Ok(Self {
            fields: FieldState::zeros(grid.dims, grid.delta),
            pmc: grid.boundaries.contains(&Boundary::Pmc),
            grid: grid.clone(),
            cfg: cfg.clone(),
            coeffs,
            cpml,
        })
    }

    pub fn fields(&self) -> &FieldState {
        &self.fields
    }

    /// Direct access for initial conditions.
    pub fn fields_mut(&mut self) -> &mut FieldState {
        &mut self.fields
    }

    pub fn coeffs(&self) -> &UpdateCoeffs {
        &self.coeffs
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn port(&self) -> Option<PortSite> {
        self.grid.port
    }

    /// Gap voltage of the active port, if any.
    pub fn port_voltage(&self) -> Option<f64> {
        self.grid.port.map(|p| {
            let node = self.grid.lumped[p.element].index;
            self.fields.z_edge_voltage(node)
        })
    }

    /// Advance one full step without recorders.
    pub fn step(&mut self) -> Result<()> {
        self.step_with(&mut [])
    }

    pub fn step_with(&mut self, recorders: &mut [&mut dyn Recorder]) -> Result<()> {
        if self.fields.step_index >= self.cfg.max_steps {
            return Err(Error::Config(format!(
                "step index {} reached max_steps",
                self.fields.step_index
            )));
        }
        let dt = self.cfg.dt;
        let n = self.fields.step_index;
        self.update_h();
        if self.cpml.is_active() {
            self.cpml_h();
        }
        let t_half = (n as f64 + 0.5) * dt;
        for r in recorders.iter_mut() {
            r.on_h(&self.fields, t_half);
        }
        self.update_e();
        if self.pmc {
            self.pmc_e();
        }
        if self.cpml.is_active() {
            self.cpml_e();
        }
        if !self.coeffs.sources.is_empty() {
            let vs = self.cfg.source.value(t_half);
            for &(axis, idx, cs) in &self.coeffs.sources {
                self.fields.e[axis as usize][idx] -= cs * vs;
            }
        }
        self.fields.step_index = n + 1;
        self.fields.time = (n + 1) as f64 * dt;
        let t = self.fields.time;
        for r in recorders.iter_mut() {
            r.on_e(&self.fields, t);
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let step = self.fields.step_index;
        if let Some(p) = self.grid.port {
            let node = self.grid.lumped[p.element].index;
            let v = self.fields.z_edge_voltage(node);
            if !v.is_finite() || v.abs() > 1e100 {
                return Err(Error::Instability {
                    step,
                    i: node[0],
                    j: node[1],
                    k: node[2],
                    detail: format!("port voltage {v}"),
                });
            }
        }
        let [nx, ny, nz] = self.grid.dims;
        let (i, j, k) = (nx / 2, ny / 2, nz / 2);
        let idx = self.fields.idx(i, j, k);
        for a in 0..3 {
            let v = self.fields.e[a][idx];
            if !v.is_finite() || v.abs() > 1e100 {
                return Err(Error::Instability {
                    step,
                    i,
                    j,
                    k,
                    detail: format!("interior probe E[{a}] = {v}"),
                });
            }
        }
        Ok(())
    }

    /// Step until the port-voltage envelope decays `decay_stop_db` below its
    /// peak or `max_steps` is reached.
    pub fn run(&mut self, recorders: &mut [&mut dyn Recorder]) -> Result<RunOutcome> {
        let src = self.cfg.source;
        let dt = self.cfg.dt;
        let f_low = (src.f0 - src.f_bw).max(0.1 * src.f0);
        let window = ((1.0 / (f_low * dt)).ceil() as usize).max(50);
        let stop = 10f64.powf(self.cfg.decay_stop_db / 20.0);
        let t_off = src.delay * 2.0;
        let mut peak = 0.0f64;
        let mut win_max = 0.0f64;
        let mut last_level = 0.0f64;
        while self.fields.step_index < self.cfg.max_steps {
            self.step_with(recorders)?;
            let n = self.fields.step_index;
            if n % 100 == 0 {
                self.check_finite()?;
            }
            let v = self.port_voltage().unwrap_or(0.0).abs();
            peak = peak.max(v);
            win_max = win_max.max(v);
            if n % window == 0 {
                last_level = if peak > 0.0 { win_max / peak } else { 0.0 };
                if self.fields.time > t_off && peak > 0.0 && win_max <= stop * peak {
                    self.check_finite()?;
                    return Ok(RunOutcome {
                        steps: n,
                        termination: Termination::Decayed {
                            level_db: 20.0 * last_level.max(1e-300).log10(),
                        },
                        peak_voltage: peak,
                    });
                }
                win_max = 0.0;
            }
        }
        self.check_finite()?;
        Ok(RunOutcome {
            steps: self.fields.step_index,
            termination: Termination::MaxSteps {
                level_db: 20.0 * last_level.max(1e-300).log10(),
            },
            peak_voltage: peak,
        })
    }

    fn update_h(&mut self) {
        let [nx, ny, nz] = self.grid.dims;
        let sy = nz + 1;
        let sx = (ny + 1) * sy;
        let ch = self.coeffs.ch;
        let [ex, ey, ez] = &self.fields.e;
        let [hx, hy, hz] = &mut self.fields.h;

        hx.par_chunks_mut(sx).enumerate().for_each(|(i, plane)| {
            for j in 0..ny {
                let b = i * sx + j * sy;
                let out = &mut plane[j * sy..j * sy + nz];
                let ez0 = &ez[b..b + nz];
                let ez1 = &ez[b + sy..b + sy + nz];
                let ey0 = &ey[b..b + nz];
                let ey1 = &ey[b + 1..b + 1 + nz];
                for k in 0..nz {
                    out[k] -= ch * ((ez1[k] - ez0[k]) - (ey1[k] - ey0[k]));
                }
            }
        });
        hy.par_chunks_mut(sx).enumerate().for_each(|(i, plane)| {
            if i >= nx {
                return;
            }
            for j in 0..=ny {
                let b = i * sx + j * sy;
                let out = &mut plane[j * sy..j * sy + nz];
                let ex0 = &ex[b..b + nz];
                let ex1 = &ex[b + 1..b + 1 + nz];
                let ez0 = &ez[b..b + nz];
                let ez1 = &ez[b + sx..b + sx + nz];
                for k in 0..nz {
                    out[k] -= ch * ((ex1[k] - ex0[k]) - (ez1[k] - ez0[k]));
                }
            }
        });
        hz.par_chunks_mut(sx).enumerate().for_each(|(i, plane)| {
            if i >= nx {
                return;
            }
            for j in 0..ny {
                let b = i * sx + j * sy;
                let out = &mut plane[j * sy..j * sy + nz + 1];
                let ey0 = &ey[b..b + nz + 1];
                let ey1 = &ey[b + sx..b + sx + nz + 1];
                let ex0 = &ex[b..b + nz + 1];
                let ex1 = &ex[b + sy..b + sy + nz + 1];
                for k in 0..=nz {
                    out[k] -= ch * ((ey1[k] - ey0[k]) - (ex1[k] - ex0[k]));
                }
            }
        });
    }

    fn update_e(&mut self) {
        let [nx, ny, nz] = self.grid.dims;
        let sy = nz + 1;
        let sx = (ny + 1) * sy;
        let ca = &self.coeffs.ca[..];
        let cb = &self.coeffs.cb[..];
        let [idx_x, idx_y, idx_z] = &self.coeffs.ids;
        let [hx, hy, hz] = &self.fields.h;
        let [ex, ey, ez] = &mut self.fields.e;

        ex.par_chunks_mut(sx).enumerate().for_each(|(i, plane)| {
            if i >= nx {
                return;
            }
            for j in 1..ny {
                let b = i * sx + j * sy;
                let out = &mut plane[j * sy + 1..j * sy + nz];
                let ids = &idx_x[b + 1..b + nz];
                let hz0 = &hz[b + 1 - sy..b + nz - sy];
                let hz1 = &hz[b + 1..b + nz];
                let hy0 = &hy[b..b + nz - 1];
                let hy1 = &hy[b + 1..b + nz];
                for k in 0..nz - 1 {
                    let m = ids[k] as usize;
                    out[k] = ca[m] * out[k] + cb[m] * ((hz1[k] - hz0[k]) - (hy1[k] - hy0[k]));
                }
            }
        });
        ey.par_chunks_mut(sx).enumerate().for_each(|(i, plane)| {
            if i == 0 || i >= nx {
                return;
            }
            for j in 0..ny {
                let b = i * sx + j * sy;
                let out = &mut plane[j * sy + 1..j * sy + nz];
                let ids = &idx_y[b + 1..b + nz];
                let hx0 = &hx[b..b + nz - 1];
                let hx1 = &hx[b + 1..b + nz];
                let hz0 = &hz[b + 1 - sx..b + nz - sx];
                let hz1 = &hz[b + 1..b + nz];
                for k in 0..nz - 1 {
                    let m = ids[k] as usize;
                    out[k] = ca[m] * out[k] + cb[m] * ((hx1[k] - hx0[k]) - (hz1[k] - hz0[k]));
                }
            }
        });
        ez.par_chunks_mut(sx).enumerate().for_each(|(i, plane)| {
            if i == 0 || i >= nx {
                return;
            }
            for j in 1..ny {
                let b = i * sx + j * sy;
                let out = &mut plane[j * sy..j * sy + nz];
                let ids = &idx_z[b..b + nz];
                let hy0 = &hy[b - sx..b - sx + nz];
                let hy1 = &hy[b..b + nz];
                let hx0 = &hx[b - sy..b - sy + nz];
                let hx1 = &hx[b..b + nz];
                for k in 0..nz {
                    let m = ids[k] as usize;
                    out[k] = ca[m] * out[k] + cb[m] * ((hy1[k] - hy0[k]) - (hx1[k] - hx0[k]));
                }
            }
        });
    }

    /// Update tangential E on PMC faces using the odd image of tangential H.
    fn pmc_e(&mut self) {
        let dims = self.grid.dims;
        let bnd = self.grid.boundaries;
        let strides = self.grid.strides();
        for c in 0..3 {
            let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
            let mut counts = [dims[0] + 1, dims[1] + 1, dims[2] + 1];
            counts[c] -= 1;
            let on_face = |ijk: [usize; 3], b: usize| -> Option<usize> {
                if ijk[b] == 0 {
                    Some(2 * b)
                } else if ijk[b] == dims[b] {
                    Some(2 * b + 1)
                } else {
                    None
                }
            };
            for i in 0..counts[0] {
                for j in 0..counts[1] {
                    for k in 0..counts[2] {
                        let ijk = [i, j, k];
                        let faces: Vec<usize> = [c1, c2].iter().filter_map(|&b| on_face(ijk, b)).collect();
                        if faces.is_empty() || faces.iter().any(|&f| bnd[f] != Boundary::Pmc) {
                            continue;
                        }
                        let idx = self.grid.idx(i, j, k);
                        // derivative of H_c2 along c1, and of H_c1 along c2
                        let deriv = |hcomp: usize, along: usize| -> f64 {
                            let h = &self.fields.h[hcomp];
                            let p = ijk[along];
                            if p == 0 {
                                2.0 * h[idx]
                            } else if p == dims[along] {
                                -2.0 * h[idx - strides[along]]
                            } else {
                                h[idx] - h[idx - strides[along]]
                            }
                        };
                        let curl = deriv(c2, c1) - deriv(c1, c2);
                        let m = self.coeffs.ids[c][idx] as usize;
                        let e = &mut self.fields.e[c][idx];
                        *e = self.coeffs.ca[m] * *e + self.coeffs.cb[m] * curl;
                    }
                }
            }
        }
    }

    fn cpml_e(&mut self) {
        let dims = self.grid.dims;
        let bnd = self.grid.boundaries;
        let strides = self.grid.strides();
        for a in 0..3 {
            let layers = &self.cpml.axes[a].e;
            if layers.is_empty() {
                continue;
            }
            let (b1, b2) = others(a);
            for (m, &(ec, hc, sign)) in CPML_TERMS[a].iter().enumerate() {
                let ids = &self.coeffs.ids[ec];
                let cb = &self.coeffs.cb;
                cpml_apply(
                    layers,
                    a,
                    dims,
                    strides,
                    (e_range(ec, b1, dims, &bnd), e_range(ec, b2, dims, &bnd)),
                    &mut self.cpml.psi_e[a][m],
                    &self.fields.h[hc],
                    &mut self.fields.e[ec],
                    0,
                    |idx| sign * cb[ids[idx] as usize],
                );
            }
        }
    }

    fn cpml_h(&mut self) {
        let dims = self.grid.dims;
        let strides = self.grid.strides();
        let ch = self.coeffs.ch;
        for a in 0..3 {
            let layers = &self.cpml.axes[a].h;
            if layers.is_empty() {
                continue;
            }
            let (b1, b2) = others(a);
            for (m, &(hc, ec, sign)) in CPML_TERMS[a].iter().enumerate() {
                cpml_apply(
                    layers,
                    a,
                    dims,
                    strides,
                    (h_range(hc, b1, dims), h_range(hc, b2, dims)),
                    &mut self.cpml.psi_h[a][m],
                    &self.fields.e[ec],
                    &mut self.fields.h[hc],
                    strides[a],
                    |_| -sign * ch,
                );
            }
        }
    }
}

/// Field components corrected by each absorbing axis, as
/// (corrected component, differenced component, sign). The same table
/// serves E (differencing H) and H (differencing E).
const CPML_TERMS: [[(usize, usize, f64); 2]; 3] = [
    [(1, 2, -1.0), (2, 1, 1.0)],
    [(0, 2, 1.0), (2, 0, -1.0)],
    [(0, 1, -1.0), (1, 0, 1.0)],
];

/// Recursive-convolution update over one slab set. `diff` at flat index
/// `idx` is `src[idx + up] − src[idx + up − s_a]`. For the z axis the ψ
/// array is stored layer-fastest so the inner loop runs along memory.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn cpml_apply(
    layers: &[Layer],
    a: usize,
    dims: [usize; 3],
    strides: [usize; 3],
    ranges: ((usize, usize), (usize, usize)),
    psi: &mut [f64],
    src: &[f64],
    dst: &mut [f64],
    up: usize,
    coef: impl Fn(usize) -> f64,
) {
    let (b1, b2) = others(a);
    let ((u0, u1), (v0, v1)) = ranges;
    let w = dims[b2] + 1;
    let sa = strides[a];
    if a < 2 {
        let plane = (dims[b1] + 1) * w;
        for (l, layer) in layers.iter().enumerate() {
            let psi_l = &mut psi[l * plane..(l + 1) * plane];
            for u in u0..u1 {
                let row = layer.pos * sa + u * strides[b1];
                let psi_r = &mut psi_l[u * w + v0..u * w + v1];
                let hi = &src[row + up + v0..row + up + v1];
                let lo = &src[row + up - sa + v0..row + up - sa + v1];
                for (n, p) in psi_r.iter_mut().enumerate() {
                    let idx = row + v0 + n;
                    let diff = hi[n] - lo[n];
                    *p = layer.b * *p + layer.c * diff;
                    dst[idx] += coef(idx) * (layer.kinv_m1 * diff + *p);
                }
            }
        }
    } else {
        let nl = layers.len();
        for u in u0..u1 {
            for v in v0..v1 {
                let col = u * strides[b1] + v * strides[b2];
                let psi_c = &mut psi[(u * w + v) * nl..(u * w + v + 1) * nl];
                for (layer, p) in layers.iter().zip(psi_c.iter_mut()) {
                    let idx = col + layer.pos;
                    let diff = src[idx + up] - src[idx + up - sa];
                    *p = layer.b * *p + layer.c * diff;
                    dst[idx] += coef(idx) * (layer.kinv_m1 * diff + *p);
                }
            }
        }
    }
}

fn others(a: usize) -> (usize, usize) {
    match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Index range (half-open) of E component `c` along axis `b` that the
/// solver updates.
fn e_range(c: usize, b: usize, dims: [usize; 3], bnd: &[Boundary; 6]) -> (usize, usize) {
    if b == c {
        (0, dims[b])
    } else {
        let lo = if bnd[2 * b] == Boundary::Pmc { 0 } else { 1 };
        let hi = if bnd[2 * b + 1] == Boundary::Pmc { dims[b] + 1 } else { dims[b] };
        (lo, hi)
    }
}

fn h_range(h: usize, b: usize, dims: [usize; 3]) -> (usize, usize) {
    if b == h {
        (0, dims[b] + 1)
    } else {
        (0, dims[b])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::C0;
    use crate::materials::{DielectricSpec, MaterialSpec};
    use crate::ports::SourceWaveform;
    use crate::oracle::{column_run, plane_wave_column};
    use crate::scene::Aabb;
    use std::f64::consts::PI;

    fn cfg(delta: f64) -> SimConfig {
        SimConfig::new(delta, 0.99, SourceWaveform::default()).unwrap()
    }

    /// Tracks the Yee energy `½εE_n² + ½μH_{n−½}·H_{n+½}` at every step.
    struct EnergyProbe<'a> {
        coeffs: &'a UpdateCoeffs,
        h_prev: [Vec<f64>; 3],
        energy: Vec<f64>,
    }

    impl Recorder for EnergyProbe<'_> {
        fn on_h(&mut self, f: &FieldState, _t: f64) {
            let w = f.electric_energy(self.coeffs) + f.magnetic_cross_energy(&self.h_prev);
            self.energy.push(w);
            self.h_prev = f.h.clone();
        }
    }

    fn energy_run(grid: &VoxelGrid, steps: usize) -> Vec<f64> {
        let mut c = cfg(grid.delta);
        c.max_steps = steps;
        let mut sim = Simulation::new(grid, &c).unwrap();
        let [nx, ny, nz] = grid.dims;
        let i = sim.fields.idx(nx / 3, ny / 2, nz / 2);
        sim.fields_mut().e[2][i] = 1.0;
        let i = sim.fields.idx(nx / 2, ny / 3, nz / 2 + 1);
        sim.fields_mut().e[0][i] = -0.5;
        let coeffs = sim.coeffs().clone();
        let n = sim.fields.e[0].len();
        let mut probe = EnergyProbe {
            coeffs: &coeffs,
            h_prev: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            energy: Vec::new(),
        };
        for _ in 0..steps {
            sim.step_with(&mut [&mut probe]).unwrap();
        }
        probe.energy
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = VoxelGrid::new([6, 5, 4], 1e-3, [0.0; 3]);
        let mut sim = Simulation::new(&g, &cfg(1e-3)).unwrap();
        for _ in 0..20 {
            sim.step().unwrap();
        }
        assert!(sim.fields().e.iter().chain(&sim.fields().h).all(|a| a.iter().all(|&x| x == 0.0)));
        assert_eq!(sim.fields().step_index, 20);
    }

    #[test]
    fn lossless_cavity_conserves_energy() {
        let g = VoxelGrid::new([14, 11, 9], 1e-3, [0.0; 3]);
        let w = energy_run(&g, 10_000);
        let w0 = w[0];
        let worst = w.iter().map(|x| (x - w0).abs() / w0).fold(0.0, f64::max);
        assert!(worst <= 1e-10, "relative energy drift {worst:e}");
    }

    #[test]
    fn lossy_energy_never_increases() {
        let mut g = VoxelGrid::new([14, 11, 9], 1e-3, [0.0; 3]);
        let lossy = MaterialSpec::Dielectric(DielectricSpec {
            eps_r: 4.0,
            tan_delta: 0.05,
            f_ref: 5.5e9,
        });
        g.paint(&Aabb::new([2e-3, 1e-3, 0.0], [9e-3, 10e-3, 5e-3]), &lossy);
        g.paint(
            &Aabb::new([10e-3, 2e-3, 3e-3], [13e-3, 6e-3, 8e-3]),
            &MaterialSpec::BulkConductor { sigma: 1e6 },
        );
        let w = energy_run(&g, 4000);
        for n in 1..w.len() {
            assert!(w[n] <= w[n - 1] * (1.0 + 1e-12), "step {n}: {} > {}", w[n], w[n - 1]);
        }
        assert!(w[w.len() - 1] < 0.5 * w[0]);
    }

    #[test]
    fn divergence_of_h_stays_zero() {
        let g = VoxelGrid::new([12, 10, 8], 1e-3, [0.0; 3]);
        let mut c = cfg(1e-3);
        c.max_steps = 5000;
        let mut sim = Simulation::new(&g, &c).unwrap();
        let i = sim.fields.idx(5, 5, 4);
        sim.fields_mut().e[2][i] = 1.0;
        let mut worst = 0.0f64;
        for n in 0..5000 {
            sim.step().unwrap();
            if n % 250 == 249 {
                let f = sim.fields();
                let hmax = f.h.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                for i in 0..12 {
                    for j in 0..10 {
                        for k in 0..8 {
                            worst = worst.max(f.div_h(i, j, k).abs() / hmax);
                        }
                    }
                }
            }
        }
        assert!(worst <= 1e-12, "{worst:e}");
    }

    #[test]
    fn pec_edges_stay_zero_and_runs_are_bitwise_identical() {
        let mut g = VoxelGrid::new([16, 14, 12], 1e-3, [0.0; 3]).with_cpml(4);
        g.boundaries[4] = Boundary::Pec;
        g.paint(&Aabb::new([5e-3, 5e-3, 2e-3], [9e-3, 9e-3, 2e-3]), &MaterialSpec::Pec);
        g.paint(
            &Aabb::new([4e-3, 4e-3, 0.0], [12e-3, 10e-3, 2e-3]),
            &MaterialSpec::Dielectric(DielectricSpec::LCP),
        );
        g.set_port([8, 7, 0], 50.0, 0);
        let run = || {
            let mut c = cfg(1e-3);
            c.max_steps = 600;
            let mut sim = Simulation::new(&g, &c).unwrap();
            let mut rec = crate::ports::PortRecorder::new(&g, c.dt).unwrap();
            sim.run(&mut [&mut rec]).unwrap();
            (sim.fields().clone(), rec.finish(), sim.coeffs().clone())
        };
        let (fa, ra, coeffs) = run();
        let (fb, rb, _) = run();
        assert_eq!(fa, fb);
        assert_eq!(ra, rb);
        for a in 0..3 {
            for (x, &id) in fa.e[a].iter().zip(&coeffs.ids[a]) {
                if coeffs.pec[id as usize] {
                    assert_eq!(*x, 0.0);
                }
            }
        }
        assert!(ra.v.iter().any(|v| v.abs() > 0.0));
    }

    #[test]
    fn sealed_lossless_cavity_hits_max_steps() {
        let mut g = VoxelGrid::new([40, 30, 20], 1e-3, [0.0; 3]);
        g.set_port([13, 11, 0], 1e9, 0);
        let mut c = cfg(1e-3);
        c.max_steps = 3000;
        let mut sim = Simulation::new(&g, &c).unwrap();
        let out = sim.run(&mut []).unwrap();
        assert_eq!(out.steps, 3000);
        assert!(out.termination.is_warning());
        assert!(sim.step().is_err());
    }

    #[test]
    fn instability_is_reported() {
        let g = VoxelGrid::new([10, 10, 10], 1e-3, [0.0; 3]);
        let mut c = cfg(1e-3);
        c.max_steps = 500;
        let mut sim = Simulation::new(&g, &c).unwrap();
        let i = sim.fields.idx(5, 5, 5);
        sim.fields_mut().e[2][i] = f64::NAN;
        match sim.run(&mut []) {
            Err(Error::Instability { step, .. }) => assert_eq!(step, 100),
            other => panic!("{other:?}"),
        }
    }

    fn dft(x: &[f64], dt: f64, f: f64) -> (f64, f64) {
        let (mut re, mut im) = (0.0, 0.0);
        for (n, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * f * (n + 1) as f64 * dt;
            re += v * ph.cos();
            im -= v * ph.sin();
        }
        (re, im)
    }

    #[test]
    fn plane_wave_dispersion() {
        let delta = 1e-3;
        let g = plane_wave_column(800, delta, Boundary::Pec, 0);
        let w = SourceWaveform::new(25e9, 15e9, 1.0);
        let (x1, x2) = (300, 400);
        let (data, dt) = column_run(&g, &w, 200, &[x1, x2], 800).unwrap();
        let s = C0 * dt / delta;
        for cells_per_lambda in [10.0, 15.0] {
            let f = C0 / (cells_per_lambda * delta);
            let (a_re, a_im) = dft(&data[0], dt, f);
            let (b_re, b_im) = dft(&data[1], dt, f);
            let mut dphi = a_im.atan2(a_re) - b_im.atan2(b_re);
            let travel = 2.0 * PI * f * (x2 - x1) as f64 * delta / C0;
            while dphi < travel - PI {
                dphi += 2.0 * PI;
            }
            let v = 2.0 * PI * f * (x2 - x1) as f64 * delta / dphi;
            let omega = 2.0 * PI * f;
            let k = 2.0 / delta * ((omega * dt / 2.0).sin() / s).asin();
            let v_theory = omega / k;
            assert!((v - v_theory).abs() / v_theory < 2e-4, "{cells_per_lambda}: {v} vs {v_theory}");
            let err = (v_theory - C0).abs() / C0;
            if cells_per_lambda == 15.0 {
                assert!(err <= 5e-3, "{err}");
            } else {
                assert!(err > 5e-3 && err < 1.5e-2, "{err}");
            }
        }
    }

    #[test]
    fn cpml_normal_incidence_reflection() {
        let db = crate::oracle::cpml_reflection_db().unwrap();
        assert!(db <= -60.0, "reflection {db:.1} dB");
    }
}
