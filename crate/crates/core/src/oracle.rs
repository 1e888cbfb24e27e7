//! Analytic validation scenes: PEC cavity, Hertzian dipole and a plain
//! microstrip patch.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;

use crate::constants::C0;
use crate::error::{Error, Result};
use crate::farfield::{directivity_and_gain, ntff_transform, NtffSurface};
use crate::fdtd::{FieldState, Recorder, SimConfig, Simulation};
use crate::materials::{DielectricSpec, MaterialSpec};
use crate::ports::{frequency_grid, port_spectra, PortRecorder, SourceWaveform};
use crate::scene::{
    microstrip_eps_eff, microstrip_open_end, patch_cavity_resonance, Aabb, Boundary, VoxelGrid,
};

/// One pass/fail line of an oracle report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Allowed |value − target| in the unit of `value`, or a bound.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Pass when `|value − target| ≤ tolerance`.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }

    /// Pass when `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target: bound,
            tolerance: 0.0,
            pass: value <= bound,
        }
    }
}

/// Fixed point for ordinary magnitudes, scientific for tiny ones.
fn num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        if self.tolerance > 0.0 {
            write!(
                f,
                "{verdict} {}: {} (target {} ± {})",
                self.name,
                num(self.value),
                num(self.target),
                num(self.tolerance)
            )
        } else {
            write!(f, "{verdict} {}: {} (bound ≤ {})", self.name, num(self.value), num(self.target))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub checks: Vec<Check>,
    pub steps: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Analytic modes `f_mnp` of an `a × b × d` PEC box, sorted, with at most one
/// zero index.
pub fn cavity_modes(a: f64, b: f64, d: f64, count: usize) -> Vec<f64> {
    let mut f = Vec::new();
    for m in 0..8 {
        for n in 0..8 {
            for p in 0..8 {
                let zeros = [m, n, p].iter().filter(|&&x| x == 0).count();
                if zeros > 1 {
                    continue;
                }
                let (m, n, p) = (m as f64, n as f64, p as f64);
                f.push(C0 / 2.0 * ((m / a).powi(2) + (n / b).powi(2) + (p / d).powi(2)).sqrt());
            }
        }
    }
    f.sort_by(|x, y| x.partial_cmp(y).unwrap());
    f.dedup_by(|x, y| (*x - *y).abs() < 1e-6 * *y);
    f.truncate(count);
    f
}

struct PointProbe {
    nodes: Vec<(usize, usize)>,
    data: Vec<Vec<f64>>,
}

impl Recorder for PointProbe {
    fn on_e(&mut self, f: &FieldState, _t: f64) {
        for (d, &(c, i)) in self.data.iter_mut().zip(&self.nodes) {
            d.push(f.e[c][i]);
        }
    }
}

/// Hann-windowed power spectrum summed over probe series.
fn probe_power(data: &[Vec<f64>], dt: f64, f: f64) -> f64 {
    let mut p = 0.0;
    for x in data {
        let n = x.len() as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let w = 0.5 - 0.5 * (2.0 * PI * k as f64 / n).cos();
            acc += Complex64::from_polar(w * v, -2.0 * PI * f * k as f64 * dt);
        }
        p += acc.norm_sqr();
    }
    p
}

/// Maxima of `y` over `±reach` samples above `floor·max(y)`, refined by a
/// parabola in log power.
fn spectral_peaks(f: &[f64], y: &[f64], floor: f64, reach: usize) -> Vec<f64> {
    let top = y.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    for k in 1..y.len() - 1 {
        let lo = k.saturating_sub(reach);
        let hi = (k + reach + 1).min(y.len());
        let local = y[lo..hi].iter().cloned().fold(0.0, f64::max);
        if y[k] > y[k - 1] && y[k] >= y[k + 1] && y[k] >= local && y[k] > floor * top {
            let (a, b, c) = (y[k - 1].ln(), y[k].ln(), y[k + 1].ln());
            let den = a - 2.0 * b + c;
            let shift = if den < 0.0 { 0.5 * (a - c) / den } else { 0.0 };
            out.push(f[k] + shift * (f[k + 1] - f[k]));
        }
    }
    out
}

/// Vacuum PEC box `a × b × d` excited by soft sources; returns the three
/// lowest spectral peaks compared against the analytic modes.
pub fn cavity(a: f64, b: f64, d: f64, delta: f64, steps: usize) -> Result<OracleReport> {
    let dims = [a, b, d].map(|x| (x / delta).round() as usize);
    let g = VoxelGrid::new(dims, delta, [0.0; 3]);
    let expected = cavity_modes(a, b, d, 3);
    let src = SourceWaveform::new(0.5 * (expected[0] + expected[2]), expected[2], 1.0);
    let mut cfg = SimConfig::new(delta, 0.99, src)?;
    cfg.max_steps = steps;
    let mut sim = Simulation::new(&g, &cfg)?;
    let at = |p: [f64; 3]| {
        let ijk: Vec<usize> = (0..3).map(|i| ((p[i] * dims[i] as f64).round() as usize).max(1)).collect();
        g.idx(ijk[0], ijk[1], ijk[2])
    };
    let s = at([0.31, 0.37, 0.29]);
    let p = at([0.71, 0.23, 0.61]);
    let mut probe = PointProbe {
        nodes: (0..3).map(|c| (c, p)).collect(),
        data: vec![Vec::new(); 3],
    };
    for n in 0..steps {
        let v = src.value((n as f64 + 0.5) * cfg.dt);
        for c in 0..3 {
            sim.fields_mut().e[c][s] += v;
        }
        sim.step_with(&mut [&mut probe])?;
    }
    let lo = 0.8 * expected[0];
    let hi = 1.1 * expected[2];
    let df = (hi - lo) / 1500.0;
    let freqs = frequency_grid(lo, hi, df);
    let power: Vec<f64> = freqs.iter().map(|&f| probe_power(&probe.data, cfg.dt, f)).collect();
    // Hann main-lobe half-width is 2/T
    let reach = (2.0 / (steps as f64 * cfg.dt) / df).ceil() as usize;
    let peaks = spectral_peaks(&freqs, &power, 1e-3, reach);
    if peaks.len() < 3 {
        return Err(Error::Extraction(format!("found {} cavity peaks, need 3", peaks.len())));
    }
    let checks = (0..3)
        .map(|m| {
            Check::near(
                format!("cavity mode {} rel. error", m + 1),
                (peaks[m] - expected[m]) / expected[m],
                0.0,
                0.01,
            )
        })
        .collect();
    Ok(OracleReport {
        name: "cavity".into(),
        checks,
        steps,
    })
}

/// Tracks the Yee energy `½εE_n² + ½μH_{n−½}·H_{n+½}` at every step.
struct EnergyProbe {
    coeffs: crate::fdtd::UpdateCoeffs,
    h_prev: [Vec<f64>; 3],
    energy: Vec<f64>,
}

impl Recorder for EnergyProbe {
    fn on_h(&mut self, f: &FieldState, _t: f64) {
        let w = f.electric_energy(&self.coeffs) + f.magnetic_cross_energy(&self.h_prev);
        self.energy.push(w);
        self.h_prev = f.h.clone();
    }
}

/// Energy history of a closed vacuum PEC box after two E-edge impulses.
pub fn cavity_energy(dims: [usize; 3], delta: f64, steps: usize) -> Result<Vec<f64>> {
    let g = VoxelGrid::new(dims, delta, [0.0; 3]);
    let mut cfg = SimConfig::new(delta, 0.99, SourceWaveform::default())?;
    cfg.max_steps = steps;
    let mut sim = Simulation::new(&g, &cfg)?;
    let [nx, ny, nz] = dims;
    let i = g.idx(nx / 3, ny / 2, nz / 2);
    sim.fields_mut().e[2][i] = 1.0;
    let i = g.idx(nx / 2, ny / 3, nz / 2 + 1);
    sim.fields_mut().e[0][i] = -0.5;
    let n = sim.fields().e[0].len();
    let mut probe = EnergyProbe {
        coeffs: sim.coeffs().clone(),
        h_prev: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        energy: Vec::new(),
    };
    for _ in 0..steps {
        sim.step_with(&mut [&mut probe])?;
    }
    Ok(probe.energy)
}

/// Largest relative energy change over any window of `window` steps.
pub fn max_windowed_drift(energy: &[f64], window: usize) -> f64 {
    let w0 = energy[0];
    let mut worst = 0.0f64;
    for a in 0..energy.len() {
        for b in a + 1..energy.len().min(a + window + 1) {
            worst = worst.max((energy[b] - energy[a]).abs() / w0);
        }
    }
    worst
}

/// Closed lossless cavity run; drift bound per 1000 steps.
pub fn energy_conservation(steps: usize) -> Result<OracleReport> {
    let w = cavity_energy([14, 11, 9], 1e-3, steps)?;
    let drift = max_windowed_drift(&w, 1000);
    Ok(OracleReport {
        name: "energy".into(),
        checks: vec![Check::at_most("relative energy drift per 1000 steps", drift, 1e-9)],
        steps,
    })
}

struct LineProbe {
    nodes: Vec<usize>,
    data: Vec<Vec<f64>>,
}

impl Recorder for LineProbe {
    fn on_e(&mut self, f: &FieldState, _t: f64) {
        for (d, &n) in self.data.iter_mut().zip(&self.nodes) {
            d.push(f.e[2][n]);
        }
    }
}

/// One-cell column along x with PMC side walls and PEC top and bottom,
/// which carries a TEM plane wave.
pub fn plane_wave_column(nx: usize, delta: f64, x_boundary: Boundary, pml: usize) -> VoxelGrid {
    let mut g = VoxelGrid::new([nx, 1, 1], delta, [0.0; 3]);
    g.boundaries = [
        x_boundary,
        x_boundary,
        Boundary::Pmc,
        Boundary::Pmc,
        Boundary::Pec,
        Boundary::Pec,
    ];
    g.pml = pml;
    g
}

/// Soft Ez source at column index `src`; returns Ez series at `at`.
pub fn column_run(g: &VoxelGrid, w: &SourceWaveform, src: usize, at: &[usize], steps: usize) -> Result<(Vec<Vec<f64>>, f64)> {
    let mut c = SimConfig::new(g.delta, 0.99, *w)?;
    c.max_steps = steps;
    let mut sim = Simulation::new(g, &c)?;
    let s = [g.idx(src, 0, 0), g.idx(src, 1, 0)];
    let mut probe = LineProbe {
        nodes: at.iter().map(|&i| g.idx(i, 0, 0)).collect(),
        data: vec![Vec::new(); at.len()],
    };
    for n in 0..steps {
        let v = w.value((n as f64 + 0.5) * c.dt);
        for &i in &s {
            sim.fields_mut().e[2][i] += v;
        }
        sim.step_with(&mut [&mut probe])?;
    }
    Ok((probe.data, c.dt))
}

/// Normal-incidence reflection of a 10-cell CPML (dB), measured against a
/// long reference column whose far wall echo arrives after the window.
pub fn cpml_reflection_db() -> Result<f64> {
    let delta = 1e-3;
    let w = SourceWaveform::new(10e9, 8e9, 1.0);
    let (src, probe) = (40, 70);
    let steps = 900;
    let test = plane_wave_column(110, delta, Boundary::Cpml, 10);
    let reference = plane_wave_column(1400, delta, Boundary::Pec, 0);
    let (a, _) = column_run(&test, &w, src, &[probe], steps)?;
    let off = 645;
    let (b, _) = column_run(&reference, &w, src + off, &[probe + off], steps)?;
    let peak = b[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let refl = a[0].iter().zip(&b[0]).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(20.0 * (refl / peak).log10())
}

pub fn cpml() -> Result<OracleReport> {
    Ok(OracleReport {
        name: "cpml".into(),
        checks: vec![Check::at_most("CPML normal-incidence reflection (dB)", cpml_reflection_db()?, -60.0)],
        steps: 900,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DipoleResult {
    pub report: OracleReport,
    pub max_pattern_deviation: f64,
    pub max_e_phi: f64,
    pub directivity_dbi: f64,
    pub ntff_power: f64,
    pub poynting_power: f64,
}

/// Single-edge z-directed source at the centre of a CPML-terminated
/// vacuum box.
pub fn dipole(delta: f64, f: f64) -> Result<DipoleResult> {
    let pml = 8;
    let n = 2 * (pml + 4) + 16;
    let mut g = VoxelGrid::centered([n; 3], delta, -(n as f64) * delta / 2.0).with_cpml(pml);
    g.set_port([n / 2; 3], 50.0, 0);
    let src = SourceWaveform::new(f, 0.6 * f, 1.0);
    let mut cfg = SimConfig::new(delta, 0.99, src)?;
    cfg.recorded_frequencies = vec![f];
    cfg.decay_stop_db = -80.0;
    cfg.max_steps = 20_000;
    let mut surface = NtffSurface::enclosing(&g, 4, &[f], cfg.dt)?;
    let mut sim = Simulation::new(&g, &cfg)?;
    let out = sim.run(&mut [&mut surface])?;
    let p = ntff_transform(&surface, f, 2.0, 2.0)?;
    let u = p.intensity();
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let emax = umax.sqrt();
    let mut dev: f64 = 0.0;
    let mut ephi: f64 = 0.0;
    for it in 0..p.n_theta() {
        let s = p.theta_deg[it].to_radians().sin();
        for ip in 0..p.n_phi() {
            let k = p.index(it, ip);
            dev = dev.max((u[k].sqrt() / emax - s).abs());
            ephi = ephi.max(p.e_phi[k].norm() / p.e_theta.iter().map(|x| x.norm()).fold(0.0, f64::max));
        }
    }
    let prad = p.radiated_power();
    let flux = surface.poynting_flux(f)?;
    let m = directivity_and_gain(&p, prad)?;
    let checks = vec![
        Check::at_most("dipole |E| deviation from sin θ (fraction of peak)", dev, 0.02),
        Check::at_most("dipole E_phi / max E_theta", ephi, 0.02),
        Check::near("dipole directivity (dBi)", m.directivity_dbi, 10.0 * 1.5f64.log10(), 0.1),
        Check::near("dipole NTFF power / Poynting flux − 1", prad / flux - 1.0, 0.0, 0.03),
    ];
    Ok(DipoleResult {
        report: OracleReport {
            name: "dipole".into(),
            checks,
            steps: out.steps,
        },
        max_pattern_deviation: dev,
        max_e_phi: ephi,
        directivity_dbi: m.directivity_dbi,
        ntff_power: prad,
        poynting_power: flux,
    })
}

/// Geometry of the plain patch oracle (m).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PatchSpec {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub eps_r: f64,
    pub delta: f64,
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self {
            length: 40e-3,
            width: 30e-3,
            height: 1e-3,
            eps_r: DielectricSpec::LCP.eps_r,
            delta: 0.5e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PatchResult {
    pub report: OracleReport,
    pub simulated: f64,
    /// Cavity model at the fringing-extended length.
    pub analytic: f64,
    /// Cavity model at the physical length.
    pub bare: f64,
    pub eps_eff: f64,
}

/// Probe-fed rectangular PEC patch over an infinite ground (the PEC z− wall);
/// resonance is the peak of Re(Z) at the port, compared with the cavity
/// model at the open-end-extended length.
pub fn patch(spec: &PatchSpec) -> Result<PatchResult> {
    let d = spec.delta;
    let cells = |x: f64| (x / d).round() as usize;
    let (nl, nw, nh) = (cells(spec.length), cells(spec.width), cells(spec.height));
    let pml = 10;
    let air = 12;
    let dims = [nl + 2 * (air + pml), nw + 2 * (air + pml), nh + air + pml];
    let origin = [-(dims[0] as f64) * d / 2.0, -(dims[1] as f64) * d / 2.0, 0.0];
    let mut g = VoxelGrid::new(dims, d, origin).with_cpml(pml);
    g.boundaries[4] = Boundary::Pec;
    let h = nh as f64 * d;
    let (hl, hw) = (nl as f64 * d / 2.0, nw as f64 * d / 2.0);
    let big = 1.0;
    let sub = MaterialSpec::Dielectric(DielectricSpec {
        eps_r: spec.eps_r,
        ..DielectricSpec::LCP
    });
    g.paint(&Aabb::new([-big, -big, 0.0], [big, big, h]), &sub);
    // edges in the air/substrate interface see the mean permittivity
    let interface = MaterialSpec::Dielectric(DielectricSpec {
        eps_r: 0.5 * (spec.eps_r + 1.0),
        tan_delta: DielectricSpec::LCP.tan_delta * spec.eps_r / (spec.eps_r + 1.0),
        ..DielectricSpec::LCP
    });
    g.paint(&Aabb::new([-big, -big, h], [big, big, h]), &interface);
    g.paint(&Aabb::new([-hl, -hw, h], [hl, hw, h]), &MaterialSpec::Pec);
    let feed_x = -hl + 0.33 * 2.0 * hl;
    let node = g.nearest_node([feed_x, 0.0, 0.0]);
    let fx = g.node_coord(0, node[0] as f64);
    if nh > 1 {
        g.paint(&Aabb::new([fx, 0.0, d], [fx, 0.0, h]), &MaterialSpec::Pec);
    }
    g.set_port(node, 50.0, 0);
    let eps_eff = microstrip_eps_eff(spec.eps_r, spec.width, spec.height);
    let fringe = microstrip_open_end(eps_eff, spec.width, spec.height);
    let analytic = patch_cavity_resonance(spec.length + 2.0 * fringe, eps_eff)?;
    let bare = patch_cavity_resonance(spec.length, eps_eff)?;
    let src = SourceWaveform::new(analytic, 0.6 * analytic, 1.0);
    let mut cfg = SimConfig::new(d, 0.99, src)?;
    cfg.decay_stop_db = -30.0;
    cfg.max_steps = 40_000;
    let mut sim = Simulation::new(&g, &cfg)?;
    let mut rec = PortRecorder::new(&g, cfg.dt)?;
    let out = sim.run(&mut [&mut rec])?;
    let freqs = frequency_grid(0.8 * analytic, 1.2 * analytic, 0.4 * analytic / 800.0);
    let s = port_spectra(&rec.finish(), &freqs)?;
    let re: Vec<f64> = s.z.iter().map(|z| if z.re.is_finite() { z.re } else { 0.0 }).collect();
    let peaks = spectral_peaks(&freqs, &re.iter().map(|x| x.max(1e-30)).collect::<Vec<_>>(), 0.5, 1);
    let simulated = peaks
        .iter()
        .cloned()
        .max_by(|a, b| {
            let ia = freqs.iter().position(|&f| f >= *a).unwrap_or(0);
            let ib = freqs.iter().position(|&f| f >= *b).unwrap_or(0);
            re[ia].partial_cmp(&re[ib]).unwrap()
        })
        .ok_or_else(|| Error::Extraction("no Re(Z) peak in patch band".into()))?;
    let checks = vec![Check::near(
        "patch resonance rel. deviation from cavity model",
        (simulated - analytic) / analytic,
        0.0,
        0.05,
    )];
    Ok(PatchResult {
        report: OracleReport {
            name: "patch".into(),
            checks,
            steps: out.steps,
        },
        simulated,
        analytic,
        bare,
        eps_eff,
    })
}
