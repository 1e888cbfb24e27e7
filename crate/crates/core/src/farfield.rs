//! Near-to-far-field transformation and pattern metrics.
//!
//! Tangential E and H are collocated at the centres of the faces of a closed
//! box and Fourier-accumulated during the run. Far-zone fields follow from
//! the equivalent currents `J = n×H`, `M = −n×E` with time convention
//! `exp(jωt)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::{eta0, C0};
use crate::error::{Error, Result};
use crate::fdtd::{FieldState, Recorder};
use crate::scene::VoxelGrid;

const J: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
struct Face {
    /// Normal axis, tangential axes in cyclic order.
    a: usize,
    b: usize,
    c: usize,
    /// Node index of the face plane along `a`.
    p: usize,
    /// +1 for an outward normal along +a.
    sign: f64,
    u0: usize,
    nu: usize,
    v0: usize,
    nv: usize,
    /// Per frequency, per face cell: [E_b, E_c, H_b, H_c].
    acc: Vec<[Complex64; 4]>,
}

/// Running-DFT accumulators of tangential fields on a closed box.
#[derive(Debug, Clone)]
pub struct NtffSurface {
    faces: Vec<Face>,
    freqs: Vec<f64>,
    delta: f64,
    origin: [f64; 3],
    dt: f64,
    dims: [usize; 3],
    lo: [usize; 3],
    hi: [usize; 3],
}

impl NtffSurface {
    /// Box with faces on node planes `lo[a]` and `hi[a]`.
    pub fn new(grid: &VoxelGrid, lo: [usize; 3], hi: [usize; 3], freqs: &[f64], dt: f64) -> Result<Self> {
        for a in 0..3 {
            if lo[a] < 1 || hi[a] + 1 > grid.dims[a] || hi[a] < lo[a] + 2 {
                return Err(Error::Config(format!(
                    "NTFF box planes {}..{} invalid on axis {a} with {} cells",
                    lo[a], hi[a], grid.dims[a]
                )));
            }
        }
        if freqs.is_empty() || freqs.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config("NTFF needs at least one positive frequency".into()));
        }
        let [nx, ny, nz] = grid.dims;
        for i in 0..nx {
            for j in 0..ny {
                for k in 0..nz {
                    let inside = (lo[0]..hi[0]).contains(&i)
                        && (lo[1]..hi[1]).contains(&j)
                        && (lo[2]..hi[2]).contains(&k);
                    if !inside && grid.cell_material[grid.cell_idx(i, j, k)] != 0 {
                        return Err(Error::Config(format!(
                            "non-vacuum cell ({i}, {j}, {k}) lies outside the NTFF box"
                        )));
                    }
                }
            }
        }
        let mut faces = Vec::new();
        for a in 0..3 {
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            for (p, sign) in [(lo[a], -1.0), (hi[a], 1.0)] {
                let nu = hi[b] - lo[b];
                let nv = hi[c] - lo[c];
                faces.push(Face {
                    a,
                    b,
                    c,
                    p,
                    sign,
                    u0: lo[b],
                    nu,
                    v0: lo[c],
                    nv,
                    acc: vec![[Complex64::new(0.0, 0.0); 4]; nu * nv * freqs.len()],
                });
            }
        }
        Ok(Self {
            faces,
            freqs: freqs.to_vec(),
            delta: grid.delta,
            origin: grid.origin,
            dt,
            dims: grid.dims,
            lo,
            hi,
        })
    }

    /// Box `gap` cells inside the absorbing layers (or the outer wall).
    pub fn enclosing(grid: &VoxelGrid, gap: usize, freqs: &[f64], dt: f64) -> Result<Self> {
        let inset = grid.pml + gap;
        let lo = [inset; 3];
        let hi = std::array::from_fn(|a| grid.dims[a].saturating_sub(inset));
        Self::new(grid, lo, hi, freqs, dt)
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    pub fn bounds(&self) -> ([usize; 3], [usize; 3]) {
        (self.lo, self.hi)
    }

    fn freq_index(&self, f: f64) -> Result<usize> {
        self.freqs
            .iter()
            .position(|&x| (x - f).abs() <= 1e-9 * f.abs())
            .ok_or(Error::FrequencyNotRecorded(f))
    }

    fn accumulate(&mut self, fields: &FieldState, t: f64, magnetic: bool) {
        let sy = self.dims[2] + 1;
        let sx = (self.dims[1] + 1) * sy;
        let strides = [sx, sy, 1];
        let phasors: Vec<Complex64> = self
            .freqs
            .iter()
            .map(|&f| Complex64::from_polar(self.dt, -2.0 * PI * f * t))
            .collect();
        for face in &mut self.faces {
            let (sa, sb, sc) = (strides[face.a], strides[face.b], strides[face.c]);
            let ncell = face.nu * face.nv;
            for u in 0..face.nu {
                for v in 0..face.nv {
                    let idx = face.p * sa + (face.u0 + u) * sb + (face.v0 + v) * sc;
                    let (xb, xc, slot) = if magnetic {
                        let hb = &fields.h[face.b];
                        let hc = &fields.h[face.c];
                        let xb = 0.25
                            * (hb[idx] + hb[idx + sb] + hb[idx - sa] + hb[idx + sb - sa]);
                        let xc = 0.25
                            * (hc[idx] + hc[idx + sc] + hc[idx - sa] + hc[idx + sc - sa]);
                        (xb, xc, 2)
                    } else {
                        let eb = &fields.e[face.b];
                        let ec = &fields.e[face.c];
                        (0.5 * (eb[idx] + eb[idx + sc]), 0.5 * (ec[idx] + ec[idx + sb]), 0)
                    };
                    let cell = u * face.nv + v;
                    for (fi, ph) in phasors.iter().enumerate() {
                        let acc = &mut face.acc[fi * ncell + cell];
                        acc[slot] += ph * xb;
                        acc[slot + 1] += ph * xc;
                    }
                }
            }
        }
    }

    /// Net outward time-averaged power `½ Re ∮ (E × H*)·n dS` at `f` (W per
    /// unit spectral density squared, same normalisation as the port spectra).
    pub fn poynting_flux(&self, f: f64) -> Result<f64> {
        let fi = self.freq_index(f)?;
        let ds = self.delta * self.delta;
        let mut p = 0.0;
        for face in &self.faces {
            let ncell = face.nu * face.nv;
            let s: f64 = face.acc[fi * ncell..(fi + 1) * ncell]
                .iter()
                .map(|[eb, ec, hb, hc]| (eb * hc.conj() - ec * hb.conj()).re)
                .sum();
            p += face.sign * s;
        }
        Ok(0.5 * p * ds)
    }

    fn radiation_vectors(&self, fi: usize, k: f64, dir: [f64; 3]) -> ([Complex64; 3], [Complex64; 3]) {
        let d = self.delta;
        let ds = d * d;
        let mut n = [Complex64::new(0.0, 0.0); 3];
        let mut l = [Complex64::new(0.0, 0.0); 3];
        for face in &self.faces {
            let ncell = face.nu * face.nv;
            let acc = &face.acc[fi * ncell..(fi + 1) * ncell];
            let xa = self.origin[face.a] + face.p as f64 * d;
            let eu: Vec<Complex64> = (0..face.nu)
                .map(|u| {
                    let x = self.origin[face.b] + (face.u0 as f64 + u as f64 + 0.5) * d;
                    Complex64::from_polar(1.0, k * dir[face.b] * x)
                })
                .collect();
            let ev: Vec<Complex64> = (0..face.nv)
                .map(|v| {
                    let x = self.origin[face.c] + (face.v0 as f64 + v as f64 + 0.5) * d;
                    Complex64::from_polar(1.0, k * dir[face.c] * x)
                })
                .collect();
            let mut s = [Complex64::new(0.0, 0.0); 4];
            for u in 0..face.nu {
                let mut row = [Complex64::new(0.0, 0.0); 4];
                for v in 0..face.nv {
                    let q = &acc[u * face.nv + v];
                    for m in 0..4 {
                        row[m] += q[m] * ev[v];
                    }
                }
                for m in 0..4 {
                    s[m] += row[m] * eu[u];
                }
            }
            let ph = Complex64::from_polar(face.sign * ds, k * dir[face.a] * xa);
            let [eb, ec, hb, hc] = s.map(|x| x * ph);
            // J = n×H: J_b = −H_c, J_c = H_b; M = −n×E: M_b = E_c, M_c = −E_b
            n[face.b] -= hc;
            n[face.c] += hb;
            l[face.b] += ec;
            l[face.c] -= eb;
        }
        (n, l)
    }
}

impl Recorder for NtffSurface {
    fn on_h(&mut self, fields: &FieldState, t: f64) {
        self.accumulate(fields, t, true);
    }

    fn on_e(&mut self, fields: &FieldState, t: f64) {
        self.accumulate(fields, t, false);
    }
}

/// Far-zone field coefficients `r·E` (V) on a uniform (θ, φ) grid, θ-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldPattern {
    pub f: f64,
    pub theta_deg: Vec<f64>,
    pub phi_deg: Vec<f64>,
    pub e_theta: Vec<Complex64>,
    pub e_phi: Vec<Complex64>,
}

/// Uniform θ grid over [0°, 180°] and φ grid over [0°, 360°).
pub fn angle_grid(theta_step: f64, phi_step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let nt = 180.0 / theta_step;
    let np = 360.0 / phi_step;
    if !(theta_step > 0.0) || !(phi_step > 0.0) || (nt - nt.round()).abs() > 1e-9 || (np - np.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "angular steps must divide 180° and 360° ({theta_step}°, {phi_step}°)"
        )));
    }
    let theta = (0..=nt.round() as usize).map(|i| i as f64 * theta_step).collect();
    let phi = (0..np.round() as usize).map(|i| i as f64 * phi_step).collect();
    Ok((theta, phi))
}

pub fn ntff_transform(surface: &NtffSurface, f: f64, theta_step: f64, phi_step: f64) -> Result<FarFieldPattern> {
    let fi = surface.freq_index(f)?;
    let (theta, phi) = angle_grid(theta_step, phi_step)?;
    let k = 2.0 * PI * f / C0;
    let eta = eta0();
    let pre = J * k / (4.0 * PI);
    let points: Vec<(f64, f64)> = theta
        .iter()
        .flat_map(|&t| phi.iter().map(move |&p| (t, p)))
        .collect();
    let fields: Vec<(Complex64, Complex64)> = points
        .par_iter()
        .map(|&(t, p)| {
            let (st, ct) = t.to_radians().sin_cos();
            let (sp, cp) = p.to_radians().sin_cos();
            let (n, l) = surface.radiation_vectors(fi, k, [st * cp, st * sp, ct]);
            let th = |v: &[Complex64; 3]| v[0] * ct * cp + v[1] * ct * sp - v[2] * st;
            let ph = |v: &[Complex64; 3]| -v[0] * sp + v[1] * cp;
            let e_t = -pre * (ph(&l) + eta * th(&n));
            let e_p = pre * (th(&l) - eta * ph(&n));
            (e_t, e_p)
        })
        .collect();
    let (e_theta, e_phi) = fields.into_iter().unzip();
    Ok(FarFieldPattern {
        f,
        theta_deg: theta,
        phi_deg: phi,
        e_theta,
        e_phi,
    })
}

impl FarFieldPattern {
    /// Pattern sampled from a closure returning `(E_θ, E_φ)`.
    pub fn from_fn(
        f: f64,
        theta_step: f64,
        phi_step: f64,
        field: impl Fn(f64, f64) -> (Complex64, Complex64),
    ) -> Result<Self> {
        let (theta, phi) = angle_grid(theta_step, phi_step)?;
        let mut e_theta = Vec::with_capacity(theta.len() * phi.len());
        let mut e_phi = Vec::with_capacity(theta.len() * phi.len());
        for &t in &theta {
            for &p in &phi {
                let (a, b) = field(t, p);
                e_theta.push(a);
                e_phi.push(b);
            }
        }
        Ok(Self {
            f,
            theta_deg: theta,
            phi_deg: phi,
            e_theta,
            e_phi,
        })
    }

    pub fn n_theta(&self) -> usize {
        self.theta_deg.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi_deg.len()
    }

    pub fn index(&self, it: usize, ip: usize) -> usize {
        it * self.n_phi() + ip
    }

    /// Radiation intensity `|rE|²/(2η0)` (W/sr) at each grid point.
    pub fn intensity(&self) -> Vec<f64> {
        let eta = eta0();
        self.e_theta
            .iter()
            .zip(&self.e_phi)
            .map(|(a, b)| (a.norm_sqr() + b.norm_sqr()) / (2.0 * eta))
            .collect()
    }

    fn steps(&self) -> (f64, f64) {
        let dt = if self.n_theta() > 1 { self.theta_deg[1] - self.theta_deg[0] } else { 180.0 };
        (dt.to_radians(), (360.0 / self.n_phi() as f64).to_radians())
    }

    /// Total radiated power by the trapezoid rule in θ and the rectangle
    /// rule in φ.
    pub fn radiated_power(&self) -> f64 {
        let u = self.intensity();
        let (dth, dph) = self.steps();
        let nt = self.n_theta();
        let mut p = 0.0;
        for it in 0..nt {
            let w = if it == 0 || it == nt - 1 { 0.5 } else { 1.0 };
            let s = self.theta_deg[it].to_radians().sin();
            let ring: f64 = (0..self.n_phi()).map(|ip| u[self.index(it, ip)]).sum();
            p += w * s * ring;
        }
        p * dth * dph
    }

    /// Pattern with φ shifted by `steps` grid columns: `out(θ, φ) = self(θ, φ − steps·Δφ)`.
    pub fn shifted_phi(&self, steps: usize) -> FarFieldPattern {
        let np = self.n_phi();
        let mut out = self.clone();
        for it in 0..self.n_theta() {
            for ip in 0..np {
                let src = self.index(it, (ip + np - steps % np) % np);
                let dst = self.index(it, ip);
                out.e_theta[dst] = self.e_theta[src];
                out.e_phi[dst] = self.e_phi[src];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternMetrics {
    pub gain_dbi: f64,
    pub directivity_dbi: f64,
    /// (θ°, φ°) of the pattern maximum.
    pub peak: (f64, f64),
    pub front_to_back_db: f64,
    pub radiated_power: f64,
    pub accepted_power: f64,
}

fn argmax(u: &[f64]) -> usize {
    let mut m = 0;
    for (i, &x) in u.iter().enumerate() {
        if x > u[m] {
            m = i;
        }
    }
    m
}

/// Grid point of maximum intensity; ties go to the smallest θ, then φ.
pub fn beam_peak(p: &FarFieldPattern) -> Result<(f64, f64)> {
    let u = p.intensity();
    let m = argmax(&u);
    let min = u.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(u[m] > 0.0) || !(u[m] > min * (1.0 + 1e-9)) {
        return Err(Error::Metrics("no distinct peak in pattern".into()));
    }
    Ok((p.theta_deg[m / p.n_phi()], p.phi_deg[m % p.n_phi()]))
}

/// Peak-to-antipode intensity ratio in dB.
pub fn front_to_back(p: &FarFieldPattern) -> Result<f64> {
    let (t, ph) = beam_peak(p)?;
    let u = p.intensity();
    let (dth, dph) = p.steps();
    let it = ((180.0 - t).to_radians() / dth).round() as usize;
    let ip = (((ph + 180.0) % 360.0).to_radians() / dph).round() as usize % p.n_phi();
    let it0 = (t.to_radians() / dth).round() as usize;
    let ip0 = (ph.to_radians() / dph).round() as usize;
    let back = u[p.index(it.min(p.n_theta() - 1), ip)];
    let front = u[p.index(it0, ip0)];
    Ok(10.0 * (front / back).log10())
}

pub fn directivity_and_gain(p: &FarFieldPattern, accepted_power: f64) -> Result<PatternMetrics> {
    if !(accepted_power > 0.0) {
        return Err(Error::Metrics(format!(
            "accepted power must be > 0, got {accepted_power:e}"
        )));
    }
    let u = p.intensity();
    let umax = u.iter().cloned().fold(0.0, f64::max);
    if !(umax > 0.0) {
        return Err(Error::Metrics("zero pattern".into()));
    }
    let prad = p.radiated_power();
    let peak = beam_peak(p)?;
    Ok(PatternMetrics {
        gain_dbi: 10.0 * (4.0 * PI * umax / accepted_power).log10(),
        directivity_dbi: 10.0 * (4.0 * PI * umax / prad).log10(),
        peak,
        front_to_back_db: front_to_back(p)?,
        radiated_power: prad,
        accepted_power,
    })
}

/// Pattern in dB relative to its peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPattern {
    pub theta_deg: Vec<f64>,
    pub phi_deg: Vec<f64>,
    pub db: Vec<f64>,
    pub peak_index: usize,
}

/// Shift dB values so the tie-broken maximum is exactly 0. Other samples
/// that tie with it are set to the largest value below zero so the peak
/// stays unique.
pub fn normalize_db(values: &[f64]) -> Result<(Vec<f64>, usize)> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return Err(Error::Metrics("cannot normalise an empty or NaN pattern".into()));
    }
    let m = argmax(values);
    if !values[m].is_finite() {
        return Err(Error::Metrics("zero pattern".into()));
    }
    let top = values[m];
    let out = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let d = v - top;
            if i == m {
                0.0
            } else if d >= 0.0 {
                -f64::from_bits(1)
            } else {
                d
            }
        })
        .collect();
    Ok((out, m))
}

pub fn normalize_pattern(p: &FarFieldPattern) -> Result<NormalizedPattern> {
    let u = p.intensity();
    if !u.iter().any(|&x| x > 0.0) {
        return Err(Error::Metrics("zero pattern".into()));
    }
    let db: Vec<f64> = u.iter().map(|&x| 10.0 * x.log10()).collect();
    let (db, peak_index) = normalize_db(&db)?;
    Ok(NormalizedPattern {
        theta_deg: p.theta_deg.clone(),
        phi_deg: p.phi_deg.clone(),
        db,
        peak_index,
    })
}

/// Principal-plane cuts through the peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCuts {
    /// Great circle φ = φ_peak: (signed elevation angle °, dB), where the
    /// negative half runs along φ_peak + 180°.
    pub elevation: Vec<(f64, f64)>,
    /// Ring θ = θ_peak: (φ°, dB).
    pub azimuth: Vec<(f64, f64)>,
}

impl NormalizedPattern {
    pub fn peak(&self) -> (f64, f64) {
        let np = self.phi_deg.len();
        (self.theta_deg[self.peak_index / np], self.phi_deg[self.peak_index % np])
    }

    pub fn cuts(&self) -> PatternCuts {
        let np = self.phi_deg.len();
        let it0 = self.peak_index / np;
        let ip0 = self.peak_index % np;
        let azimuth = (0..np).map(|ip| (self.phi_deg[ip], self.db[it0 * np + ip])).collect();
        let back = (self.phi_deg[ip0] + 180.0) % 360.0;
        let ipb = self.phi_deg.iter().position(|&p| (p - back).abs() < 1e-9);
        let mut elevation: Vec<(f64, f64)> = Vec::new();
        if let Some(ipb) = ipb {
            for it in (1..self.theta_deg.len()).rev() {
                elevation.push((-self.theta_deg[it], self.db[it * np + ipb]));
            }
        }
        for it in 0..self.theta_deg.len() {
            elevation.push((self.theta_deg[it], self.db[it * np + ip0]));
        }
        PatternCuts { elevation, azimuth }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn sin_theta(step: f64) -> FarFieldPattern {
        FarFieldPattern::from_fn(1e9, step, step, |t, _| (c(t.to_radians().sin()), c(0.0))).unwrap()
    }

    #[test]
    fn grid_sizes() {
        let p = sin_theta(2.0);
        assert_eq!((p.n_theta(), p.n_phi()), (91, 180));
        assert_eq!(p.e_theta.len(), 16_380);
        assert!(angle_grid(7.0, 2.0).is_err());
    }

    #[test]
    fn isotropic_directivity() {
        let p = FarFieldPattern::from_fn(1e9, 2.0, 2.0, |_, _| (c(1.0), c(0.0))).unwrap();
        let prad = p.radiated_power();
        let d = 10.0 * (4.0 * PI * p.intensity()[0] / prad).log10();
        assert!(d.abs() < 0.05, "{d}");
        // a flat pattern has no distinct peak
        assert!(directivity_and_gain(&p, prad).is_err());
    }

    #[test]
    fn sin_theta_directivity_and_peak() {
        let p = sin_theta(2.0);
        let m = directivity_and_gain(&p, p.radiated_power()).unwrap();
        assert!((m.directivity_dbi - 1.5f64.log10() * 10.0).abs() < 0.05, "{}", m.directivity_dbi);
        assert!((m.gain_dbi - m.directivity_dbi).abs() < 1e-12);
        assert_eq!(m.peak, (90.0, 0.0));
        assert!(m.front_to_back_db.abs() < 1e-9);
        let fine = sin_theta(1.0);
        let d1 = 10.0 * (4.0 * PI * fine.intensity().iter().cloned().fold(0.0, f64::max) / fine.radiated_power()).log10();
        assert!((d1 - m.directivity_dbi).abs() < 0.02);
    }

    #[test]
    fn pencil_beam_and_back_lobe() {
        let p = FarFieldPattern::from_fn(1e9, 2.0, 2.0, |t, ph| {
            if t == 30.0 && ph == 134.0 {
                (c(1.0), c(0.0))
            } else if t == 150.0 && ph == 314.0 {
                (c(0.1f64.sqrt()), c(0.0))
            } else {
                (c(0.01), c(0.0))
            }
        })
        .unwrap();
        assert_eq!(beam_peak(&p).unwrap(), (30.0, 134.0));
        assert!((front_to_back(&p).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn zero_pattern_errors() {
        let p = FarFieldPattern::from_fn(1e9, 2.0, 2.0, |_, _| (c(0.0), c(0.0))).unwrap();
        assert!(beam_peak(&p).is_err());
        assert!(normalize_pattern(&p).is_err());
        assert!(directivity_and_gain(&p, 1.0).is_err());
        assert!(directivity_and_gain(&sin_theta(2.0), 0.0).is_err());
    }

    #[test]
    fn normalization_has_single_zero() {
        let n = normalize_pattern(&sin_theta(2.0)).unwrap();
        assert_eq!(n.db.iter().filter(|&&x| x == 0.0).count(), 1);
        assert!(n.db.iter().all(|&x| x <= 0.0));
        assert_eq!(n.peak(), (90.0, 0.0));
        let cuts = n.cuts();
        assert_eq!(cuts.azimuth.len(), 180);
        assert_eq!(cuts.elevation.len(), 181);
        assert!(cuts.azimuth.iter().all(|&(_, d)| d > -1e-9));
    }

    #[test]
    fn unknown_frequency_is_lookup_error() {
        let g = VoxelGrid::new([10, 10, 10], 1e-3, [0.0; 3]);
        let s = NtffSurface::enclosing(&g, 2, &[5e9], 1e-12).unwrap();
        assert!(matches!(ntff_transform(&s, 6e9, 2.0, 2.0), Err(Error::FrequencyNotRecorded(_))));
        let p = ntff_transform(&s, 5e9, 10.0, 10.0).unwrap();
        assert!(p.e_theta.iter().chain(&p.e_phi).all(|x| x.norm() == 0.0));
    }

    fn pattern_strategy() -> impl Strategy<Value = FarFieldPattern> {
        (prop::collection::vec(0.0f64..1.0, 19 * 36), 0.1f64..10.0).prop_map(|(v, s)| {
            let it = std::cell::RefCell::new(v.into_iter());
            FarFieldPattern::from_fn(1e9, 10.0, 10.0, |_, _| (c(s * it.borrow_mut().next().unwrap()), c(0.0))).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn normalization_is_idempotent_and_scale_free(p in pattern_strategy()) {
            let a = normalize_pattern(&p).unwrap();
            let (again, m) = normalize_db(&a.db).unwrap();
            prop_assert_eq!(&again, &a.db);
            prop_assert_eq!(m, a.peak_index);
            let mut q = p.clone();
            q.e_theta.iter_mut().for_each(|x| *x *= 7.0);
            let b = normalize_pattern(&q).unwrap();
            for (x, y) in a.db.iter().zip(&b.db) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn gain_never_exceeds_directivity(p in pattern_strategy(), excess in 1.0f64..10.0) {
            if let Ok(m) = directivity_and_gain(&p, p.radiated_power() * excess) {
                prop_assert!(m.gain_dbi <= m.directivity_dbi + 1e-9);
                prop_assert!(m.radiated_power <= m.accepted_power * (1.0 + 1e-6));
            }
        }
    }
}
