//! Lumped-port excitation and port-quantity extraction.
//!
//! The port is a resistive voltage source on a z-edge. The recorder samples
//! the gap voltage at integer steps and the wire current from the H loop one
//! cell above the gap at half steps; the current is averaged onto the voltage
//! time base before any spectra are taken.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fdtd::{FieldState, Recorder};
use crate::scene::VoxelGrid;

/// Gaussian ratio `delay / spread` below which the turn-on value exceeds 1e-8.
pub const MIN_DELAY_SPREADS: f64 = 4.291_932_052_578_14;

/// Default `delay / spread`.
pub const DEFAULT_DELAY_SPREADS: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceWaveform {
    pub f0: f64,
    /// Offset from `f0` at which the spectrum is 20 dB below its peak (Hz).
    pub f_bw: f64,
    pub amplitude: f64,
    pub delay: f64,
}

impl Default for SourceWaveform {
    fn default() -> Self {
        Self::new(5.5e9, 3.5e9, 1.0)
    }
}

impl SourceWaveform {
    /// Waveform with the default delay of 4.5 Gaussian spreads.
    pub fn new(f0: f64, f_bw: f64, amplitude: f64) -> Self {
        let mut w = Self {
            f0,
            f_bw,
            amplitude,
            delay: 0.0,
        };
        w.delay = DEFAULT_DELAY_SPREADS * w.spread();
        w
    }

    /// Gaussian 1/e half-width (s).
    pub fn spread(&self) -> f64 {
        10f64.ln().sqrt() / (PI * self.f_bw)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0 >= 0.0 && self.f0.is_finite()) {
            return Err(Error::Config(format!("source f0 must be >= 0, got {}", self.f0)));
        }
        if !(self.f_bw > 0.0 && self.f_bw.is_finite()) {
            return Err(Error::Config(format!("source f_bw must be > 0, got {}", self.f_bw)));
        }
        if !(self.amplitude.is_finite() && self.amplitude != 0.0) {
            return Err(Error::Config("source amplitude must be finite and non-zero".into()));
        }
        let min = MIN_DELAY_SPREADS * self.spread();
        if !(self.delay >= min * (1.0 - 1e-12)) || !self.delay.is_finite() {
            return Err(Error::Config(format!(
                "source delay {:e} s is below the turn-on bound {:e} s",
                self.delay, min
            )));
        }
        Ok(())
    }

    /// Source voltage at time `t` (V).
    pub fn value(&self, t: f64) -> f64 {
        gaussian_modulated_pulse(t, self)
    }

    /// Lower and upper −20 dB edges of the excitation band, clamped at 0.
    pub fn band(&self) -> (f64, f64) {
        ((self.f0 - self.f_bw).max(0.0), self.f0 + self.f_bw)
    }
}

pub fn gaussian_modulated_pulse(t: f64, w: &SourceWaveform) -> f64 {
    let u = t - w.delay;
    let g = (-(u / w.spread()).powi(2)).exp();
    w.amplitude * g * (2.0 * PI * w.f0 * u).sin()
}

/// Uniform frequency list `lo..=hi` with `step` spacing.
pub fn frequency_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// Gap voltage and wire current on a common time base `t_n = (n + 1)·dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortRecord {
    pub v: Vec<f64>,
    pub i: Vec<f64>,
    pub dt: f64,
    pub z_ref: f64,
}

impl PortRecord {
    pub fn validate(&self) -> Result<()> {
        if self.v.len() != self.i.len() {
            return Err(Error::Extraction(format!(
                "voltage and current lengths differ ({} vs {})",
                self.v.len(),
                self.i.len()
            )));
        }
        if !(self.dt > 0.0) || !(self.z_ref > 0.0) {
            return Err(Error::Extraction("record needs dt > 0 and z_ref > 0".into()));
        }
        Ok(())
    }
}

/// Samples the active port of a grid during a run.
#[derive(Debug, Clone)]
pub struct PortRecorder {
    v_node: [usize; 3],
    i_node: [usize; 3],
    dt: f64,
    z_ref: f64,
    v: Vec<f64>,
    i_half: Vec<f64>,
}

impl PortRecorder {
    pub fn new(grid: &VoxelGrid, dt: f64) -> Result<Self> {
        let port = grid
            .port
            .ok_or_else(|| Error::Config("grid has no active port".into()))?;
        Ok(Self {
            v_node: grid.lumped[port.element].index,
            i_node: port.current_edge,
            dt,
            z_ref: port.reference_impedance,
            v: Vec::new(),
            i_half: Vec::new(),
        })
    }

    /// Align the half-step currents to the voltage samples. The last voltage
    /// sample has no following current sample and is dropped.
    pub fn finish(self) -> PortRecord {
        let n = self.v.len().min(self.i_half.len().saturating_sub(1));
        let i = (0..n)
            .map(|k| 0.5 * (self.i_half[k] + self.i_half[k + 1]))
            .collect();
        PortRecord {
            v: self.v[..n].to_vec(),
            i,
            dt: self.dt,
            z_ref: self.z_ref,
        }
    }
}

impl Recorder for PortRecorder {
    fn on_h(&mut self, fields: &FieldState, _t: f64) {
        self.i_half.push(fields.z_loop_current(self.i_node));
    }

    fn on_e(&mut self, fields: &FieldState, _t: f64) {
        self.v.push(fields.z_edge_voltage(self.v_node));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortSpectra {
    pub freqs: Vec<f64>,
    pub v: Vec<Complex64>,
    pub i: Vec<Complex64>,
    pub z: Vec<Complex64>,
    pub s11: Vec<Complex64>,
    /// False where |I| was too small to divide by.
    pub valid: Vec<bool>,
    pub z_ref: f64,
}

/// Threshold below which a current spectrum sample is unusable (A·s).
pub const MIN_CURRENT: f64 = 1e-15;

fn dft(x: &[f64], dt: f64, f: f64) -> Complex64 {
    let w = 2.0 * PI * f;
    let mut acc = Complex64::new(0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let t = (n + 1) as f64 * dt;
        let (s, c) = (w * t).sin_cos();
        acc += Complex64::new(v * c, -v * s);
    }
    acc * dt
}

pub fn port_spectra(rec: &PortRecord, freqs: &[f64]) -> Result<PortSpectra> {
    rec.validate()?;
    let n = freqs.len();
    let mut out = PortSpectra {
        freqs: freqs.to_vec(),
        v: Vec::with_capacity(n),
        i: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        s11: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
        z_ref: rec.z_ref,
    };
    let zr = Complex64::new(rec.z_ref, 0.0);
    for &f in freqs {
        let v = dft(&rec.v, rec.dt, f);
        let i = dft(&rec.i, rec.dt, f);
        let ok = i.norm() >= MIN_CURRENT && v.is_finite() && i.is_finite();
        let (z, s) = if ok {
            let z = v / i;
            (z, (z - zr) / (z + zr))
        } else {
            (Complex64::new(f64::NAN, f64::NAN), Complex64::new(f64::NAN, f64::NAN))
        };
        out.v.push(v);
        out.i.push(i);
        out.z.push(z);
        out.s11.push(s);
        out.valid.push(ok);
    }
    Ok(out)
}

impl PortSpectra {
    /// |S11| in dB; NaN where invalid.
    pub fn s11_db(&self) -> Vec<f64> {
        self.s11
            .iter()
            .zip(&self.valid)
            .map(|(s, &ok)| if ok { 20.0 * s.norm().log10() } else { f64::NAN })
            .collect()
    }

    fn valid_db(&self) -> (Vec<f64>, Vec<f64>) {
        let db = self.s11_db();
        self.freqs
            .iter()
            .zip(db)
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|((&f, d), _)| (f, d))
            .unzip()
    }

    /// Spectra restricted to a sub-band, e.g. for export.
    pub fn index_of(&self, f: f64) -> Option<usize> {
        self.freqs.iter().position(|&x| (x - f).abs() <= 1e-6 * f.abs().max(1.0))
    }
}

/// Frequency of the global |S11| minimum, refined by a parabola through the
/// neighbouring samples (in dB). Ties go to the lower frequency.
pub fn resonant_frequency(s: &PortSpectra) -> Result<f64> {
    let (f, db) = s.valid_db();
    if f.len() < 3 {
        return Err(Error::Extraction(format!(
            "need at least 3 valid samples, have {}",
            f.len()
        )));
    }
    let mut m = 0;
    for k in 1..db.len() {
        if db[k] < db[m] {
            m = k;
        }
    }
    if m == 0 || m == f.len() - 1 {
        return Ok(f[m]);
    }
    Ok(parabolic_vertex([f[m - 1], f[m], f[m + 1]], [db[m - 1], db[m], db[m + 1]]))
}

fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> f64 {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let curv = (d2 - d1) / (x[2] - x[0]);
    if !(curv > 0.0) {
        return x[1];
    }
    // y = y1 + d1·(x − x1) + curv·(x − x0)(x − x1); set derivative to zero
    let v = 0.5 * (x[0] + x[1]) - d1 / (2.0 * curv);
    v.clamp(x[0], x[2])
}

/// Percentage bandwidth of the contiguous band around the |S11| minimum
/// where |S11| ≤ `threshold_db`, with crossings interpolated in dB.
pub fn fractional_bandwidth(s: &PortSpectra, threshold_db: f64) -> Result<f64> {
    if !(threshold_db < 0.0) {
        return Err(Error::Extraction(format!(
            "threshold must be < 0 dB, got {threshold_db}"
        )));
    }
    let (f, db) = s.valid_db();
    if f.len() < 3 {
        return Err(Error::Extraction("need at least 3 valid samples".into()));
    }
    let mut m = 0;
    for k in 1..db.len() {
        if db[k] < db[m] {
            m = k;
        }
    }
    if db[m] > threshold_db {
        return Ok(0.0);
    }
    let cross = |a: usize, b: usize| {
        let t = (threshold_db - db[a]) / (db[b] - db[a]);
        f[a] + t * (f[b] - f[a])
    };
    let mut lo = m;
    while lo > 0 && db[lo - 1] <= threshold_db {
        lo -= 1;
    }
    if lo == 0 {
        return Err(Error::BandUnresolved(format!(
            "|S11| is below {threshold_db} dB at the lowest sampled frequency {} Hz",
            f[0]
        )));
    }
    let f_lo = cross(lo - 1, lo);
    let mut hi = m;
    while hi + 1 < f.len() && db[hi + 1] <= threshold_db {
        hi += 1;
    }
    if hi + 1 == f.len() {
        return Err(Error::BandUnresolved(format!(
            "|S11| is below {threshold_db} dB at the highest sampled frequency {} Hz",
            f[f.len() - 1]
        )));
    }
    let f_hi = cross(hi, hi + 1);
    let fc = resonant_frequency(s)?;
    Ok((f_hi - f_lo) / fc * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spectra_from_db(freqs: &[f64], db: impl Fn(f64) -> f64) -> PortSpectra {
        let s11: Vec<Complex64> = freqs
            .iter()
            .map(|&f| Complex64::new(10f64.powf(db(f) / 20.0), 0.0))
            .collect();
        let n = freqs.len();
        PortSpectra {
            freqs: freqs.to_vec(),
            v: vec![Complex64::new(0.0, 0.0); n],
            i: vec![Complex64::new(1.0, 0.0); n],
            z: vec![Complex64::new(50.0, 0.0); n],
            s11,
            valid: vec![true; n],
            z_ref: 50.0,
        }
    }

    #[test]
    fn pulse_basics() {
        let w = SourceWaveform::default();
        assert_eq!(w.value(w.delay), 0.0);
        assert!(w.value(0.0).abs() <= 1e-8 * w.amplitude);
        w.validate().unwrap();
        let mut bad = w;
        bad.delay = 4.0 * w.spread();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pulse_spectrum_shape() {
        // Reference values from a DFT of the sampled pulse at dt = 1 ps.
        let w = SourceWaveform::default();
        let dt = 1e-12;
        let x: Vec<f64> = (0..4000).map(|n| w.value((n + 1) as f64 * dt)).collect();
        let mag = |f: f64| dft(&x, dt, f).norm();
        let freqs = frequency_grid(0.5e9, 12e9, 5e6);
        let (mut fp, mut mp) = (0.0, 0.0);
        for &f in &freqs {
            let m = mag(f);
            if m > mp {
                mp = m;
                fp = f;
            }
        }
        assert!((fp - w.f0).abs() / w.f0 < 0.01, "peak at {fp}");
        let lo_db = 20.0 * (mag(w.f0 - w.f_bw) / mp).log10();
        let hi_db = 20.0 * (mag(w.f0 + w.f_bw) / mp).log10();
        assert!((lo_db + 20.0).abs() < 1.0, "{lo_db}");
        assert!((hi_db + 20.0).abs() < 1.0, "{hi_db}");
        let dc = 20.0 * (dft(&x, dt, 0.0).norm() / mp).log10();
        assert!(dc < -60.0, "{dc}");
    }

    #[test]
    fn resonance_on_parabola() {
        let freqs = frequency_grid(5.0e9, 6.0e9, 10e6);
        let s = spectra_from_db(&freqs, |f| -20.0 + 3e-17 * (f - 5.5e9 - 3.7e6).powi(2));
        let fr = resonant_frequency(&s).unwrap();
        assert!((fr - 5.5037e9).abs() < 1e6, "{fr}");
        let s = spectra_from_db(&freqs, |f| -20.0 + 3e-17 * (f - 5.5e9).powi(2));
        assert!((resonant_frequency(&s).unwrap() - 5.5e9).abs() < 1e6);
    }

    #[test]
    fn resonance_tie_goes_low() {
        let freqs = frequency_grid(2e9, 9e9, 100e6);
        let s = spectra_from_db(&freqs, |_| -3.0);
        assert_eq!(resonant_frequency(&s).unwrap(), 2e9);
    }

    #[test]
    fn resonance_needs_valid_samples() {
        let freqs = frequency_grid(2e9, 9e9, 100e6);
        let mut s = spectra_from_db(&freqs, |_| -3.0);
        s.valid.iter_mut().for_each(|v| *v = false);
        assert!(matches!(resonant_frequency(&s), Err(Error::Extraction(_))));
    }

    fn vee(f: f64) -> f64 {
        // −10 dB at 4.9 and 6.1 GHz, minimum −30 dB at 5.5 GHz
        if f <= 5.5e9 {
            -30.0 + 20.0 * (5.5e9 - f) / 0.6e9
        } else {
            -30.0 + 20.0 * (f - 5.5e9) / 0.6e9
        }
    }

    #[test]
    fn bandwidth_synthetic() {
        let freqs = frequency_grid(2e9, 9e9, 10e6);
        let s = spectra_from_db(&freqs, vee);
        let bw = fractional_bandwidth(&s, -10.0).unwrap();
        assert!((bw - 1.2 / 5.5 * 100.0).abs() < 1e-6, "{bw}");
        assert!((bw - 21.818).abs() < 0.01);
    }

    #[test]
    fn bandwidth_edge_cases() {
        let freqs = frequency_grid(2e9, 9e9, 10e6);
        let s = spectra_from_db(&freqs, |f| vee(f) + 25.0);
        assert_eq!(fractional_bandwidth(&s, -10.0).unwrap(), 0.0);
        let narrow = frequency_grid(5.0e9, 6.0e9, 10e6);
        let s = spectra_from_db(&narrow, vee);
        assert!(matches!(
            fractional_bandwidth(&s, -10.0),
            Err(Error::BandUnresolved(_))
        ));
        assert!(fractional_bandwidth(&s, 0.0).is_err());
    }

    #[test]
    fn frequency_grid_is_inclusive() {
        let g = frequency_grid(2e9, 9e9, 10e6);
        assert_eq!(g.len(), 701);
        assert_eq!(*g.last().unwrap(), 9e9);
    }

    fn resistor_record(w: &SourceWaveform, r: f64, dt: f64, n: usize) -> PortRecord {
        let v: Vec<f64> = (0..n).map(|k| w.value((k + 1) as f64 * dt)).collect();
        let i = v.iter().map(|x| x / r).collect();
        PortRecord { v, i, dt, z_ref: 50.0 }
    }

    #[test]
    fn resistor_load_spectra() {
        let w = SourceWaveform::default();
        let rec = resistor_record(&w, 50.0, 1e-12, 4000);
        let s = port_spectra(&rec, &frequency_grid(3e9, 8e9, 0.5e9)).unwrap();
        for (z, ok) in s.z.iter().zip(&s.valid) {
            assert!(ok);
            assert!((z - 50.0).norm() < 1e-9);
        }
        let short = PortRecord {
            v: vec![0.0; 4000],
            ..rec.clone()
        };
        let s = port_spectra(&short, &[5.5e9]).unwrap();
        assert!((s.s11[0] + 1.0).norm() < 1e-12);
        let open = PortRecord {
            i: vec![0.0; 4000],
            ..rec
        };
        let s = port_spectra(&open, &[5.5e9]).unwrap();
        assert!(!s.valid[0]);
    }

    #[test]
    fn mismatched_record_rejected() {
        let rec = PortRecord {
            v: vec![0.0; 3],
            i: vec![0.0; 2],
            dt: 1e-12,
            z_ref: 50.0,
        };
        assert!(port_spectra(&rec, &[1e9]).is_err());
    }

    /// RC-like load: i = v/R + C dv/dt, evaluated on the sampled pulse.
    fn rc_record(w: &SourceWaveform, dt: f64, n: usize) -> PortRecord {
        let v: Vec<f64> = (0..n).map(|k| w.value((k + 1) as f64 * dt)).collect();
        let mut i = vec![0.0; n];
        for k in 0..n {
            let prev = if k == 0 { 0.0 } else { v[k - 1] };
            i[k] = v[k] / 70.0 + 0.3e-12 * (v[k] - prev) / dt;
        }
        PortRecord { v, i, dt, z_ref: 50.0 }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn dft_linearity(k in 0.01f64..100.0) {
            let w = SourceWaveform::default();
            let freqs = frequency_grid(2e9, 9e9, 0.5e9);
            let a = port_spectra(&rc_record(&w, 1e-12, 3000), &freqs).unwrap();
            let mut ws = w;
            ws.amplitude *= k;
            let b = port_spectra(&rc_record(&ws, 1e-12, 3000), &freqs).unwrap();
            for n in 0..freqs.len() {
                prop_assert!((b.v[n] - a.v[n] * k).norm() <= 1e-12 * (a.v[n] * k).norm());
                prop_assert!((b.z[n] - a.z[n]).norm() <= 1e-12 * a.z[n].norm());
                prop_assert!((b.s11[n] - a.s11[n]).norm() <= 1e-12 * a.s11[n].norm().max(1e-3));
            }
        }

        #[test]
        fn time_invariance(shift in 1usize..200) {
            // start deep enough in the Gaussian tail that truncation at t = 0 is below 1e-15
            let mut w = SourceWaveform::default();
            w.delay = 6.0 * w.spread();
            let dt = 1e-12;
            let freqs = frequency_grid(2e9, 9e9, 0.5e9);
            let a = port_spectra(&rc_record(&w, dt, 3000), &freqs).unwrap();
            let mut ws = w;
            ws.delay += shift as f64 * dt;
            let b = port_spectra(&rc_record(&ws, dt, 3000), &freqs).unwrap();
            for n in 0..freqs.len() {
                let ph = Complex64::from_polar(1.0, -2.0 * PI * freqs[n] * shift as f64 * dt);
                prop_assert!((b.v[n] - a.v[n] * ph).norm() <= 1e-10 * a.v[n].norm());
                prop_assert!((b.i[n] - a.i[n] * ph).norm() <= 1e-10 * a.i[n].norm());
                prop_assert!((b.z[n] - a.z[n]).norm() <= 1e-10 * a.z[n].norm());
            }
        }

        #[test]
        fn bandwidth_monotone(depth in 12.0f64..40.0, t1 in -11.5f64..-1.0, dt in 0.0f64..5.0) {
            let freqs = frequency_grid(2e9, 9e9, 10e6);
            let s = spectra_from_db(&freqs, |f| -depth * (-((f - 5.5e9) / 0.8e9).powi(2)).exp());
            let a = fractional_bandwidth(&s, t1).unwrap();
            let b = fractional_bandwidth(&s, t1 - dt).unwrap();
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn passive_load_is_bounded(r in 1.0f64..1000.0, c in 0.0f64..2e-12) {
            let w = SourceWaveform::default();
            let dt = 1e-12;
            let n = 3000;
            let v: Vec<f64> = (0..n).map(|k| w.value((k + 1) as f64 * dt)).collect();
            // trapezoidal capacitor current stays passive on the sampled grid
            let mut i = vec![0.0; n];
            let mut ic = 0.0;
            for k in 0..n {
                let prev = if k == 0 { 0.0 } else { v[k - 1] };
                ic = 2.0 * c * (v[k] - prev) / dt - ic;
                i[k] = v[k] / r + ic;
            }
            let rec = PortRecord { v, i, dt, z_ref: 50.0 };
            let s = port_spectra(&rec, &frequency_grid(2e9, 9e9, 0.25e9)).unwrap();
            for (x, ok) in s.s11.iter().zip(&s.valid) {
                if *ok {
                    prop_assert!(x.norm() <= 1.0 + 1e-6);
                }
            }
        }
    }
}
