//! File outputs: Touchstone v1, pattern CSV, JSON summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::farfield::{normalize_db, FarFieldPattern, PatternMetrics};
use crate::ports::PortSpectra;
use crate::runner::{BeamEntry, BeamMap, RunReport, Stability, StateError, StateResult, TerminationInfo};
use crate::scene::Location;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Touchstone v1 one-port file. Invalid samples are skipped.
pub fn touchstone_string(s: &PortSpectra, state: &str) -> Result<String> {
    if s.z_ref != 50.0 {
        return Err(Error::Config(format!(
            "touchstone output is referenced to 50 ohm, spectra use {}",
            s.z_ref
        )));
    }
    let mut out = String::new();
    writeln!(out, "! {TOOL_VERSION}").unwrap();
    writeln!(out, "! state {state}").unwrap();
    writeln!(out, "# GHz S RI R 50").unwrap();
    let mut last = f64::NEG_INFINITY;
    for k in 0..s.freqs.len() {
        if !s.valid[k] {
            continue;
        }
        let f = s.freqs[k];
        if !(f > last) {
            return Err(Error::Extraction("frequencies must be strictly ascending".into()));
        }
        last = f;
        let g = s.s11[k];
        writeln!(out, "{:?} {:?} {:?}", f / 1e9, g.re, g.im).unwrap();
    }
    Ok(out)
}

pub fn write_touchstone(s: &PortSpectra, state: &str, path: &Path) -> Result<()> {
    fs::write(path, touchstone_string(s, state)?)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Touchstone {
    /// Hz.
    pub freqs: Vec<f64>,
    pub s11: Vec<Complex64>,
    pub z_ref: f64,
    pub comments: Vec<String>,
}

/// Parse a one-port Touchstone v1 file (RI, MA or DB data).
pub fn parse_touchstone(text: &str) -> Result<Touchstone> {
    let bad = |line: usize, m: &str| Error::Touchstone {
        line,
        message: m.to_string(),
    };
    let mut scale = 1e9;
    let mut format = "MA".to_string();
    let mut z_ref = 50.0;
    let mut seen_option = false;
    let mut out = Touchstone {
        freqs: Vec::new(),
        s11: Vec::new(),
        z_ref,
        comments: Vec::new(),
    };
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let (body, comment) = match raw.find('!') {
            Some(p) => (&raw[..p], Some(raw[p + 1..].trim())),
            None => (raw, None),
        };
        if let Some(c) = comment {
            out.comments.push(c.to_string());
        }
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        if let Some(opts) = body.strip_prefix('#') {
            if seen_option {
                return Err(bad(line_no, "second option line"));
            }
            seen_option = true;
            let toks: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
            let mut it = toks.iter();
            while let Some(t) = it.next() {
                match t.as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    "S" => {}
                    "Y" | "Z" | "G" | "H" => return Err(bad(line_no, "only S parameters are supported")),
                    "RI" | "MA" | "DB" => format = t.clone(),
                    "R" => {
                        z_ref = it
                            .next()
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| bad(line_no, "R needs a numeric value"))?;
                    }
                    other => return Err(bad(line_no, &format!("unknown option `{other}`"))),
                }
            }
            continue;
        }
        let nums = body
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(line_no, &format!("bad number: {e}")))?;
        if nums.len() != 3 {
            return Err(bad(line_no, &format!("expected 3 values, found {}", nums.len())));
        }
        let f = nums[0] * scale;
        if out.freqs.last().is_some_and(|&p| f <= p) {
            return Err(bad(line_no, "frequencies must be strictly ascending"));
        }
        let s = match format.as_str() {
            "RI" => Complex64::new(nums[1], nums[2]),
            "MA" => Complex64::from_polar(nums[1], nums[2].to_radians()),
            _ => Complex64::from_polar(10f64.powf(nums[1] / 20.0), nums[2].to_radians()),
        };
        out.freqs.push(f);
        out.s11.push(s);
    }
    out.z_ref = z_ref;
    Ok(out)
}

/// Pattern table `theta_deg,phi_deg,gain_dbi,normalized_db` in θ-major order.
pub fn pattern_csv_string(p: &FarFieldPattern, metrics: &PatternMetrics) -> Result<String> {
    let u = p.intensity();
    let (norm, _) = normalize_db(&u)?;
    let mut out = String::from("theta_deg,phi_deg,gain_dbi,normalized_db\n");
    let scale = 4.0 * std::f64::consts::PI / metrics.accepted_power;
    for it in 0..p.n_theta() {
        for ip in 0..p.n_phi() {
            let k = p.index(it, ip);
            let gain = 10.0 * (scale * u[k]).log10();
            writeln!(
                out,
                "{},{},{:.6},{:.6}",
                p.theta_deg[it],
                p.phi_deg[ip],
                gain.max(-999.0),
                norm[k].max(-999.0)
            )
            .unwrap();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternSummary<'a> {
    pub state: Location,
    pub frequency_hz: f64,
    pub matched_beam: &'a str,
    pub expected_beam: &'a str,
    pub metrics: &'a PatternMetrics,
}

/// Pattern CSV plus its JSON sidecar.
pub fn write_pattern_csv(
    p: &FarFieldPattern,
    metrics: &PatternMetrics,
    beam: &BeamEntry,
    path: &Path,
) -> Result<()> {
    fs::write(path, pattern_csv_string(p, metrics)?)?;
    let sidecar = PatternSummary {
        state: beam.state,
        frequency_hz: p.f,
        matched_beam: &beam.matched_beam,
        expected_beam: &beam.expected_beam,
        metrics,
    };
    fs::write(path.with_extension("json"), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct MetricsAt<'a> {
    frequency_hz: f64,
    #[serde(flatten)]
    metrics: &'a PatternMetrics,
}

#[derive(Debug, Clone, Serialize)]
struct StateSummary<'a> {
    state: Location,
    matched_beam: &'a str,
    expected_beam: &'a str,
    resonance_hz: Option<f64>,
    min_s11_db: f64,
    bandwidth_pct: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bandwidth_note: Option<&'a str>,
    design: MetricsAt<'a>,
    resonance: MetricsAt<'a>,
    termination: TerminationInfo,
    steps: usize,
    cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_seconds: Option<f64>,
}

fn state_summary<'a>(r: &'a StateResult, beam: &'a BeamEntry, reproducible: bool) -> StateSummary<'a> {
    let d = r.design();
    let at = r.at_resonance();
    StateSummary {
        state: r.state,
        matched_beam: &beam.matched_beam,
        expected_beam: &beam.expected_beam,
        resonance_hz: r.resonance_hz,
        min_s11_db: r.min_s11_db,
        bandwidth_pct: r.bandwidth.as_ref().ok().copied(),
        bandwidth_note: r.bandwidth.as_ref().err().map(|s| s.as_str()),
        design: MetricsAt {
            frequency_hz: d.pattern.f,
            metrics: &d.metrics,
        },
        resonance: MetricsAt {
            frequency_hz: at.pattern.f,
            metrics: &at.metrics,
        },
        termination: r.termination,
        steps: r.steps,
        cells: r.cells,
        wall_seconds: (!reproducible).then_some(r.wall_seconds),
    }
}

#[derive(Debug, Clone, Serialize)]
struct Report<'a> {
    tool: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_unix_seconds: Option<u64>,
    states: Vec<StateSummary<'a>>,
    errors: Vec<&'a StateError>,
    beam_map: &'a BeamMap,
    stability: Option<&'a Stability>,
}

/// Output directory name per result, with `_2`, `_3`… for repeated states.
fn dir_names(report: &RunReport) -> Vec<String> {
    let mut seen = std::collections::HashMap::new();
    report
        .results
        .iter()
        .map(|r| {
            let s = match r {
                Ok(x) => x.state,
                Err(e) => e.state,
            };
            let n = seen.entry(s).or_insert(0);
            *n += 1;
            if *n == 1 {
                s.label().to_string()
            } else {
                format!("{}_{}", s.label(), n)
            }
        })
        .collect()
}

/// Write every output of a run under `dir`; returns the files written.
pub fn write_outputs(cfg: &RunConfig, report: &RunReport, dir: &Path, reproducible: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let config_path = dir.join("effective_config.json");
    fs::write(&config_path, cfg.to_json()?)?;
    written.push(config_path);

    let beam_of = |s: Location| report.beam_map.entries.iter().find(|e| e.state == s);
    let mut summaries = Vec::new();
    for (r, name) in report.results.iter().zip(dir_names(report)) {
        let Ok(r) = r else { continue };
        let beam = beam_of(r.state).expect("beam entry for each successful state");
        let sdir = dir.join(&name);
        fs::create_dir_all(&sdir)?;
        if cfg.outputs.touchstone {
            let p = sdir.join(format!("{name}.s1p"));
            write_touchstone(&r.spectra, r.state.label(), &p)?;
            written.push(p);
        }
        if cfg.outputs.pattern_csv {
            for pr in &r.patterns {
                let p = sdir.join(format!("pattern_{}MHz.csv", (pr.pattern.f / 1e6).round()));
                write_pattern_csv(&pr.pattern, &pr.metrics, beam, &p)?;
                written.push(p.with_extension("json"));
                written.push(p);
            }
        }
        let summary = state_summary(r, beam, reproducible);
        if cfg.outputs.summary {
            let p = sdir.join("summary.json");
            fs::write(&p, serde_json::to_string_pretty(&summary)? + "\n")?;
            written.push(p);
        }
        summaries.push(summary);
    }

    let generated = (!reproducible).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let rep = Report {
        tool: TOOL_VERSION,
        generated_unix_seconds: generated,
        states: summaries,
        errors: report.results.iter().filter_map(|r| r.as_ref().err()).collect(),
        beam_map: &report.beam_map,
        stability: report.stability.as_ref(),
    };
    let p = dir.join("report.json");
    fs::write(&p, serde_json::to_string_pretty(&rep)? + "\n")?;
    written.push(p);
    Ok(written)
}
