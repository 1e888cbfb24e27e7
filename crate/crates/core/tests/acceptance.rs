//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 1-7 gate the exit status. Criteria 8-12 compare the six-state
//! antenna against the published figures; their outcome is printed but a
//! failure does not fail the run (see the reproduction guide in README.md).

use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use gl_antenna::config::parse_config;
use gl_antenna::constants::{HBAR, K_B, Q_E};
use gl_antenna::materials::{kubo_intraband, kubo_intraband_omega, GrapheneModel, GrapheneSpec};
use gl_antenna::oracle::{self, OracleReport, PatchSpec};
use gl_antenna::runner::{run_states, RunReport};
use gl_antenna::scene::Location;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

struct Outcome {
    id: usize,
    pass: bool,
}

fn line(id: usize, name: &str, pass: bool, detail: &str) -> Outcome {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("AC{id:<2} {verdict} {name}: {detail}");
    Outcome { id, pass }
}

fn from_report(id: usize, name: &str, r: gl_antenna::Result<OracleReport>, started: Instant) -> Outcome {
    match r {
        Ok(r) => {
            let detail = r
                .checks
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            line(id, name, r.passed(), &format!("{detail} [{:.1} s]", started.elapsed().as_secs_f64()))
        }
        Err(e) => line(id, name, false, &format!("error: {e}")),
    }
}

fn ac1() -> Outcome {
    let t = Instant::now();
    let r = oracle::cavity(40e-3, 30e-3, 20e-3, 1e-3, 16_000);
    let out = from_report(1, "PEC cavity modes within 1%", r, t);
    let fast = t.elapsed().as_secs_f64() < 60.0;
    if !fast {
        println!("     note: runtime target of 1 min exceeded");
    }
    out
}

fn ac2() -> Outcome {
    let t = Instant::now();
    from_report(2, "energy conservation over 10000 steps", oracle::energy_conservation(10_000), t)
}

fn ac3() -> Outcome {
    let t = Instant::now();
    from_report(3, "CPML normal-incidence reflection", oracle::cpml(), t)
}

fn ac4() -> Outcome {
    let t = Instant::now();
    from_report(4, "Hertzian dipole pattern, directivity, power", oracle::dipole(2e-3, 5.5e9).map(|d| d.report), t)
}

fn valid_spec() -> impl Strategy<Value = (GrapheneSpec, f64)> {
    (0.0f64..1.5, -14.0f64..-10.0, 1.0f64..1000.0, 0.0f64..1e13).prop_map(|(mu, log_tau, t, f)| {
        let g = GrapheneSpec {
            mu_c: mu,
            tau: 10f64.powf(log_tau),
            temperature: t,
            model: GrapheneModel::Sheet,
            bulk_sigma_override: None,
        };
        (g, f)
    })
}

fn ac5() -> Outcome {
    let cases = 1000;
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let result = runner.run(&valid_spec(), |(g, f)| {
        let w = 2.0 * PI * f;
        let pos = kubo_intraband_omega(&g, w);
        prop_assert_eq!(kubo_intraband_omega(&g, -w), pos.conj(), "hermitian symmetry");
        prop_assert!(kubo_intraband(&g, f).unwrap().re >= 0.0, "passivity");
        let s0 = kubo_intraband(&g, 0.0).unwrap();
        prop_assert_eq!(s0.im, 0.0);
        for wt in [1e-4 * (f / 1e13), 1e-6 * (f / 1e13)] {
            let s = kubo_intraband(&g, wt / (2.0 * PI * g.tau)).unwrap();
            let dev = (s - s0).norm() / s0.norm();
            prop_assert!((dev - wt / (1.0 + wt * wt).sqrt()).abs() <= 1e-9 * wt.max(1e-12), "low-frequency limit");
            if wt <= 1e-6 {
                prop_assert!(dev <= 1e-6);
            }
        }
        Ok(())
    });
    let g0 = GrapheneSpec {
        mu_c: 0.0,
        tau: 1e-12,
        temperature: 300.0,
        model: GrapheneModel::Sheet,
        bulk_sigma_override: None,
    };
    let s = kubo_intraband(&g0, 0.0).unwrap();
    let closed = Q_E * Q_E * K_B * 300.0 * 1e-12 / (PI * HBAR * HBAR) * 2.0 * LN_2;
    let rel = (s.re - closed).abs() / closed;
    let pass = result.is_ok() && rel <= 1e-12 && s.im == 0.0;
    let detail = match &result {
        Ok(()) => format!("{cases} randomized cases passed; mu_c = 0 DC value rel. error {rel:.1e} (bound 1e-12)"),
        Err(e) => format!("property failure: {e}"),
    };
    line(5, "Kubo conductivity properties", pass, &detail)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            out.push((rel, std::fs::read(&p)?));
        }
    }
    Ok(())
}

fn ac6() -> Outcome {
    let t = Instant::now();
    let tmp = tempfile::tempdir().expect("temp dir");
    let cfg = tmp.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"preset": "paper-table1", "states": ["L2", "L5"],
            "sim": {"delta": 1e-3, "max_steps": 1000},
            "analysis": {"extra_pattern_frequencies": []}}"#,
    )
    .unwrap();
    // Both runs write to the same directory so the recorded config matches.
    let out = tmp.path().join("out");
    let mut trees = Vec::new();
    for (n, jobs) in [(1, "1"), (2, "2")] {
        let status = Command::new(env!("CARGO_BIN_EXE_gl-antenna"))
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--reproducible", "--jobs", jobs, "--out"])
            .arg(&out)
            .output()
            .expect("run binary");
        if !status.status.success() {
            let err = String::from_utf8_lossy(&status.stderr).into_owned();
            return line(6, "byte-identical reproducible outputs", false, &format!("run {n} failed: {err}"));
        }
        let mut files = Vec::new();
        collect_files(&out, &out, &mut files).unwrap();
        trees.push(files);
        std::fs::rename(&out, tmp.path().join(format!("run{n}"))).unwrap();
    }
    let same = trees[0] == trees[1] && !trees[0].is_empty();
    let differing: Vec<String> = trees[0]
        .iter()
        .filter(|a| !trees[1].contains(a))
        .map(|(name, _)| format!("{name:?}"))
        .collect();
    let detail = format!(
        "{} files compared across two runs (jobs 1 and 2){} [{:.1} s]",
        trees[0].len(),
        if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) },
        t.elapsed().as_secs_f64()
    );
    line(6, "byte-identical reproducible outputs", same, &detail)
}

fn ac7() -> Outcome {
    let t = Instant::now();
    match oracle::patch(&PatchSpec::default()) {
        Ok(r) => {
            let detail = format!(
                "simulated {:.4} GHz vs cavity model {:.4} GHz; {}",
                r.simulated / 1e9,
                r.analytic / 1e9,
                r.report.checks.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; ")
            );
            line(7, "patch resonance vs cavity model within 5%", r.report.passed(), &format!("{detail} [{:.0} s]", t.elapsed().as_secs_f64()))
        }
        Err(e) => line(7, "patch resonance vs cavity model within 5%", false, &format!("error: {e}")),
    }
}

/// Six-state run of the frozen preset at the acceptance resolution.
fn six_states() -> gl_antenna::Result<RunReport> {
    let cfg = parse_config(r#"{"preset": "paper-table1", "sim": {"delta": 1e-3}}"#)?;
    run_states(&cfg, 1)
}

fn reproduction_criteria(report: &RunReport) -> Vec<Outcome> {
    let mut out = Vec::new();
    for r in report.results.iter().filter_map(|r| r.as_ref().err()) {
        println!("     {}: simulation failed: {}", r.state, r.error);
    }

    // 8: resonance inside 5.5 GHz ± 10% and below −10 dB, all six states
    let mut pass = report.ok().count() == 6;
    let mut parts = Vec::new();
    for r in report.ok() {
        let f = r.resonance_hz.unwrap_or(f64::NAN);
        let ok = (f - 5.5e9).abs() <= 0.55e9 && r.min_s11_db < -10.0;
        pass &= ok;
        parts.push(format!("{} {:.3} GHz {:.1} dB", r.state, f / 1e9, r.min_s11_db));
    }
    out.push(line(8, "six resonances in 4.95-6.05 GHz below -10 dB", pass, &parts.join(", ")));

    // 9: resonance stability
    match &report.stability {
        Some(s) => out.push(line(
            9,
            "max pairwise resonance deviation <= 3%",
            s.resonances_hz.len() == 6 && s.max_pairwise_deviation <= 0.03,
            &format!("{:.2}% over {} states", 100.0 * s.max_pairwise_deviation, s.resonances_hz.len()),
        )),
        None => out.push(line(9, "max pairwise resonance deviation <= 3%", false, "fewer than two resonances")),
    }

    // 10: L2 bandwidth
    match report.get(Location::L2).map(|r| r.bandwidth.clone()) {
        Some(Ok(bw)) => out.push(line(10, "L2 -10 dB bandwidth 24% +/- 8 points", (bw - 24.0).abs() <= 8.0, &format!("{bw:.2}%"))),
        Some(Err(e)) => out.push(line(10, "L2 -10 dB bandwidth 24% +/- 8 points", false, &e)),
        None => out.push(line(10, "L2 -10 dB bandwidth 24% +/- 8 points", false, "L2 missing")),
    }

    // 11: beam map bijection and point symmetry of mirrored states
    let bm = &report.beam_map;
    let mapping = bm
        .entries
        .iter()
        .map(|e| format!("{} {:.0} deg -> {}", e.state, e.peak_azimuth_deg, e.matched_beam))
        .collect::<Vec<_>>()
        .join(", ");
    let correct = bm.bijection && bm.entries.iter().all(|e| e.matched_beam == e.expected_beam);
    let mut sym_worst = 0.0f64;
    let mut sym_ok = true;
    for (a, b) in [(Location::L2, Location::L5), (Location::L3, Location::L6), (Location::L4, Location::L1)] {
        match (report.get(a), report.get(b)) {
            (Some(ra), Some(rb)) => {
                let pa = &ra.design().pattern;
                let pb = rb.design().pattern.shifted_phi(pa.n_phi() / 2);
                let ua = pa.intensity();
                let ub = pb.intensity();
                let peak = ua.iter().cloned().fold(0.0, f64::max);
                let d = ua.iter().zip(&ub).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / peak;
                sym_worst = sym_worst.max(d);
            }
            _ => sym_ok = false,
        }
    }
    sym_ok &= sym_worst <= 0.01;
    println!(
        "     point symmetry L2/L5, L3/L6, L4/L1: max intensity difference {:.2e} of peak (bound 1e-2): {}",
        sym_worst,
        if sym_ok { "holds" } else { "violated" }
    );
    out.push(line(
        11,
        "beam map bijection onto the B1-B6 labels within +/-15 deg, point symmetry",
        correct && sym_ok,
        &format!("{mapping}; violations: {:?}", bm.violations),
    ));

    // 12: L2 gain and front-to-back ratio at resonance
    match report.get(Location::L2) {
        Some(r) => {
            let m = &r.at_resonance().metrics;
            let f = r.at_resonance().pattern.f;
            out.push(line(
                12,
                "L2 gain 6 +/- 2 dBi and front-to-back >= 7 dB",
                (m.gain_dbi - 6.0).abs() <= 2.0 && m.front_to_back_db >= 7.0,
                &format!("gain {:.2} dBi, F/B {:.2} dB at {:.3} GHz", m.gain_dbi, m.front_to_back_db, f / 1e9),
            ))
        }
        None => out.push(line(12, "L2 gain 6 +/- 2 dBi and front-to-back >= 7 dB", false, "L2 missing")),
    }
    out
}

fn main() {
    // `cargo test -- --list` and filters from other targets land here too
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let started = Instant::now();
    let mut outcomes = vec![ac1(), ac2(), ac3(), ac4(), ac5(), ac6(), ac7()];
    let t = Instant::now();
    match six_states() {
        Ok(report) => {
            for r in report.ok() {
                println!(
                    "     {}: {} steps, {}, {:.0} s",
                    r.state, r.steps, r.termination.reason, r.wall_seconds
                );
            }
            outcomes.extend(reproduction_criteria(&report));
        }
        Err(e) => {
            for id in 8..=12 {
                outcomes.push(line(id, "six-state run", false, &format!("error: {e}")));
            }
        }
    }
    println!("     six-state run: {:.0} s", t.elapsed().as_secs_f64());

    let hard_fail: Vec<usize> = outcomes.iter().filter(|o| o.id <= 7 && !o.pass).map(|o| o.id).collect();
    let soft_fail: Vec<usize> = outcomes.iter().filter(|o| o.id > 7 && !o.pass).map(|o| o.id).collect();
    println!(
        "acceptance: {} of {} criteria pass in {:.0} s",
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );
    if !soft_fail.is_empty() {
        println!("acceptance: reproduction criteria {soft_fail:?} not met; see the reproduction guide in README.md");
    }
    if !hard_fail.is_empty() {
        println!("acceptance: solver criteria {hard_fail:?} FAILED");
        std::process::exit(1);
    }
}
