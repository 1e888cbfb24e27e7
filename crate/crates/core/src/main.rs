use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gl_antenna::config::RunConfig;
use gl_antenna::oracle::{self, OracleReport, PatchSpec};
use gl_antenna::output::write_outputs;
use gl_antenna::runner::run_states;
use gl_antenna::scene::Location;
use gl_antenna::{Error, Result};

#[derive(Parser)]
#[command(name = "gl-antenna", version, about = "FDTD simulator for a graphene-liquid beam-reconfigurable antenna")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured liquid states and write the outputs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of L1..L6, overriding the config.
        #[arg(long, value_delimiter = ',')]
        states: Option<Vec<String>>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Omit timestamps and wall-clock times from the outputs.
        #[arg(long)]
        reproducible: bool,
        /// Output directory, overriding `outputs.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a config and print the effective (defaults-applied) version.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a built-in analytic validation scene.
    Oracle {
        #[arg(value_enum)]
        which: OracleKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Dipole,
    Cavity,
    Patch,
}

fn simulate(
    config: PathBuf,
    states: Option<Vec<String>>,
    jobs: usize,
    reproducible: bool,
    out: Option<PathBuf>,
) -> Result<bool> {
    let mut cfg = RunConfig::from_path(&config)?;
    if let Some(list) = states {
        cfg.states = list
            .iter()
            .map(|s| Location::parse(s).ok_or_else(|| Error::Config(format!("unknown state `{s}`"))))
            .collect::<Result<_>>()?;
    }
    if let Some(dir) = out {
        cfg.outputs.dir = dir.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    let report = run_states(&cfg, jobs)?;
    let dir = PathBuf::from(&cfg.outputs.dir);
    write_outputs(&cfg, &report, &dir, reproducible)?;

    for r in &report.results {
        match r {
            Ok(r) => {
                let d = &r.design().metrics;
                println!(
                    "{}: resonance {} | min S11 {:.2} dB | bandwidth {} | peak (θ {}, φ {}) | gain {:.2} dBi | F/B {:.2} dB | {} steps{}",
                    r.state,
                    r.resonance_hz.map_or("n/a".into(), |f| format!("{:.3} GHz", f / 1e9)),
                    r.min_s11_db,
                    r.bandwidth.as_ref().map_or_else(|e| e.clone(), |b| format!("{b:.2}%")),
                    d.peak.0,
                    d.peak.1,
                    d.gain_dbi,
                    d.front_to_back_db,
                    r.steps,
                    if r.termination.warning { " (max steps reached)" } else { "" },
                );
            }
            Err(e) => println!("{}: FAILED: {}", e.state, e.error),
        }
    }
    for e in &report.beam_map.entries {
        println!("beam {} -> {:.1} deg -> {}", e.state, e.peak_azimuth_deg, e.matched_beam);
    }
    for v in &report.beam_map.violations {
        println!("beam map: {v}");
    }
    if let Some(s) = &report.stability {
        println!("max pairwise resonance deviation: {:.3}%", 100.0 * s.max_pairwise_deviation);
    }
    println!("outputs written to {}", dir.display());
    Ok(report.results.iter().all(|r| r.is_ok()))
}

fn print_report(r: &OracleReport) -> bool {
    for c in &r.checks {
        println!("{c}");
    }
    println!("{}: {} ({} steps)", r.name, if r.passed() { "PASS" } else { "FAIL" }, r.steps);
    r.passed()
}

fn run_oracle(which: OracleKind) -> Result<bool> {
    Ok(match which {
        OracleKind::Cavity => print_report(&oracle::cavity(40e-3, 30e-3, 20e-3, 1e-3, 16_000)?),
        OracleKind::Dipole => print_report(&oracle::dipole(2e-3, 5.5e9)?.report),
        OracleKind::Patch => {
            let r = oracle::patch(&PatchSpec::default())?;
            println!(
                "simulated {:.4} GHz, cavity model {:.4} GHz (unextended {:.4} GHz), eps_eff {:.4}",
                r.simulated / 1e9,
                r.analytic / 1e9,
                r.bare / 1e9,
                r.eps_eff
            );
            print_report(&r.report)
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            states,
            jobs,
            reproducible,
            out,
        } => simulate(config, states, jobs, reproducible, out),
        Command::ValidateConfig { config } => RunConfig::from_path(&config).and_then(|cfg| {
            print!("{}", cfg.to_json()?);
            Ok(true)
        }),
        Command::Oracle { which } => run_oracle(which),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
