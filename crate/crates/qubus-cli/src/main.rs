mod config;
mod run;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qubus_core::dynamics::fmt_f64;
use qubus_core::hilbert::{auto_truncation, check_truncation, thermal_state_nth};
use qubus_core::models;

use config::{ConfigError, ExperimentConfig, Kind, ModelChoice, Overrides, RawConfig};
use run::CONVERGENCE_TOL;
use summary::Summary;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "qubus", version, about = "Dressed-qubit bus simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (flat TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides run.output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parameter scans.
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for sampled fidelity ensembles.
    #[arg(long)]
    seed: Option<u64>,
    /// Oscillator truncation; chosen from the bath occupation when absent.
    #[arg(long)]
    truncation: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Readout spectra of the oscillator quadrature.
    Spectrum(Common),
    /// Steady state of a single qubit and the oscillator.
    Steady(Common),
    /// Negativity dynamics of two qubits and the oscillator.
    Entangle(Common),
    /// Gate fidelity over drive detuning and Rabi detuning.
    FidelityGrid(Common),
    /// Gate fidelity over qubit and oscillator damping.
    DampingGrid(Common),
    /// Gate fidelity over the dressing-pulse rise time.
    RisetimeScan(Common),
    /// Bell-state preparation circuit.
    Bell(Common),
    /// Check a configuration and print derived quantities.
    Validate(Common),
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn core_failure(raw: &RawConfig, e: qubus_core::Error) -> Failure {
    use qubus_core::Error;
    if !e.is_config() {
        return Failure::Numerical(e.to_string());
    }
    let keys: &[&str] = match &e {
        Error::SingularDetuning => &["params.delta_r", "params.omega_r"],
        Error::Truncation { .. } => &["run.truncation", "params.n_th_h", "spectrum.n_th", "params.temperature"],
        Error::Unsupported(_) => &["params.q1", "params.q2"],
        _ => &["params.g"],
    };
    let key = keys.iter().find(|k| raw.has(k)).copied().unwrap_or("");
    Failure::Config(raw.error(key, e.to_string()).to_string())
}

fn overrides(c: &Common) -> Overrides {
    Overrides { out: c.out.clone(), threads: c.threads, seed: c.seed, truncation: c.truncation }
}

/// Static checks and derived quantities; no simulation.
fn derived(cfg: &ExperimentConfig) -> Result<Summary, qubus_core::Error> {
    use qubus_core::Error;
    let p = &cfg.params;
    let mut s = Summary::new();
    let gate = matches!(cfg.kind, Kind::Entangle | Kind::FidelityGrid | Kind::DampingGrid | Kind::RisetimeScan | Kind::Bell);
    let needs_dr = match cfg.kind {
        Kind::FidelityGrid => false,
        Kind::Steady => cfg.model == ModelChoice::Dressed,
        Kind::Spectrum => !(cfg.model == ModelChoice::Bare && cfg.spectrum.t_cut.is_some() && cfg.spectrum.half_window.is_some()),
        _ => true,
    };
    if needs_dr && p.delta_r() == 0.0 {
        return Err(Error::SingularDetuning);
    }
    if gate {
        if p.g == 0.0 {
            return Err(Error::Argument("the gate time is undefined for g = 0".into()));
        }
        if !p.is_symmetric() {
            return Err(Error::Unsupported("gate experiments need identical qubits".into()));
        }
    }
    s.num("delta_r", p.delta_r());
    if p.delta_r() != 0.0 {
        s.num("t_cut", models::cutoff_time(p).unwrap_or(f64::NAN));
    }
    if p.delta_r() != 0.0 && cfg.model == ModelChoice::Dressed {
        s.num("dispersive_shift", models::dispersive_shift(p)?);
        s.num("sideband_frequency", models::sideband_frequency(p)?);
        if p.g != 0.0 {
            s.num("t_int", models::interaction_time(p)?);
            let cycles = models::phase_condition_cycles(p)?;
            s.num("phase_condition_cycles", cycles);
            s.set("phase_condition_met", (cycles - cycles.round()).abs() < 1e-9 && cycles.round() >= 1.0);
        }
    }
    let occupations: Vec<f64> = if cfg.kind == Kind::Spectrum { cfg.spectrum.n_th.clone() } else { vec![p.n_th_h] };
    let mut ns = Vec::new();
    for &nt in &occupations {
        let n = cfg.truncation.unwrap_or_else(|| auto_truncation(nt));
        thermal_state_nth(nt, n)?;
        ns.push(n);
    }
    let list = |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
    s.set("truncation", list(&ns));
    s.set("truncation_check", list(&ns.iter().map(|&n| check_truncation(n)).collect::<Vec<_>>()));
    for (k, w) in p.regime_warnings().iter().enumerate() {
        s.set(format!("regime_warning.{k}"), w);
    }
    Ok(s)
}

fn resolved_config(cfg: &ExperimentConfig) -> String {
    let p = &cfg.params;
    let mut s = Summary::new();
    s.set("kind", format!("\"{}\"", cfg.kind.name()));
    s.set("model", format!("\"{}\"", if cfg.model == ModelChoice::Dressed { "dressed" } else { "bare" }));
    for (k, v) in [
        ("omega_q", p.omega_q),
        ("omega_h", p.omega_h),
        ("omega_r", p.omega_r),
        ("delta", p.delta),
        ("g", p.g),
        ("gamma_q", p.gamma_q),
        ("gamma_h", p.gamma_h),
        ("n_th_q", p.n_th_q),
        ("n_th_h", p.n_th_h),
    ] {
        s.set(format!("params.{k}"), fmt_f64(v));
    }
    for (j, o) in p.overrides.iter().enumerate() {
        for (k, v) in [("omega_r", o.omega_r), ("g", o.g), ("delta", o.delta)] {
            if let Some(v) = v {
                s.set(format!("params.q{}.{k}", j + 1), fmt_f64(v));
            }
        }
    }
    if let Some(n) = cfg.truncation {
        s.set("run.truncation", n);
    }
    s.set("run.seed", cfg.seed);
    let axes = [
        ("grid.delta", &cfg.grid.delta),
        ("grid.delta_r", &cfg.grid.delta_r),
        ("grid.gamma_q", &cfg.grid.gamma_q),
        ("grid.gamma_h", &cfg.grid.gamma_h),
        ("grid.t0", &cfg.grid.t0),
    ];
    for (name, ax) in axes {
        if let Some(a) = ax {
            s.set(format!("{name}.start"), fmt_f64(a.start));
            s.set(format!("{name}.stop"), fmt_f64(a.stop));
            s.set(format!("{name}.points"), a.points);
            s.set(format!("{name}.scale"), format!("\"{}\"", if a.scale == config::Scale::Log { "log" } else { "linear" }));
        }
    }
    let quoted = |v: &[String]| v.iter().map(|x| format!("\"{x}\"")).collect::<Vec<_>>().join(", ");
    match cfg.kind {
        Kind::RisetimeScan => s.set("grid.t0.relative", cfg.grid.t0_relative),
        Kind::Spectrum => {
            let nth: Vec<String> = cfg.spectrum.n_th.iter().map(|v| fmt_f64(*v)).collect();
            s.set("spectrum.n_th", format!("[{}]", nth.join(", ")));
            s.set("spectrum.init", format!("[{}]", quoted(&cfg.spectrum.inits)));
            if let Some(t) = cfg.spectrum.t_cut {
                s.set("spectrum.t_cut", fmt_f64(t));
            }
            if let Some(w) = cfg.spectrum.half_window {
                s.set("spectrum.half_window", fmt_f64(w));
            }
            s.set("spectrum.correlator", if cfg.spectrum.steady_correlator { "\"steady\"" } else { "\"transient\"" });
        }
        Kind::Entangle => {
            s.set("entangle.points", cfg.entangle.points);
            s.set("entangle.input", format!("\"{}{}\"", cfg.entangle.input.0, cfg.entangle.input.1));
        }
        Kind::Bell => s.set("bell.skip_flip", cfg.bell_skip_flip),
        _ => {}
    }
    if matches!(cfg.kind, Kind::FidelityGrid | Kind::DampingGrid | Kind::RisetimeScan) {
        match cfg.fidelity.ensemble {
            config::EnsembleChoice::Axis => s.set("fidelity.ensemble", "\"axis\""),
            config::EnsembleChoice::Haar(k) => {
                s.set("fidelity.ensemble", "\"haar\"");
                s.set("fidelity.samples", k);
            }
        }
        s.set("fidelity.local_phase", cfg.fidelity.local_phase);
    }
    s.render()
}

fn load(c: &Common, kind: Option<Kind>) -> Result<(RawConfig, ExperimentConfig), Failure> {
    let raw = RawConfig::load(&c.config)?;
    let kind = match kind {
        Some(k) => k,
        None => {
            let name = raw.str("kind")?.ok_or_else(|| raw.error("kind", "validate needs a `kind` entry"))?;
            Kind::parse(&name).ok_or_else(|| raw.error("kind", format!("unknown kind `{name}`")))?
        }
    };
    let cfg = ExperimentConfig::from_raw(&raw, kind, &overrides(c))?;
    Ok((raw, cfg))
}

fn validate(c: &Common) -> Result<(), Failure> {
    let (raw, cfg) = load(c, None)?;
    let s = derived(&cfg).map_err(|e| core_failure(&raw, e))?;
    print!("kind = {}\n{}", cfg.kind.name(), s.render());
    println!("status = ok");
    Ok(())
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), Failure> {
    for (name, body) in files {
        std::fs::write(dir.join(name), body).map_err(|e| Failure::Config(format!("cannot write {}: {e}", dir.join(name).display())))?;
    }
    Ok(())
}

fn execute(c: &Common, kind: Kind) -> Result<(), Failure> {
    let start = Instant::now();
    let (raw, cfg) = load(c, Some(kind))?;
    let pre = derived(&cfg).map_err(|e| core_failure(&raw, e))?;
    if let Some(t) = cfg.threads {
        // a second initialization fails harmlessly when the pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
    write_files(dir, &[("config.resolved.toml".into(), resolved_config(&cfg))])?;

    let mut s = Summary::new();
    s.set("kind", kind.name());
    s.set("seed", cfg.seed);
    match run::run(&cfg) {
        Err(e) => {
            let fail = core_failure(&raw, e);
            s.set("status", "failed");
            s.set("truncation", pre.get("truncation").unwrap_or("unknown"));
            s.set("truncation_check", pre.get("truncation_check").unwrap_or("unknown"));
            s.set("convergence_drift", "nan");
            s.set("partial", true);
            s.set("error", match &fail {
                Failure::Config(m) | Failure::Numerical(m) => m.replace('\n', " "),
            });
            let _ = s.write(&dir.join("summary.kv"));
            Err(fail)
        }
        Ok(out) => {
            write_files(dir, &out.files)?;
            let list = |v: &[usize]| v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",");
            let conv_ok = out.drift.is_finite() && out.drift < CONVERGENCE_TOL;
            let q_ok = out.quality.map(|q| q.ok()).unwrap_or(true);
            s.set("status", if conv_ok && q_ok { "ok" } else { "check-failed" });
            s.set("truncation", list(&out.truncations));
            s.set("truncation_check", list(&out.check_truncations));
            s.num("convergence_drift", out.drift);
            s.num("convergence_tol", CONVERGENCE_TOL);
            s.set("convergence_ok", conv_ok);
            if let Some(q) = &out.quality {
                s.quality("", q);
            }
            for key in ["t_int", "t_cut", "dispersive_shift", "sideband_frequency", "phase_condition_cycles", "phase_condition_met"] {
                if let Some(v) = pre.get(key) {
                    if out.summary.get(key).is_none() {
                        s.set(key, v);
                    }
                }
            }
            let body = out.summary.render();
            let mut text = s.render();
            text.push_str(&body);
            text.push_str(&format!("wall_time_s = {:.3}\n", start.elapsed().as_secs_f64()));
            std::fs::write(dir.join("summary.kv"), text).map_err(|e| Failure::Config(format!("cannot write summary: {e}")))?;
            if conv_ok && q_ok {
                Ok(())
            } else if !conv_ok {
                Err(Failure::Numerical(format!("truncation drift {:.3e} exceeds {CONVERGENCE_TOL:e}", out.drift)))
            } else {
                Err(Failure::Numerical("CPTP diagnostics out of tolerance".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spectrum(c) => execute(c, Kind::Spectrum),
        Command::Steady(c) => execute(c, Kind::Steady),
        Command::Entangle(c) => execute(c, Kind::Entangle),
        Command::FidelityGrid(c) => execute(c, Kind::FidelityGrid),
        Command::DampingGrid(c) => execute(c, Kind::DampingGrid),
        Command::RisetimeScan(c) => execute(c, Kind::RisetimeScan),
        Command::Bell(c) => execute(c, Kind::Bell),
        Command::Validate(c) => validate(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
