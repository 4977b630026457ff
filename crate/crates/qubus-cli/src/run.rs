//! One function per experiment kind. Each produces its data files and
//! summary entries; the caller adds the common keys and writes to disk.

use std::fmt::Write as _;

use ndarray::Array2;
use qubus_core::dynamics::{fmt_f64, steady_state, steady_state_closed_form, CorrelatorMode, Quality};
use qubus_core::hilbert::{auto_truncation, check_truncation, expect, partial_trace_matrix, sigma_x, sigma_z, C64};
use qubus_core::metrics::gate::{damping_grid, fidelity_grid, risetime_scan, GatePoint, GateSetup};
use qubus_core::metrics::{
    bell_circuit, dominant_frequency, entanglement_experiment, BellOptions, EntangleOptions, FidelityEnsemble,
    FidelityMode,
};
use qubus_core::models::{self, ModelKind};
use qubus_core::spectral::{readout_experiment, QubitInit, Readout, ReadoutOptions};
use qubus_core::Error;

use crate::config::{EnsembleChoice, ExperimentConfig, Kind, ModelChoice};
use crate::summary::Summary;

/// Largest observable change accepted between `N` and the check truncation.
pub const CONVERGENCE_TOL: f64 = 1e-4;

pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: Summary,
    /// Every truncation used for the reported numbers.
    pub truncations: Vec<usize>,
    pub check_truncations: Vec<usize>,
    pub drift: f64,
    pub quality: Option<Quality>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            summary: Summary::new(),
            truncations: Vec::new(),
            check_truncations: Vec::new(),
            drift: 0.0,
            quality: None,
        }
    }

    fn merge_quality(&mut self, q: Quality) {
        self.quality = Some(match self.quality {
            Some(a) => a.merge(q),
            None => q,
        });
    }

    fn truncation_pair(&mut self, n: usize, c: usize) {
        self.truncations.push(n);
        self.check_truncations.push(c);
    }
}

fn model_kind(c: ModelChoice) -> ModelKind {
    match c {
        ModelChoice::Dressed => ModelKind::Dressed,
        ModelChoice::Bare => ModelKind::Bare,
    }
}

fn label_num(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

fn pick(cfg: &ExperimentConfig, n_th: f64) -> usize {
    cfg.truncation.unwrap_or_else(|| auto_truncation(n_th))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, Error> {
    match cfg.kind {
        Kind::Spectrum => spectrum(cfg),
        Kind::Steady => steady(cfg),
        Kind::Entangle => entangle(cfg),
        Kind::FidelityGrid | Kind::DampingGrid | Kind::RisetimeScan => fidelity_scan(cfg),
        Kind::Bell => bell(cfg),
    }
}

fn peak_kv(r: &Readout, n_th: f64, init: &str) -> String {
    let mut s = Summary::new();
    s.num("n_th", n_th);
    s.set("init", init);
    s.num("omega", r.peak.omega);
    s.num("height", r.peak.height);
    match r.peak.fwhm {
        Some(w) => s.num("fwhm", w),
        None => s.set("fwhm", "nan"),
    }
    s.num("predicted_omega", 1.0 + r.predicted_shift);
    s.num("bin", r.spectrum.bin());
    s.num("t_cut", r.spectrum.t_cut);
    s.num("dt", r.dt);
    s.num("window_lo", r.window.0);
    s.num("window_hi", r.window.1);
    s.set("truncation", r.truncation);
    s.render()
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Outcome, Error> {
    let mut out = Outcome::new();
    let kind = model_kind(cfg.model);
    let mode = if cfg.spectrum.steady_correlator { CorrelatorMode::Steady } else { CorrelatorMode::Transient };
    let mut table = String::from("n_th,init,omega,height,fwhm\n");
    for &n_th in &cfg.spectrum.n_th {
        let mut p = cfg.params.clone();
        p.n_th_h = n_th;
        if kind == ModelKind::Bare {
            p.n_th_q = models::bose_einstein(p.omega_q, p.temperature());
        }
        let n = pick(cfg, n_th);
        let nc = check_truncation(n);
        out.truncation_pair(n, nc);
        let mut omegas = Vec::new();
        for init in &cfg.spectrum.inits {
            let qi = if init == "excited" { QubitInit::Excited } else { QubitInit::Ground };
            let opts = ReadoutOptions { truncation: Some(n), t_cut: cfg.spectrum.t_cut, half_window: cfg.spectrum.half_window, mode };
            let r = readout_experiment(&p, qi, kind, &opts)?;
            let rc = readout_experiment(&p, qi, kind, &ReadoutOptions { truncation: Some(nc), ..opts })?;
            out.drift = out.drift.max((r.peak.omega - rc.peak.omega).abs());
            let label = format!("nth{}_{init}", label_num(n_th));
            out.files.push((format!("spectrum_{label}.csv"), r.spectrum.to_csv(r.window.0, r.window.1)));
            out.files.push((format!("spectrum_{label}.peak.kv"), peak_kv(&r, n_th, init)));
            let _ = writeln!(
                table,
                "{},{init},{},{},{}",
                fmt_f64(n_th),
                fmt_f64(r.peak.omega),
                fmt_f64(r.peak.height),
                r.peak.fwhm.map(fmt_f64).unwrap_or_else(|| "nan".into())
            );
            out.summary.num(format!("peak.{label}.omega"), r.peak.omega);
            out.summary.num(format!("peak.{label}.predicted"), 1.0 + r.predicted_shift);
            out.summary.num(format!("peak.{label}.bin"), r.spectrum.bin());
            omegas.push((r.peak.omega, r.spectrum.bin()));
        }
        if omegas.len() == 2 {
            let sep = (omegas[0].0 - omegas[1].0).abs();
            out.summary.num(format!("separation.nth{}", label_num(n_th)), sep);
            out.summary.num(format!("separation_bins.nth{}", label_num(n_th)), sep / omegas[0].1);
        }
    }
    out.files.push(("peaks.csv".into(), table));
    Ok(out)
}

fn qubit_rho_csv(q: &Array2<C64>) -> String {
    let mut s = String::from("i,j,re,im\n");
    for ((i, j), z) in q.indexed_iter() {
        let _ = writeln!(s, "{i},{j},{},{}", fmt_f64(z.re), fmt_f64(z.im));
    }
    s
}

struct SteadyNumbers {
    sx: f64,
    sz: f64,
    n: f64,
    q: Array2<C64>,
    residual: f64,
    min_eig: f64,
    quality: Quality,
}

fn steady_at(cfg: &ExperimentConfig, n: usize) -> Result<SteadyNumbers, Error> {
    let p = &cfg.params;
    let kind = model_kind(cfg.model);
    let h = match kind {
        ModelKind::Dressed => models::dressed_hamiltonian(p, n, p.omega_r)?,
        ModelKind::Bare => models::bare_hamiltonian(p, n)?,
    };
    let ls = models::lindblad_set(p, n, 1, kind)?;
    let s = steady_state(&h, &ls)?;
    let layout = models::qubit_oscillator_layout(n);
    let (q, _) = partial_trace_matrix(&s.rho, &layout, &[0])?;
    let num = qubus_core::hilbert::embed(&qubus_core::hilbert::number(n), 1, &layout)?;
    Ok(SteadyNumbers {
        sx: expect(&q, sigma_x().data()).re,
        sz: expect(&q, sigma_z().data()).re,
        n: expect(&s.rho, num.data()).re,
        q,
        residual: s.residual,
        min_eig: s.min_eigenvalue,
        quality: qubus_core::dynamics::quality_of(&s.rho)?,
    })
}

fn steady(cfg: &ExperimentConfig) -> Result<Outcome, Error> {
    let mut out = Outcome::new();
    let n = pick(cfg, cfg.params.n_th_h);
    let nc = check_truncation(n);
    out.truncation_pair(n, nc);
    let a = steady_at(cfg, n)?;
    let b = steady_at(cfg, nc)?;
    out.drift = (a.sx - b.sx).abs().max((a.sz - b.sz).abs());
    out.merge_quality(a.quality);
    out.files.push(("steady_qubit.csv".into(), qubit_rho_csv(&a.q)));
    let s = &mut out.summary;
    s.set("model", if cfg.model == ModelChoice::Dressed { "dressed" } else { "bare" });
    s.num("sigma_x", a.sx);
    s.num("sigma_z", a.sz);
    s.num("oscillator_occupation", a.n);
    s.num("residual", a.residual);
    s.num("steady_min_eigenvalue", a.min_eig);
    if cfg.model == ModelChoice::Dressed {
        let (c, warns) = steady_state_closed_form(&cfg.params);
        s.num("closed_form.sigma_x", c.sigma_z);
        s.num("closed_form.rho_13", c.rho_13);
        s.num("closed_form.gamma_tilde", c.gamma_tilde);
        if c.sigma_z != 0.0 {
            s.num("closed_form.relative_error", ((a.sx - c.sigma_z) / c.sigma_z).abs());
        }
        s.num("identity_deviation", (a.q.clone() - Array2::<C64>::eye(2) * 0.5).iter().map(|z| z.norm()).fold(0.0, f64::max));
        for (k, w) in warns.iter().enumerate() {
            s.set(format!("warning.{k}"), w);
        }
    }
    Ok(out)
}

fn entangle(cfg: &ExperimentConfig) -> Result<Outcome, Error> {
    let mut out = Outcome::new();
    let p = &cfg.params;
    let n = pick(cfg, p.n_th_h);
    let nc = check_truncation(n);
    out.truncation_pair(n, nc);
    let opts = EntangleOptions { truncation: Some(n), points: cfg.entangle.points, input: cfg.entangle.input };
    let r = entanglement_experiment(p, &opts)?;
    // the check run only needs the interaction time
    let rc = entanglement_experiment(p, &EntangleOptions { truncation: Some(nc), points: 3, input: cfg.entangle.input })?;
    for (name, v) in &r.at_t_int {
        out.drift = out.drift.max((v - rc.at(name).unwrap_or(f64::NAN)).abs());
    }
    let tr = &r.trajectory;
    out.merge_quality(tr.quality());
    out.files.push(("trajectory.csv".into(), tr.to_csv()));
    let s = &mut out.summary;
    s.num("t_int", r.t_int);
    for (name, v) in &r.at_t_int {
        s.num(format!("{name}.at_t_int"), *v);
        let col = tr.column(name).unwrap();
        let (k, m) = col.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (k, &v)| if v > a.1 { (k, v) } else { a });
        s.num(format!("{name}.max"), m);
        s.num(format!("{name}.t_max"), tr.times[k]);
    }
    let w = dominant_frequency(&tr.times, tr.column("sx1sx2").unwrap(), 0.01, 0.5)?;
    s.num("sx1sx2.dominant_frequency", w);
    s.num("sideband_frequency", models::sideband_frequency(p)?);
    Ok(out)
}

fn ensemble(cfg: &ExperimentConfig) -> FidelityEnsemble {
    match cfg.fidelity.ensemble {
        EnsembleChoice::Axis => FidelityEnsemble::axis(),
        EnsembleChoice::Haar(k) => FidelityEnsemble::haar(k, cfg.seed),
    }
}

type Cell = (f64, f64, GatePoint);

fn scan_at(cfg: &ExperimentConfig, n: Option<usize>, subset: bool, mode: FidelityMode) -> Result<Vec<Cell>, Error> {
    let mut base = GateSetup::new(cfg.params.clone());
    base.truncation = n;
    let ens = ensemble(cfg);
    let thin = |v: Vec<f64>| -> Vec<f64> {
        if subset && v.len() > 2 {
            vec![v[0], v[v.len() / 2], v[v.len() - 1]]
        } else {
            v
        }
    };
    let g = &cfg.grid;
    match cfg.kind {
        Kind::FidelityGrid => fidelity_grid(&base, &g.delta.as_ref().unwrap().values(), &g.delta_r.as_ref().unwrap().values(), &ens, mode),
        Kind::DampingGrid => damping_grid(&base, &g.gamma_q.as_ref().unwrap().values(), &g.gamma_h.as_ref().unwrap().values(), &ens, mode),
        Kind::RisetimeScan => {
            let ax = g.t0.as_ref().unwrap().values();
            let t0s = if g.t0_relative {
                let t_int = base.interaction_time()?;
                ax.iter().map(|f| f * t_int).collect()
            } else {
                ax
            };
            let pts = risetime_scan(&base, &thin(t0s), &ens, mode)?;
            Ok(pts.into_iter().map(|(t0, gp)| (t0, gp.time, gp)).collect())
        }
        _ => unreachable!(),
    }
}

fn fidelity_scan(cfg: &ExperimentConfig) -> Result<Outcome, Error> {
    let mut out = Outcome::new();
    let n = pick(cfg, cfg.params.n_th_h);
    let nc = check_truncation(n);
    out.truncation_pair(n, nc);
    let mode = if cfg.fidelity.local_phase { FidelityMode::LocalPhase } else { FidelityMode::Fixed };
    let cells = scan_at(cfg, Some(n), false, mode)?;
    // rise-time runs are expensive; their check uses the end points and the middle
    let subset = cfg.kind == Kind::RisetimeScan;
    let check = scan_at(cfg, Some(nc), subset, mode)?;
    for c in &check {
        let m = cells.iter().find(|x| x.0 == c.0 && x.1 == c.1).map(|x| x.2.fidelity).unwrap_or(f64::NAN);
        out.drift = out.drift.max((m - c.2.fidelity).abs());
    }
    let (header, name) = match cfg.kind {
        Kind::FidelityGrid => ("delta,delta_r,F", "fidelity_grid.csv"),
        Kind::DampingGrid => ("gamma_q,gamma_h,F", "damping_grid.csv"),
        _ => ("t0,t_int,F", "risetime.csv"),
    };
    let mut csv = format!("{header}\n");
    for (a, b, g) in &cells {
        let _ = writeln!(csv, "{},{},{}", fmt_f64(*a), fmt_f64(*b), fmt_f64(g.fidelity));
        out.merge_quality(g.quality);
    }
    out.files.push((name.into(), csv));
    let f: Vec<f64> = cells.iter().map(|c| c.2.fidelity).collect();
    let s = &mut out.summary;
    s.set("fidelity.mode", if cfg.fidelity.local_phase { "local-phase" } else { "fixed" });
    s.set("fidelity.ensemble", match cfg.fidelity.ensemble {
        EnsembleChoice::Axis => "axis-36".to_string(),
        EnsembleChoice::Haar(k) => format!("haar-{k}"),
    });
    s.num("F.min", f.iter().cloned().fold(f64::INFINITY, f64::min));
    s.num("F.max", f.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    s.set("points", f.len());
    if cfg.kind == Kind::RisetimeScan {
        let ax = cfg.grid.t0.as_ref().unwrap();
        s.num("t0.start", ax.start);
        s.num("t0.stop", ax.stop);
        s.set("t0.points", ax.points);
        s.set("t0.units", if cfg.grid.t0_relative { "t_int" } else { "1/omega_h" });
        let maxima = (1..f.len().saturating_sub(1)).filter(|&k| f[k] > f[k - 1] && f[k] > f[k + 1]).count();
        s.set("interior_local_maxima", maxima);
        s.set("check_points", 3.min(f.len()));
    }
    Ok(out)
}

fn bell(cfg: &ExperimentConfig) -> Result<Outcome, Error> {
    let mut out = Outcome::new();
    let n = pick(cfg, cfg.params.n_th_h);
    let nc = check_truncation(n);
    out.truncation_pair(n, nc);
    let r = bell_circuit(&cfg.params, &BellOptions { truncation: Some(n), skip_flip: cfg.bell_skip_flip })?;
    let rc = bell_circuit(&cfg.params, &BellOptions { truncation: Some(nc), skip_flip: cfg.bell_skip_flip })?;
    out.drift = (r.negativity - rc.negativity).abs();
    out.merge_quality(r.quality);
    out.files.push(("bell_state.csv".into(), qubit_rho_csv(&r.rho)));
    out.summary.set("skip_flip", cfg.bell_skip_flip);
    out.summary.num("EN_q1_q2", r.negativity);
    out.summary.num("t_int", models::interaction_time(&cfg.params)?);
    Ok(out)
}
