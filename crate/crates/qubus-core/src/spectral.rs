//! Noise spectra of the oscillator quadrature over a finite measurement window.
//!
//! `S(w) = 2 Re int_0^T exp(i w t) C(t) dt` is evaluated with trapezoid
//! weights and a zero-padded FFT. On the discrete grid the weights give
//! `sum_j S_j dw / 2pi = C(0)` exactly.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::dynamics::{regression_modes, sample_uniform, CorrelatorMode, Strategy};
use crate::error::{Error, Result};
use crate::hilbert::{auto_truncation, thermal_state_nth, DensityMatrix, SubsystemLayout, C64};
use crate::models::{self, ModelKind, SystemParams};

/// Zero-padding factor of the transform.
pub const PADDING: usize = 4;
/// Samples per period of the fastest correlator component.
pub const SAMPLES_PER_PERIOD: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
    /// `None` when a half-height crossing lies outside the grid.
    pub fwhm: Option<f64>,
}

/// Spectrum on the non-negative grid `omega_j = j * d_omega`.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub d_omega: f64,
    pub values: Vec<f64>,
    pub t_cut: f64,
    /// Length of the full periodic grid (covers negative frequencies).
    pub grid_len: usize,
    pub peak: Option<Peak>,
}

impl Spectrum {
    pub fn omega(&self, j: usize) -> f64 {
        j as f64 * self.d_omega
    }

    /// Native resolution `2 pi / t_cut`.
    pub fn bin(&self) -> f64 {
        2.0 * PI / self.t_cut
    }

    /// `int S dw / 2 pi` over one full period of the grid.
    pub fn parseval(&self) -> f64 {
        let l = self.grid_len;
        let mut s = 0.0;
        for j in 0..l {
            let k = if j <= l / 2 { j } else { l - j };
            s += self.values[k];
        }
        s * self.d_omega / (2.0 * PI)
    }

    /// Index range covering `[lo, hi]`, clipped to the grid.
    pub fn window(&self, lo: f64, hi: f64) -> std::ops::RangeInclusive<usize> {
        let a = (lo / self.d_omega).ceil().max(0.0) as usize;
        let b = ((hi / self.d_omega).floor().max(0.0) as usize).min(self.values.len() - 1);
        a..=b
    }

    pub fn to_csv(&self, lo: f64, hi: f64) -> String {
        use crate::dynamics::fmt_f64;
        let mut s = String::from("omega,S_x\n");
        for j in self.window(lo, hi) {
            s.push_str(&fmt_f64(self.omega(j)));
            s.push(',');
            s.push_str(&fmt_f64(self.values[j]));
            s.push('\n');
        }
        s
    }
}

/// Transform of `C` sampled at `t_k = k dt`, `k = 0..c.len()`, with
/// `t_cut = (c.len() - 1) dt`.
pub fn spectral_density(c: &[f64], dt: f64) -> Result<Spectrum> {
    if c.len() < 2 {
        return Err(Error::Argument("correlator needs at least two samples".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Argument(format!("invalid sample step {dt}")));
    }
    let m = c.len();
    let l = PADDING * m;
    let mut buf = vec![C64::new(0.0, 0.0); l];
    for (k, &v) in c.iter().enumerate() {
        let w = if k == 0 || k == m - 1 { 0.5 } else { 1.0 };
        buf[k] = C64::new(w * v * dt, 0.0);
    }
    let mut planner = FftPlanner::<f64>::new();
    // inverse transform: sum_k a_k exp(+2 pi i jk / L)
    planner.plan_fft_inverse(l).process(&mut buf);
    let values = buf[..=l / 2].iter().map(|z| 2.0 * z.re).collect();
    Ok(Spectrum { d_omega: 2.0 * PI / (l as f64 * dt), values, t_cut: (m - 1) as f64 * dt, grid_len: l, peak: None })
}

/// Checks that `times` is a uniform grid starting at zero and transforms.
pub fn spectral_density_on(times: &[f64], c: &[f64]) -> Result<Spectrum> {
    if times.len() != c.len() || times.len() < 2 {
        return Err(Error::Argument("times and samples must match and hold at least two points".into()));
    }
    let dt = times[1] - times[0];
    let uniform = times[0].abs() <= 1e-12 * dt
        && times.iter().enumerate().all(|(k, &t)| (t - k as f64 * dt).abs() <= 1e-9 * dt.max(t.abs()));
    if !uniform {
        return Err(Error::Argument("correlator must be sampled uniformly from t = 0".into()));
    }
    spectral_density(c, dt)
}

/// Largest value in `[lo, hi]`, refined by a three-point parabola; the width
/// comes from linear interpolation of the half-height crossings.
pub fn find_peak(s: &Spectrum, lo: f64, hi: f64) -> Result<Peak> {
    let r = s.window(lo, hi);
    let (a, b) = (*r.start(), *r.end());
    if a > b {
        return Err(Error::NoPeak { lo, hi });
    }
    let v = &s.values;
    let mut jmax = a;
    for j in a..=b {
        if v[j] > v[jmax] {
            jmax = j;
        }
    }
    let (vmin, vmax) = v[a..=b].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(p, q), &x| (p.min(x), q.max(x)));
    if !(vmax > vmin) || !(vmax > 0.0) {
        return Err(Error::NoPeak { lo, hi });
    }
    let (mut omega, mut height) = (s.omega(jmax), v[jmax]);
    if jmax > 0 && jmax + 1 < v.len() {
        let (y0, y1, y2) = (v[jmax - 1], v[jmax], v[jmax + 1]);
        let den = y0 - 2.0 * y1 + y2;
        if den < 0.0 {
            let d = 0.5 * (y0 - y2) / den;
            omega += d * s.d_omega;
            height = y1 - 0.25 * (y0 - y2) * d;
        }
    }
    let half = height / 2.0;
    let cross = |dir: isize| -> Option<f64> {
        let mut j = jmax as isize;
        loop {
            let k = j + dir;
            if k < 0 || k as usize >= v.len() {
                return None;
            }
            let (yj, yk) = (v[j as usize], v[k as usize]);
            if yk < half {
                let f = (yj - half) / (yj - yk);
                return Some(s.omega(j as usize) + dir as f64 * f * s.d_omega);
            }
            j = k;
        }
    };
    let fwhm = match (cross(-1), cross(1)) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    };
    Ok(Peak { omega, height, fwhm })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QubitInit {
    Ground,
    Excited,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ReadoutOptions {
    /// Oscillator truncation; automatic when `None`.
    pub truncation: Option<usize>,
    /// Measurement window; `40 pi |Delta_R| / g^2` when `None`.
    pub t_cut: Option<f64>,
    /// Half width of the peak search window around `omega_h`.
    pub half_window: Option<f64>,
    pub mode: CorrelatorMode,
}

#[derive(Clone, Debug)]
pub struct Readout {
    pub spectrum: Spectrum,
    pub peak: Peak,
    /// Signed expected shift `+- g^2/Delta` of the peak from `omega_h`.
    pub predicted_shift: f64,
    pub truncation: usize,
    pub dt: f64,
    pub c0: f64,
    pub window: (f64, f64),
}

/// Qubit detuning that sets the dispersive shift in each model.
fn readout_detuning(p: &SystemParams, kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Dressed => p.delta_r(),
        ModelKind::Bare => p.omega_q - p.omega_h,
    }
}

pub fn readout_initial_state(p: &SystemParams, init: QubitInit, kind: ModelKind, n: usize) -> Result<DensityMatrix> {
    let bit = u8::from(init == QubitInit::Excited);
    let psi = match kind {
        ModelKind::Dressed => models::logical_state(bit),
        ModelKind::Bare => models::bare_state(bit),
    };
    let q = DensityMatrix::pure(&SubsystemLayout::single(2), &psi)?;
    Ok(q.kron(&thermal_state_nth(p.n_th_h, n)?))
}

/// Quadrature spectrum with the qubit prepared in `init` and the oscillator thermal.
pub fn readout_experiment(p: &SystemParams, init: QubitInit, kind: ModelKind, opts: &ReadoutOptions) -> Result<Readout> {
    p.validate()?;
    let n = opts.truncation.unwrap_or_else(|| auto_truncation(p.n_th_h));
    let det = readout_detuning(p, kind);
    let t_cut = match opts.t_cut {
        Some(t) => t,
        None => {
            if p.delta_r() == 0.0 {
                return Err(Error::SingularDetuning);
            }
            models::cutoff_time(p)?
        }
    };
    if !(t_cut > 0.0) {
        return Err(Error::Argument(format!("measurement window must be positive, got {t_cut}")));
    }
    let shift = if det == 0.0 { 0.0 } else { p.g * p.g / det };
    let predicted = match init {
        QubitInit::Excited => shift,
        QubitInit::Ground => -shift,
    };
    let hw = opts.half_window.unwrap_or(5.0 * shift.abs());
    if !(hw > 0.0) {
        return Err(Error::Argument("peak window has zero width; set a half window".into()));
    }
    let h = match kind {
        ModelKind::Dressed => models::dressed_hamiltonian(p, n, p.omega_r)?,
        ModelKind::Bare => models::bare_hamiltonian(p, n)?,
    };
    let ls = models::lindblad_set(p, n, 1, kind)?;
    let rho0 = readout_initial_state(p, init, kind, n)?;
    let x = models::quadrature_observable(1, n)?;
    let modes = regression_modes(&h, &ls, rho0.matrix(), &x, opts.mode, Strategy::Auto)?.pruned(1e-15);
    let wmax = modes.max_frequency().max(p.omega_h);
    let dt_max = 2.0 * PI / (SAMPLES_PER_PERIOD * wmax);
    let steps = (t_cut / dt_max).ceil() as usize;
    let dt = t_cut / steps as f64;
    let c = sample_uniform(&modes, dt, steps + 1)?;
    let mut spectrum = spectral_density(&c, dt)?;
    let window = (p.omega_h - hw, p.omega_h + hw);
    let peak = find_peak(&spectrum, window.0, window.1)?;
    spectrum.peak = Some(peak);
    Ok(Readout { spectrum, peak, predicted_shift: predicted, truncation: n, dt, c0: c[0], window })
}
