//! Fixed-step fourth-order Runge-Kutta for the master equation with an
//! optional pulsed drive.
//!
//! Integration runs in an interaction picture: in a chosen basis `W` the
//! Hamiltonian is `diag(e0) + f(t) diag(e1) + R`, with `R` off-diagonal and
//! static. The diagonal part is removed exactly through the phases
//! `phi_m(t) = e0_m t + e1_m F(t)`, `F` the pulse area, so the stepper only
//! sees `R` and the jump operators, each entry rotating at a known rate.
//! Time-dependent coefficients are sampled at the stage times.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hilbert::{dagger, eigh, max_abs, Operator, C64, I, ZERO};
use crate::models::{LindbladSet, Pulse};

#[derive(Clone, Copy, Debug)]
pub struct Rk4Options {
    /// Steps per period of the fastest rotating coefficient.
    pub steps_per_period: f64,
    /// Minimum number of steps across one pulse edge of width `t0`.
    pub edge_steps: f64,
    /// Largest accepted step-doubling error estimate.
    pub local_tol: f64,
    /// Step halvings allowed before giving up.
    pub max_halvings: u32,
    /// Steps between step-doubling checks.
    pub check_every: usize,
}

impl Default for Rk4Options {
    fn default() -> Self {
        Self { steps_per_period: 50.0, edge_steps: 200.0, local_tol: 1e-10, max_halvings: 6, check_every: 4096 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Term {
    i: usize,
    j: usize,
    v: C64,
    w0: f64,
    w1: f64,
}

#[derive(Clone, Debug, Default)]
pub struct Rk4Stats {
    pub steps: usize,
    pub dt: f64,
    pub halvings: u32,
}

pub struct InteractionModel {
    d: usize,
    frame: Array2<C64>,
    e0: Vec<f64>,
    e1: Vec<f64>,
    pulse: Option<Pulse>,
    /// `H_eff = R - (i/2) sum J^dag J`.
    heff: Vec<Term>,
    jumps: Vec<Vec<Term>>,
    omega_max: f64,
}

fn terms(m: &Array2<C64>, e0: &[f64], e1: &[f64], skip_diag: bool) -> Vec<Term> {
    let scale = max_abs(m).max(1e-300);
    let mut out = Vec::new();
    for ((i, j), &v) in m.indexed_iter() {
        if (skip_diag && i == j) || v.norm() <= 1e-15 * scale {
            continue;
        }
        out.push(Term { i, j, v, w0: e0[i] - e0[j], w1: e1[i] - e1[j] });
    }
    out
}

impl InteractionModel {
    /// `frame` columns are the basis vectors; when absent the identity is used
    /// without a drive, and the eigenbasis of the drive operator with one.
    pub fn new(h: &Operator, drive: Option<(&Operator, Pulse)>, ls: &LindbladSet, frame: Option<&Array2<C64>>) -> Result<Self> {
        let d = h.dim();
        let w = match (frame, &drive) {
            (Some(f), _) => {
                if f.dim() != (d, d) {
                    return Err(Error::Layout("frame does not match the Hamiltonian".into()));
                }
                f.clone()
            }
            (None, Some((op, _))) => eigh(op.data())?.1,
            (None, None) => Array2::eye(d),
        };
        let wd = dagger(&w);
        let hp = wd.dot(h.data()).dot(&w);
        let e0: Vec<f64> = hp.diag().iter().map(|z| z.re).collect();
        let (e1, pulse) = match &drive {
            Some((op, pulse)) => {
                let dp = wd.dot(op.data()).dot(&w);
                let diag = Array2::from_diag(&dp.diag().to_owned());
                let off = max_abs(&(&dp - &diag));
                if off > 1e-12 * max_abs(&dp).max(1.0) {
                    return Err(Error::Argument(format!("drive operator is not diagonal in the frame (off-diagonal {off:.2e})")));
                }
                (dp.diag().iter().map(|z| z.re).collect(), Some(*pulse))
            }
            None => (vec![0.0; d], None),
        };
        let mut heff = terms(&hp, &e0, &e1, true);
        let mut k = Array2::<C64>::zeros((d, d));
        let mut jumps = Vec::new();
        for j in ls.iter() {
            let jp = wd.dot(j.op.data()).dot(&w);
            k = k + dagger(&jp).dot(&jp);
            jumps.push(terms(&jp, &e0, &e1, false));
        }
        for mut t in terms(&k, &e0, &e1, false) {
            t.v *= C64::new(0.0, -0.5);
            heff.push(t);
        }
        let fmax = pulse.map(|p| p.omega_r0.abs()).unwrap_or(0.0);
        let mut omega_max: f64 = 0.0;
        let mut row = vec![0.0; d];
        for t in heff.iter().chain(jumps.iter().flatten()) {
            omega_max = omega_max.max(t.w0.abs() + t.w1.abs() * fmax);
        }
        for t in &heff {
            row[t.i] += t.v.norm();
        }
        omega_max = omega_max.max(row.iter().cloned().fold(0.0, f64::max));
        Ok(Self { d, frame: w, e0, e1, pulse, heff, jumps, omega_max })
    }

    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    /// Largest step allowed by the resolution rules.
    pub fn max_step(&self, opts: &Rk4Options) -> f64 {
        let mut dt = if self.omega_max > 0.0 {
            2.0 * PI / (opts.steps_per_period * self.omega_max)
        } else {
            f64::INFINITY
        };
        if let Some(p) = self.pulse {
            if p.t0 > 0.0 {
                dt = dt.min(p.t0 / opts.edge_steps);
            }
        }
        dt
    }

    fn area(&self, t: f64) -> f64 {
        self.pulse.map(|p| p.area(t)).unwrap_or(0.0)
    }

    fn phases(&self, t: f64) -> Vec<f64> {
        let a = self.area(t);
        self.e0.iter().zip(&self.e1).map(|(x, y)| x * t + y * a).collect()
    }

    fn coeffs(&self, t: f64) -> (Vec<C64>, Vec<Vec<C64>>) {
        let a = self.area(t);
        let ph = |tm: &Term| tm.v * C64::from_polar(1.0, tm.w0 * t + tm.w1 * a);
        let h = self.heff.iter().map(ph).collect();
        let j = self.jumps.iter().map(|js| js.iter().map(ph).collect()).collect();
        (h, j)
    }

    fn rhs(&self, h: &[C64], j: &[Vec<C64>], rho: &[C64], out: &mut [C64], tmp: &mut [C64]) {
        let d = self.d;
        out.iter_mut().for_each(|z| *z = ZERO);
        for (t, &v) in self.heff.iter().zip(h) {
            // -i H rho
            let a = -I * v;
            let (ri, rj) = (t.i * d, t.j * d);
            for c in 0..d {
                out[ri + c] += a * rho[rj + c];
            }
            // +i rho H^dag: column i gains conj(v) * column j
            let b = I * v.conj();
            for r in 0..d {
                out[r * d + t.i] += b * rho[r * d + t.j];
            }
        }
        for (js, vals) in self.jumps.iter().zip(j) {
            tmp.iter_mut().for_each(|z| *z = ZERO);
            for (t, &v) in js.iter().zip(vals) {
                let (ri, rj) = (t.i * d, t.j * d);
                for c in 0..d {
                    tmp[ri + c] += v * rho[rj + c];
                }
            }
            for (t, &v) in js.iter().zip(vals) {
                let b = v.conj();
                for r in 0..d {
                    out[r * d + t.i] += b * tmp[r * d + t.j];
                }
            }
        }
    }

    fn to_interaction(&self, rho: &Array2<C64>, t: f64) -> Vec<C64> {
        let x = dagger(&self.frame).dot(rho).dot(&self.frame);
        let ph = self.phases(t);
        let d = self.d;
        let mut out = vec![ZERO; d * d];
        for m in 0..d {
            for n in 0..d {
                out[m * d + n] = x[[m, n]] * C64::from_polar(1.0, ph[m] - ph[n]);
            }
        }
        out
    }

    fn from_interaction(&self, y: &[C64], t: f64) -> Array2<C64> {
        let ph = self.phases(t);
        let d = self.d;
        let x = Array2::from_shape_fn((d, d), |(m, n)| y[m * d + n] * C64::from_polar(1.0, ph[n] - ph[m]));
        self.frame.dot(&x).dot(&dagger(&self.frame))
    }

    fn step(&self, t: f64, dt: f64, ys: &mut [Vec<C64>], work: &mut Work) {
        let (h1, j1) = self.coeffs(t);
        let (h2, j2) = self.coeffs(t + 0.5 * dt);
        let (h4, j4) = self.coeffs(t + dt);
        let n2 = ys.first().map(|y| y.len()).unwrap_or(0);
        let half = C64::new(0.5 * dt, 0.0);
        let full = C64::new(dt, 0.0);
        let sixth = C64::new(dt / 6.0, 0.0);
        for y in ys.iter_mut() {
            let Work { k1, k2, k3, k4, stage, tmp } = work;
            self.rhs(&h1, &j1, y, k1, tmp);
            for i in 0..n2 {
                stage[i] = y[i] + half * k1[i];
            }
            self.rhs(&h2, &j2, stage, k2, tmp);
            for i in 0..n2 {
                stage[i] = y[i] + half * k2[i];
            }
            self.rhs(&h2, &j2, stage, k3, tmp);
            for i in 0..n2 {
                stage[i] = y[i] + full * k3[i];
            }
            self.rhs(&h4, &j4, stage, k4, tmp);
            for i in 0..n2 {
                y[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }

    /// Propagates every input from `times[0]` and calls `visit` with the
    /// states (in the original basis) at each grid time.
    pub fn propagate(
        &self,
        inputs: &[Array2<C64>],
        times: &[f64],
        opts: &Rk4Options,
        mut visit: impl FnMut(usize, &[Array2<C64>]) -> Result<()>,
    ) -> Result<Rk4Stats> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Argument("time grid must be increasing".into()));
        }
        if times.is_empty() || inputs.is_empty() {
            return Ok(Rk4Stats::default());
        }
        let mut dt_max = self.max_step(opts);
        let span = times[times.len() - 1] - times[0];
        if !dt_max.is_finite() {
            dt_max = span.max(1e-300);
        }
        let mut halvings = 0;
        loop {
            match self.try_propagate(inputs, times, opts, dt_max) {
                Ok((states, mut stats)) => {
                    for (k, s) in states.iter().enumerate() {
                        visit(k, s)?;
                    }
                    stats.halvings = halvings;
                    return Ok(stats);
                }
                Err(Rejected) => {
                    halvings += 1;
                    if halvings > opts.max_halvings {
                        return Err(Error::Integration(format!(
                            "local error above {:.1e} at the floor step {:.3e}",
                            opts.local_tol, dt_max
                        )));
                    }
                    dt_max *= 0.5;
                }
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn try_propagate(
        &self,
        inputs: &[Array2<C64>],
        times: &[f64],
        opts: &Rk4Options,
        dt_max: f64,
    ) -> std::result::Result<(Vec<Vec<Array2<C64>>>, Rk4Stats), Rejected> {
        let d = self.d;
        let mut ys: Vec<Vec<C64>> = inputs.iter().map(|r| self.to_interaction(r, times[0])).collect();
        let traces0: Vec<C64> = inputs.iter().map(|r| r.diag().sum()).collect();
        let mut work = Work::new(d * d);
        let mut out = Vec::with_capacity(times.len());
        let mut steps = 0usize;
        let mut t = times[0];
        let mut dt_used = 0.0f64;
        for &target in times {
            let span = target - t;
            if span > 0.0 {
                let n = (span / dt_max).ceil().max(1.0) as usize;
                let dt = span / n as f64;
                dt_used = dt_used.max(dt);
                let start = t;
                for s in 0..n {
                    if steps % opts.check_every == 0 && !self.doubling_ok(t, dt, &ys[0], opts, &mut work) {
                        return Err(Rejected);
                    }
                    self.step(t, dt, &mut ys, &mut work);
                    steps += 1;
                    t = start + (s + 1) as f64 * dt;
                }
                t = target;
            }
            let mut states = Vec::with_capacity(ys.len());
            for (y, tr0) in ys.iter().zip(&traces0) {
                if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Rejected);
                }
                let tr: C64 = (0..d).map(|m| y[m * d + m]).sum();
                if (tr - tr0).norm() > 1e-6 {
                    return Err(Rejected);
                }
                states.push(self.from_interaction(y, target));
            }
            out.push(states);
        }
        Ok((out, Rk4Stats { steps, dt: dt_used, halvings: 0 }))
    }

    fn doubling_ok(&self, t: f64, dt: f64, y: &[C64], opts: &Rk4Options, work: &mut Work) -> bool {
        let mut one = vec![y.to_vec()];
        self.step(t, dt, &mut one, work);
        let mut two = vec![y.to_vec()];
        self.step(t, 0.5 * dt, &mut two, work);
        self.step(t + 0.5 * dt, 0.5 * dt, &mut two, work);
        let err = one[0].iter().zip(&two[0]).fold(0.0f64, |a, (p, q)| a.max((p - q).norm())) / 15.0;
        let scale = y.iter().fold(1.0f64, |a, z| a.max(z.norm()));
        err.is_finite() && err <= opts.local_tol * scale
    }
}

struct Rejected;

struct Work {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    stage: Vec<C64>,
    tmp: Vec<C64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![ZERO; n],
            k2: vec![ZERO; n],
            k3: vec![ZERO; n],
            k4: vec![ZERO; n],
            stage: vec![ZERO; n],
            tmp: vec![ZERO; n],
        }
    }
}
