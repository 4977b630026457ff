//! Two-qubit gate channels obtained from the full qubit-oscillator dynamics.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::dynamics::{self, quality_of, EvolveOptions, Method, Model, Quality, Rk4Options};
use crate::error::{Error, Result};
use crate::hilbert::{
    auto_truncation, basis, dagger, kron_vec, outer, partial_trace_matrix, thermal_state_nth, C64, ONE,
};
use crate::models::{self, ModelKind, Pulse, SystemParams};

use super::{analytic_evolution, analytic_evolution_area, gate_fidelity, FidelityEnsemble, FidelityMode, GateTarget};

/// Linear map on 4x4 two-qubit matrices, stored as the images of the
/// matrix units `|i><j|` in the computational basis.
#[derive(Clone, Debug)]
pub struct QubitChannel {
    images: Vec<Array2<C64>>,
}

fn unit(i: usize, j: usize) -> Array2<C64> {
    let mut m = Array2::zeros((4, 4));
    m[[i, j]] = ONE;
    m
}

impl QubitChannel {
    pub fn from_images(images: Vec<Array2<C64>>) -> Result<Self> {
        if images.len() != 16 || images.iter().any(|m| m.dim() != (4, 4)) {
            return Err(Error::Layout("a two-qubit channel needs 16 images of size 4x4".into()));
        }
        Ok(Self { images })
    }

    pub fn identity() -> Self {
        Self { images: (0..16).map(|k| unit(k / 4, k % 4)).collect() }
    }

    pub fn unitary(u: &Array2<C64>) -> Self {
        let ud = dagger(u);
        Self { images: (0..16).map(|k| u.dot(&unit(k / 4, k % 4)).dot(&ud)).collect() }
    }

    pub fn image(&self, i: usize, j: usize) -> &Array2<C64> {
        &self.images[4 * i + j]
    }

    pub fn apply(&self, x: &Array2<C64>) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros((4, 4));
        for ((i, j), &v) in x.indexed_iter() {
            if v != C64::new(0.0, 0.0) {
                out.scaled_add(v, &self.images[4 * i + j]);
            }
        }
        out
    }

    /// The channel `X -> W Phi(W^dag X W) W^dag`.
    pub fn conjugated(&self, w: &Array2<C64>) -> Self {
        let wd = dagger(w);
        let images = (0..16)
            .map(|k| {
                let x = wd.dot(&unit(k / 4, k % 4)).dot(w);
                w.dot(&self.apply(&x)).dot(&wd)
            })
            .collect();
        Self { images }
    }
}

/// Basis in which qubit inputs are prepared and outputs read out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GateFrame {
    /// Inputs dressed by the Schrieffer-Wolff unitary, outputs undressed.
    #[default]
    SchriefferWolff,
    /// Plain product of qubit state and oscillator state.
    Bare,
}

#[derive(Clone, Debug)]
pub struct GateSetup {
    pub params: SystemParams,
    /// Oscillator truncation; automatic when `None`.
    pub truncation: Option<usize>,
    pub frame: GateFrame,
    /// Rise time of a smooth dressing pulse; constant dressing when `None`.
    pub rise_time: Option<f64>,
    pub rk4: Rk4Options,
}

impl GateSetup {
    pub fn new(params: SystemParams) -> Self {
        Self { params, truncation: None, frame: GateFrame::default(), rise_time: None, rk4: Rk4Options::default() }
    }

    pub fn truncation(&self) -> usize {
        self.truncation.unwrap_or_else(|| auto_truncation(self.params.n_th_h))
    }

    pub fn interaction_time(&self) -> Result<f64> {
        models::interaction_time(&self.params)
    }

    fn pulse(&self) -> Result<Option<Pulse>> {
        match self.rise_time {
            None => Ok(None),
            Some(t0) => Ok(Some(Pulse::new(self.params.omega_r, t0, self.interaction_time()?)?)),
        }
    }

    /// Ideal gate for this setup at time `t`, with the pulse area in place
    /// of `Omega_R t` when the dressing is pulsed.
    pub fn target(&self, t: f64) -> Result<GateTarget> {
        match self.pulse()? {
            None => analytic_evolution(&self.params, t),
            Some(p) => analytic_evolution_area(&self.params, t, p.area(t)),
        }
    }
}

/// Columns are the computational states `|q1 q2>`, index `2 q1 + q2`.
pub fn computational_basis() -> Array2<C64> {
    let mut c = Array2::<C64>::zeros((4, 4));
    for k in 0..4 {
        let v = kron_vec(&models::logical_state((k / 2) as u8), &models::logical_state((k % 2) as u8));
        c.column_mut(k).assign(&v);
    }
    c
}

#[derive(Clone, Debug)]
pub struct GateRun {
    pub channels: Vec<QubitChannel>,
    pub quality: Quality,
    pub truncation: usize,
}

fn sw_operator(setup: &GateSetup, n: usize) -> Result<Option<Array2<C64>>> {
    Ok(match setup.frame {
        GateFrame::SchriefferWolff => Some(models::schrieffer_wolff(&setup.params, n, 2)?.into_data()),
        GateFrame::Bare => None,
    })
}

fn gate_model(setup: &GateSetup, n: usize) -> Result<(Model, Method)> {
    let p = &setup.params;
    let ls = models::lindblad_set(p, n, 2, ModelKind::Dressed)?;
    let frame = models::logical_frame_full(2, n);
    match setup.pulse()? {
        None => {
            let h = models::two_qubit_hamiltonian(p, n, [p.qubit(0).omega_r, p.qubit(1).omega_r])?;
            Ok((Model::new(h, ls).with_frame(frame), Method::ExpmEig))
        }
        Some(pulse) => {
            if !p.is_symmetric() {
                return Err(Error::Unsupported("pulsed dressing needs identical qubits".into()));
            }
            let (hs, hd) = models::two_qubit_drive_split(p, n)?;
            Ok((Model::new(hs, ls).with_drive(hd, pulse).with_frame(frame), Method::Rk4))
        }
    }
}

/// Two-qubit channels at each time in `times` (measured from the start of
/// the dressing), with the oscillator thermal at the start.
pub fn gate_channel(setup: &GateSetup, times: &[f64]) -> Result<GateRun> {
    let p = &setup.params;
    p.validate()?;
    let n = setup.truncation();
    let th = thermal_state_nth(p.n_th_h, n)?;
    let s = sw_operator(setup, n)?;
    let c = computational_basis();
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect();
    let inputs: Vec<Array2<C64>> = pairs
        .iter()
        .map(|&(i, j)| {
            let q = outer(&c.column(i).to_owned(), &c.column(j).to_owned());
            let full = crate::hilbert::kron_mat(&q, th.matrix());
            match &s {
                Some(s) => s.dot(&full).dot(&dagger(s)),
                None => full,
            }
        })
        .collect();
    let (model, method) = gate_model(setup, n)?;
    let opts = EvolveOptions { rk4: setup.rk4, ..EvolveOptions::default() };
    let states = dynamics::propagate(&model, &inputs, times, method, &opts)?;
    let layout = model.h.layout().clone();
    let cd = dagger(&c);
    let mut quality = Quality { min_eigenvalue: f64::INFINITY, ..Quality::default() };
    let mut channels = Vec::with_capacity(times.len());
    for st in states {
        let mut images = vec![Array2::<C64>::zeros((4, 4)); 16];
        for (&(i, j), rho) in pairs.iter().zip(&st) {
            let back = match &s {
                Some(s) => dagger(s).dot(rho).dot(s),
                None => rho.clone(),
            };
            if i == j {
                quality = quality.merge(quality_of(rho)?);
            }
            let (red, _) = partial_trace_matrix(&back, &layout, &[0, 1])?;
            let y = cd.dot(&red).dot(&c);
            if i != j {
                images[4 * j + i] = dagger(&y);
            }
            images[4 * i + j] = y;
        }
        channels.push(QubitChannel::from_images(images)?);
    }
    Ok(GateRun { channels, quality, truncation: n })
}

/// Noiseless propagator restricted to the oscillator vacuum, in the
/// computational basis, for the constant-dressing model.
pub fn vacuum_propagator(p: &SystemParams, n: usize, t: f64, frame: GateFrame) -> Result<Array2<C64>> {
    let h = models::two_qubit_hamiltonian(p, n, [p.qubit(0).omega_r, p.qubit(1).omega_r])?;
    let u = crate::hilbert::expm_hermitian(h.data(), t)?;
    let u = match frame {
        GateFrame::SchriefferWolff => {
            let s = models::schrieffer_wolff(p, n, 2)?.into_data();
            dagger(&s).dot(&u).dot(&s)
        }
        GateFrame::Bare => u,
    };
    let c = computational_basis();
    let vac = basis(n, 0);
    let cols: Vec<Array1<C64>> = (0..4).map(|k| kron_vec(&c.column(k).to_owned(), &vac)).collect();
    Ok(Array2::from_shape_fn((4, 4), |(i, j)| {
        let uj = u.dot(&cols[j]);
        cols[i].iter().zip(uj.iter()).map(|(a, b)| a.conj() * b).sum()
    }))
}

/// Largest entrywise deviation after removing the best global phase
/// `arg Tr(U_a^dag U)`; returns `(error, phase)`.
pub fn propagator_error(u: &Array2<C64>, analytic: &Array2<C64>) -> (f64, f64) {
    let tr: C64 = dagger(analytic).dot(u).diag().sum();
    let phi = tr.arg();
    let rot = C64::from_polar(1.0, -phi);
    let err = u.iter().zip(analytic.iter()).map(|(a, b)| (a * rot - b).norm()).fold(0.0, f64::max);
    (err, phi)
}

#[derive(Clone, Debug)]
pub struct GatePoint {
    pub fidelity: f64,
    pub time: f64,
    pub quality: Quality,
    pub truncation: usize,
}

/// Fidelity of the simulated gate at the interaction time against the setup's target.
pub fn fidelity_at_interaction(setup: &GateSetup, ens: &FidelityEnsemble, mode: FidelityMode) -> Result<GatePoint> {
    let t = setup.interaction_time()?;
    let run = gate_channel(setup, &[0.0, t])?;
    let target = setup.target(t)?;
    let fidelity = gate_fidelity(&run.channels[1], &target, ens, mode);
    Ok(GatePoint { fidelity, time: t, quality: run.quality, truncation: run.truncation })
}

/// Evaluates `f` on every point in parallel, keeping input order.
pub fn scan<P: Sync, T: Send>(points: &[P], f: impl Fn(&P) -> Result<T> + Sync) -> Result<Vec<T>> {
    points.par_iter().map(&f).collect()
}

/// Fidelity over a grid of `(Delta, Delta_R)` values.
pub fn fidelity_grid(
    base: &GateSetup,
    deltas: &[f64],
    delta_rs: &[f64],
    ens: &FidelityEnsemble,
    mode: FidelityMode,
) -> Result<Vec<(f64, f64, GatePoint)>> {
    let cells: Vec<(f64, f64)> = deltas.iter().flat_map(|&d| delta_rs.iter().map(move |&r| (d, r))).collect();
    scan(&cells, |&(d, r)| {
        let mut s = base.clone();
        s.params.delta = d;
        s.params.set_delta_r(r);
        fidelity_at_interaction(&s, ens, mode).map(|g| (d, r, g))
    })
}

/// Fidelity over a grid of qubit and oscillator damping rates.
pub fn damping_grid(
    base: &GateSetup,
    gamma_qs: &[f64],
    gamma_hs: &[f64],
    ens: &FidelityEnsemble,
    mode: FidelityMode,
) -> Result<Vec<(f64, f64, GatePoint)>> {
    let cells: Vec<(f64, f64)> = gamma_qs.iter().flat_map(|&a| gamma_hs.iter().map(move |&b| (a, b))).collect();
    scan(&cells, |&(gq, gh)| {
        let mut s = base.clone();
        s.params.gamma_q = gq;
        s.params.gamma_h = gh;
        fidelity_at_interaction(&s, ens, mode).map(|g| (gq, gh, g))
    })
}

/// Fidelity as a function of the dressing-pulse rise time.
pub fn risetime_scan(
    base: &GateSetup,
    rise_times: &[f64],
    ens: &FidelityEnsemble,
    mode: FidelityMode,
) -> Result<Vec<(f64, GatePoint)>> {
    scan(rise_times, |&t0| {
        let mut s = base.clone();
        s.rise_time = Some(t0);
        fidelity_at_interaction(&s, ens, mode).map(|g| (t0, g))
    })
}
