use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::dynamics::{self, evolve, EvolveOptions, Method, Model, Probe, Quality, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::{
    auto_truncation, dagger, kron_mat, kron_vec, partial_trace_matrix, sigma_x, thermal_state_nth, DensityMatrix,
    SubsystemLayout, C64,
};
use crate::models::{self, ModelKind, SystemParams};

use super::gate::computational_basis;
use super::{log_negativity_matrix, Bipartition};

/// Partitions recorded by the entanglement experiment, with column names.
pub fn entanglement_partitions() -> Vec<(&'static str, Bipartition)> {
    let p = |a: &[usize], b: &[usize]| Bipartition::new(a, b).unwrap();
    vec![
        ("EN_h_q1q2", p(&[2], &[0, 1])),
        ("EN_h_q1", p(&[2], &[0])),
        ("EN_h_q2", p(&[2], &[1])),
        ("EN_q1_q2", p(&[0], &[1])),
    ]
}

#[derive(Clone, Debug)]
pub struct EntangleOptions {
    pub truncation: Option<usize>,
    /// Grid points on `[0, 2 t_int]`; odd so that `t_int` is on the grid.
    pub points: usize,
    /// Qubit input `|q1 q2>` in the computational basis.
    pub input: (u8, u8),
}

impl Default for EntangleOptions {
    fn default() -> Self {
        Self { truncation: None, points: 4001, input: (1, 0) }
    }
}

#[derive(Clone, Debug)]
pub struct EntangleResult {
    pub trajectory: Trajectory,
    pub t_int: f64,
    /// Negativities at exactly `t_int`, in partition order.
    pub at_t_int: Vec<(String, f64)>,
    pub truncation: usize,
}

impl EntangleResult {
    pub fn at(&self, name: &str) -> Option<f64> {
        self.at_t_int.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Two dressed qubits and the oscillator from a product input; the qubits
/// start in a logical product state, the oscillator thermal.
pub fn entanglement_experiment(p: &SystemParams, opts: &EntangleOptions) -> Result<EntangleResult> {
    p.validate()?;
    if opts.points < 3 || opts.points % 2 == 0 {
        return Err(Error::Argument(format!("entanglement grid needs an odd number of points >= 3, got {}", opts.points)));
    }
    let n = opts.truncation.unwrap_or_else(|| auto_truncation(p.n_th_h));
    let t_int = models::interaction_time(p)?;
    let layout = models::two_qubit_layout(n);
    let q = kron_vec(&models::logical_state(opts.input.0), &models::logical_state(opts.input.1));
    let rho0 = DensityMatrix::pure(&SubsystemLayout::new(vec![2, 2])?, &q)?.kron(&thermal_state_nth(p.n_th_h, n)?);
    let h = models::two_qubit_hamiltonian(p, n, [p.qubit(0).omega_r, p.qubit(1).omega_r])?;
    let ls = models::lindblad_set(p, n, 2, ModelKind::Dressed)?;
    let model = Model::new(h, ls);

    let half = (opts.points - 1) / 2;
    let times: Vec<f64> = (0..opts.points).map(|k| t_int * (k as f64 / half as f64)).collect();
    let mut probes: Vec<Probe> = entanglement_partitions()
        .into_iter()
        .map(|(name, part)| {
            let l = layout.clone();
            Probe::func(name, move |r: &Array2<C64>| log_negativity_matrix(r, &l, &part))
        })
        .collect();
    let sx1 = models::qubit_observable(&sigma_x(), 0, 2, n)?;
    let sx2 = models::qubit_observable(&sigma_x(), 1, 2, n)?;
    probes.push(Probe::expect("sx1", &sx1));
    probes.push(Probe::expect("sx2", &sx2));
    probes.push(Probe::expect("sx1sx2", &(&sx1 * &sx2)));
    let traj = evolve(&rho0, &model, &times, Method::ExpmEig, &probes, &EvolveOptions::default())?;
    let at_t_int = entanglement_partitions()
        .iter()
        .map(|(name, _)| (name.to_string(), traj.column(name).unwrap()[half]))
        .collect();
    Ok(EntangleResult { trajectory: traj, t_int, at_t_int, truncation: n })
}

/// Angular frequency of the largest spectral component of `values` with
/// `lo < omega < hi`, on a uniform grid, with parabolic refinement.
pub fn dominant_frequency(times: &[f64], values: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::Argument("need at least four matching samples".into()));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::Argument("samples must be uniformly spaced".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let len = values.len() * 16;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let dw = 2.0 * PI / (len as f64 * dt);
    let power: Vec<f64> = buf[..len / 2].iter().map(|z| z.norm_sqr()).collect();
    let k0 = ((lo / dw).floor() as usize + 1).max(1);
    let k1 = ((hi / dw).ceil() as usize).min(power.len() - 2);
    if k0 >= k1 {
        return Err(Error::Argument(format!("band ({lo}, {hi}) is empty at resolution {dw:.3e}")));
    }
    let k = (k0..=k1).max_by(|&a, &b| power[a].total_cmp(&power[b])).unwrap();
    if power[k] == 0.0 {
        return Err(Error::NoPeak { lo, hi });
    }
    let (a, b, c) = (power[k - 1], power[k], power[k + 1]);
    let den = a - 2.0 * b + c;
    let shift = if den != 0.0 { 0.5 * (a - c) / den } else { 0.0 };
    Ok((k as f64 + shift.clamp(-0.5, 0.5)) * dw)
}

#[derive(Clone, Debug, Default)]
pub struct BellOptions {
    pub truncation: Option<usize>,
    /// Leave out the flip of qubit 1, so both qubits enter with equal parity.
    pub skip_flip: bool,
}

#[derive(Clone, Debug)]
pub struct BellResult {
    /// Final two-qubit state in the computational basis.
    pub rho: Array2<C64>,
    pub negativity: f64,
    /// Input fed to the interaction window, in the computational basis.
    pub input: Array2<C64>,
    pub quality: Quality,
    pub truncation: usize,
}

fn hadamard() -> Array2<C64> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    Array2::from_shape_vec((2, 2), vec![s, s, s, -s]).unwrap()
}

/// Both qubits start in the bare ground state; qubit 1 is flipped, ideal
/// Hadamards map the bare states onto the logical ones, and the dressed
/// interaction runs for `t_int`.
pub fn bell_circuit(p: &SystemParams, opts: &BellOptions) -> Result<BellResult> {
    p.validate()?;
    let n = opts.truncation.unwrap_or_else(|| auto_truncation(p.n_th_h));
    let t_int = models::interaction_time(p)?;
    let down = models::bare_state(0);
    let mut psi = kron_vec(&down, &down);
    if !opts.skip_flip {
        psi = kron_mat(&sigma_x().into_data(), &Array2::eye(2)).dot(&psi);
    }
    let hh = kron_mat(&hadamard(), &hadamard());
    psi = hh.dot(&psi);
    let q = DensityMatrix::pure(&SubsystemLayout::new(vec![2, 2])?, &psi)?;
    let rho0 = q.kron(&thermal_state_nth(p.n_th_h, n)?);
    let h = models::two_qubit_hamiltonian(p, n, [p.qubit(0).omega_r, p.qubit(1).omega_r])?;
    let ls = models::lindblad_set(p, n, 2, ModelKind::Dressed)?;
    let model = Model::new(h, ls);
    let out = dynamics::propagate(&model, &[rho0.matrix().clone()], &[0.0, t_int], Method::ExpmEig, &EvolveOptions::default())?;
    let fin = &out[1][0];
    let quality = dynamics::quality_of(fin)?;
    let layout = models::two_qubit_layout(n);
    let (red, rl) = partial_trace_matrix(fin, &layout, &[0, 1])?;
    let negativity = log_negativity_matrix(&red, &rl, &Bipartition::new(&[0], &[1])?)?;
    let c = computational_basis();
    let to_comp = |m: &Array2<C64>| dagger(&c).dot(m).dot(&c);
    Ok(BellResult { rho: to_comp(&red), negativity, input: to_comp(q.matrix()), quality, truncation: n })
}
