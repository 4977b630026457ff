//! Entanglement and gate-quality measures.
//!
//! Two-qubit matrices use the computational basis `|q1 q2>` with index
//! `2 q1 + q2`, where the single-qubit states are the logical `|0>, |1>`.

pub mod experiments;
pub mod gate;

use std::f64::consts::FRAC_1_SQRT_2;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hilbert::{
    dagger, kron_vec, partial_trace_matrix, partial_transpose_matrix, trace_norm_hermitian, DensityMatrix,
    SubsystemLayout, C64, ONE, ZERO,
};
use crate::models::SystemParams;

pub use experiments::{
    bell_circuit, dominant_frequency, entanglement_experiment, BellOptions, BellResult, EntangleOptions,
    EntangleResult,
};
pub use gate::{
    gate_channel, propagator_error, vacuum_propagator, GateFrame, GateSetup, QubitChannel,
};

/// Values with magnitude below `NEGATIVITY_CLAMP` are reported as zero.
pub const NEGATIVITY_CLAMP: f64 = 1e-12;

/// Two disjoint groups of subsystems; everything else is traced out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl Bipartition {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.is_empty() || b.is_empty() || a.iter().any(|s| b.contains(s)) {
            return Err(Error::Argument(format!("invalid bipartition {a:?} | {b:?}")));
        }
        Ok(Self { a: a.to_vec(), b: b.to_vec() })
    }
}

/// `log2 || rho^{T_A} ||_1` on an arbitrary layout.
pub fn log_negativity_matrix(m: &Array2<C64>, layout: &SubsystemLayout, part: &Bipartition) -> Result<f64> {
    if let Some(&s) = part.a.iter().chain(&part.b).find(|&&s| s >= layout.len()) {
        return Err(Error::Layout(format!("subsystem {s} out of range for {:?}", layout.dims())));
    }
    let mut keep: Vec<usize> = part.a.iter().chain(&part.b).copied().collect();
    keep.sort_unstable();
    let (reduced, rl) = if keep.len() == layout.len() {
        (m.clone(), layout.clone())
    } else {
        partial_trace_matrix(m, layout, &keep)?
    };
    let a_local: Vec<usize> = part.a.iter().map(|s| keep.iter().position(|k| k == s).unwrap()).collect();
    let pt = partial_transpose_matrix(&reduced, &rl, &a_local)?;
    let norm = trace_norm_hermitian(&pt)?;
    let tr = reduced.diag().sum().re;
    let v = (norm / tr).log2();
    Ok(if v.abs() < NEGATIVITY_CLAMP { 0.0 } else { v })
}

pub fn log_negativity(rho: &DensityMatrix, part: &Bipartition) -> Result<f64> {
    log_negativity_matrix(rho.matrix(), rho.layout(), part)
}

/// A 4x4 gate on the computational basis.
#[derive(Clone, Debug)]
pub struct GateTarget {
    pub matrix: Array2<C64>,
    pub time: f64,
}

impl GateTarget {
    pub fn unitarity_error(&self) -> f64 {
        crate::hilbert::max_abs(&(dagger(&self.matrix).dot(&self.matrix) - Array2::<C64>::eye(4)))
    }

    pub fn apply(&self, psi: &Array1<C64>) -> Array1<C64> {
        self.matrix.dot(psi)
    }
}

/// Sign of the Rabi detuning; positive detuning gives the `-i` exchange phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetuningSign {
    Positive,
    Negative,
}

impl DetuningSign {
    pub fn of(delta_r: f64) -> Self {
        if delta_r >= 0.0 {
            Self::Positive
        } else {
            Self::Negative
        }
    }
}

fn exchange_block(cos: f64, sin: f64) -> Array2<C64> {
    let mut u = Array2::<C64>::zeros((4, 4));
    u[[0, 0]] = ONE;
    u[[3, 3]] = ONE;
    u[[1, 1]] = C64::new(cos, 0.0);
    u[[2, 2]] = C64::new(cos, 0.0);
    u[[1, 2]] = C64::new(0.0, -sin);
    u[[2, 1]] = C64::new(0.0, -sin);
    u
}

/// Half-swap of `|01>` and `|10>` with phase `-i` (positive) or `+i` (negative).
pub fn sqrt_iswap_target(sign: DetuningSign) -> GateTarget {
    let s = match sign {
        DetuningSign::Positive => FRAC_1_SQRT_2,
        DetuningSign::Negative => -FRAC_1_SQRT_2,
    };
    GateTarget { matrix: exchange_block(FRAC_1_SQRT_2, s), time: 0.0 }
}

fn symmetric_check(p: &SystemParams) -> Result<()> {
    if !p.is_symmetric() {
        return Err(Error::Unsupported("analytic evolution needs identical qubits".into()));
    }
    if p.delta_r() == 0.0 {
        return Err(Error::SingularDetuning);
    }
    Ok(())
}

/// Dispersive propagator in the oscillator vacuum: Stark-shifted local
/// phases times an exchange rotation of angle `g^2 t / Delta_R`.
pub fn analytic_evolution(p: &SystemParams, t: f64) -> Result<GateTarget> {
    symmetric_check(p)?;
    analytic_with_area(p, t, p.omega_r * t)
}

/// As [`analytic_evolution`] with the dressing phase `Omega_R t` replaced
/// by a pulse area.
pub fn analytic_evolution_area(p: &SystemParams, t: f64, area: f64) -> Result<GateTarget> {
    symmetric_check(p)?;
    analytic_with_area(p, t, area)
}

fn analytic_with_area(p: &SystemParams, t: f64, area: f64) -> Result<GateTarget> {
    let dr = p.delta_r();
    let chi = p.g * p.g / dr;
    let theta = chi * t;
    let mut u = exchange_block(theta.cos(), theta.sin());
    // epsilon t with epsilon = Omega_R/2 + g^2/(2 Delta_R)
    let phase = area / 2.0 + chi * t / 2.0;
    u[[3, 3]] = C64::from_polar(1.0, -2.0 * phase);
    u[[0, 0]] = C64::from_polar(1.0, 2.0 * phase);
    Ok(GateTarget { matrix: u, time: t })
}

/// Product pure states on two qubits.
#[derive(Clone, Debug)]
pub struct FidelityEnsemble {
    pub states: Vec<Array1<C64>>,
}

fn axis_states() -> Vec<Array1<C64>> {
    let s = FRAC_1_SQRT_2;
    let v = |a: C64, b: C64| Array1::from(vec![a, b]);
    vec![
        v(C64::new(s, 0.0), C64::new(s, 0.0)),
        v(C64::new(s, 0.0), C64::new(-s, 0.0)),
        v(C64::new(s, 0.0), C64::new(0.0, s)),
        v(C64::new(s, 0.0), C64::new(0.0, -s)),
        v(ONE, ZERO),
        v(ZERO, ONE),
    ]
}

impl FidelityEnsemble {
    /// The 36 products of the `+-x, +-y, +-z` single-qubit states.
    pub fn axis() -> Self {
        let single = axis_states();
        let mut states = Vec::with_capacity(36);
        for a in &single {
            for b in &single {
                states.push(kron_vec(a, b));
            }
        }
        Self { states }
    }

    /// Products of independently Haar-random single-qubit states.
    pub fn haar(count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut one = || {
            let z: Vec<C64> = (0..2)
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect();
            let n = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            Array1::from(vec![z[0] / n, z[1] / n])
        };
        let states = (0..count).map(|_| {
            let a = one();
            let b = one();
            kron_vec(&a, &b)
        }).collect();
        Self { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FidelityMode {
    /// Compare against the target as given.
    #[default]
    Fixed,
    /// Maximize over local z phases applied after the target.
    LocalPhase,
}

/// `<U psi| Phi(psi psi^dag) |U psi>` for each ensemble state.
pub fn state_fidelities(channel: &QubitChannel, target: &Array2<C64>, ens: &FidelityEnsemble) -> Vec<f64> {
    ens.states
        .iter()
        .map(|psi| {
            let out = channel.apply(&crate::hilbert::outer(psi, psi));
            let phi = target.dot(psi);
            let v = phi.iter().zip(out.dot(&phi).iter()).map(|(a, b)| a.conj() * b).sum::<C64>();
            v.re
        })
        .collect()
}

/// Uniform ensemble average of the state fidelities, summed in index order.
pub fn gate_fidelity(channel: &QubitChannel, target: &GateTarget, ens: &FidelityEnsemble, mode: FidelityMode) -> f64 {
    let avg = |u: &Array2<C64>| {
        let f = state_fidelities(channel, u, ens);
        f.iter().sum::<f64>() / f.len() as f64
    };
    match mode {
        FidelityMode::Fixed => avg(&target.matrix),
        FidelityMode::LocalPhase => {
            let (_, f) = best_local_phases(&target.matrix, avg);
            f
        }
    }
}

/// `diag(1, e^{i b}, e^{i a}, e^{i(a+b)}) U`.
pub fn with_local_phases(u: &Array2<C64>, a: f64, b: f64) -> Array2<C64> {
    let d = [0.0, b, a, a + b];
    let mut out = u.clone();
    for (r, ph) in d.iter().enumerate() {
        let z = C64::from_polar(1.0, *ph);
        out.row_mut(r).mapv_inplace(|x| x * z);
    }
    out
}

/// Compass search over the two local phases starting from zero.
fn best_local_phases(u: &Array2<C64>, f: impl Fn(&Array2<C64>) -> f64) -> ((f64, f64), f64) {
    let mut x = (0.0, 0.0);
    let mut best = f(u);
    // coarse scan guards against starting in a poor basin
    let n = 16;
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (2.0 * std::f64::consts::PI * i as f64 / n as f64, 2.0 * std::f64::consts::PI * j as f64 / n as f64);
            let v = f(&with_local_phases(u, a, b));
            if v > best {
                best = v;
                x = (a, b);
            }
        }
    }
    let mut step = std::f64::consts::PI / n as f64;
    while step > 1e-9 {
        let mut moved = false;
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let c = (x.0 + da, x.1 + db);
            let v = f(&with_local_phases(u, c.0, c.1));
            if v > best {
                best = v;
                x = c;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (x, best)
}

/// Rotation taking single-qubit `|1>` to `e^{i phi}|1>`: `diag(1, e^{i phi})`.
pub fn z_phase(phi: f64) -> Array2<C64> {
    let mut m = Array2::<C64>::eye(2);
    m[[1, 1]] = C64::from_polar(1.0, phi);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::kron_mat;
    use proptest::prelude::*;

    fn bell() -> DensityMatrix {
        let mut v = Array1::<C64>::zeros(4);
        v[0] = C64::new(FRAC_1_SQRT_2, 0.0);
        v[3] = C64::new(FRAC_1_SQRT_2, 0.0);
        DensityMatrix::pure(&SubsystemLayout::new(vec![2, 2]).unwrap(), &v).unwrap()
    }

    fn q1q2() -> Bipartition {
        Bipartition::new(&[0], &[1]).unwrap()
    }

    #[test]
    fn bell_state_has_unit_negativity() {
        assert!((log_negativity(&bell(), &q1q2()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn werner_state_value() {
        let p = 0.5;
        let b = bell();
        let m = b.matrix() * C64::new(p, 0.0) + Array2::<C64>::eye(4) * C64::new((1.0 - p) / 4.0, 0.0);
        let rho = DensityMatrix::new(crate::hilbert::Operator::new(b.layout().clone(), m).unwrap()).unwrap();
        let v = log_negativity(&rho, &q1q2()).unwrap();
        assert!((v - 1.25f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn product_state_is_zero_and_traced_parties_drop_out() {
        let l = SubsystemLayout::new(vec![2, 2, 3]).unwrap();
        let psi = kron_vec(&kron_vec(&axis_states()[0], &axis_states()[2]), &crate::hilbert::basis(3, 1));
        let rho = DensityMatrix::pure(&l, &psi).unwrap();
        for (a, b) in [(vec![0], vec![1]), (vec![2], vec![0, 1]), (vec![2], vec![1])] {
            assert_eq!(log_negativity(&rho, &Bipartition::new(&a, &b).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn sqrt_iswap_examples() {
        for (sign, ph) in [(DetuningSign::Positive, -1.0), (DetuningSign::Negative, 1.0)] {
            let u = sqrt_iswap_target(sign);
            assert!(u.unitarity_error() < 1e-15);
            let out = u.apply(&crate::hilbert::basis(4, 2));
            assert!((out[2] - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
            assert!((out[1] - C64::new(0.0, ph * FRAC_1_SQRT_2)).norm() < 1e-15);
            let sq = u.matrix.dot(&u.matrix);
            assert!((sq[[1, 2]] - C64::new(0.0, ph)).norm() < 1e-15 && sq[[1, 1]].norm() < 1e-15);
            assert_eq!(u.apply(&crate::hilbert::basis(4, 0))[0], ONE);
        }
    }

    #[test]
    fn analytic_evolution_at_interaction_time() {
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        let t = crate::models::interaction_time(&p).unwrap();
        assert!((t - 500.0 * std::f64::consts::PI).abs() < 1e-9);
        let u = analytic_evolution(&p, t).unwrap();
        assert!(u.unitarity_error() < 1e-14);
        let s = FRAC_1_SQRT_2;
        assert!((u.matrix[[1, 1]].re - s).abs() < 1e-12 && (u.matrix[[1, 2]] - C64::new(0.0, -s)).norm() < 1e-12);
        let mut q = p;
        q.set_delta_r(-0.05);
        let u = analytic_evolution(&q, t).unwrap();
        assert!((u.matrix[[2, 1]] - C64::new(0.0, s)).norm() < 1e-12);
    }

    #[test]
    fn zero_coupling_gives_pure_phases() {
        let p = SystemParams::dressed(0.05, 0.0, 0.0, 0.0, 0.0);
        let u = analytic_evolution(&p, 123.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(u.matrix[[i, j]], ZERO);
                }
            }
        }
    }

    #[test]
    fn asymmetric_params_are_unsupported() {
        let mut p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        p.overrides[1].g = Some(6e-3);
        assert!(matches!(analytic_evolution(&p, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn axis_ensemble_is_normalized_and_complete() {
        let e = FidelityEnsemble::axis();
        assert_eq!(e.len(), 36);
        for s in &e.states {
            assert!((s.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let h = FidelityEnsemble::haar(8, 5);
        let h2 = FidelityEnsemble::haar(8, 5);
        assert_eq!(h.states, h2.states);
    }

    #[test]
    fn identity_channel_has_unit_fidelity_and_ordering_invariance() {
        let ch = QubitChannel::identity();
        let id = GateTarget { matrix: Array2::eye(4), time: 0.0 };
        let mut e = FidelityEnsemble::axis();
        let f = gate_fidelity(&ch, &id, &e, FidelityMode::Fixed);
        assert!((f - 1.0).abs() < 1e-12);
        // a unitary channel scores against itself
        let u = sqrt_iswap_target(DetuningSign::Positive);
        let cu = QubitChannel::unitary(&u.matrix);
        assert!((gate_fidelity(&cu, &u, &e, FidelityMode::Fixed) - 1.0).abs() < 1e-12);
        let before = gate_fidelity(&cu, &id, &e, FidelityMode::Fixed);
        e.states.reverse();
        assert!((gate_fidelity(&cu, &id, &e, FidelityMode::Fixed) - before).abs() < 1e-12);
    }

    #[test]
    fn local_phase_mode_recovers_phased_gate() {
        let u = sqrt_iswap_target(DetuningSign::Positive);
        let phased = with_local_phases(&u.matrix, 0.7, -1.3);
        let ch = QubitChannel::unitary(&phased);
        let e = FidelityEnsemble::axis();
        assert!(gate_fidelity(&ch, &u, &e, FidelityMode::Fixed) < 0.9);
        assert!((gate_fidelity(&ch, &u, &e, FidelityMode::LocalPhase) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn frame_change_of_channel_and_target_keeps_fidelity() {
        let u = sqrt_iswap_target(DetuningSign::Negative);
        let noisy = QubitChannel::unitary(&with_local_phases(&u.matrix, 0.1, 0.2));
        let w = kron_mat(&z_phase(0.4), &z_phase(-0.9));
        let rotated = noisy.conjugated(&w);
        let target2 = GateTarget { matrix: w.dot(&u.matrix).dot(&dagger(&w)), time: 0.0 };
        let e = FidelityEnsemble::axis();
        let mut e2 = e.clone();
        for s in e2.states.iter_mut() {
            *s = w.dot(s);
        }
        let a = gate_fidelity(&noisy, &u, &e, FidelityMode::Fixed);
        let b = gate_fidelity(&rotated, &target2, &e2, FidelityMode::Fixed);
        assert!((a - b).abs() < 1e-12);
    }

    fn random_pure(seed: u64, da: usize, db: usize) -> (Array1<C64>, Array2<C64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<C64> = (0..da * db)
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi = Array1::from(v) / C64::new(n, 0.0);
        let m = Array2::from_shape_fn((da, db), |(i, j)| psi[i * db + j]);
        (psi, m)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn pure_state_negativity_matches_schmidt_oracle(seed in 0u64..10_000, da in 2usize..4, db in 2usize..4) {
            use ndarray_linalg::SVD;
            let (psi, m) = random_pure(seed, da, db);
            let (_, s, _) = m.svd(false, false).unwrap();
            let want = s.sum().powi(2).log2();
            let l = SubsystemLayout::new(vec![da, db]).unwrap();
            let rho = DensityMatrix::pure(&l, &psi).unwrap();
            let got = log_negativity(&rho, &Bipartition::new(&[0], &[1]).unwrap()).unwrap();
            prop_assert!((got - want).abs() < 1e-9);
        }

        #[test]
        fn negativity_is_local_unitary_invariant(seed in 0u64..10_000) {
            let (psi, _) = random_pure(seed, 2, 3);
            let l = SubsystemLayout::new(vec![2, 3]).unwrap();
            let rho = DensityMatrix::pure(&l, &psi).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let h1 = crate::hilbert::hermitize(&Array2::from_shape_fn((2, 2), |_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))));
            let h2 = crate::hilbert::hermitize(&Array2::from_shape_fn((3, 3), |_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))));
            let u = kron_mat(&crate::hilbert::expm_hermitian(&h1, 1.0).unwrap(), &crate::hilbert::expm_hermitian(&h2, 1.0).unwrap());
            let m2 = u.dot(rho.matrix()).dot(&dagger(&u));
            let part = Bipartition::new(&[0], &[1]).unwrap();
            let a = log_negativity(&rho, &part).unwrap();
            let b = log_negativity_matrix(&m2, &l, &part).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
