//! Hamiltonians, jump operators, drive pulses and closed-form model quantities.
//!
//! Frequencies and rates are in units of the oscillator frequency.
//!
//! Two qubit frames appear throughout:
//! * the *bare* frame, where each qubit is written in the `sigma_z`
//!   eigenbasis `(up, down)`;
//! * the *logical* frame, where the qubit basis is `(|1>, |0>)` with
//!   `|1> = (up + down)/sqrt 2` and `|0> = (up - down)/sqrt 2`, the
//!   eigenstates of the dressing term `sigma_x`.
//!
//! `logical_frame` maps logical coordinates to bare coordinates.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::hilbert::{
    self, create, dagger, destroy, embed, kron, kron_mat, number, sigma_minus,
    sigma_plus, sigma_x, sigma_z, Operator, SubsystemLayout, C64,
};

/// Per-qubit values after applying overrides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitParams {
    pub omega_r: f64,
    pub g: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QubitOverride {
    pub omega_r: Option<f64>,
    pub g: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    /// Bare qubit splitting. Only the bare model uses it.
    pub omega_q: f64,
    pub omega_h: f64,
    /// Dressing (Rabi) amplitude.
    pub omega_r: f64,
    /// Drive detuning `omega_d - omega_q`.
    pub delta: f64,
    pub g: f64,
    pub gamma_q: f64,
    pub gamma_h: f64,
    pub n_th_q: f64,
    pub n_th_h: f64,
    pub overrides: [QubitOverride; 2],
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_q: 50.0,
            omega_h: 1.0,
            omega_r: 1.05,
            delta: 0.0,
            g: 5e-3,
            gamma_q: 1e-4,
            gamma_h: 1e-4,
            n_th_q: 0.0,
            n_th_h: 0.0,
            overrides: [QubitOverride::default(); 2],
        }
    }
}

impl SystemParams {
    /// Dressed-qubit parameters with `Omega_R = omega_h + delta_r`.
    pub fn dressed(delta_r: f64, g: f64, gamma_q: f64, gamma_h: f64, n_th_h: f64) -> Self {
        Self {
            omega_r: 1.0 + delta_r,
            g,
            gamma_q,
            gamma_h,
            n_th_h,
            ..Self::default()
        }
    }

    /// Bare-qubit parameters; the qubit bath shares the oscillator temperature.
    pub fn bare(omega_q: f64, g: f64, gamma_q: f64, gamma_h: f64, n_th_h: f64) -> Self {
        let t = temperature_from_occupation(1.0, n_th_h);
        Self {
            omega_q,
            g,
            gamma_q,
            gamma_h,
            n_th_h,
            n_th_q: bose_einstein(omega_q, t),
            ..Self::default()
        }
    }

    pub fn delta_r(&self) -> f64 {
        self.omega_r - self.omega_h
    }

    pub fn set_delta_r(&mut self, delta_r: f64) {
        self.omega_r = self.omega_h + delta_r;
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_q + self.delta
    }

    pub fn temperature(&self) -> f64 {
        temperature_from_occupation(self.omega_h, self.n_th_h)
    }

    pub fn qubit(&self, j: usize) -> QubitParams {
        let o = self.overrides.get(j).copied().unwrap_or_default();
        QubitParams {
            omega_r: o.omega_r.unwrap_or(self.omega_r),
            g: o.g.unwrap_or(self.g),
            delta: o.delta.unwrap_or(self.delta),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.qubit(0) == self.qubit(1)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("gamma_q", self.gamma_q),
            ("gamma_h", self.gamma_h),
            ("n_th_q", self.n_th_q),
            ("n_th_h", self.n_th_h),
        ];
        for (k, v) in named {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{k} must be a finite non-negative number, got {v}")));
            }
        }
        if !(self.omega_h > 0.0) {
            return Err(Error::Argument(format!("omega_h must be positive, got {}", self.omega_h)));
        }
        for v in [self.omega_q, self.omega_r, self.delta, self.g] {
            if !v.is_finite() {
                return Err(Error::Argument("non-finite frequency parameter".into()));
            }
        }
        Ok(())
    }

    /// Regime notes for the dispersive, weak-damping approximations.
    pub fn regime_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let dr = self.delta_r();
        if dr != 0.0 && self.g / dr.abs() > 0.3 {
            w.push(format!("g/|Delta_R| = {:.3} is outside the dispersive regime", self.g / dr.abs()));
        }
        if self.g > 0.0 && self.gamma_q.max(self.gamma_h) / self.g > 0.1 {
            w.push("damping is not small compared with g".into());
        }
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Dressed,
    Bare,
}

/// Mean Bose-Einstein occupation; zero at zero temperature.
pub fn bose_einstein(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        1.0 / ((omega / temperature).exp_m1())
    }
}

pub fn temperature_from_occupation(omega: f64, n_th: f64) -> f64 {
    if n_th <= 0.0 {
        0.0
    } else {
        omega / (1.0 + 1.0 / n_th).ln()
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn quadrature(n: usize) -> Operator {
    &destroy(n) + &create(n)
}

pub fn qubit_oscillator_layout(n: usize) -> SubsystemLayout {
    SubsystemLayout::new(vec![2, n]).expect("valid layout")
}

pub fn two_qubit_layout(n: usize) -> SubsystemLayout {
    SubsystemLayout::new(vec![2, 2, n]).expect("valid layout")
}

pub fn layout_for(n_qubits: usize, n: usize) -> SubsystemLayout {
    let mut dims = vec![2; n_qubits];
    dims.push(n);
    SubsystemLayout::new(dims).expect("valid layout")
}

fn check_truncation(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Argument(format!("oscillator truncation must be at least 2, got {n}")));
    }
    Ok(())
}

/// `(omega_q/2) sz + omega_h a^dag a + g sx (a + a^dag)`.
pub fn bare_hamiltonian(p: &SystemParams, n: usize) -> Result<Operator> {
    check_truncation(n)?;
    let l = qubit_oscillator_layout(n);
    let hq = embed(&sigma_z().scale_re(p.omega_q / 2.0), 0, &l)?;
    let ho = embed(&number(n).scale_re(p.omega_h), 1, &l)?;
    let hc = kron(&sigma_x(), &quadrature(n)).scale_re(p.g);
    Ok(&(&hq + &ho) + &hc)
}

/// `-(Delta/2) sz + (Omega_R/2) sx + omega_h a^dag a - g sz (a + a^dag)` in the
/// frame rotating with the drive.
pub fn dressed_hamiltonian(p: &SystemParams, n: usize, omega_r_now: f64) -> Result<Operator> {
    check_truncation(n)?;
    let l = qubit_oscillator_layout(n);
    let q = (&sigma_z().scale_re(-p.delta / 2.0)) + &sigma_x().scale_re(omega_r_now / 2.0);
    let hq = embed(&q, 0, &l)?;
    let ho = embed(&number(n).scale_re(p.omega_h), 1, &l)?;
    let hc = kron(&sigma_z(), &quadrature(n)).scale_re(-p.g);
    Ok(&(&hq + &ho) + &hc)
}

/// Two dressed qubits sharing the oscillator, on layout `[2, 2, N]`.
pub fn two_qubit_hamiltonian(p: &SystemParams, n: usize, amplitudes: [f64; 2]) -> Result<Operator> {
    check_truncation(n)?;
    let l = two_qubit_layout(n);
    let mut h = embed(&number(n).scale_re(p.omega_h), 2, &l)?;
    let x = embed(&quadrature(n), 2, &l)?;
    for j in 0..2 {
        let qp = p.qubit(j);
        let q = (&sigma_z().scale_re(-qp.delta / 2.0)) + &sigma_x().scale_re(amplitudes[j] / 2.0);
        h = &h + &embed(&q, j, &l)?;
        let zj = embed(&sigma_z(), j, &l)?;
        h = &h + &(&zj * &x).scale_re(-qp.g);
    }
    Ok(h)
}

/// Drive-independent part and unit-amplitude drive operator of the two-qubit
/// model: `H(t) = H_static + Omega(t) * H_drive`.
pub fn two_qubit_drive_split(p: &SystemParams, n: usize) -> Result<(Operator, Operator)> {
    let h_static = two_qubit_hamiltonian(p, n, [0.0, 0.0])?;
    let l = two_qubit_layout(n);
    let d = &embed(&sigma_x().scale_re(0.5), 0, &l)? + &embed(&sigma_x().scale_re(0.5), 1, &l)?;
    Ok((h_static, d))
}

/// Rotating-wave model `(Omega_R/2) sz + omega_h a^dag a + g (s- a^dag + s+ a)`.
pub fn rwa_hamiltonian(p: &SystemParams, n: usize) -> Result<Operator> {
    check_truncation(n)?;
    let l = qubit_oscillator_layout(n);
    let hq = embed(&sigma_z().scale_re(p.omega_r / 2.0), 0, &l)?;
    let ho = embed(&number(n).scale_re(p.omega_h), 1, &l)?;
    let hc = &kron(&sigma_minus(), &create(n)) + &kron(&sigma_plus(), &destroy(n));
    Ok(&(&hq + &ho) + &hc.scale_re(p.g))
}

/// Total excitation number `sz/2 + a^dag a` on the qubit-oscillator layout.
pub fn excitation_number(n: usize) -> Operator {
    let l = qubit_oscillator_layout(n);
    &embed(&sigma_z().scale_re(0.5), 0, &l).unwrap() + &embed(&number(n), 1, &l).unwrap()
}

/// Dispersive effective Hamiltonian for one or two qubits, written in the
/// logical frame (`sz` is +1 on logical `|1>`).
pub fn effective_hamiltonian(p: &SystemParams, n: usize, n_qubits: usize) -> Result<Operator> {
    check_truncation(n)?;
    if !(1..=2).contains(&n_qubits) {
        return Err(Error::Unsupported(format!("{n_qubits} qubits")));
    }
    let l = layout_for(n_qubits, n);
    let num = embed(&number(n), n_qubits, &l)?;
    let mut h = num.scale_re(p.omega_h);
    for j in 0..n_qubits {
        let qp = p.qubit(j);
        let dr = qp.omega_r - p.omega_h;
        if dr == 0.0 {
            return Err(Error::SingularDetuning);
        }
        let zj = embed(&sigma_z(), j, &l)?;
        h = &h + &zj.scale_re(qp.omega_r / 2.0 + qp.g * qp.g / (2.0 * dr));
        h = &h + &(&zj * &num).scale_re(qp.g * qp.g / dr);
    }
    if n_qubits == 2 {
        let (a, b) = (p.qubit(0), p.qubit(1));
        let pm = &embed(&sigma_plus(), 0, &l)? * &embed(&sigma_minus(), 1, &l)?;
        let flip = &pm + &pm.adjoint();
        let j = a.g * b.g / (2.0 * (a.omega_r - p.omega_h)) + b.g * a.g / (2.0 * (b.omega_r - p.omega_h));
        h = &h + &flip.scale_re(j);
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub struct Jump {
    pub label: String,
    pub op: Operator,
}

#[derive(Clone, Debug, Default)]
pub struct LindbladSet {
    pub jumps: Vec<Jump>,
}

impl LindbladSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Jump> {
        self.jumps.iter()
    }

    fn push(&mut self, label: &str, rate: f64, op: Operator) {
        if rate > 0.0 {
            self.jumps.push(Jump { label: label.to_string(), op: op.scale_re(rate.sqrt()) });
        }
    }
}

/// Thermal jump operators with rates absorbed. Dressed runs use a zero
/// qubit-bath occupation; the qubit operators are the bare `s-`, `s+`.
pub fn lindblad_set(p: &SystemParams, n: usize, n_qubits: usize, kind: ModelKind) -> Result<LindbladSet> {
    check_truncation(n)?;
    let l = layout_for(n_qubits, n);
    let nq = match kind {
        ModelKind::Dressed => 0.0,
        ModelKind::Bare => p.n_th_q,
    };
    let mut set = LindbladSet::empty();
    for j in 0..n_qubits {
        set.push(&format!("q{}-", j + 1), (nq + 1.0) * p.gamma_q, embed(&sigma_minus(), j, &l)?);
        set.push(&format!("q{}+", j + 1), nq * p.gamma_q, embed(&sigma_plus(), j, &l)?);
    }
    set.push("h-", (p.n_th_h + 1.0) * p.gamma_h, embed(&destroy(n), n_qubits, &l)?);
    set.push("h+", p.n_th_h * p.gamma_h, embed(&create(n), n_qubits, &l)?);
    Ok(set)
}

/// Smooth dressing pulse: two tanh edges of width `t0` at 0 and `t_int`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    pub omega_r0: f64,
    pub t0: f64,
    pub t_int: f64,
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl Pulse {
    pub fn new(omega_r0: f64, t0: f64, t_int: f64) -> Result<Self> {
        if !(t0 >= 0.0) || !(t_int > 0.0) {
            return Err(Error::Argument(format!("invalid pulse t0 = {t0}, t_int = {t_int}")));
        }
        Ok(Self { omega_r0, t0, t_int })
    }

    pub fn is_rectangular(&self) -> bool {
        self.t0 == 0.0
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        if self.is_rectangular() {
            return if (0.0..=self.t_int).contains(&t) { self.omega_r0 } else { 0.0 };
        }
        let a = (2.0 * t / self.t0).tanh();
        let b = (2.0 * (t - self.t_int) / self.t0).tanh();
        self.omega_r0 / 4.0 * (1.0 + a) * (1.0 - b)
    }

    /// `int_0^t amplitude(s) ds`, in closed form.
    pub fn area(&self, t: f64) -> f64 {
        if self.is_rectangular() {
            return self.omega_r0 * t.clamp(0.0, self.t_int);
        }
        // (1 + tanh a)(1 - tanh b) = (tanh a - tanh b)(1 + coth(a - b)) with a - b fixed
        let cth = 1.0 / (2.0 * self.t_int / self.t0).tanh();
        let h = self.t0 / 2.0;
        let prim = |s: f64| h * (log_cosh(2.0 * s / self.t0) - log_cosh(2.0 * (s - self.t_int) / self.t0));
        self.omega_r0 / 4.0 * (1.0 + cth) * (prim(t) - prim(0.0))
    }
}

/// Signed dispersive shift `g^2/Delta_R`.
pub fn dispersive_shift(p: &SystemParams) -> Result<f64> {
    let dr = p.delta_r();
    if dr == 0.0 {
        return Err(Error::SingularDetuning);
    }
    Ok(p.g * p.g / dr)
}

/// Gate interaction time `pi |Delta_R| / (4 g^2)`.
pub fn interaction_time(p: &SystemParams) -> Result<f64> {
    if p.delta_r() == 0.0 {
        return Err(Error::SingularDetuning);
    }
    if p.g == 0.0 {
        return Err(Error::Argument("interaction time needs g != 0".into()));
    }
    Ok(PI * p.delta_r().abs() / (4.0 * p.g * p.g))
}

/// Spectral measurement window `40 pi |Delta_R| / g^2`.
pub fn cutoff_time(p: &SystemParams) -> Result<f64> {
    Ok(160.0 * interaction_time(p)?)
}

/// Sideband frequency `Delta_R + 4 g^2/Delta_R`.
pub fn sideband_frequency(p: &SystemParams) -> Result<f64> {
    Ok(p.delta_r() + 4.0 * dispersive_shift(p)?)
}

/// Number of sideband cycles completed during the interaction time.
pub fn phase_condition_cycles(p: &SystemParams) -> Result<f64> {
    Ok(sideband_frequency(p)? * interaction_time(p)? / (2.0 * PI))
}

/// Logical qubit state: `bit = 1` is the `+x` state, `bit = 0` the `-x` state.
pub fn logical_state(bit: u8) -> Array1<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if bit == 1 {
        Array1::from(vec![c(s), c(s)])
    } else {
        Array1::from(vec![c(s), c(-s)])
    }
}

/// Bare-frame state `up` (`bit = 1`, excited) or `down`.
pub fn bare_state(bit: u8) -> Array1<C64> {
    hilbert::basis(2, if bit == 1 { 0 } else { 1 })
}

/// Unitary whose columns are the logical basis `(|1>, |0>)` per qubit,
/// tensored over `n_qubits`.
pub fn logical_frame(n_qubits: usize) -> Array2<C64> {
    let mut w1 = Array2::<C64>::zeros((2, 2));
    for (k, bit) in [1u8, 0].iter().enumerate() {
        w1.column_mut(k).assign(&logical_state(*bit));
    }
    let mut w = Array2::<C64>::eye(1);
    for _ in 0..n_qubits {
        w = kron_mat(&w, &w1);
    }
    w
}

/// Logical raising operator `|1><0|` written in the bare frame.
pub fn logical_raise() -> Operator {
    Operator::from_matrix(hilbert::outer(&logical_state(1), &logical_state(0)))
}

/// Schrieffer-Wolff unitary `S = exp(sum_j (g_j/Delta_R,j)(a s+'_j - a^dag s-'_j))`
/// with logical ladder operators. `S |psi, 0>` is the dressed counterpart of
/// the logical product state `|psi>` with the oscillator in vacuum.
pub fn schrieffer_wolff(p: &SystemParams, n: usize, n_qubits: usize) -> Result<Operator> {
    check_truncation(n)?;
    let l = layout_for(n_qubits, n);
    let a = embed(&destroy(n), n_qubits, &l)?;
    let sp = logical_raise();
    let mut gen = Operator::zeros(&l);
    for j in 0..n_qubits {
        let qp = p.qubit(j);
        let dr = qp.omega_r - p.omega_h;
        if dr == 0.0 {
            return Err(Error::SingularDetuning);
        }
        let spj = embed(&sp, j, &l)?;
        let term = &(&spj * &a) - &(&spj * &a).adjoint();
        gen = &gen + &term.scale_re(qp.g / dr);
    }
    // gen is anti-Hermitian: exp(gen) = exp(-i (i gen))
    let h = gen.data().mapv(|z| z * hilbert::I);
    let s = hilbert::expm_hermitian(&h, 1.0)?;
    Operator::new(l, s)
}

/// Identity on the qubits tensored with the oscillator identity, helpful for
/// frame-free comparisons.
pub fn frame_identity(n_qubits: usize, n: usize) -> Operator {
    Operator::identity(&layout_for(n_qubits, n))
}

/// Qubit observable `op` on qubit `j` of the full layout.
pub fn qubit_observable(op: &Operator, j: usize, n_qubits: usize, n: usize) -> Result<Operator> {
    embed(op, j, &layout_for(n_qubits, n))
}

/// Oscillator quadrature `x = a + a^dag` on the full layout.
pub fn quadrature_observable(n_qubits: usize, n: usize) -> Result<Operator> {
    embed(&quadrature(n), n_qubits, &layout_for(n_qubits, n))
}

/// Logical frame operator on the full layout (qubits rotated, oscillator untouched).
pub fn logical_frame_full(n_qubits: usize, n: usize) -> Array2<C64> {
    kron_mat(&logical_frame(n_qubits), &Array2::eye(n))
}

pub fn rotate_to_logical(op: &Operator, n_qubits: usize) -> Result<Operator> {
    let n = *op.layout().dims().last().unwrap();
    let w = logical_frame_full(n_qubits, n);
    Operator::new(op.layout().clone(), dagger(&w).dot(op.data()).dot(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{hermiticity_error, identity, max_abs};
    use approx::assert_abs_diff_eq;
    use ndarray_linalg::{EigValsh, UPLO};

    fn eigvals(h: &Operator) -> Vec<f64> {
        let mut w = h.data().eigvalsh(UPLO::Lower).unwrap().to_vec();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        w
    }

    #[test]
    fn bose_einstein_inversions() {
        assert_eq!(bose_einstein(1.0, 0.0), 0.0);
        assert_abs_diff_eq!(bose_einstein(1.0, 1.0 / 2f64.ln()), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bose_einstein(1.0, 1.0 / 1.5f64.ln()), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bose_einstein(1.0, temperature_from_occupation(1.0, 4.0)), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn bare_decoupled_spectrum() {
        let mut p = SystemParams::bare(1.05, 0.0, 0.0, 0.0, 0.0);
        p.g = 0.0;
        let n = 4;
        let w = eigvals(&bare_hamiltonian(&p, n).unwrap());
        let mut want: Vec<f64> = (0..n)
            .flat_map(|k| [k as f64 + 0.525, k as f64 - 0.525])
            .collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in w.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn bare_two_level_hand_assembly() {
        let p = SystemParams { omega_q: 1.0, omega_h: 1.0, g: 1.0, ..SystemParams::default() };
        let h = bare_hamiltonian(&p, 2).unwrap();
        // basis |up,0>, |up,1>, |down,0>, |down,1>
        let want = [
            [0.5, 0.0, 0.0, 1.0],
            [0.0, 1.5, 1.0, 0.0],
            [0.0, 1.0, -0.5, 0.0],
            [1.0, 0.0, 0.0, 0.5],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(h.data()[[i, j]].re, want[i][j], epsilon = 1e-15);
                assert_eq!(h.data()[[i, j]].im, 0.0);
            }
        }
    }

    #[test]
    fn dressed_qubit_splitting() {
        let mut p = SystemParams::dressed(0.05, 0.0, 0.0, 0.0, 0.0);
        p.delta = 0.3;
        let h = dressed_hamiltonian(&p, 2, p.omega_r).unwrap();
        let w = eigvals(&h);
        let split = (p.omega_r.powi(2) + p.delta.powi(2)).sqrt();
        assert_abs_diff_eq!(w[0], -split / 2.0, epsilon = 1e-12);
        // oscillator ladder interleaves: -s/2, 1 - s/2, s/2, 1 + s/2
        assert_abs_diff_eq!(w[1], 1.0 - split / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[2], split / 2.0, epsilon = 1e-12);
        assert!(hermiticity_error(h.data()) <= 1e-12);
    }

    #[test]
    fn two_qubit_hand_assembly() {
        let p = SystemParams { omega_r: 1.0, delta: 0.2, g: 0.3, ..SystemParams::default() };
        let n = 2;
        let h = two_qubit_hamiltonian(&p, n, [0.7, 0.4]).unwrap();
        let i2 = identity(2);
        let id_n = identity(n);
        let x = &destroy(n) + &create(n);
        let mut want = kron(&kron(&i2, &i2), &number(n));
        for (j, amp) in [0.7, 0.4].into_iter().enumerate() {
            let q = &sigma_z().scale_re(-0.1) + &sigma_x().scale_re(amp / 2.0);
            let (a, b) = if j == 0 { (q, i2.clone()) } else { (i2.clone(), q) };
            want = &want + &kron(&kron(&a, &b), &id_n);
            let (za, zb) = if j == 0 { (sigma_z(), i2.clone()) } else { (i2.clone(), sigma_z()) };
            want = &want + &kron(&kron(&za, &zb), &x).scale_re(-0.3);
        }
        assert!(max_abs(&(h.data() - want.data())) < 1e-15);
    }

    #[test]
    fn rwa_conserves_excitations() {
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        let n = 6;
        let h = rwa_hamiltonian(&p, n).unwrap();
        let ne = excitation_number(n);
        assert!(h.commutator(&ne).max_abs() <= 1e-12);
    }

    #[test]
    fn rwa_single_excitation_splitting() {
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        let h = rwa_hamiltonian(&p, 3).unwrap();
        // |up,0> is index 0, |down,1> is index 4
        let mut b = Array2::<C64>::zeros((2, 2));
        for (r, i) in [0usize, 4].iter().enumerate() {
            for (s, j) in [0usize, 4].iter().enumerate() {
                b[[r, s]] = h.data()[[*i, *j]];
            }
        }
        let w = b.eigvalsh(UPLO::Lower).unwrap();
        let want = (p.delta_r().powi(2) + 4.0 * p.g * p.g).sqrt();
        assert_abs_diff_eq!(w[1] - w[0], want, epsilon = 1e-12);
        let mut p0 = p.clone();
        p0.g = 0.0;
        let h0 = rwa_hamiltonian(&p0, 3).unwrap();
        let diag = Array2::from_diag(&h0.data().diag().to_owned());
        assert_eq!(max_abs(&(h0.data() - &diag)), 0.0);
    }

    #[test]
    fn dressed_matches_rwa_after_rotation() {
        // within the rotating-wave truncation the dressed model and the RWA model
        // share every excitation block spectrum
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        let n = 5;
        let hd = rotate_to_logical(&dressed_hamiltonian(&p, n, p.omega_r).unwrap(), 1).unwrap();
        let l = qubit_oscillator_layout(n);
        // keep only number-conserving couplings
        let ne = excitation_number(n);
        let mut kept = hd.data().clone();
        for i in 0..2 * n {
            for j in 0..2 * n {
                if (ne.data()[[i, i]].re - ne.data()[[j, j]].re).abs() > 0.5 {
                    kept[[i, j]] = C64::new(0.0, 0.0);
                }
            }
        }
        let kept = Operator::new(l, kept).unwrap();
        let a = eigvals(&kept);
        let b = eigvals(&rwa_hamiltonian(&p, n).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn effective_exchange_and_shift() {
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        let h = effective_hamiltonian(&p, 2, 2).unwrap();
        // logical |1,0,n=0> (index 2) couples to |0,1,n=0> (index 4)
        assert_abs_diff_eq!(h.data()[[2, 4]].re, 5e-4, epsilon = 1e-15);
        let h1 = effective_hamiltonian(&p, 3, 1).unwrap();
        // oscillator splitting with the qubit in |1> and in |0>
        let up = h1.data()[[1, 1]].re - h1.data()[[0, 0]].re;
        let dn = h1.data()[[4, 4]].re - h1.data()[[3, 3]].re;
        assert_abs_diff_eq!(up, 1.0 + 5e-4, epsilon = 1e-14);
        assert_abs_diff_eq!(dn, 1.0 - 5e-4, epsilon = 1e-14);
        let mut p0 = p.clone();
        p0.g = 0.0;
        let h0 = effective_hamiltonian(&p0, 2, 2).unwrap();
        let diag = Array2::from_diag(&h0.data().diag().to_owned());
        assert_eq!(max_abs(&(h0.data() - &diag)), 0.0);
    }

    #[test]
    fn lindblad_rates() {
        let p = SystemParams::dressed(0.05, 5e-3, 1e-4, 1e-4, 2.0);
        let n = 4;
        let set = lindblad_set(&p, n, 1, ModelKind::Dressed).unwrap();
        let labels: Vec<&str> = set.iter().map(|j| j.label.as_str()).collect();
        assert_eq!(labels, vec!["q1-", "h-", "h+"]);
        // <0|a|1> = 1 scaled by the rate
        let a = &set.jumps[1].op;
        assert_abs_diff_eq!(a.data()[[0, 1]].re, 3e-4f64.sqrt(), epsilon = 1e-15);
        let ad = &set.jumps[2].op;
        assert_abs_diff_eq!(ad.data()[[1, 0]].re, 2e-4f64.sqrt(), epsilon = 1e-15);
        let sm = &set.jumps[0].op;
        assert_abs_diff_eq!(sm.data()[[n, 0]].re, 1e-4f64.sqrt(), epsilon = 1e-15);

        let cold = SystemParams::dressed(0.05, 5e-3, 1e-4, 1e-4, 0.0);
        let set = lindblad_set(&cold, n, 2, ModelKind::Dressed).unwrap();
        assert!(set.iter().all(|j| !j.label.ends_with('+')));
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn bare_qubit_bath_is_thermal() {
        let p = SystemParams::bare(1.05, 5e-3, 1e-4, 1e-4, 4.0);
        let t = temperature_from_occupation(1.0, 4.0);
        assert_abs_diff_eq!(p.n_th_q, bose_einstein(1.05, t), epsilon = 1e-12);
        let set = lindblad_set(&p, 4, 1, ModelKind::Bare).unwrap();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn pulse_examples() {
        let t_int = 1570.0;
        let rect = Pulse::new(1.05, 0.0, t_int).unwrap();
        assert_eq!(rect.amplitude(100.0), 1.05);
        assert_eq!(rect.amplitude(-1.0), 0.0);
        let p = Pulse::new(1.05, 10.0, t_int).unwrap();
        assert_abs_diff_eq!(p.amplitude(t_int / 2.0), 1.05, epsilon = 1e-12);
        assert_abs_diff_eq!(p.amplitude(0.0), 1.05 / 2.0, epsilon = 1e-12);
        assert!(Pulse::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn pulse_area_matches_quadrature() {
        let p = Pulse::new(1.05, 80.0, 500.0).unwrap();
        let n = 200_000;
        let h = 400.0 / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            let t = (k as f64 + 0.5) * h;
            s += p.amplitude(t) * h;
        }
        assert_abs_diff_eq!(p.area(400.0), s, epsilon = 1e-6);
        let r = Pulse::new(2.0, 0.0, 10.0).unwrap();
        assert_eq!(r.area(4.0), 8.0);
    }

    #[test]
    fn dispersive_shift_values() {
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        assert_abs_diff_eq!(dispersive_shift(&p).unwrap(), 5e-4, epsilon = 1e-18);
        let mut n = p.clone();
        n.set_delta_r(-0.05);
        assert_abs_diff_eq!(dispersive_shift(&n).unwrap(), -5e-4, epsilon = 1e-18);
        let mut z = p.clone();
        z.g = 0.0;
        assert_eq!(dispersive_shift(&z).unwrap(), 0.0);
        let mut s = p.clone();
        s.set_delta_r(0.0);
        assert!(matches!(dispersive_shift(&s), Err(Error::SingularDetuning)));
    }

    #[test]
    fn derived_times() {
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        assert_abs_diff_eq!(interaction_time(&p).unwrap(), 500.0 * PI, epsilon = 1e-9);
        assert_abs_diff_eq!(cutoff_time(&p).unwrap(), 40.0 * PI * 0.05 / 2.5e-5, epsilon = 1e-6);
        assert_abs_diff_eq!(phase_condition_cycles(&p).unwrap(), 13.0, epsilon = 1e-12);
    }

    #[test]
    fn sw_frame_dresses_eigenstates() {
        // S|1,0> is much closer to an eigenvector of H than |1,0> itself; the
        // remainder comes from the counter-rotating terms
        let p = SystemParams::dressed(0.05, 5e-3, 0.0, 0.0, 0.0);
        let n = 4;
        let h = dressed_hamiltonian(&p, n, p.omega_r).unwrap();
        let s = schrieffer_wolff(&p, n, 1).unwrap();
        assert!(max_abs(&(s.data().dot(&dagger(s.data())) - Array2::<C64>::eye(2 * n))) < 1e-12);
        let psi = hilbert::kron_vec(&logical_state(1), &hilbert::basis(n, 0));
        let resid = |v: &Array1<C64>| {
            let hv = h.data().dot(v);
            let e = v.iter().zip(hv.iter()).map(|(a, b)| a.conj() * b).sum::<C64>();
            (&hv - &(v * e)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
        };
        let bare = resid(&psi);
        let dressed = resid(&s.data().dot(&psi));
        assert!(dressed < 0.2 * bare, "bare {bare:.3e} dressed {dressed:.3e}");
    }

    #[test]
    fn logical_frame_is_unitary_and_diagonalizes_drive() {
        let w = logical_frame(2);
        assert!(max_abs(&(dagger(&w).dot(&w) - Array2::<C64>::eye(4))) < 1e-15);
        let x = dagger(&logical_frame(1)).dot(sigma_x().data()).dot(&logical_frame(1));
        assert_abs_diff_eq!(x[[0, 0]].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[[1, 1]].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[[0, 1]].norm(), 0.0, epsilon = 1e-15);
    }
}
