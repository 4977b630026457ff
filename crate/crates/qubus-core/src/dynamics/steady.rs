use ndarray::{Array1, Array2};
use ndarray_linalg::{Solve, SVD};

use crate::error::{Error, Result};
use crate::hilbert::{hermitize, max_abs, min_eigenvalue, Operator, C64, ONE};
use crate::models::{LindbladSet, SystemParams};

use super::liouvillian::{qme_rhs, unvec, Liouvillian};
use super::modal::{ModalPropagator, Strategy, FULL_EIG_MAX};

/// Required ratio between the two smallest singular values of `L`.
pub const UNIQUENESS_RATIO: f64 = 1e3;
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: Array2<C64>,
    /// `max |L rho|` evaluated directly on matrices.
    pub residual: f64,
    /// Second-smallest over smallest singular value (or eigenvalue magnitude).
    pub gap_ratio: f64,
    pub min_eigenvalue: f64,
    pub dense: bool,
}

/// Fixed point of the master equation.
///
/// Dense path: replace the first row of `L` by the trace functional and
/// solve. Beyond the dense size limit the zero mode of the secular
/// generator is used, whose residual is bounded by the secular error
/// instead of [`RESIDUAL_TOL`].
pub fn steady_state(h: &Operator, ls: &LindbladSet) -> Result<SteadyState> {
    if ls.is_empty() {
        return Err(Error::NonUniqueSteadyState { ratio: 1.0 });
    }
    let d = h.dim();
    if d * d <= FULL_EIG_MAX {
        dense(h, ls)
    } else {
        secular(h, ls)
    }
}

fn dense(h: &Operator, ls: &LindbladSet) -> Result<SteadyState> {
    let d = h.dim();
    let l = Liouvillian::build(h, ls)?;
    let m = l.matrix();
    let (_, s, _) = m.svd(false, false)?;
    let n = s.len();
    let ratio = s[n - 2] / s[n - 1].max(f64::MIN_POSITIVE);
    if !(ratio > UNIQUENESS_RATIO) {
        return Err(Error::NonUniqueSteadyState { ratio });
    }
    let mut a = m.clone();
    for c in 0..d * d {
        a[[0, c]] = C64::new(0.0, 0.0);
    }
    for k in 0..d {
        a[[0, k + k * d]] = ONE;
    }
    let mut b = Array1::<C64>::zeros(d * d);
    b[0] = ONE;
    let x = a.solve(&b)?;
    finish(h, ls, hermitize(&unvec(&x, d)), ratio, true)
}

fn secular(h: &Operator, ls: &LindbladSet) -> Result<SteadyState> {
    let d = h.dim();
    let id = Array2::<C64>::eye(d);
    let prop = ModalPropagator::new(h, ls, Strategy::Secular, &[&id])?;
    let (rho, l0, l1) = prop.zero_mode()?;
    let ratio = l1 / l0.max(f64::MIN_POSITIVE);
    if !(ratio > UNIQUENESS_RATIO) {
        return Err(Error::NonUniqueSteadyState { ratio });
    }
    finish(h, ls, hermitize(&rho), ratio, false)
}

fn finish(h: &Operator, ls: &LindbladSet, rho: Array2<C64>, ratio: f64, dense: bool) -> Result<SteadyState> {
    let residual = max_abs(&qme_rhs(h.data(), ls, &rho));
    if dense && !(residual <= RESIDUAL_TOL) {
        return Err(Error::Numerical(format!("steady-state residual {residual:.2e} above {RESIDUAL_TOL:.0e}")));
    }
    let min_eig = min_eigenvalue(&rho)?;
    if min_eig < -1e-6 {
        return Err(Error::Numerical(format!("steady state not positive (min eigenvalue {min_eig:.2e})")));
    }
    Ok(SteadyState { rho, residual, gap_ratio: ratio, min_eigenvalue: min_eig, dense })
}

/// Dispersive weak-damping closed form for the dressed qubit with the
/// oscillator near its ground state. Populations refer to
/// `|1,0>, |0,0>, |0,1>` in the dressed basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormSteady {
    pub rho_11: f64,
    pub rho_22: f64,
    pub rho_33: f64,
    pub rho_13: f64,
    pub sigma_z: f64,
    pub gamma_tilde: f64,
}

pub fn steady_state_closed_form(p: &SystemParams) -> (ClosedFormSteady, Vec<String>) {
    let dr = p.delta_r();
    let (gq, gh, g) = (p.gamma_q, p.gamma_h, p.g);
    let mut warn = Vec::new();
    if dr == 0.0 || g.abs() >= 0.1 * dr.abs() * 1.000_001 {
        warn.push(format!("g/|Delta_R| = {:.3} is not dispersive", g.abs() / dr.abs()));
    }
    if gq.max(gh) > 0.02 * g.abs() && g != 0.0 {
        warn.push("damping is not small compared to g".into());
    }
    if g == 0.0 {
        let gt = if 5.0 * gq + 4.0 * gh > 0.0 { 16.0 * gq * gh / (5.0 * gq + 4.0 * gh) } else { 0.0 };
        let c = ClosedFormSteady { rho_11: 0.5, rho_22: 0.5, rho_33: 0.0, rho_13: 0.0, sigma_z: 0.0, gamma_tilde: gt };
        return (c, warn);
    }
    let gt = 16.0 * gq * gh / (5.0 * gq + 4.0 * gh);
    let r = g * g / (dr * dr);
    let c = ClosedFormSteady {
        rho_11: 0.5 - (gq + 4.0 * gh) / gt * r,
        rho_22: 0.5 + (4.0 * gh - gq) / gt * r,
        rho_33: 2.0 * gq / gt * r,
        rho_13: g / (2.0 * dr),
        sigma_z: -2.0 * (gq + 4.0 * gh) / gt * r,
        gamma_tilde: gt,
    };
    (c, warn)
}
