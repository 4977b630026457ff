//! Two-time symmetrized correlators by the regression theorem.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::hilbert::{Operator, C64};
use crate::models::LindbladSet;

use super::modal::{ModalPropagator, Modes, Strategy};
use super::steady::steady_state;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CorrelatorMode {
    /// Start from the supplied state.
    #[default]
    Transient,
    /// Start from the steady state of the same generator.
    Steady,
}

/// Modal form of `C(t) = Tr[x rho~(t)] / 2` with `rho~(0) = {x, rho0}`.
pub fn regression_modes(
    h: &Operator,
    ls: &LindbladSet,
    rho0: &Array2<C64>,
    x: &Operator,
    mode: CorrelatorMode,
    strategy: Strategy,
) -> Result<Modes> {
    let start = match mode {
        CorrelatorMode::Transient => rho0.clone(),
        CorrelatorMode::Steady => steady_state(h, ls)?.rho,
    };
    let xm = x.data();
    let seed = xm.dot(&start) + start.dot(xm);
    let prop = ModalPropagator::new(h, ls, strategy, &[&seed])?;
    let e = prop.expand(&seed)?;
    let mut m = prop.modes(&e, xm);
    for w in m.weight.iter_mut() {
        *w *= 0.5;
    }
    Ok(m)
}

/// Real part of the correlator on an arbitrary grid.
pub fn regression_correlator(
    h: &Operator,
    ls: &LindbladSet,
    rho0: &Array2<C64>,
    x: &Operator,
    times: &[f64],
    mode: CorrelatorMode,
) -> Result<Vec<f64>> {
    let m = regression_modes(h, ls, rho0, x, mode, Strategy::Auto)?;
    Ok(times.iter().map(|&t| m.eval(t).re).collect())
}

const RESYNC: usize = 512;

/// `Re sum_k w_k exp(lambda_k j dt)` for `j = 0..n`, by recurrence with an
/// exact restart every few hundred samples.
pub fn sample_uniform(m: &Modes, dt: f64, n: usize) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Argument(format!("sample step must be positive, got {dt}")));
    }
    let step: Vec<C64> = m.lambda.iter().map(|l| (l * dt).exp()).collect();
    let mut out: Vec<f64> = Vec::with_capacity(n);
    let mut z: Vec<C64> = m.weight.clone();
    for j in 0..n {
        if j % RESYNC == 0 && j > 0 {
            let t = j as f64 * dt;
            for (k, zk) in z.iter_mut().enumerate() {
                *zk = m.weight[k] * (m.lambda[k] * t).exp();
            }
        }
        out.push(z.iter().map(|v| v.re).sum());
        for (zk, s) in z.iter_mut().zip(&step) {
            *zk *= s;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite correlator sample".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{
        destroy, embed, expm_hermitian, thermal_state_nth, create, SubsystemLayout,
    };
    use crate::models::{self, ModelKind, SystemParams};
    use crate::hilbert::{dagger, outer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn damped_vacuum_mode() {
        let n = 4;
        let gamma: f64 = 0.02;
        let l = SubsystemLayout::single(n);
        let h = crate::hilbert::number(n).with_layout(l.clone()).unwrap();
        let ls = LindbladSet {
            jumps: vec![models::Jump { label: "h-".into(), op: destroy(n).scale_re(gamma.sqrt()) }],
        };
        let x = &destroy(n) + &create(n);
        let rho0 = thermal_state_nth(0.0, n).unwrap();
        let times: Vec<f64> = (0..40).map(|k| 0.7 * k as f64).collect();
        let c = regression_correlator(&h, &ls, rho0.matrix(), &x, &times, CorrelatorMode::Transient).unwrap();
        for (t, v) in times.iter().zip(&c) {
            let want = t.cos() * (-gamma * t / 2.0).exp();
            assert!((v - want).abs() < 1e-10, "t = {t}");
        }
    }

    #[test]
    fn thermal_variance_at_zero() {
        let n = 40;
        let nth = 1.5;
        let x = &destroy(n) + &create(n);
        let h = crate::hilbert::number(n);
        let ls = LindbladSet {
            jumps: vec![
                models::Jump { label: "h-".into(), op: destroy(n).scale_re(((nth + 1.0) * 1e-3f64).sqrt()) },
                models::Jump { label: "h+".into(), op: create(n).scale_re((nth * 1e-3f64).sqrt()) },
            ],
        };
        let rho0 = thermal_state_nth(nth, n).unwrap();
        let c = regression_correlator(&h, &ls, rho0.matrix(), &x, &[0.0], CorrelatorMode::Transient).unwrap();
        let direct = crate::hilbert::expect(rho0.matrix(), &x.data().dot(x.data())).re;
        // truncation at N = 40 costs about N r^N with r = n/(n+1)
        assert!((direct - (2.0 * nth + 1.0)).abs() < 1e-6, "{direct}");
        assert!((c[0] - direct).abs() < 1e-9, "{}", c[0]);
    }

    #[test]
    fn unitary_case_matches_heisenberg_oracle() {
        let n = 4;
        let p = SystemParams::dressed(0.05, 0.05, 0.0, 0.0, 0.0);
        let h = models::dressed_hamiltonian(&p, n, p.omega_r).unwrap();
        let l = models::qubit_oscillator_layout(n);
        let x = embed(&(&destroy(n) + &create(n)), 1, &l).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi: ndarray::Array1<C64> = (0..2 * n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let nrm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let psi = psi / C64::new(nrm, 0.0);
        let rho = outer(&psi, &psi);
        let times = [0.0, 0.3, 2.0, 17.5];
        let c = regression_correlator(&h, &LindbladSet::empty(), &rho, &x, &times, CorrelatorMode::Transient).unwrap();
        for (&t, v) in times.iter().zip(&c) {
            let u = expm_hermitian(h.data(), t).unwrap();
            let xt = dagger(&u).dot(x.data()).dot(&u);
            let sym = xt.dot(x.data()) + x.data().dot(&xt);
            let want = 0.5 * crate::hilbert::expect(&rho, &sym).re;
            assert!((v - want).abs() < 1e-8, "t = {t}: {v} vs {want}");
        }
    }

    #[test]
    fn uniform_sampling_matches_direct_evaluation() {
        let p = SystemParams::dressed(0.05, 5e-3, 1e-4, 1e-4, 0.0);
        let n = 4;
        let h = models::dressed_hamiltonian(&p, n, p.omega_r).unwrap();
        let ls = models::lindblad_set(&p, n, 1, ModelKind::Dressed).unwrap();
        let l = models::qubit_oscillator_layout(n);
        let x = models::quadrature_observable(1, n).unwrap();
        let up = crate::hilbert::DensityMatrix::pure(&crate::hilbert::SubsystemLayout::single(2), &models::logical_state(1)).unwrap();
        let rho0 = up.kron(&thermal_state_nth(0.0, n).unwrap());
        assert_eq!(rho0.layout(), &l);
        let m = regression_modes(&h, &ls, rho0.matrix(), &x, CorrelatorMode::Transient, Strategy::Auto).unwrap();
        let s = sample_uniform(&m, 0.37, 3000).unwrap();
        for j in [0, 1, 511, 512, 513, 2999] {
            assert!((s[j] - m.eval(0.37 * j as f64).re).abs() < 1e-10);
        }
    }
}
