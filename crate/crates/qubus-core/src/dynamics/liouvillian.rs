//! Column-stacked Liouvillian superoperator.
//!
//! `vec(rho)[m + n*D] = rho[m, n]`, so that
//! `L = -i(I (x) H - H^T (x) I) + sum_k [conj(L_k) (x) L_k - (I (x) L_k^dag L_k + (L_k^dag L_k)^T (x) I)/2]`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::hilbert::{dagger, Operator, C64, I, ZERO};
use crate::models::LindbladSet;

#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    matrix: Array2<C64>,
}

impl Liouvillian {
    pub fn build(h: &Operator, ls: &LindbladSet) -> Result<Self> {
        for j in ls.iter() {
            if j.op.layout() != h.layout() {
                return Err(Error::Layout(format!(
                    "jump operator {} layout {:?} differs from Hamiltonian layout {:?}",
                    j.label,
                    j.op.layout().dims(),
                    h.layout().dims()
                )));
            }
        }
        let d = h.dim();
        let hm = h.data();
        let mut m = Array2::<C64>::zeros((d * d, d * d));
        // -i (H rho - rho H): entry ((m,n),(k,l)) = -i (H_mk d_ln - d_mk H_ln)
        for n in 0..d {
            for mm in 0..d {
                let row = mm + n * d;
                for k in 0..d {
                    let v = hm[[mm, k]];
                    if v != ZERO {
                        m[[row, k + n * d]] += -I * v;
                    }
                }
                for l in 0..d {
                    let v = hm[[l, n]];
                    if v != ZERO {
                        m[[row, mm + l * d]] += I * v;
                    }
                }
            }
        }
        for jump in ls.iter() {
            let lm = jump.op.data();
            let ldl = dagger(lm).dot(lm);
            let nz: Vec<(usize, usize, C64)> = nonzeros(lm);
            // L rho L^dag: entry ((m,n),(k,l)) = L_mk conj(L_nl)
            for &(mm, k, a) in &nz {
                for &(n, l, b) in &nz {
                    m[[mm + n * d, k + l * d]] += a * b.conj();
                }
            }
            for n in 0..d {
                for mm in 0..d {
                    let row = mm + n * d;
                    for k in 0..d {
                        let v = ldl[[mm, k]];
                        if v != ZERO {
                            m[[row, k + n * d]] -= v * 0.5;
                        }
                    }
                    for l in 0..d {
                        let v = ldl[[l, n]];
                        if v != ZERO {
                            m[[row, mm + l * d]] -= v * 0.5;
                        }
                    }
                }
            }
        }
        Ok(Self { dim: d, matrix: m })
    }

    /// Hilbert-space dimension `D`; the superoperator is `D^2 x D^2`.
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn apply(&self, rho: &Array2<C64>) -> Array2<C64> {
        unvec(&self.matrix.dot(&vec_of(rho)), self.dim)
    }

    /// Largest entry of `t L` where `t` is the trace functional.
    pub fn trace_leak(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let mut s = ZERO;
            for k in 0..d {
                s += self.matrix[[k + k * d, col]];
            }
            worst = worst.max(s.norm());
        }
        worst
    }
}

pub(crate) fn nonzeros(m: &Array2<C64>) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for ((i, j), &v) in m.indexed_iter() {
        if v != ZERO {
            out.push((i, j, v));
        }
    }
    out
}

pub fn vec_of(rho: &Array2<C64>) -> Array1<C64> {
    let d = rho.nrows();
    let mut v = Array1::<C64>::zeros(d * d);
    for n in 0..d {
        for m in 0..d {
            v[m + n * d] = rho[[m, n]];
        }
    }
    v
}

pub fn unvec(v: &Array1<C64>, d: usize) -> Array2<C64> {
    let mut rho = Array2::<C64>::zeros((d, d));
    for n in 0..d {
        for m in 0..d {
            rho[[m, n]] = v[m + n * d];
        }
    }
    rho
}

/// Right-hand side of the master equation evaluated directly on matrices.
pub fn qme_rhs(h: &Array2<C64>, ls: &LindbladSet, rho: &Array2<C64>) -> Array2<C64> {
    let mut out = (h.dot(rho) - rho.dot(h)) * (-I);
    for j in ls.iter() {
        let l = j.op.data();
        let ld = dagger(l);
        let ldl = ld.dot(l);
        out = out + l.dot(rho).dot(&ld) - (ldl.dot(rho) + rho.dot(&ldl)) * C64::new(0.5, 0.0);
    }
    out
}
