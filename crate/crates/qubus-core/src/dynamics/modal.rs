//! Eigenmode propagation of time-independent Lindblad generators.
//!
//! Small problems diagonalize the full `D^2 x D^2` Liouvillian. Larger ones
//! work in the eigenbasis of `H`, group the density-matrix entries
//! `(m, n)` into clusters of nearly equal Bohr frequency `E_m - E_n`, and
//! diagonalize the generator restricted to each cluster. Couplings between
//! clusters oscillate at the cluster separation and are dropped; the
//! resulting error scales as (damping rate) / (cluster gap). Only clusters
//! that carry weight in the requested initial matrices are diagonalized.

use ndarray::{Array1, Array2, OwnedRepr};
use ndarray_linalg::{Eig, Factorize, LUFactorized, Solve};

use crate::error::{Error, Result};
use crate::hilbert::{dagger, eigh, Operator, C64, I, ZERO};
use crate::models::LindbladSet;

use super::liouvillian::Liouvillian;

/// Largest `D^2` diagonalized as a whole.
pub const FULL_EIG_MAX: usize = 1600;
/// Minimum Bohr-frequency gap separating secular clusters.
pub const SECULAR_GAP: f64 = 0.25;
/// Largest cluster the secular path will diagonalize.
pub const SECULAR_MAX_BLOCK: usize = 3000;
/// Relative amplitude below which a cluster is treated as empty.
pub const BLOCK_WEIGHT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Auto,
    Full,
    Secular,
}

struct Block {
    pairs: Vec<(usize, usize)>,
    lambda: Array1<C64>,
    /// Right eigenvectors; `None` means the block generator is diagonal.
    v: Option<Array2<C64>>,
    lu: Option<LUFactorized<OwnedRepr<C64>>>,
}

pub struct ModalPropagator {
    d: usize,
    basis: Option<Array2<C64>>,
    blocks: Vec<Block>,
    /// `pair_block[m + n*d]` = (block, position) when the entry is covered.
    pair_block: Vec<Option<(usize, usize)>>,
    secular: bool,
}

pub struct Expansion {
    coeffs: Vec<Option<Array1<C64>>>,
}

/// Modal content of `Tr[O rho(t)] = sum_k w_k exp(lambda_k t)`.
#[derive(Clone, Debug, Default)]
pub struct Modes {
    pub lambda: Vec<C64>,
    pub weight: Vec<C64>,
}

impl Modes {
    pub fn eval(&self, t: f64) -> C64 {
        self.lambda.iter().zip(&self.weight).map(|(l, w)| w * (l * t).exp()).sum()
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// Drops modes whose weight is below `rel` times the total absolute weight.
    pub fn pruned(&self, rel: f64) -> Modes {
        let total: f64 = self.weight.iter().map(|w| w.norm()).sum();
        let mut out = Modes::default();
        for (l, w) in self.lambda.iter().zip(&self.weight) {
            if w.norm() > rel * total {
                out.lambda.push(*l);
                out.weight.push(*w);
            }
        }
        out
    }

    pub fn max_frequency(&self) -> f64 {
        self.lambda.iter().fold(0.0, |a, l| a.max(l.im.abs()))
    }
}

impl ModalPropagator {
    /// Prepares a propagator able to expand every matrix in `inputs`.
    pub fn new(h: &Operator, ls: &LindbladSet, strategy: Strategy, inputs: &[&Array2<C64>]) -> Result<Self> {
        let d = h.dim();
        if ls.is_empty() {
            return Self::unitary(h);
        }
        let full = match strategy {
            Strategy::Full => true,
            Strategy::Secular => false,
            Strategy::Auto => d * d <= FULL_EIG_MAX,
        };
        if full {
            Self::full(h, ls)
        } else {
            Self::secular(h, ls, inputs)
        }
    }

    pub fn is_secular(&self) -> bool {
        self.secular
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of eigenmodes held across all prepared blocks.
    pub fn mode_count(&self) -> usize {
        self.blocks.iter().map(|b| b.lambda.len()).sum()
    }

    fn full(h: &Operator, ls: &LindbladSet) -> Result<Self> {
        let d = h.dim();
        let l = Liouvillian::build(h, ls)?;
        let (lambda, v) = l.matrix().eig()?;
        let lu = v.factorize()?;
        let pairs: Vec<(usize, usize)> = (0..d * d).map(|i| (i % d, i / d)).collect();
        let pair_block = (0..d * d).map(|i| Some((0, i))).collect();
        Ok(Self {
            d,
            basis: None,
            blocks: vec![Block { pairs, lambda, v: Some(v), lu: Some(lu) }],
            pair_block,
            secular: false,
        })
    }

    fn unitary(h: &Operator) -> Result<Self> {
        let d = h.dim();
        let (e, u) = eigh(h.data())?;
        let pairs: Vec<(usize, usize)> = (0..d * d).map(|i| (i % d, i / d)).collect();
        let lambda = pairs.iter().map(|&(m, n)| -I * (e[m] - e[n])).collect();
        let pair_block = (0..d * d).map(|i| Some((0, i))).collect();
        Ok(Self {
            d,
            basis: Some(u),
            blocks: vec![Block { pairs, lambda, v: None, lu: None }],
            pair_block,
            secular: false,
        })
    }

    fn secular(h: &Operator, ls: &LindbladSet, inputs: &[&Array2<C64>]) -> Result<Self> {
        let d = h.dim();
        let (e, u) = eigh(h.data())?;
        let ud = dagger(&u);
        let jumps: Vec<Array2<C64>> = ls.iter().map(|j| ud.dot(j.op.data()).dot(&u)).collect();
        let mut k = Array2::<C64>::zeros((d, d));
        for j in &jumps {
            k = k + dagger(j).dot(j);
        }

        let mut order: Vec<(f64, usize, usize)> = Vec::with_capacity(d * d);
        for n in 0..d {
            for m in 0..d {
                order.push((e[m] - e[n], m, n));
            }
        }
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut clusters: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for &(w, m, n) in &order {
            if w - last > SECULAR_GAP || clusters.is_empty() {
                clusters.push(Vec::new());
            }
            clusters.last_mut().unwrap().push((m, n));
            last = w;
        }

        let rotated: Vec<Array2<C64>> = inputs.iter().map(|x| ud.dot(*x).dot(&u)).collect();
        let mut blocks = Vec::new();
        let mut pair_block = vec![None; d * d];
        for pairs in clusters {
            let needed = rotated.iter().any(|x| {
                let total: f64 = x.iter().map(|z| z.norm_sqr()).sum();
                let w: f64 = pairs.iter().map(|&(m, n)| x[[m, n]].norm_sqr()).sum();
                w > BLOCK_WEIGHT_TOL * BLOCK_WEIGHT_TOL * total && w > 0.0
            });
            if !needed {
                continue;
            }
            if pairs.len() > SECULAR_MAX_BLOCK {
                return Err(Error::Unsupported(format!(
                    "secular cluster of {} entries exceeds the limit {SECULAR_MAX_BLOCK}",
                    pairs.len()
                )));
            }
            let sub = cluster_generator(&pairs, &e, &jumps, &k);
            let (lambda, v) = sub.eig()?;
            let lu = v.factorize()?;
            let b = blocks.len();
            for (pos, &(m, n)) in pairs.iter().enumerate() {
                pair_block[m + n * d] = Some((b, pos));
            }
            blocks.push(Block { pairs, lambda, v: Some(v), lu: Some(lu) });
        }
        Ok(Self { d, basis: Some(u), blocks, pair_block, secular: true })
    }

    fn to_basis(&self, x: &Array2<C64>) -> Array2<C64> {
        match &self.basis {
            Some(u) => dagger(u).dot(x).dot(u),
            None => x.clone(),
        }
    }

    fn from_basis(&self, x: Array2<C64>) -> Array2<C64> {
        match &self.basis {
            Some(u) => u.dot(&x).dot(&dagger(u)),
            None => x,
        }
    }

    pub fn expand(&self, rho0: &Array2<C64>) -> Result<Expansion> {
        if rho0.dim() != (self.d, self.d) {
            return Err(Error::Layout("initial matrix does not match the propagator".into()));
        }
        let x = self.to_basis(rho0);
        let total: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut dropped = 0.0;
        for n in 0..self.d {
            for m in 0..self.d {
                if self.pair_block[m + n * self.d].is_none() {
                    dropped += x[[m, n]].norm_sqr();
                }
            }
        }
        if dropped.sqrt() > 1e-9 * total.max(1e-300) {
            return Err(Error::Numerical(format!(
                "initial matrix has weight {:.2e} outside the prepared secular blocks",
                dropped.sqrt()
            )));
        }
        let mut coeffs = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let xb: Array1<C64> = b.pairs.iter().map(|&(m, n)| x[[m, n]]).collect();
            let norm = xb.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                coeffs.push(None);
                continue;
            }
            let c = match (&b.v, &b.lu) {
                (Some(v), Some(lu)) => {
                    let c = lu.solve(&xb)?;
                    let resid = (v.dot(&c) - &xb).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if !(resid <= 1e-8 * norm) {
                        return Err(Error::Numerical(format!(
                            "ill-conditioned eigenbasis (reconstruction residual {resid:.2e})"
                        )));
                    }
                    c
                }
                _ => xb,
            };
            coeffs.push(Some(c));
        }
        Ok(Expansion { coeffs })
    }

    pub fn state(&self, e: &Expansion, t: f64) -> Array2<C64> {
        let d = self.d;
        let mut x = Array2::<C64>::zeros((d, d));
        for (b, c) in self.blocks.iter().zip(&e.coeffs) {
            let Some(c) = c else { continue };
            let ct: Array1<C64> = c.iter().zip(b.lambda.iter()).map(|(ck, l)| ck * (l * t).exp()).collect();
            let y = match &b.v {
                Some(v) => v.dot(&ct),
                None => ct,
            };
            for (&(m, n), val) in b.pairs.iter().zip(y.iter()) {
                x[[m, n]] = *val;
            }
        }
        self.from_basis(x)
    }

    /// Eigenmodes of `Tr[obs rho(t)]`.
    pub fn modes(&self, e: &Expansion, obs: &Array2<C64>) -> Modes {
        let o = self.to_basis(obs);
        let mut out = Modes::default();
        for (b, c) in self.blocks.iter().zip(&e.coeffs) {
            let Some(c) = c else { continue };
            // Tr[O rho] = sum_{m,n} O_nm rho_mn
            let row: Array1<C64> = b.pairs.iter().map(|&(m, n)| o[[n, m]]).collect();
            let proj = match &b.v {
                Some(v) => row.dot(v),
                None => row,
            };
            for k in 0..c.len() {
                let w = proj[k] * c[k];
                if w != ZERO {
                    out.lambda.push(b.lambda[k]);
                    out.weight.push(w);
                }
            }
        }
        out
    }

    /// Eigenvalue of smallest magnitude with its state, normalized to unit
    /// trace, and the next-smallest magnitude for a uniqueness check.
    pub fn zero_mode(&self) -> Result<(Array2<C64>, f64, f64)> {
        let d = self.d;
        let mut best: Option<(usize, usize, f64)> = None;
        let mut mags: Vec<f64> = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (k, l) in b.lambda.iter().enumerate() {
                mags.push(l.norm());
                if best.is_none_or(|(_, _, m)| l.norm() < m) {
                    best = Some((bi, k, l.norm()));
                }
            }
        }
        let (bi, k, m0) = best.ok_or_else(|| Error::Numerical("no eigenmodes prepared".into()))?;
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let second = mags.get(1).copied().unwrap_or(f64::INFINITY);
        let b = &self.blocks[bi];
        let v = b.v.as_ref().ok_or_else(|| Error::Numerical("generator has no dissipation".into()))?;
        let mut x = Array2::<C64>::zeros((d, d));
        for (&(m, n), val) in b.pairs.iter().zip(v.column(k).iter()) {
            x[[m, n]] = *val;
        }
        let x = self.from_basis(x);
        let tr = x.diag().sum();
        if tr.norm() < 1e-300 {
            return Err(Error::Numerical("zero mode is traceless".into()));
        }
        Ok((x / tr, m0, second))
    }
}

/// Generator restricted to one cluster of `(m, n)` entries in the `H` eigenbasis.
fn cluster_generator(pairs: &[(usize, usize)], e: &Array1<f64>, jumps: &[Array2<C64>], k: &Array2<C64>) -> Array2<C64> {
    let n = pairs.len();
    let mut g = Array2::<C64>::zeros((n, n));
    for (p, &(m, nn)) in pairs.iter().enumerate() {
        g[[p, p]] += -I * (e[m] - e[nn]);
        for (q, &(kk, l)) in pairs.iter().enumerate() {
            let mut s = ZERO;
            for j in jumps {
                s += j[[m, kk]] * j[[nn, l]].conj();
            }
            if nn == l {
                s -= k[[m, kk]] * 0.5;
            }
            if m == kk {
                s -= k[[l, nn]] * 0.5;
            }
            g[[p, q]] += s;
        }
    }
    g
}
