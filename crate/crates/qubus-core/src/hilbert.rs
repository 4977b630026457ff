//! Dense operator algebra on composite Hilbert spaces.
//!
//! Subsystems are ordered left to right in the tensor product, so the flat
//! index of `|i_0, i_1, ..., i_k>` is row-major in the digits `i_s`.

use std::ops::{Add, Mul, Sub};

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Thermal tail mass above which a truncation is rejected.
pub const TAIL_REJECT: f64 = 1e-6;
/// Tail mass targeted by the automatic truncation rule.
pub const TAIL_TARGET: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemLayout {
    dims: Vec<usize>,
}

impl SubsystemLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Layout("layout needs at least one subsystem".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Layout(format!("zero dimension in {dims:?}")));
        }
        Ok(Self { dims })
    }

    pub fn single(dim: usize) -> Self {
        Self { dims: vec![dim.max(1)] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims }
    }

    /// Row-major strides of the flat index.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut d = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            d[k] = index % self.dims[k];
            index /= self.dims[k];
        }
        d
    }

    pub fn sub(&self, slots: &[usize]) -> Result<Self> {
        let mut dims = Vec::with_capacity(slots.len());
        for &s in slots {
            dims.push(*self.dims.get(s).ok_or_else(|| {
                Error::Layout(format!("slot {s} out of range for {:?}", self.dims))
            })?);
        }
        Self::new(dims)
    }
}

#[derive(Clone, Debug)]
pub struct Operator {
    layout: SubsystemLayout,
    data: Array2<C64>,
}

impl Operator {
    pub fn new(layout: SubsystemLayout, data: Array2<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if data.dim() != (n, n) {
            return Err(Error::Layout(format!(
                "matrix shape {:?} does not match layout {:?}",
                data.dim(),
                layout.dims()
            )));
        }
        Ok(Self { layout, data })
    }

    /// Single-subsystem operator from a square matrix.
    pub fn from_matrix(data: Array2<C64>) -> Self {
        let n = data.nrows();
        assert_eq!(n, data.ncols(), "operator matrix must be square");
        Self { layout: SubsystemLayout::single(n), data }
    }

    pub fn identity(layout: &SubsystemLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), data: Array2::eye(n) }
    }

    pub fn zeros(layout: &SubsystemLayout) -> Self {
        let n = layout.total_dim();
        Self { layout: layout.clone(), data: Array2::zeros((n, n)) }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<C64> {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { layout: self.layout.clone(), data: dagger(&self.data) }
    }

    pub fn trace(&self) -> C64 {
        self.data.diag().sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.data)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { layout: self.layout.clone(), data: &self.data * s }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn with_layout(self, layout: SubsystemLayout) -> Result<Self> {
        Self::new(layout, self.data)
    }

    /// Commutator `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Operator {
        let d = self.data.dot(&other.data) - other.data.dot(&self.data);
        Operator { layout: self.layout.clone(), data: d }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn apply(&self, psi: &Array1<C64>) -> Array1<C64> {
        self.data.dot(psi)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.layout, rhs.layout, "layout mismatch in operator sum");
        Operator { layout: self.layout.clone(), data: &self.data + &rhs.data }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.layout, rhs.layout, "layout mismatch in operator difference");
        Operator { layout: self.layout.clone(), data: &self.data - &rhs.data }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.layout, rhs.layout, "layout mismatch in operator product");
        Operator { layout: self.layout.clone(), data: self.data.dot(&rhs.data) }
    }
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Checked construction: Hermitian to 1e-12, unit trace to 1e-10 and
    /// smallest eigenvalue above -1e-8.
    pub fn new(op: Operator) -> Result<Self> {
        let herm = op.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!("not Hermitian (error {herm:.2e})")));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let dm = Self { op };
        let lmin = dm.min_eigenvalue()?;
        if lmin < -1e-8 {
            return Err(Error::InvalidState(format!("negative eigenvalue {lmin:.3e}")));
        }
        Ok(dm)
    }

    /// Wraps a propagated state after symmetrizing away round-off
    /// anti-Hermitian parts. No positivity or trace check.
    pub fn from_evolved(layout: &SubsystemLayout, data: Array2<C64>) -> Result<Self> {
        let data = hermitize(&data);
        Ok(Self { op: Operator::new(layout.clone(), data)? })
    }

    pub fn pure(layout: &SubsystemLayout, psi: &Array1<C64>) -> Result<Self> {
        if psi.len() != layout.total_dim() {
            return Err(Error::Layout(format!(
                "state vector length {} does not match layout {:?}",
                psi.len(),
                layout.dims()
            )));
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        let data = outer(&v, &v);
        Self::new(Operator::new(layout.clone(), hermitize(&data))?)
    }

    pub fn maximally_mixed(layout: &SubsystemLayout) -> Self {
        let n = layout.total_dim();
        let data = Array2::<C64>::eye(n) / C64::new(n as f64, 0.0);
        Self { op: Operator { layout: layout.clone(), data } }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.op.data
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.op.layout
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> C64 {
        self.op.trace()
    }

    pub fn purity(&self) -> f64 {
        let d = &self.op.data;
        d.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expect(&self, o: &Operator) -> C64 {
        expect(&self.op.data, &o.data)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.op.data)
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { op: kron(&self.op, &other.op) }
    }
}

/// Tensor product with concatenated layout.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    Operator {
        layout: a.layout.concat(&b.layout),
        data: kron_mat(&a.data, &b.data),
    }
}

pub fn kron_all(ops: &[&Operator]) -> Operator {
    let mut it = ops.iter();
    let first = (*it.next().expect("kron_all needs at least one operator")).clone();
    it.fold(first, |acc, o| kron(&acc, o))
}

pub fn kron_mat(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &Array1<C64>, b: &Array1<C64>) -> Array1<C64> {
    let mut out = Array1::<C64>::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// Places `op` at `slot` with identities on every other subsystem.
pub fn embed(op: &Operator, slot: usize, layout: &SubsystemLayout) -> Result<Operator> {
    let dims = layout.dims();
    let d = *dims
        .get(slot)
        .ok_or_else(|| Error::Layout(format!("slot {slot} out of range for {dims:?}")))?;
    if op.dim() != d {
        return Err(Error::Layout(format!(
            "operator dimension {} does not match slot {slot} of {dims:?}",
            op.dim()
        )));
    }
    let left: usize = dims[..slot].iter().product();
    let right: usize = dims[slot + 1..].iter().product();
    let data = kron_mat(&kron_mat(&Array2::eye(left), &op.data), &Array2::eye(right));
    Ok(Operator { layout: layout.clone(), data })
}

/// Reduced matrix over `keep` (sorted, unique) for an arbitrary square matrix.
pub fn partial_trace_matrix(
    m: &Array2<C64>,
    layout: &SubsystemLayout,
    keep: &[usize],
) -> Result<(Array2<C64>, SubsystemLayout)> {
    if keep.is_empty() {
        return Err(Error::Argument("partial trace needs a nonempty keep set".into()));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let kept_layout = layout.sub(&keep)?;
    let traced: Vec<usize> = (0..layout.len()).filter(|s| !keep.contains(s)).collect();
    let n = layout.total_dim();
    if m.dim() != (n, n) {
        return Err(Error::Layout("matrix does not match layout".into()));
    }
    let dk = kept_layout.total_dim();
    let dt: usize = traced.iter().map(|&s| layout.dims()[s]).product();
    let kstr = kept_layout.strides();
    let tdims: Vec<usize> = traced.iter().map(|&s| layout.dims()[s]).collect();
    let tstr = SubsystemLayout { dims: if tdims.is_empty() { vec![1] } else { tdims } }.strides();
    // groups[t] lists (full index, kept index) sharing traced index t
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(dk); dt];
    for i in 0..n {
        let dig = layout.digits(i);
        let k: usize = keep.iter().zip(&kstr).map(|(&s, &st)| dig[s] * st).sum();
        let t: usize = traced.iter().zip(&tstr).map(|(&s, &st)| dig[s] * st).sum();
        groups[t].push((i, k));
    }
    let mut out = Array2::<C64>::zeros((dk, dk));
    for g in &groups {
        for &(i, ki) in g {
            for &(j, kj) in g {
                out[[ki, kj]] += m[[i, j]];
            }
        }
    }
    Ok((out, kept_layout))
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let (m, l) = partial_trace_matrix(rho.matrix(), rho.layout(), keep)?;
    Ok(DensityMatrix { op: Operator { layout: l, data: m } })
}

/// Partial transpose over every subsystem in `subsystems`.
pub fn partial_transpose_matrix(
    m: &Array2<C64>,
    layout: &SubsystemLayout,
    subsystems: &[usize],
) -> Result<Array2<C64>> {
    if let Some(&s) = subsystems.iter().find(|&&s| s >= layout.len()) {
        return Err(Error::Layout(format!("subsystem {s} out of range for {:?}", layout.dims())));
    }
    let n = layout.total_dim();
    let strides = layout.strides();
    let digits: Vec<Vec<usize>> = (0..n).map(|i| layout.digits(i)).collect();
    let mut out = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let (mut a, mut b) = (i, j);
            for &s in subsystems {
                let (di, dj) = (digits[i][s], digits[j][s]);
                a = a - di * strides[s] + dj * strides[s];
                b = b - dj * strides[s] + di * strides[s];
            }
            out[[a, b]] = m[[i, j]];
        }
    }
    Ok(out)
}

pub fn partial_transpose(rho: &DensityMatrix, subsystem: usize) -> Result<Operator> {
    let data = partial_transpose_matrix(rho.matrix(), rho.layout(), &[subsystem])?;
    Ok(Operator { layout: rho.layout().clone(), data })
}

/// Sum of singular values.
pub fn trace_norm(x: &Operator) -> Result<f64> {
    trace_norm_matrix(x.data())
}

pub fn trace_norm_matrix(x: &Array2<C64>) -> Result<f64> {
    let (_, s, _) = x.svd(false, false)?;
    Ok(s.sum())
}

/// Trace norm of a Hermitian matrix via its eigenvalues.
pub fn trace_norm_hermitian(x: &Array2<C64>) -> Result<f64> {
    let w = hermitize(x).eigvalsh(UPLO::Lower)?;
    Ok(w.iter().map(|v| v.abs()).sum())
}

pub fn min_eigenvalue(m: &Array2<C64>) -> Result<f64> {
    let w = hermitize(m).eigvalsh(UPLO::Lower)?;
    Ok(w.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// Geometric weight ratio e^{-omega/T} of consecutive Fock populations.
fn boltzmann_ratio(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        0.0
    } else {
        (-omega / temperature).exp()
    }
}

/// Population mass discarded when a thermal state is cut at `n` levels.
pub fn thermal_tail_mass(n_th: f64, n: usize) -> f64 {
    if n_th <= 0.0 {
        return 0.0;
    }
    let q = n_th / (n_th + 1.0);
    q.powi(n as i32)
}

/// Smallest truncation with tail mass below 1e-8 and three-fold head-room
/// over the largest expected occupation `n_th + 1`.
pub fn auto_truncation(n_th: f64) -> usize {
    let headroom = (3.0 * (n_th.max(0.0) + 1.0)).ceil() as usize + 1;
    let tail = if n_th <= 0.0 {
        1
    } else {
        let q = n_th / (n_th + 1.0);
        (TAIL_TARGET.ln() / q.ln()).ceil() as usize
    };
    headroom.max(tail).max(2)
}

/// Size used by the convergence gate rerun.
pub fn check_truncation(n: usize) -> usize {
    (n * 3).div_ceil(2)
}

/// Truncated Boltzmann state of an oscillator at frequency `omega`.
pub fn thermal_state(omega: f64, temperature: f64, n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::Argument("truncation must be at least 1".into()));
    }
    if temperature < 0.0 || !temperature.is_finite() {
        return Err(Error::Argument(format!("invalid temperature {temperature}")));
    }
    if omega <= 0.0 {
        return Err(Error::Argument(format!("oscillator frequency must be positive, got {omega}")));
    }
    let q = boltzmann_ratio(omega, temperature);
    let tail = q.powi(n as i32);
    if tail > TAIL_REJECT {
        return Err(Error::Truncation { n, tail });
    }
    let mut p: Vec<f64> = (0..n).map(|k| q.powi(k as i32)).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    let mut data = Array2::<C64>::zeros((n, n));
    for (k, &pk) in p.iter().enumerate() {
        data[[k, k]] = C64::new(pk, 0.0);
    }
    Ok(DensityMatrix { op: Operator { layout: SubsystemLayout::single(n), data } })
}

/// Thermal state parametrized by mean occupation, with unit oscillator frequency.
pub fn thermal_state_nth(n_th: f64, n: usize) -> Result<DensityMatrix> {
    if n_th < 0.0 {
        return Err(Error::Argument(format!("negative occupation {n_th}")));
    }
    let t = if n_th == 0.0 { 0.0 } else { 1.0 / (1.0 + 1.0 / n_th).ln() };
    thermal_state(1.0, t, n)
}

pub fn sigma_x() -> Operator {
    mat2([[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma_y() -> Operator {
    mat2([[ZERO, -I], [I, ZERO]])
}

/// Basis order is (up, down), so `sigma_z = diag(1, -1)`.
pub fn sigma_z() -> Operator {
    mat2([[ONE, ZERO], [ZERO, -ONE]])
}

/// Lowering operator `|down><up|`.
pub fn sigma_minus() -> Operator {
    mat2([[ZERO, ZERO], [ONE, ZERO]])
}

pub fn sigma_plus() -> Operator {
    mat2([[ZERO, ONE], [ZERO, ZERO]])
}

pub fn identity(n: usize) -> Operator {
    Operator::from_matrix(Array2::eye(n))
}

pub fn destroy(n: usize) -> Operator {
    let mut a = Array2::<C64>::zeros((n, n));
    for k in 1..n {
        a[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    Operator::from_matrix(a)
}

pub fn create(n: usize) -> Operator {
    destroy(n).adjoint()
}

pub fn number(n: usize) -> Operator {
    let mut a = Array2::<C64>::zeros((n, n));
    for k in 0..n {
        a[[k, k]] = C64::new(k as f64, 0.0);
    }
    Operator::from_matrix(a)
}

pub fn basis(n: usize, k: usize) -> Array1<C64> {
    let mut v = Array1::<C64>::zeros(n);
    v[k] = ONE;
    v
}

fn mat2(rows: [[C64; 2]; 2]) -> Operator {
    let mut m = Array2::<C64>::zeros((2, 2));
    for i in 0..2 {
        for j in 0..2 {
            m[[i, j]] = rows[i][j];
        }
    }
    Operator::from_matrix(m)
}

pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub fn hermitize(m: &Array2<C64>) -> Array2<C64> {
    (m + &dagger(m)) * C64::new(0.5, 0.0)
}

pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut e: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            e = e.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    e
}

pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn outer(a: &Array1<C64>, b: &Array1<C64>) -> Array2<C64> {
    let mut m = Array2::<C64>::zeros((a.len(), b.len()));
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            m[[i, j]] = x * y.conj();
        }
    }
    m
}

/// `Tr[o rho]` without forming the product.
pub fn expect(rho: &Array2<C64>, o: &Array2<C64>) -> C64 {
    let n = rho.nrows();
    let mut s = ZERO;
    for i in 0..n {
        for j in 0..n {
            s += o[[i, j]] * rho[[j, i]];
        }
    }
    s
}

/// Eigenvalues (ascending) and eigenvector columns of the Hermitian part of `m`.
///
/// The input is copied to column-major storage first: the LAPACK wrapper
/// returns conjugated eigenvectors for row-major complex input.
pub fn eigh(m: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    use ndarray::ShapeBuilder;
    use ndarray_linalg::Eigh;
    let mut f = Array2::<C64>::zeros(m.dim().f());
    f.assign(&hermitize(m));
    Ok(f.eigh(UPLO::Lower)?)
}

/// `exp(-i s h)` for Hermitian `h`, via its eigendecomposition.
pub fn expm_hermitian(h: &Array2<C64>, s: f64) -> Result<Array2<C64>> {
    let (w, v) = eigh(h)?;
    let mut vd = v.clone();
    for (k, &wk) in w.iter().enumerate() {
        let ph = C64::from_polar(1.0, -s * wk);
        vd.column_mut(k).mapv_inplace(|z| z * ph);
    }
    Ok(vd.dot(&dagger(&v)))
}
