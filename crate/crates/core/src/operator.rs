//! Dense operator algebra on composite Hilbert spaces.
//!
//! Every operator in the crate (emitter ladders, collective operators, collision
//! unitaries, Kraus operators) is an [`Operator`]: a square complex matrix tagged
//! with the local dimensions of the tensor factors it acts on. Kronecker ordering
//! is fixed: site 0 is the leftmost, slowest-varying factor.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Upper bound on the total Hilbert-space dimension accepted by constructors.
pub const DEFAULT_DIM_CAP: usize = 4096;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Ordered local dimensions of a composite space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HilbertDims {
    dims: Vec<usize>,
}

impl HilbertDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_cap(dims, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(dims: Vec<usize>, cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("empty dimension list"));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::invalid(format!("local dimension {d} < 2")));
        }
        let total = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&t| t <= cap)
            .ok_or_else(|| {
                Error::invalid(format!("total dimension of {dims:?} exceeds cap {cap}"))
            })?;
        debug_assert!(total >= 2);
        Ok(HilbertDims { dims })
    }

    pub fn single(d: usize) -> Result<Self> {
        Self::new(vec![d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Tensor product of two spaces (`self` on the left).
    pub fn concat(&self, other: &HilbertDims) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new(dims)
    }
}

/// Dense complex matrix acting on a composite space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    dims: HilbertDims,
    data: DMatrix<C64>,
}

impl Operator {
    pub fn new(dims: HilbertDims, data: DMatrix<C64>) -> Result<Self> {
        let n = dims.total();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: data.nrows().max(data.ncols()),
            });
        }
        Ok(Operator { dims, data })
    }

    pub fn identity(dims: &HilbertDims) -> Self {
        let n = dims.total();
        Operator { dims: dims.clone(), data: DMatrix::identity(n, n) }
    }

    pub fn zeros(dims: &HilbertDims) -> Self {
        let n = dims.total();
        Operator { dims: dims.clone(), data: DMatrix::zeros(n, n) }
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Operator { dims: self.dims.clone(), data: self.data.adjoint() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Operator { dims: self.dims.clone(), data: &self.data * c }
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.norm()
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        let sv = self.data.clone().singular_values();
        sv.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Hermiticity to a relative Frobenius tolerance.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let diff = (&self.data - self.data.adjoint()).norm();
        diff <= tol * self.data.norm().max(1.0)
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        self * other - other * self
    }

    pub fn anticommutator(&self, other: &Operator) -> Operator {
        self * other + other * self
    }

    pub fn kron(&self, other: &Operator) -> Result<Operator> {
        let dims = self.dims.concat(&other.dims)?;
        Operator::new(dims, self.data.kronecker(&other.data))
    }

    /// `exp(scale * self)`.
    pub fn expm(&self, scale: C64) -> Result<Operator> {
        expm(self, scale)
    }

    fn assert_same_dims(&self, other: &Operator) {
        assert_eq!(self.dims, other.dims, "operator dimension mismatch");
    }
}

impl Add<&Operator> for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.assert_same_dims(rhs);
        Operator { dims: self.dims.clone(), data: &self.data + &rhs.data }
    }
}

impl Sub<&Operator> for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.assert_same_dims(rhs);
        Operator { dims: self.dims.clone(), data: &self.data - &rhs.data }
    }
}

impl Mul<&Operator> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.assert_same_dims(rhs);
        Operator { dims: self.dims.clone(), data: &self.data * &rhs.data }
    }
}

impl Add for Operator {
    type Output = Operator;
    fn add(self, rhs: Operator) -> Operator {
        &self + &rhs
    }
}

impl Sub for Operator {
    type Output = Operator;
    fn sub(self, rhs: Operator) -> Operator {
        &self - &rhs
    }
}

impl Mul for Operator {
    type Output = Operator;
    fn mul(self, rhs: Operator) -> Operator {
        &self * &rhs
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { dims: self.dims.clone(), data: -&self.data }
    }
}

/// Statistics of a local ladder operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderKind {
    Qubit,
    Boson,
}

/// Annihilation operator of a single mode. `cutoff` is ignored for qubits.
pub fn make_ladder(kind: LadderKind, cutoff: usize) -> Result<Operator> {
    let d = match kind {
        LadderKind::Qubit => 2,
        LadderKind::Boson => {
            if cutoff < 2 {
                return Err(Error::invalid(format!("boson cutoff {cutoff} < 2")));
            }
            cutoff
        }
    };
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Operator::new(HilbertDims::single(d)?, m)
}

/// Embed a single-site operator at `site` of `dims`, identity elsewhere.
pub fn embed(op: &Operator, site: usize, dims: &HilbertDims) -> Result<Operator> {
    let local = *dims.dims().get(site).ok_or_else(|| {
        Error::invalid(format!("site {site} out of range for {} sites", dims.len()))
    })?;
    if op.data.nrows() != local {
        return Err(Error::DimensionMismatch { expected: local, found: op.data.nrows() });
    }
    let left: usize = dims.dims()[..site].iter().product();
    let right: usize = dims.dims()[site + 1..].iter().product();
    let data = DMatrix::<C64>::identity(left, left)
        .kronecker(&op.data)
        .kronecker(&DMatrix::<C64>::identity(right, right));
    Operator::new(dims.clone(), data)
}

/// `exp(scale * h)` by scaling and squaring around a Taylor core.
pub fn expm(h: &Operator, scale: C64) -> Result<Operator> {
    if !h.is_finite() || !(scale.re.is_finite() && scale.im.is_finite()) {
        return Err(Error::invalid("non-finite entries passed to expm"));
    }
    Ok(Operator { dims: h.dims.clone(), data: expm_matrix(&(&h.data * scale)) })
}

pub(crate) fn norm1(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn expm_matrix(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let nrm = norm1(a);
    let squarings = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / C64::new(2f64.powi(squarings), 0.0);

    // ||b|| <= 1/2, so the series tail after k terms is below 2 * 0.5^k / k!.
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &b / C64::new(k as f64, 0.0);
        result += &term;
        if norm1(&term) <= 1e-18 * norm1(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm(m: &DMatrix<C64>) -> f64 {
    hermitian_eigen(m).0.iter().map(|v| v.abs()).sum()
}

/// Half the trace norm of the difference.
pub fn trace_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    0.5 * trace_norm(&(a - b))
}

/// Partial trace of a square matrix over every site not listed in `keep`.
pub fn partial_trace_matrix(
    data: &DMatrix<C64>,
    dims: &HilbertDims,
    keep: &[usize],
) -> Result<(DMatrix<C64>, HilbertDims)> {
    if keep.is_empty() {
        return Err(Error::invalid("partial trace needs a nonempty keep set"));
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::invalid(format!("site {bad} out of range for {} sites", dims.len())));
    }
    if data.nrows() != dims.total() {
        return Err(Error::DimensionMismatch { expected: dims.total(), found: data.nrows() });
    }
    let d = dims.dims();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| d[k]).collect();
    let kept_total: usize = kept_dims.iter().product();
    let traced_total = dims.total() / kept_total;

    // full index laid out by (traced index, kept index)
    let mut table = vec![0usize; dims.total()];
    let mut digits = vec![0usize; d.len()];
    for full in 0..dims.total() {
        let mut rem = full;
        for s in (0..d.len()).rev() {
            digits[s] = rem % d[s];
            rem /= d[s];
        }
        let (mut ki, mut ti) = (0usize, 0usize);
        for s in 0..d.len() {
            if keep.binary_search(&s).is_ok() {
                ki = ki * d[s] + digits[s];
            } else {
                ti = ti * d[s] + digits[s];
            }
        }
        table[ti * kept_total + ki] = full;
    }

    let mut out = DMatrix::<C64>::zeros(kept_total, kept_total);
    for t in 0..traced_total {
        let idx = &table[t * kept_total..(t + 1) * kept_total];
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                out[(a, b)] += data[(ia, ib)];
            }
        }
    }
    Ok((out, HilbertDims::new(kept_dims)?))
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDM {
    dims: HilbertDims,
    data: DMatrix<C64>,
}

impl StateDM {
    pub fn new(dims: HilbertDims, data: DMatrix<C64>) -> Result<Self> {
        let s = Self::new_unchecked(dims, data)?;
        s.validate()?;
        Ok(s)
    }

    /// Shape-checked only; used for intermediate states whose validity is
    /// monitored elsewhere.
    pub fn new_unchecked(dims: HilbertDims, data: DMatrix<C64>) -> Result<Self> {
        let n = dims.total();
        if data.nrows() != n || data.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: data.nrows() });
        }
        Ok(StateDM { dims, data })
    }

    pub fn from_pure(dims: HilbertDims, psi: &DVector<C64>) -> Result<Self> {
        if psi.len() != dims.total() {
            return Err(Error::DimensionMismatch { expected: dims.total(), found: psi.len() });
        }
        let nrm = psi.norm();
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v = psi / C64::new(nrm, 0.0);
        Ok(StateDM { dims, data: &v * v.adjoint() })
    }

    /// Product of Fock / computational basis states, one level per site.
    pub fn basis(dims: HilbertDims, levels: &[usize]) -> Result<Self> {
        if levels.len() != dims.len() {
            return Err(Error::DimensionMismatch { expected: dims.len(), found: levels.len() });
        }
        let mut idx = 0usize;
        for (&l, &d) in levels.iter().zip(dims.dims()) {
            if l >= d {
                return Err(Error::invalid(format!("level {l} outside local dimension {d}")));
            }
            idx = idx * d + l;
        }
        let mut psi = DVector::zeros(dims.total());
        psi[idx] = ONE;
        Self::from_pure(dims, &psi)
    }

    pub fn validate(&self) -> Result<()> {
        let nrm = self.data.norm().max(1.0);
        let herm = (&self.data - self.data.adjoint()).norm();
        if herm > HERMITIAN_TOL * nrm {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = self.data.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = min_eigenvalue(&self.data);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<C64> {
        self.data
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn purity(&self) -> f64 {
        (&self.data * &self.data).trace().re
    }

    /// `Tr(op * rho)`.
    pub fn expect(&self, op: &Operator) -> C64 {
        assert_eq!(op.dims(), &self.dims, "operator/state dimension mismatch");
        (op.data() * &self.data).trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.data)
    }

    pub fn tensor(&self, other: &StateDM) -> Result<StateDM> {
        let dims = self.dims.concat(&other.dims)?;
        Ok(StateDM { dims, data: self.data.kronecker(&other.data) })
    }

    pub fn partial_trace(&self, keep: &[usize]) -> Result<StateDM> {
        let (data, dims) = partial_trace_matrix(&self.data, &self.dims, keep)?;
        Ok(StateDM { dims, data })
    }

    /// Population of the highest level of site `site`.
    pub fn top_level_population(&self, site: usize) -> Result<f64> {
        let red = self.partial_trace(&[site])?;
        let d = red.data.nrows();
        Ok(red.data[(d - 1, d - 1)].re)
    }
}

/// Free-function form of [`StateDM::partial_trace`].
pub fn partial_trace(s: &StateDM, keep: &[usize]) -> Result<StateDM> {
    s.partial_trace(keep)
}
