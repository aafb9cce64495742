//! Operator algebra on the truncated cavity ⊗ molecule Hilbert space.
//!
//! Operators are stored as sparse CSR matrices. Joint operators use the
//! cavity factor as the slow (outer) Kronecker index, so the basis vector
//! `|n⟩_cav ⊗ |k⟩_mol` sits at `n * n_mol + k`.
//!
//! Superoperators act on column-stacked density matrices: `vec(ρ)[i + j*d] =
//! ρ[i, j]`, which gives `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entries with modulus at or below this are dropped when re-sparsifying.
pub const DROP_TOL: f64 = 1e-14;

/// Absolute tolerance on `‖O - O†‖_max` for a Hermitian operator.
pub const HERMITIAN_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
#[cfg(test)]
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertDims {
    pub n_cav: usize,
    pub n_mol: usize,
}

impl HilbertDims {
    pub fn new(n_cav: usize, n_mol: usize) -> Result<Self> {
        if n_cav < 2 || n_mol < 2 {
            return Err(Error::InvalidDimension(format!(
                "truncations must be >= 2 (n_cav = {n_cav}, n_mol = {n_mol})"
            )));
        }
        Ok(Self { n_cav, n_mol })
    }

    pub fn joint(&self) -> usize {
        self.n_cav * self.n_mol
    }

    /// Dimension of the space of vectorized density matrices.
    pub fn liouville(&self) -> usize {
        self.joint() * self.joint()
    }

    pub fn index(&self, n: usize, k: usize) -> usize {
        n * self.n_mol + k
    }
}

/// The space an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    /// A single mode truncated to the given number of levels.
    Single(usize),
    Joint(HilbertDims),
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Single(n) => *n,
            Space::Joint(d) => d.joint(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Operator {
    space: Space,
    matrix: CsMat<C64>,
}

impl Operator {
    pub fn from_csmat(space: Space, matrix: CsMat<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: matrix.rows().max(matrix.cols()),
            });
        }
        let matrix = if matrix.is_csr() { matrix } else { matrix.to_csr() };
        Ok(Self { space, matrix })
    }

    pub fn from_triplets(space: Space, entries: &[(usize, usize, C64)]) -> Result<Self> {
        let d = space.dim();
        let mut tri = TriMat::new((d, d));
        for &(i, j, v) in entries {
            if i >= d || j >= d {
                return Err(Error::DimensionMismatch { expected: d, got: i.max(j) + 1 });
            }
            if v.norm() > DROP_TOL {
                tri.add_triplet(i, j, v);
            }
        }
        Ok(Self { space, matrix: tri.to_csr() })
    }

    /// Re-sparsify a dense matrix, dropping entries with modulus <= [`DROP_TOL`].
    pub fn from_dense(space: Space, dense: &Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if dense.nrows() != d || dense.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: dense.nrows() });
        }
        let mut tri = TriMat::new((d, d));
        for j in 0..d {
            for i in 0..d {
                let v = dense[(i, j)];
                if v.norm() > DROP_TOL {
                    tri.add_triplet(i, j, v);
                }
            }
        }
        Ok(Self { space, matrix: tri.to_csr() })
    }

    pub fn from_diagonal(space: Space, diag: &[C64]) -> Result<Self> {
        let entries: Vec<_> = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        if diag.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: diag.len() });
        }
        Self::from_triplets(space, &entries)
    }

    pub fn identity(space: Space) -> Self {
        Self { space, matrix: CsMat::eye(space.dim()) }
    }

    pub fn zeros(space: Space) -> Self {
        let d = space.dim();
        Self { space, matrix: CsMat::zero((d, d)) }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &CsMat<C64> {
        &self.matrix
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix.get(i, j).copied().unwrap_or(ZERO)
    }

    pub fn adjoint(&self) -> Self {
        let m = self.matrix.transpose_view().to_owned().map(|v| v.conj()).to_csr();
        Self { space: self.space, matrix: m }
    }

    pub fn transpose(&self) -> Self {
        Self { space: self.space, matrix: self.matrix.transpose_view().to_csr() }
    }

    pub fn conj(&self) -> Self {
        Self { space: self.space, matrix: self.matrix.map(|v| v.conj()) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space, matrix: self.matrix.map(|v| v * s) }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space, matrix: prune(&(&self.matrix + &other.matrix)) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space, matrix: prune(&(&self.matrix - &other.matrix)) })
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space, matrix: prune(&(&self.matrix * &other.matrix)) })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }

    /// `max |O - O†|` over all entries.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for (&v, (i, j)) in self.matrix.iter() {
            dev = dev.max((v - self.get(j, i).conj()).norm());
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.data().iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let d = self.dim();
        let mut out = Mat::<C64>::zeros(d, d);
        for (&v, (i, j)) in self.matrix.iter() {
            out[(i, j)] += v;
        }
        out
    }

    /// `Tr(self · rho)` for a dense `rho`.
    pub fn trace_product(&self, rho: &Mat<C64>) -> C64 {
        let mut acc = ZERO;
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                acc += v * rho[(j, i)];
            }
        }
        acc
    }

    /// Dense product `self · rho`.
    pub fn mul_dense(&self, rho: &Mat<C64>) -> Mat<C64> {
        let d = self.dim();
        let cols = rho.ncols();
        let mut out = Mat::<C64>::zeros(d, cols);
        for (i, row) in self.matrix.outer_iterator().enumerate() {
            for (k, &v) in row.iter() {
                for c in 0..cols {
                    out[(i, c)] += v * rho[(k, c)];
                }
            }
        }
        out
    }

    /// Dense product `rho · self`.
    pub fn dense_mul(&self, rho: &Mat<C64>) -> Mat<C64> {
        let d = self.dim();
        let rows = rho.nrows();
        let mut out = Mat::<C64>::zeros(rows, d);
        for (k, row) in self.matrix.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                for r in 0..rows {
                    out[(r, j)] += rho[(r, k)] * v;
                }
            }
        }
        out
    }
}

fn prune(m: &CsMat<C64>) -> CsMat<C64> {
    let (rows, cols) = m.shape();
    let mut tri = TriMat::new((rows, cols));
    for (&v, (i, j)) in m.iter() {
        if v.norm() > DROP_TOL {
            tri.add_triplet(i, j, v);
        }
    }
    tri.to_csr()
}

/// Truncated boson annihilation operator on `n` levels.
pub fn ladder(n: usize) -> Result<Operator> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("ladder needs n >= 2, got {n}")));
    }
    let entries: Vec<_> = (1..n).map(|k| (k - 1, k, C64::new((k as f64).sqrt(), 0.0))).collect();
    Operator::from_triplets(Space::Single(n), &entries)
}

/// Kronecker product `a ⊗ b` with the cavity factor `a` as the slow index.
pub fn tensor(a: &Operator, b: &Operator) -> Result<Operator> {
    let (Space::Single(na), Space::Single(nb)) = (a.space, b.space) else {
        return Err(Error::InvalidDimension("tensor expects single-factor operators".into()));
    };
    let dims = HilbertDims::new(na, nb)?;
    let m = sprs::kronecker_product(a.matrix.view(), b.matrix.view());
    Operator::from_csmat(Space::Joint(dims), m)
}

/// `a ⊗ b` checked against the expected joint dimensions.
pub fn tensor_in(dims: HilbertDims, a: &Operator, b: &Operator) -> Result<Operator> {
    if a.dim() != dims.n_cav {
        return Err(Error::DimensionMismatch { expected: dims.n_cav, got: a.dim() });
    }
    if b.dim() != dims.n_mol {
        return Err(Error::DimensionMismatch { expected: dims.n_mol, got: b.dim() });
    }
    tensor(a, b)
}

/// Spectral calculus for a Hermitian operator: `U f(Λ) U†`.
pub fn operator_function(op: &Operator, f: impl Fn(f64) -> f64) -> Result<Operator> {
    let (values, vectors) = hermitian_eigen(op)?;
    let d = op.dim();
    let mut scaled = vectors.clone();
    for j in 0..d {
        let fj = f(values[j]);
        for i in 0..d {
            scaled[(i, j)] *= fj;
        }
    }
    let out = &scaled * vectors.adjoint();
    Operator::from_dense(op.space, &out)
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian operator.
pub fn hermitian_eigen(op: &Operator) -> Result<(Vec<f64>, Mat<C64>)> {
    let tol = HERMITIAN_TOL * op.max_abs().max(1.0);
    let dev = op.hermitian_deviation();
    if dev > tol {
        return Err(Error::NotHermitian(dev));
    }
    let dense = op.to_dense();
    let evd = dense
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values: Vec<f64> = (0..op.dim()).map(|i| evd.S()[i].re).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok((values, evd.U().to_owned()))
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &Mat<C64>) -> Vec<C64> {
    let (r, c) = (rho.nrows(), rho.ncols());
    let mut v = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            v.push(rho[(i, j)]);
        }
    }
    v
}

pub fn devectorize(v: &[C64]) -> Result<Mat<C64>> {
    let d = (v.len() as f64).sqrt().round() as usize;
    if d * d != v.len() {
        return Err(Error::InvalidDimension(format!(
            "vector length {} is not a perfect square",
            v.len()
        )));
    }
    Ok(Mat::from_fn(d, d, |i, j| v[i + j * d]))
}

#[derive(Clone, Debug)]
pub struct SuperOperator {
    space: Space,
    matrix: CsMat<C64>,
}

impl SuperOperator {
    pub fn from_csmat(space: Space, matrix: CsMat<C64>) -> Result<Self> {
        let d = space.dim() * space.dim();
        if matrix.rows() != d || matrix.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.rows() });
        }
        let matrix = if matrix.is_csr() { matrix } else { matrix.to_csr() };
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: Space) -> Self {
        let d = space.dim() * space.dim();
        Self { space, matrix: CsMat::zero((d, d)) }
    }

    pub fn space(&self) -> Space {
        self.space
    }

    /// Hilbert-space dimension `d`; the matrix is `d² × d²`.
    pub fn hilbert_dim(&self) -> usize {
        self.space.dim()
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CsMat<C64> {
        &self.matrix
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// `ρ ↦ A ρ`.
    pub fn spre(a: &Operator) -> Self {
        let id = CsMat::<C64>::eye(a.dim());
        Self { space: a.space, matrix: sprs::kronecker_product(id.view(), a.matrix.view()) }
    }

    /// `ρ ↦ ρ B`.
    pub fn spost(b: &Operator) -> Self {
        let id = CsMat::<C64>::eye(b.dim());
        let bt = b.matrix.transpose_view().to_csr();
        Self { space: b.space, matrix: sprs::kronecker_product(bt.view(), id.view()) }
    }

    /// `ρ ↦ A ρ B`.
    pub fn sandwich(a: &Operator, b: &Operator) -> Result<Self> {
        a.check_same(b)?;
        let bt = b.matrix.transpose_view().to_csr();
        Ok(Self { space: a.space, matrix: sprs::kronecker_product(bt.view(), a.matrix.view()) })
    }

    /// `ρ ↦ -i[H, ρ]` (ħ = 1).
    pub fn hamiltonian(h: &Operator) -> Self {
        let minus_i = C64::new(0.0, -1.0);
        Self::spre(h).sub(&Self::spost(h)).expect("same space").scale(minus_i)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space, matrix: prune(&(&self.matrix + &other.matrix)) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space, matrix: prune(&(&self.matrix - &other.matrix)) })
    }

    /// Composition `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self { space: self.space, matrix: prune(&(&self.matrix * &other.matrix)) })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { space: self.space, matrix: self.matrix.map(|v| v * s) }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.hilbert_dim(),
                got: other.hilbert_dim(),
            });
        }
        Ok(())
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim()];
        self.matvec_into(v, &mut out);
        out
    }

    pub fn matvec_into(&self, v: &[C64], out: &mut [C64]) {
        let indptr = self.matrix.indptr();
        let indptr = indptr.raw_storage();
        let indices = self.matrix.indices();
        let data = self.matrix.data();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for p in indptr[i]..indptr[i + 1] {
                acc += data[p] * v[indices[p]];
            }
            *o = acc;
        }
    }

    /// Apply to a density matrix: `devectorize(L · vectorize(ρ))`.
    pub fn apply(&self, rho: &Mat<C64>) -> Result<Mat<C64>> {
        let d = self.hilbert_dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: rho.nrows() });
        }
        devectorize(&self.matvec(&vectorize(rho)))
    }

    /// Largest `|Σ_k L[(k,k), c]|` over columns `c`: how far `Tr ∘ L` is from zero.
    pub fn trace_defect(&self) -> f64 {
        let d = self.hilbert_dim();
        let mut sums = vec![ZERO; self.dim()];
        for k in 0..d {
            let row = k + k * d;
            if let Some(r) = self.matrix.outer_view(row) {
                for (c, &v) in r.iter() {
                    sums[c] += v;
                }
            }
        }
        sums.iter().fold(0.0, |m, s| m.max(s.norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.data().iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let d = self.dim();
        let mut out = Mat::<C64>::zeros(d, d);
        for (&v, (i, j)) in self.matrix.iter() {
            out[(i, j)] += v;
        }
        out
    }
}

/// Vectorized Lindblad dissipator `D[L]ρ = LρL† − ½{L†L, ρ}`.
pub fn dissipator(l: &Operator) -> SuperOperator {
    let ldag = l.adjoint();
    let ldl = ldag.mul(l).expect("same space");
    let jump = SuperOperator::sandwich(l, &ldag).expect("same space");
    let anti = SuperOperator::spre(&ldl).add(&SuperOperator::spost(&ldl)).expect("same space");
    jump.sub(&anti.scale_re(0.5)).expect("same space")
}

#[cfg(test)]
pub(crate) fn identity_dense(d: usize) -> Mat<C64> {
    Mat::from_fn(d, d, |i, j| if i == j { ONE } else { ZERO })
}
