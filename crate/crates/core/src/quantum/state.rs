use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::hilbert::{HilbertDims, Operator, Space, C64};

/// Tolerance on Hermiticity and unit trace of a density matrix.
pub const STATE_TOL: f64 = 1e-10;
/// Default allowance for negative eigenvalues before a positivity breach is flagged.
pub const POS_TOL: f64 = 1e-6;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    space: Space,
    matrix: Mat<C64>,
}

impl DensityMatrix {
    /// Checked constructor: Hermitian and unit trace within [`STATE_TOL`].
    pub fn new(space: Space, matrix: Mat<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(space, matrix)?;
        let dev = rho.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = rho.trace();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(Error::Inconsistent(format!("density matrix trace is {tr}")));
        }
        Ok(rho)
    }

    /// Only the shape is checked.
    pub fn from_matrix_unchecked(space: Space, matrix: Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        Ok(Self { space, matrix })
    }

    /// `(ρ + ρ†)/2`, divided by its trace.
    pub fn hermitized(space: Space, matrix: &Mat<C64>) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows() });
        }
        let mut m = Mat::from_fn(d, d, |i, j| 0.5 * (matrix[(i, j)] + matrix[(j, i)].conj()));
        let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
        if !(tr.abs() > 0.0) || !tr.is_finite() {
            return Err(Error::Inconsistent(format!("cannot normalize: trace {tr}")));
        }
        for j in 0..d {
            for i in 0..d {
                m[(i, j)] /= tr;
            }
        }
        Ok(Self { space, matrix: m })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat<C64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut dev: f64 = 0.0;
        for j in 0..d {
            for i in 0..=j {
                dev = dev.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let evd = self.matrix.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok((0..self.dim()).map(|i| evd.S()[i].re).collect())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn purity(&self) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for j in 0..d {
            for i in 0..d {
                acc += (self.matrix[(i, j)] * self.matrix[(j, i)]).re;
            }
        }
        acc
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: op.dim() });
        }
        Ok(op.trace_product(&self.matrix))
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let diff = &self.matrix - &other.matrix;
        let evd = diff.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        Ok(0.5 * (0..self.dim()).map(|i| evd.S()[i].re.abs()).sum::<f64>())
    }

    /// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        let sq = psd_sqrt(&self.matrix)?;
        let inner = &(&sq * &other.matrix) * &sq;
        let evd = inner.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s: f64 = (0..self.dim()).map(|i| evd.S()[i].re.max(0.0).sqrt()).sum();
        Ok(s * s)
    }

    pub fn joint_dims(&self) -> Result<HilbertDims> {
        match self.space {
            Space::Joint(d) => Ok(d),
            Space::Single(n) => Err(Error::InvalidDimension(format!(
                "expected a joint state, got a single-mode state of dimension {n}"
            ))),
        }
    }

    pub fn reduced_cavity(&self) -> Result<DensityMatrix> {
        let dims = self.joint_dims()?;
        let (nc, nm) = (dims.n_cav, dims.n_mol);
        let m = Mat::from_fn(nc, nc, |a, b| {
            (0..nm).fold(ZERO, |s, k| s + self.matrix[(a * nm + k, b * nm + k)])
        });
        DensityMatrix::from_matrix_unchecked(Space::Single(nc), m)
    }

    pub fn reduced_molecule(&self) -> Result<DensityMatrix> {
        let dims = self.joint_dims()?;
        let (nc, nm) = (dims.n_cav, dims.n_mol);
        let m = Mat::from_fn(nm, nm, |k, l| {
            (0..nc).fold(ZERO, |s, a| s + self.matrix[(a * nm + k, a * nm + l)])
        });
        DensityMatrix::from_matrix_unchecked(Space::Single(nm), m)
    }

    pub fn maximally_mixed(space: Space) -> Self {
        let d = space.dim();
        let v = C64::new(1.0 / d as f64, 0.0);
        Self { space, matrix: Mat::from_fn(d, d, |i, j| if i == j { v } else { ZERO }) }
    }

    pub fn diagonal(space: Space, probs: &[f64]) -> Result<Self> {
        if probs.len() != space.dim() {
            return Err(Error::DimensionMismatch { expected: space.dim(), got: probs.len() });
        }
        let d = space.dim();
        let m = Mat::from_fn(d, d, |i, j| if i == j { C64::new(probs[i], 0.0) } else { ZERO });
        Self::new(space, m)
    }

    /// Truncated geometric distribution with mean `n_bar` (before truncation).
    pub fn thermal(levels: usize, n_bar: f64) -> Result<Self> {
        Self::diagonal(Space::Single(levels), &thermal_probabilities(levels, n_bar))
    }

    pub fn fock(levels: usize, k: usize) -> Result<Self> {
        if k >= levels {
            return Err(Error::InvalidDimension(format!("Fock level {k} outside {levels} levels")));
        }
        let mut p = vec![0.0; levels];
        p[k] = 1.0;
        Self::diagonal(Space::Single(levels), &p)
    }

    /// Pure state from an amplitude vector (normalized here).
    pub fn pure(space: Space, amps: &[C64]) -> Result<Self> {
        let d = space.dim();
        if amps.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: amps.len() });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let m = Mat::from_fn(d, d, |i, j| amps[i] * amps[j].conj() / norm);
        Self::new(space, m)
    }

    /// Coherent state `|α⟩` on `levels` Fock levels, renormalized after truncation.
    pub fn coherent(levels: usize, alpha: C64) -> Result<Self> {
        Self::pure(Space::Single(levels), &coherent_amplitudes(levels, alpha))
    }

    /// `ρ_cav ⊗ ρ_mol`.
    pub fn product(cav: &DensityMatrix, mol: &DensityMatrix) -> Result<Self> {
        let dims = HilbertDims::new(cav.dim(), mol.dim())?;
        let nm = mol.dim();
        let d = dims.joint();
        let m = Mat::from_fn(d, d, |i, j| {
            cav.matrix[(i / nm, j / nm)] * mol.matrix[(i % nm, j % nm)]
        });
        Self::new(Space::Joint(dims), m)
    }
}

fn psd_sqrt(m: &Mat<C64>) -> Result<Mat<C64>> {
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let u = evd.U();
    let d = m.nrows();
    let mut scaled = u.to_owned();
    for j in 0..d {
        let s = evd.S()[j].re.max(0.0).sqrt();
        for i in 0..d {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * u.adjoint())
}

pub fn thermal_probabilities(levels: usize, n_bar: f64) -> Vec<f64> {
    if n_bar <= 0.0 {
        let mut p = vec![0.0; levels];
        p[0] = 1.0;
        return p;
    }
    let q = n_bar / (n_bar + 1.0);
    let mut p: Vec<f64> = (0..levels).map(|k| q.powi(k as i32)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Fock amplitudes `e^{-|α|²/2} αⁿ/√n!` via the stable recurrence.
pub fn coherent_amplitudes(levels: usize, alpha: C64) -> Vec<C64> {
    let mut c = Vec::with_capacity(levels);
    c.push(C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0));
    for n in 1..levels {
        let prev = c[n - 1];
        c.push(prev * alpha / (n as f64).sqrt());
    }
    c
}

/// `g²(0) = ⟨a†a†aa⟩ / ⟨a†a⟩²` of a single-mode state in the Fock basis.
pub fn g2(rho_cav: &DensityMatrix) -> Result<f64> {
    let d = rho_cav.dim();
    let (mut n1, mut n2) = (0.0, 0.0);
    for k in 0..d {
        let p = rho_cav.matrix[(k, k)].re;
        n1 += k as f64 * p;
        n2 += (k * k.saturating_sub(1)) as f64 * p;
    }
    if n1 <= 1e-12 {
        return Err(Error::UndefinedCorrelation(n1));
    }
    Ok(n2 / (n1 * n1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, space: Space) -> DensityMatrix {
        let d = space.dim();
        let g = Mat::<C64>::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        DensityMatrix::hermitized(space, &(&g * g.adjoint())).unwrap()
    }

    #[test]
    fn g2_reference_states() {
        let th = DensityMatrix::thermal(200, 2.0).unwrap();
        assert!((g2(&th).unwrap() - 2.0).abs() < 1e-6);
        let coh = DensityMatrix::coherent(60, C64::new(1.3, -0.4)).unwrap();
        assert!((g2(&coh).unwrap() - 1.0).abs() < 1e-8);
        let one = DensityMatrix::fock(5, 1).unwrap();
        assert_eq!(g2(&one).unwrap(), 0.0);
        let vac = DensityMatrix::fock(5, 0).unwrap();
        assert!(matches!(g2(&vac), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn product_state_factors_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_state(&mut rng, Space::Single(3));
        let b = random_state(&mut rng, Space::Single(4));
        let ab = DensityMatrix::product(&a, &b).unwrap();
        let ra = ab.reduced_cavity().unwrap();
        let rb = ab.reduced_molecule().unwrap();
        assert!(ra.trace_distance(&a).unwrap() < 1e-12);
        assert!(rb.trace_distance(&b).unwrap() < 1e-12);
    }

    #[test]
    fn entangled_reduction_is_mixed() {
        let dims = HilbertDims::new(2, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let amps = [C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)];
        let bell = DensityMatrix::pure(Space::Joint(dims), &amps).unwrap();
        let mixed = DensityMatrix::maximally_mixed(Space::Single(2));
        assert!(bell.reduced_cavity().unwrap().trace_distance(&mixed).unwrap() < 1e-15);
        assert!(bell.reduced_molecule().unwrap().trace_distance(&mixed).unwrap() < 1e-15);
    }

    #[test]
    fn partial_traces_preserve_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let dims = HilbertDims::new(3, 5).unwrap();
        let rho = random_state(&mut rng, Space::Joint(dims));
        assert!((rho.reduced_cavity().unwrap().trace() - rho.trace()).abs() < 1e-12);
        assert!((rho.reduced_molecule().unwrap().trace() - rho.trace()).abs() < 1e-12);
        assert!(DensityMatrix::maximally_mixed(Space::Single(3)).reduced_cavity().is_err());
    }

    #[test]
    fn checked_constructor() {
        let mut m = Mat::<C64>::zeros(2, 2);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(0, 1)] = C64::new(0.0, 0.1);
        assert!(matches!(DensityMatrix::new(Space::Single(2), m.clone()), Err(Error::NotHermitian(_))));
        m[(0, 1)] = ZERO;
        m[(1, 1)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(Space::Single(2), m).is_err());
    }

    #[test]
    fn fidelity_and_distance() {
        let a = DensityMatrix::thermal(6, 0.7).unwrap();
        assert!((a.fidelity(&a).unwrap() - 1.0).abs() < 1e-10);
        assert!(a.trace_distance(&a).unwrap() < 1e-14);
        let f0 = DensityMatrix::fock(6, 0).unwrap();
        let f1 = DensityMatrix::fock(6, 1).unwrap();
        assert!(f0.fidelity(&f1).unwrap() < 1e-14);
        assert!((f0.trace_distance(&f1).unwrap() - 1.0).abs() < 1e-14);
    }
}
