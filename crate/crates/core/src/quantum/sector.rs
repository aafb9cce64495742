//! Steady state of the engine generator one photon-number sector at a time.
//!
//! Every term of the generator commutes with the photon-number superoperator,
//! and the stationary state is block diagonal, `ρ = Σ_n |n⟩⟨n| ⊗ ρ_n`. In the
//! eigenbasis of the truncated position operator (a discrete variable
//! representation) x̂ and every rate function are diagonal, so each block
//! couples to its neighbours only through diagonal factors. The resulting
//! block-tridiagonal real system is solved by block elimination.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};
use log::warn;

use super::state::{DensityMatrix, POS_TOL};
use crate::error::{Error, Result};
use crate::hilbert::{HilbertDims, Space, C64};
use crate::model::{potential, rates, EngineParams, HBAR};

/// Default cap on the working memory of one sector solve.
pub const DEFAULT_MEMORY_BUDGET: usize = 3 << 30;

/// Molecular operators in the position eigenbasis.
#[derive(Clone, Debug)]
pub struct SectorModel {
    pub params: EngineParams,
    pub dims: HilbertDims,
    /// Position eigenvalues (grid nodes).
    pub x: Vec<f64>,
    /// Columns are the position eigenvectors in the oscillator basis.
    pub u: Mat<f64>,
    /// `p̂ = i·mom` with `mom` real antisymmetric.
    pub mom: Mat<f64>,
    /// Kinetic plus potential energy.
    pub h_mol: Mat<f64>,
    pub k_hot: Vec<f64>,
    pub k_cold: Vec<f64>,
}

impl SectorModel {
    pub fn new(params: &EngineParams, dims: HilbertDims) -> Result<Self> {
        params.validate()?;
        let m = dims.n_mol;
        let x0 = params.x0();
        let xo = Mat::<f64>::from_fn(m, m, |i, j| {
            if i + 1 == j {
                x0 * (j as f64).sqrt()
            } else if j + 1 == i {
                x0 * (i as f64).sqrt()
            } else {
                0.0
            }
        });
        // p = i (ħ/2x0)(b† − b)
        let c = HBAR / (2.0 * x0);
        let mo = Mat::<f64>::from_fn(m, m, |i, j| {
            if i == j + 1 {
                c * (i as f64).sqrt()
            } else if j == i + 1 {
                -c * (j as f64).sqrt()
            } else {
                0.0
            }
        });
        let evd = xo.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let u = evd.U().to_owned();
        let x: Vec<f64> = (0..m).map(|i| evd.S()[i]).collect();
        let mom = u.transpose() * &mo * &u;
        // p·p = −mom·mom in the truncated basis
        let kin = u.transpose() * (&mo * &mo) * &u;
        let h_mol = Mat::from_fn(m, m, |i, j| {
            let t = -kin[(i, j)] / (2.0 * params.mass);
            if i == j {
                t + potential(x[i], params)
            } else {
                t
            }
        });
        let (k_hot, k_cold) = x.iter().map(|&s| rates(s, params)).unzip();
        Ok(Self { params: params.clone(), dims, x, u, mom, h_mol, k_hot, k_cold })
    }

    fn idx(&self, a: usize, b: usize) -> usize {
        a * self.dims.n_mol + b
    }

    /// `(coefficient, sqrt-rates)` pairs of the two reservoirs as
    /// `(n̄_j, √κ_j(x_a))`.
    fn reservoirs(&self) -> [(f64, Vec<f64>, &Vec<f64>); 2] {
        let p = &self.params;
        [
            (p.n_hot, self.k_hot.iter().map(|k| k.sqrt()).collect(), &self.k_hot),
            (p.n_cold, self.k_cold.iter().map(|k| k.sqrt()).collect(), &self.k_cold),
        ]
    }

    fn c_factor(&self, n: usize) -> f64 {
        if n + 1 == self.dims.n_cav {
            0.0
        } else {
            (n + 1) as f64
        }
    }

    /// Coefficients `ρ_{n−1} → block n` and `ρ_{n+1} → block n` per matrix element.
    fn couplings(&self, n: usize) -> (Mat<f64>, Mat<f64>) {
        let m = self.dims.n_mol;
        let res = self.reservoirs();
        let down = Mat::from_fn(m, m, |a, b| {
            res.iter().map(|(nb, s, _)| nb * n as f64 * s[a] * s[b]).sum()
        });
        let up = Mat::from_fn(m, m, |a, b| {
            if n + 1 == self.dims.n_cav {
                return 0.0;
            }
            res.iter().map(|(nb, s, _)| (nb + 1.0) * (n + 1) as f64 * s[a] * s[b]).sum()
        });
        (down, up)
    }

    /// Real elementwise decay of block n.
    fn decay(&self, n: usize) -> Mat<f64> {
        let m = self.dims.n_mol;
        let p = &self.params;
        let cn = self.c_factor(n);
        let res = self.reservoirs();
        let diff = p.gamma / HBAR * (p.n_th + 0.5);
        Mat::from_fn(m, m, |a, b| {
            let loss: f64 = res
                .iter()
                .map(|(nb, _, k)| ((nb + 1.0) * n as f64 + nb * cn) * (k[a] + k[b]))
                .sum();
            let dx = self.x[a] - self.x[b];
            -0.5 * loss - diff * dx * dx
        })
    }

    fn sector_hamiltonian(&self, n: usize) -> Mat<f64> {
        let g = self.params.g_omega * n as f64;
        let mut h = self.h_mol.clone();
        for a in 0..self.dims.n_mol {
            h[(a, a)] += HBAR * g * self.x[a];
        }
        h
    }

    /// Real matrix of the in-sector generator acting on the packed
    /// representation: entry `(a,b)` with a<b holds Re ρ_ab, `(b,a)` holds
    /// Im ρ_ab and `(a,a)` the population.
    pub fn block(&self, n: usize) -> Mat<f64> {
        let m = self.dims.n_mol;
        let h = self.sector_hamiltonian(n);
        let e = self.decay(n);
        let fr = 0.5 * self.params.gamma / HBAR;
        let a_ = &self.mom;
        let x = &self.x;
        let mut out = Mat::<f64>::zeros(m * m, m * m);
        let mut comm = Mat::<f64>::zeros(m, m);
        let mut anti = Mat::<f64>::zeros(m, m);
        for k in 0..m {
            for l in k..m {
                let kinds: &[bool] = if k == l { &[false] } else { &[false, true] };
                for &imag in kinds {
                    // input Y with entries (k,l)=1 and (l,k)=±1
                    let ent: Vec<(usize, usize, f64)> = if k == l {
                        vec![(k, k, 1.0)]
                    } else if imag {
                        vec![(k, l, 1.0), (l, k, -1.0)]
                    } else {
                        vec![(k, l, 1.0), (l, k, 1.0)]
                    };
                    comm.fill(0.0);
                    anti.fill(0.0);
                    for &(i, j, v) in &ent {
                        for r in 0..m {
                            comm[(r, j)] += v * h[(r, i)];
                            comm[(i, r)] -= v * h[(j, r)];
                            anti[(r, j)] += v * a_[(r, i)];
                            anti[(i, r)] += v * a_[(j, r)];
                        }
                    }
                    let col = if imag { self.idx(l, k) } else { self.idx(k, l) };
                    for a in 0..m {
                        for b in a..m {
                            let mut local = fr * (x[a] - x[b]) * anti[(a, b)];
                            for &(i, j, v) in &ent {
                                if i == a && j == b {
                                    local += v * e[(a, b)];
                                }
                            }
                            // Y real: R' gets the local part, I' gets −[H,Y];
                            // Y imaginary: R' gets [H,Y], I' the local part.
                            let c = comm[(a, b)] / HBAR;
                            let (re, im) = if imag { (c, local) } else { (local, -c) };
                            out[(self.idx(a, b), col)] = re;
                            if a < b {
                                out[(self.idx(b, a), col)] = im;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Block `n` of `𝓛ρ` for a block-diagonal `ρ`, in complex arithmetic.
    pub fn apply_block(&self, n: usize, blocks: &[Mat<C64>]) -> Mat<C64> {
        let m = self.dims.n_mol;
        let re = |a: &Mat<f64>| Mat::<C64>::from_fn(m, m, |i, j| C64::new(a[(i, j)], 0.0));
        let h = re(&self.sector_hamiltonian(n));
        let p = Mat::<C64>::from_fn(m, m, |i, j| C64::new(0.0, self.mom[(i, j)]));
        let e = self.decay(n);
        let (down, up) = self.couplings(n);
        let rho = &blocks[n];
        let i = C64::new(0.0, 1.0);
        let comm = &h * rho - rho * &h;
        let anti = &p * rho + rho * &p;
        let fr = 0.5 * self.params.gamma / HBAR;
        Mat::from_fn(m, m, |a, b| {
            let dx = self.x[a] - self.x[b];
            let mut v = -i / HBAR * comm[(a, b)] - i * fr * dx * anti[(a, b)] + e[(a, b)] * rho[(a, b)];
            if n > 0 {
                v += down[(a, b)] * blocks[n - 1][(a, b)];
            }
            if n + 1 < blocks.len() {
                v += up[(a, b)] * blocks[n + 1][(a, b)];
            }
            v
        })
    }

    /// Working memory of [`solve_sectors`] in bytes.
    pub fn memory_estimate(dims: HilbertDims) -> usize {
        let m2 = dims.n_mol * dims.n_mol;
        (dims.n_cav + 3) * m2 * m2 * 8
    }

    fn pack_diag(&self, coef: &Mat<f64>) -> Vec<f64> {
        let m = self.dims.n_mol;
        let mut v = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                v[self.idx(a, b)] = coef[(a.min(b), a.max(b))];
            }
        }
        v
    }

    fn unpack(&self, v: &[f64]) -> Mat<C64> {
        let m = self.dims.n_mol;
        Mat::from_fn(m, m, |a, b| {
            if a == b {
                C64::new(v[self.idx(a, a)], 0.0)
            } else if a < b {
                C64::new(v[self.idx(a, b)], v[self.idx(b, a)])
            } else {
                C64::new(v[self.idx(b, a)], -v[self.idx(a, b)])
            }
        })
    }
}

/// Block-diagonal stationary state in the position basis.
#[derive(Clone, Debug)]
pub struct SectorState {
    pub model: SectorModel,
    /// `ρ_n` for n = 0..n_cav, position basis, total trace 1.
    pub blocks: Vec<Mat<C64>>,
}

pub fn solve_sectors(params: &EngineParams, dims: HilbertDims) -> Result<SectorState> {
    solve_sectors_with_budget(params, dims, DEFAULT_MEMORY_BUDGET)
}

pub fn solve_sectors_with_budget(params: &EngineParams, dims: HilbertDims, budget: usize) -> Result<SectorState> {
    let required = SectorModel::memory_estimate(dims);
    if required > budget {
        return Err(Error::MemoryBudget { required, budget, best: None });
    }
    let model = SectorModel::new(params, dims)?;
    let nc = dims.n_cav;
    let m = dims.n_mol;
    let dim = m * m;
    let trace_row: Vec<usize> = (0..m).map(|a| model.idx(a, a)).collect();

    let mut gs: Vec<Mat<f64>> = Vec::with_capacity(nc.saturating_sub(1));
    let mut ys: Vec<Mat<f64>> = Vec::with_capacity(nc);
    for n in 0..nc {
        let mut s = model.block(n);
        let (down, up) = model.couplings(n);
        let b = model.pack_diag(&down);
        let mut c = model.pack_diag(&up);
        let mut rhs = Mat::<f64>::zeros(dim, 1);
        if n == 0 {
            // normalization replaces the (0,0) population equation
            for j in 0..dim {
                s[(0, j)] = 0.0;
            }
            for &j in &trace_row {
                s[(0, j)] = 1.0;
            }
            c[0] = 0.0;
            rhs[(0, 0)] = 1.0;
        } else {
            let g = &gs[n - 1];
            let y = &ys[n - 1];
            for j in 0..dim {
                for r in 0..dim {
                    s[(r, j)] -= b[r] * g[(r, j)];
                }
            }
            for r in 0..dim {
                rhs[(r, 0)] -= b[r] * y[(r, 0)];
            }
        }
        let lu = s.partial_piv_lu();
        drop(s);
        let y = lu.solve(&rhs);
        if y.col(0).iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(format!("sector {n} elimination produced non-finite values")));
        }
        ys.push(y);
        if n + 1 < nc {
            let mut g = lu.inverse();
            for j in 0..dim {
                let cj = c[j];
                for r in 0..dim {
                    g[(r, j)] *= cj;
                }
            }
            gs.push(g);
        }
    }
    // back substitution ρ_n = y_n − G_n ρ_{n+1}
    let mut sol: Vec<Mat<f64>> = vec![Mat::zeros(dim, 1); nc];
    sol[nc - 1] = ys.pop().unwrap();
    for n in (0..nc - 1).rev() {
        let y = ys.pop().unwrap();
        sol[n] = y - &gs[n] * &sol[n + 1];
        gs.pop();
    }
    let mut blocks: Vec<Mat<C64>> = sol
        .iter()
        .map(|v| model.unpack(&(0..dim).map(|i| v[(i, 0)]).collect::<Vec<_>>()))
        .collect();
    let tr: f64 = blocks.iter().map(|b| (0..m).map(|a| b[(a, a)].re).sum::<f64>()).sum();
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Singular(format!("sector solution has trace {tr}")));
    }
    for b in &mut blocks {
        for j in 0..m {
            for i in 0..m {
                b[(i, j)] /= tr;
            }
        }
    }
    let state = SectorState { model, blocks };
    let min = state.min_eigenvalue()?;
    if min < -POS_TOL {
        warn!("sector steady state has negative eigenvalue {min:.3e} for {params:?}");
    }
    Ok(state)
}

impl SectorState {
    pub fn dims(&self) -> HilbertDims {
        self.model.dims
    }

    pub fn populations(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| (0..b.nrows()).map(|a| b[(a, a)].re).sum()).collect()
    }

    pub fn mean_photons(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// `⟨â†â†ââ⟩`.
    pub fn second_factorial_moment(&self) -> f64 {
        self.populations().iter().enumerate().map(|(n, p)| (n * n.saturating_sub(1)) as f64 * p).sum()
    }

    pub fn g2(&self) -> Result<f64> {
        let n1 = self.mean_photons();
        if n1 <= 1e-12 {
            return Err(Error::UndefinedCorrelation(n1));
        }
        Ok(self.second_factorial_moment() / (n1 * n1))
    }

    /// `Tr(p̂ ρ_n)` for each block.
    fn momentum_traces(&self) -> Vec<f64> {
        let m = self.model.dims.n_mol;
        self.blocks
            .iter()
            .map(|b| {
                // Tr(i·mom·ρ) = i Σ mom_ab ρ_ba; the result is real for Hermitian ρ
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..m {
                    for bb in 0..m {
                        acc += C64::new(0.0, self.model.mom[(a, bb)]) * b[(bb, a)];
                    }
                }
                acc.re
            })
            .collect()
    }

    pub fn mean_momentum(&self) -> f64 {
        self.momentum_traces().iter().sum()
    }

    /// `⟨n̂_a p̂⟩`.
    pub fn photon_momentum(&self) -> f64 {
        self.momentum_traces().iter().enumerate().map(|(n, t)| n as f64 * t).sum()
    }

    /// `(Q̇_h, Q̇_c)` from the populations in the position basis, where the
    /// field energy `ħ(ω_a + g_ω x) n` is diagonal.
    pub fn heat_currents(&self) -> (f64, f64) {
        let p = &self.model.params;
        let m = self.model.dims.n_mol;
        let nc = self.model.dims.n_cav;
        let pop = |n: usize, a: usize| self.blocks[n][(a, a)].re;
        let mut q = [0.0; 2];
        for (j, (nb, k)) in [(p.n_hot, &self.model.k_hot), (p.n_cold, &self.model.k_cold)].into_iter().enumerate() {
            for n in 1..nc {
                let cn = self.model.c_factor(n);
                for a in 0..m {
                    let up = if n + 1 < nc { (n + 1) as f64 * pop(n + 1, a) } else { 0.0 };
                    let rate = (nb + 1.0) * (up - n as f64 * pop(n, a))
                        + nb * (n as f64 * pop(n - 1, a) - cn * pop(n, a));
                    q[j] += HBAR * (p.omega_a + p.g_omega * self.model.x[a]) * n as f64 * k[a] * rate;
                }
            }
        }
        (q[0], q[1])
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for b in &self.blocks {
            let evd = b.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
            for i in 0..b.nrows() {
                min = min.min(evd.S()[i].re);
            }
        }
        Ok(min)
    }

    /// Block `n` in the oscillator basis.
    pub fn block_oscillator(&self, n: usize) -> Mat<C64> {
        let u = &self.model.u;
        let m = u.nrows();
        let uc = Mat::<C64>::from_fn(m, m, |i, j| C64::new(u[(i, j)], 0.0));
        &uc * &self.blocks[n] * uc.transpose()
    }

    /// The full joint state in the Fock ⊗ oscillator basis.
    pub fn to_density_matrix(&self) -> Result<DensityMatrix> {
        let dims = self.model.dims;
        let m = dims.n_mol;
        let d = dims.joint();
        let mut full = Mat::<C64>::zeros(d, d);
        for n in 0..dims.n_cav {
            let b = self.block_oscillator(n);
            for j in 0..m {
                for i in 0..m {
                    full[(n * m + i, n * m + j)] = b[(i, j)];
                }
            }
        }
        DensityMatrix::hermitized(Space::Joint(dims), &full)
    }

    pub fn reduced_cavity(&self) -> Result<DensityMatrix> {
        DensityMatrix::diagonal(Space::Single(self.model.dims.n_cav), &self.populations())
    }

    /// Largest population in the top molecular oscillator level over all blocks.
    pub fn molecular_edge_population(&self) -> f64 {
        let m = self.model.dims.n_mol;
        (0..self.model.dims.n_cav)
            .map(|n| self.block_oscillator(n)[(m - 1, m - 1)].re)
            .fold(0.0, f64::max)
    }
}
