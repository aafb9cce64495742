//! Phase-space diagnostics over (r, x): the phase-averaged Husimi function,
//! the reservoir source density and its divergence-free flow, plus the
//! cavity Wigner function.

mod grid;

use faer::Mat;
use serde::{Deserialize, Serialize};

pub use grid::{
    coherent_moduli, fock_tail, hermite_functions, max_reliable_radius, CoherentPositionProbe, PhaseGrid,
    QuadratureGrid, FOCK_TAIL_TOL,
};

use crate::error::{Error, Result};
use crate::hilbert::{HilbertDims, Space, C64};
use crate::model::{EngineOperators, EngineParams};
use crate::quantum::{reservoir_action, DensityMatrix, SectorState};

fn joint_dims(space: Space) -> Result<HilbertDims> {
    match space {
        Space::Joint(d) => Ok(d),
        Space::Single(n) => Err(Error::InvalidDimension(format!("expected a joint state, got a single mode of {n}"))),
    }
}

fn check_tail(levels: usize, r: f64) -> Result<()> {
    let tail = fock_tail(levels, r);
    if tail > FOCK_TAIL_TOL {
        return Err(Error::GridTooLarge(format!(
            "Fock tail {tail:.2e} at |α| = {r:.3} exceeds {FOCK_TAIL_TOL:.0e} for {levels} levels (limit |α| ≤ {:.3})",
            max_reliable_radius(levels, FOCK_TAIL_TOL)
        )));
    }
    Ok(())
}

/// `(1/π)∫⟨re^{iφ},x|m|re^{iφ},x⟩ r dφ` on the grid; rows index r, columns x.
///
/// The N_φ-point trapezoid sums `e^{i(n′−n)φ}` to `N_φ` when `n′ ≡ n (mod N_φ)`
/// and to zero otherwise, so the rule is evaluated in that closed form.
pub fn phase_sandwich(m: &Mat<C64>, dims: HilbertDims, grid: &PhaseGrid, x0: f64) -> Result<Mat<f64>> {
    let d = dims.joint();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
    }
    check_tail(dims.n_cav, grid.r_max())?;
    let (nc, nm) = (dims.n_cav, dims.n_mol);
    let np = grid.n_phi();
    let pairs: Vec<(usize, usize)> =
        (0..nc).flat_map(|a| (0..nc).map(move |b| (a, b))).filter(|(a, b)| a.abs_diff(*b) % np == 0).collect();
    let moduli: Vec<Vec<f64>> = grid.r().iter().map(|&r| coherent_moduli(nc, r)).collect();
    let mut out = Mat::<f64>::zeros(grid.r().len(), grid.x().len());
    let mut rx = vec![C64::new(0.0, 0.0); pairs.len()];
    for (j, &x) in grid.x().iter().enumerate() {
        let psi = hermite_functions(nm, x, x0);
        for (slot, &(a, b)) in rx.iter_mut().zip(&pairs) {
            let mut s = C64::new(0.0, 0.0);
            for (k, pk) in psi.iter().enumerate() {
                let row = a * nm + k;
                let mut t = C64::new(0.0, 0.0);
                for (l, pl) in psi.iter().enumerate() {
                    t += m[(row, b * nm + l)] * *pl;
                }
                s += t * *pk;
            }
            *slot = s;
        }
        for (i, &r) in grid.r().iter().enumerate() {
            let c = &moduli[i];
            let v: C64 = pairs.iter().zip(&rx).map(|(&(a, b), s)| s * (c[a] * c[b])).sum();
            if v.im.abs() > 1e-8 * v.norm().max(1e-300) && v.im.abs() > 1e-14 {
                return Err(Error::NotHermitian(v.im.abs()));
            }
            out[(i, j)] = 2.0 * r * v.re;
        }
    }
    Ok(out)
}

/// Modified Husimi function `Q̃(r, x)` of a joint state.
pub fn husimi(rho: &DensityMatrix, grid: &PhaseGrid, x0: f64) -> Result<Mat<f64>> {
    phase_sandwich(rho.matrix(), joint_dims(rho.space())?, grid, x0)
}

/// Source density `D̃(r, x)`: the same sandwich applied to `(𝓛_h + 𝓛_c)ρ`.
pub fn source_density(rho: &DensityMatrix, params: &EngineParams, grid: &PhaseGrid) -> Result<Mat<f64>> {
    let dims = joint_dims(rho.space())?;
    let ops = EngineOperators::new(params, dims)?;
    let lrho = reservoir_action(params, &ops, rho.matrix())?;
    phase_sandwich(&lrho, dims, grid, params.x0())
}

/// `u = −∫₀^r D̃ dr′` and `v = ∫_{x_min}^x D̃ dx′`, both by cumulative trapezoid.
pub fn flow_field(d: &Mat<f64>, grid: &PhaseGrid) -> Result<(Mat<f64>, Mat<f64>)> {
    let (nr, nx) = (grid.r().len(), grid.x().len());
    if d.nrows() != nr || d.ncols() != nx {
        return Err(Error::DimensionMismatch { expected: nr * nx, got: d.nrows() * d.ncols() });
    }
    let (hr, hx) = (grid.dr(), grid.dx());
    let mut u = Mat::<f64>::zeros(nr, nx);
    let mut v = Mat::<f64>::zeros(nr, nx);
    // u starts at the first r sample, which is 0 for every default grid
    for j in 0..nx {
        for i in 1..nr {
            u[(i, j)] = u[(i - 1, j)] - 0.5 * hr * (d[(i - 1, j)] + d[(i, j)]);
        }
    }
    for i in 0..nr {
        for j in 1..nx {
            v[(i, j)] = v[(i, j - 1)] + 0.5 * hx * (d[(i, j - 1)] + d[(i, j)]);
        }
    }
    Ok((u, v))
}

/// `∂_r u + ∂_x v` at cell centres, each difference averaged over the two
/// cell edges. This is the stencil that pairs with the trapezoid integrals:
/// both terms reduce to the four-corner mean of D̃ with opposite signs.
pub fn divergence(u: &Mat<f64>, v: &Mat<f64>, grid: &PhaseGrid) -> Mat<f64> {
    let (nr, nx) = (u.nrows(), u.ncols());
    let (hr, hx) = (grid.dr(), grid.dx());
    Mat::from_fn(nr - 1, nx - 1, |i, j| {
        let du = 0.5 * ((u[(i + 1, j)] - u[(i, j)]) + (u[(i + 1, j + 1)] - u[(i, j + 1)])) / hr;
        let dv = 0.5 * ((v[(i, j + 1)] - v[(i, j)]) + (v[(i + 1, j + 1)] - v[(i + 1, j)])) / hx;
        du + dv
    })
}

fn max_abs(m: &Mat<f64>) -> f64 {
    let mut a = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            a = a.max(m[(i, j)].abs());
        }
    }
    a
}

/// Composite Simpson weights of a uniform axis, closing with the 3/8 rule
/// when the interval count is odd.
fn quadrature_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let simpson = |w: &mut [f64], from: usize, to: usize| {
        for k in (from..to).step_by(2) {
            w[k] += h / 3.0;
            w[k + 1] += 4.0 * h / 3.0;
            w[k + 2] += h / 3.0;
        }
    };
    match n {
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ if n % 2 == 1 => simpson(&mut w, 0, n - 1),
        _ => {
            simpson(&mut w, 0, n - 4);
            for (k, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                w[n - 4 + k] += 3.0 * h / 8.0 * c;
            }
        }
    }
    w
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhaseField {
    pub grid: PhaseGrid,
    pub q: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

fn rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn to_mat(v: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(v.len(), v[0].len(), |i, j| v[i][j])
}

impl PhaseField {
    pub fn compute(rho: &DensityMatrix, params: &EngineParams, grid: &PhaseGrid) -> Result<Self> {
        let q = husimi(rho, grid, params.x0())?;
        let d = source_density(rho, params, grid)?;
        let (u, v) = flow_field(&d, grid)?;
        Ok(Self { grid: grid.clone(), q: rows(&q), d: rows(&d), u: rows(&u), v: rows(&v) })
    }

    pub fn from_sectors(state: &SectorState, grid: &PhaseGrid) -> Result<Self> {
        Self::compute(&state.to_density_matrix()?, &state.model.params, grid)
    }

    /// `∬ Q̃ dr dx` by Simpson quadrature.
    pub fn normalization(&self) -> f64 {
        self.x_marginal().iter().zip(quadrature_weights(self.grid.x().len(), self.grid.dx())).map(|(a, w)| a * w).sum()
    }

    /// `∬ D̃ dr dx` by Simpson quadrature.
    pub fn source_integral(&self) -> f64 {
        integrate(&self.d, &self.grid)
    }

    /// `∫ Q̃ dr` at each x.
    pub fn x_marginal(&self) -> Vec<f64> {
        let wr = quadrature_weights(self.grid.r().len(), self.grid.dr());
        (0..self.grid.x().len()).map(|j| self.q.iter().zip(&wr).map(|(row, w)| row[j] * w).sum()).collect()
    }

    pub fn min_q(&self) -> f64 {
        self.q.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn max_abs_d(&self) -> f64 {
        max_abs(&to_mat(&self.d))
    }

    pub fn divergence(&self) -> Mat<f64> {
        divergence(&to_mat(&self.u), &to_mat(&self.v), &self.grid)
    }

    pub fn max_divergence(&self) -> f64 {
        max_abs(&self.divergence())
    }

    /// Interior local maxima of the x marginal above `rel` of its peak.
    pub fn x_maxima(&self, rel: f64) -> Vec<f64> {
        let m = self.x_marginal();
        let top = m.iter().cloned().fold(0.0, f64::max);
        (1..m.len() - 1)
            .filter(|&j| m[j] > m[j - 1] && m[j] >= m[j + 1] && m[j] > rel * top)
            .map(|j| self.grid.x()[j])
            .collect()
    }
}

fn integrate(f: &[Vec<f64>], grid: &PhaseGrid) -> f64 {
    let wr = quadrature_weights(grid.r().len(), grid.dr());
    let wx = quadrature_weights(grid.x().len(), grid.dx());
    f.iter().zip(&wr).map(|(row, a)| row.iter().zip(&wx).map(|(v, b)| v * a * b).sum::<f64>()).sum()
}

/// `W(α) = (2/π)Tr[ρ D(α) Π D†(α)]` of a single-mode state, normalized as
/// `∬ W dq dp = 1` with `α = q + ip`. Rows index q, columns p.
///
/// Uses the Laguerre recursion for the displaced Fock matrix elements.
pub fn wigner_cavity(rho: &DensityMatrix, grid: &QuadratureGrid) -> Result<Mat<f64>> {
    let n = match rho.space() {
        Space::Single(n) => n,
        Space::Joint(_) => return Err(Error::InvalidDimension("wigner_cavity needs a single-mode state".into())),
    };
    check_tail(n, grid.max_radius())?;
    let m = rho.matrix();
    let mut out = Mat::<f64>::zeros(grid.q().len(), grid.p().len());
    let mut wl = vec![C64::new(0.0, 0.0); n];
    for (i, &q) in grid.q().iter().enumerate() {
        for (j, &p) in grid.p().iter().enumerate() {
            let a = C64::new(q, p);
            let a2 = 2.0 * a;
            wl[0] = C64::new((-2.0 * a.norm_sqr()).exp() / std::f64::consts::PI, 0.0);
            let mut w = m[(0, 0)].re * wl[0].re;
            for k in 1..n {
                wl[k] = a2 * wl[k - 1] / (k as f64).sqrt();
                w += 2.0 * (m[(0, k)] * wl[k]).re;
            }
            for r in 1..n {
                let sr = (r as f64).sqrt();
                let mut temp = wl[r];
                wl[r] = (a2.conj() * temp - sr * wl[r - 1]) / sr;
                w += (m[(r, r)] * wl[r]).re;
                for k in r + 1..n {
                    let next = (a2 * wl[k - 1] - sr * temp) / (k as f64).sqrt();
                    temp = wl[k];
                    wl[k] = next;
                    w += 2.0 * (m[(r, k)] * wl[k]).re;
                }
            }
            out[(i, j)] = 2.0 * w;
        }
    }
    Ok(out)
}
