use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::C64;

/// Largest Poisson mass a coherent probe may lose beyond the Fock cutoff.
pub const FOCK_TAIL_TOL: f64 = 1e-6;

const UNIFORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    r: Vec<f64>,
    x: Vec<f64>,
    n_phi: usize,
}

fn check_axis(name: &str, v: &[f64]) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::InvalidParameter(format!("{name} axis needs at least two points")));
    }
    if v.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} axis has non-finite values")));
    }
    let h = v[1] - v[0];
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("{name} axis is not increasing")));
    }
    let span = v[v.len() - 1] - v[0];
    for w in v.windows(2) {
        if ((w[1] - w[0]) - h).abs() > UNIFORM_TOL * span.max(1.0) {
            return Err(Error::InvalidParameter(format!("{name} axis is not uniform")));
        }
    }
    Ok(h)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

impl PhaseGrid {
    pub fn new(r: Vec<f64>, x: Vec<f64>, n_phi: usize) -> Result<Self> {
        let dr = check_axis("r", &r)?;
        check_axis("x", &x)?;
        if r[0] < 0.0 || r[0] > dr {
            return Err(Error::InvalidParameter(format!("r axis must start in [0, dr], got {}", r[0])));
        }
        if n_phi < 16 {
            return Err(Error::InvalidParameter(format!("need at least 16 phase samples, got {n_phi}")));
        }
        Ok(Self { r, x, n_phi })
    }

    pub fn uniform(r_max: f64, n_r: usize, x_range: (f64, f64), n_x: usize, n_phi: usize) -> Result<Self> {
        if n_r < 2 || n_x < 2 {
            return Err(Error::InvalidParameter("grid needs at least two points per axis".into()));
        }
        Self::new(linspace(0.0, r_max, n_r), linspace(x_range.0, x_range.1, n_x), n_phi)
    }

    /// 80 × 120 points over r ≤ min(0.8√n_cav, r_tail) and x ∈ [−12, 12]x₀,
    /// 64 phase samples. `r_tail` is where the Fock tail reaches [`FOCK_TAIL_TOL`].
    pub fn default_for(n_cav: usize, x0: f64) -> Result<Self> {
        let r_max = (0.8 * (n_cav as f64).sqrt()).min(max_reliable_radius(n_cav, FOCK_TAIL_TOL));
        Self::uniform(r_max, 80, (-12.0 * x0, 12.0 * x0), 120, 64)
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn dr(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn r_max(&self) -> f64 {
        self.r[self.r.len() - 1]
    }

    pub fn with_n_phi(&self, n_phi: usize) -> Result<Self> {
        Self::new(self.r.clone(), self.x.clone(), n_phi)
    }
}

/// Cavity quadrature plane, `α = q + ip`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    q: Vec<f64>,
    p: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        check_axis("q", &q)?;
        check_axis("p", &p)?;
        Ok(Self { q, p })
    }

    pub fn square(half_width: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("grid needs at least two points per axis".into()));
        }
        let v = linspace(-half_width, half_width, n);
        Self::new(v.clone(), v)
    }

    /// Square of half-width r_tail with 81 points a side.
    pub fn default_for(n_cav: usize) -> Result<Self> {
        Self::square(max_reliable_radius(n_cav, FOCK_TAIL_TOL) / 2f64.sqrt(), 81)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn max_radius(&self) -> f64 {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        m(&self.q).hypot(m(&self.p))
    }
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `e^{−r²/2} rⁿ/√n!` for n < levels.
pub fn coherent_moduli(levels: usize, r: f64) -> Vec<f64> {
    if r == 0.0 {
        return (0..levels).map(|n| if n == 0 { 1.0 } else { 0.0 }).collect();
    }
    let lr = r.ln();
    let mut lf = 0.0;
    (0..levels)
        .map(|n| {
            if n > 0 {
                lf += (n as f64).ln();
            }
            (-0.5 * r * r + n as f64 * lr - 0.5 * lf).exp()
        })
        .collect()
}

/// Poisson mass of `|r e^{iφ}⟩` at n ≥ levels.
pub fn fock_tail(levels: usize, r: f64) -> f64 {
    let kept: f64 = coherent_moduli(levels, r).iter().map(|a| a * a).sum();
    // for small tails the complement sum avoids cancellation
    let lam = r * r;
    if lam == 0.0 {
        return 0.0;
    }
    let mut tail = 0.0;
    for n in levels..levels + 400 {
        let t = (-lam + n as f64 * lam.ln() - ln_factorial(n)).exp();
        tail += t;
        if t < 1e-18 * tail.max(1e-300) && n as f64 > lam {
            break;
        }
    }
    if tail < 1e-3 {
        tail
    } else {
        (1.0 - kept).max(0.0)
    }
}

/// Largest r whose Fock tail stays at or below `tol`.
pub fn max_reliable_radius(levels: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, (levels as f64).sqrt() + 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if fock_tail(levels, mid) > tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Normalized Hermite functions `ψ_k(x)` of the oscillator with ⟨x²⟩₀ = x₀².
pub fn hermite_functions(levels: usize, x: f64, x0: f64) -> Vec<f64> {
    let xi = x / x0;
    let mut out = Vec::with_capacity(levels);
    if levels == 0 {
        return out;
    }
    out.push((2.0 * std::f64::consts::PI * x0 * x0).powf(-0.25) * (-0.25 * xi * xi).exp());
    if levels > 1 {
        out.push(xi * out[0]);
    }
    for k in 1..levels.saturating_sub(1) {
        let next = (xi * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Product probe `|re^{iφ}⟩ ⊗ |x⟩` in the truncated joint basis.
#[derive(Clone, Debug)]
pub struct CoherentPositionProbe {
    pub coherent: Vec<C64>,
    pub position: Vec<f64>,
}

impl CoherentPositionProbe {
    pub fn new(n_cav: usize, n_mol: usize, r: f64, phi: f64, x: f64, x0: f64) -> Self {
        let coherent = coherent_moduli(n_cav, r)
            .into_iter()
            .enumerate()
            .map(|(n, a)| C64::from_polar(a, n as f64 * phi))
            .collect();
        Self { coherent, position: hermite_functions(n_mol, x, x0) }
    }

    /// `⟨probe|m|probe⟩` for a joint matrix in cavity-major order.
    pub fn expect(&self, m: &faer::Mat<C64>) -> C64 {
        let nm = self.position.len();
        let mut acc = C64::new(0.0, 0.0);
        for (n, cn) in self.coherent.iter().enumerate() {
            for (n2, cn2) in self.coherent.iter().enumerate() {
                let mut s = C64::new(0.0, 0.0);
                for (k, pk) in self.position.iter().enumerate() {
                    for (l, pl) in self.position.iter().enumerate() {
                        s += m[(n * nm + k, n2 * nm + l)] * (pk * pl);
                    }
                }
                acc += cn.conj() * cn2 * s;
            }
        }
        acc
    }
}
