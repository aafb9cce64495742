use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{n_eff, n_eff_derivative, potential_derivs, EngineParams, HBAR};

/// Scan window for fixed points and inflection points.
pub const SCAN_WINDOW: (f64, f64) = (-8.0, 8.0);
pub const SCAN_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: f64,
    pub n_a: f64,
    pub jacobian: [[f64; 2]; 2],
    /// `(re, im)` of the two eigenvalues.
    pub eigenvalues: [(f64, f64); 2],
    pub stability: Stability,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct StabilityReport {
    pub points: Vec<FixedPoint>,
}

impl StabilityReport {
    pub fn stable(&self) -> impl Iterator<Item = &FixedPoint> {
        self.points.iter().filter(|f| f.stability == Stability::Stable)
    }
}

/// `ħ g_ω n̄_eff(x) + V′(x)`; its zeros are the fixed points.
pub fn fixed_point_function(x: f64, p: &EngineParams) -> f64 {
    HBAR * p.g_omega * n_eff(x, p) + potential_derivs(x, p).0
}

/// All sign changes of `f` on a uniform grid, refined by bisection to `tol`.
pub fn scan_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64, tol: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    let mut roots = Vec::new();
    let mut xa = lo;
    let mut fa = f(xa);
    for i in 1..=n {
        let xb = lo + step * i as f64;
        let fb = f(xb);
        if fa == 0.0 {
            roots.push(xa);
        } else if fa * fb < 0.0 {
            roots.push(bisect(&f, xa, xb, fa, tol));
        }
        xa = xb;
        fa = fb;
    }
    if fa == 0.0 {
        roots.push(xa);
    }
    roots
}

pub fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> f64 {
    while b - a > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

pub fn jacobian(x: f64, p: &EngineParams) -> [[f64; 2]; 2] {
    let mg = p.mass * p.gamma;
    [
        [-p.kappa0, p.kappa0 * n_eff_derivative(x, p)],
        [-HBAR * p.g_omega / mg, -potential_derivs(x, p).1 / mg],
    ]
}

fn eigenvalues(j: &[[f64; 2]; 2]) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = Complex64::new(tr * tr / 4.0 - det, 0.0).sqrt();
    let half = Complex64::new(tr / 2.0, 0.0);
    [half + disc, half - disc]
}

fn classify(ev: &[Complex64; 2]) -> Stability {
    let (a, b) = (ev[0].re, ev[1].re);
    if a < 0.0 && b < 0.0 {
        Stability::Stable
    } else if a * b < 0.0 {
        Stability::Saddle
    } else {
        Stability::Unstable
    }
}

pub fn find_fixed_points(p: &EngineParams) -> StabilityReport {
    let f = |x: f64| fixed_point_function(x, p);
    let roots = scan_roots(f, SCAN_WINDOW.0, SCAN_WINDOW.1, SCAN_STEP, 1e-10);
    let points = roots
        .into_iter()
        .map(|x| {
            let j = jacobian(x, p);
            let ev = eigenvalues(&j);
            FixedPoint {
                x,
                n_a: n_eff(x, p),
                jacobian: j,
                eigenvalues: [(ev[0].re, ev[0].im), (ev[1].re, ev[1].im)],
                stability: classify(&ev),
                residual: fixed_point_function(x, p).abs(),
            }
        })
        .collect();
    StabilityReport { points }
}
