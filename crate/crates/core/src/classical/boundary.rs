use serde::{Deserialize, Serialize};

use super::fixed_points::{bisect, fixed_point_function, scan_roots, SCAN_STEP, SCAN_WINDOW};
use crate::model::{potential_derivs, EngineParams};

/// Upper end of the β scan used to locate boundary roots.
pub const BETA_SCAN_MAX: f64 = 10.0;
const BETA_SCAN_POINTS: usize = 4000;
pub const BETA_TOL: f64 = 1e-8;

/// Inflection points of V (zeros of V″), ascending.
pub fn inflection_points(p: &EngineParams) -> Vec<f64> {
    scan_roots(|x| potential_derivs(x, p).1, SCAN_WINDOW.0, SCAN_WINDOW.1, SCAN_STEP, 1e-12)
}

/// Smallest β for which V has inflection points: V″(0) = mω² − 2β/L² = 0.
pub fn beta_min(p: &EngineParams) -> f64 {
    0.5 * p.mass * p.omega_m * p.omega_m * p.barrier_width * p.barrier_width
}

/// `(f₋, f₊)` with `f± = ħ g_ω n̄_eff(x±) + V′(x±)` at the outermost pair of
/// inflection points, or `None` when V″ does not change sign.
pub fn boundary_functions(p: &EngineParams) -> Option<(f64, f64)> {
    let xs = inflection_points(p);
    if xs.len() < 2 {
        return None;
    }
    let (xm, xp) = (xs[0], xs[xs.len() - 1]);
    Some((fixed_point_function(xm, p), fixed_point_function(xp, p)))
}

/// Whether the slow-manifold analysis predicts self-oscillation: the fixed
/// point sits on the unstable middle branch between the inflection points.
pub fn predicts_limit_cycle(p: &EngineParams) -> bool {
    match boundary_functions(p) {
        Some((fm, fp)) => fm < 0.0 && fp > 0.0,
        None => false,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub g_kappa: f64,
    /// Roots in β of `f₋` (boundary through the lower inflection point).
    pub beta_minus: Vec<f64>,
    /// Roots in β of `f₊`.
    pub beta_plus: Vec<f64>,
    /// Neither branch has a root in the scanned β range.
    pub gap: bool,
}

fn roots_in_beta(p: &EngineParams, branch: usize) -> Vec<f64> {
    let lo = beta_min(p) * (1.0 + 1e-6);
    let f = |b: f64| {
        let mut q = p.clone();
        q.beta = b;
        boundary_functions(&q).map(|(fm, fp)| if branch == 0 { fm } else { fp })
    };
    let step = (BETA_SCAN_MAX - lo) / BETA_SCAN_POINTS as f64;
    let mut roots = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..=BETA_SCAN_POINTS {
        let b = lo + step * i as f64;
        let Some(v) = f(b) else {
            prev = None;
            continue;
        };
        if let Some((bp, vp)) = prev {
            if vp * v < 0.0 {
                let g = |x: f64| f(x).unwrap_or(f64::NAN);
                roots.push(bisect(&g, bp, b, vp, BETA_TOL));
            } else if v == 0.0 {
                roots.push(b);
            }
        }
        prev = Some((b, v));
    }
    roots
}

/// Boundary curves `β±(g_κ)` for every `g_κ` in the grid.
pub fn operational_boundary(p: &EngineParams, g_kappa_grid: &[f64]) -> Vec<BoundaryPoint> {
    g_kappa_grid
        .iter()
        .map(|&g| {
            let mut q = p.clone();
            q.g_kappa = g;
            let beta_minus = roots_in_beta(&q, 0);
            let beta_plus = roots_in_beta(&q, 1);
            let gap = beta_minus.is_empty() && beta_plus.is_empty();
            BoundaryPoint { g_kappa: g, beta_minus, beta_plus, gap }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inflection_points_symmetric() {
        let p = EngineParams { beta: 1.5, ..EngineParams::default() };
        let xs = inflection_points(&p);
        assert_eq!(xs.len(), 2);
        assert!((xs[0] + xs[1]).abs() < 1e-10);
        for x in xs {
            assert!(potential_derivs(x, &p).1.abs() < 1e-10);
        }
        let flat = EngineParams { beta: 0.2, ..EngineParams::default() };
        assert!(inflection_points(&flat).is_empty());
        assert!(boundary_functions(&flat).is_none());
    }

    #[test]
    fn boundary_root_satisfies_condition() {
        let p = EngineParams::default();
        let pts = operational_boundary(&p, &[10.0]);
        assert_eq!(pts.len(), 1);
        assert!(!pts[0].beta_plus.is_empty());
        for &b in &pts[0].beta_plus {
            let q = EngineParams { beta: b, g_kappa: 10.0, ..p.clone() };
            assert!(boundary_functions(&q).unwrap().1.abs() < 1e-6);
        }
    }

    #[test]
    fn uncoupled_limit_recedes_to_fold() {
        // θ = 0, g_ω → 0⁻: f₊ = V′(x₊) < 0 for every β above the fold, so there
        // is no root left except at the fold itself.
        let p = EngineParams { theta: 0.0, g_omega: -1e-9, ..EngineParams::default() };
        let pts = operational_boundary(&p, &[2.0, 8.0]);
        for pt in pts {
            assert!(pt.beta_plus.iter().all(|&b| b < beta_min(&p) + 1e-3), "{:?}", pt.beta_plus);
            assert!(pt.beta_minus.iter().all(|&b| b < beta_min(&p) + 1e-3), "{:?}", pt.beta_minus);
        }
    }
}
