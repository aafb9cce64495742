//! Two coupled cavity modes hybridized by the molecular coordinate: normal
//! frequencies, the Bogoliubov rotation, the exact reservoir rates of the
//! lower mode and fits of the effective logistic / linear model to them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoModeParams {
    pub omega_a: f64,
    pub omega_b: f64,
    /// Per unit length.
    pub g_a: f64,
    pub g_b: f64,
    pub g: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub n_a: f64,
    pub n_b: f64,
}

impl Default for TwoModeParams {
    /// Frequencies in units of `g`, couplings per `x₀`.
    fn default() -> Self {
        Self {
            omega_a: 100.0,
            omega_b: 1000.0,
            g_a: -1.0,
            g_b: -20.0,
            g: 1.0,
            kappa_a: 0.05,
            kappa_b: 0.05,
            n_a: 4.0,
            n_b: 0.0,
        }
    }
}

impl TwoModeParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.omega_a,
            self.omega_b,
            self.g_a,
            self.g_b,
            self.g,
            self.kappa_a,
            self.kappa_b,
            self.n_a,
            self.n_b,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("two-mode parameters must be finite".into()));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidParameter(format!("g must be positive, got {}", self.g)));
        }
        if !(self.omega_a < self.omega_b) {
            return Err(Error::InvalidParameter("need omega_a < omega_b".into()));
        }
        if self.kappa_a < 0.0 || self.kappa_b < 0.0 || self.n_a < 0.0 || self.n_b < 0.0 {
            return Err(Error::InvalidParameter("rates and occupations must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn detuning(&self, x: f64) -> f64 {
        self.omega_a - self.omega_b + (self.g_a - self.g_b) * x
    }

    /// Bare frequency matrix `[[ω_A + g_A x, g/2], [g/2, ω_B + g_B x]]`.
    pub fn bare_matrix(&self, x: f64) -> [[f64; 2]; 2] {
        [[self.omega_a + self.g_a * x, 0.5 * self.g], [0.5 * self.g, self.omega_b + self.g_b * x]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModeSample {
    pub x: f64,
    pub delta: f64,
    pub omega: f64,
    /// Lower normal frequency.
    pub omega_a: f64,
    pub omega_b: f64,
    /// Rows map `(A, B)` onto `a` and `b`.
    pub u: [[f64; 2]; 2],
    pub kappa_h: f64,
    pub kappa_c: f64,
}

/// `(ω_a, ω_b)`, lower and upper roots of the bare frequency matrix.
pub fn normal_frequencies(x: f64, p: &TwoModeParams) -> (f64, f64) {
    let mean = 0.5 * (p.omega_a + p.omega_b + (p.g_a + p.g_b) * x);
    let half = 0.5 * p.detuning(x).hypot(p.g);
    (mean - half, mean + half)
}

/// Squared first-row entries `(u₁₁², u₁₂²) = ((Ω−Δ)/2Ω, (Ω+Δ)/2Ω)`, written
/// without cancellation on either side of the anticrossing.
fn weights(delta: f64, omega: f64, g: f64) -> (f64, f64) {
    if delta >= 0.0 {
        let hi = (omega + delta) / (2.0 * omega);
        (g * g / (2.0 * omega * (omega + delta)), hi)
    } else {
        let lo = (omega - delta) / (2.0 * omega);
        (lo, g * g / (2.0 * omega * (omega - delta)))
    }
}

pub fn bogoliubov(x: f64, p: &TwoModeParams) -> NormalModeSample {
    let delta = p.detuning(x);
    let omega = delta.hypot(p.g);
    let (w11, w12) = weights(delta, omega, p.g);
    let (s, c) = (w11.sqrt(), w12.sqrt());
    let (omega_a, omega_b) = normal_frequencies(x, p);
    NormalModeSample {
        x,
        delta,
        omega,
        omega_a,
        omega_b,
        u: [[-s, c], [c, s]],
        kappa_h: p.kappa_a * w11,
        kappa_c: p.kappa_b * w12,
    }
}

/// `(κ_h, κ_c) = (κ_A u₁₁², κ_B u₁₂²)`.
pub fn exact_rates(x: f64, p: &TwoModeParams) -> (f64, f64) {
    let s = bogoliubov(x, p);
    (s.kappa_h, s.kappa_c)
}

impl NormalModeSample {
    /// `max |u uᵀ − I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let u = &self.u;
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let v = u[i][0] * u[j][0] + u[i][1] * u[j][1] - if i == j { 1.0 } else { 0.0 };
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    /// `uᵀ diag(ω_a, ω_b) u`, which should equal the bare matrix.
    pub fn reconstruct(&self) -> [[f64; 2]; 2] {
        let u = &self.u;
        let w = [self.omega_a, self.omega_b];
        let mut m = [[0.0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..2).map(|k| u[k][i] * w[k] * u[k][j]).sum();
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFit {
    pub g_kappa: f64,
    pub kappa0: f64,
    /// Centre of the logistic crossover.
    pub offset: f64,
    pub g_omega: f64,
    /// Linear-fit frequency at x = 0.
    pub omega_a: f64,
    /// Relative residuals of both fitted rates, pooled.
    pub logistic_rms: f64,
    pub logistic_max: f64,
    pub linear_rms: f64,
    pub linear_max: f64,
    pub samples: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `κ₀/(1 + e^{g(x−c)})`; the cold rate is the complement.
pub fn logistic_hot(x: f64, kappa0: f64, g_kappa: f64, offset: f64) -> f64 {
    kappa0 * sigmoid(-g_kappa * (x - offset))
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn logistic_residuals(xs: &[f64], hot: &[f64], cold: &[f64], k0: f64, g: f64, c: f64) -> Vec<f64> {
    let mut r = Vec::with_capacity(2 * xs.len());
    for ((&x, &h), &cc) in xs.iter().zip(hot).zip(cold) {
        let z = g * (x - c);
        r.push(k0 * sigmoid(-z) / h - 1.0);
        r.push(k0 * sigmoid(z) / cc - 1.0);
    }
    r
}

fn rms(r: &[f64]) -> f64 {
    (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt()
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Fit `κ_h,c ≈ κ₀/(1 + e^{±g_κ(x−c)})` and `ω_a(x) ≈ ω_a + g_ω x` on
/// `samples` uniform points of `window`.
///
/// κ₀ is the window mean of `κ_h + κ_c`. The logistic is linear in its
/// log-odds `ln(κ_c/κ_h) = g_κ(x − c)`, which gives the start; Gauss-Newton
/// on the pooled relative residuals of both rates then refines it.
pub fn fit_effective_params(p: &TwoModeParams, window: (f64, f64), samples: usize) -> Result<EffectiveFit> {
    p.validate()?;
    let (lo, hi) = window;
    if samples < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::DegenerateWindow(format!("[{lo}, {hi}] with {samples} samples")));
    }
    let xs: Vec<f64> = (0..samples).map(|i| lo + (hi - lo) * i as f64 / (samples - 1) as f64).collect();
    let pts: Vec<NormalModeSample> = xs.iter().map(|&x| bogoliubov(x, p)).collect();
    let hot: Vec<f64> = pts.iter().map(|s| s.kappa_h).collect();
    let cold: Vec<f64> = pts.iter().map(|s| s.kappa_c).collect();
    if hot.iter().chain(&cold).any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateWindow("a reservoir rate vanishes in the window".into()));
    }
    let k0 = hot.iter().zip(&cold).map(|(h, c)| h + c).sum::<f64>() / samples as f64;

    let odds: Vec<f64> = hot.iter().zip(&cold).map(|(h, c)| (c / h).ln()).collect();
    let (slope, intercept) = line_fit(&xs, &odds);
    if !(slope.abs() > 1e-300) {
        return Err(Error::DegenerateWindow("rates do not vary across the window".into()));
    }
    let (mut g, mut c) = (slope, -intercept / slope);
    let mut res = logistic_residuals(&xs, &hot, &cold, k0, g, c);
    let mut cost: f64 = res.iter().map(|v| v * v).sum();
    for _ in 0..50 {
        // J columns: ∂r/∂g, ∂r/∂c
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (i, &x) in xs.iter().enumerate() {
            let z = g * (x - c);
            let w = k0 * sigmoid(z) * sigmoid(-z);
            let dz = [x - c, -g];
            for (k, target, sign) in [(2 * i, hot[i], -1.0), (2 * i + 1, cold[i], 1.0)] {
                let jrow = [sign * w * dz[0] / target, sign * w * dz[1] / target];
                for a in 0..2 {
                    jtr[a] += jrow[a] * res[k];
                    for b in 0..2 {
                        jtj[a][b] += jrow[a] * jrow[b];
                    }
                }
            }
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if !(det.abs() > 0.0) {
            break;
        }
        let dg = -(jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let dc = -(jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-6 {
            let r = logistic_residuals(&xs, &hot, &cold, k0, g + t * dg, c + t * dc);
            let cst: f64 = r.iter().map(|v| v * v).sum();
            if cst <= cost {
                g += t * dg;
                c += t * dc;
                res = r;
                improved = cost - cst > 1e-15 * cost.max(1e-300);
                cost = cst;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }

    let wa: Vec<f64> = pts.iter().map(|s| s.omega_a).collect();
    let (g_omega, omega0) = line_fit(&xs, &wa);
    let lin: Vec<f64> = xs.iter().zip(&wa).map(|(x, w)| (omega0 + g_omega * x) / w - 1.0).collect();
    Ok(EffectiveFit {
        g_kappa: g,
        kappa0: k0,
        offset: c,
        g_omega,
        omega_a: omega0,
        logistic_rms: rms(&res),
        logistic_max: max_abs(&res),
        linear_rms: rms(&lin),
        linear_max: max_abs(&lin),
        samples,
    })
}

/// `dω_a/dx`.
pub fn lower_frequency_slope(x: f64, p: &TwoModeParams) -> f64 {
    let delta = p.detuning(x);
    0.5 * ((p.g_a + p.g_b) - delta * (p.g_a - p.g_b) / delta.hypot(p.g))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub x: f64,
    pub bare_a: f64,
    pub bare_b: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_a_linear: f64,
    pub kappa_h: f64,
    pub kappa_c: f64,
    pub kappa_h_logistic: f64,
    pub kappa_c_logistic: f64,
}

/// Exact against effective quantities at each `x`.
pub fn comparison_table(p: &TwoModeParams, fit: &EffectiveFit, xs: &[f64]) -> Vec<ComparisonRow> {
    xs.iter()
        .map(|&x| {
            let s = bogoliubov(x, p);
            let h = logistic_hot(x, fit.kappa0, fit.g_kappa, fit.offset);
            ComparisonRow {
                x,
                bare_a: p.omega_a + p.g_a * x,
                bare_b: p.omega_b + p.g_b * x,
                omega_a: s.omega_a,
                omega_b: s.omega_b,
                omega_a_linear: fit.omega_a + fit.g_omega * x,
                kappa_h: s.kappa_h,
                kappa_c: s.kappa_c,
                kappa_h_logistic: h,
                kappa_c_logistic: fit.kappa0 - h,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn at_crossing(p: &TwoModeParams) -> f64 {
        (p.omega_b - p.omega_a) / (p.g_a - p.g_b)
    }

    #[test]
    fn gap_at_anticrossing() {
        let p = TwoModeParams::default();
        let x = at_crossing(&p);
        let s = bogoliubov(x, &p);
        assert!(s.delta.abs() < 1e-12);
        assert!((s.omega_b - s.omega_a - p.g).abs() < 1e-10);
        assert!((s.u[0][0].powi(2) - 0.5).abs() < 1e-12);
        assert!((s.u[0][1].powi(2) - 0.5).abs() < 1e-12);
        let (h, c) = exact_rates(x, &p);
        assert!((h - 0.5 * p.kappa_a).abs() < 1e-13 && (c - 0.5 * p.kappa_b).abs() < 1e-13);
    }

    #[test]
    fn matches_paper_matrix_form() {
        // oracle: the literal entries −g/√(2Ω²+2ΩΔ), (Ω+Δ)/√(2Ω²+2ΩΔ), ... away from cancellation
        let p = TwoModeParams::default();
        for x in [45.0, 47.0, 48.0, 49.5] {
            let s = bogoliubov(x, &p);
            let (d, o, g) = (s.delta, s.omega, p.g);
            let n1 = (2.0 * o * o + 2.0 * o * d).sqrt();
            let n2 = (2.0 * o * o - 2.0 * o * d).sqrt();
            let want = [[-g / n1, (o + d) / n1], [g / n2, (o - d) / n2]];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((s.u[i][j] - want[i][j]).abs() < 1e-12, "x={x} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn decoupling_limit() {
        let p = TwoModeParams::default();
        let far = bogoliubov(1e6, &p);
        assert!(far.delta > 0.0);
        assert!(far.u[0][0].powi(2) < 1e-12);
        let near = bogoliubov(-1e6, &p);
        assert!(near.u[0][1].powi(2) < 1e-12);
    }

    #[test]
    fn hot_rate_decreases_in_window() {
        let p = TwoModeParams::default();
        let mut prev = f64::INFINITY;
        for i in 0..=800 {
            let x = -4.0 + 0.01 * i as f64;
            let (h, _) = exact_rates(x, &p);
            assert!(h < prev);
            prev = h;
        }
    }

    #[test]
    fn synthetic_logistic_is_recovered() {
        let xs: Vec<f64> = (0..41).map(|i| -4.0 + 0.2 * i as f64).collect();
        let (k0, g, c) = (0.05, 1.7, 0.3);
        let hot: Vec<f64> = xs.iter().map(|&x| logistic_hot(x, k0, g, c)).collect();
        let cold: Vec<f64> = hot.iter().map(|h| k0 - h).collect();
        let odds: Vec<f64> = hot.iter().zip(&cold).map(|(h, c)| (c / h).ln()).collect();
        let (slope, intercept) = line_fit(&xs, &odds);
        assert!((slope - g).abs() < 1e-8);
        assert!((-intercept / slope - c).abs() < 1e-8);
        assert!(max_abs(&logistic_residuals(&xs, &hot, &cold, k0, slope, -intercept / slope)) < 1e-10);
    }

    #[test]
    fn fit_recovers_logistic_from_exact_rates() {
        let p = TwoModeParams::default();
        let xc = at_crossing(&p);
        let w = 0.002;
        let fit = fit_effective_params(&p, (xc - w, xc + w), 41).unwrap();
        let slope_at_center = (p.g_a - p.g_b) / p.g;
        // ln(κ_c/κ_h) = ln((Ω+Δ)/(Ω−Δ)) = 2 asinh(Δ/g), derivative 2(g_A−g_B)/g at Δ = 0
        assert!((fit.g_kappa - 2.0 * slope_at_center).abs() < 1e-3 * fit.g_kappa, "{}", fit.g_kappa);
        assert!((fit.offset - xc).abs() < 1e-9);
        assert!((fit.kappa0 - p.kappa_a).abs() < 1e-15);
    }

    #[test]
    fn paper_window_fit_quality() {
        let p = TwoModeParams::default();
        let fit = fit_effective_params(&p, (-4.0, 4.0), 81).unwrap();
        assert!(fit.logistic_rms <= 0.05, "{fit:?}");
        assert!(fit.g_kappa > 0.0);
        let analytic = lower_frequency_slope(0.0, &p);
        assert!(fit.g_omega.signum() == analytic.signum());
        assert!((fit.g_omega - analytic).abs() < 1e-3 * analytic.abs());
        assert!(fit.linear_max < 1e-6);
    }

    #[test]
    fn degenerate_windows() {
        let p = TwoModeParams::default();
        assert!(matches!(fit_effective_params(&p, (1.0, 1.0), 10), Err(Error::DegenerateWindow(_))));
        assert!(matches!(fit_effective_params(&p, (0.0, 1.0), 1), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn parameter_validation() {
        assert!(TwoModeParams { g: 0.0, ..TwoModeParams::default() }.validate().is_err());
        assert!(TwoModeParams { omega_a: 2000.0, ..TwoModeParams::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn identities_hold(x in -1000.0f64..1000.0) {
            let p = TwoModeParams::default();
            let s = bogoliubov(x, &p);
            prop_assert!(s.orthogonality_defect() <= 1e-12);
            prop_assert!(s.omega >= p.g);
            let bare = p.bare_matrix(x);
            let m = s.reconstruct();
            let scale = bare[0][0].abs().max(bare[1][1].abs());
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((m[i][j] - bare[i][j]).abs() <= 1e-10 * scale.max(1.0));
                }
            }
            let trace = p.omega_a + p.omega_b + (p.g_a + p.g_b) * x;
            prop_assert!((s.omega_a + s.omega_b - trace).abs() <= 1e-12 * trace.abs().max(1.0));
            let det = bare[0][0] * bare[1][1] - bare[0][1] * bare[1][0];
            prop_assert!((s.omega_a * s.omega_b - det).abs() <= 1e-9 * det.abs().max(1.0));
            let (h, c) = exact_rates(x, &p);
            prop_assert!((h + c - p.kappa_a).abs() <= 1e-15);
        }
    }
}
