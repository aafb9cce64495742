use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{n_eff, potential_derivs, EngineParams, HBAR};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub n_a: f64,
    pub x: f64,
}

impl ClassicalState {
    pub fn new(n_a: f64, x: f64) -> Self {
        Self { n_a, x }
    }

    fn is_finite(&self) -> bool {
        self.n_a.is_finite() && self.x.is_finite()
    }
}

/// `(ṅ_a, ẋ)` of the overdamped mean-field equations.
pub fn rhs(s: ClassicalState, p: &EngineParams) -> (f64, f64) {
    let dn = -p.kappa0 * (s.n_a - n_eff(s.x, p));
    let dx = -(potential_derivs(s.x, p).0 + HBAR * p.g_omega * s.n_a) / (p.mass * p.gamma);
    (dn, dx)
}

/// Instantaneous radiation-pressure power `−ħ g_ω n_a ẋ`.
pub fn instantaneous_power(s: ClassicalState, p: &EngineParams) -> f64 {
    -HBAR * p.g_omega * s.n_a * rhs(s, p).1
}

/// Field energy `ħ(ω_a + g_ω x) n_a`.
pub fn field_energy(s: ClassicalState, p: &EngineParams) -> f64 {
    HBAR * (p.omega_a + p.g_omega * s.x) * s.n_a
}

#[derive(Clone, Debug)]
pub struct ClassicalTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ClassicalState>,
    pub dt: f64,
    pub params: EngineParams,
}

impl ClassicalTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> ClassicalState {
        *self.states.last().expect("trajectory has at least the initial state")
    }
}

fn rk4_step(s: ClassicalState, p: &EngineParams, h: f64) -> ClassicalState {
    let add = |s: ClassicalState, k: (f64, f64), c: f64| ClassicalState {
        n_a: s.n_a + c * k.0,
        x: s.x + c * k.1,
    };
    let k1 = rhs(s, p);
    let k2 = rhs(add(s, k1, h / 2.0), p);
    let k3 = rhs(add(s, k2, h / 2.0), p);
    let k4 = rhs(add(s, k3, h), p);
    ClassicalState {
        n_a: s.n_a + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        x: s.x + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    }
}

/// Fixed-step RK4 from `s0` to `t_max`.
pub fn simulate(
    s0: ClassicalState,
    p: &EngineParams,
    t_max: f64,
    dt: f64,
) -> Result<ClassicalTrajectory> {
    if !(dt > 0.0) || !(t_max > dt) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < dt < t_max (dt = {dt}, t_max = {t_max})"
        )));
    }
    if !s0.is_finite() {
        return Err(Error::InvalidParameter(format!("non-finite initial state {s0:?}")));
    }
    let steps = (t_max / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut s = s0;
    times.push(0.0);
    states.push(s);
    for i in 1..=steps {
        s = rk4_step(s, p, dt);
        let t = dt * i as f64;
        if !s.is_finite() {
            return Err(Error::IntegrationBlowup {
                t,
                detail: format!("state became non-finite after step {i} (last good {:?})", states[i - 1]),
            });
        }
        times.push(t);
        states.push(s);
    }
    Ok(ClassicalTrajectory { times, states, dt, params: p.clone() })
}

/// Dense output of the adaptive integrator. The state is augmented with the
/// accumulated work `w = ∫ −ħ g_ω n_a ẋ dt`.
#[derive(Clone, Debug)]
pub struct AdaptiveTrajectory {
    pub times: Vec<f64>,
    /// `[n_a, x, w]`
    pub states: Vec<[f64; 3]>,
    pub derivs: Vec<[f64; 3]>,
}

impl AdaptiveTrajectory {
    /// Cubic Hermite interpolation on step `i` (between `times[i]` and `times[i+1]`).
    pub fn interpolate(&self, i: usize, t: f64) -> [f64; 3] {
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = h00 * self.states[i][k]
                + h10 * h * self.derivs[i][k]
                + h01 * self.states[i + 1][k]
                + h11 * h * self.derivs[i + 1][k];
        }
        out
    }
}

fn augmented_rhs(y: &[f64; 3], p: &EngineParams) -> [f64; 3] {
    let s = ClassicalState::new(y[0], y[1]);
    let (dn, dx) = rhs(s, p);
    [dn, dx, -HBAR * p.g_omega * y[0] * dx]
}

/// Dormand–Prince 5(4) with error control on all three components.
pub fn simulate_adaptive(
    s0: ClassicalState,
    p: &EngineParams,
    t_max: f64,
    rtol: f64,
    atol: f64,
) -> Result<AdaptiveTrajectory> {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut t = 0.0;
    let mut y = [s0.n_a, s0.x, 0.0];
    let mut f = augmented_rhs(&y, p);
    let mut h = 1e-3;
    let mut out = AdaptiveTrajectory { times: vec![t], states: vec![y], derivs: vec![f] };
    while t < t_max {
        if t + h > t_max {
            h = t_max - t;
        }
        let mut k = [[0.0; 3]; 7];
        k[0] = f;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                for c in 0..3 {
                    ys[c] += h * A[s][j] * kj[c];
                }
            }
            k[s] = augmented_rhs(&ys, p);
        }
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            for c in 0..3 {
                y_new[c] += h * A[6][j] * kj[c];
            }
        }
        let mut err: f64 = 0.0;
        for c in 0..3 {
            let e: f64 = (0..7).map(|j| E[j] * k[j][c]).sum::<f64>() * h;
            let sc = atol + rtol * y[c].abs().max(y_new[c].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            return Err(Error::IntegrationBlowup { t, detail: "non-finite error estimate".into() });
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            f = k[6];
            out.times.push(t);
            out.states.push(y);
            out.derivs.push(f);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-12 * t_max.max(1.0) {
            return Err(Error::Stiffness { t, h });
        }
    }
    Ok(out)
}
