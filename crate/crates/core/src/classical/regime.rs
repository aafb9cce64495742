use serde::{Deserialize, Serialize};

use super::fixed_points::find_fixed_points;
use super::integrate::{
    field_energy, instantaneous_power, rhs, simulate, simulate_adaptive, ClassicalState,
    ClassicalTrajectory,
};
use crate::error::{Error, Result};
use crate::model::{EngineParams, HBAR};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_MAX: f64 = 2000.0;

/// Relative spread allowed among the last crossing intervals.
pub const PERIOD_SPREAD: f64 = 1e-3;
const INTERVALS: usize = 5;
/// Below this peak-to-peak amplitude in x an oscillation is treated as settled.
const MIN_AMPLITUDE: f64 = 1e-6;
/// Tolerance for "the probe has come to rest".
const REST_TOL: f64 = 1e-6;
/// Attractors closer than this in x are the same attractor.
const SAME_ATTRACTOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FixedPoint,
    LimitCycle,
    Bistable,
    Undetermined,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::FixedPoint => "fixed_point",
            Regime::LimitCycle => "limit_cycle",
            Regime::Bistable => "bistable",
            Regime::Undetermined => "undetermined",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleMetrics {
    pub regime: Regime,
    pub period: Option<f64>,
    pub avg_power: f64,
    pub work: f64,
    /// `(1/T)[E(t_end) − E(t_start)]` for the field energy over the loop.
    pub energy_loop_term: f64,
    pub loop_points: Vec<ClassicalState>,
    /// Resting states reached by probes that did not oscillate.
    pub fixed_points: Vec<ClassicalState>,
}

impl CycleMetrics {
    fn at_rest(regime: Regime, fixed_points: Vec<ClassicalState>) -> Self {
        Self {
            regime,
            period: None,
            avg_power: 0.0,
            work: 0.0,
            energy_loop_term: 0.0,
            loop_points: Vec::new(),
            fixed_points,
        }
    }
}

/// Initial-condition box and integration settings for regime classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub n_range: (f64, f64),
    pub x_range: (f64, f64),
    pub t_max: f64,
    pub dt: f64,
    pub perturbation: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { n_range: (0.0, 4.0), x_range: (-3.0, 3.0), t_max: DEFAULT_T_MAX, dt: DEFAULT_DT, perturbation: 1e-3 }
    }
}

impl ProbeConfig {
    /// Box spanning the reservoir occupations.
    pub fn for_params(p: &EngineParams) -> Self {
        Self { n_range: (p.n_cold.min(p.n_hot), p.n_cold.max(p.n_hot)), ..Self::default() }
    }

    /// The four box corners, then every stable fixed point nudged by `perturbation`.
    pub fn probes(&self, p: &EngineParams) -> Vec<ClassicalState> {
        let (n0, n1) = self.n_range;
        let (x0, x1) = self.x_range;
        let mut out = vec![
            ClassicalState::new(n0, x0),
            ClassicalState::new(n0, x1),
            ClassicalState::new(n1, x0),
            ClassicalState::new(n1, x1),
        ];
        for fp in find_fixed_points(p).stable() {
            out.push(ClassicalState::new(fp.n_a + self.perturbation, fp.x + self.perturbation));
        }
        out
    }
}

/// Upward crossings of `level` by x, refined with cubic Hermite interpolation
/// (the derivative is available from the vector field).
pub fn upward_crossings(traj: &ClassicalTrajectory, level: f64, from: usize) -> Vec<(usize, f64)> {
    let p = &traj.params;
    let mut out = Vec::new();
    for i in from..traj.len() - 1 {
        let (a, b) = (traj.states[i].x - level, traj.states[i + 1].x - level);
        if a < 0.0 && b >= 0.0 {
            out.push((i, crossing_time(traj, i, level, p)));
        }
    }
    out
}

fn hermite(traj: &ClassicalTrajectory, i: usize, t: f64, p: &EngineParams) -> ClassicalState {
    let (t0, t1) = (traj.times[i], traj.times[i + 1]);
    let (s0, s1) = (traj.states[i], traj.states[i + 1]);
    let (d0, d1) = (rhs(s0, p), rhs(s1, p));
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    ClassicalState {
        n_a: h00 * s0.n_a + h10 * h * d0.0 + h01 * s1.n_a + h11 * h * d1.0,
        x: h00 * s0.x + h10 * h * d0.1 + h01 * s1.x + h11 * h * d1.1,
    }
}

fn crossing_time(traj: &ClassicalTrajectory, i: usize, level: f64, p: &EngineParams) -> f64 {
    let (mut a, mut b) = (traj.times[i], traj.times[i + 1]);
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if hermite(traj, i, m, p).x < level {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Crossing times of the settled half of a trajectory, if it is a limit cycle.
struct CycleWindow {
    crossings: Vec<(usize, f64)>,
}

enum Outcome {
    Cycle(CycleWindow),
    Rest(ClassicalState),
    Unsettled,
}

fn analyze(traj: &ClassicalTrajectory) -> Outcome {
    let half = traj.len() / 2;
    let tail = &traj.states[half..];
    let level = tail.iter().map(|s| s.x).sum::<f64>() / tail.len() as f64;
    let crossings = upward_crossings(traj, level, half);
    if crossings.len() > INTERVALS {
        let k = crossings.len();
        let iv: Vec<f64> = (k - INTERVALS..k).map(|j| crossings[j].1 - crossings[j - 1].1).collect();
        let mean = iv.iter().sum::<f64>() / iv.len() as f64;
        let spread = iv.iter().fold(0.0f64, |m, v| m.max((v - mean).abs())) / mean;
        let amp = |a: usize, b: usize| {
            let seg = &traj.states[crossings[a].0..=crossings[b].0];
            let (lo, hi) = seg.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.x), hi.max(s.x))
            });
            hi - lo
        };
        let first = amp(k - INTERVALS - 1, k - INTERVALS);
        let last = amp(k - 2, k - 1);
        if spread <= PERIOD_SPREAD && last > MIN_AMPLITUDE && (first - last).abs() <= 1e-2 * last {
            return Outcome::Cycle(CycleWindow { crossings });
        }
    }
    let end = traj.last();
    let (dn, dx) = rhs(end, &traj.params);
    let drift = traj.states[traj.len() * 9 / 10..]
        .iter()
        .fold(0.0f64, |m, s| m.max((s.x - end.x).abs()).max((s.n_a - end.n_a).abs()));
    if dn.abs().max(dx.abs()) <= REST_TOL && drift <= 10.0 * REST_TOL {
        Outcome::Rest(end)
    } else {
        Outcome::Unsettled
    }
}

/// Trapezoid integral of `g` over `[ta, tb]` on the uniform samples, with
/// interpolated end pieces.
fn integrate_window(
    traj: &ClassicalTrajectory,
    (ia, ta): (usize, f64),
    (ib, tb): (usize, f64),
    g: impl Fn(ClassicalState) -> f64,
) -> f64 {
    let p = &traj.params;
    let sa = hermite(traj, ia, ta, p);
    let sb = hermite(traj, ib, tb, p);
    let mut acc = 0.5 * (g(sa) + g(traj.states[ia + 1])) * (traj.times[ia + 1] - ta);
    for i in ia + 1..ib {
        acc += 0.5 * (g(traj.states[i]) + g(traj.states[i + 1])) * (traj.times[i + 1] - traj.times[i]);
    }
    acc += 0.5 * (g(traj.states[ib]) + g(sb)) * (tb - traj.times[ib]);
    acc
}

fn metrics_from_window(traj: &ClassicalTrajectory, w: &CycleWindow) -> CycleMetrics {
    let p = &traj.params;
    let k = w.crossings.len();
    let a = w.crossings[k - 2];
    let b = w.crossings[k - 1];
    let period = b.1 - a.1;
    let work = integrate_window(traj, a, b, |s| instantaneous_power(s, p));
    let sa = hermite(traj, a.0, a.1, p);
    let sb = hermite(traj, b.0, b.1, p);
    let energy_loop_term = (field_energy(sb, p) - field_energy(sa, p)) / period;
    let stride = ((b.0 - a.0) / 2000).max(1);
    let mut loop_points: Vec<ClassicalState> =
        (a.0 + 1..=b.0).step_by(stride).map(|i| traj.states[i]).collect();
    loop_points.insert(0, sa);
    loop_points.push(sb);
    CycleMetrics {
        regime: Regime::LimitCycle,
        period: Some(period),
        avg_power: work / period,
        work,
        energy_loop_term,
        loop_points,
        fixed_points: Vec::new(),
    }
}

/// Period, cycle-averaged power and work over the last detected cycle.
pub fn cycle_power(traj: &ClassicalTrajectory) -> Result<CycleMetrics> {
    match analyze(traj) {
        Outcome::Cycle(w) => Ok(metrics_from_window(traj, &w)),
        Outcome::Rest(s) => Err(Error::NotACycle(format!("trajectory settles at {s:?}"))),
        Outcome::Unsettled => Err(Error::NotACycle("no periodic crossings after the transient".into())),
    }
}

/// `−ħ g_ω ∮ n_a dx` around a closed polygon of states (trapezoid rule).
pub fn loop_work(points: &[ClassicalState], p: &EngineParams) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (points[i], points[(i + 1) % n]);
        acc += 0.5 * (a.n_a + b.n_a) * (b.x - a.x);
    }
    -HBAR * p.g_omega * acc
}

pub fn classify_regime(p: &EngineParams, cfg: &ProbeConfig) -> Result<CycleMetrics> {
    p.validate()?;
    let mut rests: Vec<ClassicalState> = Vec::new();
    let mut cycles: Vec<CycleMetrics> = Vec::new();
    let mut unsettled = false;
    for s0 in cfg.probes(p) {
        let traj = simulate(s0, p, cfg.t_max, cfg.dt)?;
        match analyze(&traj) {
            Outcome::Cycle(w) => {
                let m = metrics_from_window(&traj, &w);
                let known = cycles.iter().any(|c| {
                    let (t0, t1) = (c.period.unwrap_or(0.0), m.period.unwrap_or(0.0));
                    (t0 - t1).abs() <= 1e-2 * t0.max(t1)
                });
                if !known {
                    cycles.push(m);
                }
            }
            Outcome::Rest(s) => {
                if !rests.iter().any(|r| (r.x - s.x).abs() < SAME_ATTRACTOR) {
                    rests.push(s);
                }
            }
            Outcome::Unsettled => unsettled = true,
        }
    }
    rests.sort_by(|a, b| a.x.total_cmp(&b.x));
    let attractors = rests.len() + cycles.len();
    if attractors >= 2 {
        let mut m = match cycles.into_iter().next() {
            Some(c) => c,
            None => CycleMetrics::at_rest(Regime::Bistable, Vec::new()),
        };
        m.regime = Regime::Bistable;
        m.fixed_points = rests;
        return Ok(m);
    }
    if unsettled {
        return Ok(CycleMetrics::at_rest(Regime::Undetermined, rests));
    }
    if let Some(c) = cycles.into_iter().next() {
        return Ok(c);
    }
    if rests.len() == 1 {
        return Ok(CycleMetrics::at_rest(Regime::FixedPoint, rests));
    }
    Ok(CycleMetrics::at_rest(Regime::Undetermined, rests))
}

/// Period and power of the limit cycle from the adaptive integrator, with the
/// work carried as an extra state variable. Independent of the RK4 path.
pub fn cycle_power_adaptive(
    s0: ClassicalState,
    p: &EngineParams,
    t_max: f64,
    rtol: f64,
    atol: f64,
) -> Result<(f64, f64)> {
    let traj = simulate_adaptive(s0, p, t_max, rtol, atol)?;
    let start = traj.times.partition_point(|&t| t < t_max / 2.0);
    // time-weighted mean of x over the settled half
    let mut area = 0.0;
    for i in start..traj.times.len() - 1 {
        area += 0.5 * (traj.states[i][1] + traj.states[i + 1][1]) * (traj.times[i + 1] - traj.times[i]);
    }
    let level = area / (traj.times[traj.times.len() - 1] - traj.times[start]);
    let mut crossings: Vec<(f64, f64)> = Vec::new();
    for i in start..traj.times.len() - 1 {
        let (a, b) = (traj.states[i][1] - level, traj.states[i + 1][1] - level);
        if a < 0.0 && b >= 0.0 {
            let (mut lo, mut hi) = (traj.times[i], traj.times[i + 1]);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if traj.interpolate(i, m)[1] < level {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            let t = 0.5 * (lo + hi);
            crossings.push((t, traj.interpolate(i, t)[2]));
        }
    }
    if crossings.len() < 2 {
        return Err(Error::NotACycle("adaptive run shows no periodic crossings".into()));
    }
    let k = crossings.len();
    let period = crossings[k - 1].0 - crossings[k - 2].0;
    let power = (crossings[k - 1].1 - crossings[k - 2].1) / period;
    Ok((period, power))
}
