//! Run configuration, read from TOML.
//!
//! ```toml
//! out = "results"
//! workers = 4
//!
//! [engine]          # any EngineParams field; omitted ones keep their defaults
//! beta = 1.5
//! g_kappa = 10.0
//!
//! [dims]
//! n_cav = 10
//! n_mol = 40
//! auto = false      # true: grow from (n_cav, n_mol) until observables settle
//! rtol = 1e-3
//!
//! [[sweep.axes]]
//! name = "g_kappa"
//! min = 2.0
//! max = 10.0
//! points = 5
//! ```

use std::path::{Path, PathBuf};

use optomech::normalmodes::TwoModeParams;
use optomech::quantum::DEFAULT_MEMORY_BUDGET;
use optomech::EngineParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SWEEP_AXES: [&str; 3] = ["g_kappa", "beta", "g_omega"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub engine: EngineParams,
    pub dims: DimsConfig,
    pub sweep: SweepConfig,
    pub grid: GridConfig,
    pub classical: ClassicalConfig,
    pub normal_modes: NormalModesConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimsConfig {
    pub n_cav: usize,
    pub n_mol: usize,
    pub auto: bool,
    pub rtol: f64,
    pub max_refinements: usize,
    pub memory_budget_bytes: usize,
}

impl Default for DimsConfig {
    fn default() -> Self {
        Self { n_cav: 10, n_mol: 40, auto: false, rtol: 1e-3, max_refinements: 16, memory_budget_bytes: DEFAULT_MEMORY_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        (0..self.points)
            .map(|i| {
                if i == self.points - 1 {
                    self.max
                } else {
                    self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<Axis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Defaults to the Fock-tail limit of the cavity truncation.
    pub r_max: Option<f64>,
    pub n_r: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub n_phi: usize,
    /// Defaults to the Fock-tail limit over √2.
    pub wigner_half_width: Option<f64>,
    pub wigner_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r_max: None,
            n_r: 80,
            x_min: -12.0,
            x_max: 12.0,
            n_x: 120,
            n_phi: 64,
            wigner_half_width: None,
            wigner_points: 81,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalConfig {
    pub t_max: f64,
    pub dt: f64,
    /// `(n_a, x)` starting points for `classical-sim`.
    pub initial: Vec<(f64, f64)>,
    /// Keep every k-th sample in trajectory files.
    pub stride: usize,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            t_max: optomech::classical::DEFAULT_T_MAX,
            dt: optomech::classical::DEFAULT_DT,
            initial: vec![(0.0, -2.0)],
            stride: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalModesConfig {
    pub params: TwoModeParams,
    pub window: (f64, f64),
    pub samples: usize,
    pub table: Axis,
    /// Largest acceptable RMS relative residual of the logistic fit.
    pub max_rms: f64,
}

impl Default for NormalModesConfig {
    fn default() -> Self {
        Self {
            params: TwoModeParams::default(),
            window: (-4.0, 4.0),
            samples: 81,
            table: Axis { name: "x".into(), min: -20.0, max: 80.0, points: 501 },
            max_rms: 0.05,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Apply `k=v,k=v` overrides to the engine block.
    pub fn apply_point(&mut self, point: &str) -> Result<(), CliError> {
        for pair in point.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| bad(format!("--point entry `{pair}` is not k=v")))?;
            let v: f64 = v.trim().parse().map_err(|_| bad(format!("--point value for `{}` is not a number", k.trim())))?;
            self.engine.set(k.trim(), v).map_err(|e| bad(format!("--point: {e}")))?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.engine.validate().map_err(|e| bad(format!("[engine] {e}")))?;
        let d = &self.dims;
        if d.n_cav < 2 || d.n_mol < 2 {
            return Err(bad("[dims] n_cav and n_mol must be at least 2"));
        }
        if !(d.rtol > 0.0 && d.rtol.is_finite()) {
            return Err(bad("[dims] rtol must be positive"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers must be at least 1"));
        }
        for (i, a) in self.sweep.axes.iter().enumerate() {
            if !SWEEP_AXES.contains(&a.name.as_str()) {
                return Err(bad(format!("[sweep] axis {i}: `{}` is not one of {SWEEP_AXES:?}", a.name)));
            }
            if !a.min.is_finite() || !a.max.is_finite() {
                return Err(bad(format!("[sweep] axis `{}`: range must be finite", a.name)));
            }
            if a.points == 0 {
                return Err(bad(format!("[sweep] axis `{}`: points must be at least 1", a.name)));
            }
        }
        if self.sweep.axes.len() == 2 && self.sweep.axes[0].name == self.sweep.axes[1].name {
            return Err(bad("[sweep] the two axes must differ"));
        }
        if self.sweep.axes.len() > 2 {
            return Err(bad("[sweep] at most two axes"));
        }
        let g = &self.grid;
        if g.n_r < 2 || g.n_x < 2 || g.wigner_points < 2 {
            return Err(bad("[grid] every axis needs at least two points"));
        }
        if !(g.x_max > g.x_min) {
            return Err(bad("[grid] x_max must exceed x_min"));
        }
        if g.n_phi < 16 {
            return Err(bad("[grid] n_phi must be at least 16"));
        }
        let c = &self.classical;
        if !(c.dt > 0.0 && c.t_max > c.dt) || c.stride == 0 {
            return Err(bad("[classical] need 0 < dt < t_max and stride ≥ 1"));
        }
        let nm = &self.normal_modes;
        nm.params.validate().map_err(|e| bad(format!("[normal_modes.params] {e}")))?;
        if nm.table.points < 1 || !(nm.table.max >= nm.table.min) {
            return Err(bad("[normal_modes.table] invalid range"));
        }
        Ok(())
    }

    /// Engine parameters at one sweep point.
    pub fn engine_at(&self, values: &[(String, f64)]) -> Result<EngineParams, CliError> {
        let mut p = self.engine.clone();
        for (k, v) in values {
            p.set(k, *v).map_err(|e| bad(e.to_string()))?;
        }
        Ok(p)
    }

    /// Cartesian product of the sweep axes in row-major order.
    pub fn sweep_points(&self) -> Vec<Vec<(String, f64)>> {
        let mut out: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for a in &self.sweep.axes {
            let vals = a.values();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push((a.name.clone(), v));
                        p
                    })
                })
                .collect();
        }
        out
    }
}
