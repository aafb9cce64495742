//! Engine parameters, the double-well potential, the logistic cavity rates
//! and the operator-level Hamiltonian / Liouvillian.
//!
//! Units: ħ = ω_m = x₀ = 1, so the default mass is ½.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    dissipator, ladder, operator_function, tensor_in, HilbertDims, Operator, Space, SuperOperator,
    C64,
};

pub const HBAR: f64 = 1.0;

/// Largest superoperator (in stored nonzeros) `build_liouvillian` will assemble.
pub const DEFAULT_NNZ_BUDGET: usize = 30_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineParams {
    pub omega_m: f64,
    pub mass: f64,
    pub theta: f64,
    pub beta: f64,
    pub barrier_width: f64,
    pub g_omega: f64,
    pub g_kappa: f64,
    pub kappa0: f64,
    pub n_hot: f64,
    pub n_cold: f64,
    pub gamma: f64,
    pub n_th: f64,
    pub omega_a: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            omega_m: 1.0,
            mass: 0.5,
            theta: 1.0,
            beta: 2.0,
            barrier_width: 1.0,
            g_omega: -1.0,
            g_kappa: 4.0,
            kappa0: 0.05,
            n_hot: 4.0,
            n_cold: 0.0,
            gamma: 0.5,
            n_th: 0.0,
            omega_a: 100.0,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega_m", self.omega_m),
            ("mass", self.mass),
            ("theta", self.theta),
            ("beta", self.beta),
            ("barrier_width", self.barrier_width),
            ("g_omega", self.g_omega),
            ("g_kappa", self.g_kappa),
            ("kappa0", self.kappa0),
            ("n_hot", self.n_hot),
            ("n_cold", self.n_cold),
            ("gamma", self.gamma),
            ("n_th", self.n_th),
            ("omega_a", self.omega_a),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        let positive = [
            ("omega_m", self.omega_m),
            ("mass", self.mass),
            ("kappa0", self.kappa0),
            ("gamma", self.gamma),
            ("barrier_width", self.barrier_width),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        let nonneg = [
            ("beta", self.beta),
            ("n_hot", self.n_hot),
            ("n_cold", self.n_cold),
            ("n_th", self.n_th),
        ];
        for (name, v) in nonneg {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Zero-point amplitude `√(ħ/2mω_m)`.
    pub fn x0(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega_m)).sqrt()
    }

    /// Set a parameter by its field name (used by sweeps and `--point`).
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "omega_m" => &mut self.omega_m,
            "mass" => &mut self.mass,
            "theta" => &mut self.theta,
            "beta" => &mut self.beta,
            "barrier_width" => &mut self.barrier_width,
            "g_omega" => &mut self.g_omega,
            "g_kappa" => &mut self.g_kappa,
            "kappa0" => &mut self.kappa0,
            "n_hot" => &mut self.n_hot,
            "n_cold" => &mut self.n_cold,
            "gamma" => &mut self.gamma,
            "n_th" => &mut self.n_th,
            "omega_a" => &mut self.omega_a,
            _ => return Err(Error::InvalidParameter(format!("unknown parameter `{name}`"))),
        };
        *slot = value;
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "omega_m" => self.omega_m,
            "mass" => self.mass,
            "theta" => self.theta,
            "beta" => self.beta,
            "barrier_width" => self.barrier_width,
            "g_omega" => self.g_omega,
            "g_kappa" => self.g_kappa,
            "kappa0" => self.kappa0,
            "n_hot" => self.n_hot,
            "n_cold" => self.n_cold,
            "gamma" => self.gamma,
            "n_th" => self.n_th,
            "omega_a" => self.omega_a,
            _ => return None,
        })
    }
}

pub fn potential(x: f64, p: &EngineParams) -> f64 {
    let l2 = p.barrier_width * p.barrier_width;
    0.5 * p.mass * p.omega_m * p.omega_m * x * x + p.theta * x + p.beta * (-x * x / l2).exp()
}

/// `(V′(x), V″(x))`.
pub fn potential_derivs(x: f64, p: &EngineParams) -> (f64, f64) {
    let l2 = p.barrier_width * p.barrier_width;
    let k = p.mass * p.omega_m * p.omega_m;
    let g = p.beta * (-x * x / l2).exp();
    let d1 = k * x + p.theta - 2.0 * x / l2 * g;
    let d2 = k + (4.0 * x * x / (l2 * l2) - 2.0 / l2) * g;
    (d1, d2)
}

/// `V‴(x)`, used to bracket inflection points.
pub fn potential_third(x: f64, p: &EngineParams) -> f64 {
    let l2 = p.barrier_width * p.barrier_width;
    let g = p.beta * (-x * x / l2).exp();
    (12.0 * x / (l2 * l2) - 8.0 * x * x * x / (l2 * l2 * l2)) * g
}

fn logistic(z: f64) -> f64 {
    // 1/(1+e^z) without overflow
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// `(κ_h(x), κ_c(x))`.
pub fn rates(x: f64, p: &EngineParams) -> (f64, f64) {
    let z = p.g_kappa * x;
    (p.kappa0 * logistic(z), p.kappa0 * logistic(-z))
}

pub fn n_eff(x: f64, p: &EngineParams) -> f64 {
    let (kh, kc) = rates(x, p);
    (kh * p.n_hot + kc * p.n_cold) / p.kappa0
}

/// `d n̄_eff / dx`.
pub fn n_eff_derivative(x: f64, p: &EngineParams) -> f64 {
    let s = logistic(p.g_kappa * x);
    // d/dx 1/(1+e^{g x}) = -g s (1-s)
    -p.g_kappa * s * (1.0 - s) * (p.n_hot - p.n_cold)
}

/// Molecular operators in the oscillator eigenbasis of the harmonic part.
#[derive(Clone, Debug)]
pub struct MolecularOps {
    pub x: Operator,
    pub p: Operator,
    pub hamiltonian: Operator,
    pub kappa_h: Operator,
    pub kappa_c: Operator,
    pub sqrt_kappa_h: Operator,
    pub sqrt_kappa_c: Operator,
}

impl MolecularOps {
    pub fn new(params: &EngineParams, n_mol: usize) -> Result<Self> {
        params.validate()?;
        let b = ladder(n_mol)?;
        let bd = b.adjoint();
        let x = b.add(&bd)?.scale_re(params.x0());
        let p = bd.sub(&b)?.scale(C64::new(0.0, HBAR / (2.0 * params.x0())));
        let kinetic = p.mul(&p)?.scale_re(1.0 / (2.0 * params.mass));
        let v = operator_function(&x, |s| potential(s, params))?;
        let hamiltonian = kinetic.add(&v)?;
        let kappa_h = operator_function(&x, |s| rates(s, params).0)?;
        let kappa_c = operator_function(&x, |s| rates(s, params).1)?;
        let sqrt_kappa_h = operator_function(&x, |s| rates(s, params).0.sqrt())?;
        let sqrt_kappa_c = operator_function(&x, |s| rates(s, params).1.sqrt())?;
        Ok(Self { x, p, hamiltonian, kappa_h, kappa_c, sqrt_kappa_h, sqrt_kappa_c })
    }
}

/// Joint-space operators of the engine.
#[derive(Clone, Debug)]
pub struct EngineOperators {
    pub dims: HilbertDims,
    pub a: Operator,
    pub n_a: Operator,
    pub x: Operator,
    pub p: Operator,
    pub hamiltonian: Operator,
    /// `(ω_a + g_ω x̂) â†â`, the field energy entering the heat currents.
    pub h_field: Operator,
    pub jump_hot: Operator,
    pub jump_cold: Operator,
}

impl EngineOperators {
    pub fn new(params: &EngineParams, dims: HilbertDims) -> Result<Self> {
        let mol = MolecularOps::new(params, dims.n_mol)?;
        let cav = Space::Single(dims.n_cav);
        let mspace = Space::Single(dims.n_mol);
        let ic = Operator::identity(cav);
        let im = Operator::identity(mspace);
        let a1 = ladder(dims.n_cav)?;
        let n1 = a1.adjoint().mul(&a1)?;

        let a = tensor_in(dims, &a1, &im)?;
        let n_a = tensor_in(dims, &n1, &im)?;
        let x = tensor_in(dims, &ic, &mol.x)?;
        let p = tensor_in(dims, &ic, &mol.p)?;
        let h_mol = tensor_in(dims, &ic, &mol.hamiltonian)?;
        let h_field = n_a
            .scale_re(HBAR * params.omega_a)
            .add(&tensor_in(dims, &n1, &mol.x)?.scale_re(HBAR * params.g_omega))?;
        let hamiltonian = h_field.add(&h_mol)?;
        let jump_hot = tensor_in(dims, &a1, &mol.sqrt_kappa_h)?;
        let jump_cold = tensor_in(dims, &a1, &mol.sqrt_kappa_c)?;
        Ok(Self { dims, a, n_a, x, p, hamiltonian, h_field, jump_hot, jump_cold })
    }

    pub fn space(&self) -> Space {
        Space::Joint(self.dims)
    }
}

pub fn build_hamiltonian(params: &EngineParams, dims: HilbertDims) -> Result<Operator> {
    Ok(EngineOperators::new(params, dims)?.hamiltonian)
}

/// The generator split into the pieces the power and flow diagnostics need.
#[derive(Clone, Debug)]
pub struct LiouvillianParts {
    pub hamiltonian: SuperOperator,
    pub hot: SuperOperator,
    pub cold: SuperOperator,
    pub gamma: SuperOperator,
    pub full: SuperOperator,
}

impl LiouvillianParts {
    /// `𝓛_h + 𝓛_c`.
    pub fn reservoirs(&self) -> Result<SuperOperator> {
        self.hot.add(&self.cold)
    }
}

/// Rough upper bound on stored nonzeros of the assembled generator.
pub fn estimate_liouvillian_nnz(ops: &EngineOperators) -> usize {
    let d = ops.dims.joint();
    let h = ops.hamiltonian.nnz();
    let l = ops.jump_hot.nnz().max(ops.jump_cold.nnz());
    let x = ops.x.nnz();
    let p = ops.p.nnz();
    // spre/spost of H and L†L, jump sandwiches, CL sandwiches
    2 * d * h + 4 * d * l + l * l * 4 + 2 * (x * p + x * x) + 4 * d * x
}

pub fn build_liouvillian(params: &EngineParams, dims: HilbertDims) -> Result<LiouvillianParts> {
    build_liouvillian_with_budget(params, dims, DEFAULT_NNZ_BUDGET)
}

pub fn build_liouvillian_with_budget(
    params: &EngineParams,
    dims: HilbertDims,
    nnz_budget: usize,
) -> Result<LiouvillianParts> {
    let ops = EngineOperators::new(params, dims)?;
    let est = estimate_liouvillian_nnz(&ops);
    if est > nnz_budget {
        return Err(Error::MemoryBudget { required: est * 24, budget: nnz_budget * 24, best: None });
    }
    liouvillian_from_ops(params, &ops)
}

pub fn liouvillian_from_ops(params: &EngineParams, ops: &EngineOperators) -> Result<LiouvillianParts> {
    let hamiltonian = SuperOperator::hamiltonian(&ops.hamiltonian).scale_re(1.0 / HBAR);
    let reservoir = |l: &Operator, n: f64| -> Result<SuperOperator> {
        dissipator(l).scale_re(n + 1.0).add(&dissipator(&l.adjoint()).scale_re(n))
    };
    let hot = reservoir(&ops.jump_hot, params.n_hot)?;
    let cold = reservoir(&ops.jump_cold, params.n_cold)?;
    let gamma = caldeira_leggett(&ops.x, &ops.p, params.gamma, params.n_th)?;
    let full = hamiltonian.add(&hot)?.add(&cold)?.add(&gamma)?;
    Ok(LiouvillianParts { hamiltonian, hot, cold, gamma, full })
}

/// `ρ ↦ −(iγ/2ħ)[x,{p,ρ}] − (γ/ħ)(n_th+½)[x,[x,ρ]]`.
pub fn caldeira_leggett(x: &Operator, p: &Operator, gamma: f64, n_th: f64) -> Result<SuperOperator> {
    let xp = x.mul(p)?;
    let px = p.mul(x)?;
    let xx = x.mul(x)?;
    let friction = SuperOperator::spre(&xp)
        .add(&SuperOperator::sandwich(x, p)?)?
        .sub(&SuperOperator::sandwich(p, x)?)?
        .sub(&SuperOperator::spost(&px))?
        .scale(C64::new(0.0, -gamma / (2.0 * HBAR)));
    let diffusion = SuperOperator::spre(&xx)
        .add(&SuperOperator::spost(&xx))?
        .sub(&SuperOperator::sandwich(x, x)?.scale_re(2.0))?
        .scale_re(-gamma / HBAR * (n_th + 0.5));
    friction.add(&diffusion)
}

/// Harmonic occupation left invariant by the Caldeira-Leggett term: the
/// momentum variance relaxes to `ħ(n_th+½)`, so `n = (n_th+½)/(mω_m) − ½`.
pub fn cl_equilibrium_occupation(params: &EngineParams) -> f64 {
    (params.n_th + 0.5) / (params.mass * params.omega_m) - 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{devectorize, vectorize};
    use faer::Mat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fig1() -> EngineParams {
        EngineParams { beta: 2.0, ..EngineParams::default() }
    }

    #[test]
    fn x0_is_unity() {
        assert!((EngineParams::default().x0() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn potential_at_origin() {
        assert_eq!(potential(0.0, &fig1()), 2.0);
    }

    #[test]
    fn potential_symmetric_without_tilt() {
        let p = EngineParams { theta: 0.0, ..fig1() };
        for i in 0..50 {
            let x = 0.13 * i as f64;
            assert!((potential(x, &p) - potential(-x, &p)).abs() < 1e-14);
        }
    }

    #[test]
    fn two_local_minima_at_fig1() {
        let p = fig1();
        let xs: Vec<f64> = (0..=12000).map(|i| -6.0 + 1e-3 * i as f64).collect();
        let v: Vec<f64> = xs.iter().map(|&x| potential(x, &p)).collect();
        let minima = (1..v.len() - 1).filter(|&i| v[i] < v[i - 1] && v[i] < v[i + 1]).count();
        assert_eq!(minima, 2);
    }

    #[test]
    fn derivatives_at_origin() {
        let p = fig1();
        let (d1, d2) = potential_derivs(0.0, &p);
        assert_eq!(d1, p.theta);
        assert!((d2 - (p.mass - 2.0 * p.beta)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = fig1();
        let h = 1e-5;
        for i in 0..=200 {
            let x = -5.0 + 0.05 * i as f64;
            let (d1, d2) = potential_derivs(x, &p);
            let fd1 = (potential(x + h, &p) - potential(x - h, &p)) / (2.0 * h);
            let fd2 = (potential_derivs(x + h, &p).0 - potential_derivs(x - h, &p).0) / (2.0 * h);
            let fd3 = (potential_derivs(x + h, &p).1 - potential_derivs(x - h, &p).1) / (2.0 * h);
            assert!((d1 - fd1).abs() <= 1e-6 * d1.abs().max(1.0), "V' at {x}");
            assert!((d2 - fd2).abs() <= 1e-6 * d2.abs().max(1.0), "V'' at {x}");
            let d3 = potential_third(x, &p);
            assert!((d3 - fd3).abs() <= 1e-6 * d3.abs().max(1.0), "V''' at {x}");
        }
    }

    #[test]
    fn rates_midpoint_and_values() {
        let p = EngineParams { g_kappa: 4.0, kappa0: 0.05, ..fig1() };
        let (kh, kc) = rates(0.0, &p);
        assert_eq!(kh, 0.025);
        assert_eq!(kc, 0.025);
        let (kh, _) = rates(1.0, &p);
        assert!((kh - 0.05 / (1.0 + 4f64.exp())).abs() < 1e-16);
    }

    #[test]
    fn n_eff_limits() {
        let p = fig1();
        assert!((n_eff(0.0, &p) - 2.0).abs() < 1e-15);
        assert!((n_eff(50.0, &p) - p.n_cold).abs() < 1e-12);
        assert!((n_eff(-50.0, &p) - p.n_hot).abs() < 1e-12);
        let h = 1e-6;
        for x in [-1.3, -0.2, 0.0, 0.7, 2.0] {
            let fd = (n_eff(x + h, &p) - n_eff(x - h, &p)) / (2.0 * h);
            assert!((fd - n_eff_derivative(x, &p)).abs() < 1e-7);
        }
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            EngineParams { kappa0: 0.0, ..fig1() },
            EngineParams { gamma: -1.0, ..fig1() },
            EngineParams { beta: -0.1, ..fig1() },
            EngineParams { n_th: f64::NAN, ..fig1() },
        ];
        for p in bad {
            assert!(p.validate().is_err());
        }
        let mut p = fig1();
        assert!(p.set("nope", 1.0).is_err());
        p.set("beta", 3.0).unwrap();
        assert_eq!(p.get("beta"), Some(3.0));
    }

    #[test]
    fn decoupled_harmonic_spectrum() {
        let p = EngineParams { g_omega: 0.0, beta: 0.0, theta: 0.0, omega_a: 3.7, ..fig1() };
        let dims = HilbertDims::new(4, 12).unwrap();
        let h = build_hamiltonian(&p, dims).unwrap();
        let (vals, _) = crate::hilbert::hermitian_eigen(&h).unwrap();
        let mut want = Vec::new();
        for n in 0..4 {
            for k in 0..11 {
                want.push(p.omega_a * n as f64 + k as f64 + 0.5);
            }
        }
        // the top oscillator level carries the truncation defect; match the rest
        for w in want {
            assert!(vals.iter().any(|v| (v - w).abs() < 1e-8), "missing level {w}");
        }
    }

    #[test]
    fn field_energy_vanishes_in_vacuum() {
        let ops = EngineOperators::new(&fig1(), HilbertDims::new(3, 10).unwrap()).unwrap();
        let d = ops.dims.joint();
        let mut rho = Mat::<C64>::zeros(d, d);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        assert!(ops.n_a.trace_product(&rho).norm() < 1e-15);
        assert!(ops.h_field.trace_product(&rho).norm() < 1e-15);
    }

    /// Colbert–Miller sinc-DVR on a uniform grid; `ħ²/2m = 1` in these units.
    fn grid_ground_energy(p: &EngineParams) -> f64 {
        let n = 801;
        let (lo, hi) = (-12.0, 12.0);
        let dx = (hi - lo) / (n - 1) as f64;
        let c = HBAR * HBAR / (2.0 * p.mass);
        let m = Mat::<f64>::from_fn(n, n, |i, j| {
            let x = lo + dx * i as f64;
            if i == j {
                c * std::f64::consts::PI.powi(2) / (3.0 * dx * dx) + potential(x, p)
            } else {
                let k = i as f64 - j as f64;
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                c * 2.0 * sign / (k * k * dx * dx)
            }
        });
        let evd = m.self_adjoint_eigen(faer::Side::Lower).unwrap();
        (0..n).map(|i| evd.S()[i]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn ground_energy_matches_grid_diagonalization() {
        let p = fig1();
        let mol = MolecularOps::new(&p, 60).unwrap();
        let (vals, _) = crate::hilbert::hermitian_eigen(&mol.hamiltonian).unwrap();
        let e_grid = grid_ground_energy(&p);
        assert!((vals[0] - e_grid).abs() < 1e-6, "basis {} grid {}", vals[0], e_grid);
    }

    #[test]
    fn kappa_operators_sum_to_kappa0() {
        let p = fig1();
        let mol = MolecularOps::new(&p, 30).unwrap();
        let sum = mol.kappa_h.add(&mol.kappa_c).unwrap();
        let target = Operator::identity(Space::Single(30)).scale_re(p.kappa0);
        assert!(sum.sub(&target).unwrap().max_abs() < 1e-10);
    }

    fn random_density(rng: &mut ChaCha8Rng, d: usize) -> Mat<C64> {
        let g = Mat::<C64>::from_fn(d, d, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = &g * g.adjoint();
        let tr: C64 = (0..d).map(|i| rho[(i, i)]).sum();
        Mat::from_fn(d, d, |i, j| rho[(i, j)] / tr)
    }

    fn small() -> (EngineParams, HilbertDims) {
        (EngineParams { beta: 1.0, ..EngineParams::default() }, HilbertDims::new(3, 5).unwrap())
    }

    #[test]
    fn generator_annihilates_trace_and_keeps_hermiticity() {
        let (p, dims) = small();
        let parts = build_liouvillian(&p, dims).unwrap();
        assert!(parts.full.trace_defect() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = dims.joint();
        for _ in 0..100 {
            let rho = random_density(&mut rng, d);
            let out = parts.full.apply(&rho).unwrap();
            let tr: C64 = (0..d).map(|i| out[(i, i)]).sum();
            assert!(tr.norm() < 1e-10);
            let mut herm: f64 = 0.0;
            for i in 0..d {
                for j in 0..d {
                    herm = herm.max((out[(i, j)] - out[(j, i)].conj()).norm());
                }
            }
            assert!(herm < 1e-10);
        }
    }

    #[test]
    fn flat_rates_without_dissipative_coupling() {
        let p = EngineParams { g_kappa: 0.0, ..small().0 };
        let ops = EngineOperators::new(&p, small().1).unwrap();
        let want = ops.a.scale_re((p.kappa0 / 2.0).sqrt());
        assert!(ops.jump_hot.sub(&want).unwrap().max_abs() < 1e-12);
        assert!(ops.jump_cold.sub(&want).unwrap().max_abs() < 1e-12);
    }

    fn thermal_diag(n_bar: f64, levels: usize) -> Vec<f64> {
        let q = n_bar / (n_bar + 1.0);
        let mut w: Vec<f64> = (0..levels).map(|k| q.powi(k as i32)).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        w
    }

    fn product_state(cav: &[f64], mol: &[f64]) -> Mat<C64> {
        let (nc, nm) = (cav.len(), mol.len());
        Mat::from_fn(nc * nm, nc * nm, |i, j| {
            if i == j {
                C64::new(cav[i / nm] * mol[i % nm], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    #[test]
    fn caldeira_leggett_fixed_point_is_thermal() {
        for n_th in [0.0, 0.3] {
            let p = EngineParams { beta: 0.0, theta: 0.0, n_th, ..fig1() };
            let m = 40;
            let mol = MolecularOps::new(&p, m).unwrap();
            let space = Space::Single(m);
            let l = SuperOperator::hamiltonian(&mol.hamiltonian)
                .add(&caldeira_leggett(&mol.x, &mol.p, p.gamma, p.n_th).unwrap())
                .unwrap();
            let n_cl = cl_equilibrium_occupation(&p);
            assert!((n_cl - (2.0 * n_th + 0.5)).abs() < 1e-15);
            let rho = product_state(&[1.0], &thermal_diag(n_cl, m));
            assert_eq!(space.dim(), rho.nrows());
            let res = l.matvec(&vectorize(&rho));
            let r = res.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            assert!(r < 1e-8, "residual {r}");
            // the bath-temperature state is not stationary under this form
            let naive = product_state(&[1.0], &thermal_diag(n_th, m));
            let r2 = l.matvec(&vectorize(&naive)).iter().fold(0.0f64, |a, v| a.max(v.norm()));
            assert!(r2 > 1e-3);
        }
    }

    #[test]
    fn decoupled_thermal_fixed_point() {
        let p = EngineParams {
            g_omega: 0.0,
            g_kappa: 0.0,
            beta: 0.0,
            theta: 0.0,
            n_hot: 2.0,
            n_cold: 0.5,
            ..fig1()
        };
        let dims = HilbertDims::new(6, 24).unwrap();
        let parts = build_liouvillian(&p, dims).unwrap();
        let cav = thermal_diag((p.n_hot + p.n_cold) / 2.0, dims.n_cav);
        let mol = thermal_diag(cl_equilibrium_occupation(&p), dims.n_mol);
        let rho = product_state(&cav, &mol);
        let out = devectorize(&parts.full.matvec(&vectorize(&rho))).unwrap();
        let r = vectorize(&out).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        assert!(r < 1e-7, "residual {r}");
    }

    #[test]
    fn budget_guard() {
        let (p, dims) = small();
        assert!(matches!(
            build_liouvillian_with_budget(&p, dims, 10),
            Err(Error::MemoryBudget { .. })
        ));
    }
}
