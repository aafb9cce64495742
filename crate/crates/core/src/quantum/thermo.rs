use faer::Mat;
use serde::{Deserialize, Serialize};

use super::sector::SectorState;
use super::state::{g2, DensityMatrix};
use crate::error::{Error, Result};
use crate::hilbert::{Operator, SuperOperator, C64};
use crate::model::{EngineOperators, EngineParams, LiouvillianParts, HBAR};

/// Imaginary parts below this are dropped silently.
const IMAG_DROP: f64 = 1e-10;
/// Imaginary parts above this are an error.
const IMAG_FAIL: f64 = 1e-8;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ThermoReport {
    pub q_hot: f64,
    pub q_cold: f64,
    /// `Q̇_h + Q̇_c`.
    pub p_eq7: f64,
    /// `−(ħg_ω/m)⟨n̂_a p̂⟩`.
    pub p_np: f64,
    /// `−(ħg_ω/m)(⟨n̂_a p̂⟩ − ⟨n̂_a⟩⟨p̂⟩)`.
    pub p_corr: f64,
    pub mean_photons: f64,
    pub mean_momentum: f64,
    pub photon_momentum: f64,
    /// `None` for a vacuum field.
    pub g2: Option<f64>,
    pub min_eigenvalue: f64,
    /// `‖𝓛 vec ρ‖₂`.
    pub residual: f64,
    /// Largest population in the top molecular level of any photon sector.
    pub molecular_edge: f64,
}

impl ThermoReport {
    /// `|P_eq7 − P_np| ≤ max(1e-8, 1e-4·|P_eq7|)`.
    pub fn power_identity_holds(&self) -> bool {
        (self.p_eq7 - self.p_np).abs() <= (1e-4 * self.p_eq7.abs()).max(1e-8)
    }
}

fn real_part(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > IMAG_FAIL {
        return Err(Error::Inconsistent(format!("{what} has imaginary part {:.3e}", z.im)));
    }
    if z.im.abs() > IMAG_DROP {
        log::debug!("{what}: discarding imaginary part {:.3e}", z.im);
    }
    Ok(z.re)
}

/// `(Tr[H_f 𝓛_h ρ], Tr[H_f 𝓛_c ρ])` from the assembled reservoir pieces.
pub fn heat_currents(rho: &DensityMatrix, parts: &LiouvillianParts, h_field: &Operator) -> Result<(f64, f64)> {
    let one = |l: &SuperOperator, what: &str| -> Result<f64> {
        let out = l.apply(rho.matrix())?;
        real_part(h_field.trace_product(&out), what)
    };
    Ok((one(&parts.hot, "hot heat current")?, one(&parts.cold, "cold heat current")?))
}

/// `L†AL − ½{L†L, A}`.
pub fn adjoint_dissipator(l: &Operator, a: &Operator) -> Result<Operator> {
    let ld = l.adjoint();
    let ldl = ld.mul(l)?;
    let sandwich = ld.mul(a)?.mul(l)?;
    let anti = ldl.mul(a)?.add(&a.mul(&ldl)?)?;
    sandwich.sub(&anti.scale_re(0.5))
}

/// Heat currents through the Heisenberg-picture dissipators; needs only
/// sparse operator products, so it also works where 𝓛 is never assembled.
pub fn heat_currents_ops(rho: &DensityMatrix, params: &EngineParams, ops: &EngineOperators) -> Result<(f64, f64)> {
    let res = |l: &Operator, nbar: f64| -> Result<Operator> {
        adjoint_dissipator(l, &ops.h_field)?
            .scale_re(nbar + 1.0)
            .add(&adjoint_dissipator(&l.adjoint(), &ops.h_field)?.scale_re(nbar))
    };
    let qh = res(&ops.jump_hot, params.n_hot)?.trace_product(rho.matrix());
    let qc = res(&ops.jump_cold, params.n_cold)?.trace_product(rho.matrix());
    Ok((real_part(qh, "hot heat current")?, real_part(qc, "cold heat current")?))
}

fn scale(m: Mat<C64>, s: C64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * s)
}

fn comm(a: &Operator, r: &Mat<C64>) -> Mat<C64> {
    a.mul_dense(r) - a.dense_mul(r)
}

fn anti(a: &Operator, r: &Mat<C64>) -> Mat<C64> {
    a.mul_dense(r) + a.dense_mul(r)
}

/// `(𝓛_h + 𝓛_c)ρ` with operator products on the joint state.
pub fn reservoir_action(params: &EngineParams, ops: &EngineOperators, rho: &Mat<C64>) -> Result<Mat<C64>> {
    let d = ops.dims.joint();
    let mut out = Mat::<C64>::zeros(d, d);
    for (l, nbar) in [(&ops.jump_hot, params.n_hot), (&ops.jump_cold, params.n_cold)] {
        for (j, w) in [(l.clone(), nbar + 1.0), (l.adjoint(), nbar)] {
            if w == 0.0 {
                continue;
            }
            let jd = j.adjoint();
            let jdj = jd.mul(&j)?;
            let term = jd.dense_mul(&j.mul_dense(rho)) - scale(anti(&jdj, rho), C64::new(0.5, 0.0));
            out += scale(term, C64::new(w, 0.0));
        }
    }
    Ok(out)
}

/// `𝓛ρ` evaluated with operator products on the joint state.
pub fn generator_action(params: &EngineParams, ops: &EngineOperators, rho: &Mat<C64>) -> Result<Mat<C64>> {
    let i = C64::new(0.0, 1.0);
    let mut out = scale(comm(&ops.hamiltonian, rho), -i / HBAR);
    out += reservoir_action(params, ops, rho)?;
    let g = params.gamma / HBAR;
    out += scale(comm(&ops.x, &anti(&ops.p, rho)), -i * 0.5 * g);
    out += scale(comm(&ops.x, &comm(&ops.x, rho)), C64::new(-g * (params.n_th + 0.5), 0.0));
    Ok(out)
}

fn frobenius(m: &Mat<C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Report on a joint state. The mixed moment is `⟨n̂_a p̂⟩`, which equals its
/// symmetrized form because the factors act on different subsystems.
pub fn thermo_report(
    rho: &DensityMatrix,
    params: &EngineParams,
    ops: &EngineOperators,
    parts: &LiouvillianParts,
) -> Result<ThermoReport> {
    let (q_hot, q_cold) = heat_currents(rho, parts, &ops.h_field)?;
    let np = ops.n_a.mul(&ops.p)?;
    let mean_photons = real_part(rho.expect(&ops.n_a)?, "⟨n⟩")?;
    let mean_momentum = real_part(rho.expect(&ops.p)?, "⟨p⟩")?;
    let photon_momentum = real_part(rho.expect(&np)?, "⟨n p⟩")?;
    let pref = -HBAR * params.g_omega / params.mass;
    let cav = rho.reduced_cavity()?;
    let residual = crate::hilbert::vectorize(&parts.full.apply(rho.matrix())?)
        .iter()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let nm = ops.dims.n_mol;
    let molecular_edge = (0..ops.dims.n_cav)
        .map(|n| {
            let k = n * nm + nm - 1;
            rho.matrix()[(k, k)].re
        })
        .fold(0.0, f64::max);
    Ok(ThermoReport {
        q_hot,
        q_cold,
        p_eq7: q_hot + q_cold,
        p_np: pref * photon_momentum,
        p_corr: pref * (photon_momentum - mean_photons * mean_momentum),
        mean_photons,
        mean_momentum,
        photon_momentum,
        g2: g2(&cav).ok(),
        min_eigenvalue: rho.min_eigenvalue()?,
        residual,
        molecular_edge,
    })
}

impl SectorState {
    /// `𝓛ρ` block by block in the position basis.
    pub fn generator_blocks(&self) -> Vec<Mat<C64>> {
        let nc = self.blocks.len();
        (0..nc).map(|n| self.model.apply_block(n, &self.blocks)).collect()
    }

    /// `‖𝓛 vec ρ‖₂`; the off-diagonal photon blocks of 𝓛ρ vanish identically.
    pub fn residual(&self) -> f64 {
        self.generator_blocks().iter().map(|b| frobenius(b).powi(2)).sum::<f64>().sqrt()
    }

    pub fn thermo_report(&self) -> Result<ThermoReport> {
        let p = &self.model.params;
        let (q_hot, q_cold) = self.heat_currents();
        let mean_photons = self.mean_photons();
        let mean_momentum = self.mean_momentum();
        let photon_momentum = self.photon_momentum();
        let pref = -HBAR * p.g_omega / p.mass;
        Ok(ThermoReport {
            q_hot,
            q_cold,
            p_eq7: q_hot + q_cold,
            p_np: pref * photon_momentum,
            p_corr: pref * (photon_momentum - mean_photons * mean_momentum),
            mean_photons,
            mean_momentum,
            photon_momentum,
            g2: self.g2().ok(),
            min_eigenvalue: self.min_eigenvalue()?,
            residual: self.residual(),
            molecular_edge: self.molecular_edge_population(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{vectorize, HilbertDims, Space};
    use crate::model::build_liouvillian;
    use crate::quantum::{solve_sectors, steady_state};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(seed: u64, dims: HilbertDims) -> DensityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = dims.joint();
        let g = Mat::<C64>::from_fn(d, d, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        DensityMatrix::hermitized(Space::Joint(dims), &(&g * g.adjoint())).unwrap()
    }

    #[test]
    fn heat_currents_match_dense_evaluation() {
        let p = EngineParams { beta: 1.0, ..EngineParams::default() };
        let dims = HilbertDims::new(3, 5).unwrap();
        let ops = EngineOperators::new(&p, dims).unwrap();
        let parts = build_liouvillian(&p, dims).unwrap();
        let rho = random_state(3, dims);
        let (qh, qc) = heat_currents(&rho, &parts, &ops.h_field).unwrap();
        // dense oracle: explicit superoperator matrix times vec ρ
        let v = vectorize(rho.matrix());
        let hf = ops.h_field.to_dense();
        let d = dims.joint();
        for (sup, got) in [(&parts.hot, qh), (&parts.cold, qc)] {
            let dense = sup.to_dense();
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..d * d {
                let mut lv = C64::new(0.0, 0.0);
                for c in 0..d * d {
                    lv += dense[(r, c)] * v[c];
                }
                // r = i + j d indexes (Lρ)_ij; Tr(H L ρ) = Σ H_ji (Lρ)_ij
                let (i, j) = (r % d, r / d);
                acc += hf[(j, i)] * lv;
            }
            assert!((acc.re - got).abs() < 1e-10, "{} vs {got}", acc.re);
        }
        let (oh, oc) = heat_currents_ops(&rho, &p, &ops).unwrap();
        assert!((oh - qh).abs() < 1e-10 && (oc - qc).abs() < 1e-10);
    }

    #[test]
    fn operator_generator_matches_superoperator() {
        let p = EngineParams { beta: 2.0, n_th: 0.3, ..EngineParams::default() };
        let dims = HilbertDims::new(3, 6).unwrap();
        let ops = EngineOperators::new(&p, dims).unwrap();
        let parts = build_liouvillian(&p, dims).unwrap();
        let rho = random_state(9, dims);
        let a = generator_action(&p, &ops, rho.matrix()).unwrap();
        let b = parts.full.apply(rho.matrix()).unwrap();
        assert!(frobenius(&(&a - &b)) < 1e-10 * frobenius(&b));
        let a = reservoir_action(&p, &ops, rho.matrix()).unwrap();
        let b = parts.reservoirs().unwrap().apply(rho.matrix()).unwrap();
        assert!(frobenius(&(&a - &b)) < 1e-10 * frobenius(&b));
    }

    #[test]
    fn decoupled_equilibrium_has_no_flow() {
        let p = EngineParams {
            g_omega: 0.0,
            g_kappa: 0.0,
            beta: 0.0,
            theta: 0.0,
            n_hot: 1.5,
            n_cold: 1.5,
            ..EngineParams::default()
        };
        let dims = HilbertDims::new(12, 6).unwrap();
        let ops = EngineOperators::new(&p, dims).unwrap();
        let parts = build_liouvillian(&p, dims).unwrap();
        let s = steady_state(&parts.full).unwrap();
        let r = thermo_report(&s.rho, &p, &ops, &parts).unwrap();
        assert!(r.q_hot.abs() < 1e-8 && r.q_cold.abs() < 1e-8);
        assert_eq!(r.p_np, 0.0);
        assert_eq!(r.p_corr, 0.0);
        assert!(r.mean_momentum.abs() < 1e-12 && r.photon_momentum.abs() < 1e-12);
    }

    #[test]
    fn first_law_is_the_sum() {
        let p = EngineParams::default();
        let s = solve_sectors(&p, HilbertDims::new(4, 10).unwrap()).unwrap();
        let r = s.thermo_report().unwrap();
        assert_eq!(r.p_eq7, r.q_hot + r.q_cold);
    }

    #[test]
    fn sector_report_matches_joint_report() {
        let p = EngineParams { g_kappa: 6.0, beta: 1.5, ..EngineParams::default() };
        let dims = HilbertDims::new(5, 10).unwrap();
        let ops = EngineOperators::new(&p, dims).unwrap();
        let parts = build_liouvillian(&p, dims).unwrap();
        let sec = solve_sectors(&p, dims).unwrap();
        let a = sec.thermo_report().unwrap();
        let b = thermo_report(&sec.to_density_matrix().unwrap(), &p, &ops, &parts).unwrap();
        for (x, y) in [
            (a.q_hot, b.q_hot),
            (a.q_cold, b.q_cold),
            (a.p_np, b.p_np),
            (a.p_corr, b.p_corr),
            (a.mean_photons, b.mean_photons),
            (a.g2.unwrap(), b.g2.unwrap()),
        ] {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
        }
        assert!((a.residual - b.residual).abs() < 1e-9);
        assert!(a.residual < 1e-8 * dims.joint() as f64);
        let (oh, oc) = heat_currents_ops(&sec.to_density_matrix().unwrap(), &p, &ops).unwrap();
        assert!((oh - a.q_hot).abs() < 1e-9 && (oc - a.q_cold).abs() < 1e-9);
    }

    #[test]
    fn heat_currents_run_engine() {
        let p = EngineParams { g_kappa: 10.0, beta: 1.5, ..EngineParams::default() };
        let r = solve_sectors(&p, HilbertDims::new(8, 24).unwrap()).unwrap().thermo_report().unwrap();
        assert!(r.q_hot > 0.0 && r.q_cold < 0.0);
        assert!(r.p_eq7 > 0.0);
    }
}
