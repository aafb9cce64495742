use serde::{Deserialize, Serialize};

use super::state::DensityMatrix;
use crate::error::{Error, Result};
use crate::hilbert::{devectorize, vectorize, SuperOperator, C64};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Step budget; exceeding it is treated like step-size underflow.
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, max_steps: 20_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub rho: DensityMatrix,
    pub steps: usize,
    pub rejected: usize,
    /// `|Tr ρ(t) − Tr ρ(0)|` before any renormalization.
    pub trace_drift: f64,
}

// Dormand-Prince 5(4) tableau; the nodes are not needed for an autonomous generator
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(out: &mut [C64], y: &[C64], h: f64, terms: &[(f64, &[C64])]) {
    for i in 0..y.len() {
        let mut acc = C64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Propagate `ρ0` under `dρ/dt = 𝓛ρ` up to `t` with adaptive Dormand-Prince 5(4).
pub fn evolve(rho0: &DensityMatrix, l: &SuperOperator, t: f64) -> Result<DensityMatrix> {
    Ok(evolve_with(rho0, l, t, EvolveOptions::default())?.rho)
}

pub fn evolve_with(rho0: &DensityMatrix, l: &SuperOperator, t: f64, opts: EvolveOptions) -> Result<Evolution> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("evolution time {t}")));
    }
    if rho0.space() != l.space() {
        return Err(Error::DimensionMismatch { expected: l.hilbert_dim(), got: rho0.dim() });
    }
    if t == 0.0 {
        return Ok(Evolution { rho: rho0.clone(), steps: 0, rejected: 0, trace_drift: 0.0 });
    }
    let n = l.dim();
    let d = l.hilbert_dim();
    let mut y = vectorize(rho0.matrix());
    let tr0 = rho0.trace();
    let zero = C64::new(0.0, 0.0);
    let buf = || vec![zero; n];
    let (mut k1, mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (buf(), buf(), buf(), buf(), buf(), buf(), buf());
    let mut tmp = buf();
    let mut ynew = buf();

    l.matvec_into(&y, &mut k1);
    let scale0 = y.iter().map(|z| z.norm()).fold(0.0, f64::max) * opts.rtol + opts.atol;
    let f0 = k1.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut h = if f0 > 0.0 { (0.01 * scale0 / f0).powf(0.2).min(t) } else { t };
    h = h.max(1e-12 * t).min(t);

    let mut time = 0.0;
    let (mut steps, mut rejected) = (0usize, 0usize);
    while time < t {
        if steps + rejected >= opts.max_steps {
            return Err(Error::Stiffness { t: time, h });
        }
        if time + h > t {
            h = t - time;
        }
        combine(&mut tmp, &y, h, &[(A21, &k1)]);
        l.matvec_into(&tmp, &mut k2);
        combine(&mut tmp, &y, h, &[(A31, &k1), (A32, &k2)]);
        l.matvec_into(&tmp, &mut k3);
        combine(&mut tmp, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        l.matvec_into(&tmp, &mut k4);
        combine(&mut tmp, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        l.matvec_into(&tmp, &mut k5);
        combine(&mut tmp, &y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]);
        l.matvec_into(&tmp, &mut k6);
        combine(&mut ynew, &y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        l.matvec_into(&ynew, &mut k7);

        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            err = err.max(e.norm() / sc);
        }
        if !err.is_finite() {
            return Err(Error::IntegrationBlowup { t: time, detail: "non-finite error estimate".into() });
        }
        if err <= 1.0 {
            time += h;
            std::mem::swap(&mut y, &mut ynew);
            // first-same-as-last
            std::mem::swap(&mut k1, &mut k7);
            steps += 1;
        } else {
            rejected += 1;
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if time < t && h < 1e-14 * t.max(1.0) {
            return Err(Error::Stiffness { t: time, h });
        }
    }
    let m = devectorize(&y)?;
    let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    let trace_drift = (tr - tr0).abs();
    let rho = DensityMatrix::from_matrix_unchecked(rho0.space(), m)?;
    Ok(Evolution { rho, steps, rejected, trace_drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{dissipator, ladder, Operator, Space};

    #[test]
    fn zero_time_is_identity() {
        let rho = DensityMatrix::thermal(4, 0.5).unwrap();
        let l = dissipator(&ladder(4).unwrap());
        let out = evolve(&rho, &l, 0.0).unwrap();
        assert_eq!(out.matrix(), rho.matrix());
    }

    #[test]
    fn unitary_keeps_purity() {
        let a = ladder(6).unwrap();
        let h = a.add(&a.adjoint()).unwrap().add(&a.adjoint().mul(&a).unwrap().scale_re(0.7)).unwrap();
        let l = SuperOperator::hamiltonian(&h);
        let rho = DensityMatrix::coherent(6, C64::new(0.5, 0.2)).unwrap();
        let out = evolve_with(&rho, &l, 7.0, EvolveOptions::default()).unwrap();
        assert!((out.rho.purity() - 1.0).abs() < 1e-8);
        assert!(out.trace_drift < 1e-8);
    }

    #[test]
    fn single_photon_decay() {
        let kappa = 0.05;
        let a = ladder(4).unwrap();
        let l = dissipator(&a).scale_re(kappa);
        let n = a.adjoint().mul(&a).unwrap();
        let rho = DensityMatrix::fock(4, 1).unwrap();
        for t in [1.0, 10.0, 40.0] {
            let out = evolve(&rho, &l, t).unwrap();
            let got = out.expect(&n).unwrap().re;
            assert!((got - (-kappa * t).exp()).abs() < 1e-6, "t={t}: {got}");
        }
    }

    #[test]
    fn step_budget_reports_stiffness() {
        let h = Operator::from_diagonal(Space::Single(2), &[C64::new(0.0, 0.0), C64::new(1e6, 0.0)]).unwrap();
        let l = SuperOperator::hamiltonian(&h);
        let rho = DensityMatrix::maximally_mixed(Space::Single(2));
        let psi = DensityMatrix::hermitized(Space::Single(2), &{
            let mut m = rho.matrix().clone();
            m[(0, 1)] = C64::new(0.3, 0.0);
            m[(1, 0)] = C64::new(0.3, 0.0);
            m
        })
        .unwrap();
        let opts = EvolveOptions { max_steps: 1000, ..EvolveOptions::default() };
        assert!(matches!(evolve_with(&psi, &l, 1.0, opts), Err(Error::Stiffness { .. })));
    }
}
