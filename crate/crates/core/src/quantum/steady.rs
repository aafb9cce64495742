use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::state::{DensityMatrix, POS_TOL};
use crate::error::{Error, Result};
use crate::hilbert::{devectorize, SuperOperator, C64};

/// Relative residual above which the direct solve is distrusted.
const DIRECT_ACCEPT: f64 = 1e-9;
const INVERSE_ITERATIONS: usize = 200;
/// Two null vectors further apart than this in trace distance are distinct.
const MULTIPLICITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Direct,
    InverseIteration,
    Sectors,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `‖𝓛 vec ρ‖₂`.
    pub residual: f64,
    /// `‖𝓛 vec ρ‖₂ / max|𝓛_ij|`.
    pub relative_residual: f64,
    pub min_eigenvalue: f64,
    pub method: SolveMethod,
}

impl SteadyState {
    pub fn positivity_ok(&self) -> bool {
        self.min_eigenvalue >= -POS_TOL
    }
}

fn triplets(l: &SuperOperator, skip_row: Option<usize>, shift: C64) -> Vec<Triplet<usize, usize, C64>> {
    let m = l.matrix();
    let mut out = Vec::with_capacity(m.nnz() + l.dim());
    let mut diag_seen = vec![false; l.dim()];
    for (r, row) in m.outer_iterator().enumerate() {
        if Some(r) == skip_row {
            continue;
        }
        for (c, &v) in row.iter() {
            let v = if r == c {
                diag_seen[r] = true;
                v + shift
            } else {
                v
            };
            out.push(Triplet { row: r, col: c, val: v });
        }
    }
    if shift != C64::new(0.0, 0.0) {
        for (r, seen) in diag_seen.into_iter().enumerate() {
            if !seen && Some(r) != skip_row {
                out.push(Triplet { row: r, col: r, val: shift });
            }
        }
    }
    out
}

fn sparse_lu(
    dim: usize,
    entries: &[Triplet<usize, usize, C64>],
) -> Result<faer::sparse::linalg::solvers::Lu<usize, C64>> {
    let a = SparseColMat::<usize, C64>::try_new_from_triplets(dim, dim, entries)
        .map_err(|e| Error::Singular(format!("{e:?}")))?;
    a.sp_lu().map_err(|e| Error::Singular(format!("{e:?}")))
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Trace of a vectorized state.
fn vec_trace(v: &[C64], d: usize) -> C64 {
    (0..d).fold(C64::new(0.0, 0.0), |s, k| s + v[k + k * d])
}

fn direct(l: &SuperOperator) -> Result<Vec<C64>> {
    let d = l.hilbert_dim();
    let n = l.dim();
    let mut entries = triplets(l, Some(0), C64::new(0.0, 0.0));
    for k in 0..d {
        entries.push(Triplet { row: 0, col: k + k * d, val: C64::new(1.0, 0.0) });
    }
    let lu = sparse_lu(n, &entries)?;
    let mut rhs = Mat::<C64>::zeros(n, 1);
    rhs[(0, 0)] = C64::new(1.0, 0.0);
    lu.solve_in_place(rhs.as_mut());
    let v: Vec<C64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular("non-finite solution".into()));
    }
    Ok(v)
}

fn inverse_iteration(l: &SuperOperator, start: Vec<C64>) -> Result<Vec<C64>> {
    let n = l.dim();
    let shift = C64::new(-1e-10 * l.max_abs().max(1.0), 0.0);
    let lu = sparse_lu(n, &triplets(l, None, shift))?;
    let mut v = start;
    let mut prev_res = f64::INFINITY;
    for it in 0..INVERSE_ITERATIONS {
        let mut rhs = Mat::<C64>::from_fn(n, 1, |i, _| v[i]);
        lu.solve_in_place(rhs.as_mut());
        let nv = (0..n).map(|i| rhs[(i, 0)].norm_sqr()).sum::<f64>().sqrt();
        if !(nv.is_finite() && nv > 0.0) {
            return Err(Error::Singular("inverse iteration diverged".into()));
        }
        v = (0..n).map(|i| rhs[(i, 0)] / nv).collect();
        let res = norm2(&l.matvec(&v));
        if res < 1e-13 * l.max_abs() || (prev_res - res).abs() < 1e-3 * res {
            debug!("inverse iteration stopped after {} sweeps, residual {res:.3e}", it + 1);
            break;
        }
        prev_res = res;
    }
    Ok(v)
}

fn to_state(l: &SuperOperator, v: &[C64]) -> Result<DensityMatrix> {
    let d = l.hilbert_dim();
    let tr = vec_trace(v, d);
    if tr.norm() < 1e-300 {
        return Err(Error::Singular("null vector is traceless".into()));
    }
    let scaled: Vec<C64> = v.iter().map(|z| z / tr).collect();
    DensityMatrix::hermitized(l.space(), &devectorize(&scaled)?)
}

fn finish(l: &SuperOperator, rho: DensityMatrix, method: SolveMethod) -> Result<SteadyState> {
    let v = crate::hilbert::vectorize(rho.matrix());
    let residual = norm2(&l.matvec(&v));
    let relative_residual = residual / l.max_abs().max(f64::MIN_POSITIVE);
    let min_eigenvalue = rho.min_eigenvalue()?;
    if min_eigenvalue < -POS_TOL {
        warn!("steady state has negative eigenvalue {min_eigenvalue:.3e}");
    }
    Ok(SteadyState { rho, residual, relative_residual, min_eigenvalue, method })
}

/// Null vector of `𝓛` with unit trace.
///
/// Row 0 of `𝓛` is replaced by the trace functional and the system solved by
/// sparse LU. If that fails or leaves a large residual, shifted inverse
/// iteration from two different starts is used instead; disagreeing results
/// mean the null space is degenerate.
pub fn steady_state(l: &SuperOperator) -> Result<SteadyState> {
    let d = l.hilbert_dim();
    match direct(l) {
        Ok(v) => {
            if let Ok(rho) = to_state(l, &v) {
                let s = finish(l, rho, SolveMethod::Direct)?;
                if s.relative_residual <= DIRECT_ACCEPT * l.dim() as f64 {
                    return Ok(s);
                }
                debug!("direct solve residual {:.3e}, falling back", s.relative_residual);
            }
        }
        Err(e) => debug!("direct solve failed ({e}), falling back"),
    }

    let n = l.dim();
    let mixed: Vec<C64> = (0..n)
        .map(|i| if i % (d + 1) == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
        .collect();
    let mut corner = vec![C64::new(0.0, 0.0); n];
    corner[0] = C64::new(1.0, 0.0);
    let a = to_state(l, &inverse_iteration(l, mixed)?)?;
    let b = to_state(l, &inverse_iteration(l, corner)?);
    match b {
        Ok(b) if a.trace_distance(&b)? > MULTIPLICITY_TOL => Err(Error::Multiplicity(2)),
        Err(_) => Err(Error::Multiplicity(2)),
        Ok(_) => finish(l, a, SolveMethod::InverseIteration),
    }
}
