//! One function per subcommand.

use std::time::Instant;

use optomech::classical::{
    classify_regime, operational_boundary, simulate, ClassicalState, ProbeConfig, Regime,
};
use optomech::normalmodes::{comparison_table, fit_effective_params};
use optomech::phasespace::{max_reliable_radius, wigner_cavity, PhaseField, PhaseGrid, QuadratureGrid, FOCK_TAIL_TOL};
use optomech::quantum::{
    converge_dims, solve_sectors_with_budget, ConvergeOptions, ConvergenceReport, Observable, SectorState,
    ThermoReport, POS_TOL,
};
use optomech::{EngineParams, HilbertDims};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{num, opt, Output};
use crate::sweep::{run_parallel, workers};
use crate::{CliError, Command};

pub fn dispatch(cmd: Command, cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    match cmd {
        Command::ClassicalSim => classical_sim(cfg, out),
        Command::ClassicalSweep => classical_sweep(cfg, out),
        Command::Boundary => boundary(cfg, out),
        Command::QuantumSteady => quantum_steady(cfg, out),
        Command::QuantumSweep => quantum_sweep(cfg, out),
        Command::PhaseSpace => phase_space(cfg, out, true),
        Command::Wigner => phase_space(cfg, out, false),
        Command::NormalModes => normal_modes(cfg, out),
        Command::ConvergeDims => converge(cfg, out),
    }
}

fn probe_config(cfg: &RunConfig, p: &EngineParams) -> ProbeConfig {
    ProbeConfig { t_max: cfg.classical.t_max, dt: cfg.classical.dt, ..ProbeConfig::for_params(p) }
}

#[derive(Serialize)]
struct RunSummary {
    initial: ClassicalState,
    last: ClassicalState,
    file: String,
}

#[derive(Serialize)]
struct ClassicalSummary {
    regime: Regime,
    period: Option<f64>,
    avg_power: f64,
    work: f64,
    energy_loop_term: f64,
    attractors: Vec<ClassicalState>,
    runs: Vec<RunSummary>,
}

fn classical_sim(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let p = &cfg.engine;
    let c = &cfg.classical;
    let m = classify_regime(p, &probe_config(cfg, p))?;
    let mut runs = Vec::new();
    for (i, &(n0, x0)) in c.initial.iter().enumerate() {
        let s0 = ClassicalState::new(n0, x0);
        let traj = simulate(s0, p, c.t_max, c.dt)?;
        let rows: Vec<Vec<String>> = traj
            .times
            .iter()
            .zip(&traj.states)
            .enumerate()
            .filter(|(k, _)| k % c.stride == 0 || *k == traj.len() - 1)
            .map(|(_, (t, s))| vec![num(*t), num(s.n_a), num(s.x)])
            .collect();
        let file = format!("trajectory_{i}.csv");
        out.table(&file, &["t", "n_a", "x"], &rows, json!({ "initial": [n0, x0] }))?;
        runs.push(RunSummary { initial: s0, last: traj.last(), file });
    }
    let summary = ClassicalSummary {
        regime: m.regime,
        period: m.period,
        avg_power: m.avg_power,
        work: m.work,
        energy_loop_term: m.energy_loop_term,
        attractors: m.fixed_points.clone(),
        runs,
    };
    out.document("metrics.json", &summary)?;
    Ok(())
}

fn require_axes(cfg: &RunConfig, allowed: &[[&str; 2]]) -> Result<(), CliError> {
    let names: Vec<&str> = cfg.sweep.axes.iter().map(|a| a.name.as_str()).collect();
    let ok = names.len() == 2 && allowed.iter().any(|pair| pair.contains(&names[0]) && pair.contains(&names[1]));
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("[sweep] needs two axes forming one of {allowed:?}, got {names:?}")))
    }
}

fn axis_columns(cfg: &RunConfig) -> Vec<String> {
    cfg.sweep.axes.iter().map(|a| a.name.clone()).collect()
}

fn error_cell(e: &CliError) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}

/// Rows out, plus a failure if every point failed.
fn finish_sweep(failures: usize, total: usize) -> Result<(), CliError> {
    if total > 0 && failures == total {
        Err(CliError::Numerical(format!("all {total} sweep points failed; see the error column")))
    } else {
        Ok(())
    }
}

fn classical_sweep(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    require_axes(cfg, &[["g_kappa", "beta"]])?;
    let points = cfg.sweep_points();
    let results = run_parallel(&points, workers(cfg.workers), |_, pt| {
        let p = cfg.engine_at(pt)?;
        Ok::<_, CliError>(classify_regime(&p, &probe_config(cfg, &p))?)
    })?;
    let mut columns: Vec<String> = vec!["index".into()];
    columns.extend(axis_columns(cfg));
    columns.extend(["regime", "period", "power", "work", "error"].map(String::from));
    let mut failures = 0;
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (pt, r))| {
            let mut row = vec![i.to_string()];
            row.extend(pt.iter().map(|(_, v)| num(*v)));
            match r {
                Ok(m) => row.extend([
                    m.regime.to_string(),
                    opt(m.period),
                    num(m.avg_power),
                    opt(m.period.map(|t| t * m.avg_power)),
                    String::new(),
                ]),
                Err(e) => {
                    failures += 1;
                    row.extend([String::new(), String::new(), String::new(), String::new(), error_cell(e)]);
                }
            }
            row
        })
        .collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    out.table("classical_sweep.csv", &cols, &rows, json!({}))?;
    write_boundary(cfg, out)?;
    finish_sweep(failures, points.len())
}

fn g_kappa_values(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    cfg.sweep
        .axes
        .iter()
        .find(|a| a.name == "g_kappa")
        .map(|a| a.values())
        .ok_or_else(|| CliError::Config("[sweep] needs a g_kappa axis for the boundary".into()))
}

fn write_boundary(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let curves = operational_boundary(&cfg.engine, &g_kappa_values(cfg)?);
    let mut rows = Vec::new();
    for pt in &curves {
        for (branch, roots) in [("minus", &pt.beta_minus), ("plus", &pt.beta_plus)] {
            for b in roots.iter() {
                rows.push(vec![num(pt.g_kappa), branch.to_string(), num(*b), pt.gap.to_string()]);
            }
        }
    }
    out.table("boundary.csv", &["g_kappa", "branch", "beta", "gap"], &rows, json!({}))?;
    Ok(())
}

fn boundary(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    write_boundary(cfg, out)
}

struct Solved {
    dims: HilbertDims,
    state: SectorState,
    report: ThermoReport,
    convergence: Option<ConvergenceReport>,
}

fn solve_point(p: &EngineParams, cfg: &RunConfig) -> Result<Solved, CliError> {
    let d = &cfg.dims;
    let start = HilbertDims::new(d.n_cav, d.n_mol)?;
    let (dims, convergence) = if d.auto {
        let opts = ConvergeOptions { rtol: d.rtol, memory_budget: d.memory_budget_bytes, max_refinements: d.max_refinements };
        let (dims, rep) = converge_dims(p, start, &Observable::ALL, opts)?;
        (dims, Some(rep))
    } else {
        (start, None)
    };
    let state = solve_sectors_with_budget(p, dims, d.memory_budget_bytes)?;
    let report = state.thermo_report()?;
    Ok(Solved { dims, state, report, convergence })
}

#[derive(Serialize)]
struct SteadySummary<'a> {
    n_cav: usize,
    n_mol: usize,
    report: &'a ThermoReport,
    positivity_ok: bool,
    power_identity_holds: bool,
    convergence: Option<&'a ConvergenceReport>,
}

fn steady_summary(s: &Solved) -> SteadySummary<'_> {
    SteadySummary {
        n_cav: s.dims.n_cav,
        n_mol: s.dims.n_mol,
        report: &s.report,
        positivity_ok: s.report.min_eigenvalue >= -POS_TOL,
        power_identity_holds: s.report.power_identity_holds(),
        convergence: s.convergence.as_ref(),
    }
}

fn quantum_steady(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let s = solve_point(&cfg.engine, cfg)?;
    out.document("steady.json", &steady_summary(&s))?;
    Ok(())
}

const QUANTUM_COLUMNS: [&str; 16] = [
    "n_cav",
    "n_mol",
    "converged",
    "p_eq7",
    "p_np",
    "p_corr",
    "q_hot",
    "q_cold",
    "mean_photons",
    "g2",
    "min_eigenvalue",
    "positivity_ok",
    "power_identity_ok",
    "residual",
    "molecular_edge",
    "error",
];

fn quantum_sweep(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    require_axes(cfg, &[["g_kappa", "beta"], ["g_omega", "g_kappa"]])?;
    let points = cfg.sweep_points();
    let results = run_parallel(&points, workers(cfg.workers), |_, pt| {
        let t0 = Instant::now();
        let r = cfg.engine_at(pt).and_then(|p| solve_point(&p, cfg)).map(|s| {
            let converged = s.convergence.as_ref().map(|c| c.converged);
            (s.dims, s.report, converged)
        });
        (r, t0.elapsed().as_secs_f64())
    })?;
    let mut columns: Vec<String> = vec!["index".into()];
    columns.extend(axis_columns(cfg));
    columns.extend(QUANTUM_COLUMNS.map(String::from));
    let mut failures = 0;
    let mut rows = Vec::new();
    let mut timing = Vec::new();
    for (i, (pt, (r, secs))) in points.iter().zip(&results).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(pt.iter().map(|(_, v)| num(*v)));
        match r {
            Ok((d, rep, converged)) => row.extend([
                d.n_cav.to_string(),
                d.n_mol.to_string(),
                converged.map(|c| c.to_string()).unwrap_or_default(),
                num(rep.p_eq7),
                num(rep.p_np),
                num(rep.p_corr),
                num(rep.q_hot),
                num(rep.q_cold),
                num(rep.mean_photons),
                opt(rep.g2),
                num(rep.min_eigenvalue),
                (rep.min_eigenvalue >= -POS_TOL).to_string(),
                rep.power_identity_holds().to_string(),
                num(rep.residual),
                num(rep.molecular_edge),
                String::new(),
            ]),
            Err(e) => {
                failures += 1;
                row.extend(std::iter::repeat_n(String::new(), QUANTUM_COLUMNS.len() - 1));
                row.push(error_cell(e));
            }
        }
        rows.push(row);
        timing.push(vec![i.to_string(), num(*secs)]);
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    out.table("quantum_sweep.csv", &cols, &rows, json!({}))?;
    out.table(
        "timings.csv",
        &["index", "seconds"],
        &timing,
        json!({ "note": "wall-clock times; not reproducible" }),
    )?;
    finish_sweep(failures, points.len())
}

fn phase_grid(cfg: &RunConfig, n_cav: usize, x0: f64) -> Result<PhaseGrid, CliError> {
    let g = &cfg.grid;
    let r_max = g
        .r_max
        .unwrap_or_else(|| (0.8 * (n_cav as f64).sqrt()).min(max_reliable_radius(n_cav, FOCK_TAIL_TOL)));
    Ok(PhaseGrid::uniform(r_max, g.n_r, (g.x_min * x0, g.x_max * x0), g.n_x, g.n_phi)?)
}

fn quadrature_grid(cfg: &RunConfig, n_cav: usize) -> Result<QuadratureGrid, CliError> {
    let g = &cfg.grid;
    match g.wigner_half_width {
        Some(h) => Ok(QuadratureGrid::square(h, g.wigner_points)?),
        None => Ok(QuadratureGrid::square(
            max_reliable_radius(n_cav, FOCK_TAIL_TOL) / 2f64.sqrt(),
            g.wigner_points,
        )?),
    }
}

fn phase_space(cfg: &RunConfig, out: &Output, fields: bool) -> Result<(), CliError> {
    let s = solve_point(&cfg.engine, cfg)?;
    let cav = s.state.reduced_cavity()?;
    let qgrid = quadrature_grid(cfg, s.dims.n_cav)?;
    let w = wigner_cavity(&cav, &qgrid)?;
    let mut rows = Vec::new();
    let mut w_min = f64::INFINITY;
    for (i, q) in qgrid.q().iter().enumerate() {
        for (j, p) in qgrid.p().iter().enumerate() {
            w_min = w_min.min(w[(i, j)]);
            rows.push(vec![num(*q), num(*p), num(w[(i, j)])]);
        }
    }
    out.table(
        "wigner.csv",
        &["q", "p", "W"],
        &rows,
        json!({ "axes": { "q": qgrid.q(), "p": qgrid.p() }, "alpha": "q + i p" }),
    )?;
    let mut summary = json!({
        "n_cav": s.dims.n_cav,
        "n_mol": s.dims.n_mol,
        "min_wigner": w_min,
        "g2": s.report.g2,
        "mean_photons": s.report.mean_photons,
    });
    if fields {
        let grid = phase_grid(cfg, s.dims.n_cav, s.state.model.params.x0())?;
        let f = PhaseField::from_sectors(&s.state, &grid)?;
        let div = f.divergence();
        let mut rows = Vec::new();
        for (i, r) in grid.r().iter().enumerate() {
            for (j, x) in grid.x().iter().enumerate() {
                let d = if i < div.nrows() && j < div.ncols() { num(div[(i, j)]) } else { String::new() };
                rows.push(vec![num(*r), num(*x), num(f.q[i][j]), num(f.d[i][j]), num(f.u[i][j]), num(f.v[i][j]), d]);
            }
        }
        out.table(
            "phase_field.csv",
            &["r", "x", "Q", "D", "u", "v", "divergence"],
            &rows,
            json!({
                "axes": { "r": grid.r(), "x": grid.x(), "n_phi": grid.n_phi() },
                "divergence": "cell-centred, at the cell whose lower corner is (r, x)",
            }),
        )?;
        summary["normalization"] = json!(f.normalization());
        summary["source_integral"] = json!(f.source_integral());
        summary["max_divergence"] = json!(f.max_divergence());
        summary["max_abs_source"] = json!(f.max_abs_d());
        summary["min_q"] = json!(f.min_q());
        summary["x_maxima"] = json!(f.x_maxima(0.05));
    }
    out.document("phase_space.json", &summary)?;
    Ok(())
}

fn normal_modes(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let nm = &cfg.normal_modes;
    let p = &nm.params;
    let fit = fit_effective_params(p, nm.window, nm.samples)?;
    let table = comparison_table(p, &fit, &nm.table.values());
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|r| {
            vec![
                num(r.x),
                num(r.bare_a),
                num(r.bare_b),
                num(r.omega_a),
                num(r.omega_b),
                num(r.omega_b - r.omega_a),
                num(r.omega_a_linear),
                num(r.kappa_h),
                num(r.kappa_c),
                num(r.kappa_h / p.kappa_a + r.kappa_c / p.kappa_b - 1.0),
                num(r.kappa_h_logistic),
                num(r.kappa_c_logistic),
            ]
        })
        .collect();
    out.table(
        "normal_modes.csv",
        &[
            "x",
            "bare_a",
            "bare_b",
            "omega_a",
            "omega_b",
            "gap",
            "omega_a_linear",
            "kappa_h",
            "kappa_c",
            "kappa_sum_defect",
            "kappa_h_logistic",
            "kappa_c_logistic",
        ],
        &rows,
        json!({}),
    )?;
    let within = fit.logistic_rms <= nm.max_rms;
    out.document("fit.json", &json!({ "fit": fit, "max_rms": nm.max_rms, "within_bound": within }))?;
    if within {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("logistic RMS residual {:.3e} exceeds {:.3e}", fit.logistic_rms, nm.max_rms)))
    }
}

fn converge(cfg: &RunConfig, out: &Output) -> Result<(), CliError> {
    let d = &cfg.dims;
    let start = HilbertDims::new(d.n_cav, d.n_mol)?;
    let opts = ConvergeOptions { rtol: d.rtol, memory_budget: d.memory_budget_bytes, max_refinements: d.max_refinements };
    let (rep, err) = match converge_dims(&cfg.engine, start, &Observable::ALL, opts) {
        Ok((_, rep)) => (rep, None),
        Err(optomech::Error::MemoryBudget { required, budget, best: Some(rep) }) => {
            (*rep, Some(CliError::Numerical(format!("memory budget {budget} B exceeded (need {required} B)"))))
        }
        Err(e) => return Err(e.into()),
    };
    let mut columns = vec!["step".to_string(), "n_cav".into(), "n_mol".into(), "refined".into()];
    columns.extend(rep.observables.iter().map(|o| serde_json::to_value(o).unwrap().as_str().unwrap().to_string()));
    columns.push("delta".into());
    let rows: Vec<Vec<String>> = rep
        .steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut row = vec![
                k.to_string(),
                s.n_cav.to_string(),
                s.n_mol.to_string(),
                s.refined.map(|a| serde_json::to_value(a).unwrap().as_str().unwrap().to_string()).unwrap_or_default(),
            ];
            row.extend(s.values.iter().map(|v| num(*v)));
            row.push(opt(s.delta));
            row
        })
        .collect();
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    out.table("convergence.csv", &cols, &rows, json!({ "converged": rep.converged, "rtol": rep.rtol }))?;
    out.document("convergence.json", &rep)?;
    match err {
        Some(e) => Err(e),
        None if !rep.converged => Err(CliError::Numerical("truncation did not converge".into())),
        None => Ok(()),
    }
}
