//! Executing scenarios: single runs, parameter sweeps and refinement studies.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::scenario::{CheckKind, InitialData, Scenario};
use crate::entropy::{self, EntropyTrace, MonotonicityVerdict};
use crate::error::{Error, Result};
use crate::estimates::{self, CutoffReport, EstimateReport, Tolerance, MARGIN};
use crate::exact::{self, BarenblattParams};
use crate::geometry;
use crate::solver::{self, Trajectory};

/// Samples per unit interval in the cutoff certificate.
pub const CUTOFF_SAMPLES: usize = 10_000;

#[derive(Clone, Debug)]
pub struct RunReport {
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    /// Every estimate and invariant report, in scenario order.
    pub reports: Vec<EstimateReport>,
    pub entropy: Option<EntropyTrace>,
    pub monotonicity: Option<MonotonicityVerdict>,
    pub cutoff: Option<CutoffReport>,
    pub tolerance: Tolerance,
    pub wall_time: Duration,
}

impl RunReport {
    /// True iff every non-advisory report passes.
    pub fn pass(&self) -> bool {
        self.reports.iter().filter(|r| !r.advisory).all(|r| r.pass())
    }

    pub fn failing(&self) -> Vec<&EstimateReport> {
        self.reports.iter().filter(|r| !r.advisory && !r.pass()).collect()
    }
}

pub fn tolerance_for(scenario: &Scenario) -> Result<Tolerance> {
    Tolerance::from_env(scenario.tol_c.unwrap_or(Tolerance::DEFAULT_C))
}

pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    let (manifold, u0, bc) = scenario.setup()?;
    solver::solve(&u0, scenario.t0(), &scenario.solver_config(), &manifold, &bc)
}

/// Mass drift relative to the initial mass, against `10 · newton_tol`.
fn mass_report(traj: &Trajectory) -> Result<EstimateReport> {
    let masses = traj.masses()?;
    let m0 = masses[0];
    let bound = 10.0 * traj.config.newton_tol;
    let mut rep = EstimateReport::new("mass_conservation");
    for (k, &mass) in masses.iter().enumerate().skip(1) {
        let drift = (mass - m0).abs() / m0.abs();
        rep.push(traj.times[k], f64::NAN, drift, bound, bound - drift, 0.0);
    }
    Ok(rep)
}

/// The three algebraic forms of `F_α` agree, and `v_t` from the pressure
/// equation matches centred differences of checkpoint pressures.
fn pressure_invariants(traj: &Trajectory, alpha: f64, tol: &Tolerance) -> Result<Vec<EstimateReport>> {
    let m = traj.config.m;
    let snaps = estimates::snapshots(traj)?;
    let mut forms = EstimateReport::new(format!("f_alpha_forms[alpha={alpha}]"));
    let mut vt = EstimateReport::new("vt_cross_check");
    let tol_space = tol.tol_space(traj.h());
    let tol_h = tol.for_trajectory(traj);
    for (k, s) in snaps.iter().enumerate() {
        let f = estimates::f_alpha_fields(&s.v, &s.v_t, &traj.manifold, alpha, m)?;
        let nodes = estimates::check_nodes(&s.u, traj.u_floor, MARGIN, f64::INFINITY);
        let scale = 1.0 + nodes.iter().map(|&i| f.f_alpha.values()[i].abs()).fold(0.0, f64::max);
        forms.push(s.t, f64::NAN, f.form_gap / scale, 0.0, -f.form_gap / scale, tol_space);
        if k == 0 || k + 1 == snaps.len() {
            continue;
        }
        let fd = solver::pressure_time_derivative_fd(traj, k)?;
        let (mut worst, mut at, mut size) = (0.0f64, f64::NAN, 0.0f64);
        for &i in &nodes {
            let d = (fd.values()[i] - s.v_t.values()[i]).abs();
            size = size.max(s.v_t.values()[i].abs());
            if d > worst || at.is_nan() {
                worst = d;
                at = s.u.grid().nodes()[i];
            }
        }
        if !nodes.is_empty() {
            let scaled = worst / (1.0 + size);
            vt.push(s.t, at, scaled, 0.0, -scaled, tol_h);
        }
    }
    Ok(vec![forms, vt])
}

fn cutoff_reports(rep: &CutoffReport) -> Vec<EstimateReport> {
    let mut theta = EstimateReport::new("cutoff_theta");
    theta.push(f64::NAN, f64::NAN, rep.max_ratio, 40.0, 40.0 - rep.max_ratio, 0.0);
    theta.push(f64::NAN, f64::NAN, rep.min_second, -40.0, rep.min_second + 40.0, 0.0);
    theta.push(f64::NAN, 0.25, rep.theta_quarter, 1.0, -(rep.theta_quarter - 1.0).abs(), 0.0);
    theta.push(f64::NAN, 1.2, rep.theta_beyond, 0.0, -rep.theta_beyond.abs(), 0.0);
    theta.push(f64::NAN, f64::NAN, rep.c2_jump, 0.0, -rep.c2_jump, 1e-6);
    let mut grad = EstimateReport::new("cutoff_gradient");
    let mut lap = EstimateReport::new("cutoff_laplacian");
    let mut lap_alt = EstimateReport::new("cutoff_laplacian_alt");
    for g in &rep.geometries {
        grad.push(f64::NAN, g.r, g.grad_ratio, 40.0, 40.0 - g.grad_ratio, 0.0);
        lap.push(f64::NAN, g.r, g.min_laplacian, g.laplacian_floor, g.min_laplacian - g.laplacian_floor, 0.0);
        lap_alt.push(
            f64::NAN,
            g.r,
            g.min_laplacian,
            g.laplacian_floor_alt,
            g.min_laplacian - g.laplacian_floor_alt,
            0.0,
        );
    }
    vec![theta, grad, lap, lap_alt]
}

/// Runs the solver and every requested check.
pub fn run(scenario: &Scenario) -> Result<RunReport> {
    scenario.validate()?;
    let started = Instant::now();
    let tol = tolerance_for(scenario)?;
    let traj = simulate(scenario)?;
    let eps = scenario.epsilons();
    let m = scenario.m;

    let mut reports = Vec::new();
    if traj.conserves_mass {
        reports.push(mass_report(&traj)?);
    }
    let pressure_checks = scenario.checks.iter().any(|c| *c != CheckKind::Cutoff);
    if pressure_checks && traj.len() >= 3 {
        reports.extend(pressure_invariants(&traj, scenario.alphas()[0], &tol)?);
    }

    let mut entropy_trace = None;
    let mut monotonicity = None;
    let mut cutoff = None;
    for &check in &scenario.checks {
        match check {
            CheckKind::Ab => reports.extend(estimates::global_bounds_check(&traj, &tol)?),
            CheckKind::PmeLocal => {
                for a in scenario.alphas() {
                    reports.extend(estimates::check_pme_estimate(&traj, a, &tol)?);
                }
            }
            CheckKind::FdeLocal => {
                for a in scenario.alphas() {
                    reports.extend(estimates::check_fde_estimate(&traj, a, eps, &tol)?);
                }
            }
            CheckKind::HarnackRatio => {
                for a in scenario.alphas() {
                    reports.push(estimates::check_harnack_ratio(&traj, a, eps, &tol)?);
                }
            }
            CheckKind::HarnackIntegrated => {
                for a in scenario.alphas() {
                    reports.extend(estimates::check_integrated_harnack(&traj, a, eps, &tol)?);
                }
            }
            CheckKind::PowerBound => {
                for &b in &scenario.beta {
                    reports.extend(estimates::laplacian_power_bound(&traj, b, eps, &tol)?);
                }
            }
            CheckKind::BochnerResidual => {
                for a in scenario.bochner_alphas() {
                    reports.push(estimates::bochner_residual(&traj, a, &tol)?);
                }
            }
            CheckKind::Entropy => {
                let trace = entropy::entropy_trace(&traj)?;
                reports.extend(entropy::identity_checks(&trace, &traj, &tol));
                let verdict = entropy::monotonicity_verdict(
                    &trace,
                    m,
                    traj.manifold.dim(),
                    traj.manifold.ricci_lower(),
                    tol.for_trajectory(&traj),
                );
                reports.extend(verdict.reports.iter().cloned());
                reports.push(entropy::ancient_solution_probe(&traj, &tol)?);
                entropy_trace = Some(trace);
                monotonicity = Some(verdict);
            }
            CheckKind::Cutoff => {
                let rep = estimates::verify_cutoff(CUTOFF_SAMPLES)?;
                reports.extend(cutoff_reports(&rep));
                cutoff = Some(rep);
            }
            CheckKind::LogSobolev => {
                reports.push(entropy::log_sobolev_check(m, traj.manifold.dim(), &tol)?);
            }
        }
    }

    Ok(RunReport {
        scenario: scenario.clone(),
        trajectory: traj,
        reports,
        entropy: entropy_trace,
        monotonicity,
        cutoff,
        tolerance: tol,
        wall_time: started.elapsed(),
    })
}

/// Parameters a sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    M,
    Alpha,
    K,
    C,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(Self::M),
            "alpha" => Ok(Self::Alpha),
            "K" | "k" => Ok(Self::K),
            "C" | "c" => Ok(Self::C),
            other => Err(Error::Config(format!("cannot sweep {other:?}; choose m, alpha, K or C"))),
        }
    }
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            Self::M => "m",
            Self::Alpha => "alpha",
            Self::K => "K",
            Self::C => "C",
        }
    }

    /// A copy of `base` with this parameter set to `value`.
    pub fn apply(&self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        match self {
            Self::M => s.m = value,
            Self::Alpha => s.alpha = vec![value],
            Self::K => s.manifold.k = value,
            Self::C => match &mut s.initial_data {
                InitialData::Barenblatt { c, .. } => *c = value,
                _ => return Err(Error::Config("sweeping C needs Barenblatt initial data".into())),
            },
        }
        s.name = format!("{}_{}={value}", base.name, self.name());
        s.validate()?;
        Ok(s)
    }
}

/// One scenario per value, run concurrently; results keep the value order.
pub fn sweep(base: &Scenario, param: SweepParam, values: &[f64]) -> Result<Vec<RunReport>> {
    let scenarios = values.iter().map(|&v| param.apply(base, v)).collect::<Result<Vec<_>>>()?;
    scenarios.par_iter().map(run).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub intervals: usize,
    pub h: f64,
    pub dt: f64,
    /// L∞ error at the final time: against the exact solution for Barenblatt
    /// data, against the next finer level otherwise.
    pub error: f64,
    pub order: Option<f64>,
}

/// Errors below this are round-off; orders computed from them are meaningless.
pub const ERROR_FLOOR: f64 = 1e-13;

/// Scenario at refinement level `l`: `h/2^l`, `dt/4^l`, same checkpoint times.
pub fn refined(base: &Scenario, level: usize) -> Scenario {
    let mut s = base.clone();
    s.solver.intervals = base.solver.intervals << level;
    s.solver.dt = base.solver.dt / 4f64.powi(level as i32);
    s.solver.checkpoint_every = base.solver.checkpoint_every << (2 * level);
    s.name = format!("{}_level{level}", base.name);
    s
}

/// Refinement study over `levels` grids with `dt ∝ h²`.
pub fn refine(base: &Scenario, levels: usize) -> Result<Vec<ConvergenceRow>> {
    if levels < 2 {
        return Err(Error::Config("refinement needs at least two levels".into()));
    }
    let scenarios: Vec<Scenario> = (0..levels).map(|l| refined(base, l)).collect();
    let finals = scenarios
        .par_iter()
        .map(|s| simulate(s).map(|t| (t.times[t.len() - 1], t.densities[t.len() - 1].clone())))
        .collect::<Result<Vec<_>>>()?;

    let exact_params = match base.initial_data {
        InitialData::Barenblatt { c, .. } => Some(BarenblattParams::new(c, base.m, base.manifold.n)?),
        _ => None,
    };
    let mut errors = Vec::new();
    for (l, (t, u)) in finals.iter().enumerate() {
        let grid = u.grid();
        let err = match &exact_params {
            Some(p) => grid
                .nodes()
                .iter()
                .zip(u.values())
                .map(|(&r, &x)| Ok((x - exact::barenblatt_density(r, *t, p)?.max(0.0)).abs()))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max),
            None => {
                let Some((_, finer)) = finals.get(l + 1) else { break };
                // Node i of this grid is node 2i of the next.
                u.values()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| (x - finer.values()[2 * i]).abs())
                    .fold(0.0, f64::max)
            }
        };
        errors.push((l, grid.intervals(), grid.h(), scenarios[l].solver.dt, err));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (j, &(level, intervals, h, dt, error)) in errors.iter().enumerate() {
        let order = if j == 0 {
            None
        } else {
            let prev = errors[j - 1].4;
            (prev > ERROR_FLOOR && error > ERROR_FLOOR).then(|| (prev / error).log2())
        };
        rows.push(ConvergenceRow { level, intervals, h, dt, error, order });
    }
    Ok(rows)
}

/// Barenblatt sharpness defects `max |ΔV + κ/t|` on nested grids.
pub fn sharpness_defects(c: f64, m: f64, n: usize, radius: f64, intervals: &[usize], times: &[f64]) -> Result<Vec<f64>> {
    let p = BarenblattParams::new(c, m, n)?;
    let manifold = geometry::ModelManifold::euclidean(n, radius)?;
    intervals
        .iter()
        .map(|&k| {
            let grid = geometry::RadialGrid::new(manifold, k, geometry::BoundaryKind::Dirichlet)?;
            let rows = exact::verify_barenblatt_sharpness(&p, &grid, times)?;
            Ok(rows.iter().map(|r| r.max_defect).fold(0.0, f64::max))
        })
        .collect()
}
