//! Flat-file outputs. Every number is written as `{:.16e}`, so files are
//! byte-identical across runs of the same scenario on one platform.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::run::{ConvergenceRow, RunReport};
use crate::entropy::{EntropyTrace, Verdict};
use crate::error::Result;
use crate::estimates::{self, EstimateReport};
use crate::exact;

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub const ESTIMATE_COLUMNS: [&str; 8] = ["check_id", "t", "worst_node_r", "lhs", "rhs", "margin", "tol", "pass"];
pub const FIELD_COLUMNS: [&str; 6] = ["r", "u", "v", "dv", "lap_v", "F1"];

pub fn estimates_csv(reports: &[EstimateReport]) -> String {
    let mut out = ESTIMATE_COLUMNS.join(",");
    out.push('\n');
    for rep in reports {
        for r in &rep.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.check_id,
                num(r.t),
                num(r.worst_node_r),
                num(r.lhs),
                num(r.rhs),
                num(r.margin),
                num(r.tol),
                r.pass
            );
        }
    }
    out
}

pub fn entropy_csv(trace: &EntropyTrace) -> String {
    let mut out = EntropyTrace::COLUMNS.join(",");
    out.push('\n');
    for k in 0..trace.len() {
        let row: Vec<String> = trace.row(k).iter().map(|&x| num(x)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("level,intervals,h,dt,error,order\n");
    for r in rows {
        let order = r.order.map(num).unwrap_or_else(|| "skipped".into());
        let _ = writeln!(out, "{},{},{},{},{},{}", r.level, r.intervals, num(r.h), num(r.dt), num(r.error), order);
    }
    out
}

/// `(r, u, v, v′, Δv, F₁)` at one checkpoint.
pub fn fields_table(report: &RunReport, k: usize) -> Result<Vec<[f64; 6]>> {
    let traj = &report.trajectory;
    let m = traj.config.m;
    let u = &traj.densities[k];
    let s = estimates::snapshot(u, traj.times[k], m, &traj.manifold)?;
    let f1_scale = if m == 1.0 { 1.0 } else { m - 1.0 };
    Ok((0..u.len())
        .map(|i| {
            [
                u.grid().nodes()[i],
                u.values()[i],
                s.v.values()[i],
                s.dv.values()[i],
                s.lap_v.values()[i],
                f1_scale * s.lap_v.values()[i],
            ]
        })
        .collect())
}

fn table_csv(columns: &[&str], rows: &[[f64; 6]]) -> String {
    let mut out = columns.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// First, middle and last checkpoint.
pub fn field_checkpoints(len: usize) -> Vec<usize> {
    let mut ks = vec![0, len / 2, len - 1];
    ks.dedup();
    ks
}

fn report_status(rep: &EstimateReport) -> &'static str {
    match (rep.advisory, rep.pass()) {
        (true, true) => "advisory-pass",
        (true, false) => "advisory-fail",
        (false, true) => "PASS",
        (false, false) => "FAIL",
    }
}

pub fn summary_text(report: &RunReport) -> String {
    let s = &report.scenario;
    let traj = &report.trajectory;
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {}", s.name);
    let _ = writeln!(
        out,
        "manifold: {:?} n={} K={} R_domain={}",
        s.manifold.kind, s.manifold.n, s.manifold.k, s.manifold.r_domain
    );
    if let Ok(k) = exact::constants(s.m, s.manifold.n) {
        let _ = writeln!(out, "m: {} kappa={} a={} b={} m_c={} m_c'={}", s.m, k.kappa, k.a, k.b, k.m_c, k.m_c_prime);
    }
    let _ = writeln!(
        out,
        "grid: intervals={} h={} dt={} checkpoints={} t=[{}, {}]",
        s.solver.intervals,
        traj.h(),
        traj.dt(),
        traj.len(),
        traj.times[0],
        traj.times[traj.len() - 1]
    );
    let _ = writeln!(
        out,
        "solver: u_floor={:e} clamps={} max_newton_iters={}",
        traj.u_floor,
        traj.total_clamps(),
        traj.diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0)
    );
    let _ = writeln!(out, "tolerance: c={} scale={} tol_h={}", report.tolerance.c, report.tolerance.scale, report.tolerance.for_trajectory(traj));
    let _ = writeln!(out);
    for rep in &report.reports {
        let worst = rep
            .worst()
            .map(|w| format!("worst margin {} (tol {}) at t={} r={}", num(w.margin), num(w.tol), w.t, w.worst_node_r))
            .unwrap_or_else(|| "no rows".into());
        let _ = writeln!(out, "{:<14} {:<34} {}", report_status(rep), rep.check_id, worst);
        if !rep.constants.is_empty() {
            let cs: Vec<String> = rep.constants.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(out, "{:<14} {:<34} {}", "", "", cs.join(" "));
        }
    }
    if let Some(v) = &report.monotonicity {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "monotonicity: dN/dt<=0 {}, dW/dt<=0 {}, N concave in 1/t {}",
            v.nash.as_str(),
            v.w.as_str(),
            v.concavity.as_str()
        );
        if [v.nash, v.w, v.concavity].contains(&Verdict::NotApplicable) {
            let _ = writeln!(out, "  (not-applicable: outside the curvature or exponent range of the statement)");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "wall_time_s: {:.3}", report.wall_time.as_secs_f64());
    let _ = writeln!(out, "overall: {}", if report.pass() { "PASS" } else { "FAIL" });
    out
}

/// Writes every output file of a run into `dir` and returns their paths.
pub fn emit_reports(report: &RunReport, dir: &Path, gnuplot: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put("estimates.csv".into(), estimates_csv(&report.reports))?;
    if let Some(trace) = &report.entropy {
        put("entropy.csv".into(), entropy_csv(trace))?;
    }
    let traj = &report.trajectory;
    for k in field_checkpoints(traj.len()) {
        let rows = fields_table(report, k)?;
        let t = traj.times[k];
        put(format!("fields_t{t:.6}.csv"), table_csv(&FIELD_COLUMNS, &rows))?;
        if gnuplot {
            for (c, name) in FIELD_COLUMNS.iter().enumerate().skip(1) {
                let mut dat = format!("# r {name} t={}\n", num(t));
                for row in &rows {
                    let _ = writeln!(dat, "{} {}", num(row[0]), num(row[c]));
                }
                put(format!("{name}_t{t:.6}.dat"), dat)?;
            }
        }
    }
    if gnuplot {
        if let Some(trace) = &report.entropy {
            for (c, name) in EntropyTrace::COLUMNS.iter().enumerate().skip(1) {
                let mut dat = format!("# t {name}\n");
                for k in 0..trace.len() {
                    let row = trace.row(k);
                    let _ = writeln!(dat, "{} {}", num(row[0]), num(row[c]));
                }
                put(format!("entropy_{name}.dat"), dat)?;
            }
        }
    }
    put("summary.txt".into(), summary_text(report))?;
    Ok(written)
}
