//! Harnack inequalities obtained by integrating the gradient estimates
//! along geodesics, checked on sampled space-time point pairs.

use super::bounds::{fde_constants_for, params_for, pme_constants};
use super::{
    ball_radius, check_nodes, pressure_extreme, snapshots, EstimateReport, LocalBoundParams,
    Tolerance, MARGIN,
};
use crate::error::{Error, Result};
use crate::exact;
use crate::geometry::geodesic_distance;
use crate::solver::Trajectory;

/// Two space-time samples `(node i1, checkpoint k1)` and `(i2, k2)`, `k1 < k2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HarnackPair {
    pub i1: usize,
    pub k1: usize,
    pub i2: usize,
    pub k2: usize,
}

/// Deterministic lattice of `count` pairs among nodes within `radius` of the
/// pole that stay inside the positivity set at every checkpoint.
pub fn sample_pairs(traj: &Trajectory, radius: f64, count: usize) -> Vec<HarnackPair> {
    let checkpoints = traj.len();
    if checkpoints < 2 {
        return Vec::new();
    }
    let mut eligible = check_nodes(&traj.densities[0], traj.u_floor, MARGIN, radius);
    for u in &traj.densities[1..] {
        let here = check_nodes(u, traj.u_floor, MARGIN, radius);
        eligible.retain(|i| here.binary_search(i).is_ok());
    }
    let e = eligible.len();
    if e == 0 {
        return Vec::new();
    }
    (0..count)
        .map(|j| {
            let k1 = j % (checkpoints - 1);
            let k2 = k1 + 1 + (3 * j) % (checkpoints - 1 - k1);
            HarnackPair {
                i1: eligible[(7 * j) % e],
                k1,
                i2: eligible[(11 * j + e / 2) % e],
                k2,
            }
        })
        .collect()
}

/// Lower bound on `v(x₂,t₂)/v(x₁,t₁)` for the porous medium equation.
pub fn harnack_ratio_bound_pme(d: f64, t1: f64, t2: f64, p: &LocalBoundParams, v_min: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 >= t1) {
        return Err(Error::Range(format!("need 0 < t1 <= t2, got {t1}, {t2}")));
    }
    let c = pme_constants(p.alpha, p.m, p.n, p.k, p.r)?;
    let dt = t2 - t1;
    if dt == 0.0 {
        return Ok(if d == 0.0 { 1.0 } else { 0.0 });
    }
    let expo = -p.alpha * d * d / (4.0 * v_min * dt)
        - c.a * p.alpha * dt * p.v_max * (c.c3 * p.k * p.k + (c.c2 + c.c1p) / (p.r * p.r));
    Ok((t1 / t2).powf(c.a * p.alpha) * expo.exp())
}

/// Upper bound on `(−v(x₂,t₂))/(−v(x₁,t₁))` for fast diffusion, `α ∈ (0,1)`.
pub fn harnack_ratio_bound_fde(d: f64, t1: f64, t2: f64, p: &LocalBoundParams, vbar_min: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 >= t1) {
        return Err(Error::Range(format!("need 0 < t1 <= t2, got {t1}, {t2}")));
    }
    let c = fde_constants_for(p)?;
    let dt = t2 - t1;
    if dt == 0.0 {
        return Ok(if d == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let g = c.gamma * p.alpha / c.c1p;
    let expo = p.alpha * d * d / (4.0 * vbar_min * dt)
        + g * p.v_max * (c.c4 * c.c1p.sqrt() * p.k * p.k + (c.c2 + c.c5) / (p.r * p.r)) * dt;
    Ok((t2 / t1).powf(g) * expo.exp())
}

/// Lower bounds on `v(x₂,t₂) − v(x₁,t₁)`: the `Ric ≥ 0` form and the
/// `α`-form with the `K²` correction. `p.v_max` is the global maximum.
pub fn integrated_harnack_pme(d: f64, t1: f64, t2: f64, p: &LocalBoundParams) -> Result<(f64, f64)> {
    let k = exact::constants(p.m, p.n)?;
    if !(p.m > 1.0 && p.alpha > 1.0) {
        return Err(Error::Range("porous medium Harnack needs m > 1 and alpha > 1".into()));
    }
    if !(t1 > 0.0 && t2 > t1) {
        return Err(Error::Range(format!("need 0 < t1 < t2, got {t1}, {t2}")));
    }
    let (dt, log) = (t2 - t1, (t2 / t1).ln());
    let nf = p.n as f64;
    let b1 = -(p.m - 1.0) * k.kappa * p.v_max * log - d * d / (4.0 * dt);
    let b2 = -(p.m - 1.0) * k.kappa * p.alpha * p.v_max * log
        - (p.m - 1.0).powi(2) * (nf - 1.0) * k.kappa * p.alpha / (p.alpha - 1.0) * p.k * p.k * p.v_max * p.v_max * dt
        - p.alpha * d * d / (4.0 * dt);
    Ok((b1, b2))
}

/// Fast-diffusion counterpart of [`integrated_harnack_pme`]; `p.v_max` is
/// the global maximum of `−v`.
pub fn integrated_harnack_fde(d: f64, t1: f64, t2: f64, p: &LocalBoundParams) -> Result<(f64, f64)> {
    let k = exact::constants(p.m, p.n)?;
    if !(t1 > 0.0 && t2 > t1) {
        return Err(Error::Range(format!("need 0 < t1 < t2, got {t1}, {t2}")));
    }
    let c = fde_constants_for(p)?;
    let (dt, log) = (t2 - t1, (t2 / t1).ln());
    let nf = p.n as f64;
    let b1 = -(1.0 - p.m) * k.kappa * p.v_max * log - d * d / (4.0 * dt);
    let b2 = -(1.0 - p.m) * k.kappa * p.alpha / c.c1pp * p.v_max * log
        - (p.m - 1.0).powi(2) * (nf - 1.0) * k.kappa * p.alpha / ((1.0 - p.alpha) * c.c1pp.sqrt() * c.epsilon2)
            * p.k
            * p.k
            * p.v_max
            * p.v_max
            * dt
        - p.alpha * d * d / (4.0 * dt);
    Ok((b1, b2))
}

pub const PAIRS_PER_RUN: usize = 50;

/// Ratio Harnack inequality on 50 pairs in `B(O, R/6)`; relative slack.
pub fn check_harnack_ratio(
    traj: &Trajectory,
    alpha: f64,
    eps: Option<(f64, f64)>,
    tol: &Tolerance,
) -> Result<EstimateReport> {
    let m = traj.config.m;
    let snaps = snapshots(traj)?;
    let p = params_for(traj, &snaps, alpha, eps);
    let r = ball_radius(&traj.manifold);
    let v_min = pressure_extreme(&snaps, m, 0.5 * r, false);
    let tol_h = tol.for_trajectory(traj);
    let nodes = traj.densities[0].grid().nodes();
    let pme = m > 1.0;
    let mut rep = EstimateReport::new(format!("harnack_ratio[alpha={alpha}]"))
        .with_constant("alpha", alpha)
        .with_constant("v_max", p.v_max)
        .with_constant("v_min", v_min);
    for pair in sample_pairs(traj, r / 6.0, PAIRS_PER_RUN) {
        let (t1, t2) = (traj.times[pair.k1], traj.times[pair.k2]);
        let (r1, r2) = (nodes[pair.i1], nodes[pair.i2]);
        let d = geodesic_distance(&traj.manifold, r1, r2);
        let v1 = snaps[pair.k1].v.values()[pair.i1];
        let v2 = snaps[pair.k2].v.values()[pair.i2];
        let ratio = v2 / v1;
        if pme {
            let bound = harnack_ratio_bound_pme(d, t1, t2, &p, v_min)?;
            rep.push(t2, r2, ratio, bound, ratio / bound - 1.0, tol_h);
        } else {
            let bound = harnack_ratio_bound_fde(d, t1, t2, &p, v_min)?;
            rep.push(t2, r2, ratio, bound, 1.0 - ratio / bound, tol_h);
        }
    }
    Ok(rep)
}

/// Additive Harnack inequalities on 50 pairs across the whole grid.
pub fn check_integrated_harnack(
    traj: &Trajectory,
    alpha: f64,
    eps: Option<(f64, f64)>,
    tol: &Tolerance,
) -> Result<Vec<EstimateReport>> {
    let m = traj.config.m;
    let snaps = snapshots(traj)?;
    let mut p = params_for(traj, &snaps, alpha, eps);
    p.v_max = pressure_extreme(&snaps, m, f64::INFINITY, true);
    let r = ball_radius(&traj.manifold);
    let tol_h = tol.for_trajectory(traj);
    let nodes = traj.densities[0].grid().nodes();
    let ricci_ok = traj.manifold.has_nonnegative_ricci();
    let mut rep1 = EstimateReport::new("harnack_integrated1").with_constant("v_max", p.v_max);
    let mut rep2 = EstimateReport::new(format!("harnack_integrated2[alpha={alpha}]"))
        .with_constant("alpha", alpha)
        .with_constant("v_max", p.v_max);
    for pair in sample_pairs(traj, r, PAIRS_PER_RUN) {
        let (t1, t2) = (traj.times[pair.k1], traj.times[pair.k2]);
        let (r1, r2) = (nodes[pair.i1], nodes[pair.i2]);
        let d = geodesic_distance(&traj.manifold, r1, r2);
        let diff = snaps[pair.k2].v.values()[pair.i2] - snaps[pair.k1].v.values()[pair.i1];
        let (b1, b2) = if m > 1.0 {
            integrated_harnack_pme(d, t1, t2, &p)?
        } else {
            integrated_harnack_fde(d, t1, t2, &p)?
        };
        rep2.push(t2, r2, diff, b2, diff - b2, tol_h * b2.abs().max(1.0));
        if ricci_ok {
            rep1.push(t2, r2, diff, b1, diff - b1, tol_h * b1.abs().max(1.0));
        }
    }
    Ok(if ricci_ok { vec![rep1, rep2] } else { vec![rep2] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{barenblatt_pressure, BarenblattParams};

    fn params(alpha: f64, m: f64, n: usize, k: f64, r: f64, v_max: f64) -> LocalBoundParams {
        LocalBoundParams { alpha, r, k, v_max, t: 1.0, m, n, epsilon1: None, epsilon2: None }
    }

    #[test]
    fn coincident_points_give_unit_ratio() {
        let p = params(2.0, 2.0, 2, 1.0, 3.0, 2.0);
        assert_eq!(harnack_ratio_bound_pme(0.0, 1.0, 1.0, &p, 1.0).unwrap(), 1.0);
        let b = harnack_ratio_bound_pme(0.0, 1.0, 1.0 + 1e-12, &p, 1.0).unwrap();
        assert!((b - 1.0).abs() < 1e-8);
        let q = params(0.5, 0.5, 2, 0.0, 3.0, 2.0);
        assert_eq!(harnack_ratio_bound_fde(0.0, 1.0, 1.0, &q, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn constant_solution_ratio_exceeds_bound() {
        let p = params(1.5, 2.0, 3, 0.0, 2.0, 2.0);
        let b = harnack_ratio_bound_pme(0.1, 1.0, 2.0, &p, 2.0).unwrap();
        assert!(b < 1.0);
        let q = params(0.5, 0.5, 2, 0.0, 2.0, 2.0);
        assert!(harnack_ratio_bound_fde(0.1, 1.0, 2.0, &q, 2.0).unwrap() > 1.0);
    }

    #[test]
    fn same_point_integrated_bound_vanishes() {
        let p = params(2.0, 2.0, 2, 0.0, 1.0, 1.0);
        let (b1, b2) = integrated_harnack_pme(0.0, 1.0, 1.0 + 1e-14, &p).unwrap();
        assert!(b1.abs() < 1e-13 && b2.abs() < 1e-13);
    }

    #[test]
    fn barenblatt_differences_respect_integrated_bound() {
        // Closed-form differences along the flat profile, K = 0.
        for (m, n) in [(2.0, 1), (3.0, 2), (1.5, 3)] {
            let bp = BarenblattParams::new(1.0, m, n).unwrap();
            let v_max = barenblatt_pressure(0.0, 1.0, &bp).unwrap();
            let p = params(2.0, m, n, 0.0, 1.0, v_max);
            for (r1, r2, t1, t2) in [(0.0, 0.0, 1.0, 2.0), (0.1, 0.3, 1.0, 1.5), (0.4, 0.0, 1.2, 3.0)] {
                let diff = barenblatt_pressure(r2, t2, &bp).unwrap() - barenblatt_pressure(r1, t1, &bp).unwrap();
                let (b1, b2) = integrated_harnack_pme((r1 - r2).abs(), t1, t2, &p).unwrap();
                assert!(diff >= b1 && diff >= b2, "m={m} n={n} {diff} {b1} {b2}");
            }
        }
    }
}
