//! Explicit constants and right-hand sides of the local gradient estimates.

use super::{
    ball_radius, check_nodes, f_alpha_fields, pressure_extreme, snapshots, EstimateReport,
    LocalBoundParams, Snapshot, Tolerance, MARGIN,
};
use crate::error::{Error, Result};
use crate::exact::{self, Constants};
use crate::solver::Trajectory;

/// Constants of the porous-medium local estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmeConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `C₁′(KR)`; equals `c1` when `KR = 0`.
    pub c1p: f64,
    pub a: f64,
}

pub fn pme_constants(alpha: f64, m: f64, n: usize, k: f64, r: f64) -> Result<PmeConstants> {
    if !(m > 1.0) {
        return Err(Error::Range(format!("porous medium constants need m > 1, got {m}")));
    }
    if !(alpha > 1.0) {
        return Err(Error::Range(format!("porous medium estimate needs alpha > 1, got {alpha}")));
    }
    if !(k >= 0.0 && r > 0.0) {
        return Err(Error::Range(format!("need K >= 0 and R > 0, got K = {k}, R = {r}")));
    }
    let Constants { a, .. } = exact::constants(m, n)?;
    let nf = n as f64;
    Ok(PmeConstants {
        c1: 40.0 * (m - 1.0) * (nf + 2.0),
        c2: 200.0 * a * alpha * alpha * m * m / (alpha - 1.0),
        c3: (m - 1.0) * (nf - 1.0) / (alpha - 1.0),
        c1p: 40.0 * (m - 1.0) * (3.0 + (nf - 1.0) * (1.0 + k * r)),
        a,
    })
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Range(format!("time must be positive, got {t}")))
    }
}

/// `aα²(1/t + C₃K²v_max) + aα² v_max (C₂ + C₁′)/R²`, valid for
/// `Ric ≥ −(n−1)K²`.
pub fn pme_local_bound(p: &LocalBoundParams) -> Result<f64> {
    check_time(p.t)?;
    let c = pme_constants(p.alpha, p.m, p.n, p.k, p.r)?;
    let pre = c.a * p.alpha * p.alpha;
    // Factored so that K = 0 reproduces the Ric ≥ 0 bound bit for bit.
    Ok(pre * (1.0 / p.t + c.c3 * p.k * p.k * p.v_max + p.v_max * (c.c2 + c.c1p) / (p.r * p.r)))
}

/// `aα²(1/t + v_max (C₁ + C₂)/R²)`, valid for `Ric ≥ 0`.
pub fn pme_local_bound_ricci_nonnegative(p: &LocalBoundParams) -> Result<f64> {
    check_time(p.t)?;
    let c = pme_constants(p.alpha, p.m, p.n, 0.0, p.r)?;
    let pre = c.a * p.alpha * p.alpha;
    Ok(pre * (1.0 / p.t + 0.0 + p.v_max * (c.c2 + c.c1) / (p.r * p.r)))
}

/// Admissible `(ε₁, ε₂)` endpoints for the fast-diffusion estimate.
pub fn fde_epsilon_window(a: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(a < 0.0) {
        return Err(Error::Range(format!("epsilon window needs a < 0, got {a}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Range(format!("fast diffusion estimate needs alpha in (0,1), got {alpha}")));
    }
    let gamma = -a;
    let e1 = gamma * alpha * alpha / (6.0 * (1.0 + gamma));
    let e2 = (gamma * alpha * alpha / (3.0 * (1.0 + gamma))).sqrt();
    Ok((e1, e2))
}

/// Constants of the fast-diffusion local estimate, `γ = −a`, `β = 1 − α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdeConstants {
    pub gamma: f64,
    pub beta: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub c1: f64,
    pub c1p: f64,
    /// The `ε₁ = 0` variant used by the global and integrated forms.
    pub c1pp: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

pub fn fde_constants(
    alpha: f64,
    m: f64,
    n: usize,
    k: f64,
    r: f64,
    eps1: f64,
    eps2: f64,
) -> Result<FdeConstants> {
    if !(m < 1.0) {
        return Err(Error::Range(format!("fast diffusion constants need m < 1, got {m}")));
    }
    let Constants { a, .. } = exact::constants(m, n)?;
    let (e1_max, e2_max) = fde_epsilon_window(a, alpha)?;
    let slack = 1.0 + 1e-12;
    if !(eps1 > 0.0 && eps1 <= e1_max * slack) {
        return Err(Error::Config(format!("epsilon1 = {eps1} outside (0, {e1_max}]")));
    }
    if !(eps2 > 0.0 && eps2 <= e2_max * slack) {
        return Err(Error::Config(format!("epsilon2 = {eps2} outside (0, {e2_max}]")));
    }
    if !(k >= 0.0 && r > 0.0) {
        return Err(Error::Range(format!("need K >= 0 and R > 0, got K = {k}, R = {r}")));
    }
    let gamma = -a;
    let beta = 1.0 - alpha;
    let nf = n as f64;
    let shrunk = beta + gamma - beta * eps2 * eps2;
    if !(shrunk > 0.0) {
        return Err(Error::Config(format!(
            "beta + gamma - beta*epsilon2^2 = {shrunk} must be positive"
        )));
    }
    let c1 = 1.0 + gamma * beta - beta * (1.0 + gamma + eps1).powi(2) / (beta + gamma);
    let c1p = 1.0 + gamma * beta - beta * (1.0 + gamma + eps1).powi(2) / shrunk;
    let c1pp = 1.0 + gamma * beta - beta * (1.0 + gamma).powi(2) / shrunk;
    for (name, value) in [("C1bar", c1), ("C1bar'", c1p), ("C1bar''", c1pp)] {
        if !(value > 0.0) {
            return Err(Error::Config(format!(
                "{name} = {value} must be positive; shrink epsilon1/epsilon2"
            )));
        }
    }
    Ok(FdeConstants {
        gamma,
        beta,
        epsilon1: eps1,
        epsilon2: eps2,
        c1,
        c1p,
        c1pp,
        c2: 1600.0 * m * m * gamma * alpha * alpha / (2.0 * eps1 * beta),
        c3: 40.0 * (1.0 - m) * (nf + 2.0),
        c4: (nf - 1.0) * (1.0 - m) / (beta * eps2),
        c5: 40.0 * (1.0 - m) * (3.0 + (nf - 1.0) * (1.0 + k * r)),
    })
}

/// Default `ε` is half of each window endpoint.
pub(crate) fn fde_constants_for(p: &LocalBoundParams) -> Result<FdeConstants> {
    let Constants { a, .. } = exact::constants(p.m, p.n)?;
    let (e1, e2) = fde_epsilon_window(a, p.alpha)?;
    fde_constants(
        p.alpha,
        p.m,
        p.n,
        p.k,
        p.r,
        p.epsilon1.unwrap_or(0.5 * e1),
        p.epsilon2.unwrap_or(0.5 * e2),
    )
}

/// Lower bound on `y − αz` for `Ric ≥ −(n−1)K²`.
pub fn fde_local_bound(p: &LocalBoundParams) -> Result<f64> {
    check_time(p.t)?;
    let c = fde_constants_for(p)?;
    let pre = c.gamma * p.alpha * p.alpha / c.c1p;
    Ok(-pre * (1.0 / p.t + c.c4 * c.c1p.sqrt() * p.k * p.k * p.v_max)
        - pre * p.v_max / (p.r * p.r) * (c.c2 + c.c5))
}

/// Lower bound on `y − αz` for `Ric ≥ 0`.
pub fn fde_local_bound_ricci_nonnegative(p: &LocalBoundParams) -> Result<f64> {
    check_time(p.t)?;
    let c = fde_constants_for(p)?;
    let pre = c.gamma * p.alpha * p.alpha / c.c1;
    Ok(-pre * (1.0 / p.t + p.v_max / (p.r * p.r) * (c.c2 + c.c3)))
}

pub(crate) fn params_for(
    traj: &Trajectory,
    snaps: &[Snapshot],
    alpha: f64,
    eps: Option<(f64, f64)>,
) -> LocalBoundParams {
    let m = traj.config.m;
    let r = ball_radius(&traj.manifold);
    LocalBoundParams {
        alpha,
        r,
        k: traj.manifold.ricci_bound_parameter(),
        v_max: pressure_extreme(snaps, m, r, true),
        t: traj.times[0],
        m,
        n: traj.manifold.dim(),
        epsilon1: eps.map(|e| e.0),
        epsilon2: eps.map(|e| e.1),
    }
}

fn tag(x: f64) -> String {
    format!("{x}")
}

/// `y − αz ≤` bound on the half ball, at every checkpoint.
pub fn check_pme_estimate(traj: &Trajectory, alpha: f64, tol: &Tolerance) -> Result<Vec<EstimateReport>> {
    let snaps = snapshots(traj)?;
    let mut p = params_for(traj, &snaps, alpha, None);
    let c = pme_constants(alpha, p.m, p.n, p.k, p.r)?;
    let tol_h = tol.for_trajectory(traj);
    let ricci_ok = traj.manifold.has_nonnegative_ricci();

    let with_consts = |id: String| {
        EstimateReport::new(id)
            .with_constant("alpha", alpha)
            .with_constant("a", c.a)
            .with_constant("C1", c.c1)
            .with_constant("C2", c.c2)
            .with_constant("C3", c.c3)
            .with_constant("C1p", c.c1p)
            .with_constant("K", p.k)
            .with_constant("R", p.r)
            .with_constant("v_max", p.v_max)
    };
    let mut local1 = with_consts(format!("pme_local1[alpha={}]", tag(alpha)));
    let mut local2 = with_consts(format!("pme_local2[alpha={}]", tag(alpha)));

    for s in &snaps {
        let f = f_alpha_fields(&s.v, &s.v_t, &traj.manifold, alpha, p.m)?;
        let nodes = check_nodes(&s.u, traj.u_floor, MARGIN, 0.5 * p.r);
        let Some((r_worst, lhs)) = nodes
            .iter()
            .map(|&i| (s.u.grid().nodes()[i], -f.f_alpha.values()[i]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            continue;
        };
        p.t = s.t;
        let rhs2 = pme_local_bound(&p)?;
        local2.push(s.t, r_worst, lhs, rhs2, rhs2 - lhs, tol_h);
        if ricci_ok {
            let rhs1 = pme_local_bound_ricci_nonnegative(&p)?;
            local1.push(s.t, r_worst, lhs, rhs1, rhs1 - lhs, tol_h);
        }
    }
    Ok(if ricci_ok { vec![local1, local2] } else { vec![local2] })
}

/// `y − αz ≥` (negative) bound on the half ball, at every checkpoint.
pub fn check_fde_estimate(
    traj: &Trajectory,
    alpha: f64,
    eps: Option<(f64, f64)>,
    tol: &Tolerance,
) -> Result<Vec<EstimateReport>> {
    let snaps = snapshots(traj)?;
    let mut p = params_for(traj, &snaps, alpha, eps);
    let c = fde_constants_for(&p)?;
    let tol_h = tol.for_trajectory(traj);
    let ricci_ok = traj.manifold.has_nonnegative_ricci();

    let with_consts = |id: String| {
        EstimateReport::new(id)
            .with_constant("alpha", alpha)
            .with_constant("gamma", c.gamma)
            .with_constant("epsilon1", c.epsilon1)
            .with_constant("epsilon2", c.epsilon2)
            .with_constant("C1bar", c.c1)
            .with_constant("C1bar_p", c.c1p)
            .with_constant("C2bar", c.c2)
            .with_constant("C3bar", c.c3)
            .with_constant("C4bar", c.c4)
            .with_constant("C5bar", c.c5)
            .with_constant("K", p.k)
            .with_constant("R", p.r)
            .with_constant("vbar_max", p.v_max)
    };
    let mut local1 = with_consts(format!("fde_local1[alpha={}]", tag(alpha)));
    let mut local2 = with_consts(format!("fde_local2[alpha={}]", tag(alpha)));

    for s in &snaps {
        let f = f_alpha_fields(&s.v, &s.v_t, &traj.manifold, alpha, p.m)?;
        let nodes = check_nodes(&s.u, traj.u_floor, MARGIN, 0.5 * p.r);
        let Some((r_worst, lhs)) = nodes
            .iter()
            .map(|&i| (s.u.grid().nodes()[i], -f.f_alpha.values()[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
        else {
            continue;
        };
        p.t = s.t;
        let rhs2 = fde_local_bound(&p)?;
        local2.push(s.t, r_worst, lhs, rhs2, lhs - rhs2, tol_h);
        if ricci_ok {
            let rhs1 = fde_local_bound_ricci_nonnegative(&p)?;
            local1.push(s.t, r_worst, lhs, rhs1, lhs - rhs1, tol_h);
        }
    }
    Ok(if ricci_ok { vec![local1, local2] } else { vec![local2] })
}

/// One-sided global bounds: `F₁ + a/t ≥ 0` (PME, `Ric ≥ 0`) and
/// `Δv + κ/t ≥ 0` (both regimes).
pub fn global_bounds_check(traj: &Trajectory, tol: &Tolerance) -> Result<Vec<EstimateReport>> {
    let m = traj.config.m;
    let k = exact::constants(m, traj.manifold.dim())?;
    let tol_h = tol.for_trajectory(traj);
    let pme = m > 1.0 && traj.manifold.has_nonnegative_ricci();
    let mut f1 = EstimateReport::new("ab_f1").with_constant("a", k.a);
    let mut lap = EstimateReport::new("ab_laplacian").with_constant("kappa", k.kappa);
    for s in snapshots(traj)? {
        let nodes = check_nodes(&s.u, traj.u_floor, MARGIN, f64::INFINITY);
        let Some((r, min_lap)) = nodes
            .iter()
            .map(|&i| (s.u.grid().nodes()[i], s.lap_v.values()[i]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
        else {
            continue;
        };
        lap.push(s.t, r, min_lap, -k.kappa / s.t, min_lap + k.kappa / s.t, tol_h);
        if pme {
            let f = (m - 1.0) * min_lap;
            f1.push(s.t, r, f, -k.a / s.t, f + k.a / s.t, tol_h);
        }
    }
    Ok(if pme { vec![f1, lap] } else { vec![lap] })
}

/// `α` tied to the power `β` by `(α−1)/α = (m−1)(β−1)`.
pub(crate) fn alpha_for_power(m: f64, beta: f64) -> Result<f64> {
    if m > 1.0 {
        if !(beta > 1.0 && beta < m / (m - 1.0)) {
            return Err(Error::Range(format!(
                "power bound needs 1 < beta < m/(m-1) = {}, got {beta}",
                m / (m - 1.0)
            )));
        }
    } else if !(beta > 1.0) {
        return Err(Error::Range(format!("power bound needs beta > 1, got {beta}")));
    }
    Ok(1.0 / (1.0 - (m - 1.0) * (beta - 1.0)))
}

/// `Δv^β` bounded below (PME) or `Δ(−v)^β` bounded above (FDE) on the half ball.
pub fn laplacian_power_bound(
    traj: &Trajectory,
    beta: f64,
    eps: Option<(f64, f64)>,
    tol: &Tolerance,
) -> Result<Vec<EstimateReport>> {
    let m = traj.config.m;
    let alpha = alpha_for_power(m, beta)?;
    let snaps = snapshots(traj)?;
    let p = params_for(traj, &snaps, alpha, eps);
    let k = exact::constants(m, p.n)?;
    let tol_h = tol.for_trajectory(traj);
    let ricci_ok = traj.manifold.has_nonnegative_ricci();
    let vmax = p.v_max;
    let (r, kk) = (p.r, p.k);

    // (bound (1), bound (2)) as functions of t; signed so that the check is
    // lhs ≥ rhs for the porous medium and lhs ≤ rhs for fast diffusion.
    let pme = m > 1.0;
    let bounds: Box<dyn Fn(f64) -> (f64, f64)> = if pme {
        let c = pme_constants(alpha, m, p.n, kk, r)?;
        let pre = k.kappa * alpha * beta;
        Box::new(move |t| {
            let b1 = -pre * vmax.powf(beta - 1.0) * (1.0 / t + vmax / (r * r) * (c.c1 + c.c2));
            let b2 = -pre * vmax.powf(beta - 1.0) * (1.0 / t + c.c3 * kk * kk * vmax)
                - pre * vmax.powf(beta) / (r * r) * (c.c2 + c.c1p);
            (b1, b2)
        })
    } else {
        let c = fde_constants_for(&p)?;
        let base = k.kappa * alpha * beta;
        Box::new(move |t| {
            let b1 = base / c.c1 * vmax.powf(beta - 1.0) * (1.0 / t + vmax / (r * r) * (c.c2 + c.c3));
            let b2 = base / c.c1p * vmax.powf(beta - 1.0) * (1.0 / t + c.c4 * c.c1p.sqrt() * kk * kk * vmax)
                + base / c.c1p * vmax.powf(beta) / (r * r) * (c.c2 + c.c5);
            (b1, b2)
        })
    };

    let id = |v: u8| format!("power_bound{v}[beta={}]", tag(beta));
    let mut rep1 = EstimateReport::new(id(1)).with_constant("alpha", alpha).with_constant("v_max", vmax);
    let mut rep2 = EstimateReport::new(id(2)).with_constant("alpha", alpha).with_constant("v_max", vmax);
    for s in &snaps {
        let f = f_alpha_fields(&s.v, &s.v_t, &traj.manifold, alpha, m)?;
        let nodes = check_nodes(&s.u, traj.u_floor, MARGIN, 0.5 * r);
        // Δ(±v)^β = β/(α|m−1|) |v|^{β−1} F_α
        let values = nodes.iter().map(|&i| {
            let w = s.v.values()[i].abs();
            (s.u.grid().nodes()[i], beta / (alpha * (m - 1.0).abs()) * w.powf(beta - 1.0) * f.f_alpha.values()[i])
        });
        let worst = if pme {
            values.min_by(|a, b| a.1.total_cmp(&b.1))
        } else {
            values.max_by(|a, b| a.1.total_cmp(&b.1))
        };
        let Some((rw, lhs)) = worst else { continue };
        let (b1, b2) = bounds(s.t);
        let margin = |b: f64| if pme { lhs - b } else { b - lhs };
        rep2.push(s.t, rw, lhs, b2, margin(b2), tol_h * b2.abs().max(1.0));
        if ricci_ok {
            rep1.push(s.t, rw, lhs, b1, margin(b1), tol_h * b1.abs().max(1.0));
        }
    }
    Ok(if ricci_ok { vec![rep1, rep2] } else { vec![rep2] })
}
