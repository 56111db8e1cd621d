//! Discrete certificate of the Bochner-type identity
//!
//! `L F_α = 2(m−1)|∇²v|² + 2(m−1)Ric(∇v,∇v) + 2m⟨∇F_α,∇v⟩ + (α−1)z² + F₁²`
//!
//! with `L = ∂_t − (m−1)vΔ`. The time derivative comes from differencing
//! checkpoints; everything else from the grid operators.

use super::{check_nodes, f_alpha_fields, snapshots, EstimateReport, Tolerance, MARGIN_FOURTH};
use crate::error::{Error, Result};
use crate::geometry::{self};
use crate::solver::{three_point_weights, Trajectory};

/// Scaled `L∞` residual of the identity at every interior checkpoint.
///
/// Each row stores `max |residual| / (1 + max |term|)` as `lhs` against 0.
pub fn bochner_residual(traj: &Trajectory, alpha: f64, tol: &Tolerance) -> Result<EstimateReport> {
    let m = traj.config.m;
    if traj.len() < 3 {
        return Err(Error::Precondition("the residual needs three checkpoints".into()));
    }
    let manifold = &traj.manifold;
    let snaps = snapshots(traj)?;
    let fields = snaps
        .iter()
        .map(|s| f_alpha_fields(&s.v, &s.v_t, manifold, alpha, m))
        .collect::<Result<Vec<_>>>()?;
    let tol_h = tol.for_trajectory(traj);
    let mut rep = EstimateReport::new(format!("bochner[alpha={alpha}]")).with_constant("alpha", alpha);

    for k in 1..traj.len() - 1 {
        let s = &snaps[k];
        let f = &fields[k];
        let w = three_point_weights([traj.times[k - 1], traj.times[k], traj.times[k + 1]], 1);
        let lap_f = geometry::radial_laplacian(&f.f_alpha, manifold)?;
        let grad_f = geometry::gradient(&f.f_alpha, manifold)?;
        let hess = geometry::hessian_norm_sq(&s.v, manifold)?;
        let ric = geometry::ricci_quadratic(&s.v, manifold)?;

        let nodes = check_nodes(&s.u, traj.u_floor, MARGIN_FOURTH, f64::INFINITY);
        let mut worst = (0.0f64, 0.0f64);
        let mut scale = 1.0f64;
        for &i in &nodes {
            let ft = w[0] * fields[k - 1].f_alpha.values()[i]
                + w[1] * f.f_alpha.values()[i]
                + w[2] * fields[k + 1].f_alpha.values()[i];
            let v = s.v.values()[i];
            let diffusion = (m - 1.0) * v * lap_f.values()[i];
            let terms = [
                ft,
                diffusion,
                2.0 * (m - 1.0) * hess.values()[i],
                2.0 * (m - 1.0) * ric.values()[i],
                2.0 * m * grad_f.values()[i] * s.dv.values()[i],
                (alpha - 1.0) * f.z.values()[i].powi(2),
                f.f_1.values()[i].powi(2),
            ];
            let residual = terms[0] - terms[1] - terms[2..].iter().sum::<f64>();
            for t in terms {
                scale = scale.max(1.0 + t.abs());
            }
            if residual.abs() > worst.1.abs() || worst == (0.0, 0.0) {
                worst = (s.u.grid().nodes()[i], residual);
            }
        }
        if nodes.is_empty() {
            continue;
        }
        let scaled = worst.1.abs() / scale;
        rep.push(s.t, worst.0, scaled, 0.0, -scaled, tol_h);
    }
    Ok(rep)
}
