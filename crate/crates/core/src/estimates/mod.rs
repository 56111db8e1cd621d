//! Li–Yau type quantities, their explicit bounds and margin reports.
//!
//! Every check walks the checkpoints of a [`Trajectory`], evaluates the
//! pressure-side fields through [`Snapshot`] and records the worst node per
//! checkpoint as an [`EstimateRow`].

mod bochner;
mod bounds;
mod cutoff;
mod harnack;

pub use bochner::bochner_residual;
pub use bounds::{
    check_fde_estimate, check_pme_estimate, fde_constants, fde_epsilon_window, fde_local_bound,
    fde_local_bound_ricci_nonnegative, global_bounds_check, laplacian_power_bound, pme_constants,
    pme_local_bound, pme_local_bound_ricci_nonnegative, FdeConstants, PmeConstants,
};
pub use cutoff::{cutoff_theta, verify_cutoff, CutoffReport, GeometryCutoffRow};
pub use harnack::{
    check_harnack_ratio, check_integrated_harnack, harnack_ratio_bound_fde, harnack_ratio_bound_pme,
    integrated_harnack_fde, integrated_harnack_pme, sample_pairs, HarnackPair,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact;
use crate::geometry::{self, BoundaryKind, Field, ManifoldKind, ModelManifold};
use crate::solver::{self, Trajectory};

/// `tol_h = c · scale · (h² + dt)`; `scale` comes from `PME_TOL_SCALE`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub c: f64,
    pub scale: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { c: Self::DEFAULT_C, scale: 1.0 }
    }
}

impl Tolerance {
    pub const DEFAULT_C: f64 = 20.0;
    pub const ENV_VAR: &'static str = "PME_TOL_SCALE";

    pub fn new(c: f64) -> Self {
        Self { c, scale: 1.0 }
    }

    /// Reads the CI slack factor from the environment.
    pub fn from_env(c: f64) -> Result<Self> {
        let scale = match std::env::var(Self::ENV_VAR) {
            Ok(s) => s.trim().parse::<f64>().map_err(|e| {
                Error::Config(format!("{} = {s:?} is not a number: {e}", Self::ENV_VAR))
            })?,
            Err(_) => 1.0,
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!("{} must be positive, got {scale}", Self::ENV_VAR)));
        }
        Ok(Self { c, scale })
    }

    pub fn tol_h(&self, h: f64, dt: f64) -> f64 {
        self.c * self.scale * (h * h + dt)
    }

    /// Pure spatial tolerance `c · scale · h²`.
    pub fn tol_space(&self, h: f64) -> f64 {
        self.c * self.scale * h * h
    }

    pub fn for_trajectory(&self, traj: &Trajectory) -> f64 {
        self.tol_h(traj.h(), traj.dt())
    }
}

/// Pressure-side fields of one checkpoint.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    /// `v_t` from the pressure equation.
    pub v_t: Field,
    pub dv: Field,
    pub lap_v: Field,
    pub grad_sq: Field,
}

pub fn snapshot(u: &Field, t: f64, m: f64, manifold: &ModelManifold) -> Result<Snapshot> {
    let v = exact::pressure(u, m)?;
    Ok(Snapshot {
        t,
        u: u.clone(),
        v_t: solver::pressure_time_derivative(u, m, manifold)?,
        dv: geometry::gradient(&v, manifold)?,
        lap_v: geometry::radial_laplacian(&v, manifold)?,
        grad_sq: geometry::gradient_sq(&v, manifold)?,
        v,
    })
}

pub fn snapshots(traj: &Trajectory) -> Result<Vec<Snapshot>> {
    traj.times
        .iter()
        .zip(&traj.densities)
        .map(|(&t, u)| snapshot(u, t, traj.config.m, &traj.manifold))
        .collect()
}

/// `y = |∇v|²/v`, `z = v_t/v`, `F_α = αz − y` and `F₁ = (m−1)Δv`.
#[derive(Clone, Debug)]
pub struct FAlphaFields {
    pub y: Field,
    pub z: Field,
    pub f_alpha: Field,
    pub f_1: Field,
    pub alpha: f64,
    /// Largest pointwise spread between the three expressions of `F_α`.
    pub form_gap: f64,
}

pub fn f_alpha_fields(
    v: &Field,
    v_t: &Field,
    manifold: &ModelManifold,
    alpha: f64,
    m: f64,
) -> Result<FAlphaFields> {
    if m == 1.0 {
        return Err(Error::Range("F_alpha needs m != 1".into()));
    }
    v.check_same_grid(v_t)?;
    let positive = m > 1.0;
    if let Some(bad) = v.values().iter().find(|&&x| if positive { x <= 0.0 } else { x >= 0.0 }) {
        return Err(Error::Domain(format!(
            "pressure value {bad} has the wrong sign for m = {m}"
        )));
    }
    let lap = geometry::radial_laplacian(v, manifold)?;
    let grad = geometry::gradient_sq(v, manifold)?;
    let y = grad.zip_map(v, |g, v| g / v)?;
    let z = v_t.zip_map(v, |vt, v| vt / v)?;
    let f_alpha = z.zip_map(&y, |z, y| alpha * z - y)?;
    let f_1 = lap.map(|l| (m - 1.0) * l)?;

    let mut form_gap = 0.0f64;
    for i in 0..v.len() {
        let (yi, zi, li) = (y.values()[i], z.values()[i], lap.values()[i]);
        let a = f_alpha.values()[i];
        let b = (m - 1.0) * li + (alpha - 1.0) * zi;
        let c = alpha * (m - 1.0) * li + (alpha - 1.0) * yi;
        form_gap = form_gap.max((a - b).abs()).max((a - c).abs()).max((b - c).abs());
    }
    Ok(FAlphaFields { y, z, f_alpha, f_1, alpha, form_gap })
}

/// One checkpoint's worst node for one inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub check_id: String,
    pub t: f64,
    pub worst_node_r: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed slack; positive means the inequality holds with room.
    pub margin: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub check_id: String,
    pub rows: Vec<EstimateRow>,
    /// Advisory checks are reported but never gate the exit status.
    pub advisory: bool,
    pub constants: Vec<(String, f64)>,
}

impl EstimateReport {
    pub fn new(check_id: impl Into<String>) -> Self {
        Self { check_id: check_id.into(), rows: Vec::new(), advisory: false, constants: Vec::new() }
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.push((name.to_string(), value));
        self
    }

    pub fn push(&mut self, t: f64, r: f64, lhs: f64, rhs: f64, margin: f64, tol: f64) {
        self.rows.push(EstimateRow {
            check_id: self.check_id.clone(),
            t,
            worst_node_r: r,
            lhs,
            rhs,
            margin,
            tol,
            pass: margin >= -tol && margin.is_finite(),
        });
    }

    /// Empty reports fail: a check that saw no nodes certifies nothing.
    pub fn pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    pub fn worst(&self) -> Option<&EstimateRow> {
        self.rows.iter().min_by(|a, b| {
            (a.margin + a.tol).partial_cmp(&(b.margin + b.tol)).unwrap_or(std::cmp::Ordering::Equal)
        })
    }
}

/// Parameters of the local gradient bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalBoundParams {
    pub alpha: f64,
    pub r: f64,
    pub k: f64,
    /// `sup v` (PME) or `sup (−v)` (FDE) over the cylinder.
    pub v_max: f64,
    pub t: f64,
    pub m: f64,
    pub n: usize,
    pub epsilon1: Option<f64>,
    pub epsilon2: Option<f64>,
}

/// Radius of the largest geodesic ball about the pole covered by the grid.
pub fn ball_radius(manifold: &ModelManifold) -> f64 {
    match manifold.kind() {
        ManifoldKind::FlatCircle => 0.5 * manifold.r_domain(),
        _ => manifold.r_domain(),
    }
}

/// Nodes at least `margin` cells away from edges, walls and the border of
/// the positivity set `{u > 100 u_floor}`, and within `radius` of the pole.
pub(crate) fn check_nodes(u: &Field, u_floor: f64, margin: usize, radius: f64) -> Vec<usize> {
    let grid = u.grid();
    let big_n = grid.intervals();
    let periodic = grid.boundary() == BoundaryKind::Periodic;
    let inside = |j: isize| -> bool {
        let idx = if periodic {
            j.rem_euclid(big_n as isize) as usize
        } else if j < 0 || j > big_n as isize {
            // Reflection across a pole keeps the positivity pattern.
            let r = if j < 0 { -j } else { 2 * big_n as isize - j };
            r.clamp(0, big_n as isize) as usize
        } else {
            j as usize
        };
        u.values()[idx] > 100.0 * u_floor
    };
    grid.interior_nodes(margin)
        .into_iter()
        .filter(|&i| grid.distance_from_pole(i) <= radius * (1.0 + 1e-12))
        .filter(|&i| {
            let i = i as isize;
            (i - margin as isize..=i + margin as isize).all(inside)
        })
        .collect()
}

/// Interior margin for second-order stencils.
pub(crate) const MARGIN: usize = 2;
/// Interior margin for stencils of stencils (fourth derivatives).
pub(crate) const MARGIN_FOURTH: usize = 3;

/// `max v` (or `max −v` for `m < 1`) over the nodes within `radius` of the
/// pole, across all checkpoints.
pub(crate) fn pressure_extreme(snaps: &[Snapshot], m: f64, radius: f64, max: bool) -> f64 {
    let sign = if m > 1.0 { 1.0 } else { -1.0 };
    let mut best = if max { f64::NEG_INFINITY } else { f64::INFINITY };
    for s in snaps {
        let grid = s.v.grid();
        for (i, &v) in s.v.values().iter().enumerate() {
            if grid.distance_from_pole(i) <= radius * (1.0 + 1e-12) {
                let x = sign * v;
                best = if max { best.max(x) } else { best.min(x) };
            }
        }
    }
    best
}
