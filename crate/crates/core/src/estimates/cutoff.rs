//! The radial cutoff behind the local estimates.
//!
//! `θ ≡ 1` on `[0, 1/2]`, `θ ≡ 0` on `[1, ∞)`. In between `θ(s) = q(2 − 2s)`
//! where `q` is a C² piecewise cubic on `[0, 1]`: `q″` is piecewise linear
//! through the knots below, vanishing at both ends, with the two plateau
//! heights fixed by `q′(1) = 0` and `q(1) = 1`. The quintic smoothstep would
//! be simpler but has `sup θ′²/θ ≈ 43.2`, over budget.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{warping, ModelManifold};

const KNOTS: [f64; 6] = [0.0, 1.0 / 16.0, 0.5, 0.75, 0.875, 1.0];

/// `q″` at the knots per unit of the positive and negative plateau.
fn knot_values(p: f64, n: f64) -> [f64; 6] {
    [0.0, p, p, -n, -n, 0.0]
}

/// `(q, q′, q″)` at `y` for plateau heights `(p, n)`, integrated exactly.
fn profile(y: f64, p: f64, n: f64) -> (f64, f64, f64) {
    let g = knot_values(p, n);
    let (mut q0, mut q1) = (0.0, 0.0);
    for j in 0..KNOTS.len() - 1 {
        let (x0, x1) = (KNOTS[j], KNOTS[j + 1]);
        let slope = (g[j + 1] - g[j]) / (x1 - x0);
        let tau = y.min(x1) - x0;
        let a = q0 + q1 * tau + g[j] * tau * tau / 2.0 + slope * tau.powi(3) / 6.0;
        let b = q1 + g[j] * tau + slope * tau * tau / 2.0;
        if y <= x1 {
            return (a, b, g[j] + slope * tau);
        }
        q0 = a;
        q1 = b;
    }
    (q0, q1, 0.0)
}

fn plateaus() -> (f64, f64) {
    static CELL: OnceLock<(f64, f64)> = OnceLock::new();
    *CELL.get_or_init(|| {
        // (q(1), q′(1)) is linear in (p, n).
        let (a0, a1, _) = profile(1.0, 1.0, 0.0);
        let (b0, b1, _) = profile(1.0, 0.0, 1.0);
        let det = a0 * b1 - b0 * a1;
        (b1 / det, -a1 / det)
    })
}

/// `(θ(s), θ′(s), θ″(s))`.
pub fn cutoff_theta(s: f64) -> (f64, f64, f64) {
    if s <= 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let (p, n) = plateaus();
    let (q0, q1, q2) = profile(2.0 - 2.0 * s, p, n);
    (q0, -2.0 * q1, 4.0 * q2)
}

/// Worst values of `η(x) = θ(r(x)/R)` on one geometry.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometryCutoffRow {
    pub label: String,
    pub n: usize,
    pub k: f64,
    pub r: f64,
    /// `sup R²|∇η|²/η`, budget 40.
    pub grad_ratio: f64,
    /// `inf R²Δη`.
    pub min_laplacian: f64,
    /// `−40((n−1)(1+KR)+1)`.
    pub laplacian_floor: f64,
    /// `−40 − 2√40 (n−1)(1+KR)`.
    pub laplacian_floor_alt: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CutoffReport {
    pub samples: usize,
    pub theta_quarter: f64,
    pub theta_beyond: f64,
    pub max_ratio: f64,
    pub min_second: f64,
    pub c2_jump: f64,
    pub geometries: Vec<GeometryCutoffRow>,
    pub pass: bool,
}

fn standard_geometries() -> Result<Vec<(String, ModelManifold, f64)>> {
    let mut out = Vec::new();
    for n in 1..=4 {
        for r in [1.0, 5.0] {
            out.push((format!("euclidean n={n}"), ModelManifold::euclidean(n, r)?, r));
        }
    }
    for n in 2..=4 {
        for (k, r) in [(1.0, 1.0), (1.0, 3.0), (0.5, 2.0)] {
            out.push((format!("hyperbolic n={n} K={k}"), ModelManifold::hyperbolic(n, k, r)?, r));
        }
        for (k, r) in [(1.0, 1.0), (1.0, std::f64::consts::PI)] {
            out.push((format!("sphere n={n} K={k}"), ModelManifold::sphere_cap(n, k, r)?, r));
        }
    }
    Ok(out)
}

/// Checks the four cutoff properties on `samples` points of `[0, 1.25]` and
/// the induced bounds on `η` on a standard list of model geometries.
pub fn verify_cutoff(samples: usize) -> Result<CutoffReport> {
    let samples = samples.max(16);
    let mut max_ratio = 0.0f64;
    let mut min_second = f64::INFINITY;
    for j in 0..=samples {
        let s = 1.25 * j as f64 / samples as f64;
        let (th, d1, d2) = cutoff_theta(s);
        if th > 0.0 {
            max_ratio = max_ratio.max(d1 * d1 / th);
        }
        min_second = min_second.min(d2);
    }
    // Continuity of θ, θ′, θ″ across both joins.
    let e = 1e-9;
    let mut c2_jump = 0.0f64;
    for s in [0.5, 1.0] {
        let (a0, a1, a2) = cutoff_theta(s - e);
        let (b0, b1, b2) = cutoff_theta(s + e);
        c2_jump = c2_jump.max((a0 - b0).abs()).max((a1 - b1).abs()).max((a2 - b2).abs());
    }

    let mut geometries = Vec::new();
    for (label, manifold, r_ball) in standard_geometries()? {
        let n = manifold.dim();
        let k = manifold.ricci_bound_parameter();
        let n1 = (n - 1) as f64;
        let mut grad_ratio = 0.0f64;
        let mut min_laplacian = f64::INFINITY;
        for j in 1..=samples {
            let r = r_ball * j as f64 / samples as f64;
            let (th, d1, d2) = cutoff_theta(r / r_ball);
            let w = warping(&manifold, r.min(manifold.r_domain()))?;
            // R²Δη = θ″ + (n−1) R (φ′/φ) θ′
            let lap = if d1 == 0.0 { d2 } else { d2 + n1 * r_ball * w.dphi / w.phi * d1 };
            min_laplacian = min_laplacian.min(lap);
            if th > 0.0 {
                grad_ratio = grad_ratio.max(d1 * d1 / th);
            }
        }
        let floor = -40.0 * (n1 * (1.0 + k * r_ball) + 1.0);
        let floor_alt = -40.0 - 2.0 * 40f64.sqrt() * n1 * (1.0 + k * r_ball);
        let pass = grad_ratio <= 40.0 && min_laplacian >= floor && min_laplacian >= floor_alt;
        geometries.push(GeometryCutoffRow {
            label,
            n,
            k,
            r: r_ball,
            grad_ratio,
            min_laplacian,
            laplacian_floor: floor,
            laplacian_floor_alt: floor_alt,
            pass,
        });
    }

    let theta_quarter = cutoff_theta(0.25).0;
    let theta_beyond = cutoff_theta(1.2).0;
    let pass = theta_quarter == 1.0
        && theta_beyond == 0.0
        && max_ratio <= 40.0
        && min_second >= -40.0
        && c2_jump < 1e-6
        && geometries.iter().all(|g| g.pass);
    Ok(CutoffReport {
        samples,
        theta_quarter,
        theta_beyond,
        max_ratio,
        min_second,
        c2_jump,
        geometries,
        pass,
    })
}
