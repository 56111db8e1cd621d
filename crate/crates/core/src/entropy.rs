//! Nash-type entropy `N`, the Perelman-type entropy `W` and their exact
//! dissipation identities on closed model manifolds.
//!
//! With `v` the pressure, `F₁ = (m−1)Δv` and `a = (m−1)κ`:
//!
//! - `N(t) = −t^a ∫ v u`
//! - `dN/dt = −t^a ∫ (F₁ + a/t) v u`
//! - `W(t) = t dN/dt + N = t^{a+1} ∫ (m|∇v|² u − (a+1) v u / t)`
//! - `dW/dt = −2(m−1) t^{a+1} ∫ (|∇²v + g/((b+2)t)|² + Ric(∇v,∇v)) v u − 2 t^{a+1} ∫ (F₁ + a/t)² v u`

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimates::{EstimateReport, Tolerance};
use crate::exact::{self, Constants};
use crate::geometry::{self, BoundaryKind, Field, ModelManifold, RadialGrid};
use crate::solver::{time_derivative, Trajectory};

fn require_closed(manifold: &ModelManifold) -> Result<()> {
    if manifold.is_closed() {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "entropy functionals need a closed manifold, got {:?}",
            manifold.kind()
        )))
    }
}

fn product_integral(a: &Field, b: &Field, manifold: &ModelManifold) -> Result<f64> {
    geometry::integrate(&a.zip_map(b, |x, y| x * y)?, manifold)
}

/// `N(t) = −t^a ∫ v u dμ`.
pub fn nash_entropy(u: &Field, t: f64, m: f64, manifold: &ModelManifold) -> Result<f64> {
    require_closed(manifold)?;
    let k = exact::constants(m, manifold.dim())?;
    let v = exact::pressure(u, m)?;
    Ok(-t.powf(k.a) * product_integral(&v, u, manifold)?)
}

/// `dN/dt = −t^a ∫ (F₁ + a/t) v u dμ`.
pub fn nash_derivative(u: &Field, v: &Field, t: f64, m: f64, manifold: &ModelManifold) -> Result<f64> {
    require_closed(manifold)?;
    let k = exact::constants(m, manifold.dim())?;
    let lap = geometry::radial_laplacian(v, manifold)?;
    let weight = lap.zip_map(v, |l, v| ((m - 1.0) * l + k.a / t) * v)?;
    Ok(-t.powf(k.a) * product_integral(&weight, u, manifold)?)
}

/// The three spatial integrals behind the dissipation identity
/// `d/dt ∫ v u = ∫ F₁ v u = −m ∫ |∇v|² u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dissipation {
    /// `∫ v u dμ`; its time derivative is the left-hand side.
    pub vu: f64,
    /// `∫ F₁ v u dμ`.
    pub f1_vu: f64,
    /// `−m ∫ |∇v|² u dμ`.
    pub grad: f64,
}

pub fn dissipation_identity(u: &Field, v: &Field, manifold: &ModelManifold, m: f64) -> Result<Dissipation> {
    require_closed(manifold)?;
    let lap = geometry::radial_laplacian(v, manifold)?;
    let grad = geometry::gradient_sq(v, manifold)?;
    let f1v = lap.zip_map(v, |l, v| (m - 1.0) * l * v)?;
    Ok(Dissipation {
        vu: product_integral(v, u, manifold)?,
        f1_vu: product_integral(&f1v, u, manifold)?,
        grad: -m * product_integral(&grad, u, manifold)?,
    })
}

/// `2 ∫ ((m−1)(|∇²v|² + Ric(∇v,∇v)) + F₁²) v u dμ`, the time derivative of
/// `∫ F₁ v u dμ`.
pub fn energy_rhs(u: &Field, v: &Field, m: f64, manifold: &ModelManifold) -> Result<f64> {
    require_closed(manifold)?;
    let lap = geometry::radial_laplacian(v, manifold)?;
    let hess = geometry::hessian_norm_sq(v, manifold)?;
    let ric = geometry::ricci_quadratic(v, manifold)?;
    let values = (0..v.len())
        .map(|i| {
            let f1 = (m - 1.0) * lap.values()[i];
            let inner = (m - 1.0) * (hess.values()[i] + ric.values()[i]) + f1 * f1;
            2.0 * inner * v.values()[i] * u.values()[i]
        })
        .collect();
    geometry::integrate(&Field::new(Arc::clone(u.grid()), values)?, manifold)
}

/// Centred-difference check of `d/dt ∫ F₁ v u` at interior checkpoint `k`.
pub fn energy_derivative_identity(traj: &Trajectory, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k + 1 >= traj.len() {
        return Err(Error::Precondition(format!(
            "checkpoint {k} has no neighbours on both sides"
        )));
    }
    let m = traj.config.m;
    let manifold = &traj.manifold;
    let series = (k - 1..=k + 1)
        .map(|q| {
            let u = &traj.densities[q];
            let v = exact::pressure(u, m)?;
            Ok(dissipation_identity(u, &v, manifold, m)?.f1_vu)
        })
        .collect::<Result<Vec<_>>>()?;
    let lhs = time_derivative(&traj.times[k - 1..=k + 1], &series)?[1];
    let u = &traj.densities[k];
    let rhs = energy_rhs(u, &exact::pressure(u, m)?, m, manifold)?;
    Ok((lhs, rhs))
}

/// `W(t) = t^{a+1} ∫ (m |∇v|² u − (a+1) v u / t) dμ`.
pub fn entropy_w(u: &Field, v: &Field, t: f64, m: f64, manifold: &ModelManifold) -> Result<f64> {
    require_closed(manifold)?;
    entropy_w_unchecked(u, v, t, m, manifold)
}

fn entropy_w_unchecked(u: &Field, v: &Field, t: f64, m: f64, manifold: &ModelManifold) -> Result<f64> {
    let k = exact::constants(m, manifold.dim())?;
    let grad = geometry::gradient_sq(v, manifold)?;
    let values = (0..v.len())
        .map(|i| {
            let ui = u.values()[i];
            m * grad.values()[i] * ui - (k.a + 1.0) * v.values()[i] * ui / t
        })
        .collect();
    Ok(t.powf(k.a + 1.0) * geometry::integrate(&Field::new(Arc::clone(u.grid()), values)?, manifold)?)
}

/// Right-hand side of the `dW/dt` formula.
pub fn entropy_rhs(u: &Field, v: &Field, t: f64, m: f64, manifold: &ModelManifold) -> Result<f64> {
    require_closed(manifold)?;
    let k = exact::constants(m, manifold.dim())?;
    let c = 1.0 / ((k.b + 2.0) * t);
    let shifted = geometry::hessian_plus_identity_norm_sq(v, manifold, c)?;
    let ric = geometry::ricci_quadratic(v, manifold)?;
    let lap = geometry::radial_laplacian(v, manifold)?;
    let values = (0..v.len())
        .map(|i| {
            let vu = v.values()[i] * u.values()[i];
            let f1a = (m - 1.0) * lap.values()[i] + k.a / t;
            -2.0 * (m - 1.0) * (shifted.values()[i] + ric.values()[i]) * vu - 2.0 * f1a * f1a * vu
        })
        .collect();
    Ok(t.powf(k.a + 1.0) * geometry::integrate(&Field::new(Arc::clone(u.grid()), values)?, manifold)?)
}

/// Entropy time series of one trajectory, one entry per checkpoint.
///
/// `*_fd` series are three-point differences of checkpoint values (centred
/// inside, one-sided at the two ends).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub n: Vec<f64>,
    pub w: Vec<f64>,
    pub dn_dt_formula: Vec<f64>,
    pub dn_dt_fd: Vec<f64>,
    pub w_rhs: Vec<f64>,
    pub dw_dt_fd: Vec<f64>,
    pub dissipation_lhs: Vec<f64>,
    pub dissipation_rhs1: Vec<f64>,
    pub dissipation_rhs2: Vec<f64>,
    pub energy_lhs: Vec<f64>,
    pub energy_rhs: Vec<f64>,
}

impl EntropyTrace {
    pub const COLUMNS: [&'static str; 12] = [
        "t",
        "N",
        "W",
        "dN_dt_formula",
        "dN_dt_fd",
        "W_rhs",
        "dW_dt_fd",
        "dissipation_lhs",
        "dissipation_rhs1",
        "dissipation_rhs2",
        "energy_lhs",
        "energy_rhs",
    ];

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Row `k` in [`Self::COLUMNS`] order.
    pub fn row(&self, k: usize) -> [f64; 12] {
        [
            self.times[k],
            self.n[k],
            self.w[k],
            self.dn_dt_formula[k],
            self.dn_dt_fd[k],
            self.w_rhs[k],
            self.dw_dt_fd[k],
            self.dissipation_lhs[k],
            self.dissipation_rhs1[k],
            self.dissipation_rhs2[k],
            self.energy_lhs[k],
            self.energy_rhs[k],
        ]
    }
}

pub fn entropy_trace(traj: &Trajectory) -> Result<EntropyTrace> {
    require_closed(&traj.manifold)?;
    if traj.len() < 3 {
        return Err(Error::Precondition("entropy traces need at least three checkpoints".into()));
    }
    let m = traj.config.m;
    let manifold = &traj.manifold;
    let mut tr = EntropyTrace {
        times: traj.times.clone(),
        n: Vec::new(),
        w: Vec::new(),
        dn_dt_formula: Vec::new(),
        dn_dt_fd: Vec::new(),
        w_rhs: Vec::new(),
        dw_dt_fd: Vec::new(),
        dissipation_lhs: Vec::new(),
        dissipation_rhs1: Vec::new(),
        dissipation_rhs2: Vec::new(),
        energy_lhs: Vec::new(),
        energy_rhs: Vec::new(),
    };
    let mut vu = Vec::new();
    for (&t, u) in traj.times.iter().zip(&traj.densities) {
        let v = exact::pressure(u, m)?;
        let d = dissipation_identity(u, &v, manifold, m)?;
        tr.n.push(nash_entropy(u, t, m, manifold)?);
        tr.w.push(entropy_w(u, &v, t, m, manifold)?);
        tr.dn_dt_formula.push(nash_derivative(u, &v, t, m, manifold)?);
        tr.w_rhs.push(entropy_rhs(u, &v, t, m, manifold)?);
        tr.dissipation_rhs1.push(d.f1_vu);
        tr.dissipation_rhs2.push(d.grad);
        tr.energy_rhs.push(energy_rhs(u, &v, m, manifold)?);
        vu.push(d.vu);
    }
    tr.dn_dt_fd = time_derivative(&tr.times, &tr.n)?;
    tr.dw_dt_fd = time_derivative(&tr.times, &tr.w)?;
    tr.dissipation_lhs = time_derivative(&tr.times, &vu)?;
    tr.energy_lhs = time_derivative(&tr.times, &tr.dissipation_rhs1)?;
    Ok(tr)
}

fn push_match(rep: &mut EstimateReport, t: f64, lhs: f64, rhs: f64, tol: f64) {
    let scaled = (lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs()));
    rep.push(t, f64::NAN, lhs, rhs, -scaled, tol);
}

/// Two-sided identity checks on a trace: the spatial dissipation identity at
/// every checkpoint against `c·h²`, the derivative identities at interior
/// checkpoints against `c(h² + dt)`, all in scaled form.
pub fn identity_checks(trace: &EntropyTrace, traj: &Trajectory, tol: &Tolerance) -> Vec<EstimateReport> {
    let tol_space = tol.tol_space(traj.h());
    let tol_h = tol.for_trajectory(traj);
    let mut spatial = EstimateReport::new("entropy_dissipation_spatial");
    let mut vu_rate = EstimateReport::new("entropy_dissipation_rate");
    let mut energy = EstimateReport::new("entropy_energy_rate");
    let mut nash = EstimateReport::new("entropy_nash_rate");
    let mut w_rate = EstimateReport::new("entropy_w_rate");
    let mut w_def = EstimateReport::new("entropy_w_definition");
    let last = trace.len() - 1;
    for k in 0..=last {
        let t = trace.times[k];
        push_match(&mut spatial, t, trace.dissipation_rhs1[k], trace.dissipation_rhs2[k], tol_space);
        push_match(&mut w_def, t, trace.w[k], t * trace.dn_dt_formula[k] + trace.n[k], tol_space);
        if k == 0 || k == last {
            continue;
        }
        push_match(&mut vu_rate, t, trace.dissipation_lhs[k], trace.dissipation_rhs1[k], tol_h);
        push_match(&mut energy, t, trace.energy_lhs[k], trace.energy_rhs[k], tol_h);
        push_match(&mut nash, t, trace.dn_dt_fd[k], trace.dn_dt_formula[k], tol_h);
        push_match(&mut w_rate, t, trace.dw_dt_fd[k], trace.w_rhs[k], tol_h);
    }
    vec![spatial, vu_rate, energy, nash, w_rate, w_def]
}

/// Outcome of one monotonicity statement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityVerdict {
    /// `dN/dt ≤ 0`.
    pub nash: Verdict,
    /// `dW/dt ≤ 0`.
    pub w: Verdict,
    /// `N` concave in `s = 1/t`.
    pub concavity: Verdict,
    /// Per-statement rows, only for the applicable ones.
    pub reports: Vec<EstimateReport>,
}

/// Which statements hold in theory for `(m, n)` and the Ricci bound.
///
/// PME with `Ric ≥ 0`: all three. FDE with `m ∈ (m_c, 1)` and `Ric ≥ 0`: `N`
/// always, `W` and concavity only for `m ≥ m_c′`.
pub fn applicable(m: f64, n: usize, ricci_lower: f64) -> (bool, bool, bool) {
    if ricci_lower < 0.0 || m == 1.0 {
        return (false, false, false);
    }
    let Ok(k) = exact::constants(m, n) else {
        return (false, false, false);
    };
    if m > 1.0 {
        return (true, true, true);
    }
    let w = m >= k.m_c_prime - 1e-12;
    (true, w, w)
}

/// Monotonicity of `N`, `W` and concavity of `N` in `1/t`; statements
/// outside their hypotheses are `NotApplicable`, never `Fail`.
pub fn monotonicity_verdict(
    trace: &EntropyTrace,
    m: f64,
    n: usize,
    ricci_lower: f64,
    tol_h: f64,
) -> MonotonicityVerdict {
    let (a_nash, a_w, a_conc) = applicable(m, n, ricci_lower);
    let last = trace.len().saturating_sub(1);
    let scale = 1.0 + trace.n.iter().chain(&trace.w).fold(0.0f64, |s, x| s.max(x.abs()));
    let mut reports = Vec::new();

    let mut verdict = |on: bool, rep: EstimateReport| {
        if !on {
            return Verdict::NotApplicable;
        }
        let v = if rep.pass() { Verdict::Pass } else { Verdict::Fail };
        reports.push(rep);
        v
    };

    let mut rep = EstimateReport::new("entropy_nash_monotone");
    for k in 0..trace.len() {
        // Formula everywhere, observed differences where they are centred.
        let mut worst = trace.dn_dt_formula[k];
        if k > 0 && k < last {
            worst = worst.max(trace.dn_dt_fd[k]);
        }
        rep.push(trace.times[k], f64::NAN, worst, 0.0, -worst / scale, tol_h);
    }
    let nash = verdict(a_nash, rep);

    let mut rep = EstimateReport::new("entropy_w_monotone");
    for k in 0..trace.len() {
        let mut worst = trace.w_rhs[k];
        if k > 0 && k < last {
            worst = worst.max(trace.dw_dt_fd[k]);
        }
        rep.push(trace.times[k], f64::NAN, worst, 0.0, -worst / scale, tol_h);
    }
    let w = verdict(a_w, rep);

    let mut rep = EstimateReport::new("entropy_concavity");
    for k in 1..last {
        let s = [1.0 / trace.times[k - 1], 1.0 / trace.times[k], 1.0 / trace.times[k + 1]];
        let f = [trace.n[k - 1], trace.n[k], trace.n[k + 1]];
        let second = 2.0
            * (f[0] / ((s[0] - s[1]) * (s[0] - s[2]))
                + f[1] / ((s[1] - s[0]) * (s[1] - s[2]))
                + f[2] / ((s[2] - s[0]) * (s[2] - s[1])));
        rep.push(trace.times[k], f64::NAN, second, 0.0, -second / scale, tol_h);
    }
    let concavity = verdict(a_conc, rep);

    MonotonicityVerdict { nash, w, concavity, reports }
}

/// Decay of `∫ |∇v|² u dμ` along a run, relative to its first value.
///
/// A vanishing limit is what forces ancient solutions to be constant; this
/// only probes the trend and is always advisory.
pub fn ancient_solution_probe(traj: &Trajectory, tol: &Tolerance) -> Result<EstimateReport> {
    require_closed(&traj.manifold)?;
    let m = traj.config.m;
    let energies = traj
        .densities
        .iter()
        .map(|u| {
            let v = exact::pressure(u, m)?;
            Ok(-dissipation_identity(u, &v, &traj.manifold, m)?.grad / m)
        })
        .collect::<Result<Vec<f64>>>()?;
    let e0 = energies[0];
    let mut rep = EstimateReport::new("ancient_probe");
    rep.advisory = true;
    let tol_h = tol.for_trajectory(traj);
    let mut prev = 1.0;
    for (k, &e) in energies.iter().enumerate() {
        let ratio = if e0 > 0.0 { e / e0 } else { 0.0 };
        if k > 0 {
            rep.push(traj.times[k], f64::NAN, ratio, prev, prev - ratio, tol_h);
        }
        prev = ratio;
    }
    Ok(rep)
}

/// Unit-mass stationary profile `u∞ = (C − (m−1)|x|²/(2m))₊^{1/(m−1)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationaryProfile {
    pub m: f64,
    pub n: usize,
    pub c: f64,
}

impl StationaryProfile {
    const QUADRATURE: usize = 20_000;

    pub fn new(m: f64, n: usize) -> Result<Self> {
        if m <= 1.0 || !(1..=4).contains(&n) {
            return Err(Error::Range(format!("stationary profile needs m > 1 and n in 1..=4, got m = {m}, n = {n}")));
        }
        let mass = |c: f64| Self { m, n, c }.moments().0;
        let (mut lo, mut hi) = (0.0, 1.0);
        while mass(hi) < 1.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Self { m, n, c: 0.5 * (lo + hi) })
    }

    pub fn support_radius(&self) -> f64 {
        (2.0 * self.m * self.c / (self.m - 1.0)).sqrt()
    }

    pub fn density(&self, r: f64) -> f64 {
        let base = self.c - (self.m - 1.0) * r * r / (2.0 * self.m);
        if base > 0.0 {
            base.powf(1.0 / (self.m - 1.0))
        } else {
            0.0
        }
    }

    /// `(∫ u, ∫ (|x|² u/2 + u^m/(m−1)))` by composite Simpson in `r`.
    fn moments(&self) -> (f64, f64) {
        let rs = self.support_radius();
        let q = Self::QUADRATURE;
        let h = rs / q as f64;
        let area = geometry::unit_sphere_area(self.n);
        let (mut mass, mut energy) = (0.0, 0.0);
        for j in 0..=q {
            let r = j as f64 * h;
            let w = if j == 0 || j == q { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            let jac = area * r.powi(self.n as i32 - 1) * w * h / 3.0;
            let u = self.density(r);
            mass += u * jac;
            energy += (r * r * u / 2.0 + u.powf(self.m) / (self.m - 1.0)) * jac;
        }
        (mass, energy)
    }

    /// `A(m, n) = ∫ (|x|² u∞/2 + u∞^m/(m−1)) dx`.
    pub fn energy(&self) -> f64 {
        self.moments().1
    }
}

/// Domain and grid for evaluating `W` of whole-space test densities: a flat
/// circle for `n = 1`, a large Euclidean ball otherwise.
fn proxy_grid(n: usize, half_width: f64, intervals: usize) -> Result<Arc<RadialGrid>> {
    if n == 1 {
        let manifold = ModelManifold::flat_circle(2.0 * half_width)?;
        RadialGrid::new(manifold, intervals, BoundaryKind::Periodic)
    } else {
        let manifold = ModelManifold::euclidean(n, half_width)?;
        RadialGrid::new(manifold, intervals, BoundaryKind::Dirichlet)
    }
}

/// `W(1/(b+2)) ≥ −2m (1/(b+2))^{a+1} A(m, n)` for unit-mass test densities:
/// the stationary profile (equality case) and two rescalings of it.
///
/// Evaluated on a proxy domain whose extent is four support radii, so the
/// support never touches the wrap or the outer wall. Always advisory.
pub fn log_sobolev_check(m: f64, n: usize, tol: &Tolerance) -> Result<EstimateReport> {
    let profile = StationaryProfile::new(m, n)?;
    let k: Constants = exact::constants(m, n)?;
    let t_star = 1.0 / (k.b + 2.0);
    let a_value = profile.energy();
    let bound = -2.0 * m * t_star.powf(k.a + 1.0) * a_value;
    let mut rep = EstimateReport::new("log_sobolev")
        .with_constant("A", a_value)
        .with_constant("C", profile.c);
    rep.advisory = true;

    let intervals = 4096;
    for lambda in [1.0f64, 0.7, 1.5] {
        // u_λ(x) = λⁿ u∞(λx) keeps unit mass.
        let half = 4.0 * profile.support_radius() / lambda.min(1.0);
        let grid = proxy_grid(n, half, intervals)?;
        let manifold = *grid.manifold();
        let floor = 1e-12;
        let u = Field::from_fn(&grid, |x| {
            let r = if n == 1 { (x - half).abs() } else { x };
            lambda.powi(n as i32) * profile.density(lambda * r) + floor
        })?;
        let v = exact::pressure(&u, m)?;
        let w = entropy_w_unchecked(&u, &v, t_star, m, &manifold)?;
        let tol_rel = tol.tol_space(grid.h());
        let margin = (w - bound) / (1.0 + bound.abs());
        rep.push(t_star, lambda, w, bound, margin, tol_rel);
    }
    Ok(rep)
}
