//! Fully implicit Euler + Newton integrator for `∂_t u = Δ(u^m)`.
//!
//! The spatial operator is the conservative finite-volume form of the radial
//! Laplacian: fluxes through the faces `r_{i±1/2}` weighted by `φ^{n-1}`,
//! divided by the exact cell volumes held by the grid. Pole cells share part
//! of their mass with the neighbouring node (see [`geometry::RadialGrid::pole_mass`]).
//! Summing the update against the grid weights telescopes, so the discrete mass reported by
//! [`geometry::integrate`] is conserved on closed manifolds and behind
//! zero-flux walls.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact;
use crate::geometry::{self, BoundaryKind, Field, ModelManifold};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub m: f64,
    /// Positivity floor; `None` resolves to `1e-8 · max u₀`.
    pub u_floor: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub checkpoint_every: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, m: f64) -> Self {
        Self {
            dt,
            t_end,
            m,
            u_floor: None,
            newton_tol: 1e-12,
            newton_max_iters: 50,
            checkpoint_every: 1,
        }
    }

    pub fn with_checkpoint_every(mut self, every: usize) -> Self {
        self.checkpoint_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::Config(format!("m = {} must be positive", self.m)));
        }
        if let Some(f) = self.u_floor {
            if !(f > 0.0) {
                return Err(Error::Config(format!("u_floor = {f} must be positive")));
            }
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iters == 0 {
            return Err(Error::Config("newton tolerance and iteration cap must be positive".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outer boundary condition for a solve.
#[derive(Clone)]
pub enum BoundaryCondition {
    /// Density prescribed at the outer node as a function of time.
    Dirichlet(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Zero flux through the outer wall of a ball.
    NeumannZero,
    /// Closed manifold: flat circle or whole sphere.
    Closed,
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dirichlet(_) => f.write_str("Dirichlet(..)"),
            Self::NeumannZero => f.write_str("NeumannZero"),
            Self::Closed => f.write_str("Closed"),
        }
    }
}

impl BoundaryCondition {
    fn check_grid(&self, manifold: &ModelManifold, boundary: BoundaryKind) -> Result<()> {
        let ok = match self {
            Self::Dirichlet(_) => boundary == BoundaryKind::Dirichlet,
            Self::NeumannZero => boundary == BoundaryKind::NeumannPole && !manifold.is_closed(),
            Self::Closed => manifold.is_closed(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "boundary condition {self:?} does not fit a {boundary:?} grid on {:?}",
                manifold.kind()
            )))
        }
    }

    pub fn conserves_mass(&self) -> bool {
        !matches!(self, Self::Dirichlet(_))
    }
}

/// Per-step Newton bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    /// Final scaled residual `max |G_i / V_i|`.
    pub residual: f64,
    pub clamped: usize,
    pub damped: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub dt: f64,
    pub m: f64,
    pub u_floor: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
}

struct Layout {
    unknowns: usize,
    periodic: bool,
}

impl Layout {
    fn of(u: &Field) -> Self {
        let big_n = u.grid().intervals();
        match u.grid().boundary() {
            BoundaryKind::Periodic => Self { unknowns: big_n, periodic: true },
            BoundaryKind::Dirichlet => Self { unknowns: big_n, periodic: false },
            BoundaryKind::NeumannPole => Self { unknowns: big_n + 1, periodic: false },
        }
    }
}

/// Advances one implicit Euler step to time `t_next`.
pub fn step(
    u: &Field,
    t_next: f64,
    opts: &StepOptions,
    manifold: &ModelManifold,
    bc: &BoundaryCondition,
) -> Result<(Field, StepDiagnostics)> {
    let grid = Arc::clone(u.grid());
    if grid.manifold() != manifold {
        return Err(Error::Shape("field grid and manifold disagree".into()));
    }
    bc.check_grid(manifold, grid.boundary())?;

    let layout = Layout::of(u);
    let big_n = grid.intervals();
    let h = grid.h();
    let vol = grid.volumes();
    let faces = grid.faces();
    let m = opts.m;
    let dt = opts.dt;
    let old = u.values();
    let boundary_value = match bc {
        BoundaryCondition::Dirichlet(g) => {
            let b = g(t_next);
            if !(b > 0.0) {
                return Err(Error::Domain(format!("Dirichlet datum {b} at t = {t_next} is not positive")));
            }
            Some(b.max(opts.u_floor))
        }
        _ => None,
    };
    let volume = |i: usize| if layout.periodic { h } else { vol[i] };
    let mix = grid.pole_mass();
    let poles = grid.poles();
    // Mass row i: Σ_j M_ij (x_j - old_j); only pole rows have an off-diagonal entry.
    let pole_of = |i: usize| poles.iter().find(|(p, _)| *p == i).map(|&(_, q)| q);
    let scale = old.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));

    let nu = layout.unknowns;
    let mut x: Vec<f64> = old[..nu].to_vec();
    let mut diag = StepDiagnostics::default();

    // (left neighbour, right neighbour, face coefficients) for unknown i
    let neighbours = |i: usize| -> (Option<(usize, f64)>, Option<(usize, f64)>) {
        if layout.periodic {
            let left = (i + big_n - 1) % big_n;
            let right = (i + 1) % big_n;
            (Some((left, faces[left] / h)), Some((right, faces[i] / h)))
        } else {
            let left = (i > 0).then(|| (i - 1, faces[i - 1] / h));
            let right = (i < big_n).then(|| (i + 1, faces[i] / h));
            (left, right)
        }
    };

    let residual = |x: &[f64], g: &mut [f64]| -> f64 {
        let w = |j: usize| -> f64 {
            if j < nu {
                x[j].powf(m)
            } else {
                boundary_value.expect("only the Dirichlet node lies past the unknowns").powf(m)
            }
        };
        let mut worst = 0.0f64;
        for i in 0..nu {
            let wi = w(i);
            let (left, right) = neighbours(i);
            let mut flux = 0.0;
            if let Some((j, c)) = left {
                flux += c * (w(j) - wi);
            }
            if let Some((j, c)) = right {
                flux += c * (w(j) - wi);
            }
            let mass = match pole_of(i) {
                Some(q) => volume(i) * ((1.0 - mix) * (x[i] - old[i]) + mix * (x[q] - old[q])),
                None => volume(i) * (x[i] - old[i]),
            };
            g[i] = mass - dt * flux;
            worst = worst.max((g[i] / volume(i)).abs());
        }
        worst
    };

    let mut g = vec![0.0; nu];
    let mut lower = vec![0.0; nu];
    let mut main = vec![0.0; nu];
    let mut upper = vec![0.0; nu];
    let mut res = residual(&x, &mut g);
    let target = opts.newton_tol * scale;
    let mut polished = false;

    loop {
        if res <= target {
            if polished || res == 0.0 {
                break;
            }
            polished = true;
        } else if diag.iterations >= opts.newton_max_iters {
            return Err(Error::Newton { step: 0, residual: res, iterations: diag.iterations });
        }
        diag.iterations += 1;

        // Jacobian rows: d G_i / d x_j.
        for i in 0..nu {
            let dw = |j: usize| m * x[j].powf(m - 1.0);
            let (left, right) = neighbours(i);
            lower[i] = 0.0;
            upper[i] = 0.0;
            main[i] = volume(i);
            if let Some(q) = pole_of(i) {
                main[i] = (1.0 - mix) * volume(i);
                if q > i {
                    upper[i] = mix * volume(i);
                } else {
                    lower[i] = mix * volume(i);
                }
            }
            if let Some((j, c)) = left {
                main[i] += dt * c * dw(i);
                if j < nu {
                    lower[i] -= dt * c * dw(j);
                }
            }
            if let Some((j, c)) = right {
                main[i] += dt * c * dw(i);
                if j < nu {
                    upper[i] -= dt * c * dw(j);
                }
            }
        }
        let delta = if layout.periodic {
            solve_cyclic_tridiagonal(&lower, &main, &upper, &g)?
        } else {
            solve_tridiagonal(&lower, &main, &upper, &g)?
        };

        let mut lambda = 1.0;
        let mut trial: Vec<f64>;
        let mut tries = 0;
        loop {
            trial = x.iter().zip(&delta).map(|(a, d)| a - lambda * d).collect();
            if trial.iter().all(|&v| v > 0.0) {
                break;
            }
            tries += 1;
            if tries > 40 {
                return Err(Error::Newton { step: 0, residual: res, iterations: diag.iterations });
            }
            lambda *= 0.5;
            diag.damped += 1;
        }
        x = trial;
        res = residual(&x, &mut g);
        if !res.is_finite() {
            return Err(Error::Newton { step: 0, residual: res, iterations: diag.iterations });
        }
    }
    diag.residual = res;

    let mut values = Vec::with_capacity(big_n + 1);
    values.extend_from_slice(&x);
    if let Some(b) = boundary_value {
        values.push(b);
    } else if layout.periodic {
        values.push(x[0]);
    }
    for v in values.iter_mut() {
        if *v < opts.u_floor {
            *v = opts.u_floor;
            diag.clamped += 1;
        }
    }
    Ok((Field::new(grid, values)?, diag))
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], main: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = main.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = main[0];
    if denom == 0.0 {
        return Err(Error::Precondition("singular tridiagonal system".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = main[i] - lower[i] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Precondition("singular tridiagonal system".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Cyclic tridiagonal solve (Sherman–Morrison); `lower[0]` couples row 0 to
/// the last unknown and `upper[n-1]` couples the last row to unknown 0.
fn solve_cyclic_tridiagonal(lower: &[f64], main: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = main.len();
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -main[0];
    let mut b = main.to_vec();
    b[0] -= gamma;
    b[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &b, upper, rhs)?;
    let mut uvec = vec![0.0; n];
    uvec[0] = gamma;
    uvec[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &b, upper, &uvec)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

/// Checkpointed solution history.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub densities: Vec<Field>,
    pub manifold: ModelManifold,
    pub config: SolverConfig,
    /// Resolved positivity floor.
    pub u_floor: f64,
    pub diagnostics: Vec<StepDiagnostics>,
    pub conserves_mass: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.densities[0].grid().h()
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn masses(&self) -> Result<Vec<f64>> {
        self.densities
            .iter()
            .map(|u| geometry::integrate(u, &self.manifold))
            .collect()
    }

    pub fn total_clamps(&self) -> usize {
        self.diagnostics.iter().map(|d| d.clamped).sum()
    }
}

/// Runs `u₀` from `t0` to `cfg.t_end`.
pub fn solve(
    u0: &Field,
    t0: f64,
    cfg: &SolverConfig,
    manifold: &ModelManifold,
    bc: &BoundaryCondition,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t0 > 0.0) {
        return Err(Error::Precondition(format!("initial time t0 = {t0} must be positive")));
    }
    let u_max = u0.max();
    if !(u_max > 0.0) {
        return Err(Error::Domain("initial density must be positive somewhere".into()));
    }
    let u_floor = cfg.u_floor.unwrap_or(1e-8 * u_max);
    let lifted = u0.map(|x| x.max(u_floor))?;

    let span = cfg.t_end - t0;
    let steps = if span > 0.0 { (span / cfg.dt - 1e-9).ceil() as usize } else { 0 };
    let opts = StepOptions {
        dt: cfg.dt,
        m: cfg.m,
        u_floor,
        newton_tol: cfg.newton_tol,
        newton_max_iters: cfg.newton_max_iters,
    };

    let mut times = vec![t0];
    let mut densities = vec![lifted.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    let mut u = lifted;
    for k in 1..=steps {
        let t = t0 + k as f64 * cfg.dt;
        let (next, diag) = step(&u, t, &opts, manifold, bc).map_err(|e| match e {
            Error::Newton { residual, iterations, .. } => Error::Newton { step: k, residual, iterations },
            other => other,
        })?;
        diagnostics.push(diag);
        u = next;
        if k % cfg.checkpoint_every == 0 || k == steps {
            times.push(t);
            densities.push(u.clone());
        }
    }
    Ok(Trajectory {
        times,
        densities,
        manifold: *manifold,
        config: cfg.clone(),
        u_floor,
        diagnostics,
        conserves_mass: bc.conserves_mass(),
    })
}

/// `v_t = (m-1) v Δv + |∇v|²` (or `Δv + |∇v|²` for `m = 1`) from spatial operators.
pub fn pressure_time_derivative(u: &Field, m: f64, manifold: &ModelManifold) -> Result<Field> {
    let v = exact::pressure(u, m)?;
    let lap = geometry::radial_laplacian(&v, manifold)?;
    let grad = geometry::gradient_sq(&v, manifold)?;
    let values = (0..v.len())
        .map(|i| {
            let diffusion = if m == 1.0 { lap.values()[i] } else { (m - 1.0) * v.values()[i] * lap.values()[i] };
            diffusion + grad.values()[i]
        })
        .collect();
    Field::new(Arc::clone(u.grid()), values)
}

/// Second-order derivative weights of a three-point stencil at `x[j]` for the
/// (possibly non-uniform) abscissae `x`.
pub(crate) fn three_point_weights(x: [f64; 3], j: usize) -> [f64; 3] {
    let [x0, x1, x2] = x;
    let at = x[j];
    [
        ((at - x1) + (at - x2)) / ((x0 - x1) * (x0 - x2)),
        ((at - x0) + (at - x2)) / ((x1 - x0) * (x1 - x2)),
        ((at - x0) + (at - x1)) / ((x2 - x0) * (x2 - x1)),
    ]
}

/// Time derivative of a checkpoint series: centred at interior checkpoints,
/// one-sided three-point at the ends. Needs at least three samples.
pub fn time_derivative(times: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 || values.len() != n {
        return Err(Error::Precondition(
            "time differencing needs at least three checkpoints".into(),
        ));
    }
    Ok((0..n)
        .map(|k| {
            let (start, j) = match k {
                0 => (0, 0),
                k if k == n - 1 => (n - 3, 2),
                k => (k - 1, 1),
            };
            let w = three_point_weights([times[start], times[start + 1], times[start + 2]], j);
            (0..3).map(|q| w[q] * values[start + q]).sum()
        })
        .collect())
}

/// Pressure time derivative at checkpoint `k` by differencing checkpoint pressures.
pub fn pressure_time_derivative_fd(traj: &Trajectory, k: usize) -> Result<Field> {
    let n = traj.len();
    if n < 3 || k >= n {
        return Err(Error::Precondition("need three checkpoints around k".into()));
    }
    let (start, j) = match k {
        0 => (0, 0),
        k if k == n - 1 => (n - 3, 2),
        k => (k - 1, 1),
    };
    let w = three_point_weights([traj.times[start], traj.times[start + 1], traj.times[start + 2]], j);
    let m = traj.config.m;
    let vs = (start..start + 3)
        .map(|q| exact::pressure(&traj.densities[q], m))
        .collect::<Result<Vec<_>>>()?;
    let values = (0..vs[0].len())
        .map(|i| (0..3).map(|q| w[q] * vs[q].values()[i]).sum())
        .collect();
    Field::new(Arc::clone(vs[0].grid()), values)
}
