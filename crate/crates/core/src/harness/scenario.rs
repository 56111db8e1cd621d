//! Scenario files: schema, defaults and regime gates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, BarenblattParams};
use crate::geometry::{BoundaryKind, Field, ManifoldKind, ModelManifold, RadialGrid};
use crate::solver::{BoundaryCondition, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(rename = "K", default)]
    pub k: f64,
    #[serde(rename = "R_domain")]
    pub r_domain: f64,
}

fn one() -> usize {
    1
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<ModelManifold> {
        ModelManifold::new(self.kind, self.n, self.k, self.r_domain)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Barenblatt {
        #[serde(rename = "C")]
        c: f64,
        t0: f64,
    },
    Bump {
        #[serde(default)]
        center: f64,
        width: f64,
        height: f64,
        floor: f64,
    },
    Constant {
        c: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    /// Exact Barenblatt values for Barenblatt data, the frozen initial value otherwise.
    Dirichlet,
    NeumannZero,
    Closed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub dt: f64,
    pub t_end: f64,
    /// Grid intervals; the grid has `intervals + 1` nodes.
    pub intervals: usize,
    #[serde(default = "one")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub u_floor: Option<f64>,
    #[serde(default)]
    pub newton_tol: Option<f64>,
    #[serde(default)]
    pub newton_max_iters: Option<usize>,
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Ab,
    PmeLocal,
    FdeLocal,
    HarnackRatio,
    HarnackIntegrated,
    PowerBound,
    Entropy,
    BochnerResidual,
    Cutoff,
    LogSobolev,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ab => "ab",
            Self::PmeLocal => "pme_local",
            Self::FdeLocal => "fde_local",
            Self::HarnackRatio => "harnack_ratio",
            Self::HarnackIntegrated => "harnack_integrated",
            Self::PowerBound => "power_bound",
            Self::Entropy => "entropy",
            Self::BochnerResidual => "bochner_residual",
            Self::Cutoff => "cutoff",
            Self::LogSobolev => "log_sobolev",
        }
    }

    /// Checks that difference checkpoints in time.
    fn time_differenced(&self) -> bool {
        matches!(self, Self::Entropy | Self::BochnerResidual)
    }

    /// Checks that evaluate the pressure and therefore need `m ≠ 1`.
    fn needs_pressure(&self) -> bool {
        !matches!(self, Self::Cutoff)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub manifold: ManifoldSpec,
    pub initial_data: InitialData,
    pub m: f64,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    pub solver: SolverSpec,
    pub checks: Vec<CheckKind>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Overrides the tolerance constant `c` in `c(h² + dt)`.
    #[serde(default)]
    pub tol_c: Option<f64>,
    #[serde(default)]
    pub epsilon1: Option<f64>,
    #[serde(default)]
    pub epsilon2: Option<f64>,
}

/// Parses and validates scenario JSON.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn has(&self, check: CheckKind) -> bool {
        self.checks.contains(&check)
    }

    pub fn epsilons(&self) -> Option<(f64, f64)> {
        match (self.epsilon1, self.epsilon2) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }

    pub fn t0(&self) -> f64 {
        match self.initial_data {
            InitialData::Barenblatt { t0, .. } => t0,
            _ => self.solver.t0.unwrap_or(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        let manifold = self.manifold.build()?;
        let n = manifold.dim();
        let m = self.m;
        if !(m > 0.0 && m.is_finite()) {
            return cfg(format!("m must be positive, got {m}"));
        }
        if self.checks.iter().any(|c| c.needs_pressure()) {
            if m == 1.0 {
                return cfg("pressure checks need m != 1".into());
            }
            let m_c = exact::critical_exponent(n);
            if m <= m_c {
                return cfg(format!("m = {m} is at or below the critical exponent m_c = {m_c} for n = {n}"));
            }
        }
        if let (InitialData::Barenblatt { t0, .. }, Some(s)) = (&self.initial_data, self.solver.t0) {
            if s != *t0 {
                return cfg(format!("solver.t0 = {s} disagrees with barenblatt t0 = {t0}"));
            }
        }
        let t0 = self.t0();
        if !(t0 > 0.0) {
            return cfg(format!("initial time must be positive, got {t0}"));
        }
        if !(self.solver.t_end >= t0) {
            return cfg(format!("t_end = {} precedes t0 = {t0}", self.solver.t_end));
        }
        self.solver_config().validate()?;
        self.initial_data_check(&manifold)?;
        self.boundary(&manifold)?;

        let m_c = exact::critical_exponent(n);
        let pme = m > 1.0;
        let fde = m > m_c && m < 1.0;
        for &check in &self.checks {
            match check {
                CheckKind::PmeLocal if !pme => {
                    return cfg(format!("pme_local needs m > 1, got m = {m}"));
                }
                CheckKind::FdeLocal if !fde => {
                    return cfg(format!("fde_local needs m in (m_c, 1) = ({m_c}, 1), got m = {m}"));
                }
                CheckKind::Entropy if !manifold.is_closed() => {
                    return cfg("entropy needs a closed manifold (flat circle or whole sphere)".into());
                }
                CheckKind::Ab => {
                    let barenblatt_ball = matches!(self.initial_data, InitialData::Barenblatt { .. })
                        && manifold.kind() == ManifoldKind::EuclideanBall;
                    if !manifold.is_closed() && !barenblatt_ball {
                        return cfg("ab needs a closed manifold or Barenblatt data on a Euclidean ball".into());
                    }
                }
                CheckKind::LogSobolev if !pme => {
                    return cfg(format!("log_sobolev needs m > 1, got m = {m}"));
                }
                CheckKind::PowerBound => {
                    if self.beta.is_empty() {
                        return cfg("power_bound needs a non-empty beta list".into());
                    }
                    for &b in &self.beta {
                        if pme && !(b > 1.0 && b < m / (m - 1.0)) {
                            return cfg(format!("beta = {b} outside (1, m/(m-1)) = (1, {})", m / (m - 1.0)));
                        }
                        if !pme && !(b > 1.0) {
                            return cfg(format!("beta = {b} must exceed 1"));
                        }
                    }
                }
                _ => {}
            }
        }
        let local = [CheckKind::PmeLocal, CheckKind::FdeLocal, CheckKind::HarnackRatio, CheckKind::HarnackIntegrated];
        if local.iter().any(|c| self.has(*c)) {
            for &a in &self.alphas() {
                if pme && !(a > 1.0) {
                    return cfg(format!("alpha = {a} must exceed 1 for m > 1"));
                }
                if !pme && !(a > 0.0 && a < 1.0) {
                    return cfg(format!("alpha = {a} must lie in (0, 1) for m < 1"));
                }
            }
        }
        if self.checks.iter().any(|c| c.time_differenced()) {
            let spacing = self.solver.checkpoint_every as f64 * self.solver.dt;
            if spacing * spacing > self.solver.dt {
                return cfg(format!(
                    "checkpoint spacing {spacing} is too coarse for time-differenced checks: need (checkpoint_every*dt)^2 <= dt"
                ));
            }
            let steps = ((self.solver.t_end - t0) / self.solver.dt - 1e-9).ceil() as usize;
            if steps < 2 * self.solver.checkpoint_every {
                return cfg("time-differenced checks need at least three checkpoints".into());
            }
        }
        if let Some(c) = self.tol_c {
            if !(c > 0.0) {
                return cfg(format!("tol_c must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// Alphas for the local checks, with one regime default when none are given.
    pub fn alphas(&self) -> Vec<f64> {
        if !self.alpha.is_empty() {
            self.alpha.clone()
        } else if self.m > 1.0 {
            vec![2.0]
        } else {
            vec![0.5]
        }
    }

    /// The identity is checked for `α = 1` (the `F₁` form), 1/2, 2 and every listed α.
    pub fn bochner_alphas(&self) -> Vec<f64> {
        let mut out = vec![1.0, 0.5, 2.0];
        for &a in &self.alpha {
            if !out.contains(&a) {
                out.push(a);
            }
        }
        out
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.solver.dt, self.solver.t_end, self.m)
            .with_checkpoint_every(self.solver.checkpoint_every);
        cfg.u_floor = self.solver.u_floor;
        if let Some(t) = self.solver.newton_tol {
            cfg.newton_tol = t;
        }
        if let Some(k) = self.solver.newton_max_iters {
            cfg.newton_max_iters = k;
        }
        cfg
    }

    fn initial_data_check(&self, manifold: &ModelManifold) -> Result<()> {
        match self.initial_data {
            InitialData::Barenblatt { c, .. } => {
                if manifold.kind() != ManifoldKind::EuclideanBall {
                    return Err(Error::Config("Barenblatt data is only offered on a Euclidean ball".into()));
                }
                BarenblattParams::new(c, self.m, manifold.dim())?;
            }
            InitialData::Bump { center, width, height, floor } => {
                if !(width > 0.0 && floor > 0.0 && height >= 0.0) {
                    return Err(Error::Config("bump needs width > 0, floor > 0 and height >= 0".into()));
                }
                if manifold.kind() != ManifoldKind::FlatCircle && center != 0.0 {
                    return Err(Error::Config("radial data: bump center must be 0 off the flat circle".into()));
                }
            }
            InitialData::Constant { c } => {
                if !(c > 0.0) {
                    return Err(Error::Config(format!("constant data must be positive, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// Solver boundary condition and matching grid boundary kind.
    pub fn boundary(&self, manifold: &ModelManifold) -> Result<(BoundaryCondition, BoundaryKind)> {
        if let Some(kind) = manifold.natural_boundary() {
            return match self.solver.boundary {
                None | Some(BoundarySpec::Closed) => Ok((BoundaryCondition::Closed, kind)),
                Some(b) => Err(Error::Config(format!("{:?} is closed; boundary {b:?} does not apply", manifold.kind()))),
            };
        }
        let default = match self.initial_data {
            InitialData::Barenblatt { .. } => BoundarySpec::Dirichlet,
            _ => BoundarySpec::NeumannZero,
        };
        match self.solver.boundary.unwrap_or(default) {
            BoundarySpec::Closed => Err(Error::Config(format!("{:?} with this radius is not closed", manifold.kind()))),
            BoundarySpec::NeumannZero => Ok((BoundaryCondition::NeumannZero, BoundaryKind::NeumannPole)),
            BoundarySpec::Dirichlet => {
                let r_out = manifold.r_domain();
                let bc = match self.initial_data {
                    InitialData::Barenblatt { c, .. } => {
                        let p = BarenblattParams::new(c, self.m, manifold.dim())?;
                        BoundaryCondition::Dirichlet(Arc::new(move |t| {
                            exact::barenblatt_density(r_out, t, &p).unwrap_or(0.0)
                        }))
                    }
                    _ => {
                        let g = self.initial_value(manifold, r_out)?;
                        BoundaryCondition::Dirichlet(Arc::new(move |_| g))
                    }
                };
                Ok((bc, BoundaryKind::Dirichlet))
            }
        }
    }

    fn initial_value(&self, manifold: &ModelManifold, r: f64) -> Result<f64> {
        Ok(match self.initial_data {
            InitialData::Barenblatt { c, t0 } => {
                exact::barenblatt_density(r, t0, &BarenblattParams::new(c, self.m, manifold.dim())?)?
            }
            InitialData::Bump { center, width, height, floor } => {
                let shape = match manifold.kind() {
                    ManifoldKind::FlatCircle => {
                        let l = manifold.r_domain();
                        let w = 2.0 * std::f64::consts::PI / l;
                        (((w * (r - center)).cos() - 1.0) / (w * w * width * width)).exp()
                    }
                    // Even about r = R_domain, so a zero-flux wall (or the
                    // antipodal pole) sees compatible data; Gaussian of the
                    // given width near the pole.
                    _ => {
                        let w = std::f64::consts::PI / manifold.r_domain();
                        (((w * r).cos() - 1.0) / (w * w * width * width)).exp()
                    }
                };
                floor + height * shape
            }
            InitialData::Constant { c } => c,
        })
    }

    /// Grid, initial density and boundary condition.
    pub fn setup(&self) -> Result<(ModelManifold, Field, BoundaryCondition)> {
        let manifold = self.manifold.build()?;
        let (bc, kind) = self.boundary(&manifold)?;
        let grid = RadialGrid::new(manifold, self.solver.intervals, kind)?;
        let values = grid
            .nodes()
            .iter()
            .map(|&r| self.initial_value(&manifold, r))
            .collect::<Result<Vec<_>>>()?;
        Ok((manifold, Field::new(grid, values)?, bc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "constant",
        "manifold": {"kind": "flat_circle", "R_domain": 6.0},
        "initial_data": {"constant": {"c": 1.0}},
        "m": 2.0,
        "solver": {"dt": 0.01, "t_end": 1.2, "intervals": 32, "checkpoint_every": 2},
        "checks": ["ab", "entropy"]
    }"#;

    #[test]
    fn minimal_scenario_parses() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.manifold.n, 1);
        assert_eq!(s.t0(), 1.0);
        assert_eq!(s.alphas(), vec![2.0]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"m\": 2.0", "\"m\": 2.0, \"mystery\": 1");
        assert!(matches!(parse_scenario(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn regime_gates() {
        let fde_with_pme = MINIMAL.replace("[\"ab\", \"entropy\"]", "[\"fde_local\"]");
        let err = parse_scenario(&fde_with_pme).unwrap_err();
        assert!(matches!(&err, Error::Config(msg) if msg.contains("m_c")), "{err}");

        let entropy_on_ball = r#"{
            "name": "ball",
            "manifold": {"kind": "euclidean_ball", "n": 2, "R_domain": 1.0},
            "initial_data": {"constant": {"c": 1.0}},
            "m": 2.0,
            "solver": {"dt": 0.01, "t_end": 1.2, "intervals": 32},
            "checks": ["entropy"]
        }"#;
        assert!(matches!(parse_scenario(entropy_on_ball), Err(Error::Config(_))));

        let coarse = MINIMAL.replace("\"checkpoint_every\": 2", "\"checkpoint_every\": 20");
        assert!(matches!(parse_scenario(&coarse), Err(Error::Config(_))));
    }
}
