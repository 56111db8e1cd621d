//! Model Riemannian geometries reduced to one radial coordinate.
//!
//! Every manifold is a warped product `dr² + φ(r)² g_{S^{n-1}}` about a pole
//! `O` at `r = 0` (or, for the flat circle, a periodic interval). Fields are
//! radial functions sampled on a uniform [`RadialGrid`]; the differential
//! operators below are the exact warped-product expressions discretised with
//! second-order central differences.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when deciding whether a sphere is the whole sphere.
const FULL_SPHERE_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    EuclideanBall,
    Sphere,
    HyperbolicBall,
    FlatCircle,
}

/// A warped-product model geometry.
///
/// `k` is the curvature parameter (inverse length) and `r_domain` the outer
/// radius of the ball (or the circumference of the flat circle).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelManifold {
    kind: ManifoldKind,
    n: usize,
    k: f64,
    r_domain: f64,
}

/// Warping function and its first two derivatives at one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Warping {
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
}

impl ModelManifold {
    pub fn new(kind: ManifoldKind, n: usize, k: f64, r_domain: f64) -> Result<Self> {
        if !(1..=4).contains(&n) {
            return Err(Error::Range(format!("dimension n = {n} outside 1..=4")));
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::Range(format!("curvature parameter K = {k} must be finite and >= 0")));
        }
        if !(r_domain.is_finite() && r_domain > 0.0) {
            return Err(Error::Range(format!("R_domain = {r_domain} must be positive")));
        }
        match kind {
            ManifoldKind::Sphere | ManifoldKind::HyperbolicBall if k == 0.0 => {
                return Err(Error::Range(format!("{kind:?} needs K > 0")));
            }
            ManifoldKind::Sphere if r_domain > PI / k * (1.0 + FULL_SPHERE_RTOL) => {
                return Err(Error::Range(format!(
                    "sphere radius {r_domain} exceeds pi/K = {}",
                    PI / k
                )));
            }
            ManifoldKind::FlatCircle if n != 1 => {
                return Err(Error::Range("flat_circle is one-dimensional (n = 1)".into()));
            }
            _ => {}
        }
        let r_domain = match kind {
            ManifoldKind::Sphere if r_domain > PI / k => PI / k,
            _ => r_domain,
        };
        Ok(Self {
            kind,
            n,
            k,
            r_domain,
        })
    }

    pub fn euclidean(n: usize, radius: f64) -> Result<Self> {
        Self::new(ManifoldKind::EuclideanBall, n, 0.0, radius)
    }

    pub fn hyperbolic(n: usize, k: f64, radius: f64) -> Result<Self> {
        Self::new(ManifoldKind::HyperbolicBall, n, k, radius)
    }

    /// The whole round sphere of curvature `k²`.
    pub fn full_sphere(n: usize, k: f64) -> Result<Self> {
        Self::new(ManifoldKind::Sphere, n, k, PI / k)
    }

    pub fn sphere_cap(n: usize, k: f64, radius: f64) -> Result<Self> {
        Self::new(ManifoldKind::Sphere, n, k, radius)
    }

    pub fn flat_circle(length: f64) -> Result<Self> {
        Self::new(ManifoldKind::FlatCircle, 1, 0.0, length)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn curvature(&self) -> f64 {
        self.k
    }

    pub fn r_domain(&self) -> f64 {
        self.r_domain
    }

    pub fn is_full_sphere(&self) -> bool {
        self.kind == ManifoldKind::Sphere
            && (self.r_domain - PI / self.k).abs() <= FULL_SPHERE_RTOL * self.r_domain
    }

    /// Closed (compact, boundaryless) manifolds: the flat circle and the whole sphere.
    pub fn is_closed(&self) -> bool {
        self.kind == ManifoldKind::FlatCircle || self.is_full_sphere()
    }

    /// `Ric(∂r, ∂r)`, constant in `r` for every model.
    pub fn ricci_lower(&self) -> f64 {
        let n1 = (self.n - 1) as f64;
        match self.kind {
            ManifoldKind::EuclideanBall | ManifoldKind::FlatCircle => 0.0,
            ManifoldKind::Sphere => n1 * self.k * self.k,
            ManifoldKind::HyperbolicBall => -n1 * self.k * self.k,
        }
    }

    /// Smallest `K ≥ 0` with `Ric ≥ -(n-1)K²`; zero whenever `Ric ≥ 0`.
    pub fn ricci_bound_parameter(&self) -> f64 {
        match self.kind {
            ManifoldKind::HyperbolicBall => self.k,
            _ => 0.0,
        }
    }

    pub fn has_nonnegative_ricci(&self) -> bool {
        self.ricci_lower() >= 0.0
    }

    /// Area of the unit `(n-1)`-sphere, `2 π^{n/2} / Γ(n/2)`; the flat circle uses 1.
    pub fn sphere_area(&self) -> f64 {
        match self.kind {
            ManifoldKind::FlatCircle => 1.0,
            _ => unit_sphere_area(self.n),
        }
    }

    /// The boundary treatment a closed manifold must use, if any.
    pub fn natural_boundary(&self) -> Option<BoundaryKind> {
        match self.kind {
            ManifoldKind::FlatCircle => Some(BoundaryKind::Periodic),
            ManifoldKind::Sphere if self.is_full_sphere() => Some(BoundaryKind::NeumannPole),
            _ => None,
        }
    }

    fn warping_unchecked(&self, r: f64) -> Warping {
        let k = self.k;
        match self.kind {
            ManifoldKind::EuclideanBall => Warping {
                phi: r,
                dphi: 1.0,
                ddphi: 0.0,
            },
            ManifoldKind::Sphere => Warping {
                phi: (k * r).sin() / k,
                dphi: (k * r).cos(),
                ddphi: -k * (k * r).sin(),
            },
            ManifoldKind::HyperbolicBall => Warping {
                phi: (k * r).sinh() / k,
                dphi: (k * r).cosh(),
                ddphi: k * (k * r).sinh(),
            },
            ManifoldKind::FlatCircle => Warping {
                phi: 1.0,
                dphi: 0.0,
                ddphi: 0.0,
            },
        }
    }

    /// `φ'/φ` away from the poles.
    fn log_warping_derivative(&self, r: f64) -> f64 {
        let k = self.k;
        match self.kind {
            ManifoldKind::EuclideanBall => 1.0 / r,
            ManifoldKind::Sphere => k / (k * r).tan(),
            ManifoldKind::HyperbolicBall => k / (k * r).tanh(),
            ManifoldKind::FlatCircle => 0.0,
        }
    }

    /// Volume density `φ(r)^{n-1}` without the `ω_{n-1}` factor.
    fn density(&self, r: f64) -> f64 {
        self.warping_unchecked(r).phi.powi(self.n as i32 - 1)
    }
}

/// `2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Warping function `(φ, φ', φ'')` at radius `r`.
pub fn warping(manifold: &ModelManifold, r: f64) -> Result<Warping> {
    if !(0.0..=manifold.r_domain).contains(&r) {
        return Err(Error::Domain(format!(
            "r = {r} outside [0, {}]",
            manifold.r_domain
        )));
    }
    Ok(manifold.warping_unchecked(r))
}

/// Distance between two points on a common ray through the pole.
pub fn geodesic_distance(manifold: &ModelManifold, r1: f64, r2: f64) -> f64 {
    let d = (r1 - r2).abs();
    match manifold.kind {
        ManifoldKind::FlatCircle => d.min(manifold.r_domain - d),
        _ => d,
    }
}

/// How the outer end of a radial grid is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Outer node carries prescribed data.
    Dirichlet,
    /// Outer node is a reflection point: a zero-flux wall, or the antipodal
    /// pole of a whole sphere.
    NeumannPole,
    /// Flat circle; the last node duplicates the first.
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum NodeRole {
    Interior,
    Pole,
    Wall,
    DirichletEdge,
}

fn pole_mix(n: usize) -> f64 {
    let n = n as f64;
    2.0 * (n / (8.0 * (n + 2.0)) - (2.0 * n - 1.0) / 24.0)
}

fn pole_pairs(roles: &[NodeRole]) -> Vec<(usize, usize)> {
    let last = roles.len() - 1;
    let mut out = Vec::new();
    if roles[0] == NodeRole::Pole {
        out.push((0, 1));
    }
    if roles[last] == NodeRole::Pole {
        out.push((last, last - 1));
    }
    out
}

/// Uniform node set `r_0 < … < r_N` on `[0, R_domain]`.
#[derive(Debug)]
pub struct RadialGrid {
    manifold: ModelManifold,
    nodes: Vec<f64>,
    h: f64,
    boundary: BoundaryKind,
    roles: Vec<NodeRole>,
    log_dphi: Vec<f64>,
    volumes: Vec<f64>,
    weights: Vec<f64>,
    faces: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.manifold == other.manifold
            && self.boundary == other.boundary
            && self.nodes.len() == other.nodes.len()
    }
}

impl RadialGrid {
    /// Builds a grid of `intervals` cells (`intervals + 1` nodes).
    pub fn new(
        manifold: ModelManifold,
        intervals: usize,
        boundary: BoundaryKind,
    ) -> Result<Arc<Self>> {
        if intervals < 8 {
            return Err(Error::Range(format!("grid needs at least 8 intervals, got {intervals}")));
        }
        let periodic = manifold.kind == ManifoldKind::FlatCircle;
        if periodic != (boundary == BoundaryKind::Periodic) {
            return Err(Error::Config(
                "periodic boundaries go with flat_circle and only with it".into(),
            ));
        }
        if manifold.is_full_sphere() && boundary != BoundaryKind::NeumannPole {
            return Err(Error::Config(
                "the whole sphere has an antipodal pole, use neumann_pole".into(),
            ));
        }
        let big_n = intervals;
        let r_max = manifold.r_domain;
        let h = r_max / big_n as f64;
        let nodes: Vec<f64> = (0..=big_n).map(|i| r_max * i as f64 / big_n as f64).collect();

        let roles: Vec<NodeRole> = (0..=big_n)
            .map(|i| {
                if periodic {
                    NodeRole::Interior
                } else if i == 0 {
                    NodeRole::Pole
                } else if i == big_n {
                    match boundary {
                        BoundaryKind::Dirichlet => NodeRole::DirichletEdge,
                        _ if manifold.is_full_sphere() => NodeRole::Pole,
                        _ => NodeRole::Wall,
                    }
                } else {
                    NodeRole::Interior
                }
            })
            .collect();

        let log_dphi = nodes
            .iter()
            .zip(&roles)
            .map(|(&r, role)| match role {
                NodeRole::Pole => 0.0,
                _ => manifold.log_warping_derivative(r),
            })
            .collect();

        let faces = (0..big_n)
            .map(|i| manifold.density(nodes[i] + 0.5 * h))
            .collect();

        let volumes = (0..=big_n)
            .map(|i| {
                let lo = (nodes[i] - 0.5 * h).max(0.0);
                let hi = (nodes[i] + 0.5 * h).min(r_max);
                if periodic {
                    hi - lo
                } else {
                    gauss_legendre(|r| manifold.density(r), lo, hi)
                }
            })
            .collect::<Vec<f64>>();

        let mix = pole_mix(manifold.n);
        let mut weights = volumes.clone();
        for (p, q) in pole_pairs(&roles) {
            weights[p] -= mix * volumes[p];
            weights[q] += mix * volumes[p];
        }

        Ok(Arc::new(Self {
            manifold,
            nodes,
            h,
            boundary,
            roles,
            log_dphi,
            volumes,
            weights,
            faces,
        }))
    }

    pub fn manifold(&self) -> &ModelManifold {
        &self.manifold
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.boundary
    }

    /// Cell volumes `∫_cell φ^{n-1} dr` (without `ω_{n-1}`), node-centred.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Quadrature weights: the cell volumes with each pole cell's mass
    /// shared with its neighbour as in [`Self::pole_mass`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(pole, neighbour)` for every pole node of the grid.
    pub fn poles(&self) -> Vec<(usize, usize)> {
        pole_pairs(&self.roles)
    }

    /// The mass attributed to pole cell `p` is `vol_p ((1-γ) u_p + γ u_q)`.
    ///
    /// A pole cell's average exceeds the node value by `n u'' h² / (8(n+2))`,
    /// while interior cells exceed theirs by a smooth offset whose limit at the
    /// pole is `(2n-1) u'' h² / 24`. Using `u_p` alone leaves a point defect
    /// that fourth differences amplify to O(1); the mixed form matches the
    /// interior offset. `γ = 0` in one dimension.
    pub fn pole_mass(&self) -> f64 {
        pole_mix(self.manifold.n)
    }

    /// `φ(r_{i+1/2})^{n-1}` for the `N` faces between consecutive nodes.
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Geodesic distance of node `i` from the pole `O`.
    pub fn distance_from_pole(&self, i: usize) -> f64 {
        geodesic_distance(&self.manifold, 0.0, self.nodes[i])
    }

    /// Nodes whose every stencil stays at least `margin` cells away from a
    /// Dirichlet edge or a wall. Poles are regular points and are kept.
    pub fn interior_nodes(&self, margin: usize) -> Vec<usize> {
        let big_n = self.intervals();
        (0..=big_n)
            .filter(|&i| match self.boundary {
                BoundaryKind::Periodic => i < big_n,
                BoundaryKind::NeumannPole if self.manifold.is_full_sphere() => true,
                _ => i + margin <= big_n,
            })
            .collect()
    }
}

/// Five-point Gauss–Legendre rule on `[a, b]`.
fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    half * X.iter().zip(W).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

/// A scalar field sampled on a [`RadialGrid`].
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes.len() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.nodes.len()
            )));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value {} at node {i} (r = {})",
                values[i], grid.nodes[i]
            )));
        }
        Ok(Self::from_raw(grid, values))
    }

    /// Skips validation; the periodic duplicate is still synchronised.
    pub(crate) fn from_raw(grid: Arc<RadialGrid>, mut values: Vec<f64>) -> Self {
        if grid.boundary == BoundaryKind::Periodic {
            let last = values.len() - 1;
            values[last] = values[0];
        }
        Self { grid, values }
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        Self::new(Arc::clone(grid), values)
    }

    pub fn constant(grid: &Arc<RadialGrid>, c: f64) -> Result<Self> {
        Self::from_fn(grid, |_| c)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(Arc::clone(&self.grid), self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(Arc::clone(&self.grid), values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::Shape("fields live on different grids".into()))
        }
    }

    fn check_manifold(&self, manifold: &ModelManifold) -> Result<()> {
        if self.grid.manifold == *manifold {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "field grid belongs to {:?}, operator called with {:?}",
                self.grid.manifold, manifold
            )))
        }
    }
}

/// First and second radial derivatives of a field, node by node.
#[derive(Clone, Debug)]
pub struct RadialDerivatives {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// `(φ'/φ) v'`, the tangential Hessian eigenvalue. At a pole this is the
    /// limit of the interior difference quotient rather than `v''`: the two
    /// agree in the continuum but carry different `h²` errors, and a jump in
    /// the error between the pole and its neighbours turns into an O(1) error
    /// once the Laplacian is differentiated twice more.
    pub tangential: Vec<f64>,
}

/// Central-difference `v'` and `v''` with the boundary rules of the grid.
pub fn radial_derivatives(v: &Field, manifold: &ModelManifold) -> Result<RadialDerivatives> {
    v.check_manifold(manifold)?;
    let grid = &v.grid;
    let x = &v.values;
    let big_n = grid.intervals();
    let h = grid.h;
    let h2 = h * h;
    let mut d1 = vec![0.0; big_n + 1];
    let mut d2 = vec![0.0; big_n + 1];

    if grid.boundary == BoundaryKind::Periodic {
        for i in 0..big_n {
            let left = x[(i + big_n - 1) % big_n];
            let right = x[(i + 1) % big_n];
            d1[i] = (right - left) / (2.0 * h);
            d2[i] = (right - 2.0 * x[i] + left) / h2;
        }
        d1[big_n] = d1[0];
        d2[big_n] = d2[0];
        let tangential = vec![0.0; big_n + 1];
        return Ok(RadialDerivatives { d1, d2, tangential });
    }

    for i in 0..=big_n {
        match grid.roles[i] {
            NodeRole::Interior => {
                d1[i] = (x[i + 1] - x[i - 1]) / (2.0 * h);
                d2[i] = (x[i + 1] - 2.0 * x[i] + x[i - 1]) / h2;
            }
            NodeRole::Pole | NodeRole::Wall => {
                let inner = if i == 0 { x[1] } else { x[i - 1] };
                d1[i] = 0.0;
                d2[i] = 2.0 * (inner - x[i]) / h2;
            }
            NodeRole::DirichletEdge => {
                d1[i] = (3.0 * x[i] - 4.0 * x[i - 1] + x[i - 2]) / (2.0 * h);
                d2[i] = (2.0 * x[i] - 5.0 * x[i - 1] + 4.0 * x[i - 2] - x[i - 3]) / h2;
            }
        }
    }
    let tangential = (0..=big_n)
        .map(|i| match grid.roles[i] {
            NodeRole::Pole => {
                // Smooth continuation of (v_{i+1} - v_{i-1}) / (2 r_i h) to r = 0.
                let (a, b) = if i == 0 { (x[1], x[2]) } else { (x[i - 1], x[i - 2]) };
                (4.0 / 3.0 * (a - x[i]) + (b - x[i]) / 6.0) / h2
            }
            _ => grid.log_dphi[i] * d1[i],
        })
        .collect();
    Ok(RadialDerivatives { d1, d2, tangential })
}

fn field_from_derivatives(
    v: &Field,
    manifold: &ModelManifold,
    f: impl Fn(usize, f64, f64) -> f64,
) -> Result<Field> {
    field_from_all(v, manifold, |i, der| f(i, der.d1[i], der.d2[i]))
}

fn field_from_all(
    v: &Field,
    manifold: &ModelManifold,
    f: impl Fn(usize, &RadialDerivatives) -> f64,
) -> Result<Field> {
    let der = radial_derivatives(v, manifold)?;
    let values = (0..v.len()).map(|i| f(i, &der)).collect();
    Field::new(Arc::clone(&v.grid), values)
}

/// `v'` (zero at poles and walls).
pub fn gradient(v: &Field, manifold: &ModelManifold) -> Result<Field> {
    field_from_derivatives(v, manifold, |_, d1, _| d1)
}

/// `Δv = v'' + (n-1)(φ'/φ) v'`.
pub fn radial_laplacian(v: &Field, manifold: &ModelManifold) -> Result<Field> {
    let n = manifold.n as f64;
    field_from_all(v, manifold, |i, der| der.d2[i] + (n - 1.0) * der.tangential[i])
}

/// `|∇v|² = (v')²`.
pub fn gradient_sq(v: &Field, manifold: &ModelManifold) -> Result<Field> {
    field_from_derivatives(v, manifold, |_, d1, _| d1 * d1)
}

/// `|∇²v|² = (v'')² + (n-1)(φ' v'/φ)²`.
pub fn hessian_norm_sq(v: &Field, manifold: &ModelManifold) -> Result<Field> {
    hessian_plus_identity_norm_sq(v, manifold, 0.0)
}

/// `|∇²v + c g|² = (v'' + c)² + (n-1)(φ' v'/φ + c)²`.
pub fn hessian_plus_identity_norm_sq(v: &Field, manifold: &ModelManifold, c: f64) -> Result<Field> {
    let n = manifold.n as f64;
    field_from_all(v, manifold, |i, der| {
        (der.d2[i] + c).powi(2) + (n - 1.0) * (der.tangential[i] + c).powi(2)
    })
}

/// `Ric(∇v, ∇v) = Ric_rr (v')²`.
pub fn ricci_quadratic(v: &Field, manifold: &ModelManifold) -> Result<Field> {
    let ric = manifold.ricci_lower();
    field_from_derivatives(v, manifold, |_, d1, _| ric * d1 * d1)
}

/// `∫_M f dμ = ω_{n-1} ∫ f φ^{n-1} dr` with the grid's quadrature weights.
pub fn integrate(f: &Field, manifold: &ModelManifold) -> Result<f64> {
    f.check_manifold(manifold)?;
    let grid = &f.grid;
    let sum: f64 = match grid.boundary {
        BoundaryKind::Periodic => {
            // The duplicate end node carries the other half cell.
            let last = f.values.len() - 1;
            f.values[..last]
                .iter()
                .map(|x| x * grid.h)
                .sum()
        }
        _ => f.values.iter().zip(&grid.weights).map(|(x, w)| x * w).sum(),
    };
    Ok(manifold.sphere_area() * sum)
}
