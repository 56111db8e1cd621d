//! Closed-form objects: structural constants, the pressure transform and
//! Barenblatt solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{self, Field, ManifoldKind, RadialGrid};

/// Structural constants of `∂_t u = Δ u^m` in dimension `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub m: f64,
    pub n: usize,
    /// `n / (n(m-1) + 2)`
    pub kappa: f64,
    /// `(m-1) κ = b / (b+2)`
    pub a: f64,
    /// `n (m-1)`
    pub b: f64,
    /// `1 - 2/n`
    pub m_c: f64,
    /// `1 - 1/n`
    pub m_c_prime: f64,
}

pub fn critical_exponent(n: usize) -> f64 {
    1.0 - 2.0 / n as f64
}

pub fn constants(m: f64, n: usize) -> Result<Constants> {
    if n == 0 {
        return Err(Error::Range("dimension must be at least 1".into()));
    }
    let nf = n as f64;
    let m_c = critical_exponent(n);
    if !(m.is_finite() && m > m_c) {
        return Err(Error::Range(format!(
            "m = {m} must exceed the critical exponent m_c = 1 - 2/n = {m_c}"
        )));
    }
    let b = nf * (m - 1.0);
    let kappa = nf / (b + 2.0);
    Ok(Constants {
        m,
        n,
        kappa,
        a: (m - 1.0) * kappa,
        b,
        m_c,
        m_c_prime: 1.0 - 1.0 / nf,
    })
}

/// `v = m u^{m-1} / (m-1)`, or `log u` when `m = 1`.
pub fn pressure_value(u: f64, m: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("pressure needs u > 0, got {u}")));
    }
    Ok(if m == 1.0 {
        u.ln()
    } else {
        m / (m - 1.0) * u.powf(m - 1.0)
    })
}

/// Inverse of [`pressure_value`].
pub fn density_value(v: f64, m: f64) -> Result<f64> {
    if m == 1.0 {
        return Ok(v.exp());
    }
    let base = (m - 1.0) * v / m;
    if !(base > 0.0) {
        return Err(Error::Domain(format!(
            "pressure {v} has the wrong sign for m = {m}"
        )));
    }
    Ok(base.powf(1.0 / (m - 1.0)))
}

pub fn pressure(u: &Field, m: f64) -> Result<Field> {
    let values = u
        .values()
        .iter()
        .map(|&x| pressure_value(x, m))
        .collect::<Result<Vec<_>>>()?;
    Field::new(Arc::clone(u.grid()), values)
}

pub fn density_from_pressure(v: &Field, m: f64) -> Result<Field> {
    let values = v
        .values()
        .iter()
        .map(|&x| density_value(x, m))
        .collect::<Result<Vec<_>>>()?;
    Field::new(Arc::clone(v.grid()), values)
}

/// Parameters of the Barenblatt family `V_C`.
///
/// For `m > 1` the pressure is `(C t^{2κ/n} - κ r²)₊ / (2 n t)`. For
/// `m ∈ (m_c, 1)` the same profile is used with the sign of `C` flipped,
/// `-(C t^{2κ/n} + κ r²) / (2 n t)`, which is negative everywhere as the
/// fast-diffusion pressure must be.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarenblattParams {
    pub c: f64,
    pub m: f64,
    pub n: usize,
    /// Denominator constant; `n` is the only value solving the pressure equation.
    pub d: f64,
}

impl BarenblattParams {
    pub fn new(c: f64, m: f64, n: usize) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Range(format!("Barenblatt constant C = {c} must be positive")));
        }
        if m == 1.0 {
            return Err(Error::Range(
                "m = 1 has no Barenblatt pressure; use the Gaussian kernel".into(),
            ));
        }
        constants(m, n)?;
        Ok(Self {
            c,
            m,
            n,
            d: n as f64,
        })
    }

    /// Same profile with a different denominator constant (falsification only).
    pub fn with_denominator(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn constants(&self) -> Constants {
        constants(self.m, self.n).expect("validated at construction")
    }

    fn time_power(&self) -> f64 {
        2.0 * self.constants().kappa / self.n as f64
    }

    /// Radius of the positivity set; infinite for fast diffusion.
    pub fn support_radius(&self, t: f64) -> f64 {
        if self.m < 1.0 {
            return f64::INFINITY;
        }
        (self.c * t.powf(self.time_power()) / self.constants().kappa).sqrt()
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be positive, got {t}")))
    }
}

pub fn barenblatt_pressure(r: f64, t: f64, p: &BarenblattParams) -> Result<f64> {
    check_time(t)?;
    let kappa = p.constants().kappa;
    let ct = p.c * t.powf(p.time_power());
    Ok(if p.m > 1.0 {
        (ct - kappa * r * r).max(0.0) / (2.0 * p.d * t)
    } else {
        -(ct + kappa * r * r) / (2.0 * p.d * t)
    })
}

/// `∂_t V_C` from the closed form (zero outside the support).
pub fn barenblatt_pressure_dt(r: f64, t: f64, p: &BarenblattParams) -> Result<f64> {
    check_time(t)?;
    let kappa = p.constants().kappa;
    let q = p.time_power();
    let sign = if p.m > 1.0 { 1.0 } else { -1.0 };
    if p.m > 1.0 && p.c * t.powf(q) <= kappa * r * r {
        return Ok(0.0);
    }
    // V = (s C t^q - κ r²) / (2 d t)
    Ok((sign * p.c * (q - 1.0) * t.powf(q - 2.0) + kappa * r * r / (t * t)) / (2.0 * p.d))
}

pub fn barenblatt_density(r: f64, t: f64, p: &BarenblattParams) -> Result<f64> {
    let v = barenblatt_pressure(r, t, p)?;
    if v == 0.0 {
        return Ok(0.0);
    }
    density_value(v, p.m)
}

/// `log` of the heat kernel `(4πt)^{-n/2} exp(-r²/4t)`, the `m = 1` limit.
pub fn heat_kernel_log(r: f64, t: f64, n: usize) -> Result<f64> {
    check_time(t)?;
    Ok(-(n as f64) / 2.0 * (4.0 * PI * t).ln() - r * r / (4.0 * t))
}

/// Nodes at least `margin` cells inside the positivity set of `V_C(·, t)`
/// and away from the outer edge of the grid.
fn interior_support_nodes(grid: &RadialGrid, p: &BarenblattParams, t: f64, margin: usize) -> Vec<usize> {
    let r_supp = p.support_radius(t);
    let h = grid.h();
    let big_n = grid.intervals();
    (0..=big_n)
        .filter(|&i| i + margin <= big_n)
        .filter(|&i| grid.nodes()[i] + margin as f64 * h < r_supp)
        .collect()
}

/// Outcome of checking equality in `ΔV ≥ -κ/t` on a sampled Barenblatt pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct SharpnessRow {
    pub t: f64,
    /// `max |ΔV + κ/t|` over interior support nodes.
    pub max_defect: f64,
    pub worst_r: f64,
    /// `min (v_t - |∇v|² + (m-1)κ v/t)`, zero for an exact Barenblatt profile.
    pub min_abvt_margin: f64,
    pub nodes_checked: usize,
}

pub fn verify_barenblatt_sharpness(
    p: &BarenblattParams,
    grid: &Arc<RadialGrid>,
    times: &[f64],
) -> Result<Vec<SharpnessRow>> {
    let manifold = *grid.manifold();
    if manifold.kind() != ManifoldKind::EuclideanBall || manifold.dim() != p.n {
        return Err(Error::Config(
            "Barenblatt profiles are exact only on a Euclidean ball of the same dimension".into(),
        ));
    }
    let k = p.constants();
    times
        .iter()
        .map(|&t| {
            let v = Field::from_fn(grid, |r| barenblatt_pressure(r, t, p).unwrap_or(0.0))?;
            let lap = geometry::radial_laplacian(&v, &manifold)?;
            let grad = geometry::gradient_sq(&v, &manifold)?;
            let mut row = SharpnessRow {
                t,
                max_defect: 0.0,
                worst_r: f64::NAN,
                min_abvt_margin: f64::INFINITY,
                nodes_checked: 0,
            };
            for i in interior_support_nodes(grid, p, t, 2) {
                let r = grid.nodes()[i];
                let defect = (lap.values()[i] + k.kappa / t).abs();
                if defect > row.max_defect || row.worst_r.is_nan() {
                    row.max_defect = defect;
                    row.worst_r = r;
                }
                let vt = barenblatt_pressure_dt(r, t, p)?;
                let margin =
                    vt - grad.values()[i] + (p.m - 1.0) * k.kappa * v.values()[i] / t;
                row.min_abvt_margin = row.min_abvt_margin.min(margin);
                row.nodes_checked += 1;
            }
            Ok(row)
        })
        .collect()
}

/// `max |∂_t V - (m-1) V ΔV - |∇V|²|` over interior support nodes, with the
/// time derivative taken by centred differences of step `dt_probe`.
pub fn pressure_equation_residual(
    p: &BarenblattParams,
    grid: &Arc<RadialGrid>,
    t: f64,
    dt_probe: f64,
) -> Result<f64> {
    let manifold = *grid.manifold();
    let sample = |tt: f64| Field::from_fn(grid, |r| barenblatt_pressure(r, tt, p).unwrap_or(0.0));
    let v = sample(t)?;
    let plus = sample(t + dt_probe)?;
    let minus = sample(t - dt_probe)?;
    let lap = geometry::radial_laplacian(&v, &manifold)?;
    let grad = geometry::gradient_sq(&v, &manifold)?;
    // Stay inside the support at all three time levels.
    let nodes = interior_support_nodes(grid, p, t - dt_probe, 2);
    Ok(nodes
        .into_iter()
        .map(|i| {
            let vt = (plus.values()[i] - minus.values()[i]) / (2.0 * dt_probe);
            (vt - (p.m - 1.0) * v.values()[i] * lap.values()[i] - grad.values()[i]).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryKind, ModelManifold};

    #[test]
    fn constants_examples() {
        let c = constants(2.0, 1).unwrap();
        assert!((c.kappa - 1.0 / 3.0).abs() < 1e-15);
        for n in 1..=4 {
            let c = constants(1.0, n).unwrap();
            assert_eq!(c.kappa, n as f64 / 2.0);
            assert_eq!(c.a, 0.0);
        }
        let c = constants(2.0, 2).unwrap();
        assert_eq!((c.b, c.a, c.kappa), (2.0, 0.5, 0.5));
    }

    #[test]
    fn constants_reject_subcritical_exponents() {
        let err = constants(0.0, 2).unwrap_err();
        assert!(err.to_string().contains("m_c"));
        assert!(constants(0.3, 3).is_err());
        assert!(constants(0.34, 3).is_ok());
    }

    #[test]
    fn constants_lattice_properties() {
        for n in 1..=4 {
            let mut last = f64::INFINITY;
            for j in 0..=29 {
                let m = 1.1 + 0.1 * j as f64;
                let c = constants(m, n).unwrap();
                assert!(c.kappa < last);
                last = c.kappa;
                assert!((c.a - c.b / (c.b + 2.0)).abs() < 1e-15);
                assert!(c.a > -1.0 && c.a < 1.0);
            }
            for m in [0.55, 0.7, 0.9, 0.99, 1.0, 1.01, 1.5, 3.0] {
                if m <= critical_exponent(n) {
                    continue;
                }
                let c = constants(m, n).unwrap();
                assert_eq!(c.a < 0.0, m < 1.0);
                assert!(c.b + 2.0 > 0.0);
            }
        }
    }

    #[test]
    fn pressure_examples() {
        assert_eq!(pressure_value(3.0, 2.0).unwrap(), 6.0);
        assert!((pressure_value(4.0, 0.5).unwrap() + 0.5).abs() < 1e-15);
        assert!((pressure_value(std::f64::consts::E, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(pressure_value(0.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(pressure_value(-1.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn barenblatt_examples() {
        let p = BarenblattParams::new(1.0, 2.0, 1).unwrap();
        assert!((barenblatt_pressure(0.0, 1.0, &p).unwrap() - 0.5).abs() < 1e-15);
        let rs = p.support_radius(1.0);
        assert_eq!(barenblatt_pressure(rs * 1.01, 1.0, &p).unwrap(), 0.0);
        assert_eq!(barenblatt_density(rs * 1.5, 1.0, &p).unwrap(), 0.0);
        // m = 2: u = V/2.
        let v = barenblatt_pressure(0.3, 1.0, &p).unwrap();
        assert!((barenblatt_density(0.3, 1.0, &p).unwrap() - v / 2.0).abs() < 1e-15);
        assert!(matches!(barenblatt_pressure(0.0, 0.0, &p), Err(Error::Domain(_))));
        assert!(BarenblattParams::new(-1.0, 2.0, 1).is_err());
        assert!(BarenblattParams::new(1.0, 0.2, 3).is_err());
    }

    #[test]
    fn fast_diffusion_profile_is_negative() {
        let p = BarenblattParams::new(1.0, 0.5, 2).unwrap();
        for r in [0.0, 0.5, 3.0] {
            assert!(barenblatt_pressure(r, 2.0, &p).unwrap() < 0.0);
            assert!(barenblatt_density(r, 2.0, &p).unwrap() > 0.0);
        }
        assert!(p.support_radius(1.0).is_infinite());
    }

    #[test]
    fn time_derivative_matches_closed_form_oracle() {
        // Hand-derived: V = (C t^q - κ r²)/(2nt), V_t = (C(q-1)t^{q-2} + κ r²/t²)/(2n).
        for (m, n, sign) in [(2.0, 1, 1.0), (3.0, 3, 1.0), (0.5, 2, -1.0)] {
            let p = BarenblattParams::new(0.8, m, n).unwrap();
            let k = constants(m, n).unwrap().kappa;
            let q = 2.0 * k / n as f64;
            for (r, t) in [(0.1f64, 1.0f64), (0.3, 2.5)] {
                let want = (sign * 0.8 * (q - 1.0) * t.powf(q - 2.0) + k * r * r / (t * t))
                    / (2.0 * n as f64);
                assert!((barenblatt_pressure_dt(r, t, &p).unwrap() - want).abs() < 1e-14);
                let fd = (barenblatt_pressure(r, t + 1e-5, &p).unwrap()
                    - barenblatt_pressure(r, t - 1e-5, &p).unwrap())
                    / 2e-5;
                assert!((fd - want).abs() < 1e-8);
            }
        }
    }

    fn grid(n: usize, radius: f64, intervals: usize) -> Arc<RadialGrid> {
        let m = ModelManifold::euclidean(n, radius).unwrap();
        RadialGrid::new(m, intervals, BoundaryKind::Dirichlet).unwrap()
    }

    #[test]
    fn sharpness_n1_m2() {
        let p = BarenblattParams::new(1.0, 2.0, 1).unwrap();
        let g = grid(1, 4.0, 1024);
        let rows = verify_barenblatt_sharpness(&p, &g, &[1.0, 2.0, 4.0]).unwrap();
        for row in &rows {
            assert!(row.nodes_checked > 100);
            assert!(row.max_defect <= 1e-3, "{row:?}");
            assert!(row.min_abvt_margin.abs() < 1e-9, "{row:?}");
        }
    }

    #[test]
    fn denominator_n_is_certified() {
        for (m, n) in [(2.0, 1), (2.0, 3), (1.5, 2)] {
            let p = BarenblattParams::new(1.0, m, n).unwrap();
            let g = grid(n, 2.0, 256);
            let good = pressure_equation_residual(&p, &g, 1.0, 1e-4).unwrap();
            for d in [n as f64 - 0.5, n as f64 + 1.0, 2.0 * n as f64 + 1.0] {
                let bad = pressure_equation_residual(&p.with_denominator(d), &g, 1.0, 1e-4).unwrap();
                assert!(bad > 10.0 * good, "d={d}: {bad} vs {good}");
            }
        }
    }

    #[test]
    fn gaussian_limit_saturates_heat_harnack() {
        // Δ log u = -n/(2t) = -κ/t with κ(m = 1) = n/2.
        for n in 1..=3 {
            let g = grid(n, 3.0, 300);
            let t = 1.7;
            let v = Field::from_fn(&g, |r| heat_kernel_log(r, t, n).unwrap()).unwrap();
            let lap = geometry::radial_laplacian(&v, g.manifold()).unwrap();
            let kappa = constants(1.0, n).unwrap().kappa;
            for &x in &lap.values()[..290] {
                assert!((x + kappa / t).abs() < 1e-9);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn pressure_round_trip(u in 1e-6f64..1e3, m in 0.2f64..4.0) {
            let v = pressure_value(u, m).unwrap();
            let back = density_value(v, m).unwrap();
            // The inverse power 1/(m-1) amplifies round-off in the base.
            let tol = 1e-12 + 8.0 * f64::EPSILON / (m - 1.0).abs();
            proptest::prop_assert!((back - u).abs() <= tol * u);
        }
    }
}
