use std::f64::consts::PI;

use pme_verify::geometry::{
    gradient, gradient_sq, hessian_norm_sq, integrate, radial_laplacian, warping, BoundaryKind,
    Field, ModelManifold, RadialGrid,
};
use proptest::prelude::*;

fn cases() -> Vec<(ModelManifold, BoundaryKind)> {
    vec![
        (ModelManifold::euclidean(1, 2.0).unwrap(), BoundaryKind::Dirichlet),
        (ModelManifold::euclidean(3, 2.0).unwrap(), BoundaryKind::Dirichlet),
        (ModelManifold::hyperbolic(2, 1.0, 2.0).unwrap(), BoundaryKind::Dirichlet),
        (ModelManifold::hyperbolic(4, 0.5, 3.0).unwrap(), BoundaryKind::Dirichlet),
        (ModelManifold::full_sphere(2, 1.0).unwrap(), BoundaryKind::NeumannPole),
        (ModelManifold::sphere_cap(3, 1.0, 2.0).unwrap(), BoundaryKind::Dirichlet),
        (ModelManifold::flat_circle(2.0 * PI).unwrap(), BoundaryKind::Periodic),
    ]
}

/// `(v, v′, v″)` for `v = cos r`, smooth at a pole and periodic on the circle.
fn oracle(r: f64) -> (f64, f64, f64) {
    (r.cos(), -r.sin(), -r.cos())
}

fn exact_laplacian(m: &ModelManifold, r: f64) -> f64 {
    let (_, d1, d2) = oracle(r);
    let w = warping(m, r).unwrap();
    if w.phi.abs() < 1e-14 || m.dim() == 1 {
        // Pole limit n·v″, or no warping term at all.
        return if m.dim() == 1 { d2 } else { m.dim() as f64 * d2 };
    }
    d2 + (m.dim() - 1) as f64 * w.dphi / w.phi * d1
}

fn exact_hessian(m: &ModelManifold, r: f64) -> f64 {
    let (_, d1, d2) = oracle(r);
    let w = warping(m, r).unwrap();
    if m.dim() == 1 {
        return d2 * d2;
    }
    if w.phi.abs() < 1e-14 {
        return m.dim() as f64 * d2 * d2;
    }
    d2 * d2 + (m.dim() - 1) as f64 * (w.dphi * d1 / w.phi).powi(2)
}

fn errors(m: &ModelManifold, b: BoundaryKind, intervals: usize) -> [f64; 3] {
    let g = RadialGrid::new(*m, intervals, b).unwrap();
    let v = Field::from_fn(&g, |r| oracle(r).0).unwrap();
    let lap = radial_laplacian(&v, m).unwrap();
    let gs = gradient_sq(&v, m).unwrap();
    let hess = hessian_norm_sq(&v, m).unwrap();
    let mut e = [0.0f64; 3];
    // The outermost node of a Dirichlet grid carries one-sided stencils.
    let last = match b {
        BoundaryKind::Dirichlet => g.nodes().len() - 1,
        _ => g.nodes().len(),
    };
    for i in 0..last {
        let r = g.nodes()[i];
        e[0] = e[0].max((lap.values()[i] - exact_laplacian(m, r)).abs());
        e[1] = e[1].max((gs.values()[i] - oracle(r).1.powi(2)).abs());
        e[2] = e[2].max((hess.values()[i] - exact_hessian(m, r)).abs());
    }
    e
}

#[test]
fn operators_converge_at_second_order() {
    for (m, b) in cases() {
        let e: Vec<[f64; 3]> = [32, 64, 128].iter().map(|&n| errors(&m, b, n)).collect();
        for op in 0..3 {
            let (e0, e1, e2) = (e[0][op], e[1][op], e[2][op]);
            if e2 < 1e-11 {
                continue;
            }
            // Richardson-style order from three grids.
            let order = ((e0 - e1) / (e1 - e2)).abs().log2();
            let simple = (e1 / e2).log2();
            assert!(
                order >= 1.9 || simple >= 1.9,
                "{:?} op {op}: errors {e0:e} {e1:e} {e2:e}, order {order}",
                m.kind()
            );
        }
    }
}

#[test]
fn discrete_integration_by_parts() {
    // Bumps vanishing to second order at the outer boundary.
    let check = |m: ModelManifold, intervals: usize| {
        let g = RadialGrid::new(m, intervals, BoundaryKind::Dirichlet).unwrap();
        let big_r = m.r_domain();
        let v = Field::from_fn(&g, |r| (1.0 - (r / big_r).powi(2)).powi(3)).unwrap();
        let w = Field::from_fn(&g, |r| (1.0 - (r / big_r).powi(2)).powi(3) * (1.0 + r * r)).unwrap();
        let lhs = integrate(&radial_laplacian(&v, &m).unwrap().zip_map(&w, |a, b| a * b).unwrap(), &m)
            .unwrap();
        let dv = gradient(&v, &m).unwrap();
        let dw = gradient(&w, &m).unwrap();
        let rhs = -integrate(&dv.zip_map(&dw, |a, b| a * b).unwrap(), &m).unwrap();
        (lhs - rhs).abs() / (1.0 + rhs.abs())
    };
    for m in [
        ModelManifold::euclidean(1, 1.0).unwrap(),
        ModelManifold::euclidean(2, 1.5).unwrap(),
        ModelManifold::hyperbolic(3, 1.0, 2.0).unwrap(),
        ModelManifold::sphere_cap(2, 1.0, 2.5).unwrap(),
    ] {
        let coarse = check(m, 64);
        let fine = check(m, 128);
        let h = m.r_domain() / 128.0;
        assert!(fine <= 20.0 * h * h, "{:?}: {fine:e}", m.kind());
        assert!(fine < coarse / 3.0 || fine < 1e-12, "{:?}: {coarse:e} -> {fine:e}", m.kind());
    }
}

proptest! {
    #[test]
    fn hessian_dominates_laplacian_square(
        which in 0usize..7,
        c1 in -2.0f64..2.0,
        c2 in -1.0f64..1.0,
        c3 in 0.2f64..2.0,
    ) {
        let (m, b) = cases()[which];
        let g = RadialGrid::new(m, 96, b).unwrap();
        let v = Field::from_fn(&g, |r| c1 * r.cos() + c2 * (2.0 * r).cos() + c3).unwrap();
        let hess = hessian_norm_sq(&v, &m).unwrap();
        let lap = radial_laplacian(&v, &m).unwrap();
        let n = m.dim() as f64;
        let tol = 20.0 * g.h() * g.h();
        for (h, l) in hess.values().iter().zip(lap.values()) {
            prop_assert!(h - l * l / n >= -tol, "{} < {}", h, l * l / n);
        }
    }
}
