use std::f64::consts::PI;

use super::*;
use crate::direction::{find_direction_points, FrameParams};
use crate::manifold::ManifoldSpec;
use proptest::prelude::*;

fn euclid(n: usize, radius: f64) -> Manifold {
    Manifold::build(&ManifoldSpec::euclidean(n, radius), 0).unwrap()
}

fn cone(alpha: f64) -> Manifold {
    Manifold::build(&ManifoldSpec::cone(2, alpha, 3.0), 0).unwrap()
}

#[test]
fn distance_map_expansion() {
    let m = euclid(2, 400.0);
    let p = m.center();
    let (r, beta) = (1.0, 100.0);
    let a = FrameAnchors::axis(&m, &p, r, beta).unwrap();
    assert!(distance_map(&m, &a, &p).iter().all(|v| *v == 0.0));
    for t in [1e-3, 1e-2, 0.1] {
        let psi = distance_map(&m, &a, &Point::new(&[t, 0.0]));
        assert!((psi[0] + t).abs() < 1e-12);
        // |x - q₂| - βr = √(t² + (βr)²) - βr.
        let oracle = t * t / ((t * t + (beta * r) * (beta * r)).sqrt() + beta * r);
        assert!((psi[1] - oracle).abs() < 1e-12, "{psi:?}");
    }
}

proptest! {
    #[test]
    fn distance_map_components_are_one_lipschitz(
        alpha in 0.5f64..1.0, x in prop::array::uniform2(-1.0f64..1.0), y in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let m = cone(alpha);
        let p = Point::new(&[0.2, 0.1]);
        let a = FrameAnchors {
            origin: p.clone(),
            points: vec![Point::new(&[2.0, 0.3]), Point::new(&[-0.4, -1.9])],
            radii: vec![0.1, 0.1],
            beta: 10.0,
        };
        let (x, y) = (Point::new(&x), Point::new(&y));
        let d = m.distance(&x, &y);
        let diff = sub(&distance_map(&m, &a, &x), &distance_map(&m, &a, &y));
        for v in diff {
            prop_assert!(v.abs() <= d + 1e-12);
        }
    }
}

#[test]
fn axis_anchors_meet_the_bi_lipschitz_window() {
    for n in [2, 3] {
        for beta in [25.0, 100.0] {
            let r = 1.0;
            let m = euclid(n, 2.0 * beta * r);
            let a = FrameAnchors::axis(&m, &m.center(), r, beta).unwrap();
            let qi = quasi_isometry_stats(&m, &a, 1000, 3).unwrap();
            let k = (n as f64).sqrt() / beta.sqrt();
            assert!(qi.min_ratio >= 1.0 - 4.0 * k && qi.max_ratio <= 1.0 + 5.0 * k, "{qi:?}");
            assert!(qi.component_lipschitz <= 1.0 + 1e-12);
            assert_eq!(qi.histogram.counts.iter().sum::<usize>(), qi.admissible);
            assert!(qi.admissible > 500);
        }
    }
}

#[test]
fn quasi_isometry_needs_admissible_pairs() {
    let m = euclid(2, 10.0);
    let a = FrameAnchors::axis(&m, &m.center(), 0.1, 4.0).unwrap();
    assert!(matches!(quasi_isometry_on(&m, &a, 0.1, 1.0, 50, 1), Err(Error::EmptyRegion(_))));
}

#[test]
fn euclidean_ag_pair_is_the_reflection() {
    let m = euclid(3, 5.0);
    let p = Point::new(&[0.1, -0.2, 0.3]);
    let q = Point::new(&[1.3, 0.4, -0.5]);
    let t = find_ag_pair(&m, &p, &q, &AgConfig::default()).unwrap();
    let reflection: Coords = p.coords.iter().zip(&q.coords).map(|(a, b)| 2.0 * a - b).collect();
    assert!(norm(&sub(&t.q_minus.coords, &reflection)) < 1e-5 * m.distance(&p, &q));
    assert!(t.excess.abs() < 1e-12 && t.minimizing);
    assert_eq!(t.pivot, p);
}

#[test]
fn cone_ag_pairs() {
    // Away from the apex the extended segment is straight in the unrolled chart.
    let m = cone(0.95);
    let t = find_ag_pair(&m, &Point::new(&[0.8, 0.6]), &Point::new(&[1.5, 1.2]), &AgConfig::default()).unwrap();
    assert!(t.minimizing && t.excess.abs() < 1e-9, "{t:?}");
    // At the apex two points at distance D are at most 2D sin(πα/2) apart.
    let mut last = f64::INFINITY;
    for alpha in [0.9, 0.95, 0.99] {
        let m = cone(alpha);
        let q = Point::new(&[1.0, 0.0]);
        let t = find_ag_pair(&m, &m.center(), &q, &AgConfig::default()).unwrap();
        let floor = 2.0 * (1.0 - (PI * alpha / 2.0).sin());
        assert!(t.minimizing && t.excess >= floor - 1e-9 && t.excess <= 1.5 * floor, "{t:?}");
        assert!(t.excess < last);
        last = t.excess;
    }
}

#[test]
fn sphere_ag_pair_far_from_the_pole_is_not_minimizing() {
    let rr = 1.0;
    let m = Manifold::build(&ManifoldSpec::sphere_cap(2, rr, 3.0), 0).unwrap();
    let d = 2.5;
    let q = Point::new(&[d, 0.0]);
    let t = find_ag_pair(&m, &m.center(), &q, &AgConfig::default()).unwrap();
    assert!(!t.minimizing);
    // Antipodal azimuths on the circle of polar angle θ are R·min(2θ, 2π - 2θ) apart.
    let oracle = 2.0 * d - rr * (2.0 * d / rr).min(2.0 * PI - 2.0 * d / rr);
    assert!((t.excess - oracle).abs() < 1e-5, "{} vs {oracle}", t.excess);
    // Within reach of the great circle the triple is exact.
    let t = find_ag_pair(&m, &m.center(), &Point::new(&[1.0, 0.0]), &AgConfig::default()).unwrap();
    assert!(t.minimizing && t.excess.abs() < 1e-9);
}

#[test]
fn abresch_gromoll_on_euclidean() {
    let m = euclid(2, 200.0);
    let p = m.center();
    let r = 1.0;
    let big = 32.0 * r;
    let t = find_ag_pair(&m, &p, &Point::new(&[big, 0.0]), &AgConfig::default()).unwrap();
    let c = abresch_gromoll_check(&m, &t, r, 4000).unwrap();
    assert!((c.bound - 2.0 * r).abs() < 1e-12);
    assert!(c.hypothesis && c.within_bound);
    // The perpendicular boundary point maximizes the excess.
    let oracle = 2.0 * ((big * big + r * r).sqrt() - big);
    assert!(c.sup_excess <= oracle + 1e-12 && c.sup_excess >= 0.9 * oracle, "{} vs {oracle}", c.sup_excess);
    assert!(c.min_excess >= -1e-9);
    assert!(ag_bound(2, 2.0 * r, big) > 2.0 * ag_bound(2, r, big));
    assert!(ag_bound(3, 2.0 * r, big) > 2.0 * ag_bound(3, r, big));
}

#[test]
fn affine_data_is_its_own_replacement() {
    let m = euclid(2, 2.0);
    let p = m.center();
    let lin = ScalarField::from_fn("lin", |x| Some(0.7 * x.coords[0] - 0.3 * x.coords[1] + 0.1));
    let h = harmonic_replacement(&m, &p, 0.5, &lin, &HarmonicConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for x in m.quadrature_ball(&p, 0.45, 500).unwrap().points {
        worst = worst.max((h.field.value(&x).unwrap() - lin.value(&x).unwrap()).abs());
    }
    assert!(worst < 1e-7, "{worst}");
    assert!(h.max_principle_violation < 1e-9);
}

fn distance_gap(m: &Manifold, q: &Point, r1: f64) -> f64 {
    let p = m.center();
    let d0 = m.distance(&p, q);
    let b = ScalarField::distance(m, q).map("b+", move |v| v - d0);
    let h = harmonic_replacement(m, &p, 2.0 * r1, &b, &HarmonicConfig::default()).unwrap();
    assert!(h.max_principle_violation < 1e-9);
    let mut gap: f64 = 0.0;
    for x in m.quadrature_ball(&p, r1, 1000).unwrap().points {
        gap = gap.max((h.field.value(&x).unwrap() - b.value(&x).unwrap()).abs());
    }
    gap
}

#[test]
fn distance_replacement_gap_scales_quadratically() {
    let m = euclid(2, 4.0);
    let q = Point::new(&[1.0, 0.0]);
    let (a, b) = (distance_gap(&m, &q, 0.1), distance_gap(&m, &q, 0.05));
    assert!(a <= 0.1 * 0.1 / 1.0);
    assert!((b / a - 0.25).abs() < 0.05, "{a} {b}");
}

#[test]
fn toponogov_on_euclidean_space() {
    let m = euclid(2, 10.0);
    let p = m.center();
    let q = Point::new(&[3.0, 1.0]);
    let r1 = 0.5;
    for f in [0.25, 0.5, 1.0] {
        let s = f * r1;
        let t = integral_toponogov_check(&m, &q, &p, r1, s, 2000, 4).unwrap();
        assert!(t.cosine.max < 1e-12, "{t:?}");
        assert!(t.quotient.mean <= t.leading_term + 3.0 * t.quotient.se, "{t:?}");
        assert_eq!(t.dropped, 0);
    }
    assert!(integral_toponogov_check(&m, &q, &p, r1, 2.0 * r1, 10, 4).is_err());
    assert!(integral_toponogov_check(&m, &Point::new(&[0.6, 0.0]), &p, r1, r1, 10, 4).is_err());
}

#[test]
fn toponogov_defect_on_cones_shrinks_with_the_angle() {
    let mut last = f64::INFINITY;
    for alpha in [0.8, 0.9, 0.95, 0.99] {
        let m = cone(alpha);
        let t = integral_toponogov_check(&m, &Point::new(&[1.0, 0.0]), &m.center(), 0.4, 0.4, 4000, 5).unwrap();
        assert!(t.cosine.mean > 0.0 && t.cosine.mean < last, "{t:?}");
        last = t.cosine.mean;
    }
}

fn quick(beta: f64) -> FrameParams {
    FrameParams { beta, probes: 600, net_sample: 60, ..FrameParams::default() }
}

#[test]
fn euclidean_report() {
    let m = euclid(2, 2.0);
    let f = find_direction_points(&m, &m.center(), 1.0, &quick(100.0), 1).unwrap();
    let cfg = SplittingConfig::default();
    let rep = splitting_report(&m, &f.anchors(), &cfg, 2).unwrap();
    assert!(!rep.partial, "{:?}", rep.errors);
    let g = rep.gram_harmonic.as_ref().unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(g[i][j], g[j][i]);
            assert!(g[i][j] >= 0.0);
        }
    }
    assert!(g[0][1] <= 0.05);
    assert!(rep.gradient_sup.as_ref().unwrap().iter().all(|v| *v <= 1.05));
    for r in &rep.replacements {
        assert!(r.max_principle_violation < 1e-9);
    }
    for a in &rep.ag {
        assert!(a.check.min_excess >= -1e-9);
    }
    assert!(rep.epsilon.unwrap() < 0.05);
}
