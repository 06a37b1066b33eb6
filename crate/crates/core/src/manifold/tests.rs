use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;

fn cone(alpha: f64) -> Manifold {
    Manifold::build(&ManifoldSpec::cone(2, alpha, 4.0), 0).unwrap()
}

/// Cone distance by minimizing over the unrolled images of `y`.
fn cone_distance_images(alpha: f64, x: &[f64], y: &[f64]) -> f64 {
    let (sx, px) = (x[0].hypot(x[1]), x[1].atan2(x[0]));
    let (sy, py) = (y[0].hypot(y[1]), y[1].atan2(y[0]));
    let mut best = sx + sy;
    for k in -2..=2 {
        let sep = (alpha * (py - px) + 2.0 * PI * alpha * k as f64).abs();
        if sep < PI {
            best = best.min((sx * sx + sy * sy - 2.0 * sx * sy * sep.cos()).max(0.0).sqrt());
        }
    }
    best
}

/// Great-circle distance from colatitude/longitude.
fn sphere_distance(radius: f64, x: &[f64], y: &[f64]) -> f64 {
    let (c1, l1) = (x[0].hypot(x[1]) / radius, x[1].atan2(x[0]));
    let (c2, l2) = (y[0].hypot(y[1]) / radius, y[1].atan2(y[0]));
    let cosd = c1.cos() * c2.cos() + c1.sin() * c2.sin() * (l1 - l2).cos();
    radius * cosd.clamp(-1.0, 1.0).acos()
}

#[test]
fn euclidean_distance_example() {
    let m = Manifold::build(&ManifoldSpec::euclidean(2, 10.0), 0).unwrap();
    assert!((m.distance(&Point::new(&[0.0, 0.0]), &Point::new(&[3.0, 4.0])) - 5.0).abs() < 1e-15);
}

#[test]
fn cone_distance_matches_images() {
    for alpha in [0.6, 0.8, 0.9, 0.99, 1.0] {
        let m = cone(alpha);
        for i in 0..200 {
            let t = i as f64;
            let x = [(t * 0.37).sin() * 1.5, (t * 0.71).cos() * 1.2];
            let y = [(t * 1.13).cos() * 0.9, (t * 0.29).sin() * 1.7];
            let d = m.distance(&Point::new(&x), &Point::new(&y));
            let o = cone_distance_images(alpha, &x, &y);
            assert!((d - o).abs() < 1e-12 * (1.0 + o), "alpha {alpha}: {d} vs {o}");
        }
    }
}

#[test]
fn cone_cut_pair_is_not_unique() {
    let alpha = 0.9;
    let m = cone(alpha);
    let x = Point::new(&[1.0, 0.0]);
    // Chart angle pi is true angle pi*alpha: the cut ray of x.
    let y = Point::new(&[-1.0, 1e-15]);
    assert!(!m.segment_unique(&x, &y));
    assert!(m.segment_unique(&x, &Point::new(&[0.0, 1.0])));
    let expect = 2.0 * (0.5 * PI * alpha).sin();
    assert!((m.distance(&x, &y) - expect).abs() < 1e-9);
}

#[test]
fn sphere_distance_matches_great_circle() {
    let m = Manifold::build(&ManifoldSpec::sphere_cap(2, 0.7, 2.0), 0).unwrap();
    for i in 0..200 {
        let t = i as f64;
        let x = [(t * 0.37).sin() * 0.9, (t * 0.71).cos() * 0.8];
        let y = [(t * 1.13).cos() * 0.6, (t * 0.29).sin() * 1.1];
        let d = m.distance(&Point::new(&x), &Point::new(&y));
        let o = sphere_distance(0.7, &x, &y);
        assert!((d - o).abs() < 1e-9, "{d} vs {o}");
    }
}

#[test]
fn analytic_volumes() {
    let c = cone(0.9);
    let apex = Point::origin(2);
    assert!((c.ball_volume(&apex, 1.3) - 0.9 * PI * 1.69).abs() < 1e-12);
    assert!((c.volume_ratio(&apex, 0.5) - 0.9).abs() < 1e-12);
    let far = Point::new(&[2.0, 0.0]);
    assert!((c.ball_volume(&far, 1.0) - PI).abs() < 1e-12);
    let s = Manifold::build(&ManifoldSpec::sphere_cap(2, 1.0, 2.5), 0).unwrap();
    assert!((s.ball_volume(&apex, 1.0) - 2.0 * PI * (1.0 - 1f64.cos())).abs() < 1e-12);
    assert!((s.sphere_area(&apex, 1.0) - 2.0 * PI * 1f64.sin()).abs() < 1e-12);
}

#[test]
fn cone_off_apex_volume_matches_counting() {
    let alpha = 0.8;
    let m = cone(alpha);
    let c = Point::new(&[0.4, 0.1]);
    let r = 1.0;
    // Chart area element is alpha times Lebesgue; count grid cells in the ball.
    let h = 0.004;
    let w = r / alpha + 0.5;
    let k = (w / h) as i64;
    let mut count = 0u64;
    for i in -k..=k {
        for j in -k..=k {
            let p = Point::new(&[c.coords[0] + i as f64 * h, c.coords[1] + j as f64 * h]);
            if m.distance(&c, &p) <= r {
                count += 1;
            }
        }
    }
    let est = count as f64 * h * h * alpha;
    let v = m.ball_volume(&c, r);
    assert!(((v - est) / v).abs() < 5e-3, "{v} vs {est}");
    let dv = (m.ball_volume(&c, r + 1e-5) - m.ball_volume(&c, r - 1e-5)) / 2e-5;
    assert!(((m.sphere_area(&c, r) - dv) / dv).abs() < 1e-5);
}

#[test]
fn product_cone_volume() {
    let m = Manifold::build(&ManifoldSpec::cone(3, 0.9, 3.0), 0).unwrap();
    let apex = Point::origin(3);
    assert!((m.volume_ratio(&apex, 0.7) - 0.9).abs() < 1e-9);
    let far = Point::new(&[2.0, 0.0, 0.3]);
    assert!((m.volume_ratio(&far, 0.5) - 1.0).abs() < 1e-9);
}

#[test]
fn sampling_is_volume_uniform() {
    let specs = [
        ManifoldSpec::euclidean(2, 2.0),
        ManifoldSpec::cone(2, 0.85, 2.0),
        ManifoldSpec::sphere_cap(2, 0.8, 2.0),
        ManifoldSpec::euclidean(3, 2.0),
    ];
    for spec in specs {
        let m = Manifold::build(&spec, 0).unwrap();
        let c = m.center();
        let pts = m.sample_ball(&c, 1.5, 20_000, 3, "t").unwrap();
        let inner = pts.iter().filter(|p| m.distance(&c, p) <= 0.9).count() as f64 / pts.len() as f64;
        let expect = m.ball_volume(&c, 0.9) / m.ball_volume(&c, 1.5);
        assert!((inner - expect).abs() < 0.015, "{:?}: {inner} vs {expect}", spec.kind);
    }
}

#[test]
fn quadrature_integrates_rho_squared() {
    let m = Manifold::build(&ManifoldSpec::euclidean(2, 2.0), 0).unwrap();
    let c = m.center();
    let q = m.quadrature_ball(&c, 1.0, 20_000).unwrap();
    let mean: f64 = q.points.iter().map(|p| m.distance(&c, p).powi(2)).sum::<f64>() / q.points.len() as f64;
    assert!((mean - 0.5).abs() < 2e-3);
    assert!((q.total_weight() - PI).abs() < 1e-9);
}

#[test]
fn cone_ray_limit_marks_shadow() {
    let alpha = 0.9;
    let m = cone(alpha);
    let q = Point::new(&[-1.0, 0.0]);
    let behind = Point::new(&[0.2, 0.01]);
    assert!(m.ray_limit(&q, &behind) < 3.0);
    let beside = Point::new(&[0.0, 0.9]);
    assert!(m.ray_limit(&q, &beside) > 3.0);
    let ext = m.extend(&q, &Point::new(&[-0.5, 0.3]), 1.0);
    assert!(ext.well_defined);
    assert!((m.distance(&q, ext.point.as_ref().unwrap()) - 1.0).abs() < 1e-12);
}

#[test]
fn sphere_extension_fails_past_antipode() {
    let m = Manifold::build(&ManifoldSpec::sphere_cap(2, 1.0, 3.1), 0).unwrap();
    let q = m.center();
    let x = Point::new(&[0.5, 0.0]);
    assert!(m.extend(&q, &x, 2.0).well_defined);
    assert!(!m.extend(&q, &x, PI + 0.01).well_defined);
}

#[test]
fn graph_distances_track_euclidean() {
    let spec = ManifoldSpec::graph(ManifoldSpec::euclidean(2, 1.0), 8000);
    let m = Manifold::build(&spec, 11).unwrap();
    let g = m.graph().unwrap();
    let stats = m.graph_stats().unwrap();
    assert!(stats.vertices > 7900);
    let c = m.center();
    let mut checked = 0;
    for v in (1..g.len() as u32).step_by(13) {
        let p = g.vertex_point(v);
        let e = m.geometry().distance(&c, &p);
        if e < 10.0 * stats.mean_edge_length {
            continue;
        }
        let d = m.distance(&c, &p);
        assert!(d >= e - 1e-12 && (d - e) / e < 0.03, "{d} vs {e}");
        checked += 1;
    }
    assert!(checked > 30, "{checked}");
}

#[test]
fn graph_extension_continues_paths() {
    let spec = ManifoldSpec {
        connectivity_factor: Some(3.0),
        ..ManifoldSpec::graph(ManifoldSpec::euclidean(2, 1.0), 3000)
    };
    let m = Manifold::build(&spec, 5).unwrap();
    let q = m.locate(&[-0.6, 0.0]).unwrap();
    let x = m.locate(&[-0.2, 0.05]).unwrap();
    let ext = m.extend(&q, &x, 0.7);
    assert!(ext.well_defined);
    let p = ext.point.unwrap();
    assert!((m.distance(&q, &p) - 0.7).abs() <= m.graph_stats().unwrap().mean_edge_length);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_inverts_log(kind in 0usize..3, a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0) {
        let spec = match kind {
            0 => ManifoldSpec::euclidean(2, 3.0),
            1 => ManifoldSpec::cone(2, 0.8, 3.0),
            _ => ManifoldSpec::sphere_cap(2, 1.0, 3.0),
        };
        let m = Manifold::build(&spec, 0).unwrap();
        let x = Point::new(&[a, b]);
        let y = Point::new(&[c, d]);
        prop_assume!(m.segment_unique(&x, &y));
        let v = m.log(&x, &y);
        prop_assert!((norm(&v) - m.distance(&x, &y)).abs() < 1e-10);
        let z = m.exp(&x, &v).unwrap();
        prop_assert!(m.distance(&z, &y) < 1e-9);
        let mid = m.interpolate(&x, &y, 0.3);
        prop_assert!((m.distance(&x, &mid) - 0.3 * m.distance(&x, &y)).abs() < 1e-9);
    }

    #[test]
    fn distance_is_symmetric_with_triangle(kind in 0usize..3, p in proptest::array::uniform6(-1.0f64..1.0)) {
        let spec = match kind {
            0 => ManifoldSpec::euclidean(2, 3.0),
            1 => ManifoldSpec::cone(2, 0.7, 3.0),
            _ => ManifoldSpec::sphere_cap(2, 0.9, 2.5),
        };
        let m = Manifold::build(&spec, 0).unwrap();
        let (x, y, z) = (Point::new(&p[0..2]), Point::new(&p[2..4]), Point::new(&p[4..6]));
        let dxy = m.distance(&x, &y);
        prop_assert!((dxy - m.distance(&y, &x)).abs() < 1e-12);
        prop_assert!(dxy <= m.distance(&x, &z) + m.distance(&z, &y) + 1e-12);
    }
}

