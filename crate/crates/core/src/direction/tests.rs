use super::*;
use crate::gougu::gougu_defect;
use crate::manifold::{GraphDomain, ManifoldSpec};
use crate::point::dot;
use proptest::prelude::*;

fn euclid(n: usize, radius: f64) -> Manifold {
    Manifold::build(&ManifoldSpec::euclidean(n, radius), 0).unwrap()
}

fn quick(beta: f64) -> FrameParams {
    FrameParams { beta, probes: 600, net_sample: 60, ..FrameParams::default() }
}

#[test]
fn elementary_examples() {
    let e = elementary_bound(1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
    assert!(e.hypothesis && e.bound == 0.0 && e.holds);
    // 2 > 2√0.75 + 0.2 ≈ 1.932: the hypothesis fails, the bound still covers c.
    let e = elementary_bound(1.0, 1.0, 0.5, 0.2, 0.0, 0.0).unwrap();
    assert!(!e.hypothesis && e.holds);
    assert!(elementary_bound(1.0, 1.0, 0.5, 0.27, 0.0, 0.0).unwrap().hypothesis);
    assert!((e.bound - 4.0 * 0.4f64.sqrt()).abs() < 1e-12);
    // a² - c² rounds to a², but the hypothesis is false for any c > 0.
    let e = elementary_bound(1.0, 1.0, 1e-9, 0.0, 0.0, 0.0).unwrap();
    assert!(!e.hypothesis);
    // Negative radicand.
    assert!(!elementary_bound(0.1, 1.0, 0.5, 0.1, 0.1, 0.0).unwrap().hypothesis);
    assert!(elementary_bound(-1.0, 1.0, 0.0, 0.0, 0.0, 0.0).is_err());
    assert!(elementary_bound(1.0, 1.0, 0.0, 0.0, 1.0, 0.0).is_err());
}

#[test]
fn elementary_fuzz_finds_no_violation() {
    let r = elementary_fuzz(1_000_000, 7);
    assert_eq!(r.violations, 0, "{r:?}");
    assert!(r.hypothesis_true > 10_000, "{r:?}");
    assert!(r.tightest_margin >= 0.0);
}

proptest! {
    #[test]
    fn elementary_bound_holds_when_hypothesis_does(
        a in 0.0f64..3.0, b in 0.0f64..3.0, t in 0.0f64..1.0,
        eps in 0.0f64..0.1, eps1 in 0.0f64..0.5, eps2 in 0.0f64..0.1,
    ) {
        let c = t * a.min(b);
        let e = elementary_bound(a, b, c, eps, eps1, eps2).unwrap();
        prop_assert!(!e.hypothesis || e.holds);
    }
}

#[test]
fn euclidean_frame_finds_nearly_orthogonal_directions() {
    let m = euclid(2, 2.0);
    let p = m.center();
    let f = find_direction_points(&m, &p, 1.0, &quick(30.0), 1).unwrap();
    assert!(f.is_complete() && f.collapse().is_none() && !f.partial());
    let lv = f.levels();
    let (u, v) = (&lv[0].q.coords, &lv[1].q.coords);
    let cos = dot(u, v) / (norm(u) * norm(v));
    assert!(cos.abs() <= 0.2, "{cos}");
    let s = lv[1].search.as_ref().unwrap();
    assert!(s.meets_floor && s.ratio >= direction_floor(2));
    // q₂ is a point of the level-1 net.
    assert_eq!(f.snap(1, &lv[1].q).point.as_ref(), Some(&lv[1].q));
    for w in lv.windows(2) {
        assert!(w[1].r_q <= w[0].r_q);
        assert!(w[0].log10_gamma <= w[1].log10_gamma);
    }
    assert!(f.scale_ratios().iter().all(|r| r.is_finite() && *r > 1.0));
    for l in lv {
        for d in &l.net.defects {
            // Euclidean Gou-Gu: every pairwise defect is within 12 r²/β.
            assert!(d.normalized <= 12.0 / 30.0, "{d:?}");
            assert_eq!(d.excluded, 0);
        }
    }
}

#[test]
fn nets_are_dense() {
    let m = euclid(2, 2.0);
    let p = m.center();
    let f = find_direction_points(&m, &p, 1.0, &quick(10.0), 3).unwrap();
    for (i, l) in f.levels().iter().enumerate() {
        let pts = m.sample_ball(&p, l.r_q, 500, 4, "dense").unwrap();
        for x in &pts {
            let c = f.snap(i + 1, x);
            let d = m.distance(x, c.point.as_ref().unwrap());
            assert!(d <= l.net.density_radius * (1.0 + 1e-9), "{d} > {}", l.net.density_radius);
        }
    }
}

#[test]
fn cone_nets_are_dense_across_the_cut() {
    let m = Manifold::build(&ManifoldSpec::cone(2, 0.8, 2.0), 0).unwrap();
    let p = Point::new(&[0.3, 0.0]);
    let params = FrameParams { k_max: Some(1), net_scaling: NetScaling::Uniform, epsilon: 0.2, ..quick(10.0) };
    let f = find_direction_points(&m, &p, 1.0, &params, 3).unwrap();
    let l = &f.levels()[0];
    for x in &m.sample_ball(&p, l.r_q, 300, 5, "dense").unwrap() {
        let c = f.snap(1, x);
        assert!(m.distance(x, c.point.as_ref().unwrap()) <= l.net.density_radius * (1.0 + 1e-9));
    }
}

#[test]
fn halving_epsilon_multiplies_cells_by_two_to_the_n() {
    let m = euclid(2, 2.0);
    let p = m.center();
    let count = |eps: f64| {
        let params = FrameParams { k_max: Some(1), net_scaling: NetScaling::Uniform, epsilon: eps, ..quick(10.0) };
        let f = find_direction_points(&m, &p, 1.0, &params, 3).unwrap();
        let r = f.levels()[0].r_q;
        let pts = m.quadrature_ball(&p, r, 20_000).unwrap().points;
        let keys: std::collections::HashSet<CellKey> = pts.iter().map(|x| f.snap(1, x).key.clone()).collect();
        keys.len() as f64
    };
    let ratio = count(0.1) / count(0.2);
    assert!(ratio > 2.0 && ratio < 8.0, "{ratio}");
}

#[test]
fn stratified_defect_basics() {
    let m = euclid(2, 2.0);
    let p = m.center();
    let f = find_direction_points(&m, &p, 1.0, &quick(10.0), 5).unwrap();
    let r2 = f.levels()[1].r_q;
    let pts = m.sample_ball(&p, r2, 40, 6, "pairs").unwrap();
    for w in pts.windows(2) {
        assert_eq!(f.stratified_gougu_defect(&w[0], &w[0], 2), Some(0.0));
        let a = f.stratified_gougu_defect(&w[0], &w[1], 2).unwrap();
        let b = f.stratified_gougu_defect(&w[1], &w[0], 2).unwrap();
        assert_eq!(a, b);
    }
    // k = 1 is the plain defect of the snapped points, up to snapping.
    let l1 = &f.levels()[0];
    let delta = l1.net.density_radius;
    let pts = m.sample_ball(&p, l1.r_q, 40, 7, "pairs").unwrap();
    for w in pts.windows(2) {
        let s = f.stratified_gougu_defect(&w[0], &w[1], 1).unwrap();
        let (a, b) = (f.snap(1, &w[0]).point.clone().unwrap(), f.snap(1, &w[1]).point.clone().unwrap());
        let g = gougu_defect(&m, &l1.q, l1.distance, &a, &b).unwrap().unwrap();
        assert!((s - g).abs() <= 8.0 * delta * (2.0 * l1.r_q + delta), "{s} vs {g}");
    }
}

fn trend(beta: f64) -> (f64, f64, f64) {
    let m = euclid(2, 2.0);
    let p = m.center();
    let f = find_direction_points(&m, &p, 1.0, &quick(beta), 9).unwrap();
    let d = f.stratified_defect_stats(2, 300, 10).unwrap();
    let res = f.residual_diameter().unwrap();
    let phi = f.projection_diagnostics()[0].phi_over_r_last.unwrap();
    assert_eq!(d.excluded, 0);
    (d.normalized, res.normalized, phi)
}

#[test]
fn euclidean_errors_shrink_with_beta() {
    let rows: Vec<(f64, f64, f64)> = [10.0, 30.0, 100.0].iter().map(|&b| trend(b)).collect();
    for w in rows.windows(2) {
        assert!(w[1].0 < w[0].0, "defect {rows:?}");
        assert!(w[1].1 < w[0].1, "residual {rows:?}");
        assert!(w[1].2 <= w[0].2, "phi {rows:?}");
    }
    assert!(rows[0].0 <= 12.0 / 10.0 * 2.0);
}

#[test]
fn projection_table_is_small_on_its_own_sphere() {
    let m = euclid(2, 2.0);
    let p = m.center();
    let f = find_direction_points(&m, &p, 1.0, &quick(30.0), 11).unwrap();
    let rows = f.projection_diagnostics();
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!((row.i, row.j), (1, 2));
    // q₂ sits on ∂B_{d(p,q₁)}(q₁) up to the level-1 snap.
    let delta = f.levels()[0].net.density_radius;
    assert!(row.pi_distance.unwrap() <= delta + 1e-12, "{row:?}");
    assert!(row.log10_normalized_distance.map_or(true, |v| v.is_finite()));
}

#[test]
fn one_dimensional_sample_collapses_at_the_second_direction() {
    let mut spec = ManifoldSpec::graph(ManifoldSpec::euclidean(2, 1.0), 400);
    spec.graph_domain = Some(GraphDomain::Segment);
    let m = Manifold::build(&spec, 2).unwrap();
    let p = m.center();
    let params = FrameParams { net_scaling: NetScaling::Uniform, epsilon: 0.2, ..quick(3.0) };
    let f = find_direction_points(&m, &p, 0.9, &params, 2).unwrap();
    let c = f.collapse().expect("no second direction on a segment");
    assert_eq!(c.level, 2);
    assert_eq!(f.levels().len(), 1);
    assert!(matches!(f.residual_diameter(), Err(Error::DimensionCollapse { level: 2, .. })));
}

#[test]
fn frames_are_deterministic() {
    let m = euclid(2, 2.0);
    let p = m.center();
    let a = find_direction_points(&m, &p, 1.0, &quick(30.0), 21).unwrap().record();
    let b = find_direction_points(&m, &p, 1.0, &quick(30.0), 21).unwrap().record();
    assert_eq!(a, b);
}

#[test]
fn invalid_parameters_are_rejected() {
    let m = euclid(2, 2.0);
    let p = m.center();
    for params in [
        FrameParams { beta: 2.0, ..FrameParams::default() },
        FrameParams { eta: 0.5, ..FrameParams::default() },
        FrameParams { k_max: Some(3), ..FrameParams::default() },
        FrameParams { epsilon: 0.0, ..FrameParams::default() },
    ] {
        assert!(matches!(find_direction_points(&m, &p, 1.0, &params, 0), Err(Error::Config { .. })));
    }
}

#[test]
fn cone_frame_has_two_directions_and_larger_defect() {
    let m = Manifold::build(&ManifoldSpec::cone(2, 0.9, 2.0), 0).unwrap();
    let f = find_direction_points(&m, &m.center(), 1.0, &quick(30.0), 13).unwrap();
    assert!(f.is_complete() && !f.partial());
    assert!(f.levels().iter().all(|l| l.model.stats.is_some()));
    let cone = f.stratified_defect_stats(2, 300, 14).unwrap();
    let e = euclid(2, 2.0);
    let flat = find_direction_points(&e, &e.center(), 1.0, &quick(30.0), 13).unwrap();
    let flat = flat.stratified_defect_stats(2, 300, 14).unwrap();
    assert!(cone.normalized > flat.normalized, "{cone:?} vs {flat:?}");
}
