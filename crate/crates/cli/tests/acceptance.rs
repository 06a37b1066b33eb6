//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test -p splitmap-runner --test acceptance -- --nocapture`.
//! Tests hold a shared lock so the runtime budgets are measured one at a time.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use splitmap_cli::{load_scenario, run_config, RunOutcome, ScenarioConfig};
use splitmap_core::direction::{direction_floor, elementary_fuzz, find_direction_points, FrameAnchors};
use splitmap_core::fields::ScalarField;
use splitmap_core::gougu::{gougu_defect, segment_inequality_check, IntegralConfig};
use splitmap_core::poisson::{graph_refinement, solve_model_function, SolveConfig};
use splitmap_core::rng;
use splitmap_core::splitting::quasi_isometry_stats;
use splitmap_core::{Manifold, ManifoldSpec, Point};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

/// Prints the criterion line and fails the test if any check failed.
fn report(n: u32, checks: &[(String, bool)], elapsed: Duration, budget: Duration) {
    let mut all = checks.to_vec();
    all.push((format!("runtime {:.1}s < {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()), elapsed < budget));
    let ok = all.iter().all(|c| c.1);
    let detail: Vec<String> = all.iter().map(|(s, b)| format!("{}{s}", if *b { "" } else { "FAILED " })).collect();
    println!("criterion {n}: {} ({})", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
    assert!(ok, "criterion {n} failed");
}

fn euclid(n: usize, radius: f64) -> Manifold {
    Manifold::build(&ManifoldSpec::euclidean(n, radius), 0).unwrap()
}

fn axis_point(n: usize, t: f64) -> Point {
    let mut c = vec![0.0; n];
    c[0] = t;
    Point::new(&c)
}

fn run(cfg: &ScenarioConfig) -> (RunOutcome, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(cfg, dir.path()).unwrap();
    (out, dir)
}

#[test]
fn criterion_01_euclidean_gougu_bound() {
    let _g = serial();
    let t = Instant::now();
    let r = 1.0;
    let mut checks = vec![];
    for n in [2, 3] {
        for beta in [10.0, 30.0, 100.0] {
            let m = euclid(n, beta * r + 2.0);
            let p = m.center();
            let q = axis_point(n, beta * r);
            let a = m.sample_ball(&p, r, 1000, 1, "x").unwrap();
            let b = m.sample_ball(&p, r, 1000, 1, "y").unwrap();
            let bound = 12.0 * r * r / beta;
            let mut sup: f64 = 0.0;
            let mut violations = 0;
            for (x, y) in a.iter().zip(&b) {
                match gougu_defect(&m, &q, beta * r, x, y).unwrap() {
                    Some(d) => {
                        sup = sup.max(d);
                        violations += usize::from(d > bound);
                    }
                    None => violations += 1,
                }
            }
            checks.push((format!("n={n} beta={beta}: sup {sup:.3e} <= {bound:.3e}, {violations} violations"), violations == 0));
        }
    }
    report(1, &checks, t.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_02_elementary_inequality_fuzz() {
    let _g = serial();
    let t = Instant::now();
    let f = elementary_fuzz(1_000_000, 7);
    let checks = vec![
        (format!("{} tuples", f.tuples), f.tuples == 1_000_000),
        (format!("{} with hypothesis", f.hypothesis_true), f.hypothesis_true > 0),
        (format!("{} violations", f.violations), f.violations == 0),
    ];
    report(2, &checks, t.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_03_model_function_oracle() {
    let _g = serial();
    let t = Instant::now();
    let mut checks = vec![];
    for (n, r) in [(2, 1.0), (3, 0.5)] {
        let m = euclid(n, 4.0 * r);
        let q = axis_point(n, 0.3 * r);
        let mf = solve_model_function(&m, &q, r, &SolveConfig::default()).unwrap();
        let xs = m.sample_ball(&q, r, 2000, 3, "model").unwrap();
        let sup = xs.iter().map(|x| (mf.field.value(x).unwrap() - m.distance(&q, x).powi(2)).abs()).fold(0.0, f64::max);
        checks.push((format!("n={n} sup|f-rho^2| = {sup:.1e} <= 1e-6 r^2"), sup <= 1e-6 * r * r));
    }
    let spec = ManifoldSpec::graph(ManifoldSpec::euclidean(2, 1.0), 2000);
    let steps = graph_refinement(&spec, &[2000, 8000, 32000], 1.0, 1, &SolveConfig::default()).unwrap();
    for w in steps.windows(2) {
        let ratio = w[1].sup_error / w[0].sup_error;
        checks.push((
            format!("graph {}->{} samples: error ratio {ratio:.3}", w[0].samples, w[1].samples),
            (0.3..=0.7).contains(&ratio),
        ));
    }
    report(3, &checks, t.elapsed(), Duration::from_secs(60));
}

/// `(c₀ + c₁x + c₂y + c₃xy + c₄x²)²` with Gaussian coefficients.
fn polynomial_field(k: u64) -> ScalarField {
    let mut g = rng::stream(11, "poly", k);
    let c: Vec<f64> = (0..5).map(|_| rng::normal(&mut g)).collect();
    ScalarField::from_fn(&format!("poly{k}"), move |p| {
        let (x, y) = (p.coords[0], p.coords[1]);
        Some((c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x * x).powi(2))
    })
}

#[test]
fn criterion_04_segment_inequality() {
    let _g = serial();
    let t = Instant::now();
    let mut checks = vec![];
    let cfg = IntegralConfig { quadrature: 4000, ..Default::default() };
    for spec in [ManifoldSpec::euclidean(2, 3.0), ManifoldSpec::cone(2, 0.9, 3.0)] {
        let m = Manifold::build(&spec, 0).unwrap();
        let mut fields = vec![ScalarField::from_fn("one", |_| Some(1.0))];
        fields.extend((0..5).map(polynomial_field));
        let mut worst: f64 = 0.0;
        for (i, h) in fields.iter().enumerate() {
            let s = segment_inequality_check(&m, &m.center(), 1.0, h, 10_000, i as u64, &cfg).unwrap();
            worst = worst.max(s.ratio);
        }
        checks.push((format!("{:?}: max lhs/rhs {worst:.3}", spec.kind), worst <= 1.0));
    }
    report(4, &checks, t.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_05_axis_bi_lipschitz_window() {
    let _g = serial();
    let t = Instant::now();
    let mut checks = vec![];
    for n in [2, 3] {
        for beta in [25.0, 100.0] {
            let r = 1.0;
            let m = euclid(n, 2.0 * beta * r);
            let a = FrameAnchors::axis(&m, &m.center(), r, beta).unwrap();
            let qi = quasi_isometry_stats(&m, &a, 1000, 5).unwrap();
            let k = (n as f64).sqrt() / beta.sqrt();
            let (lo, hi) = (1.0 - 4.0 * k, 1.0 + 5.0 * k);
            checks.push((
                format!(
                    "n={n} beta={beta}: ratios [{:.4}, {:.4}] in [{lo:.4}, {hi:.4}] over {} pairs",
                    qi.min_ratio, qi.max_ratio, qi.admissible
                ),
                qi.min_ratio >= lo && qi.max_ratio <= hi && qi.admissible > 0,
            ));
        }
    }
    report(5, &checks, t.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_06_direction_point_floor() {
    let _g = serial();
    let t = Instant::now();
    let mut checks = vec![];
    for beta in [30.0, 100.0] {
        let cfg = load_scenario(&scenario("euclidean-n2.toml"), None, &[format!("beta={beta}")]).unwrap();
        let m = Manifold::build(&cfg.manifold, cfg.seed).unwrap();
        let c = &cfg.construction;
        let f = find_direction_points(&m, &m.center(), c.radius, &c.frame, cfg.seed).unwrap();
        let floor = direction_floor(2);
        let ratios: Vec<f64> = f.levels().iter().filter_map(|l| l.search.as_ref()).map(|s| s.ratio).collect();
        checks.push((
            format!("beta={beta}: {} levels, ratios {ratios:.3?} >= {floor:.2e}", f.levels().len()),
            f.is_complete() && ratios.len() == 1 && ratios.iter().all(|r| *r >= floor),
        ));
    }
    report(6, &checks, t.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_07_quasi_isometry_trend() {
    let _g = serial();
    let t = Instant::now();
    let mut devs = vec![];
    for beta in [10.0, 30.0, 100.0] {
        let cfg = load_scenario(&scenario("euclidean-n2.toml"), None, &[format!("beta={beta}")]).unwrap();
        let (o, _dir) = run(&cfg);
        devs.push(o.summary.qi_max_deviation.expect("quasi-isometry stats"));
    }
    let checks = vec![
        (format!("max|ratio-1| over beta 10,30,100: {devs:.4?}"), devs[2] < devs[0]),
        ("each step within 10% of decreasing".to_string(), devs.windows(2).all(|w| w[1] <= 1.1 * w[0])),
    ];
    report(7, &checks, t.elapsed(), Duration::from_secs(600));
}

#[test]
fn criterion_08_cone_sweep_and_negative_control() {
    let _g = serial();
    let t = Instant::now();
    let base = load_scenario(&scenario("cone.toml"), None, &["beta=30".into()]).unwrap();
    let eps = |spec: ManifoldSpec| {
        let cfg = ScenarioConfig { manifold: spec, ..base.clone() };
        run(&cfg).0.summary.epsilon.expect("epsilon")
    };
    let alphas = [0.8, 0.9, 0.95, 0.99];
    let cones: Vec<f64> = alphas.iter().map(|&a| eps(ManifoldSpec { alpha: Some(a), ..base.manifold.clone() })).collect();
    let flat = eps(ManifoldSpec::euclidean(2, base.manifold.domain_radius));
    let sphere_cfg = load_scenario(&scenario("sphere-cap.toml"), None, &["beta=30".into()]).unwrap();
    let sphere = eps(sphere_cfg.manifold);
    let checks = vec![
        (format!("cone eps over alpha {alphas:?}: {cones:.4?} non-increasing"), cones.windows(2).all(|w| w[1] <= w[0])),
        (
            format!("euclidean eps {flat:.4} is the family minimum (cone min {:.4})", cones.iter().copied().fold(f64::INFINITY, f64::min)),
            cones.iter().all(|c| flat <= *c),
        ),
        (format!("sphere eps {sphere:.4} >= 5 x euclidean ({:.1}x)", sphere / flat), sphere >= 5.0 * flat),
    ];
    report(8, &checks, t.elapsed(), Duration::from_secs(1200));
}

#[test]
fn criterion_09_toponogov_difference_quotient() {
    let _g = serial();
    let t = Instant::now();
    let cfg = load_scenario(&scenario("euclidean-n2.toml"), None, &[]).unwrap();
    let (o, _dir) = run(&cfg);
    let rep = o.report.expect("report");
    let mut checks = vec![];
    for e in &rep.toponogov {
        for s in &e.steps {
            checks.push((
                format!(
                    "q{} s={:.3}r1: {:.3e} <= {:.3e} + 3 x {:.1e}",
                    e.index,
                    s.s / rep.radius,
                    s.quotient.mean,
                    s.leading_term,
                    s.quotient.se
                ),
                s.quotient.mean <= s.leading_term + 3.0 * s.quotient.se,
            ));
        }
    }
    let steps: Vec<f64> = rep.toponogov.iter().flat_map(|e| e.steps.iter().map(|s| s.s / rep.radius)).collect();
    checks.push((format!("{} anchors x steps {{0.25,0.5,1}} r1", rep.toponogov.len()), !steps.is_empty()));
    report(9, &checks, t.elapsed(), Duration::from_secs(30));
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let t = Instant::now();
    let mut checks = vec![];
    for name in ["euclidean-n2.toml", "cone.toml", "sphere-cap.toml"] {
        let cfg = load_scenario(&scenario(name), None, &[]).unwrap();
        let (a, _da) = run(&cfg);
        let (b, _db) = run(&cfg);
        for (x, y) in [(&a.artifacts.report_json, &b.artifacts.report_json), (&a.artifacts.frame_json, &b.artifacts.frame_json)] {
            let (x, y) = (x.as_ref().unwrap(), y.as_ref().unwrap());
            let same = std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
            checks.push((format!("{name} {} identical", x.file_name().unwrap().to_string_lossy()), same));
        }
    }
    // The budget is per scenario; three scenarios run twice each.
    report(10, &checks, t.elapsed(), Duration::from_secs(3 * 2 * 120));
}
