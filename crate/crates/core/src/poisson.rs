//! The model function: `Δf = 2n` on `B_R(q)` with boundary value `R²`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gradient, hessian_deviation, ProbeConfig, ScalarField};
use crate::manifold::{Manifold, ManifoldKind};
use crate::mesh::Discretization;
use crate::par;
use crate::point::{norm, Point};
use crate::quad::gauss_legendre;
use crate::sparse::{pcg, CgStats, Csr};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pick the most accurate method the backend supports.
    #[default]
    Auto,
    /// `ρ²` itself (Euclidean space).
    Exact,
    /// Radially reduced ODE about `q`.
    Radial,
    /// Discrete Laplacian with a Dirichlet shell.
    Mesh,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryValue {
    /// `R²` at every shell node.
    #[default]
    RadiusSquared,
    /// `ρ²` of each shell node.
    RhoSquared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub method: Method,
    /// Node count for mesh solves on analytic backends.
    pub nodes: usize,
    /// Dirichlet shell width in mean edge lengths.
    pub shell_factor: f64,
    pub boundary: BoundaryValue,
    /// Relative residual for conjugate gradients.
    pub tolerance: f64,
    /// Refined sub-ball for mesh solves on analytic backends.
    #[serde(skip)]
    pub focus: Option<Focus>,
}

/// Replaces the nodes of `B_radius(center)` by `nodes` finer ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Focus {
    pub center: Point,
    pub radius: f64,
    pub nodes: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: Method::Auto,
            nodes: 20_000,
            shell_factor: 1.5,
            boundary: BoundaryValue::RadiusSquared,
            tolerance: 1e-8,
            focus: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveStats {
    pub nodes: usize,
    pub boundary_nodes: usize,
    pub shell_width: f64,
    pub mean_edge: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Clone, Debug)]
pub struct ModelFunction {
    pub field: ScalarField,
    pub center: Point,
    pub radius: f64,
    pub method: Method,
    pub stats: Option<SolveStats>,
}

impl ModelFunction {
    /// Distance over which derivative probes of the field reach.
    fn reach(&self, probe: &ProbeConfig) -> f64 {
        match &self.stats {
            Some(s) => 3.0 * s.mean_edge,
            None => 2.0 * probe.stencil,
        }
    }
}

/// Solves for the model function on `B_R(q)`.
pub fn solve_model_function(m: &Manifold, q: &Point, radius: f64, cfg: &SolveConfig) -> Result<ModelFunction> {
    if !(radius > 0.0) {
        return Err(Error::config("radius", "must be positive"));
    }
    let method = match cfg.method {
        Method::Auto if m.is_graph() => Method::Mesh,
        Method::Auto if m.spec().kind == ManifoldKind::Euclidean => Method::Exact,
        Method::Auto if m.radial_about(q) => Method::Radial,
        Method::Auto => Method::Mesh,
        Method::Exact if m.spec().kind != ManifoldKind::Euclidean => {
            return Err(Error::config("method", "exact solution exists on euclidean only"))
        }
        Method::Radial if !m.radial_about(q) => {
            return Err(Error::config("method", "backend is not rotationally symmetric about q"))
        }
        other => other,
    };
    let (field, stats) = match method {
        Method::Exact => (ScalarField::distance_squared(m, q).map("f", |v| v), None),
        Method::Radial => (radial_field(m, q, radius)?, None),
        _ => {
            let (f, s) = mesh_field(m, q, radius, cfg)?;
            (f, Some(s))
        }
    };
    Ok(ModelFunction { field, center: q.clone(), radius, method, stats })
}

/// `u(s) = R² - ∫_s^R 2n V(t)/A(t) dt`, tabulated on a uniform grid and
/// completed by Gauss-Legendre quadrature from the nearest knot.
struct RadialProfile {
    radius: f64,
    step: f64,
    knots: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    slope: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl RadialProfile {
    const KNOTS: usize = 1024;

    fn new(radius: f64, slope: Box<dyn Fn(f64) -> f64 + Send + Sync>) -> Self {
        let (nodes, weights) = gauss_legendre(12);
        let step = radius / Self::KNOTS as f64;
        let mut p = RadialProfile { radius, step, knots: vec![0.0; Self::KNOTS + 1], nodes, weights, slope };
        p.knots[Self::KNOTS] = radius * radius;
        for k in (0..Self::KNOTS).rev() {
            let a = k as f64 * step;
            p.knots[k] = p.knots[k + 1] - p.integral(a, a + step);
        }
        p
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * self.nodes.iter().zip(&self.weights).map(|(x, w)| w * (self.slope)(c + h * x)).sum::<f64>()
    }

    fn value(&self, s: f64) -> Option<f64> {
        if !(0.0..=self.radius * (1.0 + 1e-12)).contains(&s) {
            return None;
        }
        let k = ((s / self.step).round() as usize).min(Self::KNOTS);
        let a = k as f64 * self.step;
        Some(self.knots[k] + self.integral(a, s))
    }
}

fn radial_field(m: &Manifold, q: &Point, radius: f64) -> Result<ScalarField> {
    let n = m.dim() as f64;
    let (mv, qv) = (m.clone(), q.clone());
    let slope = Box::new(move |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        2.0 * n * mv.ball_volume(&qv, t) / mv.sphere_area(&qv, t)
    });
    let profile = Arc::new(RadialProfile::new(radius, slope));
    if !profile.knots.iter().all(|v| v.is_finite()) {
        return Err(Error::Geometry("radial profile is not finite".into()));
    }
    let (mv, qv) = (m.clone(), q.clone());
    Ok(ScalarField::from_fn("f", move |x| profile.value(mv.distance(&qv, x))))
}

fn mesh_field(m: &Manifold, q: &Point, radius: f64, cfg: &SolveConfig) -> Result<(ScalarField, SolveStats)> {
    let n = m.dim() as f64;
    let boundary = |_: &Point, d: f64| match cfg.boundary {
        BoundaryValue::RadiusSquared => Some(radius * radius),
        BoundaryValue::RhoSquared => Some(d * d),
    };
    let sol = solve_on_ball(m, "f", q, radius, 2.0 * n, &boundary, cfg)?;
    Ok((sol.field, sol.stats))
}

/// Result of [`solve_on_ball`].
#[derive(Clone, Debug)]
pub struct BallSolution {
    pub field: ScalarField,
    pub stats: SolveStats,
    /// Nodal values in mesh order.
    pub values: Vec<f64>,
    /// Which nodes carried Dirichlet data.
    pub fixed: Vec<bool>,
}

/// Solves `Δu = source` on `B_R(c)` with `u = boundary(x, d(c, x))` on the
/// outer shell. Uses `cfg.nodes`, `cfg.shell_factor`, `cfg.tolerance` and
/// `cfg.focus`.
pub fn solve_on_ball(
    m: &Manifold,
    label: &str,
    c: &Point,
    radius: f64,
    source: f64,
    boundary: &(dyn Fn(&Point, f64) -> Option<f64> + Sync),
    cfg: &SolveConfig,
) -> Result<BallSolution> {
    if !(radius > 0.0) {
        return Err(Error::config("radius", "must be positive"));
    }
    let base = m.base_model();
    let mut coarse = usize::MAX;
    let (nodes, dist, graph_ids) = match m.graph() {
        Some(g) => {
            let sp = g.paths(g.vertex_of(c));
            let ids: Vec<u32> = (0..g.len() as u32).filter(|&v| sp.dist[v as usize] <= radius).collect();
            let nodes = ids.iter().map(|&v| g.vertex_point(v)).collect();
            let dist = ids.iter().map(|&v| sp.dist[v as usize]).collect();
            (nodes, dist, Some(ids))
        }
        None => {
            let mut nodes = m.quadrature_ball(c, radius, cfg.nodes)?.points;
            if let Some(f) = &cfg.focus {
                nodes.retain(|x| m.distance(&f.center, x) > f.radius);
            }
            coarse = nodes.len();
            if let Some(f) = &cfg.focus {
                let spacing = (m.ball_volume(c, radius) / cfg.nodes as f64).powf(1.0 / m.dim() as f64);
                let keep = radius - 2.0 * cfg.shell_factor * spacing;
                let fine = m.quadrature_ball(&f.center, f.radius, f.nodes)?.points;
                nodes.extend(fine.into_iter().filter(|x| m.distance(c, x) < keep));
            }
            let dist = par::map(nodes.len(), |i| m.distance(c, &nodes[i]));
            (nodes, dist, None)
        }
    };
    let mesh = Discretization::build(&base, nodes, m.ball_volume(c, radius))?;
    // The shell is sized by the coarse spacing; focus nodes come last.
    let edge = mesh.mean_edge_among(&base, coarse);
    // Kernel Laplacians need a full stencil inside the free nodes.
    let layer = if mesh.triangles.is_empty() { mesh.kernel_cutoff().unwrap_or(0.0) } else { 0.0 };
    let shell = (cfg.shell_factor * edge).max(layer);
    let data = par::map(dist.len(), |i| (dist[i] > radius - shell).then(|| boundary(&mesh.nodes[i], dist[i])));
    let mut fixed = Vec::with_capacity(data.len());
    for d in data {
        match d {
            Some(None) => return Err(Error::Failed(format!("boundary data of {label} is undefined on the shell"))),
            Some(v) => fixed.push(v),
            None => fixed.push(None),
        }
    }
    let (values, cg) = solve_dirichlet(&mesh, &fixed, source, cfg.tolerance)?;
    let stats = SolveStats {
        nodes: values.len(),
        boundary_nodes: fixed.iter().filter(|b| b.is_some()).count(),
        shell_width: shell,
        mean_edge: edge,
        iterations: cg.iterations,
        relative_residual: cg.relative_residual,
    };
    let field = match (m.graph(), graph_ids) {
        (Some(g), Some(ids)) => {
            let mut all = vec![f64::NAN; g.len()];
            for (k, &v) in ids.iter().enumerate() {
                all[v as usize] = values[k];
            }
            ScalarField::on_graph(label, m, all)?
        }
        _ => ScalarField::on_mesh(label, Arc::new(mesh), values.clone()),
    };
    Ok(BallSolution { field, stats, values, fixed: fixed.iter().map(Option::is_some).collect() })
}

/// Solves `Δu = source` with `u = boundary[i]` wherever that is set.
///
/// The stiffness matrix approximates `-Δ` weakly, so the free rows read
/// `K u = -source M 1`.
pub fn solve_dirichlet(
    mesh: &Discretization,
    boundary: &[Option<f64>],
    source: f64,
    tolerance: f64,
) -> Result<(Vec<f64>, CgStats)> {
    let n = mesh.nodes.len();
    let mut slot = vec![u32::MAX; n];
    let mut free = Vec::new();
    for i in 0..n {
        if boundary[i].is_none() {
            slot[i] = free.len() as u32;
            free.push(i);
        }
    }
    if free.is_empty() {
        return Err(Error::EmptyRegion("no interior nodes inside the Dirichlet shell".into()));
    }
    let mut trip = Vec::new();
    let mut rhs = vec![0.0; free.len()];
    for (k, &i) in free.iter().enumerate() {
        rhs[k] = -source * mesh.mass[i];
        for (j, v) in mesh.stiffness.row(i) {
            match boundary[j] {
                Some(b) => rhs[k] -= v * b,
                None => trip.push((k as u32, slot[j], v)),
            }
        }
    }
    let a = Csr::from_triplets(free.len(), trip);
    let cap = ((50.0 * (free.len() as f64).sqrt()).ceil() as usize).max(50);
    let (x, stats) = pcg(&a, &rhs, None, tolerance, cap);
    if !stats.converged {
        return Err(Error::NoConvergence { iterations: stats.iterations, residual: stats.relative_residual });
    }
    let mut out: Vec<f64> = boundary.iter().map(|b| b.unwrap_or(0.0)).collect();
    for (k, &i) in free.iter().enumerate() {
        out[i] = x[k];
    }
    Ok((out, stats))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Quadrature nodes per ball on analytic backends.
    pub quadrature: usize,
    /// Finite-difference step relative to the ball radius.
    pub stencil: f64,
    pub fit_neighbors: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig { quadrature: 10_000, stencil: 1e-4, fit_neighbors: 24 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelEstimates {
    pub radius: f64,
    /// Boundary-area deficit `1 - |∂B_r| / (n ω_n r^{n-1})`, clamped at 0.
    pub omega: f64,
    pub omega_raw: f64,
    /// Set when `ω ≥ 1/2`.
    pub omega_flag: bool,
    pub c0_dev: f64,
    pub c0_radius: f64,
    pub grad_dev: f64,
    pub grad_radius: f64,
    /// Mean of `|∇²f - 2g|²`.
    pub hess_dev: f64,
    /// Mean of `|∇²f - 2g|`.
    pub hess_dev_mean: f64,
    pub hess_radius: f64,
    pub evaluated: usize,
    /// Probes dropped near the cut locus of `ρ` or where a fit failed.
    pub excluded: usize,
}

fn ball_points(m: &Manifold, q: &Point, r: f64, count: usize) -> Result<Vec<Point>> {
    if r <= 1e-12 * m.domain_radius() {
        return Ok(vec![q.clone()]);
    }
    Ok(m.quadrature_ball(q, r, count)?.points)
}

/// The three deviation estimates of `f` from `ρ²` on their balls.
pub fn model_function_estimates(m: &Manifold, mf: &ModelFunction, r: f64, cfg: &EstimateConfig) -> Result<ModelEstimates> {
    if r > mf.radius * (1.0 + 1e-12) {
        return Err(Error::config("radius", "estimates must lie inside the solve ball"));
    }
    let q = &mf.center;
    let n = m.dim() as f64;
    let ideal = crate::point::unit_sphere_area(m.dim()) * r.powf(n - 1.0);
    let omega_raw = 1.0 - m.sphere_area(q, r) / ideal;
    let omega = if omega_raw < 1e-12 { 0.0 } else { omega_raw };
    let c0_radius = (1.0 - 2.0 * omega.powf(1.0 / (2.0 * n + 4.0))).max(0.0) * r;
    let hess_radius = (1.0 - omega.powf(1.0 / 32.0)).max(0.0) * r;
    let probe = ProbeConfig { stencil: cfg.stencil * r, fit_neighbors: cfg.fit_neighbors };
    let rho2 = ScalarField::distance_squared(m, q);
    let diff = mf.field.combine(&rho2, "f-rho^2", |a, b| a - b);
    let base = m.base_model();
    let margin = 1.5 * mf.reach(&probe);
    let near_cut = |x: &Point| base.ray_limit(q, x) - base.distance(q, x) < margin;

    let pts = ball_points(m, q, c0_radius, cfg.quadrature)?;
    let c0 = par::map(pts.len(), |i| diff.value(&pts[i]).map(f64::abs));
    let mut excluded = c0.iter().filter(|v| v.is_none()).count();
    let c0_dev = c0.iter().flatten().fold(0.0, |a: f64, &b| a.max(b));

    let pts = ball_points(m, q, r, cfg.quadrature)?;
    let grads = par::map(pts.len(), |i| {
        if near_cut(&pts[i]) {
            return None;
        }
        gradient(m, &diff, &pts[i], &probe).map(|g| norm(&g).powi(2))
    });
    let grad_dev = mean_of(&grads, &mut excluded);

    let pts = ball_points(m, q, hess_radius, cfg.quadrature)?;
    let hess = par::map(pts.len(), |i| {
        if near_cut(&pts[i]) {
            return None;
        }
        hessian_deviation(m, &mf.field, &pts[i], &probe)
    });
    let hess_sq: Vec<Option<f64>> = hess.iter().map(|v| v.map(|v| v * v)).collect();
    let mut dummy = 0;
    let hess_dev_mean = mean_of(&hess, &mut dummy);
    let hess_dev = mean_of(&hess_sq, &mut excluded);

    Ok(ModelEstimates {
        radius: r,
        omega,
        omega_raw,
        omega_flag: omega >= 0.5,
        c0_dev,
        c0_radius,
        grad_dev,
        grad_radius: r,
        hess_dev,
        hess_dev_mean,
        hess_radius,
        evaluated: c0.len() + grads.len() + hess.len(),
        excluded,
    })
}

fn mean_of(v: &[Option<f64>], excluded: &mut usize) -> f64 {
    let kept: Vec<f64> = v.iter().flatten().copied().filter(|x| x.is_finite()).collect();
    *excluded += v.len() - kept.len();
    if kept.is_empty() {
        return 0.0;
    }
    par::sum(kept.len(), |i| kept[i]) / kept.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementStep {
    pub samples: usize,
    pub vertices: usize,
    pub mean_edge: f64,
    /// `sup |f - ρ²|` over the solve nodes, with `ρ` from the base model.
    pub sup_error: f64,
}

/// Model-function error on graph samples of increasing size, measured
/// against the exact base-model `ρ²` about the graph center.
pub fn graph_refinement(
    graph_spec: &crate::manifold::ManifoldSpec,
    samples: &[usize],
    radius: f64,
    seed: u64,
    cfg: &SolveConfig,
) -> Result<Vec<RefinementStep>> {
    samples
        .iter()
        .map(|&count| {
            let spec = crate::manifold::ManifoldSpec { samples: Some(count), ..graph_spec.clone() };
            let m = Manifold::build(&spec, seed)?;
            let g = m.graph().ok_or_else(|| Error::config("kind", "refinement needs a graph backend"))?;
            let q = m.center();
            let mf = solve_model_function(&m, &q, radius, cfg)?;
            let base = m.base_model();
            let vals = mf.field.nodal_values().expect("graph solve is nodal");
            let pts = g.points();
            let errs = par::map(pts.len(), |i| {
                let v = vals[i];
                if v.is_finite() {
                    (v - base.distance(&q, &pts[i]).powi(2)).abs()
                } else {
                    0.0
                }
            });
            Ok(RefinementStep {
                samples: count,
                vertices: g.len(),
                mean_edge: g.mean_edge(),
                sup_error: errs.into_iter().fold(0.0, f64::max),
            })
        })
        .collect()
}
