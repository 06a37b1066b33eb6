//! Scalar fields with derivative probes and integrals.
//!
//! Analytic fields are differentiated by central differences along
//! geodesics: `t -> f(exp_x(t v))` has second derivative `Hess f(v, v)`.
//! Nodal fields (mesh or graph vertex values) are differentiated by weighted
//! least-squares fits over nearby nodes, with offsets taken in the tangent
//! frame at the probe point.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::mesh::Discretization;
use crate::par;
use crate::point::{norm, Coords, Point};

type FieldFn = dyn Fn(&Point) -> Option<f64> + Send + Sync;

#[derive(Clone)]
enum Support {
    Mesh(Arc<Discretization>),
    Graph(Manifold),
}

#[derive(Clone)]
enum Repr {
    Function(Arc<FieldFn>),
    Nodal { support: Support, values: Arc<Vec<f64>> },
}

/// A real-valued field on a backend.
#[derive(Clone)]
pub struct ScalarField {
    label: String,
    repr: Repr,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField").field("label", &self.label).finish()
    }
}

impl ScalarField {
    pub fn from_fn(label: impl Into<String>, f: impl Fn(&Point) -> Option<f64> + Send + Sync + 'static) -> Self {
        ScalarField { label: label.into(), repr: Repr::Function(Arc::new(f)) }
    }

    pub fn on_mesh(label: impl Into<String>, mesh: Arc<Discretization>, values: Vec<f64>) -> Self {
        assert_eq!(mesh.nodes.len(), values.len(), "one value per mesh node");
        ScalarField { label: label.into(), repr: Repr::Nodal { support: Support::Mesh(mesh), values: Arc::new(values) } }
    }

    /// Field given by one value per graph vertex.
    pub fn on_graph(label: impl Into<String>, m: &Manifold, values: Vec<f64>) -> Result<Self> {
        let g = m.graph().ok_or_else(|| Error::Failed("graph field on an analytic backend".into()))?;
        if g.len() != values.len() {
            return Err(Error::Failed("one value per graph vertex required".into()));
        }
        Ok(ScalarField {
            label: label.into(),
            repr: Repr::Nodal { support: Support::Graph(m.clone()), values: Arc::new(values) },
        })
    }

    /// `x -> d(q, x)`.
    pub fn distance(m: &Manifold, q: &Point) -> Self {
        let label = "rho";
        if let Some(g) = m.graph() {
            let sp = g.paths(g.vertex_of(q));
            return Self::on_graph(label, m, sp.dist.clone()).expect("sizes match");
        }
        let (m, q) = (m.clone(), q.clone());
        Self::from_fn(label, move |x| Some(m.distance(&q, x)))
    }

    /// `x -> d(q, x)^2`.
    pub fn distance_squared(m: &Manifold, q: &Point) -> Self {
        Self::distance(m, q).map("rho^2", |v| v * v)
    }

    /// Samples `g` at quasi-uniform nodes of `B_r(c)` and interpolates
    /// linearly between them. Undefined samples stay undefined.
    pub fn tabulate(
        m: &Manifold,
        label: impl Into<String>,
        c: &Point,
        r: f64,
        nodes: usize,
        g: impl Fn(&Point) -> Option<f64> + Sync,
    ) -> Result<Self> {
        let base = m.base_model();
        let q = m.quadrature_ball(c, r, nodes)?;
        let values = par::map(q.points.len(), |i| g(&q.points[i]).unwrap_or(f64::NAN));
        let volume = q.total_weight();
        let mesh = Discretization::build(&base, q.points, volume)?;
        Ok(Self::on_mesh(label, Arc::new(mesh), values))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_nodal(&self) -> bool {
        matches!(self.repr, Repr::Nodal { .. })
    }

    pub fn value(&self, x: &Point) -> Option<f64> {
        match &self.repr {
            Repr::Function(f) => f(x),
            Repr::Nodal { support: Support::Mesh(mesh), values } => {
                mesh.interpolate(values, &x.coords).filter(|v| v.is_finite())
            }
            Repr::Nodal { support: Support::Graph(m), values } => {
                let g = m.graph().expect("graph support");
                let v = values[g.vertex_of(x) as usize];
                v.is_finite().then_some(v)
            }
        }
    }

    /// Nodal values, when the field is nodal.
    pub fn nodal_values(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Nodal { values, .. } => Some(values),
            Repr::Function(_) => None,
        }
    }

    pub fn map(&self, label: impl Into<String>, op: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        match &self.repr {
            Repr::Function(f) => {
                let f = f.clone();
                Self::from_fn(label, move |x| f(x).map(&op))
            }
            Repr::Nodal { support, values } => ScalarField {
                label: label.into(),
                repr: Repr::Nodal { support: support.clone(), values: Arc::new(values.iter().map(|&v| op(v)).collect()) },
            },
        }
    }

    /// Pointwise combination; nodal structure is kept when either side has it.
    pub fn combine(
        &self,
        other: &ScalarField,
        label: impl Into<String>,
        op: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        match (&self.repr, &other.repr) {
            (Repr::Nodal { support, values }, _) => {
                let nodes = self.node_points();
                let vals = par::map(values.len(), |i| other.value(&nodes[i]).map_or(f64::NAN, |o| op(values[i], o)));
                ScalarField { label: label.into(), repr: Repr::Nodal { support: support.clone(), values: Arc::new(vals) } }
            }
            (Repr::Function(_), Repr::Nodal { support, values }) => {
                let nodes = other.node_points();
                let vals = par::map(values.len(), |i| self.value(&nodes[i]).map_or(f64::NAN, |s| op(s, values[i])));
                ScalarField { label: label.into(), repr: Repr::Nodal { support: support.clone(), values: Arc::new(vals) } }
            }
            (Repr::Function(f), Repr::Function(g)) => {
                let (f, g) = (f.clone(), g.clone());
                Self::from_fn(label, move |x| Some(op(f(x)?, g(x)?)))
            }
        }
    }

    fn node_points(&self) -> Vec<Point> {
        match &self.repr {
            Repr::Nodal { support: Support::Mesh(mesh), .. } => mesh.nodes.clone(),
            Repr::Nodal { support: Support::Graph(m), .. } => m.graph().expect("graph").points().to_vec(),
            Repr::Function(_) => Vec::new(),
        }
    }

    /// Nearby nodes used for least-squares fits, ordered by distance.
    fn fit_nodes(&self, m: &Manifold, x: &Point, k: usize) -> Option<Vec<(Point, f64)>> {
        match &self.repr {
            Repr::Nodal { support: Support::Mesh(mesh), values } => Some(
                mesh.index()
                    .k_nearest(&x.coords, k)
                    .into_iter()
                    .map(|i| (mesh.nodes[i as usize].clone(), values[i as usize]))
                    .collect(),
            ),
            Repr::Nodal { support: Support::Graph(gm), values } => {
                let g = gm.graph().expect("graph");
                Some(g.k_nearest(&x.coords, k).into_iter().map(|i| (g.vertex_point(i), values[i as usize])).collect())
            }
            Repr::Function(f) => {
                let g = m.graph()?;
                Some(
                    g.k_nearest(&x.coords, k)
                        .into_iter()
                        .filter_map(|i| {
                            let p = g.vertex_point(i);
                            f(&p).map(|v| (p, v))
                        })
                        .collect(),
                )
            }
        }
    }
}

/// Derivative probe settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct ProbeConfig {
    /// Central-difference step for analytic fields.
    pub stencil: f64,
    /// Neighbours used by least-squares fits on nodal fields.
    pub fit_neighbors: usize,
}

impl ProbeConfig {
    pub fn with_stencil(stencil: f64) -> Self {
        ProbeConfig { stencil, fit_neighbors: 24 }
    }
}

/// Value and derivatives at a point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldProbe {
    pub point: Point,
    pub value: Option<f64>,
    pub gradient: Option<Coords>,
    /// Row-major `n x n` Hessian.
    pub hessian: Option<Vec<f64>>,
}

pub fn probe(m: &Manifold, f: &ScalarField, x: &Point, cfg: &ProbeConfig) -> FieldProbe {
    FieldProbe { point: x.clone(), value: f.value(x), gradient: gradient(m, f, x, cfg), hessian: hessian(m, f, x, cfg) }
}

fn unit(n: usize, i: usize, t: f64) -> Coords {
    let mut v = Coords::from_elem(0.0, n);
    v[i] = t;
    v
}

fn along(m: &Manifold, f: &ScalarField, x: &Point, v: &[f64]) -> Option<f64> {
    f.value(&m.exp(x, v)?)
}

fn uses_fit(m: &Manifold, f: &ScalarField) -> bool {
    f.is_nodal() || m.is_graph()
}

pub fn gradient(m: &Manifold, f: &ScalarField, x: &Point, cfg: &ProbeConfig) -> Option<Coords> {
    if uses_fit(m, f) {
        return fit(m, f, x, cfg, false).map(|(g, _)| g);
    }
    let n = m.dim();
    let h = cfg.stencil;
    (0..n)
        .map(|i| Some((along(m, f, x, &unit(n, i, h))? - along(m, f, x, &unit(n, i, -h))?) / (2.0 * h)))
        .collect()
}

pub fn hessian(m: &Manifold, f: &ScalarField, x: &Point, cfg: &ProbeConfig) -> Option<Vec<f64>> {
    if uses_fit(m, f) {
        return fit(m, f, x, cfg, true).and_then(|(_, h)| h);
    }
    let n = m.dim();
    let h = cfg.stencil;
    let f0 = f.value(x)?;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let fp = along(m, f, x, &unit(n, i, h))?;
        let fm = along(m, f, x, &unit(n, i, -h))?;
        out[i * n + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..n {
            let mut v = Coords::from_elem(0.0, n);
            let mut val = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                v[i] = si * h;
                v[j] = sj * h;
                val += sign * along(m, f, x, &v)?;
            }
            let hij = val / (4.0 * h * h);
            out[i * n + j] = hij;
            out[j * n + i] = hij;
        }
    }
    Some(out)
}

/// Weighted least-squares fit; returns the gradient and (for quadratic fits) the Hessian.
fn fit(m: &Manifold, f: &ScalarField, x: &Point, cfg: &ProbeConfig, quadratic: bool) -> Option<(Coords, Option<Vec<f64>>)> {
    let n = m.dim();
    let nq = if quadratic { n * (n + 1) / 2 } else { 0 };
    let p = 1 + n + nq;
    let k = cfg.fit_neighbors.max(2 * p);
    let nodes = f.fit_nodes(m, x, k)?;
    let rows: Vec<(Coords, f64)> = nodes
        .into_iter()
        .filter(|(_, v)| v.is_finite())
        .map(|(pt, v)| (m.log(x, &pt), v))
        .collect();
    if rows.len() < p + 1 {
        return None;
    }
    let h = rows.iter().map(|(o, _)| norm(o)).fold(0.0, f64::max).max(1e-300);
    let mut a = DMatrix::<f64>::zeros(rows.len(), p);
    let mut b = DVector::<f64>::zeros(rows.len());
    for (r, (o, v)) in rows.iter().enumerate() {
        let d = norm(o) / h;
        let w = (-d * d).exp().sqrt();
        a[(r, 0)] = w;
        for i in 0..n {
            a[(r, 1 + i)] = w * o[i] / h;
        }
        if quadratic {
            let mut c = 1 + n;
            for i in 0..n {
                for j in i..n {
                    let s = if i == j { 0.5 } else { 1.0 };
                    a[(r, c)] = w * s * o[i] * o[j] / (h * h);
                    c += 1;
                }
            }
        }
        b[r] = w * v;
    }
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let grad: Coords = (0..n).map(|i| sol[1 + i] / h).collect();
    let hess = quadratic.then(|| {
        let mut out = vec![0.0; n * n];
        let mut c = 1 + n;
        for i in 0..n {
            for j in i..n {
                out[i * n + j] = sol[c] / (h * h);
                out[j * n + i] = sol[c] / (h * h);
                c += 1;
            }
        }
        out
    });
    Some((grad, hess))
}

/// `|Hess f(x) - 2 g|` in the Frobenius norm.
pub fn hessian_deviation(m: &Manifold, f: &ScalarField, x: &Point, cfg: &ProbeConfig) -> Option<f64> {
    let n = m.dim();
    let h = hessian(m, f, x, cfg)?;
    Some(
        (0..n * n)
            .map(|k| {
                let id = if k / n == k % n { 2.0 } else { 0.0 };
                (h[k] - id).powi(2)
            })
            .sum::<f64>()
            .sqrt(),
    )
}

/// Trapezoid integral of `g` along the chosen segment from `x` to `y`.
pub fn line_integral_with(
    m: &Manifold,
    x: &Point,
    y: &Point,
    nodes: usize,
    g: impl Fn(&Point) -> Option<f64>,
) -> Option<f64> {
    let len = m.distance(x, y);
    if len == 0.0 {
        return Some(0.0);
    }
    let k = nodes.max(2);
    let mut s = 0.0;
    for i in 0..k {
        let t = i as f64 / (k - 1) as f64;
        let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
        s += w * g(&m.interpolate(x, y, t))?;
    }
    Some(s * len / (k - 1) as f64)
}

/// Line integral of a field along a segment with 101 nodes.
pub fn line_integral(m: &Manifold, f: &ScalarField, x: &Point, y: &Point) -> Option<f64> {
    line_integral_with(m, x, y, 101, |p| f.value(p))
}

/// Average of `g` over `B_r(c)`; points where `g` is undefined are skipped.
pub fn mean_with(
    m: &Manifold,
    c: &Point,
    r: f64,
    count: usize,
    g: impl Fn(&Point) -> Option<f64> + Sync + Send,
) -> Result<MeanEstimate> {
    let q = m.quadrature_ball(c, r, count)?;
    let vals = par::map(q.points.len(), |i| g(&q.points[i]));
    let mut total = 0.0;
    let mut weight = 0.0;
    let mut excluded = 0;
    for (v, w) in vals.iter().zip(&q.weights) {
        match v {
            Some(v) if v.is_finite() => {
                total += v * w;
                weight += w;
            }
            _ => excluded += 1,
        }
    }
    if weight == 0.0 {
        return Err(Error::EmptyRegion("no quadrature node carried a value".into()));
    }
    Ok(MeanEstimate { mean: total / weight, nodes: q.points.len(), excluded })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub nodes: usize,
    pub excluded: usize,
}

/// Mean value of a field over `B_r(c)`.
pub fn mean_integral(m: &Manifold, f: &ScalarField, c: &Point, r: f64, count: usize) -> Result<f64> {
    mean_with(m, c, r, count, |p| f.value(p)).map(|e| e.mean)
}
