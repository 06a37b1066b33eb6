//! Metric-measure backends.
//!
//! Every backend works in chart coordinates around a distinguished center
//! point: the origin of Euclidean space, the apex of a flat cone, the pole of
//! a sphere cap. Tangent vectors are expressed in a provider-defined
//! orthonormal frame at each point; `exp` and `log` use the same frame.

mod cone;
mod euclidean;
mod graph;
mod sphere;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{norm, scale, unit_ball_volume, Coords, Point};
use crate::rng;

pub use graph::GraphStats;

/// Relative tolerance for declaring two competing geodesics tied.
pub const TIE_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Euclidean,
    Cone,
    SphereCap,
    GraphSample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphDomain {
    #[default]
    Ball,
    Segment,
}

/// Backend description, as read from a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub dim: usize,
    /// Geodesic radius of the domain around the center point.
    pub domain_radius: f64,
    /// Cone angle fraction; the cone has total angle `2 pi alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Radius of the round sphere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sphere_radius: Option<f64>,
    /// Analytic model sampled by a graph backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<ManifoldKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Connectivity radius as a multiple of `density^(-1/n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_domain: Option<GraphDomain>,
}

impl ManifoldSpec {
    pub fn euclidean(dim: usize, domain_radius: f64) -> Self {
        ManifoldSpec {
            kind: ManifoldKind::Euclidean,
            dim,
            domain_radius,
            alpha: None,
            sphere_radius: None,
            base: None,
            samples: None,
            connectivity_factor: None,
            graph_domain: None,
        }
    }

    pub fn cone(dim: usize, alpha: f64, domain_radius: f64) -> Self {
        ManifoldSpec { kind: ManifoldKind::Cone, alpha: Some(alpha), ..Self::euclidean(dim, domain_radius) }
    }

    pub fn sphere_cap(dim: usize, sphere_radius: f64, domain_radius: f64) -> Self {
        ManifoldSpec {
            kind: ManifoldKind::SphereCap,
            sphere_radius: Some(sphere_radius),
            ..Self::euclidean(dim, domain_radius)
        }
    }

    /// Graph sampled from `base` with `samples` vertices.
    pub fn graph(base: ManifoldSpec, samples: usize) -> Self {
        ManifoldSpec {
            kind: ManifoldKind::GraphSample,
            base: Some(base.kind),
            samples: Some(samples),
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.dim > 6 {
            return Err(Error::config("manifold.dim", "must be between 2 and 6"));
        }
        if !(self.domain_radius.is_finite() && self.domain_radius > 0.0) {
            return Err(Error::config("manifold.domain_radius", "must be positive and finite"));
        }
        let base_kind = match self.kind {
            ManifoldKind::GraphSample => {
                let b = self
                    .base
                    .ok_or_else(|| Error::config("manifold.base", "required for graph-sample"))?;
                if b == ManifoldKind::GraphSample {
                    return Err(Error::config("manifold.base", "must be an analytic kind"));
                }
                match self.samples {
                    Some(s) if s >= 16 => {}
                    _ => return Err(Error::config("manifold.samples", "at least 16 samples required")),
                }
                if let Some(f) = self.connectivity_factor {
                    if !(f.is_finite() && f > 0.0) {
                        return Err(Error::config("manifold.connectivity_factor", "must be positive"));
                    }
                }
                b
            }
            k => k,
        };
        match base_kind {
            ManifoldKind::Cone => match self.alpha {
                Some(a) if a > 0.5 && a <= 1.0 => {}
                Some(_) => return Err(Error::config("manifold.alpha", "must lie in (0.5, 1]")),
                None => return Err(Error::config("manifold.alpha", "required for cone")),
            },
            ManifoldKind::SphereCap => match self.sphere_radius {
                Some(r) if r > 0.0 && r.is_finite() => {
                    if self.domain_radius >= std::f64::consts::PI * r {
                        return Err(Error::config(
                            "manifold.domain_radius",
                            "cap must stay below the antipode (domain_radius < pi * sphere_radius)",
                        ));
                    }
                }
                _ => return Err(Error::config("manifold.sphere_radius", "required and positive for sphere-cap")),
            },
            _ => {}
        }
        Ok(())
    }
}

/// Analytic geometry in chart coordinates.
pub(crate) trait Geometry: Send + Sync {
    fn dim(&self) -> usize;
    fn center(&self) -> Point {
        Point::origin(self.dim())
    }
    fn distance(&self, x: &Point, y: &Point) -> f64 {
        norm(&self.log(x, y))
    }
    /// Initial velocity of the chosen segment from `x` to `y`, with length `d(x, y)`.
    fn log(&self, x: &Point, y: &Point) -> Coords;
    fn exp(&self, x: &Point, v: &[f64]) -> Point;
    fn segment_unique(&self, x: &Point, y: &Point) -> bool;
    /// Length up to which the ray from `q` through `x` stays minimizing.
    fn ray_limit(&self, q: &Point, x: &Point) -> f64;
    fn ball_volume(&self, c: &Point, r: f64) -> f64;
    fn sphere_area(&self, c: &Point, r: f64) -> f64;
    /// Maps `dim + 1` uniforms to a volume-uniform point of `B_r(c)`, or rejects.
    fn ball_point(&self, c: &Point, r: f64, u: &[f64]) -> Option<Point>;
    fn chart_valid(&self, coords: &[f64]) -> bool;
    /// Whether geodesic balls about `q` are rotationally symmetric.
    fn radial_about(&self, q: &Point) -> bool;
    /// Upper bound on chart distance over intrinsic distance.
    fn chart_stretch(&self) -> f64;
}

/// A chosen minimizing geodesic between two points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicSegment {
    pub start: Point,
    pub end: Point,
    pub length: f64,
    pub unique: bool,
    pub waypoints: Vec<Point>,
}

/// Result of extending the ray from `q` through `x` to a target radius.
#[derive(Clone, Debug, PartialEq)]
pub struct Extension {
    pub point: Option<Point>,
    pub well_defined: bool,
    /// Length up to which the ray stays minimizing.
    pub ray_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitVectorSample {
    pub base: Point,
    pub direction: Coords,
}

/// Equal-weight quadrature over a ball.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

enum Inner {
    Analytic(Box<dyn Geometry>),
    Graph(Box<graph::GraphSample>),
}

/// A metric-measure backend. Cloning is cheap and shares the backend.
#[derive(Clone)]
pub struct Manifold {
    spec: Arc<ManifoldSpec>,
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Manifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Manifold").field("spec", &self.spec).finish()
    }
}

fn analytic_geometry(kind: ManifoldKind, spec: &ManifoldSpec) -> Box<dyn Geometry> {
    match kind {
        ManifoldKind::Euclidean => Box::new(euclidean::Euclidean::new(spec.dim)),
        ManifoldKind::Cone => Box::new(cone::Cone::new(spec.dim, spec.alpha.expect("validated"))),
        ManifoldKind::SphereCap => Box::new(sphere::SphereCap::new(
            spec.dim,
            spec.sphere_radius.expect("validated"),
            spec.domain_radius,
        )),
        ManifoldKind::GraphSample => unreachable!("graph base is analytic"),
    }
}

impl Manifold {
    /// Builds a backend. `seed` drives graph sampling only.
    pub fn build(spec: &ManifoldSpec, seed: u64) -> Result<Manifold> {
        spec.validate()?;
        let inner = match spec.kind {
            ManifoldKind::GraphSample => {
                let base = analytic_geometry(spec.base.expect("validated"), spec);
                Inner::Graph(Box::new(graph::GraphSample::build(base, spec, seed)?))
            }
            k => Inner::Analytic(analytic_geometry(k, spec)),
        };
        Ok(Manifold { spec: Arc::new(spec.clone()), inner: Arc::new(inner) })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn is_graph(&self) -> bool {
        matches!(self.inner.as_ref(), Inner::Graph(_))
    }

    pub fn graph_stats(&self) -> Option<GraphStats> {
        match self.inner.as_ref() {
            Inner::Graph(g) => Some(g.stats()),
            Inner::Analytic(_) => None,
        }
    }

    /// Analytic geometry (the base model for graph backends).
    pub(crate) fn geometry(&self) -> &dyn Geometry {
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.as_ref(),
            Inner::Graph(g) => g.base(),
        }
    }

    pub(crate) fn graph(&self) -> Option<&graph::GraphSample> {
        match self.inner.as_ref() {
            Inner::Graph(g) => Some(g),
            Inner::Analytic(_) => None,
        }
    }

    /// The analytic model a graph backend samples; `self` for analytic backends.
    pub fn base_model(&self) -> Manifold {
        let Some(base) = self.spec.base.filter(|_| self.is_graph()) else {
            return self.clone();
        };
        let spec = ManifoldSpec {
            kind: base,
            base: None,
            samples: None,
            connectivity_factor: None,
            graph_domain: None,
            ..(*self.spec).clone()
        };
        Manifold::build(&spec, 0).expect("base of a validated graph spec")
    }

    pub fn domain_radius(&self) -> f64 {
        self.spec.domain_radius
    }

    /// Center of the chart (apex, pole, origin); a vertex on graph backends.
    pub fn center(&self) -> Point {
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.center(),
            Inner::Graph(g) => g.vertex_point(0),
        }
    }

    /// Resolves chart coordinates to a point of the space.
    pub fn locate(&self, coords: &[f64]) -> Option<Point> {
        if coords.len() != self.dim() {
            return None;
        }
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.chart_valid(coords).then(|| Point::new(coords)),
            Inner::Graph(g) => g.nearest(coords).map(|v| g.vertex_point(v)),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        let g = self.geometry();
        if !g.chart_valid(&x.coords) {
            return false;
        }
        g.distance(&g.center(), x) <= self.spec.domain_radius * (1.0 + 1e-9)
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.distance(x, y),
            Inner::Graph(g) => g.distance(x, y),
        }
    }

    pub fn segment_unique(&self, x: &Point, y: &Point) -> bool {
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.segment_unique(x, y),
            Inner::Graph(g) => g.path_unique(x, y),
        }
    }

    /// Point at fraction `t` along the chosen segment from `x` to `y`.
    pub fn interpolate(&self, x: &Point, y: &Point, t: f64) -> Point {
        match self.inner.as_ref() {
            Inner::Analytic(g) => {
                let v = g.log(x, y);
                g.exp(x, &scale(&v, t))
            }
            Inner::Graph(g) => g.interpolate(x, y, t),
        }
    }

    /// Chosen segment with waypoints spaced at most 1% of its length.
    pub fn segment(&self, x: &Point, y: &Point) -> Result<GeodesicSegment> {
        if !self.contains(x) || !self.contains(y) {
            return Err(Error::OutsideDomain);
        }
        let length = self.distance(x, y);
        let unique = self.segment_unique(x, y);
        let waypoints = match self.inner.as_ref() {
            Inner::Analytic(_) => (0..=100).map(|i| self.interpolate(x, y, i as f64 / 100.0)).collect(),
            Inner::Graph(g) => g.path(x, y),
        };
        Ok(GeodesicSegment { start: x.clone(), end: y.clone(), length, unique, waypoints })
    }

    /// Tangent offset of `y` seen from `x` in the frame at `x`.
    pub fn log(&self, x: &Point, y: &Point) -> Coords {
        self.geometry().log(x, y)
    }

    pub fn exp(&self, x: &Point, v: &[f64]) -> Option<Point> {
        match self.inner.as_ref() {
            Inner::Analytic(g) => {
                let p = g.exp(x, v);
                g.chart_valid(&p.coords).then_some(p)
            }
            Inner::Graph(g) => g.exp(x, v),
        }
    }

    /// Extends the ray from `q` through `x` to distance `target` from `q`.
    pub fn extend(&self, q: &Point, x: &Point, target: f64) -> Extension {
        match self.inner.as_ref() {
            Inner::Analytic(g) => {
                let v = g.log(q, x);
                let len = norm(&v);
                if len == 0.0 {
                    return Extension { point: None, well_defined: false, ray_limit: 0.0 };
                }
                let limit = g.ray_limit(q, x);
                let p = g.exp(q, &scale(&v, target / len));
                let inside = g.chart_valid(&p.coords) && self.contains(&p);
                let ok = g.segment_unique(q, x) && target < limit * (1.0 - 1e-12) && inside;
                Extension { point: inside.then_some(p), well_defined: ok, ray_limit: limit }
            }
            Inner::Graph(g) => g.extend(q, x, target),
        }
    }

    /// Length up to which the ray from `q` through `x` stays minimizing.
    pub fn ray_limit(&self, q: &Point, x: &Point) -> f64 {
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.ray_limit(q, x),
            Inner::Graph(g) => g.ray_limit(q, x),
        }
    }

    pub fn ball_volume(&self, c: &Point, r: f64) -> f64 {
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.ball_volume(c, r),
            Inner::Graph(g) => g.ball_volume(c, r),
        }
    }

    pub fn sphere_area(&self, c: &Point, r: f64) -> f64 {
        match self.inner.as_ref() {
            Inner::Analytic(g) => g.sphere_area(c, r),
            Inner::Graph(g) => g.sphere_area(c, r),
        }
    }

    /// `V(B_r(c)) / (omega_n r^n)`.
    pub fn volume_ratio(&self, c: &Point, r: f64) -> f64 {
        self.ball_volume(c, r) / (unit_ball_volume(self.dim()) * r.powi(self.dim() as i32))
    }

    /// Whether geodesic balls about `q` are rotationally symmetric.
    pub fn radial_about(&self, q: &Point) -> bool {
        !self.is_graph() && self.geometry().radial_about(q)
    }

    /// Volume-uniform random points of `B_r(c)`.
    pub fn sample_ball(&self, c: &Point, r: f64, count: usize, seed: u64, tag: &str) -> Result<Vec<Point>> {
        match self.inner.as_ref() {
            Inner::Analytic(g) => {
                use rand::Rng as _;
                let mut rng = rng::stream(seed, tag, 0);
                let mut next = move |buf: &mut [f64]| {
                    for b in buf.iter_mut() {
                        *b = rng.gen();
                    }
                };
                analytic_points(g.as_ref(), c, r, count, &mut next)
            }
            Inner::Graph(g) => g.sample_ball(c, r, count, seed, tag),
        }
    }

    /// Deterministic quasi-uniform quadrature of `B_r(c)` with about `count` nodes.
    pub fn quadrature_ball(&self, c: &Point, r: f64, count: usize) -> Result<Quadrature> {
        match self.inner.as_ref() {
            Inner::Analytic(g) => {
                let dim = self.dim() + 1;
                let mut k = 0u64;
                let mut next = move |buf: &mut [f64]| {
                    rng::halton(k, dim, buf);
                    k += 1;
                };
                let points = analytic_points(g.as_ref(), c, r, count, &mut next)?;
                let w = g.ball_volume(c, r) / points.len() as f64;
                Ok(Quadrature { weights: vec![w; points.len()], points })
            }
            Inner::Graph(g) => g.quadrature_ball(c, r),
        }
    }

    /// Unit tangent vectors based at volume-uniform points of `B_r(c)`.
    pub fn sample_unit_bundle(&self, c: &Point, r: f64, count: usize, seed: u64) -> Result<Vec<UnitVectorSample>> {
        let bases = self.sample_ball(c, r, count, seed, "bundle-base")?;
        let mut rng = rng::stream(seed, "bundle-direction", 0);
        let n = self.dim();
        let mut out = Vec::with_capacity(count);
        for base in bases {
            let direction = match self.inner.as_ref() {
                Inner::Graph(g) => g.random_direction(&base, &mut rng),
                Inner::Analytic(_) => random_unit(n, &mut rng),
            };
            out.push(UnitVectorSample { base, direction });
        }
        Ok(out)
    }

    /// Point reached by flowing the sample's geodesic for time `s`.
    pub fn geodesic_flow(&self, sample: &UnitVectorSample, s: f64) -> Option<Point> {
        self.exp(&sample.base, &scale(&sample.direction, s))
    }
}

pub(crate) fn random_unit(n: usize, rng: &mut rng::Rng) -> Coords {
    loop {
        let v: Coords = (0..n).map(|_| rng::normal(rng)).collect();
        let l = norm(&v);
        if l > 1e-12 {
            return scale(&v, 1.0 / l);
        }
    }
}

fn analytic_points(
    g: &dyn Geometry,
    c: &Point,
    r: f64,
    count: usize,
    next: &mut dyn FnMut(&mut [f64]),
) -> Result<Vec<Point>> {
    if !(r > 0.0) || count == 0 {
        return Err(Error::EmptyRegion(format!("ball of radius {r} with {count} points")));
    }
    let mut u = vec![0.0; g.dim() + 1];
    let mut out = Vec::with_capacity(count);
    let max_trials = count.saturating_mul(2000).max(10_000);
    let mut trials = 0;
    while out.len() < count {
        trials += 1;
        if trials > max_trials {
            return Err(Error::EmptyRegion("rejection sampling exhausted".into()));
        }
        next(&mut u);
        if let Some(p) = g.ball_point(c, r, &u) {
            out.push(p);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
