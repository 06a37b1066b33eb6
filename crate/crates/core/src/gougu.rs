//! Projections to distance spheres and the almost Gou-Gu defect.
//!
//! For a base point `q` and target radius `t`, `π(x)` is where the ray from
//! `q` through `x` meets `∂B_t(q)`. It is well defined when that ray is a
//! minimizing segment up to `max(ρ(x), t)`. The defect of a pair compares
//! `d(x,y)²` with `(ρ(x) - ρ(y))² + d(π(x), π(y))²`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{line_integral_with, ScalarField};
use crate::manifold::Manifold;
use crate::par;
use crate::point::Point;
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Projection {
    pub source: Point,
    pub base: Point,
    pub target_radius: f64,
    /// `ρ(x) = d(q, x)`.
    pub rho: f64,
    pub image: Option<Point>,
    pub well_defined: bool,
    /// Length up to which the ray from `q` through `x` minimizes.
    pub ray_limit: f64,
}

impl Projection {
    /// Length of `σ_x`, the segment from `π(x)` to `x`.
    pub fn sigma_length(&self) -> f64 {
        (self.rho - self.target_radius).abs()
    }

    /// `σ_x(s)` at `s = frac · |ρ(x) - t|`.
    pub fn sigma(&self, m: &Manifold, frac: f64) -> Option<Point> {
        let img = self.image.as_ref()?;
        Some(m.interpolate(img, &self.source, frac))
    }
}

/// `π(x)` for the sphere of radius `target` about `q`.
pub fn project(m: &Manifold, q: &Point, target: f64, x: &Point) -> Result<Projection> {
    let rho = m.distance(q, x);
    if rho <= 1e-12 * m.domain_radius() {
        return Err(Error::Geometry("projection of the base point itself".into()));
    }
    let ext = m.extend(q, x, target);
    let well_defined = ext.well_defined && ext.point.is_some() && rho < ext.ray_limit;
    Ok(Projection {
        source: x.clone(),
        base: q.clone(),
        target_radius: target,
        rho,
        image: ext.point.filter(|_| well_defined),
        well_defined,
        ray_limit: ext.ray_limit,
    })
}

/// Defect from two precomputed projections; `None` when either is undefined.
pub fn defect_of(m: &Manifold, px: &Projection, py: &Projection) -> Option<f64> {
    let (ix, iy) = (px.image.as_ref()?, py.image.as_ref()?);
    let d = m.distance(&px.source, &py.source);
    let dpi = m.distance(ix, iy);
    Some((d * d - (px.rho - py.rho).powi(2) - dpi * dpi).abs())
}

/// `|d(x,y)² - (ρ(x) - ρ(y))² - d(π(x), π(y))²|`, or `None` if `x` or `y` is in the bad set.
pub fn gougu_defect(m: &Manifold, q: &Point, target: f64, x: &Point, y: &Point) -> Result<Option<f64>> {
    let px = project(m, q, target, x)?;
    let py = project(m, q, target, y)?;
    Ok(defect_of(m, &px, &py))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadSetMeasure {
    pub samples: usize,
    /// Fraction of the ball where `π` is not well defined.
    pub strict_fraction: f64,
    /// Fraction whose ray from `q` stops minimizing before `3 t`.
    pub shadow_fraction: f64,
    pub strict_standard_error: f64,
    pub shadow_standard_error: f64,
}

/// Volume fractions of the bad set of `q` inside `B_radius(center)`.
pub fn bad_set_measure(
    m: &Manifold,
    q: &Point,
    target: f64,
    center: &Point,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<BadSetMeasure> {
    let pts = m.sample_ball(center, radius, samples, seed, "bad-set")?;
    let flags = par::map(pts.len(), |i| match project(m, q, target, &pts[i]) {
        Ok(p) => (!p.well_defined, p.ray_limit < 3.0 * target),
        Err(_) => (true, true),
    });
    let n = pts.len() as f64;
    let strict = flags.iter().filter(|f| f.0).count() as f64 / n;
    let shadow = flags.iter().filter(|f| f.1).count() as f64 / n;
    let se = |p: f64| (p * (1.0 - p) / n).sqrt();
    Ok(BadSetMeasure {
        samples: pts.len(),
        strict_fraction: strict,
        shadow_fraction: shadow,
        strict_standard_error: se(strict),
        shadow_standard_error: se(shadow),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SegmentInequality {
    pub pairs: usize,
    /// `∫∫ (∫_γ h) dy₁ dy₂` over `B_r × B_r`.
    pub lhs: f64,
    pub lhs_standard_error: f64,
    /// `2^{n+1} r V(B_r) ∫_{B_2r} h`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Quadrature settings for the line and double integrals of this module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegralConfig {
    /// Trapezoid nodes along a segment.
    pub line_nodes: usize,
    /// Nodes in the outer parameter of the pair integral.
    pub outer_nodes: usize,
    /// Sampled partners per anchor for T-sets.
    pub partners: usize,
    /// Quadrature nodes for ball means.
    pub quadrature: usize,
}

impl Default for IntegralConfig {
    fn default() -> Self {
        IntegralConfig { line_nodes: 33, outer_nodes: 9, partners: 256, quadrature: 10_000 }
    }
}

/// Monte-Carlo check of the segment inequality for `h ≥ 0` on `B_r(q)`.
pub fn segment_inequality_check(
    m: &Manifold,
    q: &Point,
    r: f64,
    h: &ScalarField,
    pairs: usize,
    seed: u64,
    cfg: &IntegralConfig,
) -> Result<SegmentInequality> {
    let big = m.quadrature_ball(q, 2.0 * r, cfg.quadrature)?;
    let hv = par::map(big.points.len(), |i| h.value(&big.points[i]));
    let mut total = 0.0;
    for (v, w) in hv.iter().zip(&big.weights) {
        match v {
            Some(v) if *v < 0.0 => return Err(Error::config("h", "must be nonnegative")),
            Some(v) => total += v * w,
            None => return Err(Error::EmptyRegion("h undefined on B_2r".into())),
        }
    }
    let a = m.sample_ball(q, r, pairs, seed, "segment-a")?;
    let b = m.sample_ball(q, r, pairs, seed, "segment-b")?;
    let vals = par::map(pairs, |i| {
        line_integral_with(m, &a[i], &b[i], cfg.line_nodes, |p| h.value(p)).ok_or(())
    });
    let vals: Vec<f64> = vals
        .into_iter()
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::EmptyRegion("h undefined along a segment".into()))?;
    let k = vals.len() as f64;
    let mean = par::sum(vals.len(), |i| vals[i]) / k;
    let var = par::sum(vals.len(), |i| (vals[i] - mean).powi(2)) / (k - 1.0).max(1.0);
    let vol = m.ball_volume(q, r);
    let lhs = vol * vol * mean;
    let rhs = 2f64.powi(m.dim() as i32 + 1) * r * vol * total;
    Ok(SegmentInequality {
        pairs,
        lhs,
        lhs_standard_error: vol * vol * (var / k).sqrt(),
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

/// `∫_0^{|ρ(x) - t|} h(σ_x(s)) ds`, by the trapezoid rule.
pub fn q_integral(m: &Manifold, px: &Projection, h: &ScalarField, nodes: usize) -> Option<f64> {
    let len = px.sigma_length();
    if len == 0.0 {
        return Some(0.0);
    }
    px.image.as_ref()?;
    let k = nodes.max(2);
    let mut s = 0.0;
    for i in 0..k {
        let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
        s += w * h.value(&px.sigma(m, i as f64 / (k - 1) as f64)?)?;
    }
    Some(s * len / (k - 1) as f64)
}

/// `∫_0^{|ρ(x) - t|} (∫_{γ(σ_x(s), σ̃_y(s))} h) ds` where `σ̃_y` runs at the
/// relative velocity `|t - ρ(y)| / |t - ρ(x)|`, so both curves sit at the
/// same fraction of their length.
pub fn t_pair_integral(m: &Manifold, px: &Projection, py: &Projection, h: &ScalarField, cfg: &IntegralConfig) -> Option<f64> {
    let len = px.sigma_length();
    if len == 0.0 {
        return Some(0.0);
    }
    let k = cfg.outer_nodes.max(2);
    let mut s = 0.0;
    for i in 0..k {
        let w = if i == 0 || i == k - 1 { 0.5 } else { 1.0 };
        let f = i as f64 / (k - 1) as f64;
        let (a, b) = (px.sigma(m, f)?, py.sigma(m, f)?);
        s += w * line_integral_with(m, &a, &b, cfg.line_nodes, |p| h.value(p))?;
    }
    Some(s * len / (k - 1) as f64)
}

/// Membership of sampled points of `B_{r_q}(p)` in the controlled sets.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlledSets {
    pub r_q: f64,
    pub eta: f64,
    pub points: Vec<Point>,
    pub bad: Vec<bool>,
    /// Q-integral per point (`None` on the bad set).
    pub q_integral: Vec<Option<f64>>,
    /// Partner-averaged T-integral per point, with bad partners counting zero.
    pub t_integral: Vec<Option<f64>>,
    /// Per anchor, the fraction of partners outside `T_η(h, x)`.
    pub anchor_exclusion: Vec<Option<f64>>,
    pub measures: ControlMeasures,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ControlMeasures {
    pub bad: f64,
    pub q: f64,
    pub q_check: f64,
    pub t: f64,
    pub t_check: f64,
    /// Largest partner fraction outside `T_η(h, x)` over anchors in `T_η`.
    pub t_anchor_check_max: f64,
    /// Mean of `h` over `B_{2 r_q}(p)`.
    pub h_mean_2r: f64,
    /// Mean of `h` over `B_{4 r_q}(p)`.
    pub h_mean_4r: f64,
}

impl ControlledSets {
    pub fn in_q(&self, i: usize) -> bool {
        self.q_integral[i].map_or(false, |v| v <= self.eta * self.r_q * self.r_q)
    }

    pub fn in_t(&self, i: usize) -> bool {
        self.t_integral[i].map_or(false, |v| v <= self.eta * self.r_q * self.r_q)
    }
}

/// Classifies `anchors` volume-uniform points of `B_{r_q}(p)`, where
/// `r_q = d(p, q) / β`, into the sets `Q_η`, `Q̌_η`, `T_η`, `Ť_η` of `h`.
#[allow(clippy::too_many_arguments)]
pub fn classify_controlled_points(
    m: &Manifold,
    p: &Point,
    q: &Point,
    beta: f64,
    h: &ScalarField,
    eta: f64,
    anchors: usize,
    seed: u64,
    cfg: &IntegralConfig,
) -> Result<ControlledSets> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::config("eta", "must lie in (0, 1/2)"));
    }
    let target = m.distance(p, q);
    let r_q = target / beta;
    let h_mean = |r: f64| -> Result<f64> {
        crate::fields::mean_with(m, p, r, cfg.quadrature, |x| h.value(x)).map(|e| e.mean)
    };
    let (h2, h4) = (h_mean(2.0 * r_q)?, h_mean(4.0 * r_q)?);
    let points = m.sample_ball(p, r_q, anchors, seed, "controlled")?;
    let proj: Vec<Option<Projection>> =
        par::map(points.len(), |i| project(m, q, target, &points[i]).ok().filter(|p| p.well_defined));
    let bad: Vec<bool> = proj.iter().map(|p| p.is_none()).collect();
    let q_integral = par::map(points.len(), |i| q_integral(m, proj[i].as_ref()?, h, cfg.line_nodes));
    let threshold = eta * r_q * r_q;
    let sqrt_threshold = eta.sqrt() * r_q * r_q;
    let per_anchor = par::map(points.len(), |i| {
        let px = proj[i].as_ref()?;
        let mut sum = 0.0;
        let mut outside = 0usize;
        let mut used = 0usize;
        for k in 0..cfg.partners {
            let j = (rng::key(seed, "partner", &[i as i64, k as i64]) % points.len() as u64) as usize;
            used += 1;
            let Some(py) = proj[j].as_ref() else { continue };
            let v = t_pair_integral(m, px, py, h, cfg)?;
            sum += v;
            if v > sqrt_threshold {
                outside += 1;
            }
        }
        Some((sum / used.max(1) as f64, outside as f64 / used.max(1) as f64))
    });
    let t_integral: Vec<Option<f64>> = per_anchor.iter().map(|a| a.map(|a| a.0)).collect();
    let anchor_exclusion: Vec<Option<f64>> = per_anchor.iter().map(|a| a.map(|a| a.1)).collect();
    let n = points.len() as f64;
    let frac = |pred: &dyn Fn(usize) -> bool| (0..points.len()).filter(|&i| pred(i)).count() as f64 / n;
    let measures = ControlMeasures {
        bad: frac(&|i| bad[i]),
        q: frac(&|i| q_integral[i].map_or(false, |v| v <= threshold)),
        q_check: frac(&|i| q_integral[i].map_or(false, |v| v > threshold)),
        t: frac(&|i| t_integral[i].map_or(false, |v| v <= threshold)),
        t_check: frac(&|i| t_integral[i].map_or(false, |v| v > threshold)),
        t_anchor_check_max: (0..points.len())
            .filter(|&i| t_integral[i].map_or(false, |v| v <= threshold))
            .filter_map(|i| anchor_exclusion[i])
            .fold(0.0, f64::max),
        h_mean_2r: h2,
        h_mean_4r: h4,
    };
    Ok(ControlledSets { r_q, eta, points, bad, q_integral, t_integral, anchor_exclusion, measures })
}
