//! Almost-antipodal triples and the growth of their excess.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::point::Point;

/// `[q⁺, q⁻, p]` with the excess at `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgTriple {
    pub q_plus: Point,
    pub q_minus: Point,
    pub p: Point,
    /// `d(p,q⁺) + d(p,q⁻) - d(q⁺,q⁻)`.
    pub excess: f64,
    /// `min(d(p,q⁺), d(p,q⁻))`.
    pub scale: f64,
    /// Point the segment from `q⁺` was extended through.
    pub pivot: Point,
    /// Pivots whose extension stopped minimizing too early.
    pub rejected: usize,
    /// Whether the extended segment is minimizing; otherwise `q⁻` is the
    /// plain geodesic continuation through `p`.
    pub minimizing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgConfig {
    /// Pivot search radius relative to `d(p, q)`.
    pub search_radius: f64,
    /// Pivots tried, `p` first.
    pub candidates: usize,
    /// Bisection tolerance relative to `d(p, q)`.
    pub tolerance: f64,
}

impl Default for AgConfig {
    fn default() -> Self {
        AgConfig { search_radius: 0.25, candidates: 64, tolerance: 1e-6 }
    }
}

/// `𝐄(x) = d(x,q⁺) + d(x,q⁻) - d(q⁺,q⁻)`.
pub fn excess(m: &Manifold, q_plus: &Point, q_minus: &Point, x: &Point) -> f64 {
    m.distance(x, q_plus) + m.distance(x, q_minus) - m.distance(q_plus, q_minus)
}

/// Point on the ray from `q` through `pivot` at distance `dist` from `p`.
fn extend_to(m: &Manifold, q: &Point, pivot: &Point, p: &Point, dist: f64, tol: f64, minimizing: bool) -> Option<Point> {
    let t0 = m.distance(q, pivot);
    let gap = |t: f64| m.extend(q, pivot, t).point.map(|x| m.distance(p, &x) - dist);
    let (mut lo, mut hi) = (t0, t0 + dist + m.distance(p, pivot));
    if gap(lo)? >= 0.0 {
        return None;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match gap(mid) {
            Some(g) if g < 0.0 => lo = mid,
            _ => hi = mid,
        }
    }
    let ext = m.extend(q, pivot, hi);
    if minimizing && !ext.well_defined {
        return None;
    }
    let x = ext.point?;
    ((m.distance(p, &x) - dist).abs() <= 2.0 * tol).then_some(x)
}

/// Extends a segment from `q` past `p` (or a nearby pivot) to the point
/// `q⁻` with `d(p, q⁻) = d(p, q)`; keeps the pivot of least excess. When
/// no pivot works, falls back to continuing the geodesic from `q` through `p`.
pub fn find_ag_pair(m: &Manifold, p: &Point, q: &Point, cfg: &AgConfig) -> Result<AgTriple> {
    let dist = m.distance(p, q);
    if !(dist > 0.0) {
        return Err(Error::config("q", "must differ from p"));
    }
    if !(cfg.search_radius >= 0.0 && cfg.search_radius < 1.0) || !(cfg.tolerance > 0.0) || cfg.candidates == 0 {
        return Err(Error::config("ag", "search_radius in [0,1), positive tolerance and candidates required"));
    }
    let mut pivots = vec![p.clone()];
    if cfg.candidates > 1 && cfg.search_radius > 0.0 {
        pivots.extend(m.quadrature_ball(p, cfg.search_radius * dist, cfg.candidates - 1)?.points);
    }
    let tol = cfg.tolerance * dist;
    let mut best: Option<(f64, Point, Point)> = None;
    let mut rejected = 0;
    for pivot in &pivots {
        let Some(qm) = extend_to(m, q, pivot, p, dist, tol, true) else {
            rejected += 1;
            continue;
        };
        let e = excess(m, q, &qm, p);
        if best.as_ref().map_or(true, |b| e < b.0) {
            best = Some((e, qm, pivot.clone()));
        }
    }
    let minimizing = best.is_some();
    let (e, qm, pivot) = match best {
        Some(b) => b,
        None => {
            let qm = extend_to(m, q, p, p, dist, tol, false).ok_or_else(|| {
                Error::Geometry(format!("no extension of a segment from q past p stays in the domain ({} pivots)", pivots.len()))
            })?;
            (excess(m, q, &qm, p), qm, p.clone())
        }
    };
    let scale = dist.min(m.distance(p, &qm));
    Ok(AgTriple { q_plus: q.clone(), q_minus: qm, p: p.clone(), excess: e, scale, pivot, rejected, minimizing })
}

/// Sampled excess over `B_r(p)` against `2⁶ (r/R)^{1/(n-1)} r`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgCheck {
    pub radius: f64,
    pub samples: usize,
    pub sup_excess: f64,
    pub min_excess: f64,
    pub bound: f64,
    /// `𝐄(p) ≤ r²/(nR)` and `R ≥ 2^{2n} r`.
    pub hypothesis: bool,
    pub within_bound: bool,
}

pub fn ag_bound(n: usize, r: f64, scale: f64) -> f64 {
    64.0 * (r / scale).powf(1.0 / (n as f64 - 1.0)) * r
}

pub fn abresch_gromoll_check(m: &Manifold, t: &AgTriple, r: f64, samples: usize) -> Result<AgCheck> {
    let n = m.dim();
    let mut pts = vec![t.p.clone()];
    pts.extend(m.quadrature_ball(&t.p, r, samples.max(1))?.points);
    let vals = crate::par::map_slice(&pts, |x| excess(m, &t.q_plus, &t.q_minus, x));
    let sup = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = ag_bound(n, r, t.scale);
    let hypothesis = t.excess <= r * r / (n as f64 * t.scale) && t.scale >= 4f64.powi(n as i32) * r;
    Ok(AgCheck { radius: r, samples: pts.len(), sup_excess: sup, min_excess: min, bound, hypothesis, within_bound: sup <= bound })
}
