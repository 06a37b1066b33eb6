//! Unit-bundle averages of second-order distance defects.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::par;
use crate::point::{dot, norm, Point};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToponogovStats {
    pub s: f64,
    pub samples: usize,
    /// Flows that left the domain.
    pub dropped: usize,
    /// `|d_q²(γ(s))/2 - d_q²(x)/2 - ⟨∇ d_q²(x)/2, v⟩ s - s²/2|`.
    pub cosine: Moments,
    /// `|⟨∇ b⁺(x), v⟩ - (b⁺(γ(s)) - b⁺(x))/s|`.
    pub quotient: Moments,
    /// `2s / d_q(p)`.
    pub leading_term: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub max: f64,
}

impl Moments {
    fn of(v: &[f64]) -> Moments {
        let k = v.len() as f64;
        let mean = v.iter().sum::<f64>() / k;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) } else { 0.0 };
        Moments { mean, se: (var / k).sqrt(), max: v.iter().copied().fold(0.0, f64::max) }
    }
}

/// Monte-Carlo defects over unit vectors based in `B_{r1}(p)`.
pub fn integral_toponogov_check(
    m: &Manifold,
    q: &Point,
    p: &Point,
    r1: f64,
    s: f64,
    samples: usize,
    seed: u64,
) -> Result<ToponogovStats> {
    if !(s > 0.0 && s <= r1) {
        return Err(Error::config("s", "must lie in (0, r1]"));
    }
    let dq = m.distance(p, q);
    if dq < 2.0 * r1 {
        return Err(Error::config("q", "needs d(p, q) ≥ 2 r1"));
    }
    let bundle = m.sample_unit_bundle(p, r1, samples, seed)?;
    let rows = par::map_slice(&bundle, |u| {
        let y = m.geodesic_flow(u, s).filter(|y| m.contains(y))?;
        let x = &u.base;
        let to_q = m.log(x, q);
        let dx = m.distance(x, q);
        let l = norm(&to_q);
        if l == 0.0 {
            return None;
        }
        // ∇ d_q(x) = -log_x(q) / |log_x(q)|.
        let slope = -dot(&to_q, &u.direction) / l;
        let dy = m.distance(&y, q);
        let cosine = (0.5 * dy * dy - 0.5 * dx * dx - dx * slope * s - 0.5 * s * s).abs();
        let quotient = (slope - (dy - dx) / s).abs();
        Some((cosine, quotient))
    });
    let kept: Vec<(f64, f64)> = rows.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(Error::EmptyRegion("every geodesic flow left the domain".into()));
    }
    let cos: Vec<f64> = kept.iter().map(|r| r.0).collect();
    let quo: Vec<f64> = kept.iter().map(|r| r.1).collect();
    Ok(ToponogovStats {
        s,
        samples: kept.len(),
        dropped: rows.len() - kept.len(),
        cosine: Moments::of(&cos),
        quotient: Moments::of(&quo),
        leading_term: 2.0 * s / dq,
    })
}
