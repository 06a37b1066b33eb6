//! The distance map `ψ = (b₁⁺, …, bₙ⁺)`, its harmonic replacement `𝐛`, and
//! the report measuring how close `𝐛` is to an ε-splitting map on `B_{r₁}(p)`.

mod ag;
#[cfg(test)]
mod tests;
mod toponogov;

use serde::{Deserialize, Serialize};

use crate::direction::FrameAnchors;
use crate::error::{Error, Result};
use crate::fields::{gradient, ProbeConfig, ScalarField};
use crate::manifold::Manifold;
use crate::par;
use crate::point::{dot, norm, sub, Coords, Point};
use crate::poisson::{solve_on_ball, SolveConfig, SolveStats};

pub use ag::{abresch_gromoll_check, ag_bound, excess, find_ag_pair, AgCheck, AgConfig, AgTriple};
pub use toponogov::{integral_toponogov_check, Moments, ToponogovStats};

/// `ψ(x)_i = d(x, q_i) - d(p, q_i)`.
pub fn distance_map(m: &Manifold, anchors: &FrameAnchors, x: &Point) -> Coords {
    anchors.points.iter().map(|q| m.distance(x, q) - m.distance(&anchors.origin, q)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn of(v: &[f64], bins: usize) -> Histogram {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins];
        let w = (hi - lo) / bins as f64;
        for &x in v {
            let k = if w > 0.0 { ((x - lo) / w) as usize } else { 0 };
            counts[k.min(bins - 1)] += 1;
        }
        Histogram { lo, hi, counts }
    }
}

/// Distortion of `ψ` over sampled pairs of `B_r(p)` at least `threshold` apart.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuasiIsometry {
    pub radius: f64,
    pub threshold: f64,
    pub sampled_pairs: usize,
    pub admissible: usize,
    /// `|ψ(x) - ψ(y)| / d(x, y)`.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max |ratio - 1|`.
    pub max_deviation: f64,
    /// `max_i |ψ_i(x) - ψ_i(y)| / d(x, y)` over all pairs.
    pub component_lipschitz: f64,
    pub histogram: Histogram,
}

/// [`quasi_isometry_on`] with `r = r_{q_n}` and threshold `β^{-1/2} r`.
pub fn quasi_isometry_stats(m: &Manifold, anchors: &FrameAnchors, pairs: usize, seed: u64) -> Result<QuasiIsometry> {
    let r = anchors.innermost_radius();
    quasi_isometry_on(m, anchors, r, r / anchors.beta.sqrt(), pairs, seed)
}

pub fn quasi_isometry_on(
    m: &Manifold,
    anchors: &FrameAnchors,
    radius: f64,
    threshold: f64,
    pairs: usize,
    seed: u64,
) -> Result<QuasiIsometry> {
    let p = &anchors.origin;
    let xs = m.sample_ball(p, radius, pairs, seed, "qi-x")?;
    let ys = m.sample_ball(p, radius, pairs, seed, "qi-y")?;
    let rows = par::map(pairs, |k| {
        let d = m.distance(&xs[k], &ys[k]);
        if d == 0.0 {
            return None;
        }
        let diff = sub(&distance_map(m, anchors, &xs[k]), &distance_map(m, anchors, &ys[k]));
        let comp = diff.iter().map(|v| v.abs()).fold(0.0, f64::max) / d;
        Some((d, norm(&diff) / d, comp))
    });
    let component_lipschitz = rows.iter().flatten().map(|r| r.2).fold(0.0, f64::max);
    let ratios: Vec<f64> = rows.iter().flatten().filter(|r| r.0 >= threshold).map(|r| r.1).collect();
    if ratios.is_empty() {
        return Err(Error::EmptyRegion(format!("no sampled pair of B_{radius}(p) is {threshold} apart")));
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(QuasiIsometry {
        radius,
        threshold,
        sampled_pairs: pairs,
        admissible: ratios.len(),
        min_ratio,
        max_ratio,
        max_deviation: (1.0 - min_ratio).max(max_ratio - 1.0),
        component_lipschitz,
        histogram: Histogram::of(&ratios, 20),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarmonicConfig {
    pub nodes: usize,
    /// Dirichlet shell width in mean edge lengths.
    pub shell_factor: f64,
    pub tolerance: f64,
}

impl Default for HarmonicConfig {
    fn default() -> Self {
        HarmonicConfig { nodes: 20_000, shell_factor: 1.5, tolerance: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Harmonic {
    pub field: ScalarField,
    pub stats: SolveStats,
    /// How far interior values leave the range of the boundary values.
    pub max_principle_violation: f64,
}

/// Harmonic function on `B_radius(p)` equal to `data` on the boundary shell.
pub fn harmonic_replacement(m: &Manifold, p: &Point, radius: f64, data: &ScalarField, cfg: &HarmonicConfig) -> Result<Harmonic> {
    let solve = SolveConfig { nodes: cfg.nodes, shell_factor: cfg.shell_factor, tolerance: cfg.tolerance, ..SolveConfig::default() };
    let sol = solve_on_ball(m, "b", p, radius, 0.0, &|x, _| data.value(x), &solve)?;
    let range = |fixed: bool| {
        sol.values
            .iter()
            .zip(&sol.fixed)
            .filter(|(_, &f)| f == fixed)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
    };
    let (blo, bhi) = range(true);
    let (ilo, ihi) = range(false);
    let max_principle_violation = (blo - ilo).max(ihi - bhi).max(0.0);
    Ok(Harmonic { field: sol.field, stats: sol.stats, max_principle_violation })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplittingConfig {
    /// `r₁` relative to the innermost `r_{q_n}`.
    pub radius_factor: f64,
    /// Points of `B_{r₁}(p)` where gradient sups are taken.
    pub probe_grid: usize,
    /// Quadrature nodes for the averages over `B_{r₁}(p)`.
    pub gram_nodes: usize,
    pub qi_pairs: usize,
    pub toponogov_samples: usize,
    /// Flow times relative to `r₁`.
    pub toponogov_steps: Vec<f64>,
    pub ag: AgConfig,
    pub ag_samples: usize,
    /// Difference step for analytic gradients, relative to `r₁`.
    pub stencil: f64,
    pub fit_neighbors: usize,
    pub harmonic: HarmonicConfig,
}

impl Default for SplittingConfig {
    fn default() -> Self {
        SplittingConfig {
            radius_factor: 1.0,
            probe_grid: 1000,
            gram_nodes: 4000,
            qi_pairs: 1000,
            toponogov_samples: 2000,
            toponogov_steps: vec![0.25, 0.5, 1.0],
            ag: AgConfig::default(),
            ag_samples: 1000,
            stencil: 1e-3,
            fit_neighbors: 24,
            harmonic: HarmonicConfig::default(),
        }
    }
}

impl SplittingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_factor > 0.0 && self.radius_factor.is_finite()) {
            return Err(Error::config("radius_factor", "must be positive"));
        }
        if self.probe_grid == 0 || self.gram_nodes == 0 || self.qi_pairs == 0 || self.toponogov_samples == 0 {
            return Err(Error::config("probe_grid", "sample counts must be positive"));
        }
        if self.toponogov_steps.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
            return Err(Error::config("toponogov_steps", "must lie in (0, 1]"));
        }
        if !(self.stencil > 0.0) {
            return Err(Error::config("stencil", "must be positive"));
        }
        Ok(())
    }
}

/// Gaps between `𝐛_i` and `b_i⁺` on `B_{r₁}(p)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Replacement {
    pub index: usize,
    pub stats: SolveStats,
    pub max_principle_violation: f64,
    /// `sup |𝐛 - b⁺|` over the probe grid.
    pub sup_gap: f64,
    /// `sup |∇(𝐛 - b⁺)|` over the probe grid.
    pub gradient_gap_sup: f64,
    /// `⨍ |∇(𝐛 - b⁺)|²`.
    pub gradient_gap_mean_sq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgEntry {
    pub index: usize,
    pub triple: AgTriple,
    pub check: AgCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToponogovEntry {
    pub index: usize,
    pub steps: Vec<ToponogovStats>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Exclusions {
    /// Probe-grid points where some gradient was undefined.
    pub probe_points: usize,
    /// Quadrature nodes dropped from the Gram averages.
    pub gram_nodes: usize,
    pub toponogov_dropped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplittingReport {
    pub dim: usize,
    pub origin: Point,
    pub anchors: Vec<Point>,
    pub beta: f64,
    /// `r₁`.
    pub radius: f64,
    /// `sup |∇ b_i⁺|`.
    pub gradient_sup_distance: Vec<f64>,
    /// `sup |∇ 𝐛_i|`.
    pub gradient_sup: Option<Vec<f64>>,
    /// `⨍ |⟨∇ b_i⁺, ∇ b_j⁺⟩ - δ_ij|²`.
    pub gram_distance: Vec<Vec<f64>>,
    /// `⨍ |⟨∇ 𝐛_i, ∇ 𝐛_j⟩ - δ_ij|²`.
    pub gram_harmonic: Option<Vec<Vec<f64>>>,
    pub replacements: Vec<Replacement>,
    pub quasi_isometry: Option<QuasiIsometry>,
    pub ag: Vec<AgEntry>,
    pub toponogov: Vec<ToponogovEntry>,
    pub exclusions: Exclusions,
    /// `max(sup_i |∇𝐛_i| - 1, max_ij ⨍ |⟨∇𝐛_i, ∇𝐛_j⟩ - δ_ij|²)`.
    pub epsilon: Option<f64>,
    pub partial: bool,
    pub errors: Vec<String>,
    pub config: SplittingConfig,
}

fn gram(grads: &[Vec<Option<Coords>>]) -> (Vec<Vec<f64>>, usize) {
    let n = grads.len();
    let nodes = grads.first().map_or(0, Vec::len);
    let full: Vec<Vec<&Coords>> =
        (0..nodes).filter_map(|k| grads.iter().map(|g| g[k].as_ref()).collect::<Option<Vec<_>>>()).collect();
    let mut out = vec![vec![0.0; n]; n];
    if full.is_empty() {
        return (vec![vec![f64::NAN; n]; n], nodes);
    }
    for i in 0..n {
        for j in i..n {
            let id = if i == j { 1.0 } else { 0.0 };
            let v = full.iter().map(|g| (dot(g[i], g[j]) - id).powi(2)).sum::<f64>() / full.len() as f64;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    (out, nodes - full.len())
}

fn sup_norm(grads: &[Option<Coords>]) -> f64 {
    grads.iter().flatten().map(|g| norm(g)).fold(0.0, f64::max)
}

/// Measures `ψ` and its harmonic replacement on `B_{r₁}(p)`.
///
/// Sub-operation failures are recorded in `errors` and mark the report
/// partial; the remaining fields are still filled in.
pub fn splitting_report(m: &Manifold, anchors: &FrameAnchors, cfg: &SplittingConfig, seed: u64) -> Result<SplittingReport> {
    cfg.validate()?;
    let n = anchors.points.len();
    if n == 0 {
        return Err(Error::config("anchors", "need at least one direction point"));
    }
    let p = &anchors.origin;
    let r1 = cfg.radius_factor * anchors.innermost_radius();
    if !(r1 > 0.0) {
        return Err(Error::config("anchors", "innermost radius must be positive"));
    }
    let mut errors = Vec::new();
    let probe = ProbeConfig { stencil: cfg.stencil * r1, fit_neighbors: cfg.fit_neighbors };
    let grid = m.quadrature_ball(p, r1, cfg.probe_grid)?.points;
    let nodes = m.quadrature_ball(p, r1, cfg.gram_nodes)?.points;
    let grads = |f: &ScalarField, pts: &[Point]| par::map_slice(pts, |x| gradient(m, f, x, &probe));

    let plus: Vec<ScalarField> = anchors
        .points
        .iter()
        .map(|q| {
            let d0 = m.distance(p, q);
            ScalarField::distance(m, q).map("b+", move |v| v - d0)
        })
        .collect();
    let plus_grid: Vec<Vec<Option<Coords>>> = plus.iter().map(|f| grads(f, &grid)).collect();
    let plus_nodes: Vec<Vec<Option<Coords>>> = plus.iter().map(|f| grads(f, &nodes)).collect();
    let (gram_distance, mut gram_excluded) = gram(&plus_nodes);

    let mut harmonic = Vec::with_capacity(n);
    for (i, f) in plus.iter().enumerate() {
        match harmonic_replacement(m, p, 2.0 * r1, f, &cfg.harmonic) {
            Ok(h) => harmonic.push(h),
            Err(e) => {
                errors.push(format!("harmonic replacement {}: {e}", i + 1));
                break;
            }
        }
    }
    let mut replacements = Vec::new();
    let (mut gradient_sup, mut gram_harmonic) = (None, None);
    let probe_excluded;
    if harmonic.len() == n {
        let h_grid: Vec<Vec<Option<Coords>>> = harmonic.iter().map(|h| grads(&h.field, &grid)).collect();
        let h_nodes: Vec<Vec<Option<Coords>>> = harmonic.iter().map(|h| grads(&h.field, &nodes)).collect();
        for (i, h) in harmonic.iter().enumerate() {
            let sup_gap = par::map_slice(&grid, |x| Some((h.field.value(x)? - plus[i].value(x)?).abs()))
                .into_iter()
                .flatten()
                .fold(0.0, f64::max);
            let diff = |a: &[Option<Coords>], b: &[Option<Coords>]| -> Vec<Option<f64>> {
                a.iter().zip(b).map(|(u, v)| Some(norm(&sub(u.as_ref()?, v.as_ref()?)))).collect()
            };
            let on_grid = diff(&h_grid[i], &plus_grid[i]);
            let on_nodes: Vec<f64> = diff(&h_nodes[i], &plus_nodes[i]).into_iter().flatten().collect();
            replacements.push(Replacement {
                index: i + 1,
                stats: h.stats.clone(),
                max_principle_violation: h.max_principle_violation,
                sup_gap,
                gradient_gap_sup: on_grid.iter().flatten().copied().fold(0.0, f64::max),
                gradient_gap_mean_sq: on_nodes.iter().map(|v| v * v).sum::<f64>() / on_nodes.len().max(1) as f64,
            });
        }
        gradient_sup = Some(h_grid.iter().map(|g| sup_norm(g)).collect::<Vec<_>>());
        probe_excluded = (0..grid.len()).filter(|&k| h_grid.iter().chain(&plus_grid).any(|g| g[k].is_none())).count();
        let (g, excluded) = gram(&h_nodes);
        gram_excluded = gram_excluded.max(excluded);
        gram_harmonic = Some(g);
    } else {
        probe_excluded = (0..grid.len()).filter(|&k| plus_grid.iter().any(|g| g[k].is_none())).count();
    }

    let quasi_isometry = match quasi_isometry_on(m, anchors, r1, r1 / anchors.beta.sqrt(), cfg.qi_pairs, seed) {
        Ok(q) => Some(q),
        Err(e) => {
            errors.push(format!("quasi-isometry: {e}"));
            None
        }
    };

    let mut ag = Vec::new();
    for (i, q) in anchors.points.iter().enumerate() {
        let entry = find_ag_pair(m, p, q, &cfg.ag)
            .and_then(|triple| Ok(AgEntry { index: i + 1, check: abresch_gromoll_check(m, &triple, r1, cfg.ag_samples)?, triple }));
        match entry {
            Ok(e) => {
                if !e.triple.minimizing {
                    errors.push(format!("AG pair {}: no minimizing extension, q⁻ continues the geodesic", i + 1));
                }
                ag.push(e)
            }
            Err(e) => errors.push(format!("AG pair {}: {e}", i + 1)),
        }
    }

    let mut toponogov = Vec::new();
    let mut dropped = 0;
    for (i, q) in anchors.points.iter().enumerate() {
        let mut steps = Vec::new();
        for &s in &cfg.toponogov_steps {
            match integral_toponogov_check(m, q, p, r1, s * r1, cfg.toponogov_samples, seed) {
                Ok(t) => {
                    dropped += t.dropped;
                    steps.push(t);
                }
                Err(e) => errors.push(format!("toponogov {} at s = {s} r1: {e}", i + 1)),
            }
        }
        toponogov.push(ToponogovEntry { index: i + 1, steps });
    }

    let epsilon = match (&gradient_sup, &gram_harmonic) {
        (Some(s), Some(g)) => {
            let grad = s.iter().map(|v| v - 1.0).fold(f64::NEG_INFINITY, f64::max);
            let gram = g.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            Some(grad.max(gram))
        }
        _ => None,
    };
    Ok(SplittingReport {
        dim: m.dim(),
        origin: p.clone(),
        anchors: anchors.points.clone(),
        beta: anchors.beta,
        radius: r1,
        gradient_sup_distance: plus_grid.iter().map(|g| sup_norm(g)).collect(),
        gradient_sup,
        gram_distance,
        gram_harmonic,
        replacements,
        quasi_isometry,
        ag,
        toponogov,
        exclusions: Exclusions { probe_points: probe_excluded, gram_nodes: gram_excluded, toponogov_dropped: dropped },
        epsilon,
        partial: !errors.is_empty() || n < m.dim(),
        errors,
        config: cfg.clone(),
    })
}
