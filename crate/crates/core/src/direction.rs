//! Direction points `q_1, …, q_k`, their nets, and the projection chains.
//!
//! Level `i` carries `q_i`, the radius `r_{q_i} = d(p, q_i) / β`, the
//! projection `π_i` onto `∂B_{d(p,q_i)}(q_i)` and a net `𝔑_i`. With the
//! own-cell snap `𝒫₀^{(i)}` into `𝔑_{i+1}`:
//!
//! * `𝒫₀ = 𝒫₀^{(0)}`, `𝒫_s = 𝒫₀^{(s)} ∘ π_s ∘ 𝒫_{s-1}`;
//! * `𝒫̌_i = 𝒫₀^{(i-1)} ∘ π_i ∘ 𝒫_{i-1}`, which lands in `𝔑_i`;
//! * `q_k` maximizes `d(p, ·)` over `𝒫̌_{k-1}` of a probe set of
//!   `B_{r_{q_{k-1}}}(p)`.

mod elementary;
mod net;
#[cfg(test)]
mod tests;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gradient, hessian_deviation, ProbeConfig, ScalarField};
use crate::gougu::{defect_of, project, IntegralConfig, Projection};
use crate::manifold::Manifold;
use crate::par;
use crate::point::{norm, sub, Coords, Point};
use crate::poisson::{solve_model_function, Focus, Method, SolveConfig, SolveStats};

pub use elementary::{elementary_bound, elementary_fuzz, ElementaryBound, FuzzReport};
pub use net::{CellKey, NetCell};
use net::{LazyNet, Scorer};

/// How the net density shrinks with the level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetScaling {
    /// `ε_i = ε`.
    Uniform,
    /// `ε_i = ε β^{-(k-i+1)}`, so every net resolves `B_{r_{q_k}}(p)`.
    #[default]
    Beta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameParams {
    pub beta: f64,
    /// Defaults to `4^{n+1}`; only enters the `γ_i` normalization.
    pub nu: Option<f64>,
    pub epsilon: f64,
    pub eta: f64,
    /// `d(p, q_1) = q1_scale · r`.
    pub q1_scale: f64,
    /// Defaults to the dimension.
    pub k_max: Option<usize>,
    pub net_scaling: NetScaling,
    /// Candidates scored per net cell.
    pub candidates: usize,
    /// Partners averaged in the T-integral of a candidate.
    pub t_partners: usize,
    pub line_nodes: usize,
    pub outer_nodes: usize,
    /// Probe points of `B_{r_{q_{k-1}}}(p)` pushed through `𝒫̌_{k-1}`.
    pub probes: usize,
    /// Net points per level used for the stored pairwise defects.
    pub net_sample: usize,
    /// Nodes for tabulating the defect fields on `B_{4 r_q}(p)`.
    pub tabulate_nodes: usize,
    /// Extra mesh nodes near `p` for mesh solves.
    pub focus_nodes: usize,
    /// Image diameter, relative to `r_{q_{k-1}}`, below which the search stops.
    pub collapse_floor: f64,
    pub solve: SolveConfig,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            beta: 30.0,
            nu: None,
            epsilon: 0.05,
            eta: 0.1,
            q1_scale: 0.25,
            k_max: None,
            net_scaling: NetScaling::Beta,
            candidates: 6,
            t_partners: 8,
            line_nodes: 9,
            outer_nodes: 5,
            probes: 2000,
            net_sample: 200,
            tabulate_nodes: 4000,
            focus_nodes: 6000,
            collapse_floor: 1e-3,
            solve: SolveConfig::default(),
        }
    }
}

impl FrameParams {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |f: &str, why: &str| Err(Error::config(f, why));
        if !(self.beta >= 3.0 && self.beta.is_finite()) {
            return bad("beta", "must be finite and at least 3");
        }
        if let Some(nu) = self.nu {
            if !(nu >= 1.0 && nu.is_finite()) {
                return bad("nu", "must be finite and at least 1");
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon", "must lie in (0, 1)");
        }
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return bad("eta", "must lie in (0, 1/2)");
        }
        if !(self.q1_scale > 0.0 && self.q1_scale.is_finite()) {
            return bad("q1_scale", "must be positive");
        }
        if let Some(k) = self.k_max {
            if k == 0 || k > n {
                return bad("k_max", "must lie in 1..=dim");
            }
        }
        if self.candidates == 0 || self.probes == 0 || self.net_sample < 2 {
            return bad("candidates", "candidates, probes and net_sample must be positive");
        }
        if self.line_nodes < 2 || self.outer_nodes < 2 {
            return bad("line_nodes", "quadrature needs at least two nodes");
        }
        if !(self.collapse_floor >= 0.0) {
            return bad("collapse_floor", "must be nonnegative");
        }
        Ok(())
    }

    pub fn nu_for(&self, n: usize) -> f64 {
        self.nu.unwrap_or(4f64.powi(n as i32 + 1))
    }

    pub fn k_max_for(&self, n: usize) -> usize {
        self.k_max.unwrap_or(n)
    }

    fn integrals(&self) -> IntegralConfig {
        IntegralConfig { line_nodes: self.line_nodes, outer_nodes: self.outer_nodes, ..IntegralConfig::default() }
    }
}

/// Search record for `q_k`, `k ≥ 2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DirectionSearch {
    /// `r̃₁ = r_{q_{k-1}}`.
    pub r_tilde: f64,
    pub probes: usize,
    /// Probes whose chain hit an undefined projection or a failed cell.
    pub excluded: usize,
    pub image_points: usize,
    pub image_diameter: f64,
    /// `max d(p, ·)` over the image.
    pub r0: f64,
    /// `r0 / r̃₁`.
    pub ratio: f64,
    /// `2^{-n(2n+3)}`.
    pub floor: f64,
    pub meets_floor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub radius: f64,
    pub method: Option<Method>,
    pub stats: Option<SolveStats>,
    /// Why the model function was not solved.
    pub skipped: Option<String>,
}

/// `sup |d(y,z)² - (ρ_l(y) - ρ_l(z))² - d(π_l y, π_l z)²|` over sampled
/// `y ∈ 𝔑_{i1}`, `z ∈ 𝔑_{i2}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetDefect {
    pub l: usize,
    pub i1: usize,
    pub i2: usize,
    pub pairs: usize,
    pub excluded: usize,
    pub sup: f64,
    /// `sup / r_{q_l}²`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetSummary {
    pub level: usize,
    pub epsilon: f64,
    pub density_radius: f64,
    pub cell_side: f64,
    /// Lattice cells meeting `B_{r_q}(p)`.
    pub cardinality_estimate: f64,
    /// `cardinality · εⁿ`.
    pub cardinality_constant: f64,
    /// Distinct cells hit by the level sample.
    pub sample_cells: usize,
    pub good_cells: usize,
    pub bad_candidates: usize,
    /// Per level `l ≤ i`, the fraction of sampled cells in `Q_η` and `T_η`.
    pub q_fraction: Vec<f64>,
    pub t_fraction: Vec<f64>,
    pub defects: Vec<NetDefect>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameLevel {
    pub index: usize,
    pub q: Point,
    pub distance: f64,
    pub r_q: f64,
    pub log10_gamma: f64,
    pub search: Option<DirectionSearch>,
    pub model: ModelSummary,
    pub net: NetSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Collapse {
    pub level: usize,
    pub spread: f64,
    pub floor: f64,
}

/// What later stages need from a frame: the base point and the `q_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameAnchors {
    pub origin: Point,
    pub points: Vec<Point>,
    /// `r_{q_i}` for constructed frames; the innermost one sets `r₁`.
    pub radii: Vec<f64>,
    pub beta: f64,
}

impl FrameAnchors {
    /// `q_i = exp_p(β r e_i)` for `i = 1..=n`, each with `r_{q_i} = r`.
    pub fn axis(m: &Manifold, p: &Point, r: f64, beta: f64) -> Result<Self> {
        let n = m.dim();
        let points = (0..n)
            .map(|i| m.exp(p, &unit(n, i, beta * r)).ok_or_else(|| Error::Geometry("axis point outside the domain".into())))
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameAnchors { origin: p.clone(), points, radii: vec![r; n], beta })
    }

    pub fn innermost_radius(&self) -> f64 {
        self.radii.last().copied().unwrap_or(0.0)
    }
}

pub struct DirectionFrame {
    m: Manifold,
    origin: Point,
    radius: f64,
    params: FrameParams,
    seed: u64,
    levels: Vec<FrameLevel>,
    scorers: Vec<Arc<Scorer>>,
    nets: Vec<LazyNet>,
    samples: Vec<Vec<Arc<NetCell>>>,
    collapse: Option<Collapse>,
    partial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetRecord {
    pub level: usize,
    pub cells: Vec<NetCell>,
}

/// Serializable view of a frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameRecord {
    pub origin: Point,
    pub radius: f64,
    pub dim: usize,
    pub params: FrameParams,
    pub levels: Vec<FrameLevel>,
    /// `d(p, q_i) / d(p, q_{i+1})`.
    pub scale_ratios: Vec<f64>,
    pub collapse: Option<Collapse>,
    pub partial: bool,
    pub nets: Vec<NetRecord>,
}

/// Sampled stratified Gou-Gu defects at level `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StratifiedDefect {
    pub k: usize,
    pub pairs: usize,
    pub excluded: usize,
    pub sup: f64,
    pub mean: f64,
    /// `sup / r_{q_k}²`.
    pub normalized: f64,
}

/// One row of the projection-error table, for `i < j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionRow {
    pub i: usize,
    pub j: usize,
    /// `d(q_j, π_i(q_j))`.
    pub pi_distance: Option<f64>,
    /// `d(𝒫_i(q_j), q_j)`.
    pub chain_distance: Option<f64>,
    /// `|φ_i(q_j)| = |ρ_i(𝒫_{i-1} q_j) - ρ_i(p)|`.
    pub phi: Option<f64>,
    /// `|φ_i(q_j)| / r_{q_k}` with `k` the last level.
    pub phi_over_r_last: Option<f64>,
    pub log10_gamma_prev: f64,
    pub log10_gamma_last: f64,
    /// `log10((pi_distance + chain_distance) / γ_{j-1})`.
    pub log10_normalized_distance: Option<f64>,
    /// `log10(|φ_i(q_j)| / γ_k)`.
    pub log10_normalized_phi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualDiameter {
    pub sup: f64,
    /// `sup / r_{q_n}`.
    pub normalized: f64,
    pub net_points: usize,
    pub excluded: usize,
}

fn unit(n: usize, i: usize, t: f64) -> Coords {
    let mut v = Coords::from_elem(0.0, n);
    v[i] = t;
    v
}

/// `2^{-n(2n+3)}`.
pub fn direction_floor(n: usize) -> f64 {
    2f64.powi(-((n * (2 * n + 3)) as i32))
}

/// Builds `q_1, …, q_k` and their nets around `p` at outer scale `r`.
pub fn find_direction_points(m: &Manifold, p: &Point, r: f64, params: &FrameParams, seed: u64) -> Result<DirectionFrame> {
    let n = m.dim();
    params.validate(n)?;
    if !m.contains(p) {
        return Err(Error::OutsideDomain);
    }
    if !(r > 0.0) {
        return Err(Error::config("radius", "must be positive"));
    }
    let mut params = params.clone();
    params.nu = Some(params.nu_for(n));
    params.k_max = Some(params.k_max_for(n));
    let mut frame = DirectionFrame {
        m: m.clone(),
        origin: p.clone(),
        radius: r,
        params,
        seed,
        levels: vec![],
        scorers: vec![],
        nets: vec![],
        samples: vec![],
        collapse: None,
        partial: false,
    };
    let q1 = m
        .exp(p, &unit(n, 0, frame.params.q1_scale * r))
        .ok_or_else(|| Error::Geometry("q_1 lies outside the domain".into()))?;
    frame.push_level(q1, None)?;
    for k in 2..=frame.k_max() {
        let (q, search) = frame.search(k)?;
        let floor = frame.params.collapse_floor * search.r_tilde;
        match q {
            Some(q) if search.image_diameter >= floor && search.r0 > 0.0 => frame.push_level(q, Some(search))?,
            _ => {
                frame.collapse = Some(Collapse { level: k, spread: search.image_diameter, floor });
                break;
            }
        }
    }
    Ok(frame)
}

impl DirectionFrame {
    pub fn manifold(&self) -> &Manifold {
        &self.m
    }

    pub fn origin(&self) -> &Point {
        &self.origin
    }

    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    pub fn levels(&self) -> &[FrameLevel] {
        &self.levels
    }

    pub fn collapse(&self) -> Option<&Collapse> {
        self.collapse.as_ref()
    }

    /// Some model function could not be solved.
    pub fn partial(&self) -> bool {
        self.partial
    }

    pub fn is_complete(&self) -> bool {
        self.levels.len() == self.m.dim()
    }

    fn k_max(&self) -> usize {
        self.params.k_max_for(self.m.dim())
    }

    pub fn anchors(&self) -> FrameAnchors {
        FrameAnchors {
            origin: self.origin.clone(),
            points: self.levels.iter().map(|l| l.q.clone()).collect(),
            radii: self.levels.iter().map(|l| l.r_q).collect(),
            beta: self.params.beta,
        }
    }

    pub fn scale_ratios(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[0].distance / w[1].distance).collect()
    }

    pub fn record(&self) -> FrameRecord {
        FrameRecord {
            origin: self.origin.clone(),
            radius: self.radius,
            dim: self.m.dim(),
            params: self.params.clone(),
            levels: self.levels.clone(),
            scale_ratios: self.scale_ratios(),
            collapse: self.collapse.clone(),
            partial: self.partial,
            nets: self
                .nets
                .iter()
                .map(|n| NetRecord { level: n.level, cells: n.materialized().iter().map(|c| (**c).clone()).collect() })
                .collect(),
        }
    }

    fn log10_gamma(&self, i: usize, r_q: f64) -> f64 {
        let n = self.m.dim() as i32;
        let nu = self.params.nu_for(self.m.dim());
        -0.5 * nu.powi(n + 1 - i as i32) * self.params.beta.log10() + r_q.log10()
    }

    fn level_epsilon(&self, i: usize) -> f64 {
        match self.params.net_scaling {
            NetScaling::Uniform => self.params.epsilon,
            NetScaling::Beta => self.params.epsilon * self.params.beta.powi(-((self.k_max() - i + 1) as i32)),
        }
    }

    fn push_level(&mut self, q: Point, search: Option<DirectionSearch>) -> Result<()> {
        let i = self.levels.len() + 1;
        let m = self.m.clone();
        let p = self.origin.clone();
        let target = m.distance(&p, &q);
        let r_q = target / self.params.beta;
        let (model, fields) = self.model_fields(&q, r_q)?;
        let partners = m
            .sample_ball(&p, r_q, self.params.t_partners, self.seed, &format!("partners-{i}"))?
            .iter()
            .map(|y| project(&m, &q, target, y).ok().filter(|pr| pr.well_defined))
            .collect();
        self.scorers.push(Arc::new(Scorer { q: q.clone(), target, r: r_q, fields, partners }));
        let eps = self.level_epsilon(i);
        self.nets.push(LazyNet::new(
            &m,
            i,
            &p,
            r_q,
            eps,
            self.params.candidates,
            self.params.eta,
            self.params.integrals(),
            self.scorers.clone(),
        ));
        let net = self.net_summary(i)?;
        self.levels.push(FrameLevel {
            index: i,
            q,
            distance: target,
            r_q,
            log10_gamma: self.log10_gamma(i, r_q),
            search,
            model,
            net,
        });
        Ok(())
    }

    /// Solves `f_i` on `B_{(β+8) r_q}(q)` and tabulates the defect fields.
    #[allow(clippy::type_complexity)]
    fn model_fields(&mut self, q: &Point, r_q: f64) -> Result<(ModelSummary, Option<(ScalarField, ScalarField)>)> {
        let m = self.m.clone();
        let p = self.origin.clone();
        let radius = (self.params.beta + 8.0) * r_q;
        let center = m.center();
        let room = m.domain_radius() - m.distance(&center, q);
        if radius >= room {
            self.partial = true;
            let summary = ModelSummary {
                radius,
                method: None,
                stats: None,
                skipped: Some(format!("model ball of radius {radius} leaves the domain (room {room})")),
            };
            return Ok((summary, None));
        }
        let mut cfg = self.params.solve.clone();
        if !m.is_graph() {
            cfg.focus = Some(Focus { center: p.clone(), radius: 5.0 * r_q, nodes: self.params.focus_nodes });
        }
        let mf = solve_model_function(&m, q, radius, &cfg)?;
        let summary = ModelSummary { radius, method: Some(mf.method), stats: mf.stats.clone(), skipped: None };
        if mf.method == Method::Exact {
            return Ok((summary, None));
        }
        let probe = ProbeConfig { stencil: 1e-4 * r_q, fit_neighbors: 40 };
        let rho2 = ScalarField::distance_squared(&m, q);
        let nodes = self.params.tabulate_nodes;
        let hq = ScalarField::tabulate(&m, "h_q", &p, 4.0 * r_q, nodes, |x| {
            let gf = gradient(&m, &mf.field, x, &probe)?;
            let gr = gradient(&m, &rho2, x, &probe)?;
            Some(norm(&sub(&gf, &gr)))
        })?;
        let ht = ScalarField::tabulate(&m, "h_t", &p, 4.0 * r_q, nodes, |x| hessian_deviation(&m, &mf.field, x, &probe))?;
        Ok((summary, Some((hq, ht))))
    }

    fn pi(&self, l: usize, x: &Point) -> Option<Point> {
        self.scorers[l - 1].projection(&self.m, x)?.image
    }

    fn snap_good(&self, level: usize, x: &Point) -> Option<Point> {
        let cell = self.nets[level - 1].snap(x);
        if cell.good {
            cell.point.clone()
        } else {
            None
        }
    }

    /// Net cell of level `level` containing `x`.
    pub fn snap(&self, level: usize, x: &Point) -> Arc<NetCell> {
        self.nets[level - 1].snap(x)
    }

    /// `[𝒫_0(x), …, 𝒫_s(x)]`; needs nets `1..=s+1`.
    pub fn chain(&self, x: &Point, s: usize) -> Option<Vec<Point>> {
        if s + 1 > self.nets.len() {
            return None;
        }
        let mut out = Vec::with_capacity(s + 1);
        out.push(self.snap_good(1, x)?);
        for j in 1..=s {
            let img = self.pi(j, &out[j - 1])?;
            out.push(self.snap_good(j + 1, &img)?);
        }
        Some(out)
    }

    /// `𝒫̌_i(x)`, a point of `𝔑_i`.
    pub fn check(&self, x: &Point, i: usize) -> Option<Point> {
        if i == 0 || i > self.nets.len() {
            return None;
        }
        let c = self.chain(x, i - 1)?;
        let img = self.pi(i, &c[i - 1])?;
        self.snap_good(i, &img)
    }

    fn search(&self, k: usize) -> Result<(Option<Point>, DirectionSearch)> {
        let m = &self.m;
        let p = &self.origin;
        let r_tilde = self.levels[k - 2].r_q;
        let probes = m.quadrature_ball(p, r_tilde, self.params.probes)?.points;
        let images = par::map(probes.len(), |j| self.check(&probes[j], k - 1));
        let mut seen: HashMap<Vec<u64>, ()> = HashMap::new();
        let mut distinct: Vec<Point> = vec![];
        for img in images.iter().flatten() {
            let key: Vec<u64> = img.coords.iter().map(|c| c.to_bits()).collect();
            if seen.insert(key, ()).is_none() {
                distinct.push(img.clone());
            }
        }
        let excluded = images.iter().filter(|i| i.is_none()).count();
        let dist: Vec<f64> = distinct.iter().map(|x| m.distance(p, x)).collect();
        let mut best: Option<usize> = None;
        for (i, &d) in dist.iter().enumerate() {
            if best.map_or(true, |b| d > dist[b]) {
                best = Some(i);
            }
        }
        let diameter = par::map(distinct.len(), |i| {
            (i + 1..distinct.len()).map(|j| m.distance(&distinct[i], &distinct[j])).fold(0.0, f64::max)
        })
        .into_iter()
        .fold(0.0, f64::max);
        let r0 = best.map_or(0.0, |b| dist[b]);
        let floor = direction_floor(m.dim());
        let search = DirectionSearch {
            r_tilde,
            probes: probes.len(),
            excluded,
            image_points: distinct.len(),
            image_diameter: diameter,
            r0,
            ratio: r0 / r_tilde,
            floor,
            meets_floor: r0 / r_tilde >= floor,
        };
        Ok((best.map(|b| distinct[b].clone()), search))
    }

    fn net_summary(&mut self, i: usize) -> Result<NetSummary> {
        let m = self.m.clone();
        let r_q = self.scorers[i - 1].r;
        let pts = m.sample_ball(&self.origin, r_q, self.params.net_sample, self.seed, &format!("net-sample-{i}"))?;
        let net = &self.nets[i - 1];
        let cells = par::map(pts.len(), |j| net.snap(&pts[j]));
        let mut seen = std::collections::HashSet::new();
        let cells: Vec<Arc<NetCell>> = cells.into_iter().filter(|c| seen.insert(c.key.clone())).collect();
        self.samples.push(cells);
        let cells = &self.samples[i - 1];
        let count = cells.len() as f64;
        let frac = |f: &dyn Fn(&NetCell) -> bool| cells.iter().filter(|c| f(c)).count() as f64 / count;
        let q_fraction = (0..i).map(|l| frac(&|c: &NetCell| c.good && c.q_member[l])).collect();
        let t_fraction = (0..i).map(|l| frac(&|c: &NetCell| c.good && c.t_member[l])).collect();
        let mut defects = vec![];
        for l in 1..=i {
            for i1 in l..=i {
                defects.push(self.net_defect(l, i1, i));
            }
        }
        let net = &self.nets[i - 1];
        let card = net.cardinality_estimate();
        Ok(NetSummary {
            level: i,
            epsilon: net.epsilon,
            density_radius: net.density_radius(),
            cell_side: net.side,
            cardinality_estimate: card,
            cardinality_constant: card * net.epsilon.powi(m.dim() as i32),
            sample_cells: cells.len(),
            good_cells: cells.iter().filter(|c| c.good).count(),
            bad_candidates: cells.iter().map(|c| c.bad_candidates).sum(),
            q_fraction,
            t_fraction,
            defects,
        })
    }

    fn net_defect(&self, l: usize, i1: usize, i2: usize) -> NetDefect {
        let m = &self.m;
        let proj = |cells: &[Arc<NetCell>]| -> Vec<Option<Projection>> {
            par::map(cells.len(), |j| {
                let c = &cells[j];
                c.good.then(|| self.scorers[l - 1].projection(m, c.point.as_ref()?)).flatten()
            })
        };
        let (a, b) = (&self.samples[i1 - 1], &self.samples[i2 - 1]);
        let (pa, pb) = (proj(a), proj(b));
        let rows = par::map(pa.len(), |x| {
            let start = if i1 == i2 { x + 1 } else { 0 };
            let mut sup = 0.0f64;
            let (mut pairs, mut excluded) = (0usize, 0usize);
            for y in start..pb.len() {
                pairs += 1;
                match (&pa[x], &pb[y]) {
                    (Some(u), Some(v)) => sup = sup.max(defect_of(m, u, v).unwrap_or(0.0)),
                    _ => excluded += 1,
                }
            }
            (sup, pairs, excluded)
        });
        let sup = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let r = self.scorers[l - 1].r;
        NetDefect {
            l,
            i1,
            i2,
            pairs: rows.iter().map(|r| r.1).sum(),
            excluded: rows.iter().map(|r| r.2).sum(),
            sup,
            normalized: sup / (r * r),
        }
    }

    /// `|d(x,y)² - Σ_{j≤k} [ρ_j(𝒫_{j-1}x) - ρ_j(𝒫_{j-1}y)]² - d(𝒫̌_k x, 𝒫̌_k y)²|`,
    /// or `None` when a chain breaks.
    pub fn stratified_gougu_defect(&self, x: &Point, y: &Point, k: usize) -> Option<f64> {
        if k == 0 || k > self.nets.len() {
            return None;
        }
        let m = &self.m;
        let (cx, cy) = (self.chain(x, k - 1)?, self.chain(y, k - 1)?);
        let mut s = m.distance(x, y).powi(2);
        for j in 1..=k {
            let q = &self.scorers[j - 1].q;
            s -= (m.distance(q, &cx[j - 1]) - m.distance(q, &cy[j - 1])).powi(2);
        }
        let ax = self.snap_good(k, &self.pi(k, &cx[k - 1])?)?;
        let ay = self.snap_good(k, &self.pi(k, &cy[k - 1])?)?;
        s -= m.distance(&ax, &ay).powi(2);
        Some(s.abs())
    }

    /// Stratified defect over `pairs` random pairs of `B_{r_{q_k}}(p)`.
    pub fn stratified_defect_stats(&self, k: usize, pairs: usize, seed: u64) -> Result<StratifiedDefect> {
        if k == 0 || k > self.levels.len() {
            return Err(Error::config("k", "level not constructed"));
        }
        let r = self.levels[k - 1].r_q;
        let a = self.m.sample_ball(&self.origin, r, pairs, seed, "stratified-a")?;
        let b = self.m.sample_ball(&self.origin, r, pairs, seed, "stratified-b")?;
        let vals = par::map(pairs, |i| self.stratified_gougu_defect(&a[i], &b[i], k));
        let ok: Vec<f64> = vals.iter().flatten().copied().collect();
        let sup = ok.iter().copied().fold(0.0, f64::max);
        let mean = if ok.is_empty() { 0.0 } else { ok.iter().sum::<f64>() / ok.len() as f64 };
        Ok(StratifiedDefect { k, pairs, excluded: pairs - ok.len(), sup, mean, normalized: sup / (r * r) })
    }

    pub fn projection_diagnostics(&self) -> Vec<ProjectionRow> {
        let m = &self.m;
        let k = self.levels.len();
        let mut rows = vec![];
        let Some(last) = self.levels.last() else { return rows };
        for j in 2..=k {
            let qj = &self.levels[j - 1].q;
            for i in 1..j {
                let pi_distance = self.pi(i, qj).map(|y| m.distance(qj, &y));
                let chain = self.chain(qj, i);
                let chain_distance = chain.as_ref().map(|c| m.distance(&c[i], qj));
                let phi = chain.as_ref().map(|c| {
                    let lv = &self.levels[i - 1];
                    (m.distance(&lv.q, &c[i - 1]) - lv.distance).abs()
                });
                let g_prev = self.levels[j - 2].log10_gamma;
                let g_last = last.log10_gamma;
                let sum = match (pi_distance, chain_distance) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                };
                rows.push(ProjectionRow {
                    i,
                    j,
                    pi_distance,
                    chain_distance,
                    phi,
                    phi_over_r_last: phi.map(|v| v / last.r_q),
                    log10_gamma_prev: g_prev,
                    log10_gamma_last: g_last,
                    log10_normalized_distance: sum.filter(|v| *v > 0.0).map(|v| v.log10() - g_prev),
                    log10_normalized_phi: phi.filter(|v| *v > 0.0).map(|v| v.log10() - g_last),
                });
            }
        }
        rows
    }

    /// `sup d(p, 𝒫̌_n(x))` over net points `x` of the innermost net.
    pub fn residual_diameter(&self) -> Result<ResidualDiameter> {
        if !self.is_complete() {
            let level = self.levels.len() + 1;
            let (spread, floor) = self.collapse.as_ref().map_or((0.0, 0.0), |c| (c.spread, c.floor));
            return Err(Error::DimensionCollapse { level, spread, floor });
        }
        let n = self.levels.len();
        let r = self.levels[n - 1].r_q;
        let probes = self.m.quadrature_ball(&self.origin, r, self.params.probes)?.points;
        let cells = par::map(probes.len(), |j| self.nets[n - 1].snap(&probes[j]));
        let mut seen = std::collections::HashSet::new();
        let pts: Vec<Point> = cells
            .into_iter()
            .filter(|c| seen.insert(c.key.clone()))
            .filter_map(|c| c.point.clone().filter(|_| c.good))
            .collect();
        let vals = par::map(pts.len(), |j| self.check(&pts[j], n).map(|y| self.m.distance(&self.origin, &y)));
        let ok: Vec<f64> = vals.iter().flatten().copied().collect();
        let sup = ok.iter().copied().fold(0.0, f64::max);
        Ok(ResidualDiameter { sup, normalized: sup / r, net_points: pts.len(), excluded: pts.len() - ok.len() })
    }
}
