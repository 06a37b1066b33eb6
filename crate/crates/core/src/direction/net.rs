//! Lazily materialized lattice nets.
//!
//! Level `i` tiles chart space by cubes of side `ε_i r_i / √n` centred on
//! the lattice `p + side·Zⁿ`, so every point lies within `ε_i r_i` of the
//! net point of its own cell. A cell's net point is the best of a few
//! candidates (the cell centre first, then Halton points of the cell).

use std::sync::Arc;

use dashmap::DashMap;
use serde::Serialize;
use smallvec::SmallVec;

use crate::fields::ScalarField;
use crate::gougu::{project, q_integral, t_pair_integral, IntegralConfig, Projection};
use crate::manifold::Manifold;
use crate::point::{Coords, Point};
use crate::rng;

pub type CellKey = SmallVec<[i64; 4]>;

/// What a lower level contributes to the badness of a candidate.
pub(crate) struct Scorer {
    pub q: Point,
    pub target: f64,
    pub r: f64,
    /// `|∇(f - ρ²)|` and `|∇²f - 2g|`; absent when `f = ρ²` exactly.
    pub fields: Option<(ScalarField, ScalarField)>,
    pub partners: Vec<Option<Projection>>,
}

impl Scorer {
    pub fn projection(&self, m: &Manifold, x: &Point) -> Option<Projection> {
        project(m, &self.q, self.target, x).ok().filter(|p| p.well_defined)
    }

    /// `(Q, T)` integrals of `x`; partners off the good set count zero.
    fn integrals(&self, m: &Manifold, px: &Projection, cfg: &IntegralConfig) -> Option<(f64, f64)> {
        let Some((hq, ht)) = &self.fields else {
            return Some((0.0, 0.0));
        };
        let qv = q_integral(m, px, hq, cfg.line_nodes)?;
        let mut t = 0.0;
        for py in self.partners.iter().flatten() {
            t += t_pair_integral(m, px, py, ht, cfg)?;
        }
        Some((qv, t / self.partners.len().max(1) as f64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetCell {
    pub key: CellKey,
    /// `None` when no candidate of the cell is usable.
    pub point: Option<Point>,
    /// Every projection `π_l`, `l ≤ i`, is defined at the point.
    pub good: bool,
    pub score: f64,
    /// Membership in `Q_η` and `T_η` of each level `l ≤ i`.
    pub q_member: Vec<bool>,
    pub t_member: Vec<bool>,
    /// Candidates rejected because a projection was undefined.
    pub bad_candidates: usize,
}

pub(crate) struct LazyNet {
    pub level: usize,
    pub epsilon: f64,
    pub radius: f64,
    pub side: f64,
    origin: Coords,
    candidates: usize,
    eta: f64,
    integrals: IntegralConfig,
    m: Manifold,
    scorers: Vec<Arc<Scorer>>,
    cells: DashMap<CellKey, Arc<NetCell>>,
}

impl LazyNet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: &Manifold,
        level: usize,
        origin: &Point,
        radius: f64,
        epsilon: f64,
        candidates: usize,
        eta: f64,
        integrals: IntegralConfig,
        scorers: Vec<Arc<Scorer>>,
    ) -> Self {
        let n = m.dim() as f64;
        LazyNet {
            level,
            epsilon,
            radius,
            side: epsilon * radius / n.sqrt(),
            origin: origin.coords.clone(),
            candidates: candidates.max(1),
            eta,
            integrals,
            m: m.clone(),
            scorers,
            cells: DashMap::new(),
        }
    }

    pub fn density_radius(&self) -> f64 {
        self.epsilon * self.radius
    }

    /// Lattice cells whose centre lies in the chart ball of radius `r`.
    pub fn cardinality_estimate(&self) -> f64 {
        let n = self.m.dim();
        crate::point::unit_ball_volume(n) * (self.radius / self.side).powi(n as i32)
    }

    pub fn key_of(&self, x: &Point) -> CellKey {
        x.coords.iter().zip(&self.origin).map(|(c, o)| ((c - o) / self.side + 0.5).floor() as i64).collect()
    }

    /// Net point of the cell containing `x`.
    pub fn snap(&self, x: &Point) -> Arc<NetCell> {
        let key = self.key_of(x);
        if let Some(c) = self.cells.get(&key) {
            return c.clone();
        }
        let cell = Arc::new(self.build_cell(&key));
        self.cells.entry(key).or_insert(cell).clone()
    }

    fn candidate_coords(&self, key: &CellKey, j: usize) -> Coords {
        let n = key.len();
        let mut u = [0.5; 12];
        if j > 0 {
            rng::halton(j as u64 - 1, n, &mut u);
        }
        (0..n).map(|d| self.origin[d] + (key[d] as f64 - 0.5 + u[d]) * self.side).collect()
    }

    fn build_cell(&self, key: &CellKey) -> NetCell {
        let levels = self.scorers.len();
        let mut best: Option<NetCell> = None;
        let mut bad = 0;
        for j in 0..self.candidates {
            let Some(x) = self.m.locate(&self.candidate_coords(key, j)) else { continue };
            let projections: Option<Vec<Projection>> =
                self.scorers.iter().map(|s| s.projection(&self.m, &x)).collect();
            let Some(projections) = projections else {
                bad += 1;
                if best.is_none() {
                    best = Some(NetCell {
                        key: key.clone(),
                        point: Some(x),
                        good: false,
                        score: f64::INFINITY,
                        q_member: vec![false; levels],
                        t_member: vec![false; levels],
                        bad_candidates: 0,
                    });
                }
                continue;
            };
            let mut score = 0.0;
            let mut q_member = Vec::with_capacity(levels);
            let mut t_member = Vec::with_capacity(levels);
            for (s, px) in self.scorers.iter().zip(&projections) {
                let scale = self.eta * s.r * s.r;
                let (qv, tv) = s.integrals(&self.m, px, &self.integrals).unwrap_or((f64::INFINITY, f64::INFINITY));
                score += (qv + tv) / scale;
                q_member.push(qv <= scale);
                t_member.push(tv <= scale);
            }
            if best.as_ref().map_or(true, |b| !b.good || score < b.score) {
                best = Some(NetCell { key: key.clone(), point: Some(x), good: true, score, q_member, t_member, bad_candidates: 0 });
            }
            if score == 0.0 {
                break;
            }
        }
        let mut cell = best.unwrap_or(NetCell {
            key: key.clone(),
            point: None,
            good: false,
            score: f64::INFINITY,
            q_member: vec![false; levels],
            t_member: vec![false; levels],
            bad_candidates: 0,
        });
        cell.bad_candidates = bad;
        cell
    }

    /// Materialized cells in key order.
    pub fn materialized(&self) -> Vec<Arc<NetCell>> {
        let mut v: Vec<Arc<NetCell>> = self.cells.iter().map(|e| e.value().clone()).collect();
        v.sort_by(|a, b| a.key.cmp(&b.key));
        v
    }
}
