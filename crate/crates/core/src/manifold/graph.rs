//! Random geometric graph sampled from an analytic model.

use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::cmp::Ordering;
use std::sync::{Arc, Mutex};

use rand::Rng as _;
use serde::Serialize;

use super::{Extension, Geometry, GraphDomain, ManifoldSpec, Quadrature, TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::par;
use crate::point::{norm, scale, Coords, Point};
use crate::rng;
use crate::spatial::GridIndex;

pub const DEFAULT_CONNECTIVITY: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphStats {
    pub vertices: usize,
    pub edges: usize,
    pub connectivity_radius: f64,
    pub mean_edge_length: f64,
    pub discarded_vertices: usize,
}

pub(crate) struct ShortestPaths {
    pub dist: Vec<f64>,
    pub parent: Vec<u32>,
    pub unique: Vec<bool>,
}

pub(crate) struct GraphSample {
    base: Box<dyn Geometry>,
    points: Vec<Point>,
    offsets: Vec<usize>,
    nbrs: Vec<u32>,
    weights: Vec<f64>,
    vertex_weight: f64,
    mean_edge: f64,
    connectivity: f64,
    discarded: usize,
    index: GridIndex,
    cache: Mutex<(HashMap<u32, Arc<ShortestPaths>>, VecDeque<u32>)>,
    cache_cap: usize,
}

#[derive(PartialEq)]
struct Item(f64, u32);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl GraphSample {
    pub fn build(base: Box<dyn Geometry>, spec: &ManifoldSpec, seed: u64) -> Result<Self> {
        let n = base.dim();
        let count = spec.samples.expect("validated");
        let domain = spec.domain_radius;
        let center = base.center();
        let shape = spec.graph_domain.unwrap_or_default();
        let mut rng = rng::stream(seed, "graph-vertices", 0);
        let mut pts = vec![center.clone()];
        let mut u = vec![0.0; n + 1];
        let mut trials = 0usize;
        while pts.len() < count {
            trials += 1;
            if trials > count * 5000 {
                return Err(Error::EmptyRegion("graph vertex sampling exhausted".into()));
            }
            match shape {
                GraphDomain::Ball => {
                    for x in u.iter_mut() {
                        *x = rng.gen();
                    }
                    if let Some(p) = base.ball_point(&center, domain, &u) {
                        pts.push(p);
                    }
                }
                GraphDomain::Segment => {
                    let mut c = Coords::from_elem(0.0, n);
                    c[0] = domain * (2.0 * rng.gen::<f64>() - 1.0);
                    pts.push(Point { coords: c, vertex: None });
                }
            }
        }
        let factor = spec.connectivity_factor.unwrap_or(DEFAULT_CONNECTIVITY);
        let spacing = match shape {
            GraphDomain::Ball => (base.ball_volume(&center, domain) / count as f64).powf(1.0 / n as f64),
            GraphDomain::Segment => 2.0 * domain / count as f64,
        };
        let radius = factor * spacing;
        let stretch = base.chart_stretch();
        let index = GridIndex::new(pts.iter().map(|p| p.coords.as_slice()), radius * stretch);
        let adj: Vec<Vec<(u32, f64)>> = par::map(pts.len(), |i| {
            index
                .within(&pts[i].coords, radius * stretch)
                .into_iter()
                .filter(|&j| j as usize != i)
                .filter_map(|j| {
                    let d = base.distance(&pts[i], &pts[j as usize]);
                    (d <= radius).then_some((j, d))
                })
                .collect()
        });

        // Keep the connected component containing the center vertex.
        let mut comp = vec![false; pts.len()];
        let mut queue = VecDeque::from([0usize]);
        comp[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &adj[v] {
                if !comp[w as usize] {
                    comp[w as usize] = true;
                    queue.push_back(w as usize);
                }
            }
        }
        let mut remap = vec![u32::MAX; pts.len()];
        let mut kept = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            if comp[i] {
                remap[i] = kept.len() as u32;
                kept.push(p.clone());
            }
        }
        let discarded = pts.len() - kept.len();
        let mut offsets = vec![0usize];
        let mut nbrs = Vec::new();
        let mut weights = Vec::new();
        for (i, row) in adj.iter().enumerate() {
            if !comp[i] {
                continue;
            }
            for &(j, d) in row {
                nbrs.push(remap[j as usize]);
                weights.push(d);
            }
            offsets.push(nbrs.len());
        }
        if nbrs.is_empty() {
            return Err(Error::EmptyRegion("graph has no edges; raise samples or connectivity".into()));
        }
        let mean_edge = weights.iter().sum::<f64>() / weights.len() as f64;
        let vertex_weight = match shape {
            GraphDomain::Ball => base.ball_volume(&center, domain) / count as f64,
            GraphDomain::Segment => 2.0 * domain / count as f64,
        };
        let points: Vec<Point> = kept.into_iter().enumerate().map(|(i, p)| p.with_vertex(i as u32)).collect();
        let index = GridIndex::new(points.iter().map(|p| p.coords.as_slice()), radius * stretch);
        let cache_cap = (20_000_000 / points.len().max(1)).clamp(8, 512);
        Ok(GraphSample {
            base,
            points,
            offsets,
            nbrs,
            weights,
            vertex_weight,
            mean_edge,
            connectivity: radius,
            discarded,
            index,
            cache: Mutex::new((HashMap::new(), VecDeque::new())),
            cache_cap,
        })
    }

    pub fn base(&self) -> &dyn Geometry {
        self.base.as_ref()
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            vertices: self.points.len(),
            edges: self.nbrs.len() / 2,
            connectivity_radius: self.connectivity,
            mean_edge_length: self.mean_edge,
            discarded_vertices: self.discarded,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn mean_edge(&self) -> f64 {
        self.mean_edge
    }

    pub fn vertex_point(&self, i: u32) -> Point {
        self.points[i as usize].clone()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.nbrs[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn nearest(&self, coords: &[f64]) -> Option<u32> {
        self.index.nearest(coords)
    }

    pub fn k_nearest(&self, coords: &[f64], k: usize) -> Vec<u32> {
        self.index.k_nearest(coords, k)
    }

    pub fn vertex_of(&self, x: &Point) -> u32 {
        match x.vertex {
            Some(v) if (v as usize) < self.points.len() => v,
            _ => self.nearest(&x.coords).expect("graph has vertices"),
        }
    }

    fn dijkstra(&self, src: u32) -> ShortestPaths {
        let n = self.points.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![u32::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src as usize] = 0.0;
        heap.push(Item(0.0, src));
        while let Some(Item(d, v)) = heap.pop() {
            let vi = v as usize;
            if done[vi] {
                continue;
            }
            done[vi] = true;
            order.push(v);
            for k in self.offsets[vi]..self.offsets[vi + 1] {
                let w = self.nbrs[k] as usize;
                let nd = d + self.weights[k];
                if nd < dist[w] || (nd == dist[w] && v < parent[w]) {
                    dist[w] = nd;
                    parent[w] = v;
                    heap.push(Item(nd, w as u32));
                }
            }
        }
        let mut unique = vec![false; n];
        for &v in &order {
            let vi = v as usize;
            if v == src {
                unique[vi] = true;
                continue;
            }
            let p = parent[vi];
            let tol = dist[vi] * (1.0 + TIE_TOLERANCE);
            let tie = (self.offsets[vi]..self.offsets[vi + 1]).any(|k| {
                let u = self.nbrs[k];
                u != p && dist[u as usize] + self.weights[k] <= tol
            });
            unique[vi] = !tie && unique[p as usize];
        }
        ShortestPaths { dist, parent, unique }
    }

    pub fn paths(&self, src: u32) -> Arc<ShortestPaths> {
        if let Some(sp) = self.cache.lock().expect("cache lock").0.get(&src) {
            return sp.clone();
        }
        let sp = Arc::new(self.dijkstra(src));
        let mut guard = self.cache.lock().expect("cache lock");
        let (map, fifo) = &mut *guard;
        if !map.contains_key(&src) {
            map.insert(src, sp.clone());
            fifo.push_back(src);
            while fifo.len() > self.cache_cap {
                if let Some(old) = fifo.pop_front() {
                    map.remove(&old);
                }
            }
        }
        sp
    }

    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        let (a, b) = (self.vertex_of(x), self.vertex_of(y));
        if a == b {
            return 0.0;
        }
        self.paths(a).dist[b as usize]
    }

    pub fn path_unique(&self, x: &Point, y: &Point) -> bool {
        self.paths(self.vertex_of(x)).unique[self.vertex_of(y) as usize]
    }

    fn path_vertices(&self, a: u32, b: u32) -> Vec<u32> {
        let sp = self.paths(a);
        let mut out = vec![b];
        let mut v = b;
        while v != a {
            v = sp.parent[v as usize];
            if v == u32::MAX {
                break;
            }
            out.push(v);
        }
        out.reverse();
        out
    }

    pub fn path(&self, x: &Point, y: &Point) -> Vec<Point> {
        self.path_vertices(self.vertex_of(x), self.vertex_of(y))
            .into_iter()
            .map(|v| self.vertex_point(v))
            .collect()
    }

    pub fn interpolate(&self, x: &Point, y: &Point, t: f64) -> Point {
        let (a, b) = (self.vertex_of(x), self.vertex_of(y));
        let sp = self.paths(a);
        let target = t.clamp(0.0, 1.0) * sp.dist[b as usize];
        let verts = self.path_vertices(a, b);
        let best = verts
            .iter()
            .min_by(|&&u, &&v| {
                (sp.dist[u as usize] - target).abs().total_cmp(&(sp.dist[v as usize] - target).abs())
            })
            .copied()
            .unwrap_or(a);
        self.vertex_point(best)
    }

    /// Extension of a shortest path from `q` through `x` to the shell at `target`.
    pub fn extend(&self, q: &Point, x: &Point, target: f64) -> Extension {
        let (vq, vx) = (self.vertex_of(q), self.vertex_of(x));
        let spq = self.paths(vq);
        let spx = self.paths(vx);
        let rx = spq.dist[vx as usize];
        let tol = self.mean_edge;
        let mut best: Option<(f64, f64, u32)> = None;
        let mut limit = rx;
        for v in 0..self.points.len() {
            let (dq, dx) = (spq.dist[v], spx.dist[v]);
            let defect = if dq <= rx { dq + dx - rx } else { rx + dx - dq };
            if dq > rx && defect <= tol {
                limit = limit.max(dq);
            }
            let off = (dq - target).abs();
            if off <= tol {
                let key = (defect, off, v as u32);
                if best.map_or(true, |b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                    best = Some(key);
                }
            }
        }
        match best {
            Some((defect, _, v)) if rx > 0.0 => Extension {
                point: Some(self.vertex_point(v)),
                well_defined: defect <= tol && spq.unique[vx as usize] && spq.unique[v as usize],
                ray_limit: limit,
            },
            _ => Extension { point: None, well_defined: false, ray_limit: limit },
        }
    }

    pub fn ray_limit(&self, q: &Point, x: &Point) -> f64 {
        self.extend(q, x, f64::INFINITY).ray_limit
    }

    pub fn ball_vertices(&self, c: &Point, r: f64) -> Vec<u32> {
        let sp = self.paths(self.vertex_of(c));
        (0..self.points.len() as u32).filter(|&v| sp.dist[v as usize] <= r).collect()
    }

    pub fn ball_volume(&self, c: &Point, r: f64) -> f64 {
        self.ball_vertices(c, r).len() as f64 * self.vertex_weight
    }

    pub fn sphere_area(&self, c: &Point, r: f64) -> f64 {
        let h = self.mean_edge;
        let sp = self.paths(self.vertex_of(c));
        let shell = sp.dist.iter().filter(|&&d| d > r - 0.5 * h && d <= r + 0.5 * h).count();
        shell as f64 * self.vertex_weight / h
    }

    pub fn sample_ball(&self, c: &Point, r: f64, count: usize, seed: u64, tag: &str) -> Result<Vec<Point>> {
        let verts = self.ball_vertices(c, r);
        if verts.is_empty() {
            return Err(Error::EmptyRegion(format!("no graph vertices within {r}")));
        }
        let mut rng = rng::stream(seed, tag, 0);
        Ok((0..count).map(|_| self.vertex_point(verts[rng.gen_range(0..verts.len())])).collect())
    }

    pub fn quadrature_ball(&self, c: &Point, r: f64) -> Result<Quadrature> {
        let verts = self.ball_vertices(c, r);
        if verts.is_empty() {
            return Err(Error::EmptyRegion(format!("no graph vertices within {r}")));
        }
        Ok(Quadrature {
            weights: vec![self.vertex_weight; verts.len()],
            points: verts.into_iter().map(|v| self.vertex_point(v)).collect(),
        })
    }

    pub fn random_direction(&self, base: &Point, rng: &mut rng::Rng) -> Coords {
        let v = self.vertex_of(base);
        let nb = self.neighbors(v);
        if nb.is_empty() {
            return super::random_unit(self.base.dim(), rng);
        }
        let w = nb[rng.gen_range(0..nb.len())];
        let d = self.base.log(&self.points[v as usize], &self.points[w as usize]);
        scale(&d, 1.0 / norm(&d))
    }

    pub fn exp(&self, x: &Point, v: &[f64]) -> Option<Point> {
        let target = self.base.exp(&self.points[self.vertex_of(x) as usize], v);
        if !self.base.chart_valid(&target.coords) {
            return None;
        }
        let w = self.nearest(&target.coords)?;
        let gap = self.base.distance(&target, &self.points[w as usize]);
        (gap <= self.connectivity).then(|| self.vertex_point(w))
    }
}
