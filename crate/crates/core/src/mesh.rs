//! Discrete Laplacians on point sets.
//!
//! In two dimensions nodes are triangulated (Delaunay in chart coordinates)
//! and the P1 stiffness matrix is assembled from intrinsic edge lengths. In
//! higher dimensions a Gaussian-kernel point-cloud Laplacian is used.

use spade::{DelaunayTriangulation, HasPosition, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::manifold::Manifold;
use crate::par;
use crate::point::Point;
use crate::spatial::GridIndex;
use crate::sparse::Csr;

struct Vtx {
    p: Point2<f64>,
    i: u32,
}

impl HasPosition for Vtx {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.p
    }
}

/// Nodes with an assembled stiffness matrix and lumped mass.
pub struct Discretization {
    pub nodes: Vec<Point>,
    pub stiffness: Csr,
    pub mass: Vec<f64>,
    pub triangles: Vec<[u32; 3]>,
    pub degenerate: usize,
    node_tris: Vec<Vec<u32>>,
    index: GridIndex,
    cutoff: Option<f64>,
}

impl Discretization {
    /// `volume` is the measure of the region the nodes sample; the
    /// triangulated path computes it from the mesh instead.
    pub fn build(m: &Manifold, nodes: Vec<Point>, volume: f64) -> Result<Self> {
        if nodes.len() < 4 {
            return Err(Error::EmptyRegion("too few nodes to discretize".into()));
        }
        if m.dim() == 2 {
            Self::triangulated(m, nodes)
        } else {
            Self::point_cloud(m, nodes, volume)
        }
    }

    fn triangulated(m: &Manifold, nodes: Vec<Point>) -> Result<Self> {
        let verts: Vec<Vtx> = nodes
            .iter()
            .enumerate()
            .map(|(i, p)| Vtx { p: Point2::new(p.coords[0], p.coords[1]), i: i as u32 })
            .collect();
        let tri: DelaunayTriangulation<Vtx> = DelaunayTriangulation::bulk_load_stable(verts)
            .map_err(|e| Error::Geometry(format!("triangulation failed: {e:?}")))?;
        let triangles: Vec<[u32; 3]> = tri
            .inner_faces()
            .map(|f| {
                let v = f.vertices();
                [v[0].data().i, v[1].data().i, v[2].data().i]
            })
            .collect();
        let local: Vec<Option<([f64; 3], f64)>> = par::map(triangles.len(), |t| {
            let [a, b, c] = triangles[t];
            let (pa, pb, pc) = (&nodes[a as usize], &nodes[b as usize], &nodes[c as usize]);
            // Squared lengths of the edges opposite each vertex.
            let la = m.distance(pb, pc).powi(2);
            let lb = m.distance(pa, pc).powi(2);
            let lc = m.distance(pa, pb).powi(2);
            let s = 2.0 * (la * lb + lb * lc + lc * la) - (la * la + lb * lb + lc * lc);
            if !(s > 0.0) {
                return None;
            }
            let area = 0.25 * s.sqrt();
            let cot = [(lb + lc - la) / (4.0 * area), (la + lc - lb) / (4.0 * area), (la + lb - lc) / (4.0 * area)];
            Some((cot, area))
        });
        let n = nodes.len();
        let mut mass = vec![0.0; n];
        let mut trip = Vec::with_capacity(triangles.len() * 9);
        let mut degenerate = 0;
        for (t, loc) in triangles.iter().zip(&local) {
            let Some((cot, area)) = loc else {
                degenerate += 1;
                continue;
            };
            for k in 0..3 {
                let (i, j) = (t[(k + 1) % 3], t[(k + 2) % 3]);
                let w = 0.5 * cot[k];
                trip.push((i, j, -w));
                trip.push((j, i, -w));
                trip.push((i, i, w));
                trip.push((j, j, w));
                mass[t[k] as usize] += area / 3.0;
            }
        }
        let mut node_tris = vec![Vec::new(); n];
        for (k, t) in triangles.iter().enumerate() {
            for &v in t {
                node_tris[v as usize].push(k as u32);
            }
        }
        let index = grid_for(&nodes);
        Ok(Discretization {
            stiffness: Csr::from_triplets(n, trip),
            nodes,
            mass,
            triangles,
            degenerate,
            node_tris,
            index,
            cutoff: None,
        })
    }

    fn point_cloud(m: &Manifold, nodes: Vec<Point>, volume: f64) -> Result<Self> {
        let n = nodes.len();
        let dim = m.dim() as i32;
        let index = grid_for(&nodes);
        let spacing: f64 = par::sum(n, |i| {
            let nn = index.k_nearest(&nodes[i].coords, 2);
            nn.get(1).map_or(0.0, |&j| m.distance(&nodes[i], &nodes[j as usize]))
        }) / n as f64;
        let t = (1.5 * spacing).powi(2);
        let cutoff = 3.0 * (2.0 * t).sqrt();
        let stretch = 1.0 + (m.dim() as f64).sqrt();
        // Every node carries the same volume; the kernel normalization
        // 1 / (t (4 pi t)^{n/2}) turns the graph Laplacian into the Laplacian.
        let norm = 1.0 / (t * (4.0 * std::f64::consts::PI * t).powf(dim as f64 / 2.0));
        let rows: Vec<Vec<(u32, f64)>> = par::map(n, |i| {
            index
                .within(&nodes[i].coords, cutoff * stretch)
                .into_iter()
                .filter(|&j| j as usize != i)
                .filter_map(|j| {
                    let d = m.distance(&nodes[i], &nodes[j as usize]);
                    (d <= cutoff).then(|| (j, (-d * d / (4.0 * t)).exp()))
                })
                .collect()
        });
        Ok(Discretization {
            stiffness: Csr { n, indptr: vec![0; n + 1], indices: vec![], values: vec![] },
            nodes,
            mass: vec![],
            triangles: vec![],
            degenerate: 0,
            node_tris: vec![],
            index,
            cutoff: Some(cutoff),
        }
        .with_kernel(rows, norm, volume / n as f64))
    }

    fn with_kernel(mut self, rows: Vec<Vec<(u32, f64)>>, norm: f64, w: f64) -> Self {
        let n = self.nodes.len();
        // Uniform per-node volume w: K = w^2 norm (D - W), M = w.
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            let mut deg = 0.0;
            for &(j, k) in row {
                trip.push((i as u32, j, -w * w * norm * k));
                deg += k;
            }
            trip.push((i as u32, i as u32, w * w * norm * deg));
        }
        self.stiffness = Csr::from_triplets(n, trip);
        self.mass = vec![w; n];
        self
    }

    /// Kernel support radius of a point-cloud Laplacian.
    pub fn kernel_cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    /// Linear interpolation of nodal values at chart position `x`.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        if self.triangles.is_empty() {
            return self.kernel_interpolate(values, x);
        }
        let mut best: Option<(f64, f64)> = None;
        for v in self.index.k_nearest(x, 12) {
            for &t in &self.node_tris[v as usize] {
                let tri = self.triangles[t as usize];
                let p: Vec<&[f64]> = tri.iter().map(|&i| &self.nodes[i as usize].coords[..2]).collect();
                let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                if det.abs() < 1e-300 {
                    continue;
                }
                let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
                let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
                let l0 = 1.0 - l1 - l2;
                let worst = l0.min(l1).min(l2);
                let val = l0 * values[tri[0] as usize] + l1 * values[tri[1] as usize] + l2 * values[tri[2] as usize];
                if worst >= -1e-12 {
                    return Some(val);
                }
                if best.map_or(true, |b| worst > b.0) {
                    best = Some((worst, val));
                }
            }
        }
        best.filter(|b| b.0 > -1e-6).map(|b| b.1)
    }

    fn kernel_interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        let nn = self.index.k_nearest(x, self.nodes[0].dim() + 1);
        let mut wsum = 0.0;
        let mut acc = 0.0;
        for j in nn {
            let d2: f64 = self.nodes[j as usize].coords.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 == 0.0 {
                return Some(values[j as usize]);
            }
            let w = 1.0 / d2;
            wsum += w;
            acc += w * values[j as usize];
        }
        (wsum > 0.0).then(|| acc / wsum)
    }

    /// Mean edge length of the triangulation (or nearest-neighbour spacing).
    pub fn mean_edge(&self, m: &Manifold) -> f64 {
        self.mean_edge_among(m, usize::MAX)
    }

    /// Mean edge length over nodes with index below `limit`.
    pub fn mean_edge_among(&self, m: &Manifold, limit: usize) -> f64 {
        if self.triangles.is_empty() {
            let n = self.nodes.len().min(limit);
            return (0..n)
                .map(|i| {
                    let nn = self.index.k_nearest(&self.nodes[i].coords, 2);
                    nn.get(1).map_or(0.0, |&j| m.distance(&self.nodes[i], &self.nodes[j as usize]))
                })
                .sum::<f64>()
                / n as f64;
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                if a < b && (b as usize) < limit {
                    total += m.distance(&self.nodes[a as usize], &self.nodes[b as usize]);
                    count += 1;
                }
            }
        }
        total / count.max(1) as f64
    }
}

fn grid_for(nodes: &[Point]) -> GridIndex {
    let n = nodes.len().max(1);
    let dim = nodes[0].dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in nodes {
        for d in 0..dim {
            lo[d] = lo[d].min(p.coords[d]);
            hi[d] = hi[d].max(p.coords[d]);
        }
    }
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(1e-300)).product();
    let cell = (4.0 * vol / n as f64).powf(1.0 / dim as f64).max(1e-300);
    GridIndex::new(nodes.iter().map(|p| p.coords.as_slice()), cell)
}
