//! Uniform-grid point index in chart coordinates.

use std::collections::HashMap;

use smallvec::SmallVec;

type Key = SmallVec<[i64; 4]>;

pub struct GridIndex {
    cell: f64,
    dim: usize,
    buckets: HashMap<Key, Vec<u32>>,
    points: Vec<SmallVec<[f64; 4]>>,
    lo: Key,
    hi: Key,
}

impl GridIndex {
    pub fn new<'a>(points: impl IntoIterator<Item = &'a [f64]>, cell: f64) -> Self {
        let points: Vec<SmallVec<[f64; 4]>> = points.into_iter().map(SmallVec::from_slice).collect();
        let dim = points.first().map_or(0, |p| p.len());
        let mut buckets: HashMap<Key, Vec<u32>> = HashMap::new();
        let mut lo = Key::from_elem(i64::MAX, dim);
        let mut hi = Key::from_elem(i64::MIN, dim);
        for (i, p) in points.iter().enumerate() {
            let k = key(p, cell);
            for d in 0..dim {
                lo[d] = lo[d].min(k[d]);
                hi[d] = hi[d].max(k[d]);
            }
            buckets.entry(k).or_default().push(i as u32);
        }
        GridIndex { cell, dim, buckets, points, lo, hi }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: u32) -> &[f64] {
        &self.points[i as usize]
    }

    fn visit_shell(&self, center: &Key, ring: i64, f: &mut dyn FnMut(u32)) {
        let dim = self.dim;
        let side = (2 * ring + 1) as usize;
        let total = side.pow(dim as u32);
        let mut k = Key::from_elem(0, dim);
        for idx in 0..total {
            let mut rem = idx;
            let mut on_shell = false;
            for d in 0..dim {
                let off = (rem % side) as i64 - ring;
                rem /= side;
                if off.abs() == ring {
                    on_shell = true;
                }
                k[d] = center[d] + off;
            }
            if !on_shell && ring > 0 {
                continue;
            }
            if let Some(b) = self.buckets.get(&k) {
                for &i in b {
                    f(i);
                }
            }
        }
    }

    /// Indices within chart distance `r` of `q`, in ascending index order.
    pub fn within(&self, q: &[f64], r: f64) -> Vec<u32> {
        let c = key(q, self.cell);
        let rings = (r / self.cell).ceil() as i64;
        let mut out = Vec::new();
        for ring in 0..=rings {
            self.visit_shell(&c, ring, &mut |i| {
                if dist2(self.point(i), q) <= r * r {
                    out.push(i);
                }
            });
        }
        out.sort_unstable();
        out
    }

    /// Nearest indexed point; ties go to the lowest index.
    pub fn nearest(&self, q: &[f64]) -> Option<u32> {
        self.k_nearest(q, 1).first().copied()
    }

    /// The `k` nearest points ordered by distance, ties by index.
    pub fn k_nearest(&self, q: &[f64], k: usize) -> Vec<u32> {
        if self.points.is_empty() || k == 0 {
            return Vec::new();
        }
        let c = key(q, self.cell);
        let mut found: Vec<(f64, u32)> = Vec::new();
        let max_ring = (0..self.dim)
            .map(|d| (c[d] - self.lo[d]).abs().max((self.hi[d] - c[d]).abs()))
            .max()
            .unwrap_or(0);
        for ring in 0..=max_ring {
            self.visit_shell(&c, ring, &mut |i| found.push((dist2(self.point(i), q), i)));
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                // Points outside the scanned rings are at least `ring * cell` away.
                let reach = ring as f64 * self.cell;
                if found[k - 1].0 <= reach * reach {
                    break;
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(k);
        found.into_iter().map(|(_, i)| i).collect()
    }
}

fn key(p: &[f64], cell: f64) -> Key {
    p.iter().map(|x| (x / cell).floor() as i64).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_matches_brute_force() {
        let pts: Vec<[f64; 2]> = (0..500)
            .map(|i| {
                let t = i as f64;
                [(t * 0.618).fract() * 2.0 - 1.0, (t * 0.414).fract() * 2.0 - 1.0]
            })
            .collect();
        let idx = GridIndex::new(pts.iter().map(|p| p.as_slice()), 0.1);
        for q in [[0.3, -0.2], [0.99, 0.99], [-2.0, 0.0]] {
            let brute = (0..pts.len())
                .min_by(|&a, &b| dist2(&pts[a], &q).total_cmp(&dist2(&pts[b], &q)))
                .unwrap() as u32;
            assert_eq!(idx.nearest(&q), Some(brute));
            let w = idx.within(&q, 0.25);
            let bw: Vec<u32> = (0..pts.len() as u32).filter(|&i| dist2(&pts[i as usize], &q) <= 0.0625).collect();
            assert_eq!(w, bw);
        }
    }
}
