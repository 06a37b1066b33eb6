//! Geodesic cap of a round sphere.
//!
//! Chart: azimuthal-equidistant coordinates about the pole. The frame at a
//! point is the image of the pole frame under the minimal rotation taking the
//! pole to that point.

use std::f64::consts::PI;

use super::Geometry;
use crate::point::{dot, norm, unit_sphere_area, Coords, Point};
use crate::quad;

pub(crate) struct SphereCap {
    n: usize,
    radius: f64,
    domain: f64,
}

type Amb = smallvec::SmallVec<[f64; 5]>;

impl SphereCap {
    pub fn new(n: usize, radius: f64, domain: f64) -> Self {
        SphereCap { n, radius, domain }
    }

    /// Unit ambient vector of a chart point; the pole is the last axis.
    fn ambient(&self, x: &Point) -> Amb {
        let s = norm(&x.coords);
        let ang = s / self.radius;
        let mut y = Amb::new();
        let f = if s > 0.0 { ang.sin() / s } else { 1.0 / self.radius };
        y.extend(x.coords.iter().map(|c| c * f));
        y.push(ang.cos());
        y
    }

    fn chart(&self, y: &[f64]) -> Point {
        let n = self.n;
        let h = norm(&y[..n]);
        let ang = h.atan2(y[n]);
        let s = ang * self.radius;
        let f = if h > 0.0 { s / h } else { self.radius };
        Point { coords: y[..n].iter().map(|c| c * f).collect(), vertex: None }
    }

    /// Applies the minimal rotation taking the pole to `y` to the vector `v`.
    fn rotate(&self, y: &[f64], v: &[f64]) -> Amb {
        let n = self.n;
        let mut np = Amb::from_elem(0.0, n + 1);
        np[n] = 1.0;
        let s: Amb = np.iter().zip(y).map(|(a, b)| a + b).collect();
        let c = (dot(&s, v)) / (1.0 + y[n]);
        let nv = v[n];
        v.iter().zip(&s).zip(y).map(|((vi, si), yi)| vi - c * si + 2.0 * nv * yi).collect()
    }

    fn frame_to_ambient(&self, y: &[f64], v: &[f64]) -> Amb {
        let mut e = Amb::from_slice(v);
        e.push(0.0);
        self.rotate(y, &e)
    }

    fn ambient_to_frame(&self, y: &[f64], w: &[f64]) -> Coords {
        // Components along the rotated frame vectors.
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut e = Amb::from_elem(0.0, n + 1);
                e[i] = 1.0;
                dot(&self.rotate(y, &e), w)
            })
            .collect()
    }

    fn angle(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x + y).powi(2)).sum::<f64>().sqrt();
        2.0 * d.atan2(s)
    }
}

impl Geometry for SphereCap {
    fn dim(&self) -> usize {
        self.n
    }

    fn distance(&self, x: &Point, y: &Point) -> f64 {
        self.radius * self.angle(&self.ambient(x), &self.ambient(y))
    }

    fn log(&self, x: &Point, y: &Point) -> Coords {
        let a = self.ambient(x);
        let b = self.ambient(y);
        let diff: Amb = b.iter().zip(&a).map(|(p, q)| p - q).collect();
        let proj = dot(&diff, &a);
        let w: Amb = diff.iter().zip(&a).map(|(d, q)| d - proj * q).collect();
        let wl = norm(&w);
        if wl == 0.0 {
            return Coords::from_elem(0.0, self.n);
        }
        let d = self.radius * self.angle(&a, &b);
        let amb: Amb = w.iter().map(|c| c * d / wl).collect();
        self.ambient_to_frame(&a, &amb)
    }

    fn exp(&self, x: &Point, v: &[f64]) -> Point {
        let a = self.ambient(x);
        let l = norm(v);
        if l == 0.0 {
            return x.clone();
        }
        let t = self.frame_to_ambient(&a, v);
        let ang = l / self.radius;
        let y: Amb = a.iter().zip(&t).map(|(p, q)| ang.cos() * p + ang.sin() * q / l).collect();
        self.chart(&y)
    }

    fn segment_unique(&self, x: &Point, y: &Point) -> bool {
        self.distance(x, y) < PI * self.radius * (1.0 - super::TIE_TOLERANCE)
    }

    fn ray_limit(&self, _q: &Point, _x: &Point) -> f64 {
        PI * self.radius
    }

    fn ball_volume(&self, _c: &Point, r: f64) -> f64 {
        let rr = self.radius;
        let t = (r / rr).min(PI);
        if self.n == 2 {
            return 2.0 * PI * rr * rr * (1.0 - t.cos());
        }
        let k = self.n as i32 - 1;
        unit_sphere_area(self.n) * rr.powi(self.n as i32) * quad::integrate(|u| u.sin().powi(k), 0.0, t, 4)
    }

    fn sphere_area(&self, _c: &Point, r: f64) -> f64 {
        let t = (r / self.radius).min(PI);
        unit_sphere_area(self.n) * (self.radius * t.sin()).powi(self.n as i32 - 1)
    }

    fn ball_point(&self, c: &Point, r: f64, u: &[f64]) -> Option<Point> {
        let n = self.n;
        let r = r.min(PI * self.radius);
        let v: Coords = u[..n].iter().map(|t| r * (2.0 * t - 1.0)).collect();
        let l = norm(&v);
        if l > r {
            return None;
        }
        let jac = if l > 0.0 { (self.radius * (l / self.radius).sin() / l).powi(n as i32 - 1) } else { 1.0 };
        (u[n] <= jac).then(|| self.exp(c, &v))
    }

    fn chart_valid(&self, coords: &[f64]) -> bool {
        coords.iter().all(|c| c.is_finite()) && norm(coords) < PI * self.radius
    }

    fn radial_about(&self, _q: &Point) -> bool {
        true
    }

    fn chart_stretch(&self) -> f64 {
        let t = (self.domain / self.radius).min(PI * 0.999);
        if t <= 0.0 {
            1.0
        } else {
            t / t.sin()
        }
    }
}
