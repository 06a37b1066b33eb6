//! Flat cone of total angle `2 pi alpha` times `R^{n-2}`.
//!
//! Chart: the first two coordinates are `s (cos phi, sin phi)` with
//! `phi in (-pi, pi]`; the true angle is `theta = alpha phi`. The frame at a
//! point `x` is the Cartesian frame of the unrolled sheet in which `x` has
//! angle `theta_x`. At the apex the frame is the chart frame itself.

use std::f64::consts::{PI, TAU};

use super::Geometry;
use crate::point::{norm, unit_sphere_area, Coords, Point};
use crate::quad;

pub(crate) struct Cone {
    n: usize,
    alpha: f64,
}

const APEX_EPS: f64 = 1e-300;

impl Cone {
    pub fn new(n: usize, alpha: f64) -> Self {
        Cone { n, alpha }
    }

    fn polar(&self, x: &Point) -> (f64, f64) {
        let (u, v) = (x.coords[0], x.coords[1]);
        let s = u.hypot(v);
        let th = if s > APEX_EPS { self.alpha * v.atan2(u) } else { 0.0 };
        (s, th)
    }

    fn wrap(&self, th: f64) -> f64 {
        let period = TAU * self.alpha;
        let mut t = th - period * (th / period).round();
        if t <= -PI * self.alpha {
            t += period;
        }
        t
    }

    fn from_polar(&self, s: f64, th: f64, rest: impl Iterator<Item = f64>) -> Point {
        let phi = self.wrap(th) / self.alpha;
        let mut c = Coords::new();
        c.push(s * phi.cos());
        c.push(s * phi.sin());
        c.extend(rest);
        Point { coords: c, vertex: None }
    }

    /// Apex-centered disc area of `B_rho(c)` in the 2-D factor, with `a = d(c, apex)`.
    fn disc_area(&self, a: f64, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        if a >= rho || a <= 0.0 {
            return if a <= 0.0 { PI * self.alpha * rho * rho } else { PI * rho * rho };
        }
        let h = PI * self.alpha;
        let f = |t: f64| {
            let tp = a * t.cos() + (rho * rho - a * a * t.sin().powi(2)).max(0.0).sqrt();
            0.5 * tp * tp
        };
        quad::integrate(f, -h, h, 8)
    }

    fn disc_perimeter(&self, a: f64, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        if a >= rho || a <= 0.0 {
            return if a <= 0.0 { TAU * self.alpha * rho } else { TAU * rho };
        }
        let h = PI * self.alpha;
        let f = |t: f64| {
            let disc = (rho * rho - a * a * t.sin().powi(2)).max(1e-300).sqrt();
            let tp = a * t.cos() + disc;
            tp * rho / disc
        };
        quad::integrate(f, -h, h, 16)
    }
}

impl Geometry for Cone {
    fn dim(&self) -> usize {
        self.n
    }

    fn log(&self, x: &Point, y: &Point) -> Coords {
        let (sx, tx) = self.polar(x);
        let (sy, ty) = self.polar(y);
        let mut v = Coords::new();
        if sx <= APEX_EPS {
            v.push(y.coords[0]);
            v.push(y.coords[1]);
        } else {
            let d = self.wrap(ty - tx);
            let (a, b) = (tx + d, tx);
            v.push(sy * a.cos() - sx * b.cos());
            v.push(sy * a.sin() - sx * b.sin());
        }
        v.extend(y.coords[2..].iter().zip(&x.coords[2..]).map(|(p, q)| p - q));
        v
    }

    fn exp(&self, x: &Point, v: &[f64]) -> Point {
        let (sx, tx) = self.polar(x);
        let rest = x.coords[2..].iter().zip(&v[2..]).map(|(a, b)| a + b);
        if sx <= APEX_EPS {
            let s = v[0].hypot(v[1]);
            let th = if s > APEX_EPS { self.alpha * v[1].atan2(v[0]) } else { 0.0 };
            return self.from_polar(s, th, rest);
        }
        let (ux, uy) = (sx * tx.cos(), sx * tx.sin());
        let (px, py) = (ux + v[0], uy + v[1]);
        let s = px.hypot(py);
        if s <= APEX_EPS {
            return self.from_polar(0.0, 0.0, rest);
        }
        let sweep = (ux * py - uy * px).atan2(ux * px + uy * py);
        self.from_polar(s, tx + sweep, rest)
    }

    fn segment_unique(&self, x: &Point, y: &Point) -> bool {
        if self.alpha >= 1.0 {
            return true;
        }
        let (sx, tx) = self.polar(x);
        let (sy, ty) = self.polar(y);
        if sx <= APEX_EPS || sy <= APEX_EPS {
            return true;
        }
        let d = self.wrap(ty - tx).abs();
        let other = TAU * self.alpha - d;
        let dz2: f64 = x.coords[2..].iter().zip(&y.coords[2..]).map(|(a, b)| (a - b).powi(2)).sum();
        let len = |ang: f64| ((sx - sy).powi(2) + 4.0 * sx * sy * (0.5 * ang).sin().powi(2) + dz2).sqrt();
        let (main, alt) = (len(d), len(other.min(PI)));
        alt - main > super::TIE_TOLERANCE * main
    }

    fn ray_limit(&self, q: &Point, x: &Point) -> f64 {
        if self.alpha >= 1.0 {
            return f64::INFINITY;
        }
        let (sq, tq) = self.polar(q);
        if sq <= APEX_EPS {
            return f64::INFINITY;
        }
        let v = self.log(q, x);
        let len = norm(&v);
        let (wx, wy) = (v[0] / len, v[1] / len);
        if wx.hypot(wy) < 1e-14 {
            return f64::INFINITY;
        }
        let (qx, qy) = (sq * tq.cos(), sq * tq.sin());
        let mut best = f64::INFINITY;
        for sign in [-1.0, 1.0] {
            let ang = tq + sign * PI * self.alpha;
            let (ex, ey) = (ang.cos(), ang.sin());
            let denom = wx * ey - wy * ex;
            if denom.abs() < 1e-300 {
                continue;
            }
            let l = -(qx * ey - qy * ex) / denom;
            let t = (qx + l * wx) * ex + (qy + l * wy) * ey;
            if l > 0.0 && t > 0.0 {
                best = best.min(l);
            }
        }
        best
    }

    fn ball_volume(&self, c: &Point, r: f64) -> f64 {
        let (a, _) = self.polar(c);
        if self.n == 2 {
            return self.disc_area(a, r);
        }
        let k = self.n - 2;
        let f = |u: f64| {
            let (sn, cs) = u.sin_cos();
            self.disc_area(a, r * cs) * (r * sn).powi(k as i32 - 1) * r * cs
        };
        unit_sphere_area(k) * quad::integrate(f, 0.0, 0.5 * PI, 8)
    }

    fn sphere_area(&self, c: &Point, r: f64) -> f64 {
        let (a, _) = self.polar(c);
        if self.n == 2 {
            return self.disc_perimeter(a, r);
        }
        if a <= APEX_EPS {
            return self.alpha * unit_sphere_area(self.n) * r.powi(self.n as i32 - 1);
        }
        let h = 1e-4 * r;
        (self.ball_volume(c, r + h) - self.ball_volume(c, r - h)) / (2.0 * h)
    }

    fn ball_point(&self, c: &Point, r: f64, u: &[f64]) -> Option<Point> {
        let w = r / self.alpha;
        let coords: Coords = c.coords.iter().zip(u).map(|(ci, ui)| ci + w * (2.0 * ui - 1.0)).collect();
        let p = Point { coords, vertex: None };
        (self.distance(c, &p) <= r).then_some(p)
    }

    fn chart_valid(&self, coords: &[f64]) -> bool {
        coords.iter().all(|c| c.is_finite())
    }

    fn radial_about(&self, q: &Point) -> bool {
        self.polar(q).0 <= APEX_EPS || self.alpha >= 1.0
    }

    fn chart_stretch(&self) -> f64 {
        1.0 / self.alpha
    }
}
