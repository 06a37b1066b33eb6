use super::Geometry;
use crate::point::{add_scaled, norm, sub, unit_ball_volume, unit_sphere_area, Coords, Point};

pub(crate) struct Euclidean {
    n: usize,
}

impl Euclidean {
    pub fn new(n: usize) -> Self {
        Euclidean { n }
    }
}

impl Geometry for Euclidean {
    fn dim(&self) -> usize {
        self.n
    }

    fn log(&self, x: &Point, y: &Point) -> Coords {
        sub(&y.coords, &x.coords)
    }

    fn exp(&self, x: &Point, v: &[f64]) -> Point {
        Point { coords: add_scaled(&x.coords, v, 1.0), vertex: None }
    }

    fn segment_unique(&self, _x: &Point, _y: &Point) -> bool {
        true
    }

    fn ray_limit(&self, _q: &Point, _x: &Point) -> f64 {
        f64::INFINITY
    }

    fn ball_volume(&self, _c: &Point, r: f64) -> f64 {
        unit_ball_volume(self.n) * r.powi(self.n as i32)
    }

    fn sphere_area(&self, _c: &Point, r: f64) -> f64 {
        unit_sphere_area(self.n) * r.powi(self.n as i32 - 1)
    }

    fn ball_point(&self, c: &Point, r: f64, u: &[f64]) -> Option<Point> {
        let v: Coords = u[..self.n].iter().map(|t| r * (2.0 * t - 1.0)).collect();
        (norm(&v) <= r).then(|| self.exp(c, &v))
    }

    fn chart_valid(&self, coords: &[f64]) -> bool {
        coords.iter().all(|c| c.is_finite())
    }

    fn radial_about(&self, _q: &Point) -> bool {
        true
    }

    fn chart_stretch(&self) -> f64 {
        1.0
    }
}
