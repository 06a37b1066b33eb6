use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

pub type Coords = SmallVec<[f64; 4]>;

/// A point in a provider's chart coordinates. Graph-backed points also carry
/// their vertex index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Coords,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex: Option<u32>,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        Point { coords: Coords::from_slice(coords), vertex: None }
    }

    pub fn origin(dim: usize) -> Self {
        Point { coords: smallvec::smallvec![0.0; dim], vertex: None }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn with_vertex(mut self, v: u32) -> Self {
        self.vertex = Some(v);
        self
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Coords {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], b: &[f64], t: f64) -> Coords {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

pub fn scale(a: &[f64], t: f64) -> Coords {
    a.iter().map(|x| x * t).collect()
}

/// Volume of the Euclidean unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    use std::f64::consts::PI;
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * PI / n as f64,
    }
}

/// Area of the Euclidean unit sphere `S^{n-1}` bounding the unit ball in dimension `n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
    }
}
