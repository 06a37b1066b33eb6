//! The two-triangle inequality used to compare projected distances.

use rand::Rng as _;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Outcome of [`elementary_bound`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ElementaryBound {
    /// Whether `a + b ≤ (1+ε₁)(√(a²-c²+ε₂²) + √(b²-c²+ε₂²) + ε)`.
    pub hypothesis: bool,
    /// `4√((ε+ε₂)(a+b+ε₂)) + 4√ε₁ (a+b+ε₂)`.
    pub bound: f64,
    /// `c ≤ bound`.
    pub holds: bool,
}

/// `a - √(a² - c² + e²)`, computed without cancellation.
fn gap(a: f64, c: f64, e: f64) -> Option<f64> {
    let rad = (a - c) * (a + c) + e * e;
    if rad < 0.0 {
        return None;
    }
    let root = rad.sqrt();
    let den = a + root;
    Some(if den > 0.0 { ((c - e) * (c + e)) / den } else { 0.0 })
}

pub fn elementary_bound(a: f64, b: f64, c: f64, eps: f64, eps1: f64, eps2: f64) -> Result<ElementaryBound> {
    for (name, v) in [("a", a), ("b", b), ("c", c), ("eps", eps), ("eps2", eps2)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(name, "must be finite and nonnegative"));
        }
    }
    if !(0.0..1.0).contains(&eps1) {
        return Err(Error::config("eps1", "must lie in [0, 1)"));
    }
    let s = a + b + eps2;
    let bound = 4.0 * ((eps + eps2) * s).sqrt() + 4.0 * eps1.sqrt() * s;
    // a + b ≤ (1+ε₁)(A + B + ε)  ⇔  (a-A) + (b-B) ≤ ε₁(A + B) + (1+ε₁)ε.
    let hypothesis = match (gap(a, c, eps2), gap(b, c, eps2)) {
        (Some(ga), Some(gb)) => {
            let (ra, rb) = (a - ga, b - gb);
            ga + gb <= eps1 * (ra + rb) + (1.0 + eps1) * eps
        }
        _ => false,
    };
    Ok(ElementaryBound { hypothesis, bound, holds: c <= bound })
}

/// Summary of a randomized search for counterexamples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FuzzReport {
    pub tuples: usize,
    pub hypothesis_true: usize,
    pub violations: usize,
    /// Smallest `bound - c` over hypothesis-true tuples.
    pub tightest_margin: f64,
}

/// Draws `tuples` random inputs concentrated near the equality cases.
pub fn elementary_fuzz(tuples: usize, seed: u64) -> FuzzReport {
    let mut rng = rng::stream(seed, "elementary-fuzz", 0);
    let small = |rng: &mut rng::Rng, zero: f64| -> f64 {
        if rng.gen::<f64>() < zero {
            0.0
        } else {
            10f64.powf(-8.0 * rng.gen::<f64>())
        }
    };
    let mut report = FuzzReport { tuples, hypothesis_true: 0, violations: 0, tightest_margin: f64::INFINITY };
    for _ in 0..tuples {
        let a: f64 = rng.gen_range(0.0..2.0);
        let b: f64 = if rng.gen::<f64>() < 0.2 { a } else { rng.gen_range(0.0..2.0) };
        let top = a.min(b);
        let c = match rng.gen_range(0..4) {
            0 => 0.0,
            1 => top * rng.gen::<f64>(),
            2 => top * small(&mut rng, 0.0),
            _ => top * (1.0 - small(&mut rng, 0.0)),
        };
        let eps = small(&mut rng, 0.2);
        let eps1 = 0.999 * small(&mut rng, 0.2);
        let eps2 = small(&mut rng, 0.2);
        let out = elementary_bound(a, b, c, eps, eps1, eps2).expect("fuzz inputs are in range");
        if out.hypothesis {
            report.hypothesis_true += 1;
            report.tightest_margin = report.tightest_margin.min(out.bound - c);
            if !out.holds {
                report.violations += 1;
            }
        }
    }
    report
}
