//! Chebyshev–Lobatto panels with barycentric evaluation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Samples of a function at the n+1 Chebyshev–Lobatto points of `[a, b]`,
/// ordered from `a` to `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebPanel {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
}

/// Chebyshev–Lobatto nodes of `[a, b]` in increasing order; the endpoints are
/// reproduced exactly.
pub fn lobatto_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "a panel needs at least two nodes");
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (0..=n)
        .map(|j| {
            if j == 0 {
                a
            } else if j == n {
                b
            } else {
                mid - half * (PI * j as f64 / n as f64).cos()
            }
        })
        .collect()
}

impl ChebPanel {
    pub fn from_fn<F: FnMut(f64) -> f64>(a: f64, b: f64, n: usize, mut f: F) -> Self {
        let values = lobatto_nodes(a, b, n).into_iter().map(&mut f).collect();
        ChebPanel { a, b, values }
    }

    pub fn from_values(a: f64, b: f64, values: Vec<f64>) -> Self {
        assert!(values.len() >= 2, "a panel needs at least two nodes");
        ChebPanel { a, b, values }
    }

    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }

    pub fn nodes(&self) -> Vec<f64> {
        lobatto_nodes(self.a, self.b, self.degree())
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    /// Barycentric interpolation (second form). Weights are (−1)^j, halved
    /// at both ends.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.degree();
        let nodes = self.nodes();
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &fj)) in nodes.iter().zip(&self.values).enumerate() {
            let diff = x - xj;
            if diff == 0.0 {
                return fj;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            let t = w / diff;
            num += t * fj;
            den += t;
        }
        num / den
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
