//! Quadrature rules on the reference triangle `{(x, y) : x, y >= 0, x + y <= 1}`
//! and on the reference interval `[0, 1]`.
//!
//! Triangle rules above degree 2 are collapsed (Duffy) Gauss products, which
//! keep every weight positive at the price of a few extra points.

use crate::error::{Error, Result};

/// Which reference domain a rule lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    Triangle,
    Edge,
}

/// Points and weights on a reference domain.
///
/// Triangle points are `(x, y)` in the reference triangle and the weights sum
/// to `1/2`; edge points use only the first coordinate in `[0, 1]` and the
/// weights sum to `1`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Iterate over `(point, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Build a rule of the requested kind exact for polynomials up to `degree`.
///
/// Triangle degrees are restricted to `{1, 2, 4, 6, 8, 12}`; edge degrees to `1..=19`.
pub fn quadrature(kind: QuadratureKind, degree: usize) -> Result<QuadratureRule> {
    match kind {
        QuadratureKind::Triangle => triangle_rule(degree),
        QuadratureKind::Edge => edge_rule(degree),
    }
}

/// Triangle rule; panics on an unsupported degree. Internal callers only use
/// the fixed set of degrees.
pub(crate) fn triangle(degree: usize) -> QuadratureRule {
    triangle_rule(degree).expect("supported triangle quadrature degree")
}

pub(crate) fn edge(degree: usize) -> QuadratureRule {
    edge_rule(degree).expect("supported edge quadrature degree")
}

fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    let (points, weights) = match degree {
        1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![0.5]),
        2 => (
            vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            vec![1.0 / 6.0; 3],
        ),
        4 | 6 | 8 | 12 => collapsed_gauss(degree / 2 + 1),
        _ => {
            return Err(Error::UnsupportedQuadrature {
                kind: "triangle",
                degree,
            })
        }
    };
    Ok(QuadratureRule {
        kind: QuadratureKind::Triangle,
        degree,
        points,
        weights,
    })
}

fn edge_rule(degree: usize) -> Result<QuadratureRule> {
    if !(1..=19).contains(&degree) {
        return Err(Error::UnsupportedQuadrature { kind: "edge", degree });
    }
    let n = degree / 2 + 1;
    let (nodes, weights) = gauss_legendre(n);
    Ok(QuadratureRule {
        kind: QuadratureKind::Edge,
        degree,
        points: nodes.iter().map(|&s| [0.5 * (s + 1.0), 0.0]).collect(),
        weights: weights.iter().map(|w| 0.5 * w).collect(),
    })
}

// (s, t) in [0,1]^2 -> (s (1 - t), t); an n x n Gauss product under this map
// integrates degree 2n - 2 exactly on the triangle.
fn collapsed_gauss(n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut w = Vec::with_capacity(n * n);
    for (&ti, &wt) in nodes.iter().zip(&weights) {
        let t = 0.5 * (ti + 1.0);
        for (&si, &ws) in nodes.iter().zip(&weights) {
            let s = 0.5 * (si + 1.0);
            points.push([s * (1.0 - t), t]);
            w.push(0.25 * wt * ws * (1.0 - t));
        }
    }
    (points, w)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // ascending order
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}
