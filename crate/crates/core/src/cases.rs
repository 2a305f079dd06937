//! Problem data: the manufactured smooth solution on the unit square and the
//! constant-data problem on the L-shape.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::control::{Bounds, ControlKind};
use crate::kkt::ProblemSpec;
use crate::mesh::Point;
use crate::p2::Mat2;

pub const DEFAULT_ALPHA: f64 = 1e-3;
pub const DEFAULT_ETA: f64 = 10.0;
pub const DEFAULT_LOWER: f64 = -750.0;
pub const DEFAULT_UPPER: f64 = -50.0;
pub const DEFAULT_THETA: f64 = 0.3;

/// `g(t) = sin³(πt)` and its first four derivatives.
pub fn g_derivatives(t: f64) -> [f64; 5] {
    let (s, c) = (PI * t).sin_cos();
    let p2 = PI * PI;
    [
        s * s * s,
        3.0 * PI * s * s * c,
        3.0 * p2 * (2.0 * s - 3.0 * s * s * s),
        3.0 * p2 * PI * c * (2.0 - 9.0 * s * s),
        3.0 * p2 * p2 * (27.0 * s * s * s - 20.0 * s),
    ]
}

/// `u(x, y) = sin³(πx) sin³(πy)`.
pub fn sin3_value(p: Point) -> f64 {
    g_derivatives(p[0])[0] * g_derivatives(p[1])[0]
}

pub fn sin3_gradient(p: Point) -> [f64; 2] {
    let (gx, gy) = (g_derivatives(p[0]), g_derivatives(p[1]));
    [gx[1] * gy[0], gx[0] * gy[1]]
}

pub fn sin3_hessian(p: Point) -> Mat2 {
    let (gx, gy) = (g_derivatives(p[0]), g_derivatives(p[1]));
    let xy = gx[1] * gy[1];
    [[gx[2] * gy[0], xy], [xy, gx[0] * gy[2]]]
}

/// `Δ²u` for `u = sin³(πx) sin³(πy)`.
pub fn exact_biharmonic(p: Point) -> f64 {
    let (gx, gy) = (g_derivatives(p[0]), g_derivatives(p[1]));
    gx[4] * gy[0] + 2.0 * gx[2] * gy[2] + gx[0] * gy[4]
}

/// Smooth state and adjoint `u = φ = sin³(πx) sin³(πy)` with
/// `q = clamp(-φ/α)`, `f = Δ²u - q`, `u_d = u - Δ²φ`.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub alpha: f64,
    pub bounds: Bounds,
    pub eta: f64,
}

impl Default for ManufacturedCase {
    fn default() -> Self {
        ManufacturedCase {
            alpha: DEFAULT_ALPHA,
            bounds: Bounds {
                lower: DEFAULT_LOWER,
                upper: DEFAULT_UPPER,
            },
            eta: DEFAULT_ETA,
        }
    }
}

impl ManufacturedCase {
    pub fn u(&self, p: Point) -> f64 {
        sin3_value(p)
    }

    pub fn phi(&self, p: Point) -> f64 {
        sin3_value(p)
    }

    pub fn u_hessian(&self, p: Point) -> Mat2 {
        sin3_hessian(p)
    }

    pub fn phi_hessian(&self, p: Point) -> Mat2 {
        sin3_hessian(p)
    }

    pub fn q(&self, p: Point) -> f64 {
        self.bounds.clamp(-self.phi(p) / self.alpha)
    }

    pub fn f(&self, p: Point) -> f64 {
        exact_biharmonic(p) - self.q(p)
    }

    pub fn u_d(&self, p: Point) -> f64 {
        self.u(p) - exact_biharmonic(p)
    }

    pub fn spec(&self) -> ProblemSpec {
        let (a, b) = (*self, *self);
        ProblemSpec {
            kind: ControlKind::Distributed,
            alpha: self.alpha,
            bounds: self.bounds,
            eta: self.eta,
            f: Arc::new(move |p| a.f(p)),
            u_d: Arc::new(move |p| b.u_d(p)),
        }
    }
}

/// `f = 1`, `u_d = 1` with the default weights and bounds.
pub fn constant_data_spec(kind: ControlKind, alpha: f64, bounds: Bounds, eta: f64) -> ProblemSpec {
    ProblemSpec {
        kind,
        alpha,
        bounds,
        eta,
        f: Arc::new(|_| 1.0),
        u_d: Arc::new(|_| 1.0),
    }
}
