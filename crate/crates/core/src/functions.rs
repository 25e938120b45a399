//! Built-in test functions.
//!
//! These cover the closed-form cases used throughout the crate: monomials
//! (whose limits and variances are known exactly under uniform margins),
//! sums, the diagonal indicator that is discontinuous everywhere on the
//! diagonal, the midpoint function that blows up at both corners, and the
//! corner-spike function that grows without bound near `(1, 1)` away from
//! the diagonal.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::FunctionSpec;

/// `x_1^{a_1} * ... * x_d^{a_d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    alpha: Vec<f64>,
}

impl Monomial {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::Parameter("monomial needs finite exponents".into()));
        }
        Ok(Self { alpha })
    }

    /// The plain product `x_1 * ... * x_d`.
    pub fn product(dim: usize) -> Self {
        Self {
            alpha: alloc::vec![1.0; dim.max(1)],
        }
    }

    pub fn exponents(&self) -> &[f64] {
        &self.alpha
    }

    /// Total degree `M = sum a_j`.
    pub fn degree(&self) -> f64 {
        self.alpha.iter().sum()
    }

    fn factor(&self, j: usize, x: f64, order: u32) -> f64 {
        let a = self.alpha[j];
        match order {
            0 => libm::pow(x, a),
            1 => {
                if a == 0.0 {
                    0.0
                } else {
                    a * libm::pow(x, a - 1.0)
                }
            }
            _ => {
                if a == 0.0 || a == 1.0 {
                    0.0
                } else {
                    a * (a - 1.0) * libm::pow(x, a - 2.0)
                }
            }
        }
    }
}

impl FunctionSpec for Monomial {
    fn dim(&self) -> usize {
        self.alpha.len()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (0..self.alpha.len())
            .map(|j| self.factor(j, x[j], 0))
            .product()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.alpha.len();
        for j in 0..d {
            out[j] = (0..d)
                .map(|k| self.factor(k, x[k], u32::from(k == j)))
                .product();
        }
        true
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.alpha.len();
        for j in 0..d {
            for k in 0..d {
                out[j * d + k] = (0..d)
                    .map(|l| {
                        let order = u32::from(l == j) + u32::from(l == k);
                        self.factor(l, x[l], order)
                    })
                    .product();
            }
        }
        true
    }
}

/// `x_1 + ... + x_d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sum {
    pub dim: usize,
}

impl FunctionSpec for Sum {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        x[..self.dim].iter().sum()
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[..self.dim].fill(1.0);
        true
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[..self.dim * self.dim].fill(0.0);
        true
    }
}

/// A constant function of `dim` arguments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl FunctionSpec for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, _x: &[f64]) -> f64 {
        self.value
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[..self.dim].fill(0.0);
        true
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) -> bool {
        out[..self.dim * self.dim].fill(0.0);
        true
    }
}

/// 1 when all coordinates coincide, 0 otherwise. Bounded but discontinuous
/// at every point of the diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalIndicator {
    pub dim: usize,
}

impl FunctionSpec for DiagonalIndicator {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let first = x[0];
        if x[1..self.dim].iter().all(|&v| v == first) {
            1.0
        } else {
            0.0
        }
    }
}

/// `(s (1 - s))^{-alpha}` where `s` is the mean of the coordinates.
///
/// On uniform margins the squared-gradient weight sum converges only for
/// `alpha < 1/4` and the Hessian weight sum only for `alpha < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointSingular {
    pub dim: usize,
    pub alpha: f64,
}

impl MidpointSingular {
    pub fn new(dim: usize, alpha: f64) -> Result<Self> {
        if dim == 0 || !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Parameter(
                "midpoint-singular needs dim >= 1 and alpha > 0".into(),
            ));
        }
        Ok(Self { dim, alpha })
    }

    fn mean(&self, x: &[f64]) -> f64 {
        x[..self.dim].iter().sum::<f64>() / self.dim as f64
    }

    /// `g(s)`, `g'(s)` and `g''(s)` for `g(s) = (s(1-s))^{-alpha}`.
    fn profile(&self, s: f64) -> (f64, f64, f64) {
        let a = self.alpha;
        let w = s * (1.0 - s);
        let c = 1.0 - 2.0 * s;
        let g = libm::pow(w, -a);
        let g1 = -a * c * libm::pow(w, -a - 1.0);
        let g2 = 2.0 * a * libm::pow(w, -a - 1.0) + a * (a + 1.0) * c * c * libm::pow(w, -a - 2.0);
        (g, g1, g2)
    }
}

impl FunctionSpec for MidpointSingular {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.profile(self.mean(x)).0
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        let g1 = self.profile(self.mean(x)).1;
        out[..self.dim].fill(g1 / self.dim as f64);
        true
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        let g2 = self.profile(self.mean(x)).2;
        let d = self.dim as f64;
        out[..self.dim * self.dim].fill(g2 / (d * d));
        true
    }
}

/// Largest shell index evaluated geometrically; beyond it the strip is
/// thinner than anything representable and the plateau value is returned.
pub const CORNER_SPIKE_MAX_SHELL: f64 = 1e6;

/// A function on `(0, 1)^2` equal to 1 on the diagonal and to `m^3` on most
/// of the L-shaped shell `S_m = (m-1/m, 1)^2 \ (m/(m+1), 1)^2`.
///
/// Inside each shell the value drops linearly to 1 within distance `eps_m`
/// of the shell's inner edges and its stretch of diagonal, with `eps_m`
/// sized so that strip has area about `m^-8`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CornerSpike;

impl CornerSpike {
    /// Index `m >= 1` of the shell containing `(x, y)`.
    pub fn shell(x: f64, y: f64) -> f64 {
        let t = x.min(y);
        libm::ceil(t / (1.0 - t)).max(1.0)
    }

    /// Total length of the shell's inner edges plus its diagonal stretch.
    pub fn edge_length(m: f64) -> f64 {
        2.0 / (m + 1.0) + core::f64::consts::SQRT_2 / (m * (m + 1.0))
    }

    pub fn strip_width(m: f64) -> f64 {
        libm::pow(m, -8.0) / (2.0 * Self::edge_length(m))
    }

    /// Distance from `(x, y)` to the inner edges and diagonal stretch of
    /// shell `m`.
    pub fn edge_distance(m: f64, x: f64, y: f64) -> f64 {
        let c = m / (m + 1.0);
        let lo = (m - 1.0) / m;
        let d1 = segment_distance((x, y), (c, c), (c, 1.0));
        let d2 = segment_distance((x, y), (c, c), (1.0, c));
        let d3 = segment_distance((x, y), (lo, lo), (c, c));
        d1.min(d2).min(d3)
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx, a.1 + t * dy);
    libm::hypot(p.0 - qx, p.1 - qy)
}

impl FunctionSpec for CornerSpike {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let (u, v) = (x[0], x[1]);
        if u == v {
            return 1.0;
        }
        if !(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0) {
            return f64::NAN;
        }
        let m = Self::shell(u, v);
        let plateau = m * m * m;
        if m > CORNER_SPIKE_MAX_SHELL {
            return plateau;
        }
        let eps = Self::strip_width(m);
        let dist = Self::edge_distance(m, u, v);
        if dist < eps {
            1.0 + (plateau - 1.0) * dist / eps
        } else {
            plateau
        }
    }
}
