use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_unit_open, Error, Result};
use crate::special;

/// Joint CDF of one pair of probability-integral-transformed coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum CopulaSpec {
    Independence,
    /// The upper Fréchet bound `min(x, y)`.
    Comonotone,
    Gaussian {
        rho: f64,
    },
    Grid(CopulaGrid),
}

/// Copula values on the uniform grid `(i/k, j/k)`, `0 <= i, j <= k`,
/// bilinearly interpolated in between. `values[i * (k + 1) + j]` holds
/// `G(i/k, j/k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaGrid {
    k: usize,
    values: Vec<f64>,
}

/// A grid node where the supplied values leave the Fréchet envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundViolation {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl CopulaGrid {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let side = rows.len();
        if side < 2 {
            return Err(Error::Parameter(
                "copula grid needs at least 2x2 values".into(),
            ));
        }
        let mut values = Vec::with_capacity(side * side);
        for row in rows {
            if row.len() != side {
                return Err(Error::Parameter(format!(
                    "copula grid must be square: row of {} in a {side}x{side} grid",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter("copula grid values must be finite".into()));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            k: side - 1,
            values,
        })
    }

    pub fn resolution(&self) -> usize {
        self.k
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.k + 1) + j]
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        let kf = self.k as f64;
        let (sx, sy) = (x * kf, y * kf);
        let i = (libm::floor(sx) as usize).min(self.k - 1);
        let j = (libm::floor(sy) as usize).min(self.k - 1);
        let (fx, fy) = (sx - i as f64, sy - j as f64);
        let g00 = self.node(i, j);
        let g10 = self.node(i + 1, j);
        let g01 = self.node(i, j + 1);
        let g11 = self.node(i + 1, j + 1);
        (1.0 - fx) * ((1.0 - fy) * g00 + fy * g01) + fx * ((1.0 - fy) * g10 + fy * g11)
    }

    fn transposed(&self) -> Self {
        let n = self.k + 1;
        let mut values = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[j * n + i] = self.values[i * n + j];
            }
        }
        Self { k: self.k, values }
    }

    /// Grid nodes outside `max(x+y-1, 0) <= G <= min(x, y)` (slack 1e-12).
    pub fn bound_violations(&self) -> Vec<BoundViolation> {
        let kf = self.k as f64;
        let mut out = Vec::new();
        for i in 0..=self.k {
            for j in 0..=self.k {
                let (x, y) = (i as f64 / kf, j as f64 / kf);
                let v = self.node(i, j);
                if v < (x + y - 1.0).max(0.0) - 1e-12 || v > x.min(y) + 1e-12 {
                    out.push(BoundViolation { x, y, value: v });
                }
            }
        }
        out
    }
}

impl CopulaSpec {
    pub fn gaussian(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::Parameter(format!(
                "gaussian copula correlation {rho} outside [-1, 1]"
            )));
        }
        Ok(Self::Gaussian { rho })
    }

    /// `G(x, y)` for `x, y` in (0, 1).
    pub fn cdf(&self, x: f64, y: f64) -> Result<f64> {
        check_unit_open("x", x)?;
        check_unit_open("y", y)?;
        if let Self::Gaussian { rho } = self {
            if !(-1.0..=1.0).contains(rho) {
                return Err(Error::Parameter(format!(
                    "gaussian copula correlation {rho} outside [-1, 1]"
                )));
            }
        }
        Ok(self.cdf_unchecked(x, y))
    }

    pub(crate) fn cdf_unchecked(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Independence => x * y,
            Self::Comonotone => x.min(y),
            Self::Gaussian { rho } => {
                if *rho == 0.0 {
                    x * y
                } else if *rho >= 1.0 {
                    x.min(y)
                } else if *rho <= -1.0 {
                    (x + y - 1.0).max(0.0)
                } else {
                    let a = special::normal_quantile(x);
                    let b = special::normal_quantile(y);
                    (x * y + special::bivariate_normal_excess(a, b, *rho)).clamp(0.0, x.min(y))
                }
            }
            Self::Grid(g) => g.eval(x, y),
        }
    }

    /// `G(x, y) - x y`, evaluated without cancellation for the gaussian kind.
    pub(crate) fn excess_unchecked(&self, x: f64, y: f64) -> f64 {
        match self {
            Self::Independence => 0.0,
            Self::Comonotone => x.min(y) - x * y,
            Self::Gaussian { rho } if rho.abs() < 1.0 => {
                if *rho == 0.0 {
                    0.0
                } else {
                    let a = special::normal_quantile(x);
                    let b = special::normal_quantile(y);
                    special::bivariate_normal_excess(a, b, *rho)
                }
            }
            _ => self.cdf_unchecked(x, y) - x * y,
        }
    }

    /// True when `G(x, y) == x y` everywhere.
    pub fn is_independence(&self) -> bool {
        matches!(self, Self::Independence) || matches!(self, Self::Gaussian { rho } if *rho == 0.0)
    }

    /// The copula of the swapped pair, `(x, y) -> G(y, x)`.
    pub fn transposed(&self) -> Self {
        match self {
            Self::Grid(g) => Self::Grid(g.transposed()),
            other => other.clone(),
        }
    }

    /// Correlation parameter when this copula belongs to the gaussian family
    /// (independence is `rho = 0`, comonotone is `rho = 1`).
    pub fn gaussian_rho(&self) -> Option<f64> {
        match self {
            Self::Independence => Some(0.0),
            Self::Comonotone => Some(1.0),
            Self::Gaussian { rho } => Some(*rho),
            Self::Grid(_) => None,
        }
    }
}

/// Pairwise copulas `G_{j,k}` for a `d`-dimensional model.
///
/// Only pairs `j < k` are stored; `(j, j)` is always the comonotone copula
/// and `(k, j)` is the transpose of `(j, k)`. Missing pairs are an error
/// unless independence for them was asked for explicitly. Whether the stored
/// pairs cohere into one `d`-variate law is the caller's responsibility.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSet {
    dim: usize,
    pairs: BTreeMap<(usize, usize), CopulaSpec>,
    missing_are_independent: bool,
}

impl CopulaSet {
    pub fn new(dim: usize, missing_are_independent: bool) -> Self {
        Self {
            dim,
            pairs: BTreeMap::new(),
            missing_are_independent,
        }
    }

    /// Every off-diagonal pair gets `spec`.
    pub fn all_pairs(dim: usize, spec: CopulaSpec) -> Self {
        let mut set = Self::new(dim, false);
        for j in 0..dim {
            for k in j + 1..dim {
                set.pairs.insert((j, k), spec.clone());
            }
        }
        set
    }

    pub fn independent(dim: usize) -> Self {
        Self::new(dim, true)
    }

    pub fn with_pair(mut self, j: usize, k: usize, spec: CopulaSpec) -> Result<Self> {
        self.set_pair(j, k, spec)?;
        Ok(self)
    }

    pub fn set_pair(&mut self, j: usize, k: usize, spec: CopulaSpec) -> Result<()> {
        if j == k || j >= self.dim || k >= self.dim {
            return Err(Error::Parameter(format!(
                "copula pair ({j}, {k}) invalid for dimension {}",
                self.dim
            )));
        }
        if j < k {
            self.pairs.insert((j, k), spec);
        } else {
            self.pairs.insert((k, j), spec.transposed());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `G_{j,k}`, oriented so its first argument belongs to coordinate `j`.
    pub fn pair(&self, j: usize, k: usize) -> Result<CopulaSpec> {
        if j >= self.dim || k >= self.dim {
            return Err(Error::Parameter(format!(
                "copula pair ({j}, {k}) invalid for dimension {}",
                self.dim
            )));
        }
        if j == k {
            return Ok(CopulaSpec::Comonotone);
        }
        let (lo, hi) = if j < k { (j, k) } else { (k, j) };
        match self.pairs.get(&(lo, hi)) {
            Some(c) if j < k => Ok(c.clone()),
            Some(c) => Ok(c.transposed()),
            None if self.missing_are_independent => Ok(CopulaSpec::Independence),
            None => Err(Error::Parameter(format!(
                "no copula given for pair ({lo}, {hi}) and independence was not requested"
            ))),
        }
    }

    /// Correlation matrix when every pair is in the gaussian family.
    pub fn gaussian_correlation(&self) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut r = alloc::vec![0.0; d * d];
        for j in 0..d {
            for k in 0..d {
                let rho = self.pair(j, k)?.gaussian_rho().ok_or_else(|| {
                    Error::Parameter(format!("pair ({j}, {k}) is not in the gaussian family"))
                })?;
                r[j * d + k] = rho;
            }
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn basic_values() {
        assert!((CopulaSpec::Independence.cdf(0.3, 0.7).unwrap() - 0.21).abs() < 1e-15);
        let g0 = CopulaSpec::gaussian(0.0).unwrap();
        assert!((g0.cdf(0.3, 0.7).unwrap() - 0.21).abs() < 1e-15);
        assert_eq!(CopulaSpec::Comonotone.cdf(0.3, 0.7).unwrap(), 0.3);
        let g = CopulaSpec::gaussian(0.5).unwrap();
        let exact = 0.25 + libm::asin(0.5) / (2.0 * PI);
        assert!((g.cdf(0.5, 0.5).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(CopulaSpec::gaussian(1.5).is_err());
        assert!(CopulaSpec::Gaussian { rho: -1.2 }.cdf(0.5, 0.5).is_err());
        assert!(CopulaSpec::Independence.cdf(0.0, 0.5).is_err());
        assert!(CopulaSpec::Independence.cdf(0.5, 1.0).is_err());
    }

    #[test]
    fn grid_interpolates_and_flags_violations() {
        let k = 4;
        let rows: Vec<Vec<f64>> = (0..=k)
            .map(|i| {
                (0..=k)
                    .map(|j| (i as f64 / 4.0) * (j as f64 / 4.0))
                    .collect()
            })
            .collect();
        let g = CopulaSpec::Grid(CopulaGrid::new(&rows).unwrap());
        // bilinear interpolation of a bilinear function is exact
        assert!((g.cdf(0.3, 0.55).unwrap() - 0.165).abs() < 1e-15);
        let mut bad = rows.clone();
        bad[2][2] = 0.9;
        assert_eq!(CopulaGrid::new(&bad).unwrap().bound_violations().len(), 1);
        assert!(CopulaGrid::new(&[alloc::vec![0.0, 0.0], alloc::vec![0.0]]).is_err());
    }

    #[test]
    fn set_orients_and_fills_diagonal() {
        let set = CopulaSet::new(3, false)
            .with_pair(0, 1, CopulaSpec::gaussian(0.3).unwrap())
            .unwrap();
        assert_eq!(set.pair(1, 1).unwrap(), CopulaSpec::Comonotone);
        assert_eq!(set.pair(1, 0).unwrap(), CopulaSpec::Gaussian { rho: 0.3 });
        assert!(set.pair(0, 2).is_err());
        assert_eq!(
            CopulaSet::independent(3).pair(0, 2).unwrap(),
            CopulaSpec::Independence
        );
    }
}
