use alloc::vec::Vec;

use crate::error::{check_unit_open, Error, Result};
use crate::rng::{self, Rng};
use crate::special;

/// A one-dimensional distribution: CDF, generalized inverse, sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalModel {
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    Empirical(EmpiricalMargin),
}

/// A discrete distribution on a finite support, stored as the sorted
/// distinct support points with their cumulative probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMargin {
    support: Vec<f64>,
    cumulative: Vec<f64>,
}

impl EmpiricalMargin {
    /// Equal-weight margin on `values` (duplicates accumulate weight).
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::weighted(values, None)
    }

    pub fn weighted(values: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter(
                "empirical margin needs at least one value".into(),
            ));
        }
        if let Some(w) = weights {
            if w.len() != values.len() {
                return Err(Error::LengthMismatch {
                    left: values.len(),
                    right: w.len(),
                });
            }
            if w.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
                return Err(Error::Parameter(
                    "empirical weights must be finite and >= 0".into(),
                ));
            }
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("empirical support must be finite".into()));
        }
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, weights.map_or(1.0, |w| w[i])))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if total <= 0.0 {
            return Err(Error::Parameter("empirical weights sum to zero".into()));
        }
        let mut support: Vec<f64> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        for (v, w) in pairs {
            match support.last() {
                Some(&last) if last == v => *mass.last_mut().unwrap() += w,
                _ => {
                    support.push(v);
                    mass.push(w);
                }
            }
        }
        let mut running = 0.0;
        let mut cumulative: Vec<f64> = mass
            .iter()
            .map(|w| {
                running += w;
                running / total
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        // drop zero-mass leading points so the quantile never lands on them
        let first = cumulative.iter().position(|&c| c > 0.0).unwrap_or(0);
        support.drain(..first);
        cumulative.drain(..first);
        Ok(Self {
            support,
            cumulative,
        })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    fn cdf(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&s| s <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    fn quantile(&self, t: f64) -> f64 {
        let k = self.cumulative.partition_point(|&c| c < t);
        self.support[k.min(self.support.len() - 1)]
    }
}

impl MarginalModel {
    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::Parameter(
                "uniform margin needs finite low < high".into(),
            ));
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn standard_uniform() -> Self {
        Self::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Parameter(
                "exponential rate must be finite and > 0".into(),
            ));
        }
        Ok(Self::Exponential { rate })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
            return Err(Error::Parameter(
                "normal margin needs finite mean and sd > 0".into(),
            ));
        }
        Ok(Self::Normal { mean, sd })
    }

    pub fn empirical(values: &[f64]) -> Result<Self> {
        EmpiricalMargin::from_values(values).map(Self::Empirical)
    }

    pub fn is_standard_uniform(&self) -> bool {
        matches!(self, Self::Uniform { low, high } if *low == 0.0 && *high == 1.0)
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Empirical(_))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -libm::expm1(-rate * x)
                }
            }
            Self::Normal { mean, sd } => special::normal_cdf((x - mean) / sd),
            Self::Empirical(e) => e.cdf(x),
        }
    }

    /// Generalized inverse `inf { x : F(x) >= t }` for `t` in (0, 1).
    pub fn quantile(&self, t: f64) -> Result<f64> {
        check_unit_open("t", t)?;
        Ok(self.quantile_unchecked(t))
    }

    pub(crate) fn quantile_unchecked(&self, t: f64) -> f64 {
        match self {
            Self::Uniform { low, high } => low + (high - low) * t,
            Self::Exponential { rate } => -libm::log1p(-t) / rate,
            Self::Normal { mean, sd } => mean + sd * special::normal_quantile(t),
            Self::Empirical(e) => e.quantile(t),
        }
    }

    /// First and second derivatives of the quantile function at `t`, when
    /// they exist in closed form.
    pub fn quantile_derivatives(&self, t: f64) -> Option<(f64, f64)> {
        match self {
            Self::Uniform { low, high } => Some((high - low, 0.0)),
            Self::Exponential { rate } => {
                let s = 1.0 - t;
                Some((1.0 / (rate * s), 1.0 / (rate * s * s)))
            }
            Self::Normal { sd, .. } => {
                let z = special::normal_quantile(t);
                let dens = special::normal_pdf(z);
                Some((sd / dens, sd * z / (dens * dens)))
            }
            Self::Empirical(_) => None,
        }
    }

    /// Inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_unchecked(rng::uniform_open(rng))
    }
}
