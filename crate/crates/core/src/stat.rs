//! The statistic itself, its diagonal limit function and the limit value,
//! plus the rearrangement bounds for broken samples.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_unit_open, Error, Result};
use crate::model::{FunctionSpec, MarginalModel, SampleBatch};
use crate::quadrature::{Accumulator, GradedRule};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct StatisticResult {
    /// `T_n = (1/n) sum_i phi(X_{n:i}^{(1)}, ..., X_{n:i}^{(d)})`.
    pub value: f64,
    pub n: usize,
    pub gamma_bar: Option<f64>,
    /// `sqrt(n) (T_n - gamma_bar)` when `gamma_bar` is known.
    pub centered_scaled: Option<f64>,
}

impl StatisticResult {
    pub fn with_gamma_bar(mut self, gamma_bar: f64) -> Self {
        self.gamma_bar = Some(gamma_bar);
        self.centered_scaled = Some(libm::sqrt(self.n as f64) * (self.value - gamma_bar));
        self
    }
}

pub(crate) fn check_margins<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
) -> Result<()> {
    if margins.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: margins.len(),
        });
    }
    Ok(())
}

/// Mean of `phi` over already-sorted columns, one row of order statistics
/// at a time.
pub(crate) fn mean_over_sorted<F: FunctionSpec + ?Sized>(
    sorted: &[Vec<f64>],
    f: &F,
) -> Result<f64> {
    let n = sorted.first().map_or(0, Vec::len);
    let mut row = vec![0.0; sorted.len()];
    let mut acc = Accumulator::default();
    for i in 0..n {
        for (slot, col) in row.iter_mut().zip(sorted) {
            *slot = col[i];
        }
        let v = f.eval(&row);
        if !v.is_finite() {
            return Err(Error::Evaluation {
                index: i,
                context: format!("phi returned {v} at order statistic {}", i + 1),
            });
        }
        acc.add(v);
    }
    Ok(acc.total() / n as f64)
}

/// `T_n(phi)` for a batch: each column sorted independently, `phi` averaged
/// over rows of order statistics. Invariant to within-column permutations.
pub fn estimate_statistic<F: FunctionSpec + ?Sized>(
    batch: &SampleBatch,
    f: &F,
) -> Result<StatisticResult> {
    if batch.d() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: batch.d(),
        });
    }
    if batch.n() == 0 {
        return Err(Error::Parameter("the statistic needs n >= 1".into()));
    }
    let value = mean_over_sorted(&batch.sorted_columns(), f)?;
    Ok(StatisticResult {
        value,
        n: batch.n(),
        gamma_bar: None,
        centered_scaled: None,
    })
}

/// `T_n` together with its limit `gamma_bar` under `margins`.
pub fn estimate_with_margins<F: FunctionSpec + ?Sized>(
    batch: &SampleBatch,
    f: &F,
    margins: &[MarginalModel],
) -> Result<StatisticResult> {
    let r = estimate_statistic(batch, f)?;
    let gb = gamma_bar(f, margins)?;
    Ok(r.with_gamma_bar(gb.value))
}

/// `gamma(x) = phi(F_1^{-1}(x), ..., F_d^{-1}(x))`.
pub fn gamma_eval<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    x: f64,
) -> Result<f64> {
    check_margins(f, margins)?;
    check_unit_open("x", x)?;
    let mut buf = vec![0.0; margins.len()];
    gamma_with(f, margins, x, &mut buf)
}

pub(crate) fn gamma_with<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    x: f64,
    buf: &mut [f64],
) -> Result<f64> {
    for (slot, m) in buf.iter_mut().zip(margins) {
        *slot = m.quantile_unchecked(x);
    }
    let v = f.eval(buf);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            index: 0,
            context: format!("gamma({x}) = {v}"),
        })
    }
}

/// `gamma_bar` with an absolute-error estimate and the refinement trace.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GammaBar {
    pub value: f64,
    pub error: f64,
    pub trace: Vec<f64>,
}

/// Grading depths tried in turn; each step halves the end panels 8 times.
const GAMMA_LEVELS: [u32; 8] = [8, 16, 24, 32, 40, 48, 56, 60];
const GAMMA_POINTS: usize = 12;
const GAMMA_TOL: f64 = 1e-11;

/// `gamma_bar = int_0^1 gamma(y) dy`.
///
/// Continuous margins: endpoint-graded Gauss–Legendre, refined until two
/// successive depths agree. If the differences stop shrinking the integral
/// is reported as divergent. When every margin is empirical `gamma` is a
/// step function and the integral is the exact finite sum over its jumps.
pub fn gamma_bar<F: FunctionSpec + ?Sized>(f: &F, margins: &[MarginalModel]) -> Result<GammaBar> {
    check_margins(f, margins)?;
    let mut breaks: Vec<f64> = margins
        .iter()
        .filter_map(|m| match m {
            MarginalModel::Empirical(e) => Some(e.cumulative()),
            _ => None,
        })
        .flat_map(|c| c.iter().copied())
        .filter(|&c| c > 0.0 && c < 1.0)
        .collect();
    breaks.push(0.0);
    breaks.push(1.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut buf = vec![0.0; margins.len()];

    if margins.iter().all(|m| !m.is_continuous()) {
        let mut acc = Accumulator::default();
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            acc.add((w[1] - w[0]) * gamma_with(f, margins, mid, &mut buf)?);
        }
        let value = acc.total();
        return Ok(GammaBar {
            value,
            error: 0.0,
            trace: vec![value],
        });
    }

    let mut trace = Vec::new();
    let mut diffs: Vec<f64> = Vec::new();
    let mut prev_levels = 0u32;
    for &levels in GAMMA_LEVELS.iter() {
        let rule = GradedRule::symmetric(levels, GAMMA_POINTS);
        let mut acc = Accumulator::default();
        for w in breaks.windows(2) {
            let (nodes, weights) = rule.mapped(w[0], w[1]);
            for (x, wt) in nodes.iter().zip(weights.iter()) {
                acc.add(wt * gamma_with(f, margins, *x, &mut buf)?);
            }
        }
        let q = acc.total();
        if !q.is_finite() {
            return Err(Error::Divergence {
                context: "gamma_bar quadrature produced a non-finite sum".into(),
                trace,
            });
        }
        if let Some(&prev) = trace.last() {
            let d: f64 = q - prev;
            // per added level, so the shorter final step compares fairly
            diffs.push(d.abs() / f64::from(levels - prev_levels));
            if d.abs() <= GAMMA_TOL * q.abs().max(1.0) {
                trace.push(q);
                return Ok(GammaBar {
                    value: q,
                    error: d.abs(),
                    trace,
                });
            }
        }
        trace.push(q);
        prev_levels = levels;
    }
    let value = *trace.last().unwrap();
    let k = diffs.len();
    let (last, prev) = (diffs[k - 1], diffs[k - 2]);
    if last >= 0.9 * prev {
        return Err(Error::Divergence {
            context: "gamma_bar refinements are not settling; gamma may not be integrable".into(),
            trace,
        });
    }
    let ratio = last / prev;
    let step =
        f64::from(GAMMA_LEVELS[GAMMA_LEVELS.len() - 1] - GAMMA_LEVELS[GAMMA_LEVELS.len() - 2]);
    let last = last * step;
    Ok(GammaBar {
        value,
        error: last.max(last * ratio / (1.0 - ratio)),
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BrokenSampleBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Bounds on `(1/n) sum_i x_i y_{pi(i)}` over all permutations `pi`:
/// the upper bound pairs both sorted vectors, the lower bound pairs one
/// sorted ascending with the other descending.
pub fn broken_sample_bounds(x: &[f64], y: &[f64]) -> Result<BrokenSampleBounds> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::Parameter("broken-sample bounds need n >= 1".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Parameter(
            "broken-sample bounds need finite values".into(),
        ));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let n = xs.len();
    let mut up = Accumulator::default();
    let mut lo = Accumulator::default();
    for i in 0..n {
        up.add(xs[i] * ys[i]);
        lo.add(xs[i] * ys[n - 1 - i]);
    }
    Ok(BrokenSampleBounds {
        lower: lo.total() / n as f64,
        upper: up.total() / n as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Monomial, Sum};
    use crate::model::FnSpec;

    fn uniform(d: usize) -> Vec<MarginalModel> {
        vec![MarginalModel::standard_uniform(); d]
    }

    #[test]
    fn product_on_three_rows() {
        let b = SampleBatch::from_columns(vec![vec![0.6, 0.2, 0.4], vec![0.4, 0.6, 0.2]]).unwrap();
        let r = estimate_statistic(&b, &Monomial::product(2)).unwrap();
        assert!((r.value - 0.56 / 3.0).abs() < 1e-15);
        assert_eq!(r.n, 3);
        assert!(r.gamma_bar.is_none());
    }

    #[test]
    fn identity_gives_sample_mean() {
        let col = vec![0.3, 2.5, -1.0, 4.25];
        let b = SampleBatch::from_columns(vec![col.clone()]).unwrap();
        let r = estimate_statistic(&b, &Sum { dim: 1 }).unwrap();
        assert!((r.value - col.iter().sum::<f64>() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn statistic_errors() {
        let b = SampleBatch::from_columns(vec![vec![0.5, 0.2]]).unwrap();
        assert!(matches!(
            estimate_statistic(&b, &Monomial::product(2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = FnSpec::new(1, |x: &[f64]| if x[0] > 0.4 { f64::NAN } else { x[0] });
        match estimate_statistic(&b, &bad) {
            Err(Error::Evaluation { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn centered_value_is_exact() {
        let b = SampleBatch::from_columns(vec![vec![0.1, 0.9, 0.35, 0.6]]).unwrap();
        let r = estimate_with_margins(&b, &Sum { dim: 1 }, &uniform(1)).unwrap();
        let gb = r.gamma_bar.unwrap();
        assert!((gb - 0.5).abs() < 1e-14);
        assert_eq!(r.centered_scaled.unwrap(), 2.0 * (r.value - gb));
    }

    #[test]
    fn gamma_values() {
        let m = uniform(2);
        assert!((gamma_eval(&Monomial::product(2), &m, 0.5).unwrap() - 0.25).abs() < 1e-16);
        let mixed = vec![
            MarginalModel::standard_uniform(),
            MarginalModel::exponential(1.0).unwrap(),
        ];
        let g = gamma_eval(&Sum { dim: 2 }, &mixed, 0.5).unwrap();
        assert!((g - (0.5 + core::f64::consts::LN_2)).abs() < 1e-15);
        let mono = Monomial::new(vec![2.0, 1.0, 0.5]).unwrap();
        let g = gamma_eval(&mono, &uniform(3), 0.7).unwrap();
        assert!((g - libm::pow(0.7, 3.5)).abs() < 1e-15);
        assert!(gamma_eval(&mono, &uniform(2), 0.5).is_err());
        assert!(gamma_eval(&mono, &uniform(3), 1.0).is_err());
    }

    #[test]
    fn gamma_bar_closed_forms() {
        let r = gamma_bar(&Monomial::product(2), &uniform(2)).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-13);
        assert!(r.error <= 1e-8);
        let r = gamma_bar(&Sum { dim: 1 }, &uniform(1)).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
        // E[U + Exp(1)] on the diagonal = 1/2 + 1
        let mixed = vec![
            MarginalModel::standard_uniform(),
            MarginalModel::exponential(1.0).unwrap(),
        ];
        let r = gamma_bar(&Sum { dim: 2 }, &mixed).unwrap();
        assert!((r.value - 1.5).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn gamma_bar_empirical_is_exact_sum() {
        let m = vec![
            MarginalModel::empirical(&[1.0, 2.0, 3.0]).unwrap(),
            MarginalModel::empirical(&[10.0, 20.0]).unwrap(),
        ];
        // breakpoints 1/3, 1/2, 2/3: pieces give (1+10)/3 + (2+10)/6 + (2+20)/6 + (3+20)/3
        let r = gamma_bar(&Sum { dim: 2 }, &m).unwrap();
        let exact = 11.0 / 3.0 + 12.0 / 6.0 + 22.0 / 6.0 + 23.0 / 3.0;
        assert!((r.value - exact).abs() < 1e-13);
        assert_eq!(r.error, 0.0);
    }

    #[test]
    fn gamma_bar_flags_non_integrable() {
        let f = FnSpec::new(1, |x: &[f64]| 1.0 / x[0]);
        assert!(matches!(
            gamma_bar(&f, &uniform(1)),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn bounds_small_cases() {
        let b = broken_sample_bounds(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap();
        assert!((b.upper - 14.0 / 3.0).abs() < 1e-15);
        assert!((b.lower - 10.0 / 3.0).abs() < 1e-15);
        let c = broken_sample_bounds(&[1.5; 5], &[1.5; 5]).unwrap();
        assert_eq!(c.lower, 2.25);
        assert_eq!(c.upper, 2.25);
        assert!(broken_sample_bounds(&[1.0], &[1.0, 2.0]).is_err());
        assert!(broken_sample_bounds(&[], &[]).is_err());
    }
}
