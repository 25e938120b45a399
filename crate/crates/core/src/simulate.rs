//! Seeded sample generators and Monte Carlo harnesses for the limit
//! theorems and the two counterexamples.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::functions::{CornerSpike, DiagonalIndicator};
use crate::gof;
use crate::model::{CopulaSet, CopulaSpec, FunctionSpec, MarginalModel, Provenance, SampleBatch};
use crate::rng::{self, Rng};
use crate::special;
use crate::stat;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    Independent,
    /// Every column is an increasing function of one common uniform; the
    /// functions are the margins' quantile maps.
    Comonotone,
    /// Row-major `d x d` correlation matrix of the latent normal vector.
    GaussianCopula {
        correlation: Vec<f64>,
    },
    /// The first `ceil(n/2)` rows come from the inner kind; the rest reflect
    /// them on the uniform scale, `u -> 1 - u`.
    Antithetic(Box<GeneratorKind>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub margins: Vec<MarginalModel>,
    pub n: usize,
    pub seed: u64,
}

impl GeneratorKind {
    fn label(&self) -> alloc::string::String {
        match self {
            Self::Independent => "independent".into(),
            Self::Comonotone => "comonotone".into(),
            Self::GaussianCopula { .. } => "gaussian-copula".into(),
            Self::Antithetic(inner) => format!("antithetic({})", inner.label()),
        }
    }
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, margins: Vec<MarginalModel>, n: usize, seed: u64) -> Self {
        Self {
            kind,
            margins,
            n,
            seed,
        }
    }

    pub fn d(&self) -> usize {
        self.margins.len()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Pairwise copulas of one row, for the variance formulas. Antithetic
    /// batches have no i.i.d. row law and are rejected.
    pub fn copulas(&self) -> Result<CopulaSet> {
        let d = self.d();
        match &self.kind {
            GeneratorKind::Independent => Ok(CopulaSet::independent(d)),
            GeneratorKind::Comonotone => Ok(CopulaSet::all_pairs(d, CopulaSpec::Comonotone)),
            GeneratorKind::GaussianCopula { correlation } => {
                check_correlation(correlation, d)?;
                let mut set = CopulaSet::new(d, false);
                for j in 0..d {
                    for k in j + 1..d {
                        set.set_pair(j, k, CopulaSpec::gaussian(correlation[j * d + k])?)?;
                    }
                }
                Ok(set)
            }
            GeneratorKind::Antithetic(_) => Err(Error::Parameter(
                "antithetic batches are not i.i.d. rows; no pairwise copula model".into(),
            )),
        }
    }
}

fn check_correlation(r: &[f64], d: usize) -> Result<()> {
    if r.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: r.len(),
        });
    }
    for j in 0..d {
        if (r[j * d + j] - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "correlation diagonal entry {j} is not 1"
            )));
        }
        for k in 0..d {
            if r[j * d + k] != r[k * d + j] || !(-1.0..=1.0).contains(&r[j * d + k]) {
                return Err(Error::Parameter(format!(
                    "correlation entry ({j}, {k}) is not symmetric or not in [-1, 1]"
                )));
            }
        }
    }
    Ok(())
}

/// Lower-triangular `L` with `L L^T = r`, allowing positive semidefinite
/// `r` (zero pivots give zero columns).
pub fn cholesky_psd(r: &[f64], d: usize) -> Result<Vec<f64>> {
    check_correlation(r, d)?;
    const TOL: f64 = 1e-10;
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut s = r[j * d + j];
        for p in 0..j {
            s -= l[j * d + p] * l[j * d + p];
        }
        if s < -TOL {
            return Err(Error::Parameter(
                "correlation matrix is not positive semidefinite".into(),
            ));
        }
        let pivot = libm::sqrt(s.max(0.0));
        l[j * d + j] = pivot;
        for i in j + 1..d {
            let mut t = r[i * d + j];
            for p in 0..j {
                t -= l[i * d + p] * l[j * d + p];
            }
            if pivot > TOL {
                l[i * d + j] = t / pivot;
            } else if t.abs() > 1e-8 {
                return Err(Error::Parameter(
                    "correlation matrix is not positive semidefinite".into(),
                ));
            }
        }
    }
    Ok(l)
}

fn clamp_open(u: f64) -> f64 {
    u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Column-major uniforms for `n` rows.
fn uniforms<R: Rng + ?Sized>(
    kind: &GeneratorKind,
    d: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n * d];
    match kind {
        GeneratorKind::Independent => {
            for i in 0..n {
                for j in 0..d {
                    out[j * n + i] = rng::uniform_open(rng);
                }
            }
        }
        GeneratorKind::Comonotone => {
            for i in 0..n {
                let u = rng::uniform_open(rng);
                for j in 0..d {
                    out[j * n + i] = u;
                }
            }
        }
        GeneratorKind::GaussianCopula { correlation } => {
            let l = cholesky_psd(correlation, d)?;
            let mut eps = vec![0.0; d];
            for i in 0..n {
                for e in eps.iter_mut() {
                    *e = special::normal_quantile(rng::uniform_open(rng));
                }
                for j in 0..d {
                    let z: f64 = (0..=j).map(|p| l[j * d + p] * eps[p]).sum();
                    out[j * n + i] = clamp_open(special::normal_cdf(z));
                }
            }
        }
        GeneratorKind::Antithetic(inner) => {
            let half = n.div_ceil(2);
            let base = uniforms(inner, d, half, rng)?;
            for j in 0..d {
                for i in 0..n {
                    out[j * n + i] = if i < half {
                        base[j * half + i]
                    } else {
                        clamp_open(1.0 - base[j * half + (i - half)])
                    };
                }
            }
        }
    }
    Ok(out)
}

/// The probability-scale batch `U` and the data batch `X = F^{-1}(U)`.
pub fn generate_pair(spec: &GeneratorSpec) -> Result<(SampleBatch, SampleBatch)> {
    let d = spec.d();
    if d == 0 || spec.n == 0 {
        return Err(Error::Parameter(
            "generator needs n >= 1 and at least one margin".into(),
        ));
    }
    let mut rng = rng::stream(spec.seed);
    let u = uniforms(&spec.kind, d, spec.n, &mut rng)?;
    let provenance = Provenance {
        generator: spec.kind.label(),
        seed: spec.seed,
    };
    let ub = SampleBatch::from_column_major(spec.n, d, u)?.with_provenance(provenance.clone());
    let xb = ub.map_cells(|j, u| spec.margins[j].quantile_unchecked(u))?;
    Ok((ub, xb.with_provenance(provenance)))
}

/// Deterministic given the spec, seed included.
pub fn generate(spec: &GeneratorSpec) -> Result<SampleBatch> {
    Ok(generate_pair(spec)?.1)
}

/// Uniform order statistics `S_i / S_{n+1}` from partial sums of `n + 1`
/// standard exponentials; no sorting.
pub fn uniform_order_stats_direct(n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng::stream(seed);
    uniform_order_stats_from(n, &mut rng)
}

pub fn uniform_order_stats_from<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Parameter("order statistics need n >= 1".into()));
    }
    let mut s = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        acc += rng::exponential(rng);
        s.push(acc);
    }
    let total = acc + rng::exponential(rng);
    for v in s.iter_mut() {
        *v /= total;
    }
    Ok(s)
}

/// `T_n` for each replication `r`, drawn with seed `child_seed(seed, r)`.
pub fn replicate_statistic<E: Executor, F: FunctionSpec + ?Sized>(
    exec: &E,
    f: &F,
    spec: &GeneratorSpec,
    reps: usize,
) -> Result<Vec<f64>> {
    stat::check_margins(f, &spec.margins)?;
    let results = exec.map(reps, |r| -> Result<f64> {
        let batch = generate(&spec.with_seed(rng::child_seed(spec.seed, r as u64)))?;
        stat::estimate_statistic(&batch, f).map(|s| s.value)
    });
    results
        .into_iter()
        .enumerate()
        .map(|(r, v)| {
            v.map_err(|e| Error::Evaluation {
                index: r,
                context: format!("replication {r} failed: {e}"),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SllnTrace {
    pub n_grid: Vec<usize>,
    pub statistic: Vec<f64>,
    pub gamma_bar: f64,
    /// `max |T_n - gamma_bar|` over the grid.
    pub max_deviation: f64,
    pub final_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MonteCarloReport {
    pub reps: usize,
    pub n: usize,
    pub gamma_bar: f64,
    /// Mean of `sqrt(n) (T_n - gamma_bar)` over replications.
    pub emp_mean: f64,
    pub emp_var: f64,
    pub sigma2_model: f64,
    /// KS test of the values divided by `sqrt(sigma2_model)` against N(0, 1).
    pub ks_stat: f64,
    pub ks_pvalue: f64,
    pub slln_curve: Option<SllnTrace>,
    /// `sqrt(n) (T_n - gamma_bar)` per replication.
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// Replicated `sqrt(n) (T_n - gamma_bar)` compared with `N(0, sigma^2)`.
pub fn mc_clt<F: FunctionSpec>(
    f: &F,
    spec: &GeneratorSpec,
    reps: usize,
) -> Result<MonteCarloReport> {
    mc_clt_with(&Sequential, f, spec, reps)
}

pub fn mc_clt_with<E: Executor, F: FunctionSpec>(
    exec: &E,
    f: &F,
    spec: &GeneratorSpec,
    reps: usize,
) -> Result<MonteCarloReport> {
    if reps < 2 {
        return Err(Error::Parameter(
            "Monte Carlo needs at least 2 replications".into(),
        ));
    }
    let copulas = spec.copulas()?;
    let gamma_bar = stat::gamma_bar(f, &spec.margins)?.value;
    let sigma2 = asymptotics::sigma_squared_with(exec, f, &spec.margins, &copulas)?.sigma2;
    let sn = libm::sqrt(spec.n as f64);
    let values: Vec<f64> = replicate_statistic(exec, f, spec, reps)?
        .into_iter()
        .map(|t| sn * (t - gamma_bar))
        .collect();
    let (ks_stat, ks_pvalue) = if sigma2 > 0.0 {
        let sd = libm::sqrt(sigma2);
        let z: Vec<f64> = values.iter().map(|v| v / sd).collect();
        let ks = gof::ks_one_sample(&z, special::normal_cdf)?;
        (ks.statistic, ks.pvalue)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(MonteCarloReport {
        reps,
        n: spec.n,
        gamma_bar,
        emp_mean: gof::mean(&values),
        emp_var: gof::variance(&values),
        sigma2_model: sigma2,
        ks_stat,
        ks_pvalue,
        slln_curve: None,
        values,
    })
}

/// One trajectory of `T_n` over nested prefixes of a single batch of size
/// `max(n_grid)`.
pub fn mc_slln<F: FunctionSpec + ?Sized>(
    f: &F,
    spec: &GeneratorSpec,
    n_grid: &[usize],
) -> Result<SllnTrace> {
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.first().is_none_or(|&n| n == 0) {
        return Err(Error::Parameter(
            "n grid must be non-empty with positive sizes".into(),
        ));
    }
    let nmax = *grid.last().unwrap();
    let batch = generate(&spec.with_n(nmax))?;
    let gamma_bar = stat::gamma_bar(f, &spec.margins)?.value;
    let mut statistic = Vec::with_capacity(grid.len());
    for &n in &grid {
        statistic.push(stat::estimate_statistic(&batch.prefix(n), f)?.value);
    }
    let devs: Vec<f64> = statistic.iter().map(|t| (t - gamma_bar).abs()).collect();
    Ok(SllnTrace {
        max_deviation: devs.iter().copied().fold(0.0, f64::max),
        final_deviation: *devs.last().unwrap(),
        n_grid: grid,
        statistic,
        gamma_bar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiagonalIndicatorOutcome {
    pub n: usize,
    pub seed: u64,
    pub statistic: f64,
    pub gamma_bar: f64,
}

/// `phi(x, y) = I(x = y)` on two independent continuous columns: the
/// sorted columns never coincide, so the statistic is 0, while
/// `gamma = 1` on the diagonal.
pub fn counterexample_c1(n: usize, seed: u64) -> Result<DiagonalIndicatorOutcome> {
    counterexample_c1_with(GeneratorKind::Independent, n, seed)
}

pub fn counterexample_c1_with(
    kind: GeneratorKind,
    n: usize,
    seed: u64,
) -> Result<DiagonalIndicatorOutcome> {
    let margins = vec![MarginalModel::standard_uniform(); 2];
    let f = DiagonalIndicator { dim: 2 };
    let batch = generate(&GeneratorSpec::new(kind, margins.clone(), n, seed))?;
    Ok(DiagonalIndicatorOutcome {
        n,
        seed,
        statistic: stat::estimate_statistic(&batch, &f)?.value,
        gamma_bar: stat::gamma_bar(&f, &margins)?.value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CornerSpikeOutcome {
    pub n: usize,
    pub seed: u64,
    pub statistic: f64,
    /// `sqrt(n) I(W_n in (a/(a+1), 1)^2)` with `W_n` the pair of sample
    /// maxima and `a = ceil(sqrt(n))`.
    pub lower_bound: f64,
    pub gamma_bar: f64,
}

/// The corner-spike function on two independent uniform columns. `gamma`
/// is 1, yet the statistic grows at least like `sqrt(n)`.
pub fn counterexample_c2(n: usize, seed: u64) -> Result<CornerSpikeOutcome> {
    let margins = vec![MarginalModel::standard_uniform(); 2];
    let batch = generate(&GeneratorSpec::new(
        GeneratorKind::Independent,
        margins.clone(),
        n,
        seed,
    ))?;
    let statistic = stat::estimate_statistic(&batch, &CornerSpike)?.value;
    let max = |j: usize| {
        batch
            .column(j)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let a = libm::ceil(libm::sqrt(n as f64));
    let edge = a / (a + 1.0);
    let sn = libm::sqrt(n as f64);
    let lower_bound = if max(0) > edge && max(1) > edge {
        sn
    } else {
        0.0
    };
    Ok(CornerSpikeOutcome {
        n,
        seed,
        statistic,
        lower_bound,
        gamma_bar: stat::gamma_bar(&CornerSpike, &margins)?.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Constant, Monomial};

    fn uniform(d: usize) -> Vec<MarginalModel> {
        vec![MarginalModel::standard_uniform(); d]
    }

    #[test]
    fn independent_columns_look_independent() {
        let b = generate(&GeneratorSpec::new(
            GeneratorKind::Independent,
            uniform(2),
            10_000,
            7,
        ))
        .unwrap();
        for j in 0..2 {
            assert!((gof::mean(b.column(j)) - 0.5).abs() < 0.01);
        }
        assert!(gof::pearson(b.column(0), b.column(1)).unwrap().abs() < 0.03);
        assert_eq!(b.provenance().unwrap().seed, 7);
    }

    #[test]
    fn comonotone_identity_columns_are_identical() {
        let b = generate(&GeneratorSpec::new(
            GeneratorKind::Comonotone,
            uniform(2),
            100,
            3,
        ))
        .unwrap();
        assert_eq!(b.column(0), b.column(1));
    }

    #[test]
    fn near_comonotone_gaussian() {
        let kind = GeneratorKind::GaussianCopula {
            correlation: vec![1.0, 0.999, 0.999, 1.0],
        };
        let b = generate(&GeneratorSpec::new(kind, uniform(2), 10_000, 11)).unwrap();
        assert!(gof::spearman(b.column(0), b.column(1)).unwrap() >= 0.99);
    }

    #[test]
    fn non_psd_is_rejected() {
        let r = vec![1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0];
        assert!(cholesky_psd(&r, 3).is_err());
        let singular = vec![1.0, 1.0, 1.0, 1.0];
        let l = cholesky_psd(&singular, 2).unwrap();
        assert_eq!(l, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn reproducible() {
        let spec = GeneratorSpec::new(GeneratorKind::Independent, uniform(3), 50, 99);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        assert_ne!(
            generate(&spec).unwrap(),
            generate(&spec.with_seed(100)).unwrap()
        );
    }

    #[test]
    fn antithetic_reflects() {
        let spec = GeneratorSpec::new(
            GeneratorKind::Antithetic(Box::new(GeneratorKind::Independent)),
            uniform(1),
            6,
            5,
        );
        let b = generate(&spec).unwrap();
        let c = b.column(0);
        for i in 0..3 {
            assert!((c[i] + c[i + 3] - 1.0).abs() < 1e-15);
        }
        assert!(spec.copulas().is_err());
    }

    #[test]
    fn direct_order_stats_are_sorted() {
        let v = uniform_order_stats_direct(1000, 4).unwrap();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        assert!(v[0] > 0.0 && v[999] < 1.0);
        assert!(uniform_order_stats_direct(0, 4).is_err());
    }

    #[test]
    fn slln_constant_and_product() {
        let spec = GeneratorSpec::new(GeneratorKind::Independent, uniform(2), 0, 1);
        let t = mc_slln(&Constant { dim: 2, value: 2.5 }, &spec, &[10, 100, 1000]).unwrap();
        assert!(t.statistic.iter().all(|&v| v == 2.5));
        let t = mc_slln(&Monomial::product(2), &spec, &[1000, 100_000]).unwrap();
        assert!(t.final_deviation <= 0.01);
    }

    #[test]
    fn counterexamples() {
        for n in [1, 10, 1000] {
            let r = counterexample_c1(n, 1).unwrap();
            assert_eq!(r.statistic, 0.0);
            assert!((r.gamma_bar - 1.0).abs() < 1e-12);
        }
        let r = counterexample_c1_with(GeneratorKind::Comonotone, 100, 1).unwrap();
        assert_eq!(r.statistic, 1.0);
        let r = counterexample_c2(1000, 1).unwrap();
        assert!((r.gamma_bar - 1.0).abs() < 1e-12);
        assert!(r.statistic >= r.lower_bound);
    }

    #[test]
    fn identity_clt() {
        let spec = GeneratorSpec::new(GeneratorKind::Independent, uniform(1), 256, 21);
        let r = mc_clt(&crate::functions::Sum { dim: 1 }, &spec, 400).unwrap();
        assert!((r.sigma2_model - 1.0 / 12.0).abs() < 1e-12);
        assert!((r.emp_var / r.sigma2_model - 1.0).abs() < 0.25);
        assert!(r.ks_pvalue > 0.0 && r.ks_pvalue <= 1.0);
        assert_eq!(r.values.len(), 400);
    }
}
