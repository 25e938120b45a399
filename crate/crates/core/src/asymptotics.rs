//! Limiting variance and covariance of the statistic, the exact finite-n
//! variance of the linear term, the per-observation linearization, and a
//! few exact finite-n facts used as diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::calculus::Psi;
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::model::{CopulaSet, CopulaSpec, FunctionSpec, MarginalModel, SampleBatch};
use crate::quadrature::{Accumulator, GradedRule};
use crate::special;
use crate::stat::{self, check_margins};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FiniteNCheck {
    pub n: usize,
    /// `Var(Z_{n,1})` from the exact double sum.
    pub variance: f64,
    /// `variance - sigma2`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VarianceReport {
    pub sigma2: f64,
    /// `sum_j int int_{x<y} x (1 - y) psi_j(x) psi_j(y)`.
    pub same_j_term: f64,
    /// `sum_{j<k} int int (G_{j,k}(x, y) - x y) psi_j(x) psi_k(y)` over the
    /// unit square.
    pub cross_jk_term: f64,
    pub quad_error: f64,
    /// Successive `sigma2` estimates, coarsest first.
    pub trace: Vec<f64>,
    pub finite_n_check: Option<FiniteNCheck>,
    /// Set when a slightly negative quadrature result was clamped to zero;
    /// `sigma2` then differs from `2 same + 2 cross`.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CovarianceReport {
    /// Row-major `m x m`.
    pub matrix: Vec<Vec<f64>>,
    pub quad_error: Vec<Vec<f64>>,
}

/// `(left levels, Gauss points per panel)` for each refinement. The last
/// one puts just over `2^10` nodes on each axis.
pub const SIGMA_LEVELS: [(u32, usize); 3] = [(16, 8), (30, 10), (44, 12)];

/// `G - x y` for one ordered pair of coordinates.
#[derive(Debug, Clone)]
enum Kernel {
    Zero,
    Comonotone,
    Gaussian(f64),
    Other(CopulaSpec),
}

impl Kernel {
    fn new(spec: CopulaSpec) -> Self {
        if spec.is_independence() {
            return Kernel::Zero;
        }
        match spec {
            CopulaSpec::Comonotone => Kernel::Comonotone,
            CopulaSpec::Gaussian { rho } if rho.abs() < 1.0 => Kernel::Gaussian(rho),
            CopulaSpec::Gaussian { rho } if rho >= 1.0 => Kernel::Comonotone,
            other => Kernel::Other(other),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Kernel::Zero)
    }

    fn is_symmetric(&self) -> bool {
        !matches!(self, Kernel::Other(CopulaSpec::Grid(_)))
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Kernel::Zero => 0.0,
            Kernel::Comonotone => x.min(y) - x * y,
            Kernel::Gaussian(rho) => special::bivariate_normal_excess(
                special::normal_quantile(x),
                special::normal_quantile(y),
                *rho,
            ),
            Kernel::Other(spec) => spec.excess_unchecked(x, y),
        }
    }
}

struct PairKernel {
    j: usize,
    k: usize,
    forward: Kernel,
    /// `K_{k,j}`, only kept when it differs from `forward`.
    backward: Option<Kernel>,
}

fn pair_kernels(copulas: &CopulaSet, d: usize) -> Result<Vec<PairKernel>> {
    if copulas.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: copulas.dim(),
        });
    }
    let mut out = Vec::new();
    for j in 0..d {
        for k in j + 1..d {
            let forward = Kernel::new(copulas.pair(j, k)?);
            if forward.is_zero() {
                continue;
            }
            let backward =
                (!forward.is_symmetric()).then(|| Kernel::new(copulas.pair(k, j).unwrap()));
            out.push(PairKernel {
                j,
                k,
                forward,
                backward,
            });
        }
    }
    Ok(out)
}

fn check_family<F: FunctionSpec>(fs: &[F], margins: &[MarginalModel]) -> Result<()> {
    if fs.is_empty() {
        return Err(Error::Parameter("at least one function is required".into()));
    }
    for f in fs {
        check_margins(f, margins)?;
    }
    Ok(())
}

/// Index of `(r, s)`, `r <= s`, in packed upper-triangular storage.
fn packed(r: usize, s: usize, m: usize) -> usize {
    r * m - r * (r + 1) / 2 + s
}

/// `same[rs]` and `cross[rs]` for every `r <= s` at one refinement level.
///
/// The bilinear form `B(a, b) = sum_{j,k} int int (G_{j,k} - x y) a_j(x) b_k(y)`
/// is folded onto the triangle `x < y` and integrated there with
/// `(x, y) = (u v, v)`, which keeps both singular corners on the edges of
/// the `(u, v)` square. `sigma_{r,s} = 2 same + 2 cross`.
fn bilinear_level<E: Executor, F: FunctionSpec>(
    exec: &E,
    fs: &[F],
    margins: &[MarginalModel],
    kernels: &[PairKernel],
    rule: &GradedRule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = fs.len();
    let d = margins.len();
    let npairs = m * (m + 1) / 2;
    let rows = exec.map(rule.len(), |q| -> Result<(Vec<f64>, Vec<f64>)> {
        let v = rule.nodes[q];
        let wv = rule.weights[q] * v;
        let mut psis: Vec<Psi<'_, F>> = fs.iter().map(|f| Psi::new(f, margins)).collect();
        let mut gy = vec![0.0; m * d];
        let mut gx = vec![0.0; m * d];
        for (r, psi) in psis.iter_mut().enumerate() {
            psi.gradient(v, &mut gy[r * d..(r + 1) * d])?;
        }
        let mut same = vec![Accumulator::default(); npairs];
        let mut cross = vec![Accumulator::default(); npairs];
        let mut kv = vec![(0.0, 0.0); kernels.len()];
        for (p, &u) in rule.nodes.iter().enumerate() {
            let x = u * v;
            let w = wv * rule.weights[p];
            for (r, psi) in psis.iter_mut().enumerate() {
                psi.gradient(x, &mut gx[r * d..(r + 1) * d])?;
            }
            let base = x * (1.0 - v);
            for (slot, pk) in kv.iter_mut().zip(kernels) {
                let f = pk.forward.eval(x, v);
                let b = pk.backward.as_ref().map_or(f, |k| k.eval(x, v));
                *slot = (f, b);
            }
            for r in 0..m {
                let ax = &gx[r * d..(r + 1) * d];
                let ay = &gy[r * d..(r + 1) * d];
                for s in r..m {
                    let bx = &gx[s * d..(s + 1) * d];
                    let by = &gy[s * d..(s + 1) * d];
                    let mut sj = 0.0;
                    for j in 0..d {
                        sj += ax[j] * by[j] + bx[j] * ay[j];
                    }
                    let mut cj = 0.0;
                    for (pk, &(kf, kb)) in kernels.iter().zip(&kv) {
                        let (j, k) = (pk.j, pk.k);
                        cj += kf * (ax[j] * by[k] + bx[j] * ay[k])
                            + kb * (bx[k] * ay[j] + ax[k] * by[j]);
                    }
                    let idx = packed(r, s, m);
                    same[idx].add(w * base * 0.5 * sj);
                    cross[idx].add(w * 0.5 * cj);
                }
            }
        }
        Ok((
            same.iter().map(Accumulator::total).collect(),
            cross.iter().map(Accumulator::total).collect(),
        ))
    });
    let mut same = vec![Accumulator::default(); npairs];
    let mut cross = vec![Accumulator::default(); npairs];
    for row in rows {
        let (s, c) = row?;
        for i in 0..npairs {
            same[i].add(s[i]);
            cross[i].add(c[i]);
        }
    }
    Ok((
        same.iter().map(Accumulator::total).collect(),
        cross.iter().map(Accumulator::total).collect(),
    ))
}

struct Refined {
    same: Vec<f64>,
    cross: Vec<f64>,
    /// Per packed entry: `2 same + 2 cross` at each level.
    traces: Vec<Vec<f64>>,
    errors: Vec<f64>,
}

fn refine<E: Executor, F: FunctionSpec>(
    exec: &E,
    fs: &[F],
    margins: &[MarginalModel],
    copulas: &CopulaSet,
) -> Result<Refined> {
    check_family(fs, margins)?;
    let kernels = pair_kernels(copulas, margins.len())?;
    let m = fs.len();
    let npairs = m * (m + 1) / 2;
    let mut traces = vec![Vec::new(); npairs];
    let mut last = (Vec::new(), Vec::new());
    for &(levels, points) in SIGMA_LEVELS.iter() {
        let rule = GradedRule::new(levels, levels, points);
        let (same, cross) = bilinear_level(exec, fs, margins, &kernels, &rule)?;
        for i in 0..npairs {
            traces[i].push(2.0 * same[i] + 2.0 * cross[i]);
        }
        last = (same, cross);
    }
    let mut errors = Vec::with_capacity(npairs);
    for trace in &traces {
        let k = trace.len();
        let e_prev = (trace[k - 2] - trace[k - 3]).abs();
        let e_last = (trace[k - 1] - trace[k - 2]).abs();
        let settled = e_last <= 1e-12 * trace[k - 1].abs().max(1.0);
        if !trace.iter().all(|v| v.is_finite()) || (!settled && e_last >= e_prev) {
            return Err(Error::Divergence {
                context: "variance quadrature is not settling; psi_j may be too singular at the endpoints"
                    .into(),
                trace: trace.clone(),
            });
        }
        errors.push(e_last);
    }
    Ok(Refined {
        same: last.0,
        cross: last.1,
        traces,
        errors,
    })
}

/// Limiting variance `sigma^2` of `sqrt(n) (T_n - gamma_bar)`.
pub fn sigma_squared<F: FunctionSpec>(
    f: &F,
    margins: &[MarginalModel],
    copulas: &CopulaSet,
) -> Result<VarianceReport> {
    sigma_squared_with(&Sequential, f, margins, copulas)
}

pub fn sigma_squared_with<E: Executor, F: FunctionSpec>(
    exec: &E,
    f: &F,
    margins: &[MarginalModel],
    copulas: &CopulaSet,
) -> Result<VarianceReport> {
    let r = refine(exec, core::slice::from_ref(f), margins, copulas)?;
    let (same, cross, quad_error) = (r.same[0], r.cross[0], r.errors[0]);
    let mut sigma2 = 2.0 * same + 2.0 * cross;
    let mut warnings = Vec::new();
    if sigma2 < 0.0 {
        if -sigma2 <= quad_error {
            warnings.push(format!("clamped quadrature result {sigma2:e} to 0"));
            sigma2 = 0.0;
        } else {
            return Err(Error::Parameter(format!(
                "variance came out negative ({sigma2:e}); the pairwise copulas are not coherent"
            )));
        }
    }
    Ok(VarianceReport {
        sigma2,
        same_j_term: same,
        cross_jk_term: cross,
        quad_error,
        trace: r.traces[0].clone(),
        finite_n_check: None,
        warnings,
    })
}

/// [`sigma_squared`] plus the exact finite-n variance at `n` as a cross-check.
pub fn sigma_squared_checked<E: Executor, F: FunctionSpec>(
    exec: &E,
    f: &F,
    margins: &[MarginalModel],
    copulas: &CopulaSet,
    n: usize,
) -> Result<VarianceReport> {
    let mut report = sigma_squared_with(exec, f, margins, copulas)?;
    let variance = finite_n_variance_with(exec, f, margins, copulas, n)?;
    report.finite_n_check = Some(FiniteNCheck {
        n,
        variance,
        gap: variance - report.sigma2,
    });
    Ok(report)
}

/// Asymptotic covariance matrix of `sqrt(n) (T_n(phi_r) - gamma_bar_r)`
/// over a family of functions sharing the same margins.
pub fn covariance_matrix<F: FunctionSpec>(
    fs: &[F],
    margins: &[MarginalModel],
    copulas: &CopulaSet,
) -> Result<CovarianceReport> {
    covariance_matrix_with(&Sequential, fs, margins, copulas)
}

pub fn covariance_matrix_with<E: Executor, F: FunctionSpec>(
    exec: &E,
    fs: &[F],
    margins: &[MarginalModel],
    copulas: &CopulaSet,
) -> Result<CovarianceReport> {
    let r = refine(exec, fs, margins, copulas)?;
    let m = fs.len();
    let mut matrix = vec![vec![0.0; m]; m];
    let mut quad_error = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a..m {
            let i = packed(a, b, m);
            let v = 2.0 * r.same[i] + 2.0 * r.cross[i];
            matrix[a][b] = v;
            matrix[b][a] = v;
            quad_error[a][b] = r.errors[i];
            quad_error[b][a] = r.errors[i];
        }
    }
    Ok(CovarianceReport { matrix, quad_error })
}

/// `psi_j(i / (n + 1))` for `i = 1..=n`, one vector per coordinate.
fn diagonal_gradients<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    let d = margins.len();
    let mut psi = Psi::new(f, margins);
    let mut out = vec![vec![0.0; n]; d];
    let mut g = vec![0.0; d];
    for i in 1..=n {
        psi.gradient(i as f64 / (n as f64 + 1.0), &mut g)
            .map_err(|e| match e {
                Error::Evaluation { context, .. } => Error::Evaluation { index: i, context },
                other => other,
            })?;
        for j in 0..d {
            out[j][i - 1] = g[j];
        }
    }
    Ok(out)
}

/// `(1/n^2) sum_{h,i} (min(h, i)/n - h i/n^2) a_h b_i` in `O(n)`.
fn min_block(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let nf = n as f64;
    let (mut sa, mut sb) = (0.0, 0.0);
    let mut suffix = Accumulator::default();
    for m in (0..n).rev() {
        sa += a[m];
        sb += b[m];
        suffix.add(sa * sb);
    }
    let mut ha = Accumulator::default();
    let mut hb = Accumulator::default();
    for h in 0..n {
        ha.add((h + 1) as f64 * a[h]);
        hb.add((h + 1) as f64 * b[h]);
    }
    (suffix.total() / nf - ha.total() * hb.total() / (nf * nf)) / (nf * nf)
}

/// Exact `Var(Z_{n,1})`:
/// `(1/n^2) sum_{j,k} sum_{h,i} (G_{j,k}(h/n, i/n) - h i/n^2) psi_j(mu_h) psi_k(mu_i)`
/// with `mu_h = h / (n + 1)`.
pub fn finite_n_variance<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    copulas: &CopulaSet,
    n: usize,
) -> Result<f64> {
    finite_n_variance_with(&Sequential, f, margins, copulas, n)
}

pub fn finite_n_variance_with<E: Executor, F: FunctionSpec + ?Sized>(
    exec: &E,
    f: &F,
    margins: &[MarginalModel],
    copulas: &CopulaSet,
    n: usize,
) -> Result<f64> {
    check_margins(f, margins)?;
    if n < 2 {
        return Err(Error::Parameter("finite-n variance needs n >= 2".into()));
    }
    let d = margins.len();
    let kernels = pair_kernels(copulas, d)?;
    let c = diagonal_gradients(f, margins, n)?;
    let mut total = Accumulator::default();
    for cj in &c {
        total.add(min_block(cj, cj));
    }
    let nf = n as f64;
    for pk in &kernels {
        let (a, b) = (&c[pk.j], &c[pk.k]);
        // Blocks (j, k) and (k, j) are equal, so only (j, k) is summed.
        let block = match &pk.forward {
            Kernel::Zero => 0.0,
            Kernel::Comonotone => min_block(a, b),
            kernel => {
                let scores: Vec<f64> = (1..n)
                    .map(|h| special::normal_quantile(h as f64 / nf))
                    .collect();
                let symmetric = kernel.is_symmetric();
                // G(1, .) and G(., 1) are the margins, so h = n or i = n adds 0.
                let rows = exec.map(n - 1, |h| {
                    let x = (h + 1) as f64 / nf;
                    let mut acc = Accumulator::default();
                    let start = if symmetric { h } else { 0 };
                    for i in start..n - 1 {
                        let y = (i + 1) as f64 / nf;
                        let e = match kernel {
                            Kernel::Gaussian(rho) => {
                                special::bivariate_normal_excess(scores[h], scores[i], *rho)
                            }
                            other => other.eval(x, y),
                        };
                        let t = if symmetric && i != h {
                            e * (a[h] * b[i] + a[i] * b[h])
                        } else {
                            e * a[h] * b[i]
                        };
                        acc.add(t);
                    }
                    acc.total()
                });
                let mut acc = Accumulator::default();
                for r in rows {
                    acc.add(r);
                }
                acc.total() / (nf * nf)
            }
        };
        total.add(2.0 * block);
    }
    Ok(total.total())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OrderStatVariance {
    /// `mu (1 - mu) / (n + 2)` with `mu = i / (n + 1)`.
    pub variance: f64,
    /// The bound `1 / n`.
    pub bound: f64,
}

/// Exact variance of the `i`-th of `n` uniform order statistics (one-based).
pub fn order_stat_variance(n: usize, i: usize) -> Result<OrderStatVariance> {
    if n == 0 || i == 0 || i > n {
        return Err(Error::Parameter(format!(
            "order statistic {i} of {n} does not exist"
        )));
    }
    let mu = i as f64 / (n as f64 + 1.0);
    Ok(OrderStatVariance {
        variance: mu * (1.0 - mu) / (n as f64 + 2.0),
        bound: 1.0 / n as f64,
    })
}

/// `n^{-1/2} sum_i gamma(i / (n + 1)) - sqrt(n) gamma_bar`.
pub fn riemann_gap<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    n: usize,
) -> Result<f64> {
    check_margins(f, margins)?;
    if n == 0 {
        return Err(Error::Parameter("riemann gap needs n >= 1".into()));
    }
    let gb = stat::gamma_bar(f, margins)?;
    let mut buf = vec![0.0; margins.len()];
    let mut acc = Accumulator::default();
    for i in 1..=n {
        acc.add(stat::gamma_with(
            f,
            margins,
            i as f64 / (n as f64 + 1.0),
            &mut buf,
        )?);
    }
    let sn = libm::sqrt(n as f64);
    Ok(acc.total() / sn - sn * gb.value)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LinearizationTrace {
    /// `Z_{n,l}` for each row `l`.
    pub z: Vec<f64>,
    /// `sqrt(n) (T_n - gamma_bar)`.
    pub lhs: f64,
    /// `-n^{-1/2} sum_l Z_{n,l}`. A sample quantile moves opposite to the
    /// empirical CDF at the same point, hence the sign.
    pub rhs: f64,
    pub residual: f64,
    pub statistic: f64,
    pub gamma_bar: f64,
}

/// Smallest `i` in `1..=n` with `i / n >= u` (`n + 1` if none).
fn first_covering(u: f64, n: usize) -> usize {
    let nf = n as f64;
    let mut i = (libm::ceil(u * nf) as usize).clamp(1, n + 1);
    while i > 1 && (i - 1) as f64 / nf >= u {
        i -= 1;
    }
    while i <= n && (i as f64) / nf < u {
        i += 1;
    }
    i
}

/// Linear terms `Z_{n,l} = (1/n) sum_i sum_j (I(U_l^j <= i/n) - i/n) psi_j(i/(n+1))`
/// and the remainder of `sqrt(n) (T_n - gamma_bar)` after removing them.
///
/// `uniforms` must already be on the probability scale, `U = F_j(X)`; `T_n`
/// is taken over `psi` of its sorted columns.
pub fn linearization<F: FunctionSpec + ?Sized>(
    uniforms: &SampleBatch,
    f: &F,
    margins: &[MarginalModel],
) -> Result<LinearizationTrace> {
    let gb = stat::gamma_bar(f, margins)?.value;
    linearization_with_gamma_bar(uniforms, f, margins, gb)
}

/// [`linearization`] with a precomputed `gamma_bar`, for repeated calls.
pub fn linearization_with_gamma_bar<F: FunctionSpec + ?Sized>(
    uniforms: &SampleBatch,
    f: &F,
    margins: &[MarginalModel],
    gamma_bar: f64,
) -> Result<LinearizationTrace> {
    check_margins(f, margins)?;
    if uniforms.d() != margins.len() {
        return Err(Error::DimensionMismatch {
            expected: margins.len(),
            got: uniforms.d(),
        });
    }
    let n = uniforms.n();
    if n == 0 {
        return Err(Error::Parameter("linearization needs n >= 1".into()));
    }
    let d = margins.len();
    for j in 0..d {
        if let Some(&u) = uniforms.column(j).iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::domain("uniform input", u, "(0, 1)"));
        }
    }
    let nf = n as f64;
    let c = diagonal_gradients(f, margins, n)?;
    // suffix[j][i-1] = sum_{i' >= i} c_j(i'); offset[j] = sum_i (i/n) c_j(i)
    let mut suffix = vec![vec![0.0; n + 1]; d];
    let mut offset = vec![0.0; d];
    for j in 0..d {
        let mut acc = Accumulator::default();
        for i in (0..n).rev() {
            acc.add(c[j][i]);
            suffix[j][i] = acc.total();
        }
        let mut o = Accumulator::default();
        for i in 0..n {
            o.add((i + 1) as f64 / nf * c[j][i]);
        }
        offset[j] = o.total();
    }
    let mut z = Vec::with_capacity(n);
    for l in 0..n {
        let mut acc = Accumulator::default();
        for j in 0..d {
            let i0 = first_covering(uniforms.column(j)[l], n);
            acc.add(suffix[j][i0 - 1] - offset[j]);
        }
        z.push(acc.total() / nf);
    }

    let sorted = uniforms.sorted_columns();
    let mut psi = Psi::new(f, margins);
    let mut row = vec![0.0; d];
    let mut t = Accumulator::default();
    for i in 0..n {
        for j in 0..d {
            row[j] = sorted[j][i];
        }
        t.add(psi.eval(&row).map_err(|e| match e {
            Error::Evaluation { context, .. } => Error::Evaluation { index: i, context },
            other => other,
        })?);
    }
    let statistic = t.total() / nf;
    let sn = libm::sqrt(nf);
    let lhs = sn * (statistic - gamma_bar);
    let rhs = -crate::quadrature::sum(&z) / sn;
    Ok(LinearizationTrace {
        z,
        lhs,
        rhs,
        residual: lhs - rhs,
        statistic,
        gamma_bar,
    })
}
