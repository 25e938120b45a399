//! `psi = phi o (F_1^{-1}, ..., F_d^{-1})`, its derivatives on the diagonal,
//! and numeric probes for the growth and integrability conditions.
//!
//! Derivatives use the chain rule when `phi` reports its own derivatives
//! and every margin has closed-form quantile derivatives; otherwise central
//! differences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_unit_open, Error, Result};
use crate::model::{FunctionSpec, MarginalModel};
use crate::stat::check_margins;

/// `psi(u) = phi(F_1^{-1}(u_1), ..., F_d^{-1}(u_d))` for `u` in `(0, 1)^d`.
pub fn psi_eval<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    u: &[f64],
) -> Result<f64> {
    check_margins(f, margins)?;
    if u.len() != margins.len() {
        return Err(Error::DimensionMismatch {
            expected: margins.len(),
            got: u.len(),
        });
    }
    for &t in u {
        check_unit_open("u", t)?;
    }
    Psi::new(f, margins).eval(u)
}

/// Evaluation context holding scratch space, so hot loops do not allocate.
pub(crate) struct Psi<'a, F: ?Sized> {
    f: &'a F,
    margins: &'a [MarginalModel],
    q: Vec<f64>,
    u: Vec<f64>,
    grad: Vec<f64>,
    hess: Vec<f64>,
    chain: bool,
}

const EPS: f64 = f64::EPSILON;

impl<'a, F: FunctionSpec + ?Sized> Psi<'a, F> {
    pub(crate) fn new(f: &'a F, margins: &'a [MarginalModel]) -> Self {
        let d = margins.len();
        Self {
            f,
            margins,
            q: vec![0.0; d],
            u: vec![0.0; d],
            grad: vec![0.0; d],
            hess: vec![0.0; d * d],
            chain: margins
                .iter()
                .all(|m| m.quantile_derivatives(0.5).is_some()),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.margins.len()
    }

    pub(crate) fn eval(&mut self, u: &[f64]) -> Result<f64> {
        for ((q, m), &t) in self.q.iter_mut().zip(self.margins).zip(u) {
            *q = m.quantile_unchecked(t);
        }
        let v = self.f.eval(&self.q);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                index: 0,
                context: format!("psi{u:?} = {v}"),
            })
        }
    }

    fn eval_diag_shifted(&mut self, x: f64, shifts: &[(usize, f64)]) -> Result<f64> {
        let mut u = core::mem::take(&mut self.u);
        u.fill(x);
        for &(j, s) in shifts {
            u[j] += s;
        }
        let r = self.eval(&u);
        self.u = u;
        r
    }

    /// Writes `psi_j(x)` for every `j` into `out`.
    pub(crate) fn gradient(&mut self, x: f64, out: &mut [f64]) -> Result<()> {
        check_unit_open("x", x)?;
        if self.chain {
            for (q, m) in self.q.iter_mut().zip(self.margins) {
                *q = m.quantile_unchecked(x);
            }
            if self.f.gradient(&self.q, &mut self.grad) {
                for (j, o) in out.iter_mut().enumerate() {
                    let (dq, _) = self.margins[j]
                        .quantile_derivatives(x)
                        .unwrap_or((0.0, 0.0));
                    *o = self.grad[j] * dq;
                }
                return check_finite(out, x);
            }
        }
        let h = first_step(x)?;
        for (j, o) in out.iter_mut().enumerate() {
            let up = self.eval_diag_shifted(x, &[(j, h)])?;
            let down = self.eval_diag_shifted(x, &[(j, -h)])?;
            *o = (up - down) / (2.0 * h);
        }
        check_finite(out, x)
    }

    /// Writes `psi~_{j,k}(x)` row-major into `out` (length `d * d`).
    pub(crate) fn hessian(&mut self, x: f64, out: &mut [f64]) -> Result<()> {
        check_unit_open("x", x)?;
        let d = self.dim();
        if self.chain {
            for (q, m) in self.q.iter_mut().zip(self.margins) {
                *q = m.quantile_unchecked(x);
            }
            if self.f.gradient(&self.q, &mut self.grad) && self.f.hessian(&self.q, &mut self.hess) {
                for j in 0..d {
                    let (dj, ddj) = self.margins[j]
                        .quantile_derivatives(x)
                        .unwrap_or((0.0, 0.0));
                    for k in 0..d {
                        let (dk, _) = self.margins[k]
                            .quantile_derivatives(x)
                            .unwrap_or((0.0, 0.0));
                        let mut v = self.hess[j * d + k] * dj * dk;
                        if j == k {
                            v += self.grad[j] * ddj;
                        }
                        out[j * d + k] = v;
                    }
                }
                return check_finite(out, x);
            }
        }
        let h = second_step(x)?;
        let centre = self.eval_diag_shifted(x, &[])?;
        for j in 0..d {
            let up = self.eval_diag_shifted(x, &[(j, h)])?;
            let down = self.eval_diag_shifted(x, &[(j, -h)])?;
            out[j * d + j] = (up - 2.0 * centre + down) / (h * h);
            for k in j + 1..d {
                let pp = self.eval_diag_shifted(x, &[(j, h), (k, h)])?;
                let pm = self.eval_diag_shifted(x, &[(j, h), (k, -h)])?;
                let mp = self.eval_diag_shifted(x, &[(j, -h), (k, h)])?;
                let mm = self.eval_diag_shifted(x, &[(j, -h), (k, -h)])?;
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                out[j * d + k] = v;
                out[k * d + j] = v;
            }
        }
        check_finite(out, x)
    }
}

fn check_finite(values: &[f64], x: f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(j) => Err(Error::Evaluation {
            index: j,
            context: format!(
                "derivative of psi at the diagonal point {x} is {}",
                values[j]
            ),
        }),
    }
}

/// Shrinks a nominal step so `x +- h` stays well inside (0, 1), and
/// returns the representable step actually taken.
fn fit_step(x: f64, nominal: f64) -> Result<f64> {
    let room = x.min(1.0 - x) / 8.0;
    let h = nominal.min(room);
    let h = (x + h) - x;
    if !(h >= f64::MIN_POSITIVE) || x - h == x || x - h <= 0.0 || x + h >= 1.0 {
        return Err(Error::Endpoint { x });
    }
    Ok(h)
}

pub(crate) fn first_step(x: f64) -> Result<f64> {
    fit_step(x, (libm::cbrt(EPS) * x.abs().max(1.0)).max(1e-6))
}

pub(crate) fn second_step(x: f64) -> Result<f64> {
    fit_step(
        x,
        (libm::sqrt(libm::sqrt(EPS)) * x.abs().max(1.0)).max(1e-6),
    )
}

fn check_index(j: usize, d: usize) -> Result<()> {
    if j >= d {
        return Err(Error::Parameter(format!(
            "coordinate index {j} out of range for d = {d}"
        )));
    }
    Ok(())
}

/// `psi_j(x)`, the `j`-th partial derivative of `psi` at `(x, ..., x)`.
/// Indices are zero-based.
pub fn psi_j_diag<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    x: f64,
    j: usize,
) -> Result<f64> {
    check_margins(f, margins)?;
    check_index(j, margins.len())?;
    let mut out = vec![0.0; margins.len()];
    Psi::new(f, margins).gradient(x, &mut out)?;
    Ok(out[j])
}

/// All `psi_j(x)` at once.
pub fn psi_gradient_diag<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    x: f64,
) -> Result<Vec<f64>> {
    check_margins(f, margins)?;
    let mut out = vec![0.0; margins.len()];
    Psi::new(f, margins).gradient(x, &mut out)?;
    Ok(out)
}

/// `psi~_{j,k}(x)`, the mixed second partial of `psi` at `(x, ..., x)`.
pub fn psi_jk_diag<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    x: f64,
    j: usize,
    k: usize,
) -> Result<f64> {
    check_margins(f, margins)?;
    let d = margins.len();
    check_index(j, d)?;
    check_index(k, d)?;
    let mut out = vec![0.0; d * d];
    Psi::new(f, margins).hessian(x, &mut out)?;
    Ok(out[j * d + k])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ProbeCondition {
    #[serde(rename = "C2")]
    C2,
    #[serde(rename = "C3-grad")]
    C3Gradient,
    #[serde(rename = "C3-hess")]
    C3Hessian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Converged,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConditionProbeReport {
    pub condition: ProbeCondition,
    pub grid_sizes: Vec<usize>,
    /// Raw sequence: Riemann sums for the integrability probes, running
    /// suprema for the growth probe.
    pub values: Vec<f64>,
    /// Limit estimates from the tail of `values` (integrability probes
    /// only); `None` where the increments do not shrink.
    pub extrapolated: Vec<Option<f64>>,
    pub verdict: Verdict,
    pub sup_ratio: Option<f64>,
    pub c0: Option<f64>,
}

/// Relative agreement used by all verdicts.
pub const AGREEMENT_TOL: f64 = 0.01;
/// Growth per refinement that counts towards divergence.
pub const GROWTH_THRESHOLD: f64 = 0.10;
/// Largest growth of the sup ratio on the final doubling still counted as
/// stable.
pub const C2_STABLE_GROWTH: f64 = 0.05;
/// Grid sizes of the integrability probe.
pub const C3_GRID: [usize; 6] = [1 << 8, 1 << 10, 1 << 12, 1 << 14, 1 << 16, 1 << 18];
/// Point budgets of the growth probe; each doubles the previous one.
pub const C2_SAMPLES: [usize; 4] = [10_000, 20_000, 40_000, 80_000];

fn agree(values: &[f64]) -> bool {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    lo.is_finite() && hi.is_finite() && hi - lo <= AGREEMENT_TOL * scale
}

fn grows_each_time(values: &[f64], times: usize) -> bool {
    values.len() > times
        && values[values.len() - times - 1..]
            .windows(2)
            .all(|w| w[1].abs() >= (1.0 + GROWTH_THRESHOLD) * w[0].abs() && w[1] != 0.0)
}

/// Limit estimates for a sequence refined by a constant factor of 4.
///
/// Increments are treated as geometric: `E_k = S_{k+2} + D_{k+1} r / (1 - r)`
/// with `r = D_{k+1} / D_k`. One Richardson step then removes the `1/n`
/// term every such Riemann sum carries from its `1/n` normalisation.
pub fn extrapolate(values: &[f64]) -> Vec<Option<f64>> {
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let aitken: Vec<Option<f64>> = diffs
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let r = w[1] / w[0];
            (r.is_finite() && r.abs() < 1.0).then(|| values[k + 2] + w[1] * r / (1.0 - r))
        })
        .collect();
    aitken
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(b + (b - a) / 3.0),
            _ => None,
        })
        .collect()
}

fn classify_riemann(values: &[f64], extrapolated: &[Option<f64>]) -> Verdict {
    if grows_each_time(values, 3) {
        return Verdict::Diverging;
    }
    if values.len() >= 3 && agree(&values[values.len() - 3..]) {
        return Verdict::Converged;
    }
    if extrapolated.len() >= 3 {
        let tail: Option<Vec<f64>> = extrapolated[extrapolated.len() - 3..]
            .iter()
            .copied()
            .collect();
        if let Some(tail) = tail {
            if agree(&tail) {
                return Verdict::Converged;
            }
        }
    }
    Verdict::Inconclusive
}

/// Both integrability probes for one `(j, k)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct C3Probe {
    pub gradient: ConditionProbeReport,
    pub hessian: ConditionProbeReport,
}

/// Riemann sums `(1/n) sum_i (mu (1 - mu))^{3/2} psi_j(mu)^2` and
/// `(1/n) sum_i (mu (1 - mu))^{3/2} |psi~_{j,k}(mu)|` with `mu = i / (n + 1)`
/// on `n` in [`C3_GRID`], each classified as converging or not.
pub fn probe_c3<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    j: usize,
    k: usize,
) -> Result<C3Probe> {
    check_margins(f, margins)?;
    let d = margins.len();
    check_index(j, d)?;
    check_index(k, d)?;
    let mut psi = Psi::new(f, margins);
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut g_sums = Vec::with_capacity(C3_GRID.len());
    let mut h_sums = Vec::with_capacity(C3_GRID.len());
    for &n in C3_GRID.iter() {
        let mut g_acc = crate::quadrature::Accumulator::default();
        let mut h_acc = crate::quadrature::Accumulator::default();
        for i in 1..=n {
            let mu = i as f64 / (n as f64 + 1.0);
            let w = libm::pow(mu * (1.0 - mu), 1.5);
            psi.gradient(mu, &mut grad).map_err(|e| with_index(e, i))?;
            psi.hessian(mu, &mut hess).map_err(|e| with_index(e, i))?;
            g_acc.add(w * grad[j] * grad[j]);
            h_acc.add(w * hess[j * d + k].abs());
        }
        g_sums.push(g_acc.total() / n as f64);
        h_sums.push(h_acc.total() / n as f64);
    }
    let report = |condition, values: Vec<f64>| {
        let extrapolated = extrapolate(&values);
        ConditionProbeReport {
            condition,
            grid_sizes: C3_GRID.to_vec(),
            verdict: classify_riemann(&values, &extrapolated),
            values,
            extrapolated,
            sup_ratio: None,
            c0: None,
        }
    };
    Ok(C3Probe {
        gradient: report(ProbeCondition::C3Gradient, g_sums),
        hessian: report(ProbeCondition::C3Hessian, h_sums),
    })
}

fn with_index(e: Error, i: usize) -> Error {
    match e {
        Error::Evaluation { context, .. } => Error::Evaluation { index: i, context },
        other => other,
    }
}

/// Largest `m` with `m^d <= count`.
fn lattice_side(count: usize, d: usize) -> usize {
    let mut m = libm::floor(libm::pow(count as f64, 1.0 / d as f64)) as usize;
    let fits = |m: usize| {
        (m as u128)
            .checked_pow(d as u32)
            .is_some_and(|v| v <= count as u128)
    };
    while m > 1 && !fits(m) {
        m -= 1;
    }
    while fits(m + 1) {
        m += 1;
    }
    m.max(1)
}

/// Growth probe on the corner boxes `(0, c0)^d` and `(1 - c0, 1)^d`.
///
/// Each sample size `N` in [`C2_SAMPLES`] places a centred product lattice
/// of `m^d <= N / 2` points in each box, so the distance from the corners
/// shrinks regularly as `N` doubles. The supremum of
/// `|psi(x)| / (1 + sum_j |gamma(x_j)|)` over the lattice is stable when the
/// last doubling grows it by at most 5%, and diverging when every doubling
/// grows it by 10% or more.
pub fn probe_c2<F: FunctionSpec + ?Sized>(
    f: &F,
    margins: &[MarginalModel],
    c0: f64,
) -> Result<ConditionProbeReport> {
    check_margins(f, margins)?;
    if !(c0 > 0.0 && c0 < 0.5) {
        return Err(Error::domain("c0", c0, "(0, 1/2)"));
    }
    let d = margins.len();
    let mut psi = Psi::new(f, margins);
    let mut u = vec![0.0; d];
    let mut diag = vec![0.0; d];
    let mut values = Vec::with_capacity(C2_SAMPLES.len());
    for &count in C2_SAMPLES.iter() {
        let m = lattice_side(count / 2, d);
        let mut sup = 0.0f64;
        let mut idx = vec![0usize; d];
        let mut point = 0usize;
        loop {
            for upper in [false, true] {
                for (slot, &k) in u.iter_mut().zip(&idx) {
                    let h = c0 * (k as f64 + 0.5) / m as f64;
                    *slot = if upper { 1.0 - h } else { h };
                }
                let num = psi.eval(&u).map_err(|e| with_index(e, point))?.abs();
                let mut den = 1.0;
                for &t in &u {
                    diag.fill(t);
                    den += psi.eval(&diag).map_err(|e| with_index(e, point))?.abs();
                }
                sup = sup.max(num / den);
                point += 1;
            }
            // odometer step over the multi-index
            let mut carry = 0;
            while carry < d {
                idx[carry] += 1;
                if idx[carry] < m {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
            }
            if carry == d {
                break;
            }
        }
        values.push(sup);
    }
    let growth = |w: &[f64]| if w[0] == 0.0 { 0.0 } else { w[1] / w[0] - 1.0 };
    let verdict = if values.windows(2).all(|w| growth(w) >= GROWTH_THRESHOLD) {
        Verdict::Diverging
    } else if growth(&values[values.len() - 2..]) <= C2_STABLE_GROWTH {
        Verdict::Converged
    } else {
        Verdict::Inconclusive
    };
    Ok(ConditionProbeReport {
        condition: ProbeCondition::C2,
        grid_sizes: C2_SAMPLES.to_vec(),
        sup_ratio: values.last().copied(),
        values,
        extrapolated: Vec::new(),
        verdict,
        c0: Some(c0),
    })
}
