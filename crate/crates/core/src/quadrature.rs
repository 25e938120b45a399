//! Quadrature rules: adaptive Gauss–Kronrod for smooth 1-D integrands and
//! an endpoint-graded Gauss–Legendre rule on (0, 1) for integrands that may
//! blow up at 0 or 1.

use alloc::vec;
use alloc::vec::Vec;

// Kronrod abscissae of the 15-point rule; odd indices are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the
/// summed estimate drops below `max(abs_tol, rel_tol * |value|)` or
/// `max_intervals` is reached. The returned `converged` flag reports which.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts: Vec<(f64, f64, f64, f64)> = vec![(a, b, v, e)];
    let mut value = v;
    let mut error = e;
    loop {
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            return Integral {
                value,
                error,
                converged: true,
            };
        }
        if parts.len() >= max_intervals {
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, pv, pe) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval cannot be split further in floating point
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        value += v1 + v2 - pv;
        error += e1 + e2 - pe;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        // re-sum occasionally drifts; recompute from parts for a stable total
        if parts.len().is_multiple_of(32) {
            value = parts.iter().map(|p| p.2).sum();
            error = parts.iter().map(|p| p.3).sum();
        }
    }
}

/// Nodes and weights of the `p`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(p: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(p >= 1, "rule needs at least one point");
    let mut nodes = vec![0.0; p];
    let mut weights = vec![0.0; p];
    let m = p.div_ceil(2);
    let pf = p as f64;
    for i in 0..m {
        let legendre = |z: f64| {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..p {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            (p1, pf * (z * p1 - p2) / (z * z - 1.0))
        };
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (pf + 0.5));
        for _ in 0..100 {
            let (p1, dp) = legendre(z);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        // derivative at the converged node, not the previous iterate
        let dp = legendre(z).1;
        nodes[i] = -z;
        nodes[p - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[p - 1 - i] = w;
    }
    (nodes, weights)
}

/// A tensor-ready 1-D rule on (0, 1) whose panels shrink geometrically
/// (ratio 1/2) toward both endpoints. No node ever sits on 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub left_levels: u32,
    pub right_levels: u32,
    pub points: usize,
}

/// Deepest grading toward 1: nodes of the end panel must stay strictly
/// below 1 and keep room for a difference step.
pub const MAX_RIGHT_LEVELS: u32 = 40;
/// Deepest grading toward 0.
pub const MAX_LEFT_LEVELS: u32 = 60;

impl GradedRule {
    pub fn new(left_levels: u32, right_levels: u32, points: usize) -> Self {
        let left = left_levels.clamp(1, MAX_LEFT_LEVELS);
        let right = right_levels.clamp(1, MAX_RIGHT_LEVELS);
        let (gx, gw) = gauss_legendre(points);
        let mut panels: Vec<(f64, f64)> = Vec::with_capacity((left + right + 2) as usize);
        let pow2 = |k: u32| libm::ldexp(1.0, -(k as i32));
        panels.push((0.0, pow2(left + 1)));
        for k in (1..=left).rev() {
            panels.push((pow2(k + 1), pow2(k)));
        }
        for k in 1..=right {
            panels.push((1.0 - pow2(k), 1.0 - pow2(k + 1)));
        }
        panels.push((1.0 - pow2(right + 1), 1.0));
        let mut nodes = Vec::with_capacity(panels.len() * points);
        let mut weights = Vec::with_capacity(panels.len() * points);
        for (a, b) in panels {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(gw.iter()) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Self {
            nodes,
            weights,
            left_levels: left,
            right_levels: right,
            points,
        }
    }

    /// Symmetric grading with `levels` on both sides (right side capped).
    pub fn symmetric(levels: u32, points: usize) -> Self {
        Self::new(levels, levels, points)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over (0, 1), stopping at the first error.
    pub fn integrate<E, F: FnMut(f64) -> Result<f64, E>>(&self, mut f: F) -> Result<f64, E> {
        let mut acc = Accumulator::default();
        for (&x, &w) in self.nodes.iter().zip(self.weights.iter()) {
            acc.add(w * f(x)?);
        }
        Ok(acc.total())
    }

    /// The same rule mapped affinely onto `(a, b)`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let len = b - a;
        let nodes = self.nodes.iter().map(|x| a + len * x).collect();
        let weights = self.weights.iter().map(|w| len * w).collect();
        (nodes, weights)
    }
}

/// Neumaier-compensated running sum. Order-dependent, so callers reduce in
/// a fixed order to stay bit-stable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    let mut acc = Accumulator::default();
    for &v in values {
        acc.add(v);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for p in [1usize, 2, 5, 12, 20] {
            let (x, w) = gauss_legendre(p);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * p - 1;
            let got: f64 = x
                .iter()
                .zip(&w)
                .map(|(x, w)| w * libm::pow(x + 1.0, deg as f64))
                .sum();
            let exact = libm::pow(2.0, (deg + 1) as f64) / (deg + 1) as f64;
            assert!((got - exact).abs() < 1e-12 * exact, "p={p}");
        }
    }

    #[test]
    fn adaptive_handles_smooth_and_peaked() {
        let r = adaptive(libm::exp, 0.0, 1.0, 1e-14, 0.0, 100);
        assert!(r.converged);
        assert!((r.value - (core::f64::consts::E - 1.0)).abs() < 1e-14);
        let r = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-10, 0.0, 500);
        let exact = 2.0 * libm::atan(100.0) * 100.0;
        assert!(r.converged);
        assert!((r.value - exact).abs() < 1e-8);
    }

    #[test]
    fn graded_rule_avoids_endpoints_and_sums_to_one() {
        let rule = GradedRule::symmetric(60, 12);
        assert!(rule.nodes.iter().all(|&x| x > 0.0 && x < 1.0));
        assert!(
            (sum(&rule.weights) - 1.0).abs() < 1e-14,
            "{}",
            sum(&rule.weights) - 1.0
        );
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn graded_rule_copes_with_endpoint_singularity() {
        // integral of x^{-1/2} (1-x)^{-1/2} over (0,1) is pi
        let rule = GradedRule::new(60, 40, 16);
        let v: f64 = rule
            .integrate::<(), _>(|x| Ok(1.0 / libm::sqrt(x * (1.0 - x))))
            .unwrap();
        assert!((v - core::f64::consts::PI).abs() < 1e-5, "{v}");
    }
}
