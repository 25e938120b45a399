//! Independent oracles for quadrature-based quantities.

use margquant_core::asymptotics::{finite_n_variance, riemann_gap, sigma_squared};
use margquant_core::calculus::{psi_gradient_diag, psi_j_diag, psi_jk_diag};
use margquant_core::functions::{MidpointSingular, Monomial, Sum};
use margquant_core::model::{copula_cdf, FnSpec};
use margquant_core::stat::{gamma_bar, gamma_eval};
use margquant_core::{CopulaSet, CopulaSpec, MarginalModel};

fn uniform(d: usize) -> Vec<MarginalModel> {
    vec![MarginalModel::standard_uniform(); d]
}

/// Composite trapezoid in `s = x^p` style grading: substitute
/// `x = t^k` near 0 and mirror near 1, summed on a fine uniform grid.
fn graded_trapezoid<F: Fn(f64) -> f64>(f: F, points: usize) -> f64 {
    // x = (1 - cos(pi t)) / 2 clusters nodes at both ends; apply twice
    let map = |t: f64| {
        let s = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
        0.5 * (1.0 - (std::f64::consts::PI * s).cos())
    };
    let dmap = |t: f64| {
        let pi = std::f64::consts::PI;
        let s = 0.5 * (1.0 - (pi * t).cos());
        0.5 * pi * (pi * s).sin() * 0.5 * pi * (pi * t).sin()
    };
    let h = 1.0 / points as f64;
    let mut acc = 0.0;
    for i in 1..points {
        let t = i as f64 * h;
        let x = map(t);
        if x > 0.0 && x < 1.0 {
            acc += f(x) * dmap(t);
        }
    }
    acc * h
}

#[test]
fn beta_type_gamma_bar_matches_trapezoid_oracle() {
    let f = MidpointSingular::new(2, 0.2).unwrap();
    let got = gamma_bar(&f, &uniform(2)).unwrap();
    let oracle = graded_trapezoid(|x| (x * (1.0 - x)).powf(-0.2), 10_000_000);
    // Gamma(0.8)^2 / Gamma(1.6)
    let closed = 1.516_964_232_792_922_5;
    assert!((oracle - closed).abs() < 1e-6, "oracle {oracle}");
    assert!((got.value - closed).abs() < 1e-8, "{got:?}");
    assert!(got.error < 1e-6);
}

#[test]
fn gaussian_copula_against_two_dimensional_quadrature() {
    // P(Z1 <= 0, Z2 <= 0) = 1/4 + asin(rho) / (2 pi)
    let g = copula_cdf(&CopulaSpec::gaussian(0.5).unwrap(), 0.5, 0.5).unwrap();
    assert!((g - 1.0 / 3.0).abs() < 1e-12);
    // brute midpoint integration of the bivariate density over (-8, a) x (-8, b)
    let rho: f64 = 0.5;
    let (a, b) = (-0.3, 0.8);
    let m = 1200;
    let (hx, hy) = ((a + 8.0) / m as f64, (b + 8.0) / m as f64);
    let c = 1.0 / (2.0 * std::f64::consts::PI * (1.0 - rho * rho).sqrt());
    let mut acc = 0.0;
    for i in 0..m {
        let x = -8.0 + (i as f64 + 0.5) * hx;
        for j in 0..m {
            let y = -8.0 + (j as f64 + 0.5) * hy;
            acc += c * (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * (1.0 - rho * rho))).exp();
        }
    }
    acc *= hx * hy;
    let u = margquant_core::special::normal_cdf(a);
    let v = margquant_core::special::normal_cdf(b);
    let got = copula_cdf(&CopulaSpec::gaussian(rho).unwrap(), u, v).unwrap();
    assert!((got - acc).abs() < 1e-6, "{got} {acc}");
}

#[test]
fn comonotone_square_matches_one_dimensional_square() {
    let co = CopulaSet::all_pairs(2, CopulaSpec::Comonotone);
    let a = sigma_squared(&Monomial::product(2), &uniform(2), &co)
        .unwrap()
        .sigma2;
    let sq = FnSpec::new(1, |x: &[f64]| x[0] * x[0]);
    let b = sigma_squared(&sq, &uniform(1), &CopulaSet::independent(1))
        .unwrap()
        .sigma2;
    assert!((a - b).abs() < 1e-9);
    assert!((a - 4.0 / 45.0).abs() < 1e-9);
}

#[test]
fn monomial_closed_form_variance() {
    // sigma^2 = (2/M^2) sum_{j<k} a_j a_k Cov(U_j^M, U_k^M) + sum a_j^2 / ((M+1)^2 (2M+1))
    let alpha = vec![1.5, 0.5, 1.0];
    let m: f64 = alpha.iter().sum();
    let f = Monomial::new(alpha.clone()).unwrap();
    let diag: f64 =
        alpha.iter().map(|a| a * a).sum::<f64>() / ((m + 1.0).powi(2) * (2.0 * m + 1.0));
    let ind = sigma_squared(&f, &uniform(3), &CopulaSet::independent(3)).unwrap();
    assert!((ind.sigma2 - diag).abs() < 1e-10, "{ind:?} {diag}");
    // comonotone: Cov(U^M, U^M) = 1/(2M+1) - 1/(M+1)^2
    let cov = 1.0 / (2.0 * m + 1.0) - 1.0 / (m + 1.0).powi(2);
    let mut cross = 0.0;
    for j in 0..3 {
        for k in j + 1..3 {
            cross += alpha[j] * alpha[k] * cov;
        }
    }
    let exact = diag + 2.0 / (m * m) * cross;
    let co = sigma_squared(
        &f,
        &uniform(3),
        &CopulaSet::all_pairs(3, CopulaSpec::Comonotone),
    )
    .unwrap();
    assert!((co.sigma2 - exact).abs() < 1e-10, "{co:?} {exact}");
}

#[test]
fn gaussian_variance_agrees_with_finite_n_sum() {
    let set = CopulaSet::all_pairs(2, CopulaSpec::gaussian(0.5).unwrap());
    let f = Monomial::product(2);
    let s = sigma_squared(&f, &uniform(2), &set).unwrap();
    let v = finite_n_variance(&f, &uniform(2), &set, 1024).unwrap();
    assert!((s.sigma2 - v).abs() < 5e-3, "{} {v}", s.sigma2);
    assert!(s.sigma2 > 2.0 / 45.0 && s.sigma2 < 4.0 / 45.0);
}

#[test]
fn derivative_identities_at_interior_points() {
    let margins = vec![
        MarginalModel::exponential(1.5).unwrap(),
        MarginalModel::normal(0.0, 2.0).unwrap(),
    ];
    let analytic = Monomial::new(vec![2.0, 1.0]).unwrap();
    let fd = FnSpec::new(2, |x: &[f64]| x[0] * x[0] * x[1]);
    for k in 1..=50 {
        let x = k as f64 / 51.0;
        let a = psi_gradient_diag(&analytic, &margins, x).unwrap();
        let b = psi_gradient_diag(&fd, &margins, x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-5 * (1.0 + p.abs()), "x={x}");
        }
        // gamma' = sum_j psi_j
        let h = 1e-6;
        let dg = (gamma_eval(&analytic, &margins, x + h).unwrap()
            - gamma_eval(&analytic, &margins, x - h).unwrap())
            / (2.0 * h);
        let s: f64 = a.iter().sum();
        assert!((dg - s).abs() <= 1e-5 * (1.0 + s.abs()), "x={x}: {dg} {s}");
        let sym = FnSpec::new(2, |x: &[f64]| (x[0] * x[1]).sin() + x[0].powi(3));
        let p = psi_jk_diag(&sym, &uniform(2), x, 0, 1).unwrap();
        let q = psi_jk_diag(&sym, &uniform(2), x, 1, 0).unwrap();
        assert!((p - q).abs() < 1e-6);
    }
    assert!((psi_j_diag(&Sum { dim: 1 }, &uniform(1), 0.42, 0).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn riemann_gap_of_singular_example() {
    let f = MidpointSingular::new(2, 0.2).unwrap();
    let gap = riemann_gap(&f, &uniform(2), 100_000).unwrap();
    assert!(gap.abs() <= 0.05, "{gap}");
}
