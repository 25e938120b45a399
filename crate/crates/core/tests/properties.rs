use margquant_core::functions::{Monomial, Sum};
use margquant_core::model::{copula_cdf, quantile_inverse, FnSpec};
use margquant_core::rng::{stream, uniform_open};
use margquant_core::stat::{broken_sample_bounds, estimate_statistic};
use margquant_core::{CopulaSpec, MarginalModel, SampleBatch};
use proptest::prelude::*;

fn shuffle(v: &mut [f64], seed: u64) {
    let mut rng = stream(seed);
    for i in (1..v.len()).rev() {
        let j = (uniform_open(&mut rng) * (i + 1) as f64) as usize;
        v.swap(i, j.min(i));
    }
}

#[test]
fn statistic_ignores_within_column_order() {
    let mut rng = stream(5);
    let cols: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..40).map(|_| uniform_open(&mut rng)).collect())
        .collect();
    let f = Monomial::new(vec![1.0, 2.0, 0.5]).unwrap();
    let base = estimate_statistic(&SampleBatch::from_columns(cols.clone()).unwrap(), &f)
        .unwrap()
        .value;
    for s in 0..100u64 {
        let mut c = cols.clone();
        for (j, col) in c.iter_mut().enumerate() {
            shuffle(col, s * 7 + j as u64);
        }
        let v = estimate_statistic(&SampleBatch::from_columns(c).unwrap(), &f)
            .unwrap()
            .value;
        assert_eq!(v, base);
    }
}

#[test]
fn monotone_transform_consistency() {
    let mut rng = stream(8);
    let x: Vec<f64> = (0..200).map(|_| uniform_open(&mut rng)).collect();
    let y: Vec<f64> = (0..200).map(|_| uniform_open(&mut rng)).collect();
    let raw = SampleBatch::from_columns(vec![x.clone(), y.clone()]).unwrap();
    let g = |t: f64| -(1.0 - t).ln();
    let moved = SampleBatch::from_columns(vec![x.iter().map(|&t| g(t)).collect(), y]).unwrap();
    let phi = Monomial::product(2);
    let composed = FnSpec::new(2, |v: &[f64]| (1.0 - (-v[0]).exp()) * v[1]);
    let a = estimate_statistic(&raw, &phi).unwrap().value;
    let b = estimate_statistic(&moved, &composed).unwrap().value;
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn comonotone_columns_align() {
    let mut rng = stream(9);
    let z: Vec<f64> = (0..100).map(|_| uniform_open(&mut rng)).collect();
    let g1 = |t: f64| t * t;
    let g2 = |t: f64| t.exp();
    let b = SampleBatch::from_columns(vec![
        z.iter().map(|&t| g1(t)).collect(),
        z.iter().map(|&t| g2(t)).collect(),
    ])
    .unwrap();
    let mut zs = z.clone();
    zs.sort_by(f64::total_cmp);
    let exact: f64 = zs.iter().map(|&t| g1(t) * g2(t)).sum::<f64>() / 100.0;
    let got = estimate_statistic(&b, &Monomial::product(2)).unwrap().value;
    assert!((got - exact).abs() < 1e-14);
}

#[test]
fn frechet_bounds_on_quasi_random_points() {
    let specs = [
        CopulaSpec::Independence,
        CopulaSpec::Comonotone,
        CopulaSpec::gaussian(0.5).unwrap(),
        CopulaSpec::gaussian(-0.8).unwrap(),
    ];
    for (n, spec) in specs.iter().enumerate() {
        let slack = if matches!(spec, CopulaSpec::Gaussian { .. }) {
            1e-10
        } else {
            0.0
        };
        for i in 1..=1000u64 {
            let x = (i as f64 * 0.618_033_988_749_894_9).fract();
            let y = (i as f64 * 0.754_877_666_246_692_8).fract();
            let g = copula_cdf(spec, x, y).unwrap();
            assert!(g >= (x + y - 1.0).max(0.0) - slack, "{n} {x} {y}");
            assert!(g <= x.min(y) + slack, "{n} {x} {y}");
        }
        let t = 1.0 - 1e-12;
        assert!((copula_cdf(spec, 0.3, t).unwrap() - 0.3).abs() < 1e-8);
        assert!((copula_cdf(spec, t, 0.3).unwrap() - 0.3).abs() < 1e-8);
    }
}

#[test]
fn strong_gaussian_is_nearly_comonotone() {
    let g = CopulaSpec::gaussian(0.999).unwrap();
    for i in 1..=9 {
        for j in 1..=9 {
            let (x, y) = (i as f64 / 10.0, j as f64 / 10.0);
            assert!((copula_cdf(&g, x, y).unwrap() - x.min(y)).abs() <= 0.02);
        }
    }
}

#[test]
fn empirical_quantile_scans_support() {
    let m = MarginalModel::empirical(&[3.0, 1.0, 2.0]).unwrap();
    assert_eq!(quantile_inverse(&m, 0.5).unwrap(), 2.0);
    assert_eq!(quantile_inverse(&m, 1.0 / 3.0).unwrap(), 1.0);
    assert!(quantile_inverse(&m, 0.0).is_err());
}

#[test]
fn broken_sample_bounds_cover_all_permutations() {
    let mut rng = stream(12);
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for k in 0..6 {
        let mut next = Vec::new();
        for p in &perms {
            for pos in 0..=k {
                let mut q = p.clone();
                q.insert(pos, k);
                next.push(q);
            }
        }
        perms = next;
    }
    assert_eq!(perms.len(), 720);
    let x: Vec<f64> = (0..6).map(|_| uniform_open(&mut rng) * 4.0 - 1.0).collect();
    let y: Vec<f64> = (0..6).map(|_| uniform_open(&mut rng) * 4.0 - 1.0).collect();
    let b = broken_sample_bounds(&x, &y).unwrap();
    for p in &perms {
        let avg: f64 = (0..6).map(|i| x[i] * y[p[i]]).sum::<f64>() / 6.0;
        assert!(avg >= b.lower - 1e-12 && avg <= b.upper + 1e-12);
    }
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(t in 1e-9f64..(1.0 - 1e-9), rate in 0.1f64..10.0, mean in -5.0f64..5.0, sd in 0.1f64..5.0) {
        for m in [
            MarginalModel::uniform(-2.0, 3.0).unwrap(),
            MarginalModel::exponential(rate).unwrap(),
            MarginalModel::normal(mean, sd).unwrap(),
        ] {
            let x = m.quantile(t).unwrap();
            prop_assert!((m.cdf(x) - t).abs() <= 1e-10 * t.clamp(1e-2, 1.0) + 1e-12);
        }
    }

    #[test]
    fn empirical_quantile_is_generalized_inverse(values in prop::collection::vec(-10.0f64..10.0, 1..30), t in 0.001f64..0.999) {
        let m = MarginalModel::empirical(&values).unwrap();
        let q = m.quantile(t).unwrap();
        prop_assert!(m.cdf(q) >= t - 1e-12);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        for &v in sorted.iter().filter(|&&v| v < q) {
            prop_assert!(m.cdf(v) < t);
        }
    }

    #[test]
    fn bounds_are_ordered(x in prop::collection::vec(-100.0f64..100.0, 1..40), seed in any::<u64>()) {
        let mut y = x.clone();
        shuffle(&mut y, seed);
        let y: Vec<f64> = y.iter().map(|v| v * 0.5 + 1.0).collect();
        let b = broken_sample_bounds(&x, &y).unwrap();
        prop_assert!(b.lower <= b.upper + 1e-9);
        let avg: f64 = x.iter().zip(&y).map(|(a, c)| a * c).sum::<f64>() / x.len() as f64;
        prop_assert!(avg >= b.lower - 1e-9 && avg <= b.upper + 1e-9);
    }

    #[test]
    fn sum_statistic_is_sum_of_means(cols in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 5), 1..4)) {
        let d = cols.len();
        let b = SampleBatch::from_columns(cols.clone()).unwrap();
        let got = estimate_statistic(&b, &Sum { dim: d }).unwrap().value;
        let exact: f64 = cols.iter().flatten().sum::<f64>() / 5.0;
        prop_assert!((got - exact).abs() <= 1e-9 * (1.0 + exact.abs()));
    }
}
