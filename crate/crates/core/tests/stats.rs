use connectedness::stats::{
    adf_test, correlation_matrix, describe, jarque_bera, kendall_tau, significance_mask, AdfSpec, CorrMethod, LagRule,
    Moments, Significance,
};
use connectedness::{Error, ReturnPanel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn panel(cols: &[&[f64]]) -> ReturnPanel {
    let t = cols[0].len();
    let m = DMatrix::from_fn(t, cols.len(), |i, j| cols[j][i]);
    ReturnPanel::from_matrix(m, (0..cols.len()).map(|j| format!("x{j}")).collect()).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn two_pass(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let m = |k: i32| x.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt(), m(3) / m(2).powf(1.5), m(4) / m(2).powi(2))
}

proptest! {
    #[test]
    fn one_pass_moments_match_two_pass(x in proptest::collection::vec(-1e3f64..1e3, 8..200)) {
        let m = Moments::from_slice(&x);
        prop_assume!(!m.is_constant());
        let (mean, sd, skew, kurt) = two_pass(&x);
        prop_assert!((m.mean - mean).abs() < 1e-9 * (1.0 + mean.abs()));
        prop_assert!((m.sd() - sd).abs() < 1e-9 * (1.0 + sd));
        prop_assert!((m.skewness() - skew).abs() < 1e-7);
        prop_assert!((m.kurtosis() - kurt).abs() < 1e-7);
    }

    #[test]
    fn jarque_bera_is_affine_invariant(
        x in proptest::collection::vec(-10f64..10.0, 20..120),
        a in prop_oneof![0.01f64..100.0, -100.0f64..-0.01],
        b in -50f64..50.0,
    ) {
        prop_assume!(!Moments::from_slice(&x).is_constant());
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let (jx, jy) = (jarque_bera(&x).unwrap(), jarque_bera(&y).unwrap());
        prop_assert!((jx.stat - jy.stat).abs() < 1e-6 * (1.0 + jx.stat));
    }

    #[test]
    fn rank_correlations_ignore_monotone_transforms(
        x in proptest::collection::vec(-3f64..3.0, 10..60),
        noise in proptest::collection::vec(-1f64..1.0, 60),
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, e)| a + e).collect();
        let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let gy: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
        for method in [CorrMethod::Spearman, CorrMethod::Kendall] {
            let a = correlation_matrix(&panel(&[&x, &y]), method);
            let b = correlation_matrix(&panel(&[&fx, &gy]), method);
            if let (Ok(a), Ok(b)) = (a, b) {
                prop_assert!((a.values[(0, 1)] - b.values[(0, 1)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kendall_matches_pair_counting_with_ties(
        x in proptest::collection::vec(0i32..6, 5..40),
        y in proptest::collection::vec(0i32..6, 40),
    ) {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let yf: Vec<f64> = y[..x.len()].iter().map(|&v| v as f64).collect();
        let (mut c, mut d, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..xf.len() {
            for j in i + 1..xf.len() {
                let sx = (xf[i] - xf[j]).signum() * (xf[i] != xf[j]) as i32 as f64;
                let sy = (yf[i] - yf[j]).signum() * (yf[i] != yf[j]) as i32 as f64;
                if sx == 0.0 && sy != 0.0 {
                    tx += 1.0;
                } else if sy == 0.0 && sx != 0.0 {
                    ty += 1.0;
                } else if sx * sy > 0.0 {
                    c += 1.0;
                } else if sx * sy < 0.0 {
                    d += 1.0;
                }
            }
        }
        let denom = ((c + d + tx) * (c + d + ty)).sqrt();
        prop_assume!(denom > 0.0);
        prop_assert!((kendall_tau(&xf, &yf).tau_b - (c - d) / denom).abs() < 1e-12);
    }
}

#[test]
fn gaussian_kurtosis_is_three() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = gaussian(&mut rng, 100_000);
    let m = Moments::from_slice(&x);
    // Standard errors are about 0.008 for skewness and 0.015 for kurtosis.
    assert!(m.skewness().abs() < 0.04, "{}", m.skewness());
    assert!((m.kurtosis() - 3.0).abs() < 0.08, "{}", m.kurtosis());
}

#[test]
fn jarque_bera_rejects_uniform() {
    // Uniform: skewness 0, kurtosis 1.8, so JB ≈ n/6 · 1.44/4 = 0.06·n.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 2000;
    let mut total = 0.0;
    for _ in 0..50 {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let jb = jarque_bera(&x).unwrap();
        assert!(jb.p < 1e-10);
        total += jb.stat;
    }
    let mean = total / 50.0;
    assert!((mean / (0.06 * n as f64) - 1.0).abs() < 0.1, "{mean}");
}

#[test]
fn jarque_bera_p_is_chi2_two_tail() {
    let x: Vec<f64> = (0..40).map(|i| ((i * 7) % 13) as f64).collect();
    let jb = jarque_bera(&x).unwrap();
    assert!((jb.p - (-jb.stat / 2.0).exp()).abs() < 1e-15);
}

#[test]
fn correlation_p_values_match_reference() {
    // Reference values from an independent statistics package.
    let x = [1.0, 4.0, 2.0, 6.0, 3.0, 5.0, 7.0, 7.0, 2.0];
    let y = [2.0, 3.0, 1.0, 6.0, 5.0, 4.0, 8.0, 6.0, 2.0];
    let p = panel(&[&x, &y]);
    let cases = [
        (CorrMethod::Pearson, 0.880_887_651_600_395_1, 0.001_706_046_162_719_416_2),
        (CorrMethod::Spearman, 0.898_305_084_745_762_6, 0.000_998_493_732_442_570_1),
        (CorrMethod::Kendall, 0.764_705_882_352_941, 0.005_608_018_279_007_017),
    ];
    for (method, r, pv) in cases {
        let c = correlation_matrix(&p, method).unwrap();
        assert!((c.values[(0, 1)] - r).abs() < 1e-12, "{method}: {}", c.values[(0, 1)]);
        assert!((c.pvalues[(0, 1)] - pv).abs() < 1e-9, "{method}: {}", c.pvalues[(0, 1)]);
    }
}

#[test]
fn pearson_matrix_is_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cols: Vec<Vec<f64>> = (0..6).map(|_| gaussian(&mut rng, 50)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    let c = correlation_matrix(&panel(&refs), CorrMethod::Pearson).unwrap();
    let eig = c.values.clone().symmetric_eigen();
    assert!(eig.eigenvalues.min() > -1e-12);
    assert!((c.values.clone() - c.values.transpose()).amax() == 0.0);
}

#[test]
fn strong_correlation_survives_mask() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 700;
    let a = gaussian(&mut rng, n);
    let e = gaussian(&mut rng, n);
    let rho: f64 = 0.74;
    let b: Vec<f64> = a.iter().zip(&e).map(|(x, z)| rho * x + (1.0 - rho * rho).sqrt() * z).collect();
    for method in CorrMethod::ALL {
        let c = correlation_matrix(&panel(&[&a, &b]), method).unwrap();
        let mask = significance_mask(&c, 0.01).unwrap();
        assert!(mask[(0, 1)].is_some(), "{method}");
        assert_eq!(Significance::from_p(c.pvalues[(0, 1)]), Significance::One);
    }
}

#[test]
fn null_mask_rate_is_about_one_minus_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut blank, mut total) = (0usize, 0usize);
    for _ in 0..60 {
        let cols: Vec<Vec<f64>> = (0..6).map(|_| gaussian(&mut rng, 120)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let c = correlation_matrix(&panel(&refs), CorrMethod::Pearson).unwrap();
        let mask = significance_mask(&c, 0.10).unwrap();
        for i in 0..6 {
            for j in 0..i {
                total += 1;
                blank += mask[(i, j)].is_none() as usize;
            }
        }
    }
    let rate = blank as f64 / total as f64;
    assert!((rate - 0.9).abs() < 0.04, "{rate}");
}

#[test]
fn describe_reports_each_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a = gaussian(&mut rng, 300);
    let b: Vec<f64> = gaussian(&mut rng, 300).iter().map(|v| v * 2.0 + 1.0).collect();
    let rows = describe(&panel(&[&a, &b]), &AdfSpec::default()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[1].mean - 1.0).abs() < 0.3);
    assert!((rows[1].sd - 2.0).abs() < 0.3);
    assert!(rows.iter().all(|r| r.adf.is_some()));

    let short: Vec<f64> = a[..30].to_vec();
    let rows = describe(&panel(&[&short]), &AdfSpec::default()).unwrap();
    assert!(rows[0].adf.is_none());
    let tiny: Vec<f64> = a[..5].to_vec();
    assert!(matches!(describe(&panel(&[&tiny]), &AdfSpec::default()), Err(Error::InsufficientData { .. })));
}

#[test]
fn adf_separates_stationary_from_unit_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let e = gaussian(&mut rng, 400);
    let mut ar = vec![0.0; 400];
    for t in 1..400 {
        ar[t] = 0.5 * ar[t - 1] + e[t];
    }
    let walk: Vec<f64> = e
        .iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect();
    let fixed = AdfSpec { lag_rule: LagRule::Fixed(2) };
    let a = adf_test(&ar, &fixed).unwrap();
    assert_eq!(a.lags, 2);
    assert!(a.stat < a.critical[0]);
    let w = adf_test(&walk, &fixed).unwrap();
    assert!(w.stat > w.critical[2]);
    assert!(a.critical[0] < a.critical[1] && a.critical[1] < a.critical[2]);
}
