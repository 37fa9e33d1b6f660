//! Tests for the Tracy–Widom distribution and the finite-n GUE largest-eigenvalue law.

use kpz_core::quad::gauss_interval;
use kpz_core::tw::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn spec() -> FredholmSpec {
    FredholmSpec::default()
}

#[test]
fn f2_far_right_is_one() {
    let v = f2_cdf(8.0, &spec()).unwrap();
    assert!((v - 1.0).abs() < 1e-10, "{v}");
}

#[test]
fn f2_at_zero() {
    let v = f2_cdf(0.0, &spec()).unwrap();
    assert!((v - 0.9694).abs() < 5e-5, "{v}");
    let fine = f2_cdf(0.0, &FredholmSpec { nystrom_nodes: 120, domain_cutoff: 16.0 }).unwrap();
    let finer = f2_cdf(0.0, &FredholmSpec { nystrom_nodes: 240, domain_cutoff: 16.0 }).unwrap();
    assert!((v - fine).abs() < 1e-12 && (fine - finer).abs() < 1e-12);
}

#[test]
fn f2_converged_at_default_spec() {
    for k in 0..=20 {
        let eta = -6.0 + 0.5 * k as f64;
        let base = f2_cdf(eta, &spec()).unwrap();
        let fine = f2_cdf(eta, &FredholmSpec { nystrom_nodes: 160, domain_cutoff: 24.0 }).unwrap();
        assert!((base - fine).abs() < 1e-8, "eta {eta}: {base} vs {fine}");
        assert!((-1e-12..=1.0 + 1e-9).contains(&base));
    }
}

#[test]
fn f2_is_monotone_with_small_left_tail() {
    let mut prev = 0.0;
    for k in 0..=60 {
        let eta = -6.0 + 0.2 * k as f64;
        let v = f2_cdf(eta, &spec()).unwrap();
        assert!(v >= prev - 1e-14, "eta {eta}");
        prev = v;
    }
    assert!(f2_cdf(-1.0, &spec()).unwrap() < f2_cdf(0.0, &spec()).unwrap());
    assert!(f2_cdf(0.0, &spec()).unwrap() < f2_cdf(1.0, &spec()).unwrap());
    assert!(f2_cdf(-5.0, &spec()).unwrap() < 0.01);
}

#[test]
fn f2_mean_and_variance() {
    let (x, w) = gauss_interval(-9.0, 6.0, 200).unwrap();
    let h = 1e-4;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (x, w) in x.iter().zip(&w) {
        let d = (f2_cdf(x + h, &spec()).unwrap() - f2_cdf(x - h, &spec()).unwrap()) / (2.0 * h);
        m1 += w * x * d;
        m2 += w * x * x * d;
    }
    assert!((m1 + 1.7710868074).abs() < 1e-6, "{m1}");
    assert!((m2 - m1 * m1 - 0.8131947928).abs() < 1e-6, "{}", m2 - m1 * m1);
}

#[test]
fn f2_rejects_bad_input() {
    assert!(f2_cdf(f64::NAN, &spec()).is_err());
    assert!(f2_cdf(f64::INFINITY, &spec()).is_err());
    assert!(f2_cdf(0.0, &FredholmSpec { nystrom_nodes: 3, domain_cutoff: 16.0 }).is_err());
    assert!(f2_cdf(0.0, &FredholmSpec { nystrom_nodes: 60, domain_cutoff: 0.0 }).is_err());
}

#[test]
fn gue_one_by_one_is_gaussian() {
    assert!((gue_finite_cdf(1, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
    assert!((gue_finite_cdf(1, 4.0, 2.0).unwrap() - 0.841344746068543).abs() < 1e-12);
    for x in [-3.0, -0.7, 0.4, 2.5] {
        assert!((gue_finite_cdf(1, 2.0, x).unwrap() - normal_cdf(x / 2f64.sqrt())).abs() < 1e-15);
    }
}

fn vandermonde_sq(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for i in 0..x.len() {
        for j in 0..i {
            p *= (x[i] - x[j]).powi(2);
        }
    }
    p
}

fn eigen_integral(n: usize, xi: f64) -> f64 {
    let (x, w) = gauss_interval(-12.0, xi, 60).unwrap();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let pts: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let wt: f64 = idx.iter().map(|&i| w[i]).product();
        total += wt * vandermonde_sq(&pts) * pts.iter().map(|p| (-0.5 * p * p).exp()).product::<f64>();
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < x.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    total
}

#[test]
fn gue_matches_direct_eigenvalue_integral() {
    for n in [2usize, 3] {
        let z = eigen_integral(n, 12.0);
        for xi in [-1.0, 0.0, 0.8, 2.0, 3.5] {
            let direct = eigen_integral(n, xi) / z;
            let gram = gue_finite_cdf(n, 1.0, xi).unwrap();
            assert!((direct - gram).abs() < 1e-10, "n {n} xi {xi}: {direct} vs {gram}");
        }
    }
}

#[test]
fn gue_two_by_two_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let n = 1_000_000;
    let mut hits = 0usize;
    let half = 0.5f64.sqrt();
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let d: f64 = StandardNormal.sample(&mut rng);
        let br: f64 = StandardNormal.sample(&mut rng);
        let bi: f64 = StandardNormal.sample(&mut rng);
        let b2 = half * half * (br * br + bi * bi);
        let top = 0.5 * (a + d) + (0.25 * (a - d).powi(2) + b2).sqrt();
        if top <= 1.0 {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / n as f64;
    let p = gue_finite_cdf(2, 1.0, 1.0).unwrap();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((p_hat - p).abs() < 3.0 * se, "{p_hat} vs {p} (se {se})");
}

#[test]
fn gue_scaling_consistency() {
    for n in 1..=GUE_MAX_N {
        for (mu, xi) in [(0.3, 0.5), (2.0, 3.0), (7.5, -1.0), (1.0, 4.0)] {
            let a = gue_finite_cdf(n, mu, xi).unwrap();
            let b = gue_finite_cdf(n, 1.0, xi / f64::sqrt(mu)).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
    }
}

#[test]
fn gue_is_a_distribution_function() {
    for n in 1..=GUE_MAX_N {
        let mut prev = 0.0;
        for k in 0..=120 {
            let xi = -8.0 + 0.15 * k as f64;
            let v = gue_finite_cdf(n, 1.0, xi).unwrap();
            assert!(v >= prev - 1e-13, "n {n} xi {xi}");
            assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            prev = v;
        }
        assert!(gue_finite_cdf(n, 1.0, -8.0).unwrap() < 1e-10);
        assert!((gue_finite_cdf(n, 1.0, 2.0 * (n as f64).sqrt() + 8.0).unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(gue_finite_cdf(n, 1.0, f64::INFINITY).unwrap(), 1.0);
        assert_eq!(gue_finite_cdf(n, 1.0, f64::NEG_INFINITY).unwrap(), 0.0);
    }
}

#[test]
fn gue_pdf_matches_difference_quotient() {
    for n in 1..=GUE_MAX_N {
        for xi in [-1.0, 0.5, 2.0, 3.3] {
            let h = 1e-5;
            let fd = (gue_finite_cdf(n, 1.7, xi + h).unwrap() - gue_finite_cdf(n, 1.7, xi - h).unwrap()) / (2.0 * h);
            let pdf = gue_finite_pdf(n, 1.7, xi).unwrap();
            assert!((fd - pdf).abs() < 1e-8, "n {n} xi {xi}: {fd} vs {pdf}");
        }
    }
}

#[test]
fn gue_argument_checks() {
    assert!(matches!(gue_finite_cdf(0, 1.0, 0.0), Err(kpz_core::Error::Argument(_))));
    assert!(matches!(gue_finite_cdf(9, 1.0, 0.0), Err(kpz_core::Error::Argument(_))));
    assert!(matches!(gue_finite_cdf(2, 0.0, 0.0), Err(kpz_core::Error::Domain(_))));
    assert!(matches!(gue_finite_cdf(2, -1.0, 0.0), Err(kpz_core::Error::Domain(_))));
    assert!(gue_finite_cdf(2, 1.0, f64::NAN).is_err());
    assert!(gue_cdf_any_n(65, 1.0, 0.0).is_err());
    assert!(gue_cdf_any_n(32, 1.0, 0.0).is_ok());
}

#[test]
fn gue_extended_agrees_on_common_range() {
    for n in 1..=GUE_MAX_N {
        let a = gue_finite_cdf(n, 1.3, 1.1).unwrap();
        let b = gue_cdf_any_n(n, 1.3, 1.1).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn gue_edge_limit_trend() {
    for eta in [-1.0, 0.0, 1.0] {
        let target = f2_cdf(eta, &spec()).unwrap();
        let errs: Vec<f64> = [8usize, 16, 32]
            .iter()
            .map(|&m| {
                let n = m as f64;
                (gue_cdf_any_n(m, n, 2.0 * n + eta * n.powf(1.0 / 3.0)).unwrap() - target).abs()
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "eta {eta}: {errs:?}");
    }
}

#[test]
fn f2_table_interpolates_f2() {
    let t = F2Table::new(-6.0, 4.0, 0.01, &FredholmSpec::default()).unwrap();
    for eta in [-3.217, -1.0, 0.005, 1.3333] {
        let exact = f2_cdf(eta, &FredholmSpec::default()).unwrap();
        assert!((t.eval(eta) - exact).abs() < 2e-5, "{eta}");
    }
    assert_eq!(t.eval(-7.0), 0.0);
    assert_eq!(t.eval(5.0), 1.0);
    assert_eq!(t.eval(f64::NAN), 0.0);
    assert!(F2Table::new(1.0, 0.0, 0.1, &FredholmSpec::default()).is_err());
}
