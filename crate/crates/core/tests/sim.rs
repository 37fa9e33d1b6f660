//! Tests for the Monte Carlo samplers and empirical statistics.

use kpz_core::prelimit::ScalingEmbedding;
use kpz_core::sim::*;
use kpz_core::tw::{gue_cdf_any_n, gue_finite_cdf, normal_cdf};
use kpz_core::Error;
use proptest::prelude::*;

/// Maximum over all up/right paths from `(0, 0)` to `(m−1, n−1)`.
fn all_paths_max(w: &[i64], cols: usize, m: usize, n: usize) -> i64 {
    fn rec(w: &[i64], cols: usize, i: usize, j: usize, m: usize, n: usize) -> i64 {
        let here = w[i * cols + j];
        let down = if i + 1 < m { Some(rec(w, cols, i + 1, j, m, n)) } else { None };
        let right = if j + 1 < n { Some(rec(w, cols, i, j + 1, m, n)) } else { None };
        here + match (down, right) {
            (Some(a), Some(b)) => a.max(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0,
        }
    }
    rec(w, cols, 0, 0, m, n)
}

#[test]
fn geom_dp_matches_all_paths() {
    let w = GeomWeights { q: 0.6, rows: 3, cols: 3, seed: 17 };
    for r in 0..500 {
        let weights = w.weights(r).unwrap();
        for m in 1..=3 {
            for n in 1..=3 {
                assert_eq!(sample_geom_lpp(&w, r, m, n).unwrap(), all_paths_max(&weights, 3, m, n), "replica {r} ({m},{n})");
            }
        }
    }
}

#[test]
fn single_cell_is_geometric_by_chi_square() {
    let q = 0.5;
    let w = GeomWeights { q, rows: 1, cols: 1, seed: 5 };
    let n = 100_000;
    let mut counts = [0usize; 11];
    for r in 0..n as u64 {
        let g = sample_geom_lpp(&w, r, 1, 1).unwrap();
        assert_eq!(g, w.weights(r).unwrap()[0]);
        counts[(g as usize).min(10)] += 1;
    }
    let mut chi2 = 0.0;
    for (k, c) in counts.iter().enumerate() {
        let p = if k < 10 { (1.0 - q) * q.powi(k as i32) } else { q.powi(10) };
        let e = p * n as f64;
        chi2 += (*c as f64 - e).powi(2) / e;
    }
    // 99% quantile of chi-square with 10 degrees of freedom.
    assert!(chi2 < 23.209, "chi2 = {chi2}");
}

#[test]
fn geom_lpp_is_monotone_pathwise() {
    let w = GeomWeights { q: 0.4, rows: 6, cols: 9, seed: 2 };
    for r in 0..50 {
        let t = geom_lpp_table(&w, r, 6, 9).unwrap();
        for i in 0..6 {
            for j in 0..9 {
                if i > 0 {
                    assert!(t[i * 9 + j] >= t[(i - 1) * 9 + j]);
                }
                if j > 0 {
                    assert!(t[i * 9 + j] >= t[i * 9 + j - 1]);
                }
            }
        }
    }
}

#[test]
fn geom_single_row_law_of_large_numbers() {
    let q = 0.3;
    let samples = 2000;
    let mut errs = Vec::new();
    for t in [10.0, 100.0, 1000.0] {
        let m = t as usize;
        let w = GeomWeights { q, rows: 1, cols: m, seed: 8 };
        let mean = (0..samples).map(|r| sample_geom_lpp(&w, r, 1, m).unwrap() as f64).sum::<f64>() / samples as f64;
        let ratio = mean * (1.0 - q) / q / m as f64;
        let se = (1.0 / (q * m as f64 * samples as f64)).sqrt();
        assert!((ratio - 1.0).abs() < 4.0 * se, "T = {t}: {ratio}");
        errs.push(se);
    }
    assert!(errs.windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn geom_argument_errors() {
    let w = GeomWeights { q: 0.5, rows: 2, cols: 2, seed: 0 };
    assert!(matches!(sample_geom_lpp(&w, 0, 3, 1), Err(Error::Argument(_))));
    assert!(matches!(sample_geom_lpp(&w, 0, 0, 1), Err(Error::Argument(_))));
    let bad = GeomWeights { q: 1.0, ..w };
    assert!(matches!(sample_geom_lpp(&bad, 0, 1, 1), Err(Error::Domain(_))));
}

#[test]
fn one_line_is_gaussian() {
    let mu = 1.5;
    let f = BrownianField::new(1, mu, 30, DpScheme::BridgeCorrected, 11).unwrap();
    let s = sample_brownian_many(&f, mu, 1, 0, 100_000).unwrap();
    let ks = ks_statistic(&s, |x| normal_cdf(x / mu.sqrt())).unwrap();
    // 1% critical value of the one-sample KS statistic.
    assert!(ks < 1.6276 / (1e5f64).sqrt(), "ks = {ks}");
    let path = brownian_path(&f, 3, 1).unwrap();
    assert_eq!(sample_brownian_h(&f, 3, mu, 1).unwrap(), path[30]);
    assert_eq!(path[0], 0.0);
}

#[test]
fn one_line_at_unit_time_is_symmetric() {
    let f = BrownianField::new(1, 1.0, 10, DpScheme::Grid, 4).unwrap();
    let s = sample_brownian_many(&f, 1.0, 1, 0, 40_000).unwrap();
    let p = s.iter().filter(|v| **v <= 0.0).count() as f64 / s.len() as f64;
    assert!((p - 0.5).abs() < 4.0 * (0.25f64 / 40_000.0).sqrt(), "{p}");
}

#[test]
fn two_lines_match_gue_law() {
    for scheme in [DpScheme::BridgeCorrected, DpScheme::Grid] {
        let f = BrownianField::with_dt(2, 1.0, 1e-3, scheme, 21).unwrap();
        let s = sample_brownian_many(&f, 1.0, 2, 0, 100_000).unwrap();
        let ks = ks_statistic(&s, |x| gue_finite_cdf(2, 1.0, x).unwrap()).unwrap();
        assert!(ks < 0.02, "{scheme:?}: ks = {ks}");
    }
}

#[test]
fn bridge_scheme_matches_gue_law_at_twenty_lines() {
    let f = BrownianField::with_dt(20, 20.0, 0.25, DpScheme::BridgeCorrected, 9).unwrap();
    let s = sample_brownian_many(&f, 20.0, 20, 0, 20_000).unwrap();
    let ks = ks_statistic(&s, |x| gue_cdf_any_n(20, 20.0, x).unwrap()).unwrap();
    assert!(ks < 0.02, "ks = {ks}");
}

#[test]
fn grid_scheme_is_below_bridge_scheme_pathwise() {
    let g = BrownianField::with_dt(8, 4.0, 0.05, DpScheme::Grid, 6).unwrap();
    let b = BrownianField { scheme: DpScheme::BridgeCorrected, ..g };
    for r in 0..200 {
        let probes = [(40, 3), (80, 8)];
        let lo = brownian_dp(&g, r, &probes).unwrap();
        let hi = brownian_dp(&b, r, &probes).unwrap();
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
    }
}

#[test]
fn halving_changes_little_at_two_lines() {
    let f = BrownianField::with_dt(2, 1.0, 1e-3, DpScheme::BridgeCorrected, 31).unwrap();
    let r = halving_rule(&f, 1.0, 2, 10_000, 0.01, 0).unwrap();
    assert!(r.converged, "{:?}", r.history);
    assert_eq!(r.history.len(), 1);
    assert_eq!(r.samples.len(), 10_000);
    assert_eq!(r.field, f);
}

#[test]
fn halving_is_a_pathwise_refinement() {
    let f = BrownianField::new(3, 2.0, 10, DpScheme::Grid, 1).unwrap();
    let h = f.halved().halved();
    assert_eq!(h.fine_steps(), 40);
    let coarse = brownian_path(&f, 7, 2).unwrap();
    let fine = brownian_path(&h, 7, 2).unwrap();
    for k in 0..=10 {
        assert!((coarse[k] - fine[4 * k]).abs() < 1e-12);
    }
    assert!(fine.windows(2).any(|p| p[0] != p[1]));
}

#[test]
fn halving_rule_reports_history_when_unconverged() {
    let f = BrownianField::new(4, 2.0, 4, DpScheme::Grid, 2).unwrap();
    let r = halving_rule(&f, 2.0, 4, 200, 1e-9, 2).unwrap();
    assert!(!r.converged);
    assert_eq!(r.history.len(), 3);
    assert!(r.history.windows(2).all(|p| p[1].0 == 0.5 * p[0].0));
    assert_eq!(r.field.level, 3);
}

fn small_embedding(m: f64) -> ScalingEmbedding {
    ScalingEmbedding { m, t1: 1.0, t2: 2.0, nu1: 0.0, nu2: 0.0, eta1: 0.0, eta2: 0.0 }
}

#[test]
fn joint_dominates_any_fixed_continuation() {
    let emb = small_embedding(10.0);
    let fp = emb.finite().unwrap();
    let f = field_for_embedding(&emb, 0.05, DpScheme::BridgeCorrected, 3).unwrap();
    let (k1, k2) = (f.step_of(fp.mu1).unwrap(), f.step_of(fp.mu2).unwrap());
    for r in 0..100 {
        let (h1, h2) = sample_joint(&f, r, &emb).unwrap();
        let stay = brownian_path(&f, r, fp.n1).unwrap();
        let top = brownian_path(&f, r, fp.n2).unwrap();
        assert!(h2 >= h1 + stay[k2] - stay[k1] - 1e-12);
        assert!(h2 >= h1 + top[k2] - top[k1] - 1e-12);
        assert_eq!(h1, sample_brownian_h(&f, r, fp.mu1, fp.n1).unwrap());
    }
}

#[test]
fn joint_first_marginal_matches_single_point_law() {
    let emb = small_embedding(10.0);
    let fp = emb.finite().unwrap();
    let f = field_for_embedding(&emb, 0.05, DpScheme::BridgeCorrected, 12).unwrap();
    let joint = sample_joint_many(&f, &emb, 0, 10_000).unwrap();
    let other = BrownianField { seed: 99, ..f };
    let single = sample_brownian_many(&other, fp.mu1, fp.n1, 0, 10_000).unwrap();
    let first: Vec<f64> = joint.iter().map(|p| p.0).collect();
    let ks = ks_two_sample(&first, &single).unwrap();
    // 1% critical value of the two-sample KS statistic.
    assert!(ks < 1.628 * (2.0f64 / 10_000.0).sqrt(), "ks = {ks}");
}

#[test]
fn rescaled_coordinates_are_positively_correlated() {
    let emb = small_embedding(20.0);
    let f = field_for_embedding(&emb, 0.1, DpScheme::BridgeCorrected, 4).unwrap();
    let pairs: Vec<(f64, f64)> =
        sample_joint_many(&f, &emb, 0, 4000).unwrap().into_iter().map(|(a, b)| rescale_to_limit(a, b, &emb)).collect();
    let n = pairs.len() as f64;
    let (mx, my) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let cov = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / n;
    let vx = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / n;
    let vy = pairs.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>() / n;
    let rho = cov / (vx * vy).sqrt();
    assert!(rho > 0.2, "rho = {rho}");
}

#[test]
fn joint_sampling_errors() {
    let emb = small_embedding(10.0);
    let f = BrownianField::new(5, 40.0, 400, DpScheme::Grid, 0).unwrap();
    assert!(matches!(sample_joint(&f, 0, &emb), Err(Error::Argument(_))));
    let f = BrownianField::new(40, 10.0, 100, DpScheme::Grid, 0).unwrap();
    assert!(matches!(sample_joint(&f, 0, &emb), Err(Error::Argument(_))));
    assert!(matches!(sample_brownian_h(&f, 0, 0.33, 2), Ok(_)));
    assert!(matches!(sample_brownian_h(&f, 0, 10.2, 2), Err(Error::Argument(_))));
    assert!(matches!(sample_brownian_h(&f, 0, 1.0, 41), Err(Error::Argument(_))));
    assert!(matches!(brownian_dp(&f, 0, &[(1, 0)]), Err(Error::Argument(_))));
    assert!(BrownianField::new(0, 1.0, 10, DpScheme::Grid, 0).is_err());
}

#[test]
fn off_grid_times_snap_within_half_a_step() {
    let f = BrownianField::new(2, 1.0, 10, DpScheme::Grid, 0).unwrap();
    assert_eq!(f.step_of(0.34).unwrap(), 3);
    assert_eq!(f.step_of(0.36).unwrap(), 4);
    assert_eq!(f.step_of(1.04).unwrap(), 10);
    assert!(f.step_of(1.06).is_err());
    assert!(f.step_of(-0.06).is_err());
}

#[test]
fn rescaling_examples() {
    let emb = ScalingEmbedding { m: 50.0, t1: 1.0, t2: 2.0, nu1: 0.0, nu2: 0.0, eta1: 0.3, eta2: -0.4 };
    let (x, y) = rescale_to_limit(100.0, 200.0, &emb);
    assert!(x.abs() < 1e-14 && y.abs() < 1e-14);
    let (x1, _) = rescale_to_limit(101.0, 200.0, &emb);
    assert!((x1 - x - 50f64.powf(-1.0 / 3.0)).abs() < 1e-14);
    let emb = ScalingEmbedding { nu1: 0.4, nu2: -0.3, ..emb };
    let fp = emb.finite().unwrap();
    for d in [-1e-9, 1e-9] {
        let (x, y) = rescale_to_limit(fp.xi1 + d, fp.xi2 + d, &emb);
        assert_eq!(x <= emb.eta1, d < 0.0);
        assert_eq!(y <= emb.eta2, d < 0.0);
    }
}

#[test]
fn ks_examples() {
    let d = ks_statistic(&[0.5], |x| x.clamp(0.0, 1.0)).unwrap();
    assert!((d - 0.5).abs() < 1e-15);
    let d = ks_statistic(&[0.25, 0.75], |x| x.clamp(0.0, 1.0)).unwrap();
    assert!((d - 0.25).abs() < 1e-15);
    assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(ks_two_sample(&[1.0, 1.0], &[1.0, 2.0]).unwrap(), 0.5);
    assert_eq!(ks_two_sample(&[0.0], &[1.0]).unwrap(), 1.0);
    assert!(ks_statistic(&[], |x| x).is_err());
    assert!(ks_two_sample(&[], &[1.0]).is_err());
}

#[test]
fn empirical_cdf_examples() {
    let e = EmpiricalCdf2D::new(&[(0.0, 0.0), (1.0, -1.0), (2.0, 2.0), (1.0, 1.0)]).unwrap();
    assert_eq!(e.len(), 4);
    assert_eq!(e.eval(-1.0, 10.0), 0.0);
    assert_eq!(e.eval(1.0, 0.0), 0.5);
    assert_eq!(e.eval(1.0, 1.0), 0.75);
    assert_eq!(e.eval(5.0, 5.0), 1.0);
    assert!((e.std_error(1.0, 0.0) - 0.25).abs() < 1e-15);
    assert!(EmpiricalCdf2D::new(&[]).is_err());
    assert!(EmpiricalCdf2D::new(&[(f64::NAN, 0.0)]).is_err());
}

#[test]
fn geometric_converges_to_two_line_law() {
    let f = BrownianField::with_dt(2, 1.0, 1e-3, DpScheme::BridgeCorrected, 40).unwrap();
    let rep = geom_to_brownian_check(0.5, &[50.0, 200.0, 800.0], 1.0, 2, 20_000, &f, |x| gue_finite_cdf(2, 1.0, x).unwrap(), 41)
        .unwrap();
    assert_eq!(rep.rows.len(), 3);
    assert!(rep.rows.windows(2).all(|p| p[1].1 < p[0].1 && p[1].2 < p[0].2), "{:?}", rep.rows);
    assert!(rep.rows[2].2 < 0.03, "{:?}", rep.rows);
}

#[test]
fn geometric_one_row_central_limit_trend() {
    let f = BrownianField::new(1, 1.0, 10, DpScheme::Grid, 50).unwrap();
    let rep = geom_to_brownian_check(0.4, &[20.0, 200.0, 2000.0], 1.0, 1, 20_000, &f, normal_cdf, 51).unwrap();
    assert!(rep.rows.windows(2).all(|p| p[1].2 < p[0].2), "{:?}", rep.rows);
    assert!(rep.rows[2].2 < 0.02, "{:?}", rep.rows);
}

#[test]
fn geometric_limit_is_q_robust() {
    let f = BrownianField::with_dt(2, 1.0, 1e-3, DpScheme::BridgeCorrected, 60).unwrap();
    let exact = |x| gue_finite_cdf(2, 1.0, x).unwrap();
    let a = geom_to_brownian_check(0.3, &[800.0], 1.0, 2, 20_000, &f, exact, 61).unwrap();
    let b = geom_to_brownian_check(0.5, &[800.0], 1.0, 2, 20_000, &f, exact, 62).unwrap();
    assert!((a.rows[0].2 - b.rows[0].2).abs() < 0.02, "{:?} {:?}", a.rows, b.rows);
    assert!(geom_to_brownian_check(0.5, &[50.0], 1.0, 6, 10, &f, exact, 0).is_err());
}

#[test]
fn sampling_is_seed_deterministic() {
    let f = BrownianField::new(6, 3.0, 60, DpScheme::BridgeCorrected, 123).unwrap();
    let a = sample_brownian_many(&f, 3.0, 6, 0, 64).unwrap();
    let b = sample_brownian_many(&f, 3.0, 6, 0, 64).unwrap();
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    let seq: Vec<f64> = (0..64).map(|r| sample_brownian_h(&f, r, 3.0, 6).unwrap()).collect();
    assert!(a.iter().zip(&seq).all(|(x, y)| x.to_bits() == y.to_bits()));
    let tail = sample_brownian_many(&f, 3.0, 6, 32, 32).unwrap();
    assert!(a[32..].iter().zip(&tail).all(|(x, y)| x.to_bits() == y.to_bits()));
    let other = sample_brownian_many(&BrownianField { seed: 124, ..f }, 3.0, 6, 0, 64).unwrap();
    assert!(a.iter().zip(&other).all(|(x, y)| x != y));
    let w = GeomWeights { q: 0.5, rows: 3, cols: 4, seed: 9 };
    assert_eq!(w.weights(5).unwrap(), w.weights(5).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn empirical_cdf_is_monotone_and_bounded(
        pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..40),
        x in -4.0f64..4.0, y in -4.0f64..4.0, dx in 0.0f64..2.0, dy in 0.0f64..2.0,
    ) {
        let e = EmpiricalCdf2D::new(&pts).unwrap();
        let v = e.eval(x, y);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(e.eval(x + dx, y) >= v && e.eval(x, y + dy) >= v);
        let brute = pts.iter().filter(|p| p.0 <= x && p.1 <= y).count() as f64 / pts.len() as f64;
        prop_assert_eq!(v, brute);
    }

    #[test]
    fn brownian_h_is_monotone_in_lines_and_time(seed in 0u64..10_000) {
        let f = BrownianField::new(5, 2.0, 20, DpScheme::BridgeCorrected, seed).unwrap();
        let probes: Vec<(usize, usize)> = (0..=20).flat_map(|k| (1..=5).map(move |i| (k, i))).collect();
        let h = brownian_dp(&f, 0, &probes).unwrap();
        for k in 0..=20 {
            for i in 1..5 {
                prop_assert!(h[k * 5 + i] >= h[k * 5 + i - 1]);
            }
        }
        prop_assert!(h[..5].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn two_sample_ks_is_symmetric_and_bounded(
        a in proptest::collection::vec(-5.0f64..5.0, 1..30),
        b in proptest::collection::vec(-5.0f64..5.0, 1..30),
    ) {
        let d = ks_two_sample(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_two_sample(&b, &a).unwrap());
    }
}
