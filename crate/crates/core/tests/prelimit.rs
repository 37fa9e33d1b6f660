//! Tests for the finite-size geometric and Brownian formulas.

use std::f64::consts::PI;

use kpz_core::kernels::KernelEvalConfig;
use kpz_core::linalg::{factorial, permutations};
use kpz_core::prelimit::*;
use kpz_core::quad::gauss_interval;
use kpz_core::tw::{gue_finite_cdf, gue_finite_pdf};
use kpz_core::Error;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Exhaustive distribution of last-passage times on an `m × n` grid of
/// geometric weights, each truncated at `cut`; calls `visit(G, prob)` with the
/// full table `G[i][j]` (0-based) for every weight configuration.
fn enumerate_lpp(m: usize, n: usize, q: f64, cut: usize, mut visit: impl FnMut(&[Vec<i64>], f64)) {
    let cells = m * n;
    let mass: Vec<f64> = (0..=cut).map(|k| (1.0 - q) * q.powi(k as i32)).collect();
    let mut w = vec![0usize; cells];
    let mut g = vec![vec![0i64; n]; m];
    loop {
        let mut prob = 1.0;
        for i in 0..m {
            for j in 0..n {
                let wij = w[i * n + j];
                prob *= mass[wij];
                let prev = match (i, j) {
                    (0, 0) => 0,
                    (0, _) => g[0][j - 1],
                    (_, 0) => g[i - 1][0],
                    _ => g[i - 1][j].max(g[i][j - 1]),
                };
                g[i][j] = prev + wij as i64;
            }
        }
        visit(&g, prob);
        let mut c = 0;
        while c < cells {
            w[c] += 1;
            if w[c] <= cut {
                break;
            }
            w[c] = 0;
            c += 1;
        }
        if c == cells {
            break;
        }
    }
}

fn direct_delta(k: i64, m: i64, x: i64, q: f64) -> f64 {
    if k >= 0 {
        let mut binom = 1.0;
        let mut total = 0.0;
        for j in 0..=k {
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * binom * w_m(m, x + j, q).unwrap();
            binom *= (k - j) as f64 / (j + 1) as f64;
        }
        total
    } else {
        let mut f: Vec<f64> = (0..=x.max(0) + 1).map(|y| w_m(m, y, q).unwrap()).collect();
        for _ in 0..(-k) {
            let mut acc = 0.0;
            let mut g = vec![0.0; f.len()];
            for y in 0..f.len() {
                g[y] = acc;
                acc += f[y];
            }
            f = g;
        }
        if x < 0 {
            0.0
        } else {
            f[x as usize]
        }
    }
}

#[test]
fn w_m_examples() {
    for x in 0..6 {
        assert!((w_m(1, x, 0.4).unwrap() - 0.6 * 0.4f64.powi(x as i32)).abs() < 1e-16);
    }
    assert!((w_m(2, 1, 0.3).unwrap() - 0.294).abs() < 1e-15);
    assert_eq!(w_m(3, -1, 0.3).unwrap(), 0.0);
    for m in 1..6 {
        let s: f64 = (0..200).map(|x| w_m(m, x, 0.3).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12, "m {m}: {s}");
    }
    assert!(matches!(w_m(0, 1, 0.3), Err(Error::Argument(_))));
    assert!(matches!(w_m(1, 1, 1.0), Err(Error::Domain(_))));
}

#[test]
fn delta_k_w_m_examples() {
    assert!((delta_k_w_m(1, 1, 0, 0.3).unwrap() + 0.49).abs() < 1e-14);
    for x in [0, 2, 5] {
        assert!((delta_k_w_m(0, 3, x, 0.3).unwrap() - w_m(3, x, 0.3).unwrap()).abs() < 1e-14);
    }
    let partial: f64 = (0..=2).map(|y| w_m(1, y, 0.3).unwrap()).sum();
    assert!((delta_k_w_m(-1, 1, 3, 0.3).unwrap() - partial).abs() < 1e-12);
    let half = delta_k_w_m_on_circle(-1, 1, 3, 0.3, 0.5, 128).unwrap();
    assert!((half - partial).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]
    #[test]
    fn delta_k_w_m_matches_differences_and_partial_sums(k in -3i64..=3, m in 1i64..=4, x in -3i64..=25, q in 0.1f64..0.7) {
        let v = delta_k_w_m(k, m, x, q).unwrap();
        let d = direct_delta(k, m, x, q);
        prop_assert!((v - d).abs() < 1e-12, "k {} m {} x {} q {}: {} vs {}", k, m, x, q, v, d);
    }
}

#[test]
fn vector_prob_reductions_and_errors() {
    for x in 0..8 {
        assert!((vector_prob(&[x], 3, 0.3).unwrap() - w_m(3, x, 0.3).unwrap()).abs() < 1e-14);
    }
    assert!(matches!(vector_prob(&[3, 1], 2, 0.3), Err(Error::Argument(_))));
    assert!(vector_prob(&[], 2, 0.3).is_err());
}

#[test]
fn vector_prob_matches_enumeration() {
    let q = 0.3;
    let mut table = vec![vec![0.0; 7]; 7];
    enumerate_lpp(2, 2, q, 30, |g, p| {
        let (a, b) = (g[1][0], g[1][1]);
        if a <= 6 && b <= 6 {
            table[a as usize][b as usize] += p;
        }
    });
    let mut box_det = 0.0;
    let mut box_enum = 0.0;
    for x1 in 0..=6i64 {
        for x2 in x1..=6 {
            let v = vector_prob(&[x1, x2], 2, q).unwrap();
            assert!(v >= -1e-12, "{x1} {x2}: {v}");
            assert!((v - table[x1 as usize][x2 as usize]).abs() < 1e-12, "{x1} {x2}");
            box_det += v;
            box_enum += table[x1 as usize][x2 as usize];
        }
    }
    assert!((box_det - box_enum).abs() < 1e-6);
}

#[test]
fn transition_prob_reductions() {
    let q = 0.35;
    for y in [[0i64, 0], [1, 3], [2, 2], [0, 5]] {
        let a = transition_prob(&[0, 0], &y, 0, 3, q).unwrap();
        assert!((a - vector_prob(&y, 3, q).unwrap()).abs() < 1e-14);
    }
    for (x, y) in [(0i64, 4i64), (2, 3), (5, 5)] {
        let a = transition_prob(&[x], &[y], 1, 3, q).unwrap();
        assert!((a - w_m(2, y - x, q).unwrap()).abs() < 1e-14);
    }
    assert!(transition_prob(&[0, 0], &[1, 2], 2, 2, q).is_err());
    assert!(transition_prob(&[1, 0], &[1, 2], 0, 2, q).is_err());
    assert!(transition_prob(&[0], &[1, 2], 0, 2, q).is_err());
}

#[test]
fn chapman_kolmogorov_two_rows() {
    let q = 0.3;
    for y in [[0i64, 1], [1, 1], [2, 4], [3, 6]] {
        let mut total = 0.0;
        for x1 in 0..=30i64 {
            for x2 in x1..=30 {
                let p = vector_prob(&[x1, x2], 1, q).unwrap();
                if p.abs() < 1e-300 {
                    continue;
                }
                total += transition_prob(&[x1, x2], &y, 1, 2, q).unwrap() * p;
            }
        }
        let want = vector_prob(&y, 2, q).unwrap();
        assert!((total - want).abs() < 1e-8, "{y:?}: {total} vs {want}");
    }
}

fn small_geom() -> GeomLppParams {
    GeomLppParams { q: 0.3, m1: 1, m2: 2, n1: 1, n2: 2 }
}

fn joint_enumeration(p: &GeomLppParams, v1: i64, v2: i64) -> f64 {
    let mut total = 0.0;
    enumerate_lpp(p.m2, p.n2, p.q, 30, |g, pr| {
        if g[p.m1 - 1][p.n1 - 1] <= v1 && g[p.m2 - 1][p.n2 - 1] <= v2 {
            total += pr;
        }
    });
    total
}

#[test]
fn joint_cdf_matches_enumeration() {
    let p = small_geom();
    let cfg = JointContourSpec::default();
    let v = joint_cdf_contour(&p, 4, 4, &cfg).unwrap();
    let e = joint_enumeration(&p, 4, 4);
    assert!((v - e).abs() < 1e-8, "{v} vs {e}");
    for (v1, v2) in [(0, 0), (1, 3), (3, 2), (2, 7)] {
        let v = joint_cdf_contour(&p, v1, v2, &cfg).unwrap();
        let e = joint_enumeration(&p, v1, v2);
        assert!((v - e).abs() < 1e-8, "({v1},{v2}): {v} vs {e}");
    }
}

#[test]
fn joint_cdf_other_shapes_match_enumeration() {
    let cfg = JointContourSpec { s1: 0.3, r1: 0.8, r2: 0.5, s2: 0.7, ..Default::default() };
    for p in [
        GeomLppParams { q: 0.25, m1: 1, m2: 3, n1: 1, n2: 2 },
        GeomLppParams { q: 0.25, m1: 2, m2: 3, n1: 1, n2: 2 },
    ] {
        for (v1, v2) in [(1, 3), (2, 5)] {
            let v = joint_cdf_contour(&p, v1, v2, &cfg).unwrap();
            let e = joint_enumeration(&p, v1, v2);
            assert!((v - e).abs() < 1e-8, "{p:?} ({v1},{v2}): {v} vs {e}");
        }
    }
}

#[test]
fn joint_cdf_large_first_level_gives_marginal() {
    let p = small_geom();
    let cfg = JointContourSpec::default();
    for v2 in [2, 5] {
        let mut marg = 0.0;
        enumerate_lpp(2, 2, p.q, 30, |g, pr| {
            if g[1][1] <= v2 {
                marg += pr;
            }
        });
        let v = joint_cdf_contour(&p, 20, v2, &cfg).unwrap();
        assert!((v - marg).abs() < 1e-8, "{v} vs {marg}");
    }
}

#[test]
fn joint_cdf_is_monotone_and_bounded() {
    let p = small_geom();
    let cfg = JointContourSpec::default();
    let mut grid = [[0.0; 5]; 5];
    for (i, row) in grid.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = joint_cdf_contour(&p, i as i64, 2 * j as i64, &cfg).unwrap();
            assert!((-1e-9..=1.0 + 1e-9).contains(v));
        }
    }
    for i in 0..5 {
        for j in 0..5 {
            if i + 1 < 5 {
                assert!(grid[i + 1][j] >= grid[i][j] - 1e-9);
            }
            if j + 1 < 5 {
                assert!(grid[i][j + 1] >= grid[i][j] - 1e-9);
            }
        }
    }
}

#[test]
fn joint_cdf_radius_invariance() {
    let p = small_geom();
    let base = joint_cdf_contour(&p, 3, 5, &JointContourSpec::default()).unwrap();
    for cfg in [
        JointContourSpec { s1: 0.35, r1: 0.65, r2: 0.5, s2: 0.7, ..Default::default() },
        JointContourSpec { s1: 0.2, r1: 0.7, r2: 0.6, s2: 0.75, ..Default::default() },
    ] {
        let v = joint_cdf_contour(&p, 3, 5, &cfg).unwrap();
        assert!((v - base).abs() < 1e-9, "{cfg:?}: {v} vs {base}");
    }
}

#[test]
fn joint_cdf_rejects_bad_radii_and_sizes() {
    let p = small_geom();
    let bad = JointContourSpec { s1: 0.5, r1: 0.6, r2: 0.4, s2: 0.8, ..Default::default() };
    assert!(matches!(joint_cdf_contour(&p, 1, 1, &bad), Err(Error::Argument(_))));
    let big = GeomLppParams { q: 0.3, m1: 1, m2: 2, n1: 1, n2: 4 };
    assert!(matches!(joint_cdf_contour(&big, 1, 1, &JointContourSpec::default()), Err(Error::Unsupported(_))));
}

fn fp(n1: usize, n2: usize, xi1: f64, xi2: f64) -> FiniteParams {
    FiniteParams { n1, n2, mu1: 1.0, mu2: 2.0, xi1, xi2 }
}

/// Independent evaluation of the entries `A_0`, `∂_h A_h`, `B` on lines left
/// of the circles: `d1 = −1.5 < d3 = −1`, `d4 = −1.5 < d2 = −1`.
struct Direct {
    a0: Vec<f64>,
    astar: Vec<f64>,
    b: Vec<f64>,
    n2: usize,
}

fn g(n: i64, mu: f64, xi: f64, z: C) -> C {
    z.powi(n as i32) * (0.5 * mu * z * z - xi * z).exp()
}

fn weighted_line(d: f64, n: i64, mu: f64, xi: f64, circ: &[(C, C)]) -> Vec<(C, C)> {
    let h = 0.025;
    let steps = (12.0 / h) as i64;
    (-steps..=steps)
        .map(|j| {
            let z = C::new(d, j as f64 * h);
            let s: C = circ.iter().map(|(zeta, wt)| wt / (z - zeta)).sum();
            (z, g(n, mu, xi, z) * s * (h / (2.0 * PI)))
        })
        .collect()
}

fn weighted_circle(r: f64, n: i64, mu: f64, xi: f64) -> Vec<(C, C)> {
    let m = 160;
    (0..m)
        .map(|j| {
            let z = C::from_polar(r, 2.0 * PI * j as f64 / m as f64);
            (z, z / m as f64 / g(n, mu, xi, z))
        })
        .collect()
}

fn direct_entries(p: &FiniteParams) -> Direct {
    let (n1, n2) = (p.n1 as i64, p.n2 as i64);
    let dn = n2 - n1;
    let (dmu, dxi) = (p.mu2 - p.mu1, p.xi2 - p.xi1);
    let n = p.n2;
    let mut d = Direct { a0: vec![0.0; n * n], astar: vec![0.0; n * n], b: vec![0.0; n * n], n2: n };
    for l in 1..=n2 {
        for k in 1..=n2 {
            let zeta = weighted_circle(0.5, k, p.mu1, p.xi1);
            let omega = weighted_circle(0.4, n2 + 1 - l, dmu, dxi);
            let za = weighted_line(-1.5, n1, p.mu1, p.xi1, &zeta);
            let wa = weighted_line(-1.0, dn, dmu, dxi, &omega);
            let zb = weighted_line(-1.0, n1 + 1, p.mu1, p.xi1, &zeta);
            let wb = weighted_line(-1.5, dn - 1, dmu, dxi, &omega);
            let double = |zs: &[(C, C)], ws: &[(C, C)]| -> C {
                zs.iter().map(|(z, fz)| fz * ws.iter().map(|(w, gw)| gw / (z - w)).sum::<C>()).sum()
            };
            let idx = ((l - 1) * n2 + k - 1) as usize;
            let delta = if l == k { 1.0 } else { 0.0 };
            d.a0[idx] = double(&za, &wa).re - delta * if l <= n1 { 1.0 } else { 0.0 };
            let sz: C = za.iter().map(|(_, v)| v).sum();
            let sw: C = wa.iter().map(|(_, v)| v).sum();
            d.astar[idx] = -(sz * sw).re;
            d.b[idx] = -double(&zb, &wb).re - delta * if l > n1 { 1.0 } else { 0.0 };
        }
    }
    d
}

impl Direct {
    fn at(&self, v: &[f64], l: usize, k: usize) -> f64 {
        v[(l - 1) * self.n2 + k - 1]
    }

    /// `Q(h)` by the permutation sum over `S_{n2} × S_{n2}`.
    fn q(&self, n1: usize, h: f64) -> f64 {
        let n2 = self.n2;
        let perms = permutations(n2);
        let mut total = 0.0;
        for (sigma, ss) in &perms {
            for (tau, st) in &perms {
                let mut prod = ss * st;
                for j in 0..n2 {
                    let (l, k) = (tau[j] + 1, sigma[j] + 1);
                    let delta = if l == k { 1.0 } else { 0.0 };
                    prod *= if j < n1 {
                        delta * if l <= n1 { 1.0 } else { 0.0 } + self.at(&self.a0, l, k) + h * self.at(&self.astar, l, k)
                    } else {
                        delta * if l > n1 { 1.0 } else { 0.0 } + self.at(&self.b, l, k)
                    };
                }
                total += prod;
            }
        }
        total / (factorial(n1) * factorial(n2 - n1))
    }

    fn q_prime(&self, n1: usize) -> f64 {
        (8.0 * (self.q(n1, 1.0) - self.q(n1, -1.0)) - (self.q(n1, 2.0) - self.q(n1, -2.0))) / 12.0
    }
}

#[test]
fn kernel_entry_identities_against_direct_entries() {
    let cfg = FiniteKernelConfig::default();
    for p in [fp(1, 2, 0.5, 1.5), fp(2, 3, 1.0, 2.5), FiniteParams { n1: 1, n2: 3, mu1: 0.8, mu2: 1.9, xi1: -0.3, xi2: 1.2 }] {
        let t = KernelTables::new(&p, &cfg).unwrap();
        let d = direct_entries(&p);
        let n1 = p.n1;
        for l in 1..=p.n2 {
            for k in 1..=p.n2 {
                let a0 = d.at(&d.a0, l, k);
                assert!((a0 - t.a0(l, k)).abs() < 1e-10, "{p:?} a0({l},{k}): {a0} vs {}", t.a0(l, k));
                let dd = if l == n1 + 1 && k == n1 + 1 { 1.0 } else { 0.0 };
                let b = d.at(&d.b, l, k);
                assert!((b - (t.b(l, k) - dd)).abs() < 1e-10, "{p:?} B({l},{k}): {b} vs {}", t.b(l, k) - dd);
                let ks = if k == n1 + 1 { 1.0 } else { 0.0 };
                let ls = if l == n1 { 1.0 } else { 0.0 };
                let want = -(ks - t.a3_star(k)) * (ls - t.a2_star(l));
                let astar = d.at(&d.astar, l, k);
                assert!((astar - want).abs() < 1e-10, "{p:?} A*({l},{k}): {astar} vs {want}");
            }
        }
    }
}

#[test]
fn q_prime_expansion_matches_permutation_sum() {
    let cfg = FiniteKernelConfig::default();
    for p in [
        fp(1, 2, 0.5, 1.5),
        fp(1, 2, -0.7, 0.4),
        fp(2, 3, 1.0, 2.5),
        fp(1, 3, 0.2, 2.0),
        FiniteParams { n1: 2, n2: 4, mu1: 1.0, mu2: 2.5, xi1: 1.5, xi2: 3.5 },
    ] {
        let e = q_prime_expansion(&p, &cfg).unwrap();
        let want = direct_entries(&p).q_prime(p.n1);
        assert!((e.total - want).abs() < 1e-9, "{p:?}: {} vs {want} ({:?})", e.total, e.parts);
    }
}

#[test]
fn q_prime_degenerate_term_and_support() {
    let cfg = FiniteKernelConfig::default();
    let p = fp(1, 2, 0.5, 1.5);
    let t = KernelTables::new(&p, &cfg).unwrap();
    let ck = composite_kernels(&p, 2, 1, &cfg).unwrap();
    assert!((ck.b - t.b(2, 1)).abs() < 1e-14);
    let e = q_prime_from_tables(&t);
    assert!((e.parts.iter().sum::<f64>() - e.total).abs() < 1e-15);
    let big = FiniteParams { n1: 3, n2: 4, mu1: 1.0, mu2: 2.0, xi1: 0.0, xi2: 1.0 };
    assert!(matches!(q_prime_expansion(&big, &cfg), Err(Error::Unsupported(_))));
    let big = FiniteParams { n1: 1, n2: 4, mu1: 1.0, mu2: 2.0, xi1: 0.0, xi2: 1.0 };
    assert!(matches!(q_prime_expansion(&big, &cfg), Err(Error::Unsupported(_))));
}

#[test]
fn composite_kernel_indicator_logic() {
    let cfg = FiniteKernelConfig::default();
    let p = fp(2, 4, 0.8, 2.0);
    for l in 1..=4 {
        for k in 1..=4 {
            let ck = composite_kernels(&p, l, k, &cfg).unwrap();
            let a01 = finite_kernel(FiniteKernelKind::A01, &p, l, k, &cfg).unwrap();
            let c2 = finite_kernel(FiniteKernelKind::C2, &p, l, k, &cfg).unwrap();
            let c3 = finite_kernel(FiniteKernelKind::C3, &p, l, k, &cfg).unwrap();
            let mut want = a01;
            if k > 2 {
                want += c2;
            }
            if l <= 2 {
                want -= c3;
            }
            assert!((ck.a0 - want).abs() < 1e-14);
            let tilde = finite_kernel(FiniteKernelKind::A01, &p, l, 2, &cfg).unwrap()
                + finite_kernel(FiniteKernelKind::C2, &p, l, 2, &cfg).unwrap()
                - if l <= 2 { finite_kernel(FiniteKernelKind::C3, &p, l, 2, &cfg).unwrap() } else { 0.0 };
            assert!((ck.a0_tilde - tilde).abs() < 1e-14);
        }
    }
}

#[test]
fn finite_kernel_argument_checks() {
    let cfg = FiniteKernelConfig::default();
    let p = fp(1, 2, 0.5, 1.5);
    assert!(finite_kernel(FiniteKernelKind::C3, &p, 0, 1, &cfg).is_err());
    assert!(finite_kernel(FiniteKernelKind::C3, &p, 1, 3, &cfg).is_err());
    let v = finite_kernel(FiniteKernelKind::C3, &p, 1, 2, &cfg).unwrap();
    assert!(v.is_finite());
    let mut bad = cfg;
    bad.contour.tau1 = 1.2;
    assert!(matches!(finite_kernel(FiniteKernelKind::A01, &p, 1, 1, &bad), Err(Error::Argument(_))));
    let mut bad = cfg;
    bad.contour.d3 = 0.9;
    assert!(finite_kernel(FiniteKernelKind::B1, &p, 1, 1, &bad).is_err());
    let bad = FiniteKernelConfig { tau: 1.5, ..cfg };
    assert!(finite_kernel(FiniteKernelKind::C2, &p, 1, 1, &bad).is_err());
    assert!(finite_kernel(FiniteKernelKind::C2, &FiniteParams { mu2: 0.5, ..p }, 1, 1, &cfg).is_err());
}

#[test]
fn q_prime_reduces_to_first_marginal_density() {
    let cfg = FiniteKernelConfig::default();
    for (n1, n2) in [(1usize, 2usize), (2, 3)] {
        for xi1 in [-1.0, 0.3, 1.5] {
            let p = FiniteParams { n1, n2, mu1: 1.0, mu2: 2.0, xi1, xi2: 14.0 };
            let v = q_prime_expansion(&p, &cfg).unwrap().total;
            let want = gue_finite_pdf(n1, 1.0, xi1).unwrap();
            assert!((v - want).abs() < 1e-9, "n1 {n1} xi1 {xi1}: {v} vs {want}");
        }
    }
}

#[test]
fn q_prime_integrates_to_second_marginal() {
    let cfg = FiniteKernelConfig::default();
    let (x, w) = gauss_interval(-7.0, 7.0, 48).unwrap();
    for xi2 in [0.5, 2.0] {
        let total: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi1, wt)| wt * q_prime_expansion(&fp(1, 2, *xi1, xi2), &cfg).unwrap().total)
            .sum();
        let want = gue_finite_cdf(2, 2.0, xi2).unwrap();
        assert!((total - want).abs() < 1e-8, "xi2 {xi2}: {total} vs {want}");
    }
}

/// Exact sample of `(H(μ1,1), H(μ2,2))`: endpoint Gaussians and the maximum of
/// the variance-2 bridge `B1 − B2` on `[0, μ1]` and `[μ1, μ2]`.
fn sample_pair(rng: &mut ChaCha8Rng, mu1: f64, mu2: f64) -> (f64, f64) {
    let n = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let b1a = mu1.sqrt() * n(rng);
    let b2a = mu1.sqrt() * n(rng);
    let b1b = b1a + (mu2 - mu1).sqrt() * n(rng);
    let b2b = b2a + (mu2 - mu1).sqrt() * n(rng);
    let bridge_max = |a: f64, b: f64, dt: f64, u: f64| 0.5 * (a + b + ((b - a).powi(2) - 4.0 * dt * u.ln()).sqrt());
    let xa = b1a - b2a;
    let xb = b1b - b2b;
    let m1 = bridge_max(0.0, xa, mu1, 1.0 - rng.gen::<f64>());
    let m2 = bridge_max(xa, xb, mu2 - mu1, 1.0 - rng.gen::<f64>());
    (b1a, m1.max(m2) + b2b)
}

#[test]
fn q_prime_matches_monte_carlo_joint_probability() {
    let cfg = FiniteKernelConfig::default();
    let (a, b, xi2) = (-0.5, 1.0, 1.5);
    let (x, w) = gauss_interval(a, b, 16).unwrap();
    let exact: f64 = x.iter().zip(&w).map(|(xi1, wt)| wt * q_prime_expansion(&fp(1, 2, *xi1, xi2), &cfg).unwrap().total).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 400_000;
    let hits = (0..n)
        .filter(|_| {
            let (h1, h2) = sample_pair(&mut rng, 1.0, 2.0);
            h1 > a && h1 <= b && h2 <= xi2
        })
        .count();
    let p = hits as f64 / n as f64;
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((p - exact).abs() < 3.0 * se, "{p} vs {exact} (se {se})");
}

fn zero_offsets(m: f64) -> ScalingEmbedding {
    ScalingEmbedding { m, t1: 1.0, t2: 2.0, nu1: 0.0, nu2: 0.0, eta1: 0.0, eta2: 0.0 }
}

#[test]
fn embedding_is_consistent() {
    let e = ScalingEmbedding { m: 137.0, t1: 1.0, t2: 2.5, nu1: 0.3, nu2: -0.2, eta1: 0.4, eta2: -0.1 };
    let fp = e.finite().unwrap();
    let p = e.effective_params().unwrap();
    let n1 = e.big_n1();
    let n2 = e.big_n2();
    assert!((fp.n1 as f64 - (n1 + p.nu1 * n1.powf(2.0 / 3.0))).abs() < 1e-9);
    assert!((fp.mu1 - (n1 - p.nu1 * n1.powf(2.0 / 3.0))).abs() < 1e-9);
    assert!((fp.dn() as f64 - (n2 + p.dnu * n2.powf(2.0 / 3.0))).abs() < 1e-8);
    assert!((fp.dmu() - (n2 - p.dnu * n2.powf(2.0 / 3.0))).abs() < 1e-8);
    assert!((fp.dxi() - (2.0 * n2 + p.dlambda * n2.cbrt())).abs() < 1e-8);
    let l = e.ell(0.7).unwrap();
    let x = e.x_of(l).unwrap();
    assert!((x - 0.7).abs() <= 0.5 / n1.cbrt() + 1e-12);
    assert!((l as f64 - (fp.n1 as f64 + 1.0 + x * n1.cbrt())).abs() < 1e-9);
    assert!(zero_offsets(0.5).finite().is_err());
}

#[test]
fn rescaled_kernels_converge() {
    let cfg = KernelEvalConfig::default();
    for kind in [FiniteKernelKind::A01, FiniteKernelKind::B1, FiniteKernelKind::C2, FiniteKernelKind::C3] {
        let errs: Vec<f64> =
            [50.0, 100.0, 200.0, 400.0].iter().map(|m| rescaled_kernel_error(kind, &zero_offsets(*m), 0.0, 0.0, &cfg).unwrap()).collect();
        assert!(errs.iter().all(|e| e.is_finite() && *e < 0.1));
        if kind != FiniteKernelKind::B1 {
            assert!(errs.windows(2).all(|w| w[1] < w[0]), "{kind:?}: {errs:?}");
        }
        if kind == FiniteKernelKind::C2 {
            assert!(errs[3] < 0.05, "{errs:?}");
        }
    }
    assert!(rescaled_kernel_error(FiniteKernelKind::C2, &zero_offsets(5.0), 0.0, 0.0, &cfg).is_err());
}

#[test]
fn rescaled_b1_converges_past_its_transient() {
    let cfg = KernelEvalConfig::default();
    let errs: Vec<f64> = [400.0, 1600.0, 6400.0, 25600.0]
        .iter()
        .map(|m| rescaled_kernel_error(FiniteKernelKind::B1, &zero_offsets(*m), 0.0, 0.0, &cfg).unwrap())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    let off: Vec<f64> = [50.0, 100.0, 200.0, 400.0]
        .iter()
        .map(|m| rescaled_kernel_error(FiniteKernelKind::B1, &zero_offsets(*m), 1.0, -1.0, &cfg).unwrap())
        .collect();
    assert!(off.windows(2).all(|w| w[1] < w[0]), "{off:?}");
}

#[test]
fn rescaled_a0_decays_to_the_right() {
    let e = zero_offsets(200.0);
    let base = KernelEvalConfig::default().contour;
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
    let vals: Vec<f64> =
        xs.iter().map(|x| rescaled_kernel(FiniteKernelKind::A01, &e, *x, 0.0, &base).unwrap().value.abs()).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    let slope = (vals[4].ln() - vals[2].ln()) / (4f64.powf(1.5) - 2f64.powf(1.5));
    assert!(slope < 0.0, "{slope}");
}

#[test]
fn library_enumerations_match_truncated_enumeration() {
    let p = small_geom();
    for (v1, v2) in [(0, 0), (2, 3), (4, 4), (3, 1)] {
        let a = joint_cdf_enumeration(&p, v1, v2).unwrap();
        assert!((a - joint_enumeration(&p, v1, v2)).abs() < 1e-14, "({v1},{v2})");
    }
    let mut table = vec![vec![0.0; 5]; 5];
    enumerate_lpp(2, 2, 0.3, 30, |g, pr| {
        let (a, b) = (g[1][0], g[1][1]);
        if b <= 4 {
            table[a as usize][b as usize] += pr;
        }
    });
    for x1 in 0..=4i64 {
        for x2 in x1..=4 {
            let v = vector_prob_enumeration(&[x1, x2], 2, 0.3).unwrap();
            assert!((v - table[x1 as usize][x2 as usize]).abs() < 1e-15);
        }
    }
    assert!(joint_cdf_enumeration(&GeomLppParams { q: 0.3, m1: 1, m2: 3, n1: 1, n2: 3 }, 5, 200).is_err());
}
