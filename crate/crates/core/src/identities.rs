//! Brute-force checks of the algebraic symmetrization identities, the residue
//! identity behind the double symmetrization, and the Airy–Gaussian line
//! integrals.
//!
//! Every check evaluates both sides independently (explicit permutation sums
//! against closed-form determinants, or quadrature against closed forms) and
//! reports the relative error `|L − R| / max(|L|, |R|, 1e-300)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{airy_gaussian_contour, AiryContourSide, KernelEvalConfig};
use crate::linalg::{det_complex, permutations};

/// Largest `n` for the single symmetrization identity.
pub const TW_SYM_MAX_N: usize = 6;

/// Largest `n` for the double symmetrization identity.
pub const DOUBLE_SYM_MAX_N: usize = 5;

/// Default pass threshold of the symmetrization identities.
pub const SYMMETRIZATION_THRESHOLD: f64 = 1e-10;

/// Default pass threshold of the residue identity and its contour form.
pub const RESIDUE_THRESHOLD: f64 = 1e-9;

/// Default pass threshold of the Airy–Gaussian line integrals.
pub const AIRY_CONTOUR_THRESHOLD: f64 = 1e-9;

/// Distance from a singular set below which a configuration is rejected.
pub const SINGULAR_TOL: f64 = 1e-6;

/// Outcome of one identity check, possibly aggregated over many points.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Identity name.
    pub name: String,
    /// Number of variables.
    pub n: usize,
    /// Number of configurations evaluated.
    pub points_tested: usize,
    /// Largest relative error seen.
    pub max_rel_err: f64,
    /// Pass threshold.
    pub threshold: f64,
    /// `max_rel_err < threshold`.
    pub pass: bool,
}

impl IdentityReport {
    /// A report for a single configuration.
    pub fn single(name: &str, n: usize, rel_err: f64, threshold: f64) -> Self {
        Self { name: name.to_string(), n, points_tested: 1, max_rel_err: rel_err, threshold, pass: rel_err < threshold }
    }

    /// Merges reports of the same identity into one.
    pub fn aggregate(name: &str, n: usize, threshold: f64, reports: &[IdentityReport]) -> Self {
        let max = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
        let points = reports.iter().map(|r| r.points_tested).sum();
        let ok = !reports.is_empty() && max < threshold && reports.iter().all(|r| r.max_rel_err.is_finite());
        Self { name: name.to_string(), n, points_tested: points, max_rel_err: max, threshold, pass: ok }
    }
}

/// `|a − b| / max(|a|, |b|, 1e-300)`.
pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn singular(name: &str) -> Error {
    Error::Argument(format!("singular configuration for {name}; resample"))
}

fn distinct(v: &[Complex64]) -> bool {
    v.iter().enumerate().all(|(i, a)| v[i + 1..].iter().all(|b| (a - b).norm() > SINGULAR_TOL))
}

/// Left side of the single symmetrization identity by the `n!` permutation sum.
pub fn tw_symmetrization_lhs(w: &[Complex64]) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    permutations(w.len())
        .iter()
        .map(|(p, sign)| {
            let mut term = Complex64::new(*sign, 0.0);
            let mut partial = one;
            for (j, &i) in p.iter().enumerate() {
                term *= ((one - w[i]) / w[i]).powi(j as i32 + 1);
                partial *= w[i];
                term /= one - partial;
            }
            term
        })
        .sum()
}

/// Right side of the single symmetrization identity,
/// `(−1)^{n(n−1)/2} Π w_j^{−n} det(w_j^{i−1})`.
pub fn tw_symmetrization_rhs(w: &[Complex64]) -> Complex64 {
    let n = w.len();
    let vand: Vec<Complex64> = (0..n).flat_map(|i| w.iter().map(move |wj| wj.powi(i as i32))).collect();
    let sign = if (n * (n.saturating_sub(1)) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let prod: Complex64 = w.iter().map(|wj| wj.powi(-(n as i32))).product();
    sign * prod * det_complex(vand, n)
}

/// Compares both sides of the single symmetrization identity at `w`.
pub fn check_tw_symmetrization(w: &[Complex64], threshold: f64) -> Result<IdentityReport> {
    let n = w.len();
    if n == 0 || n > TW_SYM_MAX_N {
        return Err(Error::Argument(format!("need 1 <= n <= {TW_SYM_MAX_N}, got {n}")));
    }
    if !w.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::Domain("points must be finite".into()));
    }
    if w.iter().any(|x| x.norm() < SINGULAR_TOL || (x - 1.0).norm() < SINGULAR_TOL) || !distinct(w) {
        return Err(singular("single symmetrization"));
    }
    for (p, _) in permutations(n) {
        let mut partial = Complex64::new(1.0, 0.0);
        for &i in &p {
            partial *= w[i];
            if (partial - 1.0).norm() < SINGULAR_TOL {
                return Err(singular("single symmetrization"));
            }
        }
    }
    let e = rel_err(tw_symmetrization_lhs(w), tw_symmetrization_rhs(w));
    Ok(IdentityReport::single("single symmetrization", n, e, threshold))
}

/// Left side of the double symmetrization identity by the `(n!)²` sum.
pub fn double_symmetrization_lhs(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let perms = permutations(z.len());
    perms
        .par_iter()
        .map(|(p1, s1)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (p2, s2) in &perms {
                let mut term = Complex64::new(s1 * s2, 0.0);
                let mut ratio = one;
                for j in 0..p1.len() {
                    let (zi, wi) = (z[p1[j]], w[p2[j]]);
                    term *= (wi * (one - zi) / (zi * (one - wi))).powi(j as i32 + 1);
                    ratio *= zi / wi;
                    term /= one - ratio;
                }
                acc += term;
            }
            acc
        })
        .sum()
}

/// Right side of the double symmetrization identity,
/// `Π w_j^{n+1}(1−z_j)^n / (z_j^n (1−w_j)^n) · det(1/(w_j − z_i))`.
pub fn double_symmetrization_rhs(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let n = z.len() as i32;
    let one = Complex64::new(1.0, 0.0);
    let cauchy: Vec<Complex64> = z.iter().flat_map(|zi| w.iter().map(move |wj| one / (wj - zi))).collect();
    let prod: Complex64 = z
        .iter()
        .zip(w)
        .map(|(zj, wj)| wj.powi(n + 1) * (one - zj).powi(n) / (zj.powi(n) * (one - wj).powi(n)))
        .product();
    prod * det_complex(cauchy, z.len())
}

/// Compares both sides of the double symmetrization identity at `(z, w)`.
pub fn check_double_symmetrization(z: &[Complex64], w: &[Complex64], threshold: f64) -> Result<IdentityReport> {
    let n = z.len();
    if n == 0 || n > DOUBLE_SYM_MAX_N || w.len() != n {
        return Err(Error::Argument(format!("need 1 <= n <= {DOUBLE_SYM_MAX_N} points of each kind, got {} and {}", n, w.len())));
    }
    if !z.iter().chain(w).all(|x| x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::Domain("points must be finite".into()));
    }
    let near = |x: &Complex64, c: f64| (x - c).norm() < SINGULAR_TOL;
    if z.iter().chain(w).any(|x| near(x, 0.0) || near(x, 1.0)) || !distinct(z) || !distinct(w) {
        return Err(singular("double symmetrization"));
    }
    if z.iter().any(|zi| w.iter().any(|wj| (zi - wj).norm() < SINGULAR_TOL)) {
        return Err(singular("double symmetrization"));
    }
    let perms = permutations(n);
    for (p1, _) in &perms {
        for (p2, _) in &perms {
            let mut ratio = Complex64::new(1.0, 0.0);
            for j in 0..n {
                ratio *= z[p1[j]] / w[p2[j]];
                if near(&ratio, 1.0) {
                    return Err(singular("double symmetrization"));
                }
            }
        }
    }
    let e = rel_err(double_symmetrization_lhs(z, w), double_symmetrization_rhs(z, w));
    Ok(IdentityReport::single("double symmetrization", n, e, threshold))
}

/// Left side of the residue identity: the signed double sum over `k, ℓ`.
pub fn residue_sum(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let n = z.len();
    let one = Complex64::new(1.0, 0.0);
    let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..n {
        for l in 0..n {
            let mut num = one;
            for j in 0..n {
                num *= (w[l] - z[j]) * (w[j] - z[k]);
            }
            let mut den = z[k] * (one - w[l]) * (w[l] - z[k]);
            for j in 0..n {
                if j != l {
                    den *= w[l] - w[j];
                }
                if j != k {
                    den *= z[k] - z[j];
                }
            }
            total += (one - z[k]) * num / den;
        }
    }
    sign * total
}

/// Right side of the residue identity,
/// `Π w_j(1−z_j)/(z_j(1−w_j)) − Π (1−z_j)/(1−w_j)`.
pub fn residue_product(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let a: Complex64 = z.iter().zip(w).map(|(zj, wj)| wj * (one - zj) / (zj * (one - wj))).product();
    a - contour_product(z, w)
}

fn contour_product(z: &[Complex64], w: &[Complex64]) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    z.iter().zip(w).map(|(zj, wj)| (one - zj) / (one - wj)).product()
}

/// Radii `r1 < r2` and trapezoid node counts used for the contour form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueContour {
    /// Radius of the `z`-circle.
    pub r1: f64,
    /// Radius of the `w`-circle.
    pub r2: f64,
    /// Nodes on the `z`-circle.
    pub z_nodes: usize,
    /// Nodes on the `w`-circle.
    pub w_nodes: usize,
}

/// Largest node count per circle for the contour form.
pub const RESIDUE_MAX_NODES: usize = 4096;

impl ResidueContour {
    /// Radii with `max|z_j| < r1 < r2 < 1`, `max|w_j| < r2`, and node counts
    /// making the geometric trapezoid error about `1e-15`.
    pub fn for_points(z: &[Complex64], w: &[Complex64]) -> Result<Self> {
        let zmax = z.iter().map(|x| x.norm()).fold(0.0, f64::max);
        let wmax = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if !(zmax < 1.0 && wmax < 1.0) {
            return Err(Error::Domain(format!("need all points inside the unit disk, got max |z| = {zmax}, max |w| = {wmax}")));
        }
        let r1 = zmax + (1.0 - zmax) / 3.0;
        let inner = r1.max(wmax);
        let r2 = inner + (1.0 - inner) / 2.0;
        let count = |rate: f64| ((1e-15f64).ln() / rate.ln()).ceil().max(16.0) as usize;
        let z_rate = (zmax / r1).max(r1 / r2);
        let w_rate = (wmax / r2).max(r1 / r2).max(r2);
        let (z_nodes, w_nodes) = (count(z_rate), count(w_rate));
        if z_nodes > RESIDUE_MAX_NODES || w_nodes > RESIDUE_MAX_NODES {
            return Err(Error::Argument(format!("points too close to the contours: {z_nodes} x {w_nodes} nodes needed; resample")));
        }
        Ok(Self { r1, r2, z_nodes, w_nodes })
    }
}

/// The contour form: `(2πi)^{−2}∮_{r1}dz∮_{r2}dw (1−z)/(z(1−w)(w−z)) Π (w−z_j)(z−w_j)/((w−w_j)(z−z_j))`
/// by the tensor trapezoid rule.
pub fn residue_contour_integral(z: &[Complex64], w: &[Complex64], c: &ResidueContour) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    let circle = |r: f64, n: usize| -> Vec<(Complex64, Complex64)> {
        (0..n)
            .map(|j| {
                let x = Complex64::from_polar(r, 2.0 * PI * j as f64 / n as f64);
                (x, x / n as f64)
            })
            .collect()
    };
    let zs = circle(c.r1, c.z_nodes);
    let ws = circle(c.r2, c.w_nodes);
    zs.par_iter()
        .map(|(u, du)| {
            let fz: Complex64 = (one - u) / u * z.iter().zip(w).map(|(zj, wj)| (u - wj) / (u - zj)).product::<Complex64>();
            let inner: Complex64 = ws
                .iter()
                .map(|(v, dv)| {
                    let g: Complex64 = z.iter().zip(w).map(|(zj, wj)| (v - zj) / (v - wj)).product();
                    dv * g / ((one - v) * (v - u))
                })
                .sum();
            du * fz * inner
        })
        .sum()
}

/// The residue identity and its contour form at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidueReports {
    /// Double sum against the product form.
    pub sum_form: IdentityReport,
    /// Two-circle contour integral against `Π (1−z_j)/(1−w_j)`.
    pub contour_form: IdentityReport,
}

/// Checks the residue identity and its contour form at `(z, w)`.
pub fn check_residue_identity(z: &[Complex64], w: &[Complex64], threshold: f64) -> Result<ResidueReports> {
    let n = z.len();
    if n == 0 || w.len() != n {
        return Err(Error::Argument(format!("need n >= 1 points of each kind, got {} and {}", n, w.len())));
    }
    let all: Vec<Complex64> = z.iter().chain(w).copied().collect();
    if !all.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        return Err(Error::Domain("points must be finite".into()));
    }
    if !distinct(&all) || all.iter().any(|x| x.norm() < SINGULAR_TOL) {
        return Err(singular("residue identity"));
    }
    let c = ResidueContour::for_points(z, w)?;
    let e1 = rel_err(residue_sum(z, w), residue_product(z, w));
    let e2 = rel_err(residue_contour_integral(z, w, &c), contour_product(z, w));
    Ok(ResidueReports {
        sum_form: IdentityReport::single("residue sum", n, e1, threshold),
        contour_form: IdentityReport::single("residue contour", n, e2, threshold),
    })
}

/// Compares the Airy–Gaussian line integral with its closed form.
pub fn check_airy_contour(a: f64, b: f64, side: AiryContourSide, d: f64, cfg: &KernelEvalConfig, threshold: f64) -> Result<IdentityReport> {
    let v = airy_gaussian_contour(a, b, side, d, cfg)?;
    let e = rel_err(Complex64::new(v.contour, 0.0), Complex64::new(v.closed_form, 0.0));
    Ok(IdentityReport::single("Airy contour", 1, e, threshold))
}

/// Random points with modulus uniform in `[rmin, rmax]` and uniform argument.
pub fn sample_annulus<R: Rng>(rng: &mut R, n: usize, rmin: f64, rmax: f64) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::from_polar(rng.gen_range(rmin..rmax), rng.gen_range(0.0..2.0 * PI))).collect()
}

/// The generator of draw `index` under `seed`.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const MAX_RESAMPLES: usize = 32;

fn run_draws<F>(name: &str, n: usize, draws: usize, seed: u64, threshold: f64, check: F) -> Result<IdentityReport>
where
    F: Fn(&mut ChaCha8Rng) -> Result<IdentityReport> + Sync,
{
    let reports: Vec<IdentityReport> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(seed, i as u64);
            for _ in 0..MAX_RESAMPLES {
                match check(&mut rng) {
                    Err(Error::Argument(m)) if m.contains("resample") => continue,
                    other => return other,
                }
            }
            Err(Error::Numeric(format!("{name}: no regular configuration after {MAX_RESAMPLES} resamples")))
        })
        .collect::<Result<_>>()?;
    Ok(IdentityReport::aggregate(name, n, threshold, &reports))
}

/// Single symmetrization at `draws` seeded points in `0.2 < |w| < 0.8`.
pub fn tw_symmetrization_suite(n: usize, draws: usize, seed: u64, threshold: f64) -> Result<IdentityReport> {
    run_draws("single symmetrization", n, draws, seed, threshold, |rng| {
        check_tw_symmetrization(&sample_annulus(rng, n, 0.2, 0.8), threshold)
    })
}

/// Double symmetrization at `draws` seeded points, `0.05 < |z| < 0.4 < |w| < 0.9`.
pub fn double_symmetrization_suite(n: usize, draws: usize, seed: u64, threshold: f64) -> Result<IdentityReport> {
    run_draws("double symmetrization", n, draws, seed, threshold, |rng| {
        let z = sample_annulus(rng, n, 0.05, 0.4);
        let w = sample_annulus(rng, n, 0.4, 0.9);
        check_double_symmetrization(&z, &w, threshold)
    })
}

/// Residue identity and contour form at `draws` seeded points,
/// `0.05 < |z| < 0.4`, `0.05 < |w| < 0.7`.
pub fn residue_suite(n: usize, draws: usize, seed: u64, threshold: f64) -> Result<(IdentityReport, IdentityReport)> {
    let sum = run_draws("residue sum", n, draws, seed, threshold, |rng| {
        let z = sample_annulus(rng, n, 0.05, 0.4);
        let w = sample_annulus(rng, n, 0.05, 0.7);
        check_residue_identity(&z, &w, threshold).map(|r| r.sum_form)
    })?;
    let contour = run_draws("residue contour", n, draws, seed, threshold, |rng| {
        let z = sample_annulus(rng, n, 0.05, 0.4);
        let w = sample_annulus(rng, n, 0.05, 0.7);
        check_residue_identity(&z, &w, threshold).map(|r| r.contour_form)
    })?;
    Ok((sum, contour))
}

/// Airy–Gaussian line integrals at `draws` seeded `(A, B) ∈ [−1.5, 1.5]²`,
/// both orientations, `D ∈ {0.5, 1, 2}`, against the closed form; the second
/// report is the spread between the three `D` values.
pub fn airy_contour_suite(draws: usize, seed: u64, cfg: &KernelEvalConfig) -> Result<(IdentityReport, IdentityReport)> {
    let ds = [0.5, 1.0, 2.0];
    let results: Vec<(IdentityReport, IdentityReport)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = draw_rng(seed, i as u64);
            let (a, b) = (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let mut closed = Vec::new();
            let mut spread = Vec::new();
            for side in [AiryContourSide::Raising, AiryContourSide::Lowering] {
                let vals: Vec<f64> = ds.iter().map(|d| airy_gaussian_contour(a, b, side, *d, cfg).map(|v| v.contour)).collect::<Result<_>>()?;
                for d in ds {
                    closed.push(check_airy_contour(a, b, side, d, cfg, AIRY_CONTOUR_THRESHOLD)?);
                }
                let e = vals
                    .iter()
                    .flat_map(|x| vals.iter().map(move |y| rel_err(Complex64::new(*x, 0.0), Complex64::new(*y, 0.0))))
                    .fold(0.0, f64::max);
                spread.push(IdentityReport::single("Airy contour D-invariance", 1, e, AIRY_CONTOUR_THRESHOLD / 10.0));
            }
            Ok((
                IdentityReport::aggregate("Airy contour", 1, AIRY_CONTOUR_THRESHOLD, &closed),
                IdentityReport::aggregate("Airy contour D-invariance", 1, AIRY_CONTOUR_THRESHOLD / 10.0, &spread),
            ))
        })
        .collect::<Result<_>>()?;
    let (closed, spread): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((
        IdentityReport::aggregate("Airy contour", 1, AIRY_CONTOUR_THRESHOLD, &closed),
        IdentityReport::aggregate("Airy contour D-invariance", 1, AIRY_CONTOUR_THRESHOLD / 10.0, &spread),
    ))
}

/// The full identity suite: single symmetrization `n ≤ 4` and double
/// symmetrization `n ≤ 3` at `draws` points each, double symmetrization
/// `n = 4, 5` at `spot_draws` points, the residue identity `n ≤ 2`, and the
/// Airy–Gaussian line integrals at 20 points.
pub fn identity_suite(draws: usize, spot_draws: usize, seed: u64, cfg: &KernelEvalConfig) -> Result<Vec<IdentityReport>> {
    let mut out = Vec::new();
    for n in 1..=4 {
        out.push(tw_symmetrization_suite(n, draws, seed ^ (0x100 + n as u64), SYMMETRIZATION_THRESHOLD)?);
    }
    for n in 1..=5 {
        let count = if n <= 3 { draws } else { spot_draws };
        out.push(double_symmetrization_suite(n, count, seed ^ (0x200 + n as u64), SYMMETRIZATION_THRESHOLD)?);
    }
    for n in 1..=2 {
        let (a, b) = residue_suite(n, draws, seed ^ (0x300 + n as u64), RESIDUE_THRESHOLD)?;
        out.push(a);
        out.push(b);
    }
    let (a, b) = airy_contour_suite(20, seed ^ 0x400, cfg)?;
    out.push(a);
    out.push(b);
    Ok(out)
}
