//! Single-time laws: the GUE Tracy–Widom distribution `F2` and the
//! distribution of the largest eigenvalue of an `n×n` GUE matrix.
//!
//! `F2(η) = det(I − K_Ai)` on `L²(η, ∞)` is computed by the Nyström method:
//! Gauss–Legendre nodes `x_i` with weights `w_i` on `[η, η + cutoff]` and the
//! symmetric matrix `δ_ij − √w_i K_Ai(x_i, x_j) √w_j`.
//!
//! The finite-`n` law `P[λ_max ≤ ξ]` for the density proportional to
//! `Δ(x)² ∏ e^{−x_j²/(2μ)}` reduces by Andréief's identity to a Gram
//! determinant of incomplete Gaussian moments. The moments are taken against
//! orthonormal Hermite polynomials, whose incomplete Gram matrix obeys an exact
//! error-function recurrence and tends to the identity as `ξ → ∞`, which fixes
//! the normalisation.

use rayon::prelude::*;

use crate::error::{check_finite, Error, Result};
use crate::linalg::det;
use crate::quad::gauss_interval;
use crate::specfun::{airy_kernel_from_values, airy_pair};

/// Discretisation of the Fredholm determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FredholmSpec {
    /// Number of Gauss–Legendre nodes.
    pub nystrom_nodes: usize,
    /// Length of the truncated interval `[η, η + domain_cutoff]`.
    pub domain_cutoff: f64,
}

impl Default for FredholmSpec {
    fn default() -> Self {
        Self { nystrom_nodes: 60, domain_cutoff: 16.0 }
    }
}

impl FredholmSpec {
    /// Checks `nystrom_nodes >= 4` and `domain_cutoff > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.nystrom_nodes < 4 {
            return Err(Error::Argument("nystrom_nodes must be at least 4".into()));
        }
        if !(self.domain_cutoff > 0.0) || !self.domain_cutoff.is_finite() {
            return Err(Error::Argument("domain_cutoff must be positive".into()));
        }
        Ok(())
    }
}

/// Nyström discretisation `(nodes, sqrt weights, symmetric kernel matrix)` of
/// the Airy kernel on `[eta, eta + cutoff]`.
pub fn airy_nystrom(eta: f64, spec: &FredholmSpec) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    check_finite("eta", eta)?;
    spec.validate()?;
    let n = spec.nystrom_nodes;
    let (x, w) = gauss_interval(eta, eta + spec.domain_cutoff, n)?;
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let ai: Vec<(f64, f64)> = x.iter().map(|v| airy_pair(*v)).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = sw[i] * airy_kernel_from_values(x[i], ai[i].0, ai[i].1, x[j], ai[j].0, ai[j].1) * sw[j];
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok((x, sw, k))
}

/// The Tracy–Widom GUE distribution function `F2(η)`.
pub fn f2_cdf(eta: f64, spec: &FredholmSpec) -> Result<f64> {
    let (_, _, k) = airy_nystrom(eta, spec)?;
    let n = spec.nystrom_nodes;
    let mut a: Vec<f64> = k.iter().map(|v| -v).collect();
    for i in 0..n {
        a[i * n + i] += 1.0;
    }
    let d = det(a, n);
    if !d.is_finite() {
        return Err(Error::Numeric(format!("F2 determinant not finite at eta = {eta}")));
    }
    Ok(d)
}

/// `F2` tabulated on a uniform grid and interpolated linearly, for
/// evaluating at many sample points; `0` below and `1` above the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct F2Table {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl F2Table {
    /// Tabulates `F2` on `lo, lo + step, …` up to at least `hi`.
    pub fn new(lo: f64, hi: f64, step: f64, spec: &FredholmSpec) -> Result<Self> {
        check_finite("lo", lo)?;
        check_finite("hi", hi)?;
        if !(step > 0.0 && hi > lo) || (hi - lo) / step > 1e6 {
            return Err(Error::Argument(format!("bad F2 grid [{lo}, {hi}] with step {step}")));
        }
        let n = ((hi - lo) / step).ceil() as usize + 1;
        let values = (0..n).into_par_iter().map(|k| f2_cdf(lo + k as f64 * step, spec)).collect::<Result<Vec<_>>>()?;
        Ok(Self { lo, step, values })
    }

    /// The grid `[-8, 6]` with step `0.01` at the default discretisation.
    pub fn standard() -> Result<Self> {
        Self::new(-8.0, 6.0, 0.01, &FredholmSpec::default())
    }

    /// Interpolated `F2(eta)`.
    pub fn eval(&self, eta: f64) -> f64 {
        let t = (eta - self.lo) / self.step;
        if !(t >= 0.0) {
            return 0.0;
        }
        let k = t.floor() as usize;
        if k + 1 >= self.values.len() {
            return 1.0;
        }
        let f = t - k as f64;
        (1.0 - f) * self.values[k] + f * self.values[k + 1]
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Largest matrix size accepted by [`gue_finite_cdf`].
pub const GUE_MAX_N: usize = 8;

/// Largest matrix size accepted by [`gue_cdf_any_n`].
pub const GUE_EXTENDED_MAX_N: usize = 64;

fn orthonormal_hermite(n: usize, s: f64) -> Vec<f64> {
    let mut h = vec![0.0; n + 1];
    h[0] = 1.0;
    if n >= 1 {
        h[1] = s;
    }
    for k in 1..n {
        h[k + 1] = (s * h[k] - (k as f64).sqrt() * h[k - 1]) / ((k + 1) as f64).sqrt();
    }
    h
}

/// Incomplete Gram matrix `J_ij = ∫_{−∞}^{s} h_i h_j φ`, `0 <= i, j < n`, of the
/// orthonormal Hermite polynomials `h_k = He_k / √(k!)`.
///
/// The matrix tends to the identity as `s → ∞`, so its determinant is already
/// normalised.
pub fn hermite_gram(n: usize, s: f64) -> Vec<f64> {
    let h = orthonormal_hermite(n, s);
    let phi = normal_pdf(s);
    let mut j = vec![0.0; n * n];
    for col in 0..n {
        j[col] = if col == 0 { normal_cdf(s) } else { -h[col - 1] * phi / (col as f64).sqrt() };
    }
    for i in 0..n.saturating_sub(1) {
        let scale = ((i + 1) as f64).sqrt();
        for col in 0..n {
            let prev = if col >= 1 { (col as f64).sqrt() * j[i * n + col - 1] } else { 0.0 };
            j[(i + 1) * n + col] = (prev - h[i] * h[col] * phi) / scale;
        }
    }
    j
}

fn check_gue_args(n: usize, max_n: usize, mu: f64, xi: f64) -> Result<()> {
    if n < 1 || n > max_n {
        return Err(Error::Argument(format!("n must be in 1..={max_n}, got {n}")));
    }
    check_finite("mu", mu)?;
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if xi.is_nan() {
        return Err(Error::Domain("xi must not be NaN".into()));
    }
    Ok(())
}

fn gue_cdf_unchecked(n: usize, mu: f64, xi: f64) -> f64 {
    if xi == f64::INFINITY {
        return 1.0;
    }
    if xi == f64::NEG_INFINITY {
        return 0.0;
    }
    det(hermite_gram(n, xi / mu.sqrt()), n)
}

fn gue_pdf_unchecked(n: usize, mu: f64, xi: f64) -> f64 {
    if xi.is_infinite() {
        return 0.0;
    }
    let s = xi / mu.sqrt();
    let j = hermite_gram(n, s);
    let h = orthonormal_hermite(n, s);
    let phi = normal_pdf(s);
    let mut total = 0.0;
    for row in 0..n {
        let mut m = j.clone();
        for col in 0..n {
            m[row * n + col] = h[row] * h[col] * phi;
        }
        total += det(m, n);
    }
    total / mu.sqrt()
}

/// `P[λ_max ≤ ξ]` for the `n×n` GUE with density `∝ exp(−tr H²/(2μ))`, `1 <= n <= 8`.
pub fn gue_finite_cdf(n: usize, mu: f64, xi: f64) -> Result<f64> {
    check_gue_args(n, GUE_MAX_N, mu, xi)?;
    Ok(gue_cdf_unchecked(n, mu, xi))
}

/// Density `d/dξ P[λ_max ≤ ξ]`, `1 <= n <= 8`, by differentiating the Gram
/// determinant one row at a time.
pub fn gue_finite_pdf(n: usize, mu: f64, xi: f64) -> Result<f64> {
    check_gue_args(n, GUE_MAX_N, mu, xi)?;
    Ok(gue_pdf_unchecked(n, mu, xi))
}

/// The same law as [`gue_finite_cdf`] for `1 <= n <= 64`, used to follow the
/// approach to `F2` under edge scaling.
pub fn gue_cdf_any_n(n: usize, mu: f64, xi: f64) -> Result<f64> {
    check_gue_args(n, GUE_EXTENDED_MAX_N, mu, xi)?;
    Ok(gue_cdf_unchecked(n, mu, xi))
}
