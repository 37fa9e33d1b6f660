//! Finite-size formulas behind the two-time limit.
//!
//! Geometric last-passage percolation `G(m, n)` with weights of parameter `q`:
//!
//! * the one-point masses `w_m(x) = (1−q)^m C(x+m−1, x) q^x`;
//! * `Δ^k w_m`, forward differences for `k ≥ 0` and partial sums for `k < 0`,
//!   as coefficient integrals over a circle;
//! * the determinantal laws `ℙ[G(m) = x] = det(Δ^{j−i} w_m(x_j))` and
//!   `ℙ[G(m) = y | G(ℓ) = x] = det(Δ^{j−i} w_{m−ℓ}(y_j − x_i))`;
//! * the joint distribution `ℙ[G(m1,n1) ≤ v1, G(m2,n2) ≤ v2]` as a `2 n2`-fold
//!   circle integral. Expanding `1/(1 − Π z_j/w_j) = Σ_u (Π z_j/w_j)^u` and the
//!   two Vandermonde determinants turns every term into a product of
//!   two-dimensional `(z_j, w_j)` integrals, which are tabulated once per `u`.
//!
//! Brownian directed percolation `H(μ, n)`:
//!
//! * the finite kernels `a01, b1` (two lines and two circles) and `c2, c3`
//!   (one line and one circle) built from `G_{n,μ,ξ}(z) = zⁿ e^{μz²/2 − ξz}`;
//! * the composite kernels `a0, b, ã0, a2*, a3*`;
//! * `∂_h Q(0) = Σ_{k=1}^{6} Q'_k(0)`, the density in `ξ1` of the joint law of
//!   `(H(μ1,n1), H(μ2,n2))`, assembled from determinants of kernel matrices;
//! * the scaling embedding `M → (n_i, μ_i, ξ_i, ℓ, k)` and the convergence of
//!   `N1^{1/3}` times each finite kernel to `φ1, ψ1, φ2, φ3`.
//!
//! Four-fold kernels use the same factorisation as the limiting kernels: the
//! circle integrals are tabulated as Cauchy transforms at the line nodes, so
//! the cost is quadratic in the node counts.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{check_finite, Error, Result};
use crate::kernels::{admissible_contour, derive_params, phi1, phi2, phi3, psi1, FourFoldKernel, KernelEvalConfig, TwoTimeParams};
use crate::linalg::{det, det_in_place, factorial, increasing_tuples, permutations};
use crate::quad::{circle_nodes, line_nodes, ContourSpec};

/// Parameters of the two-point geometric last-passage problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomLppParams {
    /// Geometric parameter, `ℙ[w = j] = (1 − q) q^j`.
    pub q: f64,
    /// First column index.
    pub m1: usize,
    /// Second column index, `m2 > m1`.
    pub m2: usize,
    /// First row index.
    pub n1: usize,
    /// Second row index, `n2 > n1`.
    pub n2: usize,
}

impl GeomLppParams {
    /// Checks `0 < q < 1`, `1 ≤ m1 < m2` and `1 ≤ n1 < n2`.
    pub fn validate(&self) -> Result<()> {
        check_q(self.q)?;
        if self.m1 < 1 || self.n1 < 1 || self.m2 <= self.m1 || self.n2 <= self.n1 {
            return Err(Error::Argument(format!("need 1 <= m1 < m2 and 1 <= n1 < n2, got {self:?}")));
        }
        Ok(())
    }
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("geometric parameter must lie in (0, 1), got {q}")));
    }
    Ok(())
}

fn check_m(m: i64) -> Result<()> {
    if m < 1 {
        return Err(Error::Argument(format!("need m >= 1, got {m}")));
    }
    Ok(())
}

/// `w_m(x) = (1−q)^m C(x+m−1, x) q^x` for `x ≥ 0`, zero for `x < 0`.
pub fn w_m(m: i64, x: i64, q: f64) -> Result<f64> {
    check_q(q)?;
    check_m(m)?;
    if x < 0 {
        return Ok(0.0);
    }
    let mut v = (1.0 - q).powf(m as f64);
    for i in 1..=x {
        v *= q * (m - 1 + i) as f64 / i as f64;
    }
    Ok(v)
}

/// Default number of trapezoid nodes for the `Δ^k w_m` circle integral.
pub const DELTA_CIRCLE_NODES: usize = 1024;

/// Radius minimising the round-off bound `max_{|z|=r} |(1−z)^k (1−qz)^{−m}| r^{−n}`
/// over `r ∈ [0.05, 0.9]`.
pub fn delta_circle_radius(k: i64, m: i64, n: i64, q: f64) -> f64 {
    let mut best = (f64::INFINITY, 0.5);
    for i in 0..=85 {
        let r = 0.05 + 0.01 * i as f64;
        let kf = k as f64;
        let top = if k >= 0 { kf * (1.0 + r).ln() } else { kf * (1.0 - r).ln() };
        let b = top - m as f64 * (1.0 - q * r).ln() - n as f64 * r.ln();
        if b < best.0 {
            best = (b, r);
        }
    }
    best.1
}

/// `Δ^k w_m(x)` as `(1−q)^m/(2πi) ∮ (1−z)^k dz / ((1−qz)^m z^{x+k+1})` over the
/// circle of radius [`delta_circle_radius`].
pub fn delta_k_w_m(k: i64, m: i64, x: i64, q: f64) -> Result<f64> {
    let n = x + k;
    let r = if n < 0 { 0.5 } else { delta_circle_radius(k, m, n, q) };
    delta_k_w_m_on_circle(k, m, x, q, r, DELTA_CIRCLE_NODES)
}

/// `Δ^k w_m(x)` by the `nodes`-point trapezoid rule on the circle of the given radius.
pub fn delta_k_w_m_on_circle(k: i64, m: i64, x: i64, q: f64, radius: f64, nodes: usize) -> Result<f64> {
    check_q(q)?;
    check_m(m)?;
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::Argument(format!("circle radius must lie in (0, 1), got {radius}")));
    }
    if nodes < 8 {
        return Err(Error::Argument("circle needs at least 8 nodes".into()));
    }
    let n = x + k;
    if n < 0 {
        return Ok(0.0);
    }
    let (Ok(ki), Ok(mi)) = (i32::try_from(k), i32::try_from(m)) else {
        return Err(Error::Argument("difference order or m out of range".into()));
    };
    let nn = nodes as i64;
    let scale = radius.powf(-(n as f64));
    let one = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..nn {
        let z = Complex64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64);
        let idx = ((n % nn) * j) % nn;
        let zn = Complex64::from_polar(scale, -2.0 * PI * idx as f64 / nodes as f64);
        sum += (one - z).powi(ki) * (one - q * z).powi(-mi) * zn;
    }
    let v = sum * (1.0 - q).powf(m as f64) / nodes as f64;
    if !v.re.is_finite() {
        return Err(Error::Numeric(format!("delta_k_w_m not finite for k={k}, m={m}, x={x}")));
    }
    Ok(v.re)
}

fn check_ordered(name: &str, x: &[i64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Argument(format!("{name} must be non-empty")));
    }
    if x.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Argument(format!("{name} must be weakly increasing, got {x:?}")));
    }
    Ok(())
}

/// `ℙ[G(m) = x] = det(Δ^{j−i} w_m(x_j))` for `x` weakly increasing, `n = x.len()`.
pub fn vector_prob(x: &[i64], m: i64, q: f64) -> Result<f64> {
    check_ordered("x", x)?;
    let n = x.len();
    let mut a = Vec::with_capacity(n * n);
    for i in 0..n {
        for (j, xj) in x.iter().enumerate() {
            a.push(delta_k_w_m(j as i64 - i as i64, m, *xj, q)?);
        }
    }
    Ok(det(a, n))
}

/// `ℙ[G(m) = y | G(ℓ) = x] = det(Δ^{j−i} w_{m−ℓ}(y_j − x_i))` for `m > ℓ ≥ 0`.
pub fn transition_prob(x: &[i64], y: &[i64], ell: i64, m: i64, q: f64) -> Result<f64> {
    check_ordered("x", x)?;
    check_ordered("y", y)?;
    if x.len() != y.len() {
        return Err(Error::Argument(format!("x and y lengths differ: {} vs {}", x.len(), y.len())));
    }
    if !(ell >= 0 && m > ell) {
        return Err(Error::Argument(format!("need m > ell >= 0, got m = {m}, ell = {ell}")));
    }
    let n = x.len();
    let mut a = Vec::with_capacity(n * n);
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            a.push(delta_k_w_m(j as i64 - i as i64, m - ell, yj - xi, q)?);
        }
    }
    Ok(det(a, n))
}

/// Largest number of weight configurations an enumeration may visit.
pub const ENUMERATION_MAX_CONFIGS: f64 = 5e7;

/// Visits every weight configuration on an `rows × cols` grid with entries in
/// `0..=cut`, passing the last-passage table and the configuration's probability.
fn enumerate_weights(rows: usize, cols: usize, q: f64, cut: i64, mut visit: impl FnMut(&[i64], f64)) -> Result<()> {
    check_q(q)?;
    let cells = rows * cols;
    if cut < 0 || (cut as f64 + 1.0).powi(cells as i32) > ENUMERATION_MAX_CONFIGS {
        return Err(Error::Argument(format!("enumeration of {cells} cells up to {cut} is too large")));
    }
    let mass: Vec<f64> = (0..=cut).map(|k| (1.0 - q) * q.powi(k as i32)).collect();
    let mut w = vec![0i64; cells];
    let mut g = vec![0i64; cells];
    loop {
        let mut prob = 1.0;
        for i in 0..rows {
            for j in 0..cols {
                let c = i * cols + j;
                prob *= mass[w[c] as usize];
                let prev = match (i, j) {
                    (0, 0) => 0,
                    (0, _) => g[c - 1],
                    (_, 0) => g[c - cols],
                    _ => g[c - cols].max(g[c - 1]),
                };
                g[c] = prev + w[c];
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
            return Ok(());
        }
    }
}

/// Exact `ℙ[G(m1,n1) ≤ v1, G(m2,n2) ≤ v2]` by enumerating all weights in
/// `0..=v2` on the `m2 × n2` grid; any larger weight violates the event.
pub fn joint_cdf_enumeration(p: &GeomLppParams, v1: i64, v2: i64) -> Result<f64> {
    p.validate()?;
    if v2 < 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let (a, b) = ((p.m1 - 1) * p.n2 + p.n1 - 1, p.m2 * p.n2 - 1);
    enumerate_weights(p.m2, p.n2, p.q, v2, |g, pr| {
        if g[a] <= v1 && g[b] <= v2 {
            total += pr;
        }
    })?;
    Ok(total)
}

/// Exact `ℙ[G(m) = x]` by enumerating all weights in `0..=x_n` on the
/// `m × n` grid.
pub fn vector_prob_enumeration(x: &[i64], m: usize, q: f64) -> Result<f64> {
    check_ordered("x", x)?;
    check_m(m as i64)?;
    let n = x.len();
    if x[0] < 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let row = (m - 1) * n;
    enumerate_weights(m, n, q, x[n - 1], |g, pr| {
        if g[row..row + n] == *x {
            total += pr;
        }
    })?;
    Ok(total)
}

/// Circles of the joint contour formula: `z` on `γ_{s1}` (first `n1` variables)
/// and `γ_{s2}`, `w` on `γ_{r1}` and `γ_{r2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointContourSpec {
    /// Radius of the first `n1` `z`-circles.
    pub s1: f64,
    /// Radius of the first `n1` `w`-circles.
    pub r1: f64,
    /// Radius of the last `Δn` `w`-circles.
    pub r2: f64,
    /// Radius of the last `Δn` `z`-circles.
    pub s2: f64,
    /// Trapezoid nodes per circle.
    pub circle_nodes: usize,
    /// The `u`-series is summed until `ratio^u` falls below this value or the
    /// first-block residue at the origin vanishes, whichever comes first.
    pub series_tol: f64,
}

impl Default for JointContourSpec {
    fn default() -> Self {
        Self { s1: 0.4, r1: 0.6, r2: 0.55, s2: 0.8, circle_nodes: 128, series_tol: 1e-18 }
    }
}

impl JointContourSpec {
    /// `(s1/r1)^{n1} (s2/r2)^{Δn}`, the geometric rate of the `u`-series.
    pub fn series_ratio(&self, n1: usize, dn: usize) -> f64 {
        (self.s1 / self.r1).powi(n1 as i32) * (self.s2 / self.r2).powi(dn as i32)
    }

    /// Checks `0 < s1 < r1 < 1`, `0 < r2 < s2 < 1` and `(r1/s1)^{n1} > (s2/r2)^{Δn}`.
    pub fn validate(&self, n1: usize, dn: usize) -> Result<()> {
        let ok = self.s1 > 0.0 && self.s1 < self.r1 && self.r1 < 1.0 && self.r2 > 0.0 && self.r2 < self.s2 && self.s2 < 1.0;
        if !ok {
            return Err(Error::Argument(format!("need 0 < s1 < r1 < 1 and 0 < r2 < s2 < 1, got {self:?}")));
        }
        if !(self.series_ratio(n1, dn) < 1.0) {
            return Err(Error::Argument(format!(
                "radii violate (r1/s1)^n1 > (s2/r2)^dn for n1 = {n1}, dn = {dn}: {self:?}"
            )));
        }
        if self.circle_nodes < 8 || !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return Err(Error::Argument("need at least 8 circle nodes and series_tol in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Largest `n2` accepted by [`joint_cdf_contour`].
pub const JOINT_MAX_N2: usize = 3;

/// Largest tolerated imaginary part of the joint contour integral.
pub const JOINT_IMAG_TOL: f64 = 1e-9;

/// `ℙ[G(m1,n1) ≤ v1, G(m2,n2) ≤ v2]` from the `2 n2`-fold circle integral.
pub fn joint_cdf_contour(p: &GeomLppParams, v1: i64, v2: i64, cfg: &JointContourSpec) -> Result<f64> {
    p.validate()?;
    if p.n2 > JOINT_MAX_N2 {
        return Err(Error::Unsupported(format!("joint contour formula supports n2 <= {JOINT_MAX_N2}, got {}", p.n2)));
    }
    let (n1, n2, m1) = (p.n1, p.n2, p.m1);
    let dn = n2 - n1;
    let dm = p.m2 - p.m1;
    cfg.validate(n1, dn)?;
    let q = p.q;
    let ratio = cfg.series_ratio(n1, dn);
    let u_max = ((cfg.series_tol.ln() / ratio.ln()).ceil() as usize + 1).min((v1 + n1 as i64).max(0) as usize);
    let nodes = cfg.circle_nodes;
    let one = Complex64::new(1.0, 0.0);
    let zpow = -(v1 + n1 as i64);
    let wpow = -(v2 - v1 + dn as i64);
    let f = |z: Complex64| z.powi(zpow as i32) * (one - z).powi(-(dn as i32)) * (one - q * z).powi(-(m1 as i32));
    let h = |w: Complex64| w.powi(wpow as i32) * (one - w).powi(-(n1 as i32)) * (one - q * w).powi(-(dm as i32));
    let mut tables = Vec::with_capacity(2);
    for first in [true, false] {
        let (zr, wr) = if first { (cfg.s1, cfg.r1) } else { (cfg.s2, cfg.r2) };
        let zs = circle_nodes(zr, nodes);
        let ws = circle_nodes(wr, nodes);
        let fz: Vec<Complex64> = zs.iter().map(|n| n.w * f(n.z)).collect();
        let hw: Vec<Complex64> = ws.iter().map(|n| n.w * h(n.z)).collect();
        let coupling: Vec<Complex64> = zs
            .iter()
            .flat_map(|zn| {
                ws.iter().map(move |wn| {
                    let (z, w) = (zn.z, wn.z);
                    if first {
                        one / (w - z)
                    } else {
                        (one - z) / ((one - w) * (z - w))
                    }
                })
            })
            .collect();
        let zpow_a: Vec<Vec<Complex64>> = (0..n2).map(|a| zs.iter().map(|n| (n.z - one).powi(a as i32)).collect()).collect();
        let wpow_b: Vec<Vec<Complex64>> = (0..n2).map(|b| ws.iter().map(|n| (n.z - one).powi(b as i32)).collect()).collect();
        let table: Vec<Vec<Complex64>> = (0..=u_max + 1)
            .into_par_iter()
            .map(|u| {
                let phase = |j: usize, sign: f64| {
                    let idx = (u % nodes) * j % nodes;
                    Complex64::from_polar(1.0, sign * 2.0 * PI * idx as f64 / nodes as f64)
                };
                let zu: Vec<Complex64> = (0..nodes).map(|j| fz[j] * phase(j, 1.0)).collect();
                let wu: Vec<Complex64> = (0..nodes).map(|j| hw[j] * phase(j, -1.0)).collect();
                let mut out = vec![Complex64::new(0.0, 0.0); n2 * n2];
                for b in 0..n2 {
                    let wb: Vec<Complex64> = (0..nodes).map(|l| wu[l] * wpow_b[b][l]).collect();
                    let kb: Vec<Complex64> = (0..nodes)
                        .map(|k| coupling[k * nodes..(k + 1) * nodes].iter().zip(&wb).map(|(c, v)| c * v).sum())
                        .collect();
                    for a in 0..n2 {
                        out[a * n2 + b] = (0..nodes).map(|k| zu[k] * zpow_a[a][k] * kb[k]).sum();
                    }
                }
                out
            })
            .collect();
        tables.push(table);
    }
    let perms = permutations(n2);
    let rho0n1 = (cfg.s1 / cfg.r1).powi(n1 as i32);
    let mut total = Complex64::new(0.0, 0.0);
    for u in 0..=u_max {
        let mut term = Complex64::new(0.0, 0.0);
        for (sigma, ss) in &perms {
            for (tau, st) in &perms {
                let mut plain = one;
                let mut shifted = one;
                for j in 0..n2 {
                    let idx = sigma[j] * n2 + tau[j];
                    if j < n1 {
                        plain *= tables[0][u][idx];
                        shifted *= tables[0][u + 1][idx];
                    } else {
                        plain *= tables[1][u][idx];
                        shifted *= tables[1][u][idx];
                    }
                }
                term += ss * st * (plain - rho0n1 * shifted);
            }
        }
        total += ratio.powi(u as i32) * term;
    }
    let sign = if (n2 * (n2 - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let c = sign * (1.0 - q).powf((p.m2 * n2) as f64) / (factorial(n1) * factorial(dn));
    let v = c * total;
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Numeric("joint contour integral not finite".into()));
    }
    if v.im.abs() > JOINT_IMAG_TOL {
        return Err(Error::Consistency(format!("joint contour integral has imaginary part {}", v.im)));
    }
    Ok(v.re)
}

/// Raw parameters of the Brownian two-point problem `(H(μ1,n1), H(μ2,n2))`
/// at the levels `ξ1, ξ2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteParams {
    /// First number of Brownian motions.
    pub n1: usize,
    /// Second number of Brownian motions, `n2 > n1`.
    pub n2: usize,
    /// First time.
    pub mu1: f64,
    /// Second time, `μ2 > μ1`.
    pub mu2: f64,
    /// First level.
    pub xi1: f64,
    /// Second level.
    pub xi2: f64,
}

impl FiniteParams {
    /// Checks `1 ≤ n1 < n2`, `0 < μ1 < μ2` and finite levels.
    pub fn validate(&self) -> Result<()> {
        if self.n1 < 1 || self.n2 <= self.n1 {
            return Err(Error::Argument(format!("need 1 <= n1 < n2, got n1 = {}, n2 = {}", self.n1, self.n2)));
        }
        check_finite("xi1", self.xi1)?;
        check_finite("xi2", self.xi2)?;
        if !(self.mu1 > 0.0 && self.mu2 > self.mu1 && self.mu2.is_finite()) {
            return Err(Error::Domain(format!("need 0 < mu1 < mu2, got mu1 = {}, mu2 = {}", self.mu1, self.mu2)));
        }
        Ok(())
    }

    /// `Δn = n2 − n1`.
    pub fn dn(&self) -> usize {
        self.n2 - self.n1
    }

    /// `Δμ = μ2 − μ1`.
    pub fn dmu(&self) -> f64 {
        self.mu2 - self.mu1
    }

    /// `Δξ = ξ2 − ξ1`.
    pub fn dxi(&self) -> f64 {
        self.xi2 - self.xi1
    }
}

/// The scaling `N1 = t1 M`, `N2 = Δt M` that embeds the limiting coordinates
/// `(t_i, ν_i, η_i; x, y)` into the finite problem.
///
/// `n1`, `n2` are rounded to the nearest integers and the offsets `ν_i` are
/// then recomputed from the rounded values, with `λ_i = η_i − ν_i²` held
/// fixed; the same is done for `ℓ ↔ x` and `k ↔ y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingEmbedding {
    /// Scale parameter.
    pub m: f64,
    /// First macroscopic time.
    pub t1: f64,
    /// Second macroscopic time.
    pub t2: f64,
    /// Spatial offset at the first time.
    pub nu1: f64,
    /// Spatial offset at the second time.
    pub nu2: f64,
    /// Fluctuation coordinate at the first time.
    pub eta1: f64,
    /// Fluctuation coordinate at the second time.
    pub eta2: f64,
}

impl ScalingEmbedding {
    /// `N1 = t1 M`.
    pub fn big_n1(&self) -> f64 {
        self.t1 * self.m
    }

    /// `N2 = (t2 − t1) M`.
    pub fn big_n2(&self) -> f64 {
        (self.t2 - self.t1) * self.m
    }

    fn rounded(&self) -> Result<(usize, usize)> {
        derive_params(self.t1, self.t2, self.nu1, self.nu2, self.eta1, self.eta2)?;
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::Domain(format!("scale M must be positive, got {}", self.m)));
        }
        let a = self.big_n1();
        let b = self.t2 * self.m;
        let n1 = (a + self.nu1 * a.powf(2.0 / 3.0)).round();
        let n2 = (b + self.nu2 * b.powf(2.0 / 3.0)).round();
        if !(n1 >= 1.0 && n2 > n1) {
            return Err(Error::Domain(format!("M = {} is too small: n1 = {n1}, n2 = {n2}", self.m)));
        }
        Ok((n1 as usize, n2 as usize))
    }

    /// Offsets `(ν1, ν2)` reproduced exactly by the rounded `n1, n2`.
    pub fn effective_offsets(&self) -> Result<(f64, f64)> {
        let (n1, n2) = self.rounded()?;
        let a = self.big_n1();
        let b = self.t2 * self.m;
        Ok(((n1 as f64 - a) / a.powf(2.0 / 3.0), (n2 as f64 - b) / b.powf(2.0 / 3.0)))
    }

    /// Limiting parameters matching the rounded embedding.
    pub fn effective_params(&self) -> Result<TwoTimeParams> {
        let (v1, v2) = self.effective_offsets()?;
        let l1 = self.eta1 - self.nu1 * self.nu1;
        let l2 = self.eta2 - self.nu2 * self.nu2;
        derive_params(self.t1, self.t2, v1, v2, l1 + v1 * v1, l2 + v2 * v2)
    }

    /// `(n_i, μ_i, ξ_i)` of the finite problem.
    pub fn finite(&self) -> Result<FiniteParams> {
        let (n1, n2) = self.rounded()?;
        let (v1, v2) = self.effective_offsets()?;
        let a = self.big_n1();
        let b = self.t2 * self.m;
        let l1 = self.eta1 - self.nu1 * self.nu1;
        let l2 = self.eta2 - self.nu2 * self.nu2;
        let fp = FiniteParams {
            n1,
            n2,
            mu1: a - v1 * a.powf(2.0 / 3.0),
            mu2: b - v2 * b.powf(2.0 / 3.0),
            xi1: 2.0 * a + l1 * a.cbrt(),
            xi2: 2.0 * b + l2 * b.cbrt(),
        };
        fp.validate()?;
        Ok(fp)
    }

    /// `ℓ = n1 + 1 + x N1^{1/3}`, rounded.
    pub fn ell(&self, x: f64) -> Result<usize> {
        check_finite("x", x)?;
        let fp = self.finite()?;
        self.index(fp.n1 as f64 + 1.0 + x * self.big_n1().cbrt(), fp.n2)
    }

    /// `k = n1 + y N1^{1/3}`, rounded.
    pub fn k(&self, y: f64) -> Result<usize> {
        check_finite("y", y)?;
        let fp = self.finite()?;
        self.index(fp.n1 as f64 + y * self.big_n1().cbrt(), fp.n2)
    }

    fn index(&self, v: f64, n2: usize) -> Result<usize> {
        let r = v.round();
        if !(r >= 1.0 && r <= n2 as f64) {
            return Err(Error::Argument(format!("embedded index {r} outside [1, {n2}]")));
        }
        Ok(r as usize)
    }

    /// The `x` reproduced exactly by `ℓ`.
    pub fn x_of(&self, ell: usize) -> Result<f64> {
        let fp = self.finite()?;
        Ok((ell as f64 - fp.n1 as f64 - 1.0) / self.big_n1().cbrt())
    }

    /// The `y` reproduced exactly by `k`.
    pub fn y_of(&self, k: usize) -> Result<f64> {
        let fp = self.finite()?;
        Ok((k as f64 - fp.n1 as f64) / self.big_n1().cbrt())
    }
}

/// The four finite kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiniteKernelKind {
    /// `a01`: `z` on `Γ_{D1}`, `w` on `Γ_{D2}`, both circles.
    A01,
    /// `b1`: `z` on `Γ_{D2}`, `w` on `Γ_{D1}`, both circles.
    B1,
    /// `c2`: `w` on `Γ_D`, `ω` on `γ_τ`.
    C2,
    /// `c3`: `z` on `Γ_D`, `ζ` on `γ_τ`.
    C3,
}

/// Contours of the finite kernels.
///
/// `contour.d1 = D1` and `contour.d3 = D2` are the abscissas of the two lines,
/// `contour.tau1` (for `ζ`) and `contour.tau2` (for `ω`) the circle radii;
/// `contour.d2`, `contour.d4` are not used. `d` and `tau` are the line and
/// circle of `c2`, `c3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteKernelConfig {
    /// Lines, radii, node counts and the endpoint tolerance.
    pub contour: ContourSpec,
    /// Line abscissa for `c2`, `c3`.
    pub d: f64,
    /// Circle radius for `c2`, `c3`.
    pub tau: f64,
}

impl Default for FiniteKernelConfig {
    fn default() -> Self {
        Self {
            contour: ContourSpec {
                d1: 1.0,
                d2: 1.0,
                d3: 1.5,
                d4: 1.0,
                tau1: 0.5,
                tau2: 0.4,
                line_halflength: 12.0,
                line_nodes: 481,
                circle_nodes: 128,
                endpoint_tol: 1e-13,
            },
            d: 1.0,
            tau: 0.5,
        }
    }
}

impl FiniteKernelConfig {
    /// Checks `0 < τ2 < τ1 < D1 < D2` and `0 < τ < D`.
    pub fn validate(&self) -> Result<()> {
        let c = &self.contour;
        c.validate()?;
        if !(c.tau2 < c.tau1 && c.tau1 < c.d1 && c.d1 < c.d3) {
            return Err(Error::Argument(format!(
                "need 0 < tau2 < tau1 < D1 < D2, got tau2 = {}, tau1 = {}, D1 = {}, D2 = {}",
                c.tau2, c.tau1, c.d1, c.d3
            )));
        }
        if !(self.tau > 0.0 && self.tau < self.d) {
            return Err(Error::Argument(format!("need 0 < tau < D, got tau = {}, D = {}", self.tau, self.d)));
        }
        Ok(())
    }
}

/// A vertical line `re + it`, `|t| ≤ half`.
#[derive(Debug, Clone, Copy)]
struct Line {
    re: f64,
    half: f64,
    nodes: usize,
}

/// A circle of the given radius around the origin.
#[derive(Debug, Clone, Copy)]
struct Circle {
    radius: f64,
    nodes: usize,
}

/// Contours for one kernel evaluation.
#[derive(Debug, Clone, Copy)]
struct Geometry {
    z_line: Line,
    w_line: Line,
    zeta: Circle,
    omega: Circle,
    tol: f64,
}

/// `(μ, ξ)` of one family of variables.
#[derive(Debug, Clone, Copy)]
struct Family {
    mu: f64,
    xi: f64,
}

/// `log G_{n,μ,ξ}(z) − log G_{n,μ,ξ}(1)`.
fn log_g(n: i64, f: Family, z: Complex64) -> Complex64 {
    n as f64 * z.ln() + 0.5 * f.mu * z * z - f.xi * z - (0.5 * f.mu - f.xi)
}

/// Weighted values `G(z) dz/(2πi)` at the nodes of a line.
fn line_side(n: i64, f: Family, line: Line, tol: f64) -> Result<Vec<(Complex64, Complex64)>> {
    let nodes = line_nodes(line.re, line.half, line.nodes);
    let vals: Vec<(Complex64, Complex64)> = nodes.iter().map(|nd| (nd.z, log_g(n, f, nd.z).exp())).collect();
    let peak = vals.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    if !peak.is_finite() {
        return Err(Error::Numeric("finite-kernel line integrand not finite".into()));
    }
    for (z, v) in [vals[0], vals[vals.len() - 1]] {
        if v.norm() > tol * peak.max(1e-300) {
            return Err(Error::Truncation(format!(
                "finite-kernel line integrand {} at endpoint {z} exceeds {tol} of its peak {peak}",
                v.norm()
            )));
        }
    }
    Ok(nodes.iter().zip(vals).map(|(nd, (z, v))| (z, nd.w * v)).collect())
}

/// Weighted values `dζ/(2πi G(ζ))` at the nodes of a circle.
fn circle_side(n: i64, f: Family, c: Circle) -> Result<Vec<(Complex64, Complex64)>> {
    let out: Vec<(Complex64, Complex64)> = circle_nodes(c.radius, c.nodes).iter().map(|nd| (nd.z, nd.w * (-log_g(n, f, nd.z)).exp())).collect();
    if out.iter().any(|(_, v)| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Numeric("finite-kernel circle integrand not finite".into()));
    }
    Ok(out)
}

/// `Σ_z g(z) Σ_ζ h(ζ)/(z − ζ)` for every outer node, kept separate.
fn cauchy_weighted(outer: &[(Complex64, Complex64)], inner: &[(Complex64, Complex64)]) -> Vec<(Complex64, Complex64)> {
    outer
        .par_iter()
        .map(|(z, g)| {
            let s: Complex64 = inner.iter().map(|(zeta, h)| h / (z - zeta)).sum();
            (*z, g * s)
        })
        .collect()
}

fn twofold(outer: &[(Complex64, Complex64)], inner: &[(Complex64, Complex64)]) -> Complex64 {
    cauchy_weighted(outer, inner).iter().map(|(_, v)| v).sum()
}

fn fourfold(
    zs: &[(Complex64, Complex64)],
    zetas: &[(Complex64, Complex64)],
    ws: &[(Complex64, Complex64)],
    omegas: &[(Complex64, Complex64)],
) -> Complex64 {
    let f = cauchy_weighted(zs, zetas);
    let g = cauchy_weighted(ws, omegas);
    let rows: Vec<Complex64> = f
        .par_iter()
        .map(|(z, fz)| {
            let s: Complex64 = g.iter().map(|(w, gw)| gw / (z - w)).sum();
            fz * s
        })
        .collect();
    rows.iter().sum()
}

fn kernel_value(kind: FiniteKernelKind, fp: &FiniteParams, ell: usize, k: usize, geo: &Geometry) -> Result<Complex64> {
    let s1 = Family { mu: fp.mu1, xi: fp.xi1 };
    let s2 = Family { mu: fp.dmu(), xi: fp.dxi() };
    let (n1, n2, dn) = (fp.n1 as i64, fp.n2 as i64, fp.dn() as i64);
    let (ell, k) = (ell as i64, k as i64);
    Ok(match kind {
        FiniteKernelKind::A01 | FiniteKernelKind::B1 => {
            let (nz, nw) = if kind == FiniteKernelKind::A01 { (n1, dn) } else { (n1 + 1, dn - 1) };
            let zs = line_side(nz, s1, geo.z_line, geo.tol)?;
            let ws = line_side(nw, s2, geo.w_line, geo.tol)?;
            let zetas = circle_side(k, s1, geo.zeta)?;
            let omegas = circle_side(n2 + 1 - ell, s2, geo.omega)?;
            fourfold(&zs, &zetas, &ws, &omegas)
        }
        FiniteKernelKind::C2 => {
            let ws = line_side(n2 - k, s2, geo.w_line, geo.tol)?;
            let omegas = circle_side(n2 + 1 - ell, s2, geo.omega)?;
            twofold(&ws, &omegas)
        }
        FiniteKernelKind::C3 => {
            let zs = line_side(ell - 1, s1, geo.z_line, geo.tol)?;
            let zetas = circle_side(k, s1, geo.zeta)?;
            twofold(&zs, &zetas)
        }
    })
}

fn real_value(v: Complex64, what: &str) -> Result<f64> {
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::Numeric(format!("{what} not finite")));
    }
    if v.im.abs() > crate::kernels::CONTOUR_IMAG_TOL * v.re.abs().max(1.0) {
        return Err(Error::Consistency(format!("{what}: imaginary part {} too large", v.im)));
    }
    Ok(v.re)
}

fn check_indices(fp: &FiniteParams, ell: usize, k: usize) -> Result<()> {
    if !(1..=fp.n2).contains(&ell) || !(1..=fp.n2).contains(&k) {
        return Err(Error::Argument(format!("need 1 <= ell, k <= n2 = {}, got ell = {ell}, k = {k}", fp.n2)));
    }
    Ok(())
}

/// The finite kernel `kind` at `(ℓ, k)` with the contours of `cfg`.
pub fn finite_kernel(kind: FiniteKernelKind, fp: &FiniteParams, ell: usize, k: usize, cfg: &FiniteKernelConfig) -> Result<f64> {
    fp.validate()?;
    cfg.validate()?;
    check_indices(fp, ell, k)?;
    let c = &cfg.contour;
    let line = |re: f64| Line { re, half: c.line_halflength, nodes: c.line_nodes };
    let geo = match kind {
        FiniteKernelKind::A01 | FiniteKernelKind::B1 => {
            let (zl, wl) = if kind == FiniteKernelKind::A01 { (c.d1, c.d3) } else { (c.d3, c.d1) };
            Geometry {
                z_line: line(zl),
                w_line: line(wl),
                zeta: Circle { radius: c.tau1, nodes: c.circle_nodes },
                omega: Circle { radius: c.tau2, nodes: c.circle_nodes },
                tol: c.endpoint_tol,
            }
        }
        FiniteKernelKind::C2 | FiniteKernelKind::C3 => {
            let circ = Circle { radius: cfg.tau, nodes: c.circle_nodes };
            Geometry { z_line: line(cfg.d), w_line: line(cfg.d), zeta: circ, omega: circ, tol: c.endpoint_tol }
        }
    };
    real_value(kernel_value(kind, fp, ell, k, &geo)?, "finite kernel")
}

/// The composite kernels at one `(ℓ, k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeKernels {
    /// `a0(ℓ,k) = a01 − a02 − a03` with `a02 = −1(k>n1) c2`, `a03 = 1(ℓ≤n1) c3`.
    pub a0: f64,
    /// `b(ℓ,k) = −b1 + b2 + b3` with `b2 = −1(k>n1+1) c2`, `b3 = 1(ℓ≤n1+1) c3`.
    pub b: f64,
    /// `ã0(ℓ, n1) = a0(ℓ, n1) + a2*(ℓ)`.
    pub a0_tilde: f64,
    /// `a2*(ℓ) = c2(ℓ, n1)`.
    pub a2_star: f64,
    /// `a3*(k) = c3(n1 + 1, k)`.
    pub a3_star: f64,
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// All composite kernels at `(ℓ, k)`.
pub fn composite_kernels(fp: &FiniteParams, ell: usize, k: usize, cfg: &FiniteKernelConfig) -> Result<CompositeKernels> {
    fp.validate()?;
    check_indices(fp, ell, k)?;
    let n1 = fp.n1;
    let fk = |kind, l, kk| finite_kernel(kind, fp, l, kk, cfg);
    let c2 = fk(FiniteKernelKind::C2, ell, k)?;
    let c3 = fk(FiniteKernelKind::C3, ell, k)?;
    let a0 = fk(FiniteKernelKind::A01, ell, k)? + indicator(k > n1) * c2 - indicator(ell <= n1) * c3;
    let b = -fk(FiniteKernelKind::B1, ell, k)? - indicator(k > n1 + 1) * c2 + indicator(ell <= n1 + 1) * c3;
    let a2_star = fk(FiniteKernelKind::C2, ell, n1)?;
    let a3_star = fk(FiniteKernelKind::C3, n1 + 1, k)?;
    let a0_at_n1 = fk(FiniteKernelKind::A01, ell, n1)? - indicator(ell <= n1) * fk(FiniteKernelKind::C3, ell, n1)?;
    Ok(CompositeKernels { a0, b, a0_tilde: a0_at_n1 + a2_star, a2_star, a3_star })
}

/// `a0`, `b`, `a2*`, `a3*` on the full index range `1..=n2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTables {
    n1: usize,
    n2: usize,
    a0: Vec<f64>,
    b: Vec<f64>,
    a2_star: Vec<f64>,
    a3_star: Vec<f64>,
}

impl KernelTables {
    /// Evaluates every finite kernel on `[1, n2]²`.
    pub fn new(fp: &FiniteParams, cfg: &FiniteKernelConfig) -> Result<Self> {
        fp.validate()?;
        cfg.validate()?;
        let (n1, n2) = (fp.n1, fp.n2);
        let kinds = [FiniteKernelKind::A01, FiniteKernelKind::B1, FiniteKernelKind::C2, FiniteKernelKind::C3];
        let jobs: Vec<(usize, usize, usize)> =
            (0..4).flat_map(|t| (1..=n2).flat_map(move |l| (1..=n2).map(move |k| (t, l, k)))).collect();
        let vals: Vec<f64> =
            jobs.par_iter().map(|&(t, l, k)| finite_kernel(kinds[t], fp, l, k, cfg)).collect::<Result<Vec<f64>>>()?;
        let at = |t: usize, l: usize, k: usize| vals[t * n2 * n2 + (l - 1) * n2 + (k - 1)];
        let mut a0 = vec![0.0; n2 * n2];
        let mut b = vec![0.0; n2 * n2];
        for l in 1..=n2 {
            for k in 1..=n2 {
                let (c2, c3) = (at(2, l, k), at(3, l, k));
                a0[(l - 1) * n2 + k - 1] = at(0, l, k) + indicator(k > n1) * c2 - indicator(l <= n1) * c3;
                b[(l - 1) * n2 + k - 1] = -at(1, l, k) - indicator(k > n1 + 1) * c2 + indicator(l <= n1 + 1) * c3;
            }
        }
        let a2_star = (1..=n2).map(|l| at(2, l, n1)).collect();
        let a3_star = (1..=n2).map(|k| at(3, n1 + 1, k)).collect();
        Ok(Self { n1, n2, a0, b, a2_star, a3_star })
    }

    /// `a0(ℓ, k)`.
    pub fn a0(&self, ell: usize, k: usize) -> f64 {
        self.a0[(ell - 1) * self.n2 + k - 1]
    }

    /// `b(ℓ, k)`.
    pub fn b(&self, ell: usize, k: usize) -> f64 {
        self.b[(ell - 1) * self.n2 + k - 1]
    }

    /// `a2*(ℓ)`.
    pub fn a2_star(&self, ell: usize) -> f64 {
        self.a2_star[ell - 1]
    }

    /// `a3*(k)`.
    pub fn a3_star(&self, k: usize) -> f64 {
        self.a3_star[k - 1]
    }

    /// `ã0(ℓ, n1) = a0(ℓ, n1) + a2*(ℓ)`.
    pub fn a0_tilde(&self, ell: usize) -> f64 {
        self.a0(ell, self.n1) + self.a2_star(ell)
    }
}

/// The six components of `∂_h Q(0)` and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPrimeExpansion {
    /// `Q'_1(0), …, Q'_6(0)`.
    pub parts: [f64; 6],
    /// `Σ_k Q'_k(0)`.
    pub total: f64,
}

/// Largest `n1` and `Δn` accepted by [`q_prime_expansion`].
pub const Q_PRIME_MAX_BLOCK: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    B,
    A,
}

/// A row of a block matrix: kernel family and label.
#[derive(Debug, Clone, Copy)]
struct Row {
    kind: RowKind,
    label: usize,
}

/// A column of a block matrix: label and whether it is the special `n1` column.
#[derive(Debug, Clone, Copy)]
struct Col {
    label: usize,
    tilde: bool,
}

fn block_det(t: &KernelTables, rows: &[Row], cols: &[Col]) -> f64 {
    let n = rows.len();
    debug_assert_eq!(n, cols.len());
    let mut a = Vec::with_capacity(n * n);
    for r in rows {
        for c in cols {
            a.push(match (r.kind, c.tilde) {
                (RowKind::B, _) => t.b(r.label, c.label),
                (RowKind::A, true) => t.a0_tilde(r.label),
                (RowKind::A, false) => t.a0(r.label, c.label),
            });
        }
    }
    det_in_place(&mut a, n)
}

fn minor_det(t: &KernelTables, rows: &[Row], cols: &[Col], i: usize, j: usize) -> f64 {
    let r: Vec<Row> = rows.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, r)| *r).collect();
    let c: Vec<Col> = cols.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, c)| *c).collect();
    block_det(t, &r, &c)
}

fn tuples(lo: usize, hi: usize, len: usize) -> Vec<Vec<usize>> {
    increasing_tuples(lo as i64, hi as i64, len).into_iter().map(|v| v.into_iter().map(|x| x as usize).collect()).collect()
}

fn labelled(kind: RowKind, labels: &[usize]) -> Vec<Row> {
    labels.iter().map(|&label| Row { kind, label }).collect()
}

fn plain_cols(labels: &[usize]) -> Vec<Col> {
    labels.iter().map(|&label| Col { label, tilde: false }).collect()
}

/// Rows and columns of `M_0(c, c', d, d')`: rows `b, a0, a0, b`.
fn m0_blocks(c: &[usize], cp: &[usize], d: &[usize], dp: &[usize]) -> (Vec<Row>, Vec<Col>) {
    let mut rows = labelled(RowKind::B, c);
    rows.extend(labelled(RowKind::A, cp));
    rows.extend(labelled(RowKind::A, d));
    rows.extend(labelled(RowKind::B, dp));
    let labels: Vec<usize> = c.iter().chain(cp).chain(d).chain(dp).copied().collect();
    (rows, plain_cols(&labels))
}

/// Rows and columns of `V` (`middle = B`) or `U` (`middle = A`).
fn vu_blocks(c: &[usize], cp: &[usize], d: &[usize], dp: &[usize], n1: usize, middle: RowKind) -> (Vec<Row>, Vec<Col>) {
    let mut rows = labelled(RowKind::B, c);
    rows.extend(labelled(RowKind::A, cp));
    rows.push(Row { kind: middle, label: n1 + 1 });
    rows.extend(labelled(RowKind::A, d));
    rows.extend(labelled(RowKind::B, dp));
    let mut cols = plain_cols(c);
    cols.extend(plain_cols(cp));
    cols.push(Col { label: n1, tilde: true });
    cols.extend(plain_cols(d));
    cols.extend(plain_cols(dp));
    (rows, cols)
}

fn parity(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `∂_h Q(0)` from the kernel tables.
pub fn q_prime_from_tables(t: &KernelTables) -> QPrimeExpansion {
    let (n1, n2) = (t.n1, t.n2);
    let dn = n2 - n1;
    let rmax = n1.min(dn);
    let mut parts = [0.0; 6];
    for r in 0..=rmax {
        for s in 0..=n1 {
            for tt in 0..=dn {
                for c in tuples(1, n1, r) {
                    for cp in tuples(1, n1, s) {
                        let cp_ends = s >= 1 && cp[s - 1] == n1;
                        if tt < dn {
                            for d in tuples(n1 + 2, n2, r) {
                                for dp in tuples(n1 + 2, n2, tt) {
                                    let (rows, cols) = vu_blocks(&c, &cp, &d, &dp, n1, RowKind::B);
                                    parts[0] += block_det(t, &rows, &cols);
                                }
                            }
                            if r >= 1 {
                                for d in tuples(n1 + 2, n2, r - 1) {
                                    for dp in tuples(n1 + 2, n2, tt) {
                                        let (rows, cols) = vu_blocks(&c, &cp, &d, &dp, n1, RowKind::A);
                                        parts[1] += block_det(t, &rows, &cols);
                                    }
                                }
                            }
                        }
                        if tt >= 1 {
                            for d in tuples(n1 + 2, n2, r) {
                                for dp in tuples(n1 + 1, n2, tt).into_iter().filter(|v| v[0] == n1 + 1) {
                                    let (rows, cols) = m0_blocks(&c, &cp, &d, &dp);
                                    let len = rows.len();
                                    if cp_ends {
                                        let i = r + s - 1;
                                        for j in 0..len {
                                            parts[2] += parity(r + s + j + 1)
                                                * t.a3_star(cols[j].label)
                                                * minor_det(t, &rows, &cols, i, j);
                                        }
                                    }
                                    if r + s >= 1 {
                                        for i in r..2 * r + s {
                                            for j in 0..len {
                                                parts[3] += parity(i + j + 3)
                                                    * t.a2_star(rows[i].label)
                                                    * t.a3_star(cols[j].label)
                                                    * minor_det(t, &rows, &cols, i, j);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        if r >= 1 {
                            for d in tuples(n1 + 1, n2, r).into_iter().filter(|v| v[0] == n1 + 1) {
                                for dp in tuples(n1 + 2, n2, tt) {
                                    let (rows, cols) = m0_blocks(&c, &cp, &d, &dp);
                                    let len = rows.len();
                                    if cp_ends {
                                        let i = r + s - 1;
                                        for j in 0..len {
                                            parts[4] += parity(r + s + j + 1)
                                                * t.a3_star(cols[j].label)
                                                * minor_det(t, &rows, &cols, i, j);
                                        }
                                    }
                                    for i in r..2 * r + s {
                                        for j in 0..len {
                                            parts[5] += parity(i + j + 3)
                                                * t.a2_star(rows[i].label)
                                                * t.a3_star(cols[j].label)
                                                * minor_det(t, &rows, &cols, i, j);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    QPrimeExpansion { parts, total: parts.iter().sum() }
}

/// `∂_h Q(0) = Σ_{k=1}^{6} Q'_k(0)` for `n1 ≤ 2`, `Δn ≤ 2`.
pub fn q_prime_expansion(fp: &FiniteParams, cfg: &FiniteKernelConfig) -> Result<QPrimeExpansion> {
    fp.validate()?;
    if fp.n1 > Q_PRIME_MAX_BLOCK || fp.dn() > Q_PRIME_MAX_BLOCK {
        return Err(Error::Unsupported(format!(
            "Q'(0) expansion supports n1, dn <= {Q_PRIME_MAX_BLOCK}, got n1 = {}, dn = {}",
            fp.n1,
            fp.dn()
        )));
    }
    Ok(q_prime_from_tables(&KernelTables::new(fp, cfg)?))
}

/// Step, in units of the local scale `N^{−1/3}`, of the circle trapezoid rule
/// used for the rescaled kernels.
pub const RESCALED_CIRCLE_STEP: f64 = 0.1;

/// A rescaled finite kernel together with the coordinates it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledKernel {
    /// `N1^{1/3}` times the finite kernel.
    pub value: f64,
    /// The `x` reproduced by the rounded `ℓ`.
    pub x: f64,
    /// The `y` reproduced by the rounded `k`.
    pub y: f64,
    /// Row index.
    pub ell: usize,
    /// Column index.
    pub k: usize,
}

/// `N1^{1/3}` times the finite kernel at the embedded `(ℓ, k)`, on the contours
/// `z = 1 + (d1 + it)N1^{−1/3}`, `ζ = (1 − d2 N1^{−1/3})e^{iθ}`,
/// `w = 1 + (d3 + it)N2^{−1/3}`, `ω = (1 − d4 N2^{−1/3})e^{iθ}` with the offsets
/// of [`admissible_contour`] started from `base`.
pub fn rescaled_kernel(kind: FiniteKernelKind, emb: &ScalingEmbedding, x: f64, y: f64, base: &ContourSpec) -> Result<RescaledKernel> {
    base.validate()?;
    let fp = emb.finite()?;
    let p = emb.effective_params()?;
    let ell = emb.ell(x)?;
    let k = emb.k(y)?;
    let which = if kind == FiniteKernelKind::B1 { FourFoldKernel::Psi1 } else { FourFoldKernel::Phi1 };
    let c = admissible_contour(&p, which, base);
    let sig1 = emb.big_n1().cbrt().recip();
    let sig2 = emb.big_n2().cbrt().recip();
    let (rz, rw) = (1.0 - c.d2 * sig1, 1.0 - c.d4 * sig2);
    if !(rz > 0.0 && rw > 0.0) {
        return Err(Error::Domain(format!("M = {} too small for the circle offsets d2 = {}, d4 = {}", emb.m, c.d2, c.d4)));
    }
    let circ = |r: f64, s: f64| Circle { radius: r, nodes: c.circle_nodes.max((2.0 * PI / (RESCALED_CIRCLE_STEP * s)).ceil() as usize) };
    let geo = Geometry {
        z_line: Line { re: 1.0 + c.d1 * sig1, half: c.line_halflength * sig1, nodes: c.line_nodes },
        w_line: Line { re: 1.0 + c.d3 * sig2, half: c.line_halflength * sig2, nodes: c.line_nodes },
        zeta: circ(rz, sig1),
        omega: circ(rw, sig2),
        tol: c.endpoint_tol,
    };
    let v = real_value(kernel_value(kind, &fp, ell, k, &geo)?, "rescaled finite kernel")?;
    Ok(RescaledKernel { value: v / sig1, x: emb.x_of(ell)?, y: emb.y_of(k)?, ell, k })
}

/// `|N1^{1/3} · finite kernel − limiting kernel|` at the embedded point, the
/// limit being `φ1, ψ1, φ2, φ3` for `a01, b1, c2, c3` at the effective parameters.
pub fn rescaled_kernel_error(kind: FiniteKernelKind, emb: &ScalingEmbedding, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    if !(emb.m >= 10.0) {
        return Err(Error::Argument(format!("rescaled kernel comparison needs M >= 10, got {}", emb.m)));
    }
    let r = rescaled_kernel(kind, emb, x, y, &cfg.contour)?;
    let p = emb.effective_params()?;
    let limit = match kind {
        FiniteKernelKind::A01 => phi1(&p, r.x, r.y, cfg)?,
        FiniteKernelKind::B1 => psi1(&p, r.x, r.y, cfg)?,
        FiniteKernelKind::C2 => phi2(&p, r.x, r.y),
        FiniteKernelKind::C3 => phi3(&p, r.x, r.y),
    };
    Ok((r.value - limit).abs())
}
