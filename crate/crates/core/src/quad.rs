//! Quadrature machinery.
//!
//! * Gauss–Legendre rules on `[-1, 1]` (Newton iteration on the three-term
//!   recurrence) and their images on intervals and truncated half-lines.
//! * Tensor-product integration over up to four axes with a node-doubling
//!   error estimate.
//! * Randomized quasi-Monte Carlo on Sobol points with random digital
//!   shifts, for higher-dimensional integrands.
//! * Vertical-line contours `Γ_d : t ↦ d + it` and circles `γ_r`, both by the
//!   trapezoid rule, which is spectrally accurate for the analytic,
//!   Gaussian-decaying or periodic integrands used here.
//!
//! Contour integrals are always normalised as `(1/2πi)∮ g(z) dz`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Change of variables used for half-line integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfLineMap {
    /// Gauss–Legendre on `[0, L]`, discarding `(L, ∞)`.
    LinearTruncate,
    /// `τ = L u / (1 − u)` on `u ∈ [0, 1)` scaled so that half the nodes lie below `L/8`.
    RationalMap,
    /// `τ = −(L/8) ln(1 − u)` on `u ∈ [0, 1)`.
    ExpMap,
}

/// Rule description for interval and half-line integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss nodes per axis for the coarse rule (the fine rule doubles it).
    pub nodes_per_axis: usize,
    /// Truncation length `L` of half-line integrals.
    pub semiinf_cutoff: f64,
    /// Half-line change of variables.
    pub mapping: HalfLineMap,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes_per_axis: 64, semiinf_cutoff: 40.0, mapping: HalfLineMap::LinearTruncate }
    }
}

impl QuadratureSpec {
    /// Checks `nodes_per_axis >= 2` and `semiinf_cutoff > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_axis < 2 {
            return Err(Error::Argument("nodes_per_axis must be at least 2".into()));
        }
        if !(self.semiinf_cutoff > 0.0) || !self.semiinf_cutoff.is_finite() {
            return Err(Error::Argument("semiinf_cutoff must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Side of a half-line integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `(-∞, 0]`.
    Left,
    /// `[0, ∞)`.
    Right,
}

/// One axis of a product domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    /// `(-∞, 0]`, truncated and mapped per the quadrature spec.
    Left,
    /// `[0, ∞)`, truncated and mapped per the quadrature spec.
    Right,
    /// A finite interval `[a, b]`.
    Interval(f64, f64),
}

/// Geometry of the contours used by the finite-size and limiting contour formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    /// Offset of the first line (`z` variable).
    pub d1: f64,
    /// Offset of the second contour (`ζ` variable, line through `−d2`).
    pub d2: f64,
    /// Offset of the third line (`w` variable).
    pub d3: f64,
    /// Offset of the fourth contour (`ω` variable, line through `−d4`).
    pub d4: f64,
    /// Radius of the first circle.
    pub tau1: f64,
    /// Radius of the second circle.
    pub tau2: f64,
    /// Lines are truncated to `t ∈ [−line_halflength, line_halflength]`.
    pub line_halflength: f64,
    /// Trapezoid nodes per line.
    pub line_nodes: usize,
    /// Trapezoid nodes per circle.
    pub circle_nodes: usize,
    /// Maximal integrand magnitude tolerated at the line endpoints.
    pub endpoint_tol: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            d1: 1.0,
            d2: 1.0,
            d3: 2.0,
            d4: 1.0,
            tau1: 0.5,
            tau2: 0.4,
            line_halflength: 8.0,
            line_nodes: 401,
            circle_nodes: 128,
            endpoint_tol: 1e-13,
        }
    }
}

impl ContourSpec {
    /// Checks positivity of all offsets, radii and node counts.
    pub fn validate(&self) -> Result<()> {
        let pos = [self.d1, self.d2, self.d3, self.d4, self.tau1, self.tau2, self.line_halflength];
        if pos.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Argument(format!("contour offsets and radii must be positive: {self:?}")));
        }
        if self.line_nodes < 3 || self.circle_nodes < 3 {
            return Err(Error::Argument("contours need at least 3 nodes".into()));
        }
        Ok(())
    }
}

/// A quadrature node on a contour: the point `z` and the weight `w` such that
/// `Σ w g(z) ≈ (1/2πi)∮ g(z) dz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourNode {
    /// Location.
    pub z: Complex64,
    /// Weight including `dz/(2πi)`.
    pub w: Complex64,
}

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

fn rule_cache() -> &'static RwLock<HashMap<usize, Rule>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        if n > 1 {
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// The `n`-point Gauss–Legendre rule on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = gauss_legendre_shared(n)?;
    Ok((r.0.clone(), r.1.clone()))
}

/// Shared, cached variant of [`gauss_legendre`].
pub fn gauss_legendre_shared(n: usize) -> Result<Rule> {
    if n < 1 {
        return Err(Error::Argument("Gauss-Legendre rule needs n >= 1".into()));
    }
    if let Some(r) = rule_cache().read().expect("rule cache poisoned").get(&n) {
        return Ok(r.clone());
    }
    let r = Arc::new(compute_gauss_legendre(n));
    rule_cache().write().expect("rule cache poisoned").insert(n, r.clone());
    Ok(r)
}

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_interval(a: f64, b: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = gauss_legendre_shared(n)?;
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    Ok((r.0.iter().map(|x| c + h * x).collect(), r.1.iter().map(|w| h * w).collect()))
}

/// Nodes and weights for `∫₀^∞` under `spec.mapping` with `n` nodes.
pub fn halfline_rule(n: usize, spec: &QuadratureSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let l = spec.semiinf_cutoff;
    match spec.mapping {
        HalfLineMap::LinearTruncate => gauss_interval(0.0, l, n),
        HalfLineMap::RationalMap => {
            let (u, w) = gauss_interval(0.0, 1.0, n)?;
            let s = l / 8.0;
            Ok(u.iter()
                .zip(w.iter())
                .map(|(u, w)| (s * u / (1.0 - u), w * s / ((1.0 - u) * (1.0 - u))))
                .unzip())
        }
        HalfLineMap::ExpMap => {
            let (u, w) = gauss_interval(0.0, 1.0, n)?;
            let s = l / 8.0;
            Ok(u.iter().zip(w.iter()).map(|(u, w)| (-s * (1.0 - u).ln(), w * s / (1.0 - u))).unzip())
        }
    }
}

/// Nodes and weights for one axis of a product domain.
pub fn axis_rule(axis: Axis, n: usize, spec: &QuadratureSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    match axis {
        Axis::Right => halfline_rule(n, spec),
        Axis::Left => {
            let (x, w) = halfline_rule(n, spec)?;
            Ok((x.iter().map(|x| -x).collect(), w))
        }
        Axis::Interval(a, b) => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Argument("interval endpoints must be finite".into()));
            }
            gauss_interval(a, b, n)
        }
    }
}

fn sum_rule<F: Fn(f64) -> f64>(f: &F, x: &[f64], w: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w.iter()) {
        let v = f(*xi);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("integrand not finite at node {xi}: {v}")));
        }
        s += wi * v;
    }
    Ok(s)
}

/// `∫` of `f` over a half-line, returning the fine-rule value and the
/// difference to the coarse rule as error estimate.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: F, side: Side, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let axis = match side {
        Side::Left => Axis::Left,
        Side::Right => Axis::Right,
    };
    let n = spec.nodes_per_axis;
    let (x1, w1) = axis_rule(axis, n, spec)?;
    let (x2, w2) = axis_rule(axis, 2 * n, spec)?;
    let coarse = sum_rule(&f, &x1, &w1)?;
    let fine = sum_rule(&f, &x2, &w2)?;
    Ok((fine, (fine - coarse).abs()))
}

/// Tensor-product Gauss value of `f` over `axes` with `n` nodes per axis.
pub fn tensor_sum<F: Fn(&[f64]) -> f64>(f: &F, axes: &[Axis], n: usize, spec: &QuadratureSpec) -> Result<f64> {
    let rules: Vec<(Vec<f64>, Vec<f64>)> = axes.iter().map(|a| axis_rule(*a, n, spec)).collect::<Result<_>>()?;
    let dim = axes.len();
    if dim == 0 {
        let v = f(&[]);
        return if v.is_finite() { Ok(v) } else { Err(Error::Numeric("integrand not finite".into())) };
    }
    let mut idx = vec![0usize; dim];
    let mut pt = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..dim {
            pt[d] = rules[d].0[idx[d]];
            w *= rules[d].1[idx[d]];
        }
        let v = f(&pt);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("integrand not finite at {pt:?}")));
        }
        total += w * v;
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                return Ok(total);
            }
        }
    }
}

/// Tensor-product Gauss integration over at most four axes with a
/// node-doubling error estimate.
pub fn tensor_integrate<F: Fn(&[f64]) -> f64>(f: F, axes: &[Axis], spec: &QuadratureSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    if axes.len() > 4 {
        return Err(Error::Argument(format!(
            "tensor_integrate supports at most 4 axes, got {}; use qmc_integrate",
            axes.len()
        )));
    }
    let coarse = tensor_sum(&f, axes, spec.nodes_per_axis, spec)?;
    let fine = tensor_sum(&f, axes, 2 * spec.nodes_per_axis, spec)?;
    Ok((fine, (fine - coarse).abs()))
}

const SOBOL_POLY: [(u32, u32, [u32; 6]); 15] = [
    (1, 0, [1, 0, 0, 0, 0, 0]),
    (2, 1, [1, 3, 0, 0, 0, 0]),
    (3, 1, [1, 3, 1, 0, 0, 0]),
    (3, 2, [1, 1, 1, 0, 0, 0]),
    (4, 1, [1, 1, 3, 3, 0, 0]),
    (4, 4, [1, 3, 5, 13, 0, 0]),
    (5, 2, [1, 1, 5, 5, 17, 0]),
    (5, 4, [1, 1, 5, 5, 5, 0]),
    (5, 7, [1, 1, 7, 11, 19, 0]),
    (5, 11, [1, 1, 5, 1, 1, 0]),
    (5, 13, [1, 1, 1, 3, 11, 0]),
    (5, 14, [1, 3, 5, 5, 31, 0]),
    (6, 1, [1, 3, 3, 9, 7, 49]),
    (6, 13, [1, 1, 1, 15, 21, 21]),
    (6, 16, [1, 3, 1, 13, 27, 49]),
];

/// Maximal dimension supported by [`SobolSequence`].
pub const SOBOL_MAX_DIM: usize = 16;

/// Gray-code Sobol generator (32-bit) in up to [`SOBOL_MAX_DIM`] dimensions.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dim: usize,
    v: Vec<[u32; 32]>,
    x: Vec<u32>,
    index: u64,
}

impl SobolSequence {
    /// A generator positioned before the first point (the origin).
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > SOBOL_MAX_DIM {
            return Err(Error::Argument(format!("Sobol dimension must be in 1..={SOBOL_MAX_DIM}")));
        }
        let mut v = Vec::with_capacity(dim);
        let mut first = [0u32; 32];
        for (i, slot) in first.iter_mut().enumerate() {
            *slot = 1u32 << (31 - i);
        }
        v.push(first);
        for &(s, a, m) in SOBOL_POLY.iter().take(dim - 1) {
            let s = s as usize;
            let mut d = [0u32; 32];
            for i in 0..s {
                d[i] = m[i] << (31 - i);
            }
            for i in s..32 {
                let mut val = d[i - s] ^ (d[i - s] >> s);
                for k in 1..s {
                    if (a >> (s - 1 - k)) & 1 == 1 {
                        val ^= d[i - k];
                    }
                }
                d[i] = val;
            }
            v.push(d);
        }
        Ok(Self { dim, v, x: vec![0; dim], index: 0 })
    }

    /// Advances and returns the next point as raw 32-bit integers.
    pub fn next_raw(&mut self) -> &[u32] {
        if self.index > 0 {
            let c = (self.index - 1).trailing_ones() as usize;
            for d in 0..self.dim {
                self.x[d] ^= self.v[d][c.min(31)];
            }
        }
        self.index += 1;
        &self.x
    }
}

/// Randomized quasi-Monte Carlo integration over a product of axes.
///
/// Uses `n_points` Sobol points under `shifts >= 8` independent random
/// digital shifts; returns the mean over shifts and the standard error of
/// that mean.
pub fn qmc_integrate<F: Fn(&[f64]) -> f64>(
    f: F,
    axes: &[Axis],
    spec: &QuadratureSpec,
    n_points: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    qmc_integrate_shifts(f, axes, spec, n_points, 8, seed)
}

/// [`qmc_integrate`] with an explicit number of shifts.
pub fn qmc_integrate_shifts<F: Fn(&[f64]) -> f64>(
    f: F,
    axes: &[Axis],
    spec: &QuadratureSpec,
    n_points: usize,
    shifts: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    spec.validate()?;
    if shifts < 8 {
        return Err(Error::Argument("qmc_integrate needs at least 8 shifts".into()));
    }
    if n_points == 0 {
        return Err(Error::Argument("qmc_integrate needs n_points >= 1".into()));
    }
    let dim = axes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut estimates = Vec::with_capacity(shifts);
    let mut pt = vec![0.0; dim];
    for _ in 0..shifts {
        let shift: Vec<u32> = (0..dim).map(|_| rng.gen()).collect();
        let mut seq = SobolSequence::new(dim)?;
        let mut acc = 0.0;
        for _ in 0..n_points {
            let raw = seq.next_raw();
            let mut jac = 1.0;
            for d in 0..dim {
                let u = ((raw[d] ^ shift[d]) as f64 + 0.5) / 4294967296.0;
                let (x, j) = map_unit(axes[d], u, spec);
                pt[d] = x;
                jac *= j;
            }
            let v = f(&pt);
            if !v.is_finite() {
                return Err(Error::Numeric(format!("integrand not finite at {pt:?}")));
            }
            acc += v * jac;
        }
        estimates.push(acc / n_points as f64);
    }
    let m = estimates.iter().sum::<f64>() / shifts as f64;
    let var = estimates.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (shifts as f64 - 1.0);
    Ok((m, (var / shifts as f64).sqrt()))
}

fn map_unit(axis: Axis, u: f64, spec: &QuadratureSpec) -> (f64, f64) {
    let half = |u: f64| -> (f64, f64) {
        let l = spec.semiinf_cutoff;
        match spec.mapping {
            HalfLineMap::LinearTruncate => (l * u, l),
            HalfLineMap::RationalMap => {
                let s = l / 8.0;
                (s * u / (1.0 - u), s / ((1.0 - u) * (1.0 - u)))
            }
            HalfLineMap::ExpMap => {
                let s = l / 8.0;
                (-s * (1.0 - u).ln(), s / (1.0 - u))
            }
        }
    };
    match axis {
        Axis::Right => half(u),
        Axis::Left => {
            let (x, j) = half(u);
            (-x, j)
        }
        Axis::Interval(a, b) => (a + (b - a) * u, b - a),
    }
}

/// Trapezoid nodes for `(1/2πi)∫_{Γ_offset} g(z) dz` along `z = offset + it`.
pub fn line_nodes(offset: f64, halflength: f64, n: usize) -> Vec<ContourNode> {
    let n = n.max(3);
    let h = 2.0 * halflength / (n - 1) as f64;
    let base = h / (2.0 * std::f64::consts::PI);
    (0..n)
        .map(|j| {
            let t = -halflength + j as f64 * h;
            let end = j == 0 || j == n - 1;
            ContourNode { z: Complex64::new(offset, t), w: Complex64::new(if end { 0.5 * base } else { base }, 0.0) }
        })
        .collect()
}

/// Trapezoid nodes for `(1/2πi)∮_{γ_r} g(z) dz` on the positively oriented circle.
pub fn circle_nodes(radius: f64, n: usize) -> Vec<ContourNode> {
    let nf = n as f64;
    (0..n)
        .map(|j| {
            let z = Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / nf);
            ContourNode { z, w: z / nf }
        })
        .collect()
}

/// `(1/2πi)∫_{Γ_offset} g(z) dz` over the upward vertical line through `offset`.
///
/// Fails with a truncation error when `|g|` at either endpoint exceeds
/// `spec.endpoint_tol`.
pub fn line_contour_quad<G: Fn(Complex64) -> Complex64>(g: G, offset: f64, spec: &ContourSpec) -> Result<Complex64> {
    if !offset.is_finite() {
        return Err(Error::Argument("line offset must be finite".into()));
    }
    let nodes = line_nodes(offset, spec.line_halflength, spec.line_nodes);
    let mut sum = Complex64::new(0.0, 0.0);
    for (j, node) in nodes.iter().enumerate() {
        let v = g(node.z);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Numeric(format!("line integrand not finite at {}", node.z)));
        }
        if (j == 0 || j == nodes.len() - 1) && v.norm() > spec.endpoint_tol {
            return Err(Error::Truncation(format!(
                "line integrand magnitude {} at endpoint {} exceeds {}",
                v.norm(),
                node.z,
                spec.endpoint_tol
            )));
        }
        sum += node.w * v;
    }
    Ok(sum)
}

/// `(1/2πi)∮_{γ_radius} g(z) dz` by the `n`-point periodic trapezoid rule.
pub fn circle_contour_quad<G: Fn(Complex64) -> Complex64>(g: G, radius: f64, n: usize) -> Complex64 {
    circle_nodes(radius, n).iter().map(|node| node.w * g(node.z)).sum()
}
