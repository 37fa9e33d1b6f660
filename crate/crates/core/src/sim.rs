//! Monte Carlo samplers for geometric last-passage percolation and the
//! semi-discrete Brownian last-passage time, joint two-point sampling on one
//! field, rescaling to the fluctuation coordinates, and empirical statistics.
//!
//! Randomness is counter-based: every line (row) of a field owns ChaCha8
//! streams keyed by `(seed, replica)` with the line index as stream id, so any
//! replica is reproducible on its own and replicas run in parallel without
//! shared state. A Brownian field at refinement level `L` splits each base
//! increment into `2^L` pieces by Brownian-bridge halving, drawing the level-`ℓ`
//! midpoints from a stream of their own, so the levels are coupled pathwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_finite, Error, Result};
use crate::prelimit::ScalingEmbedding;

fn stream_rng(seed: u64, replica: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replica.to_le_bytes());
    key[16..24].copy_from_slice(b"kpz-sim!");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// A field of i.i.d. geometric weights `ℙ[w = k] = (1−q)q^k`, `k ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomWeights {
    /// Parameter `q ∈ (0, 1)`.
    pub q: f64,
    /// Number of rows (the `m` direction).
    pub rows: usize,
    /// Number of columns (the `n` direction).
    pub cols: usize,
    /// Seed of the field.
    pub seed: u64,
}

impl GeomWeights {
    /// Checks `0 < q < 1` and a non-empty grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Domain(format!("need 0 < q < 1, got {}", self.q)));
        }
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Argument("weight grid must be non-empty".into()));
        }
        Ok(())
    }

    /// Row-major weights `w(i, j)`, `0 ≤ i < rows`, `0 ≤ j < cols`, of `replica`.
    pub fn weights(&self, replica: u64) -> Result<Vec<i64>> {
        self.validate()?;
        let lnq = self.q.ln();
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            let mut rng = stream_rng(self.seed, replica, i as u64);
            out.extend((0..self.cols).map(|_| geometric(&mut rng, lnq)));
        }
        Ok(out)
    }
}

fn geometric<R: Rng>(rng: &mut R, lnq: f64) -> i64 {
    let u: f64 = rng.gen();
    ((1.0 - u).ln() / lnq).floor() as i64
}

/// The last-passage table `G(i, j)`, `1 ≤ i ≤ m`, `1 ≤ j ≤ n`, of `replica`,
/// row-major with `n` columns.
pub fn geom_lpp_table(w: &GeomWeights, replica: u64, m: usize, n: usize) -> Result<Vec<i64>> {
    w.validate()?;
    if m == 0 || n == 0 || m > w.rows || n > w.cols {
        return Err(Error::Argument(format!("need 1 <= m <= {}, 1 <= n <= {}, got ({m}, {n})", w.rows, w.cols)));
    }
    let lnq = w.q.ln();
    let mut g = vec![0i64; m * n];
    for i in 0..m {
        let mut rng = stream_rng(w.seed, replica, i as u64);
        for j in 0..n {
            let up = if i > 0 { Some(g[(i - 1) * n + j]) } else { None };
            let left = if j > 0 { Some(g[i * n + j - 1]) } else { None };
            let prev = match (up, left) {
                (Some(a), Some(b)) => a.max(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0,
            };
            g[i * n + j] = prev + geometric(&mut rng, lnq);
        }
    }
    Ok(g)
}

/// `G(m, n)` of `replica` by dynamic programming.
pub fn sample_geom_lpp(w: &GeomWeights, replica: u64, m: usize, n: usize) -> Result<i64> {
    Ok(*geom_lpp_table(w, replica, m, n)?.last().expect("non-empty table"))
}

/// `(G([μT], n) − q[μT]/(1−q)) / (√q √T/(1−q))`.
pub fn rescale_geom(g: i64, q: f64, mu: f64, t: f64) -> f64 {
    let m = (mu * t).floor();
    (g as f64 - q / (1.0 - q) * m) / (q.sqrt() / (1.0 - q) * t.sqrt())
}

/// Update rule of the Brownian dynamic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpScheme {
    /// `H(t_k, i) = max(H(t_{k−1}, i) + ΔB_i, H(t_k, i−1))`: jumps only at grid times.
    Grid,
    /// As [`DpScheme::Grid`], plus a jump from line `i−1` to `i` inside the
    /// step: `H(·, i−1) − B_i` is treated as a Brownian bridge of variance rate
    /// `2` between its values at the step ends and its maximum is sampled
    /// exactly by inversion.
    BridgeCorrected,
}

/// Independent standard Brownian motions `B_1, …, B_{n_lines}` on `[0, t_max]`,
/// sampled on `steps · 2^level` equal steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianField {
    /// Number of Brownian motions.
    pub n_lines: usize,
    /// Time horizon.
    pub t_max: f64,
    /// Number of base steps.
    pub steps: usize,
    /// Refinement level: each base step is split into `2^level` steps.
    pub level: u32,
    /// Update rule.
    pub scheme: DpScheme,
    /// Seed of the field.
    pub seed: u64,
}

/// Largest refinement level.
pub const MAX_LEVEL: u32 = 16;

impl BrownianField {
    /// A field with base step `t_max / steps` at level 0.
    pub fn new(n_lines: usize, t_max: f64, steps: usize, scheme: DpScheme, seed: u64) -> Result<Self> {
        let f = Self { n_lines, t_max, steps, level: 0, scheme, seed };
        f.validate()?;
        Ok(f)
    }

    /// A field whose base step is as close as possible to `dt` with
    /// `t_max / dt` integral.
    pub fn with_dt(n_lines: usize, t_max: f64, dt: f64, scheme: DpScheme, seed: u64) -> Result<Self> {
        check_finite("dt", dt)?;
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        Self::new(n_lines, t_max, ((t_max / dt).round() as usize).max(1), scheme, seed)
    }

    /// Checks the sizes.
    pub fn validate(&self) -> Result<()> {
        check_finite("t_max", self.t_max)?;
        if self.n_lines == 0 || self.steps == 0 || !(self.t_max > 0.0) {
            return Err(Error::Argument("need n_lines >= 1, steps >= 1 and t_max > 0".into()));
        }
        if self.level > MAX_LEVEL {
            return Err(Error::Argument(format!("refinement level {} exceeds {MAX_LEVEL}", self.level)));
        }
        Ok(())
    }

    /// The same field with every step halved (pathwise refinement).
    pub fn halved(&self) -> Self {
        Self { level: self.level + 1, ..*self }
    }

    /// Number of fine steps.
    pub fn fine_steps(&self) -> usize {
        self.steps << self.level
    }

    /// Fine step size.
    pub fn dt(&self) -> f64 {
        self.t_max / self.fine_steps() as f64
    }

    /// Fine-grid index of `mu`; `mu` must lie in `[0, t_max]` up to `dt/2`.
    pub fn step_of(&self, mu: f64) -> Result<usize> {
        check_finite("mu", mu)?;
        let dt = self.dt();
        let k = (mu / dt).round();
        if mu < -0.5 * dt || k > self.fine_steps() as f64 || (mu - k * dt).abs() > 0.5 * dt * (1.0 + 1e-12) {
            return Err(Error::Argument(format!("mu = {mu} is off the grid [0, {}] with step {dt}", self.t_max)));
        }
        Ok(k as usize)
    }
}

/// Per-line generator of fine increments at a refinement level.
struct LineIncrements {
    base: ChaCha8Rng,
    splits: Vec<ChaCha8Rng>,
    uniforms: ChaCha8Rng,
    level: u32,
    base_dt: f64,
    buffer: Vec<f64>,
    pos: usize,
}

impl LineIncrements {
    fn new(f: &BrownianField, replica: u64, line: usize) -> Self {
        let stream = |k: u64| stream_rng(f.seed, replica, (line as u64) << 6 | k);
        Self {
            base: stream(0),
            splits: (1..=f.level as u64).map(stream).collect(),
            uniforms: stream(63),
            level: f.level,
            base_dt: f.t_max / f.steps as f64,
            buffer: vec![0.0; 1 << f.level],
            pos: 1 << f.level,
        }
    }

    fn refill(&mut self) {
        let z: f64 = StandardNormal.sample(&mut self.base);
        self.buffer[0] = self.base_dt.sqrt() * z;
        let mut len = 1;
        let mut h = self.base_dt;
        for l in 0..self.level as usize {
            for j in (0..len).rev() {
                let p = self.buffer[j];
                let z: f64 = StandardNormal.sample(&mut self.splits[l]);
                let s = 0.5 * h.sqrt() * z;
                self.buffer[2 * j] = 0.5 * p + s;
                self.buffer[2 * j + 1] = 0.5 * p - s;
            }
            len *= 2;
            h *= 0.5;
        }
        self.pos = 0;
    }

    fn next(&mut self) -> (f64, f64) {
        if self.pos == self.buffer.len() {
            self.refill();
        }
        let v = self.buffer[self.pos];
        self.pos += 1;
        (v, self.uniforms.gen())
    }
}

/// Maximum over `[0, dt]` of a Brownian bridge of variance rate `2` from `0`
/// to `c`, by inversion with the uniform `u ∈ [0, 1)`.
pub fn bridge_max(c: f64, dt: f64, u: f64) -> f64 {
    0.5 * (c + (c * c - 4.0 * dt * (1.0 - u).ln()).sqrt())
}

/// Runs the Brownian dynamic program of `replica` and returns `H(t_k, i)` at
/// each probe `(k, i)` (fine step `k`, line `i ≥ 1`).
pub fn brownian_dp(f: &BrownianField, replica: u64, probes: &[(usize, usize)]) -> Result<Vec<f64>> {
    f.validate()?;
    let lines = probes.iter().map(|p| p.1).max().unwrap_or(0);
    let last = probes.iter().map(|p| p.0).max().unwrap_or(0);
    if probes.iter().any(|p| p.1 == 0) || lines > f.n_lines || last > f.fine_steps() {
        return Err(Error::Argument(format!(
            "probes must have 1 <= line <= {} and step <= {}",
            f.n_lines,
            f.fine_steps()
        )));
    }
    let dt = f.dt();
    let mut gens: Vec<LineIncrements> = (0..lines).map(|i| LineIncrements::new(f, replica, i)).collect();
    let mut h = vec![0.0f64; lines];
    let mut out = vec![0.0; probes.len()];
    for k in 1..=last {
        let mut prev_old = 0.0;
        let mut prev_new = 0.0;
        for i in 0..lines {
            let (b, u) = gens[i].next();
            let old = h[i];
            let mut v = old + b;
            if i > 0 {
                v = v.max(prev_new);
                match f.scheme {
                    DpScheme::Grid => {}
                    DpScheme::BridgeCorrected => v = v.max(prev_old + b + bridge_max(prev_new - prev_old - b, dt, u)),
                }
            }
            h[i] = v;
            prev_old = old;
            prev_new = v;
        }
        for (o, p) in out.iter_mut().zip(probes) {
            if p.0 == k {
                *o = h[p.1 - 1];
            }
        }
    }
    Ok(out)
}

/// `B_line(t_k)`, `k = 0..=fine_steps`, of `replica` (`line ≥ 1`): the
/// increments the dynamic program consumes on that line.
pub fn brownian_path(f: &BrownianField, replica: u64, line: usize) -> Result<Vec<f64>> {
    f.validate()?;
    if line == 0 || line > f.n_lines {
        return Err(Error::Argument(format!("need 1 <= line <= {}, got {line}", f.n_lines)));
    }
    let mut g = LineIncrements::new(f, replica, line - 1);
    let mut out = Vec::with_capacity(f.fine_steps() + 1);
    let mut b = 0.0;
    out.push(b);
    for _ in 0..f.fine_steps() {
        b += g.next().0;
        out.push(b);
    }
    Ok(out)
}

/// `H(μ, n)` of `replica`.
pub fn sample_brownian_h(f: &BrownianField, replica: u64, mu: f64, n: usize) -> Result<f64> {
    let k = f.step_of(mu)?;
    Ok(brownian_dp(f, replica, &[(k, n)])?[0])
}

/// `count` replicas of `H(μ, n)` starting at replica `first`, in replica order.
pub fn sample_brownian_many(f: &BrownianField, mu: f64, n: usize, first: u64, count: usize) -> Result<Vec<f64>> {
    let k = f.step_of(mu)?;
    (0..count as u64).into_par_iter().map(|r| brownian_dp(f, first + r, &[(k, n)]).map(|v| v[0])).collect()
}

/// `(H(μ1, n1), H(μ2, n2))` of `replica` from one pass over one field.
pub fn sample_joint_points(f: &BrownianField, replica: u64, p1: (f64, usize), p2: (f64, usize)) -> Result<(f64, f64)> {
    let v = brownian_dp(f, replica, &[(f.step_of(p1.0)?, p1.1), (f.step_of(p2.0)?, p2.1)])?;
    Ok((v[0], v[1]))
}

/// `(H(μ1, n1), H(μ2, n2))` at the embedded points, from one field.
pub fn sample_joint(f: &BrownianField, replica: u64, emb: &ScalingEmbedding) -> Result<(f64, f64)> {
    let fp = emb.finite()?;
    if f.n_lines < fp.n2 || f.t_max + 0.5 * f.dt() < fp.mu2 {
        return Err(Error::Argument(format!(
            "field with {} lines on [0, {}] is too small for (mu2, n2) = ({}, {})",
            f.n_lines, f.t_max, fp.mu2, fp.n2
        )));
    }
    sample_joint_points(f, replica, (fp.mu1, fp.n1), (fp.mu2, fp.n2))
}

/// `count` replicas of [`sample_joint`] starting at replica `first`.
pub fn sample_joint_many(f: &BrownianField, emb: &ScalingEmbedding, first: u64, count: usize) -> Result<Vec<(f64, f64)>> {
    (0..count as u64).into_par_iter().map(|r| sample_joint(f, first + r, emb)).collect()
}

/// A field sized for the embedding: `n2` lines on `[0, μ2]` with base step
/// close to `dt`.
pub fn field_for_embedding(emb: &ScalingEmbedding, dt: f64, scheme: DpScheme, seed: u64) -> Result<BrownianField> {
    let fp = emb.finite()?;
    BrownianField::with_dt(fp.n2, fp.mu2, dt, scheme, seed)
}

/// `X_M = (h1 − 2t1M)/(t1M)^{1/3} + ν1²`, `Y_M = (h2 − 2t2M)/(t2M)^{1/3} + ν2²`.
pub fn rescale_to_limit(h1: f64, h2: f64, emb: &ScalingEmbedding) -> (f64, f64) {
    let a = emb.t1 * emb.m;
    let b = emb.t2 * emb.m;
    ((h1 - 2.0 * a) / a.cbrt() + emb.nu1 * emb.nu1, (h2 - 2.0 * b) / b.cbrt() + emb.nu2 * emb.nu2)
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and a
/// continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Argument("no samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("no samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Empirical joint CDF of pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf2D {
    samples: Vec<(f64, f64)>,
}

impl EmpiricalCdf2D {
    /// Stores the pairs sorted by the first coordinate.
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("no samples".into()));
        }
        if samples.iter().any(|(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(Error::Domain("samples must be finite".into()));
        }
        let mut s = samples.to_vec();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { samples: s })
    }

    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false: construction rejects empty input.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The pairs, sorted by the first coordinate.
    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Fraction of pairs with both coordinates at most the query.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let end = self.samples.partition_point(|p| p.0 <= x);
        self.samples[..end].iter().filter(|p| p.1 <= y).count() as f64 / self.samples.len() as f64
    }

    /// Binomial standard error `√(p(1−p)/n)` of [`EmpiricalCdf2D::eval`].
    pub fn std_error(&self, x: f64, y: f64) -> f64 {
        let p = self.eval(x, y);
        (p * (1.0 - p) / self.samples.len() as f64).sqrt()
    }
}

/// Result of the dt-halving rule.
#[derive(Debug, Clone, PartialEq)]
pub struct HalvingReport {
    /// The accepted field (its `dt()` is the accepted step).
    pub field: BrownianField,
    /// Samples of `H(μ, n)` on the accepted field, replicas `0..samples`.
    pub samples: Vec<f64>,
    /// `(dt, KS(dt, dt/2))` for every comparison made.
    pub history: Vec<(f64, f64)>,
    /// Whether the last comparison met the tolerance.
    pub converged: bool,
}

/// Halves `dt` until the two-sample KS distance between `H(μ, n)` on the field
/// and on its pathwise refinement (same replicas) drops below `tol`; the
/// coarser field of the first passing pair is accepted.
pub fn halving_rule(f: &BrownianField, mu: f64, n: usize, samples: usize, tol: f64, max_halvings: u32) -> Result<HalvingReport> {
    if !(tol > 0.0) || samples == 0 {
        return Err(Error::Argument("need tol > 0 and samples >= 1".into()));
    }
    let mut cur = *f;
    let mut coarse = sample_brownian_many(&cur, mu, n, 0, samples)?;
    let mut history = Vec::new();
    for _ in 0..=max_halvings {
        let fine_field = cur.halved();
        let fine = sample_brownian_many(&fine_field, mu, n, 0, samples)?;
        let d = ks_two_sample(&coarse, &fine)?;
        history.push((cur.dt(), d));
        if d < tol {
            return Ok(HalvingReport { field: cur, samples: coarse, history, converged: true });
        }
        cur = fine_field;
        coarse = fine;
    }
    Ok(HalvingReport { field: cur, samples: coarse, history, converged: false })
}

/// Convergence of rescaled geometric last-passage times to `H(μ, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeomBrownianReport {
    /// `(T, KS against the Brownian sampler, KS against the exact law)`.
    pub rows: Vec<(f64, f64, f64)>,
}

/// For each `T`, the KS distances between the rescaled `G([μT], n)` and (a) an
/// independent Brownian-sampler run and (b) the exact law `exact_cdf`.
pub fn geom_to_brownian_check<F: Fn(f64) -> f64 + Sync>(
    q: f64,
    t_grid: &[f64],
    mu: f64,
    n: usize,
    samples: usize,
    brownian: &BrownianField,
    exact_cdf: F,
    seed: u64,
) -> Result<GeomBrownianReport> {
    if n == 0 || n > 5 {
        return Err(Error::Argument(format!("need 1 <= n <= 5, got {n}")));
    }
    let reference = sample_brownian_many(brownian, mu, n, 0, samples)?;
    let mut rows = Vec::new();
    for &t in t_grid {
        let m = (mu * t).floor() as usize;
        if m == 0 {
            return Err(Error::Argument(format!("[mu T] = 0 at T = {t}")));
        }
        let w = GeomWeights { q, rows: n, cols: m, seed };
        let g: Vec<f64> = (0..samples as u64)
            .into_par_iter()
            .map(|r| sample_geom_lpp(&w, r, n, m).map(|g| rescale_geom(g, q, mu, t)))
            .collect::<Result<_>>()?;
        rows.push((t, ks_two_sample(&g, &reference)?, ks_statistic(&g, &exact_cdf)?));
    }
    Ok(GeomBrownianReport { rows })
}
