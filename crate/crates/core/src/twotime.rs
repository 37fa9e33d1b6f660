//! Block determinants `W^(1)`, `W^(2)` and the two-time distribution series `F_tt`.
//!
//! `F_tt(η1*, η2) = F2(η2) − Σ_{r,s,t} T¹_{r,s,t} − Σ_{r≥1,s,t} T²_{r,s,t}` where each
//! term integrates a block determinant over `η1 ∈ [η1*, ∞)` and over orthants
//! `x ∈ (−∞,0]^r`, `x′ ∈ (−∞,0]^s`, `y ∈ [0,∞)^{r or r−1}`, `y′ ∈ [0,∞)^t`.
//!
//! Evaluation strategy:
//!
//! * Gauss–Legendre in `η1` on `[η1*, η1* + eta1_cutoff]`.
//! * At each `η1` node the orthants are truncated where the kernels have
//!   decayed: `x ≥ −max(2, L − η1)` and `y ≤ max(2, (L − Δη)/α)` with
//!   `L = decay_level`.
//! * For inner dimension at most four, tensor Gauss–Legendre on those
//!   intervals, with every kernel value read from one [`KernelTable`] per
//!   `η1` node. Larger dimensions use randomized QMC with kernels evaluated at
//!   the sampled points.
//! * Every term is computed twice, with all node counts halved for the
//!   second pass; the difference is its integration error estimate.
//!
//! Terms are grouped into shells `r + s + t = k`. The reported truncation
//! bound is the summed magnitude of the last included shell plus all
//! integration error estimates.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{KernelEvalConfig, KernelTable, TwoTimeParams};
use crate::linalg::{det_in_place, factorial};
use crate::quad::{gauss_interval, qmc_integrate, Axis, QuadratureSpec};
use crate::tw::{f2_cdf, FredholmSpec};

/// Point vectors entering a block determinant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointConfig {
    /// `x ∈ (−∞, 0]^r`.
    pub x: Vec<f64>,
    /// `x′ ∈ (−∞, 0]^s`.
    pub xp: Vec<f64>,
    /// `y ∈ [0, ∞)^{r2}`.
    pub y: Vec<f64>,
    /// `y′ ∈ [0, ∞)^t`.
    pub yp: Vec<f64>,
}

/// The two sums of the `F_tt` series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SumKind {
    /// Terms with `W^(1)`, `r2 = r`, prefactor `1/((r!)² s! t!)`.
    First,
    /// Terms with `W^(2)`, `r2 = r − 1`, `r ≥ 1`, prefactor `1/(r!(r−1)! s! t!)`.
    Second,
}

impl PointConfig {
    /// Checks sign constraints, finiteness and the length of `y` for `kind`.
    pub fn validate(&self, kind: SumKind) -> Result<()> {
        let r = self.x.len();
        let want = match kind {
            SumKind::First => r,
            SumKind::Second => {
                if r == 0 {
                    return Err(Error::Argument("W2 needs r >= 1".into()));
                }
                r - 1
            }
        };
        if self.y.len() != want {
            return Err(Error::Argument(format!("y has length {}, expected {want}", self.y.len())));
        }
        if self.x.iter().chain(&self.xp).any(|v| !(v.is_finite() && *v <= 0.0)) {
            return Err(Error::Argument("x and x' entries must be finite and <= 0".into()));
        }
        if self.y.iter().chain(&self.yp).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Argument("y and y' entries must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Row {
    Phi,
    Psi,
}

fn row_layout(kind: SumKind, r: usize, s: usize, r2: usize, t: usize) -> Vec<Row> {
    let zero = match kind {
        SumKind::First => Row::Psi,
        SumKind::Second => Row::Phi,
    };
    let mut rows = vec![Row::Psi; r];
    rows.extend(std::iter::repeat(Row::Phi).take(s));
    rows.push(zero);
    rows.extend(std::iter::repeat(Row::Phi).take(r2));
    rows.extend(std::iter::repeat(Row::Psi).take(t));
    rows
}

fn fill_matrix(table: &KernelTable, rows: &[Row], pts: &[usize], buf: &mut [f64]) {
    let m = pts.len();
    for (i, (row, pi)) in rows.iter().zip(pts).enumerate() {
        for (j, pj) in pts.iter().enumerate() {
            buf[i * m + j] = match row {
                Row::Phi => table.phi_at(*pi, *pj),
                Row::Psi => table.psi_at(*pi, *pj),
            };
        }
    }
}

fn block_det(p: &TwoTimeParams, c: &PointConfig, kind: SumKind, cfg: &KernelEvalConfig) -> Result<f64> {
    c.validate(kind)?;
    let mut points = c.x.clone();
    points.extend(&c.xp);
    points.push(0.0);
    points.extend(&c.y);
    points.extend(&c.yp);
    let table = KernelTable::new(p, &points, cfg)?;
    let rows = row_layout(kind, c.x.len(), c.xp.len(), c.y.len(), c.yp.len());
    let idx: Vec<usize> = (0..points.len()).collect();
    let m = points.len();
    let mut buf = vec![0.0; m * m];
    fill_matrix(&table, &rows, &idx, &mut buf);
    Ok(det_in_place(&mut buf, m))
}

/// `W^(1)_{r,s,r,t}(x, x′, y, y′)`, of size `2r + s + t + 1`.
pub fn w1_det(p: &TwoTimeParams, c: &PointConfig, cfg: &KernelEvalConfig) -> Result<f64> {
    block_det(p, c, SumKind::First, cfg)
}

/// `W^(2)_{r,s,r−1,t}(x, x′, y, y′)`, of size `2r + s + t`; requires `r ≥ 1`.
pub fn w2_det(p: &TwoTimeParams, c: &PointConfig, cfg: &KernelEvalConfig) -> Result<f64> {
    block_det(p, c, SumKind::Second, cfg)
}

/// The raw matrix of `W^(1)` or `W^(2)`, row-major, for inspection and oracles.
pub fn block_matrix(p: &TwoTimeParams, c: &PointConfig, kind: SumKind, cfg: &KernelEvalConfig) -> Result<(Vec<f64>, usize)> {
    c.validate(kind)?;
    let mut points = c.x.clone();
    points.extend(&c.xp);
    points.push(0.0);
    points.extend(&c.y);
    points.extend(&c.yp);
    let table = KernelTable::new(p, &points, cfg)?;
    let rows = row_layout(kind, c.x.len(), c.xp.len(), c.y.len(), c.yp.len());
    let idx: Vec<usize> = (0..points.len()).collect();
    let m = points.len();
    let mut buf = vec![0.0; m * m];
    fill_matrix(&table, &rows, &idx, &mut buf);
    Ok((buf, m))
}

/// Truncation and quadrature settings for the `F_tt` series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    /// Largest `r`.
    pub rmax: usize,
    /// Largest `s`.
    pub smax: usize,
    /// Largest `t`.
    pub tmax: usize,
    /// Largest shell `r + s + t`.
    pub shell_max: usize,
    /// Length of the `η1` interval `[η1*, η1* + eta1_cutoff]`.
    pub eta1_cutoff: f64,
    /// Shells whose summed magnitude falls below this end the series early.
    pub term_tol: f64,
    /// Gauss nodes in `η1`.
    pub eta_nodes: usize,
    /// Gauss nodes per orthant axis.
    pub inner_nodes: usize,
    /// Airy-argument level beyond which the orthant integrands are dropped.
    pub decay_level: f64,
    /// Sobol points per shift for inner dimensions above four.
    pub qmc_points: usize,
    /// Seed of the QMC shifts.
    pub seed: u64,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self {
            rmax: 2,
            smax: 2,
            tmax: 2,
            shell_max: 2,
            eta1_cutoff: 12.0,
            term_tol: 1e-10,
            eta_nodes: 24,
            inner_nodes: 24,
            decay_level: 10.0,
            qmc_points: 1 << 14,
            seed: 0x5eed,
        }
    }
}

impl TruncationSpec {
    /// Checks positivity of tolerances, lengths and node counts.
    pub fn validate(&self) -> Result<()> {
        if !(self.term_tol > 0.0) || !(self.eta1_cutoff > 0.0) || !(self.decay_level > 0.0) {
            return Err(Error::Argument("term_tol, eta1_cutoff and decay_level must be positive".into()));
        }
        if self.eta_nodes < 4 || self.inner_nodes < 4 || self.qmc_points == 0 {
            return Err(Error::Argument("eta_nodes and inner_nodes must be at least 4".into()));
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        Self { eta_nodes: self.eta_nodes / 2, inner_nodes: self.inner_nodes / 2, qmc_points: (self.qmc_points / 2).max(1), ..*self }
    }
}

/// Identity of one series term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TermId {
    /// Number of `x` (and `y`) points.
    pub r: usize,
    /// Number of `x′` points.
    pub s: usize,
    /// Number of `y′` points.
    pub t: usize,
    /// Which sum the term belongs to.
    pub kind: SumKind,
}

impl TermId {
    /// Length of `y`.
    pub fn r2(&self) -> usize {
        match self.kind {
            SumKind::First => self.r,
            SumKind::Second => self.r - 1,
        }
    }

    /// Number of orthant variables.
    pub fn inner_dim(&self) -> usize {
        self.r + self.s + self.r2() + self.t
    }

    /// `r + s + t`.
    pub fn shell(&self) -> usize {
        self.r + self.s + self.t
    }

    /// `1/((r!)² s! t!)` or `1/(r!(r−1)! s! t!)`.
    pub fn prefactor(&self) -> f64 {
        1.0 / (factorial(self.r) * factorial(self.r2()) * factorial(self.s) * factorial(self.t))
    }

    fn validate(&self) -> Result<()> {
        if self.kind == SumKind::Second && self.r == 0 {
            return Err(Error::Argument("second-sum terms need r >= 1".into()));
        }
        Ok(())
    }
}

/// A term value with its integration error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermValue {
    /// Which term.
    pub id: TermId,
    /// Contribution to `F_tt`, including the prefactor and the leading minus sign.
    pub value: f64,
    /// Difference to the evaluation with all node counts halved.
    pub error: f64,
}

struct NodeGrid {
    table: KernelTable,
    x_weights: Vec<f64>,
    y_weights: Vec<f64>,
}

fn orthant_ranges(p: &TwoTimeParams, trunc: &TruncationSpec) -> (f64, f64) {
    let xl = (trunc.decay_level - p.eta1).max(2.0);
    let yl = ((trunc.decay_level - p.deta) / p.alpha).max(2.0);
    (xl, yl)
}

fn node_grid(p: &TwoTimeParams, trunc: &TruncationSpec, cfg: &KernelEvalConfig) -> Result<NodeGrid> {
    let (xl, yl) = orthant_ranges(p, trunc);
    let (xs, xw) = gauss_interval(-xl, 0.0, trunc.inner_nodes)?;
    let (ys, yw) = gauss_interval(0.0, yl, trunc.inner_nodes)?;
    let mut points = xs;
    points.extend(ys);
    points.push(0.0);
    let table = KernelTable::new(p, &points, cfg)?;
    Ok(NodeGrid { table, x_weights: xw, y_weights: yw })
}

fn tensor_term(grid: &NodeGrid, id: &TermId) -> f64 {
    let n = grid.x_weights.len();
    let zero = 2 * n;
    let dim = id.inner_dim();
    let rows = row_layout(id.kind, id.r, id.s, id.r2(), id.t);
    let m = dim + 1;
    let n_neg = id.r + id.s;
    let mut idx = vec![0usize; dim];
    let mut pts = vec![0usize; m];
    let mut buf = vec![0.0; m * m];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            if d < n_neg {
                pts[d] = i;
                w *= grid.x_weights[i];
            } else {
                pts[d + 1] = n + i;
                w *= grid.y_weights[i];
            }
        }
        pts[n_neg] = zero;
        fill_matrix(&grid.table, &rows, &pts, &mut buf);
        total += w * det_in_place(&mut buf, m);
        let mut d = 0;
        loop {
            if d == dim {
                return total;
            }
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn qmc_term(p: &TwoTimeParams, id: &TermId, trunc: &TruncationSpec, cfg: &KernelEvalConfig) -> Result<f64> {
    let (xl, yl) = orthant_ranges(p, trunc);
    let n_neg = id.r + id.s;
    let dim = id.inner_dim();
    let axes: Vec<Axis> = (0..dim).map(|d| if d < n_neg { Axis::Interval(-xl, 0.0) } else { Axis::Interval(0.0, yl) }).collect();
    let rows = row_layout(id.kind, id.r, id.s, id.r2(), id.t);
    let failure = std::sync::Mutex::new(None);
    let f = |u: &[f64]| -> f64 {
        let mut points: Vec<f64> = u[..n_neg].to_vec();
        points.push(0.0);
        points.extend(&u[n_neg..]);
        match KernelTable::new(p, &points, cfg) {
            Ok(table) => {
                let m = points.len();
                let idx: Vec<usize> = (0..m).collect();
                let mut buf = vec![0.0; m * m];
                fill_matrix(&table, &rows, &idx, &mut buf);
                det_in_place(&mut buf, m)
            }
            Err(e) => {
                *failure.lock().expect("qmc failure slot poisoned") = Some(e);
                0.0
            }
        }
    };
    let (v, _) = qmc_integrate(f, &axes, &QuadratureSpec::default(), trunc.qmc_points, trunc.seed)?;
    if let Some(e) = failure.into_inner().expect("qmc failure slot poisoned") {
        return Err(e);
    }
    Ok(v)
}

fn check_eta_tail(base: &TwoTimeParams, eta1_star: f64, trunc: &TruncationSpec) -> Result<()> {
    let top = base.with_eta1(eta1_star + trunc.eta1_cutoff)?;
    let k = crate::kernels::phi3(&top, 0.0, 0.0).abs();
    if k > trunc.term_tol {
        return Err(Error::Truncation(format!(
            "kernel magnitude {k} at eta1 = {} exceeds term_tol; increase eta1_cutoff",
            eta1_star + trunc.eta1_cutoff
        )));
    }
    Ok(())
}

/// Integrals `∫ dη1 (orthant integral)` for several terms with one set of node counts.
fn integrate_terms(base: &TwoTimeParams, ids: &[TermId], eta1_star: f64, trunc: &TruncationSpec, cfg: &KernelEvalConfig) -> Result<Vec<f64>> {
    let (etas, ws) = gauss_interval(eta1_star, eta1_star + trunc.eta1_cutoff, trunc.eta_nodes)?;
    let per_node: Vec<Vec<f64>> = etas
        .par_iter()
        .map(|eta| -> Result<Vec<f64>> {
            let p = base.with_eta1(*eta)?;
            let grid = if ids.iter().any(|id| id.inner_dim() <= 4) { Some(node_grid(&p, trunc, cfg)?) } else { None };
            ids.iter()
                .map(|id| match &grid {
                    Some(g) if id.inner_dim() <= 4 => Ok(tensor_term(g, id)),
                    _ => qmc_term(&p, id, trunc, cfg),
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; ids.len()];
    for (vals, w) in per_node.iter().zip(&ws) {
        for (o, v) in out.iter_mut().zip(vals) {
            *o += w * v;
        }
    }
    Ok(out)
}

fn evaluate_terms(base: &TwoTimeParams, ids: &[TermId], eta1_star: f64, trunc: &TruncationSpec, cfg: &KernelEvalConfig) -> Result<Vec<TermValue>> {
    trunc.validate()?;
    if !eta1_star.is_finite() {
        return Err(Error::Domain(format!("eta1_star must be finite, got {eta1_star}")));
    }
    for id in ids {
        id.validate()?;
    }
    check_eta_tail(base, eta1_star, trunc)?;
    let fine = integrate_terms(base, ids, eta1_star, trunc, cfg)?;
    let coarse = integrate_terms(base, ids, eta1_star, &trunc.halved(), cfg)?;
    Ok(ids
        .iter()
        .zip(fine.iter().zip(&coarse))
        .map(|(id, (f, c))| {
            let pre = -id.prefactor();
            TermValue { id: *id, value: pre * f, error: (pre * (f - c)).abs() }
        })
        .collect())
}

/// One term of the series with its error estimate.
///
/// `base` supplies `t1, t2, ν1, ν2, η2`; its `η1` is replaced by the
/// integration variable.
pub fn ftt_term_estimate(
    base: &TwoTimeParams,
    id: TermId,
    eta1_star: f64,
    trunc: &TruncationSpec,
    cfg: &KernelEvalConfig,
) -> Result<TermValue> {
    Ok(evaluate_terms(base, &[id], eta1_star, trunc, cfg)?[0])
}

/// The contribution of term `(r, s, t, kind)` to `F_tt`, including its
/// factorial prefactor and the leading minus sign.
pub fn ftt_term(
    base: &TwoTimeParams,
    r: usize,
    s: usize,
    t: usize,
    kind: SumKind,
    eta1_star: f64,
    trunc: &TruncationSpec,
    cfg: &KernelEvalConfig,
) -> Result<f64> {
    Ok(ftt_term_estimate(base, TermId { r, s, t, kind }, eta1_star, trunc, cfg)?.value)
}

/// All terms admitted by `trunc` in shell `k`.
pub fn shell_terms(k: usize, trunc: &TruncationSpec) -> Vec<TermId> {
    let mut ids = Vec::new();
    for kind in [SumKind::First, SumKind::Second] {
        for r in 0..=k.min(trunc.rmax) {
            if kind == SumKind::Second && r == 0 {
                continue;
            }
            for s in 0..=(k - r).min(trunc.smax) {
                let t = k - r - s;
                if t <= trunc.tmax {
                    ids.push(TermId { r, s, t, kind });
                }
            }
        }
    }
    ids
}

/// Result of the truncated series.
#[derive(Debug, Clone, PartialEq)]
pub struct FttResult {
    /// `F2(η2)` minus all included terms.
    pub value: f64,
    /// Summed magnitude of the last included shell plus all integration error estimates.
    pub trunc_bound: f64,
    /// `F2(η2)`.
    pub f2_eta2: f64,
    /// Every included term.
    pub terms: Vec<TermValue>,
    /// `Σ |term|` per shell, shell `k` at index `k`.
    pub shell_magnitudes: Vec<f64>,
}

/// The truncated two-time distribution `F_tt(η1*, η2; α, ν1, ν2)`.
///
/// `base` supplies `t1, t2, ν1, ν2, η2`; its `η1` is ignored.
pub fn ftt(base: &TwoTimeParams, eta1_star: f64, trunc: &TruncationSpec, cfg: &KernelEvalConfig) -> Result<FttResult> {
    trunc.validate()?;
    let f2_eta2 = f2_cdf(base.eta2, &FredholmSpec::default())?;
    let mut value = f2_eta2;
    let mut terms = Vec::new();
    let mut shell_magnitudes = Vec::new();
    let mut error_sum = 0.0;
    for k in 0..=trunc.shell_max {
        let ids = shell_terms(k, trunc);
        if ids.is_empty() {
            break;
        }
        let vals = evaluate_terms(base, &ids, eta1_star, trunc, cfg)?;
        let mag: f64 = vals.iter().map(|v| v.value.abs()).sum();
        for v in &vals {
            value += v.value;
            error_sum += v.error;
        }
        terms.extend(vals);
        shell_magnitudes.push(mag);
        if mag < trunc.term_tol {
            break;
        }
    }
    let last = shell_magnitudes.last().copied().unwrap_or(0.0);
    Ok(FttResult { value, trunc_bound: last + error_sum, f2_eta2, terms, shell_magnitudes })
}
