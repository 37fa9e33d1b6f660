//! Two-time scaling parameters and the limiting kernels `φ1, ψ1, φ2, φ3, φ, ψ`.
//!
//! Every kernel has two evaluation paths:
//!
//! * the Airy form, a `τ`-integral of products of Airy kernels computed by
//!   Gauss–Legendre quadrature on a truncated half-line;
//! * the contour form, an iterated integral over vertical lines
//!   `Γ_d = {d + it}` evaluated by trapezoid rules.
//!
//! The four-fold contour integral for `φ1` and `ψ1`
//!
//! ```text
//! α/(2πi)⁴ ∫dz ∫dw ∫dζ ∫dω  F(z) G(w) / ((z − αw)(z − ζ)(w − ω) H(ζ) K(ω))
//! ```
//!
//! factorises once the inner Cauchy transforms
//! `S1(z) = (1/2πi)∫ dζ /((z − ζ)H(ζ))` and `S2(w) = (1/2πi)∫ dω /((w − ω)K(ω))`
//! are tabulated at the outer nodes, so the cost is quadratic in the number
//! of line nodes. The relative position of the `z` and `w` lines selects the
//! kernel: `α d3 − d1 ≥ 1` gives `φ1` and `d1 − α d3 ≥ 1` gives `ψ1`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_finite, Error, Result};
use crate::quad::{gauss_legendre, halfline_rule, line_nodes, ContourNode, ContourSpec, QuadratureSpec};
use crate::specfun::{airy_ai, airy_kernel_from_values, airy_kernel_unchecked, airy_pair};

/// Scaling parameters of the two-time problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTimeParams {
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
    /// `Δt = t2 − t1`.
    pub dt: f64,
    /// `α = (t1/Δt)^{1/3}`.
    pub alpha: f64,
    /// `Δν = ν2 (t2/Δt)^{2/3} − ν1 (t1/Δt)^{2/3}`.
    pub dnu: f64,
    /// `λ1 = η1 − ν1²`.
    pub lambda1: f64,
    /// `λ2 = η2 − ν2²`.
    pub lambda2: f64,
    /// `Δλ = λ2 (t2/Δt)^{1/3} − λ1 (t1/Δt)^{1/3}`.
    pub dlambda: f64,
    /// `Δη = Δλ + Δν²`.
    pub deta: f64,
}

/// `Δη` straight from the time ratios, without going through `λ` or `α`.
pub fn deta_direct(t1: f64, t2: f64, nu1: f64, nu2: f64, eta1: f64, eta2: f64) -> f64 {
    let dt = t2 - t1;
    let r1 = t1 / dt;
    let r2 = t2 / dt;
    let dnu = nu2 * r2.powf(2.0 / 3.0) - nu1 * r1.powf(2.0 / 3.0);
    (eta2 - nu2 * nu2) * r2.powf(1.0 / 3.0) - (eta1 - nu1 * nu1) * r1.powf(1.0 / 3.0) + dnu * dnu
}

/// Builds [`TwoTimeParams`] and checks that both expressions for `Δη` agree.
pub fn derive_params(t1: f64, t2: f64, nu1: f64, nu2: f64, eta1: f64, eta2: f64) -> Result<TwoTimeParams> {
    for (name, v) in [("t1", t1), ("t2", t2), ("nu1", nu1), ("nu2", nu2), ("eta1", eta1), ("eta2", eta2)] {
        check_finite(name, v)?;
    }
    if !(t1 > 0.0) || !(t2 > t1) {
        return Err(Error::Domain(format!("need 0 < t1 < t2, got t1 = {t1}, t2 = {t2}")));
    }
    let dt = t2 - t1;
    let alpha = (t1 / dt).cbrt();
    let beta = (alpha * alpha * alpha + 1.0).cbrt();
    let dnu = nu2 * beta * beta - nu1 * alpha * alpha;
    let lambda1 = eta1 - nu1 * nu1;
    let lambda2 = eta2 - nu2 * nu2;
    let dlambda = lambda2 * beta - lambda1 * alpha;
    let deta = dlambda + dnu * dnu;
    let direct = deta_direct(t1, t2, nu1, nu2, eta1, eta2);
    let scale = 1.0 + (lambda2 * beta).abs() + (lambda1 * alpha).abs() + dnu * dnu;
    if (direct - deta).abs() > 1e-13 * scale {
        return Err(Error::Consistency(format!("delta eta mismatch: {deta} vs {direct}")));
    }
    Ok(TwoTimeParams { t1, t2, nu1, nu2, eta1, eta2, dt, alpha, dnu, lambda1, lambda2, dlambda, deta })
}

impl TwoTimeParams {
    /// The same times and offsets with a different `η1`.
    pub fn with_eta1(&self, eta1: f64) -> Result<Self> {
        derive_params(self.t1, self.t2, self.nu1, self.nu2, eta1, self.eta2)
    }

    /// The same times and offsets with a different `η2`.
    pub fn with_eta2(&self, eta2: f64) -> Result<Self> {
        derive_params(self.t1, self.t2, self.nu1, self.nu2, self.eta1, eta2)
    }
}

/// Quadrature settings for kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEvalConfig {
    /// Rule for the `τ`-integrals of the Airy forms.
    pub tau_quad: QuadratureSpec,
    /// Lines for the contour forms.
    pub contour: ContourSpec,
}

impl Default for KernelEvalConfig {
    fn default() -> Self {
        Self { tau_quad: QuadratureSpec::default(), contour: ContourSpec::default() }
    }
}

/// Largest tolerated magnitude of a `τ`-integrand at the truncation point.
pub const TAU_ENDPOINT_TOL: f64 = 1e-13;

/// Largest tolerated imaginary part of a contour evaluation.
pub const CONTOUR_IMAG_TOL: f64 = 1e-9;

/// `φ1` (`sign = +1`) or `ψ1` (`sign = −1`) on the grid `xs × ys`, row-major in
/// `x`, together with a coarse-versus-fine error estimate.
///
/// The integrand is `e^{s c τ} K_Ai(η1 − sτ, η1 − y) K_Ai(Δη + sατ, Δη + αx)` with
/// `c = ν1 − αΔν` and prefactor `−sα e^{αΔν x − ν1 y}`.
pub fn tau_kernel_grid(p: &TwoTimeParams, xs: &[f64], ys: &[f64], sign: f64, spec: &QuadratureSpec) -> Result<(Vec<f64>, f64)> {
    spec.validate()?;
    for v in xs.iter().chain(ys) {
        check_finite("kernel argument", *v)?;
    }
    let s = sign.signum();
    let c = p.nu1 - p.alpha * p.dnu;
    let yargs: Vec<(f64, f64, f64)> = ys
        .iter()
        .map(|y| {
            let a = p.eta1 - y;
            let (ai, aip) = airy_pair(a);
            (a, ai, aip)
        })
        .collect();
    let xargs: Vec<(f64, f64, f64)> = xs
        .iter()
        .map(|x| {
            let a = p.deta + p.alpha * x;
            let (ai, aip) = airy_pair(a);
            (a, ai, aip)
        })
        .collect();
    let column = |tau: f64| -> (Vec<f64>, Vec<f64>) {
        let a = p.eta1 - s * tau;
        let (ai, aip) = airy_pair(a);
        let b = p.deta + s * p.alpha * tau;
        let (bi, bip) = airy_pair(b);
        let e = (s * c * tau).exp();
        let u = yargs.iter().map(|(y, yi, yip)| e * airy_kernel_from_values(a, ai, aip, *y, *yi, *yip)).collect();
        let v = xargs.iter().map(|(x, xi, xip)| airy_kernel_from_values(b, bi, bip, *x, *xi, *xip)).collect();
        (u, v)
    };
    let (ue, ve) = column(spec.semiinf_cutoff);
    let edge = ue.iter().map(|u| u.abs()).fold(0.0, f64::max) * ve.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(edge <= TAU_ENDPOINT_TOL) {
        return Err(Error::Truncation(format!(
            "tau integrand magnitude {edge} at cutoff {} exceeds {TAU_ENDPOINT_TOL}",
            spec.semiinf_cutoff
        )));
    }
    let accumulate = |n: usize| -> Result<Vec<f64>> {
        let (taus, ws) = halfline_rule(n, spec)?;
        let mut acc = vec![0.0; xs.len() * ys.len()];
        for (tau, w) in taus.iter().zip(&ws) {
            let (u, v) = column(*tau);
            for (i, vi) in v.iter().enumerate() {
                let row = &mut acc[i * ys.len()..(i + 1) * ys.len()];
                let f = w * vi;
                for (r, uj) in row.iter_mut().zip(&u) {
                    *r += f * uj;
                }
            }
        }
        Ok(acc)
    };
    let coarse = accumulate(spec.nodes_per_axis)?;
    let mut fine = accumulate(2 * spec.nodes_per_axis)?;
    let mut err: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let pre = -s * p.alpha * (p.alpha * p.dnu * x - p.nu1 * y).exp();
            let k = i * ys.len() + j;
            err = err.max((pre * (fine[k] - coarse[k])).abs());
            fine[k] *= pre;
        }
    }
    if fine.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("tau integral not finite".into()));
    }
    Ok((fine, err))
}

/// `φ1(x, y)` from its Airy-kernel `τ`-integral.
pub fn phi1(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    Ok(tau_kernel_grid(p, &[x], &[y], 1.0, &cfg.tau_quad)?.0[0])
}

/// `ψ1(x, y)` from its Airy-kernel `τ`-integral.
pub fn psi1(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    Ok(tau_kernel_grid(p, &[x], &[y], -1.0, &cfg.tau_quad)?.0[0])
}

/// `φ2(x, y) = α e^{αΔν(x−y)} K_Ai(Δη + αx, Δη + αy)`.
pub fn phi2(p: &TwoTimeParams, x: f64, y: f64) -> f64 {
    p.alpha * (p.alpha * p.dnu * (x - y)).exp() * airy_kernel_unchecked(p.deta + p.alpha * x, p.deta + p.alpha * y)
}

/// `φ3(x, y) = e^{ν1(x−y)} K_Ai(η1 − x, η1 − y)`.
pub fn phi3(p: &TwoTimeParams, x: f64, y: f64) -> f64 {
    (p.nu1 * (x - y)).exp() * airy_kernel_unchecked(p.eta1 - x, p.eta1 - y)
}

/// `φ = φ1 + 1(y ≥ 0)φ2 − 1(x < 0)φ3`.
pub fn phi(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    let mut v = phi1(p, x, y, cfg)?;
    if y >= 0.0 {
        v += phi2(p, x, y);
    }
    if x < 0.0 {
        v -= phi3(p, x, y);
    }
    Ok(v)
}

/// `ψ = −ψ1 − 1(y > 0)φ2 + 1(x ≤ 0)φ3`.
pub fn psi(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    let mut v = -psi1(p, x, y, cfg)?;
    if y > 0.0 {
        v -= phi2(p, x, y);
    }
    if x <= 0.0 {
        v += phi3(p, x, y);
    }
    Ok(v)
}

/// The kernels `φ` and `ψ` on all pairs of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    /// The points, in the order used by the matrices.
    pub points: Vec<f64>,
    /// `φ(points[i], points[j])` at index `i * len + j`.
    pub phi: Vec<f64>,
    /// `ψ(points[i], points[j])` at index `i * len + j`.
    pub psi: Vec<f64>,
    /// Largest coarse-versus-fine difference of the `τ`-integrals.
    pub tau_error: f64,
}

impl KernelTable {
    /// Tabulates `φ` and `ψ` on `points × points`.
    pub fn new(p: &TwoTimeParams, points: &[f64], cfg: &KernelEvalConfig) -> Result<Self> {
        let n = points.len();
        let (p1, e1) = tau_kernel_grid(p, points, points, 1.0, &cfg.tau_quad)?;
        let (q1, e2) = tau_kernel_grid(p, points, points, -1.0, &cfg.tau_quad)?;
        let mut phi_m = p1;
        let mut psi_m: Vec<f64> = q1.iter().map(|v| -v).collect();
        for (i, x) in points.iter().enumerate() {
            for (j, y) in points.iter().enumerate() {
                let k = i * n + j;
                let f2 = phi2(p, *x, *y);
                let f3 = phi3(p, *x, *y);
                if *y >= 0.0 {
                    phi_m[k] += f2;
                }
                if *x < 0.0 {
                    phi_m[k] -= f3;
                }
                if *y > 0.0 {
                    psi_m[k] -= f2;
                }
                if *x <= 0.0 {
                    psi_m[k] += f3;
                }
            }
        }
        Ok(Self { points: points.to_vec(), phi: phi_m, psi: psi_m, tau_error: e1.max(e2) })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the table is empty.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `φ(points[i], points[j])`.
    pub fn phi_at(&self, i: usize, j: usize) -> f64 {
        self.phi[i * self.points.len() + j]
    }

    /// `ψ(points[i], points[j])`.
    pub fn psi_at(&self, i: usize, j: usize) -> f64 {
        self.psi[i * self.points.len() + j]
    }
}

/// Which of the two four-fold contour kernels to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FourFoldKernel {
    /// `φ1`, with the `w`-line to the right of `z/α`.
    Phi1,
    /// `ψ1`, with the `w`-line to the left of `z/α`.
    Psi1,
}

fn check_decay(p: &TwoTimeParams, c: &ContourSpec) -> Result<()> {
    c.validate()?;
    let rates = [
        ("d1 - nu1", c.d1 - p.nu1),
        ("d2 + nu1", c.d2 + p.nu1),
        ("d3 - dnu", c.d3 - p.dnu),
        ("d4 + dnu", c.d4 + p.dnu),
    ];
    for (name, r) in rates {
        if !(r > 0.0) {
            return Err(Error::Argument(format!("contour offsets give no Gaussian decay: {name} = {r}")));
        }
    }
    Ok(())
}

/// Offsets satisfying the ordering and decay conditions of `which`, starting
/// from `base` and moving lines outwards only as far as needed (margin 1).
pub fn admissible_contour(p: &TwoTimeParams, which: FourFoldKernel, base: &ContourSpec) -> ContourSpec {
    let mut c = *base;
    c.d1 = c.d1.max(p.nu1 + 1.0);
    c.d2 = c.d2.max(1.0 - p.nu1);
    c.d3 = c.d3.max(p.dnu + 1.0);
    c.d4 = c.d4.max(1.0 - p.dnu);
    match which {
        FourFoldKernel::Phi1 => c.d3 = c.d3.max((c.d1 + 1.0) / p.alpha),
        FourFoldKernel::Psi1 => c.d1 = c.d1.max(p.alpha * c.d3 + 1.0),
    }
    c
}

/// Weighted integrand values on a line, with the endpoint guard applied.
fn line_values<F: Fn(Complex64) -> Complex64>(f: F, offset: f64, c: &ContourSpec) -> Result<Vec<(ContourNode, Complex64)>> {
    let nodes = line_nodes(offset, c.line_halflength, c.line_nodes);
    let last = nodes.len() - 1;
    nodes
        .into_iter()
        .enumerate()
        .map(|(j, node)| {
            let v = f(node.z);
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::Numeric(format!("contour integrand not finite at {}", node.z)));
            }
            if (j == 0 || j == last) && v.norm() > c.endpoint_tol {
                return Err(Error::Truncation(format!(
                    "contour integrand magnitude {} at endpoint {} exceeds {}",
                    v.norm(),
                    node.z,
                    c.endpoint_tol
                )));
            }
            Ok((node, v))
        })
        .collect()
}

/// `(1/2πi)∫ g(ζ)/(z − ζ) dζ` at every node of an outer line.
fn cauchy_transform(outer: &[(ContourNode, Complex64)], inner: &[(ContourNode, Complex64)]) -> Vec<Complex64> {
    outer
        .iter()
        .map(|(o, _)| inner.iter().map(|(i, g)| i.w * g / (o.z - i.z)).sum())
        .collect()
}

fn real_part(v: Complex64, what: &str) -> Result<f64> {
    if !(v.im.abs() < CONTOUR_IMAG_TOL) {
        return Err(Error::Consistency(format!("{what}: imaginary part {} exceeds {CONTOUR_IMAG_TOL}", v.im)));
    }
    Ok(v.re)
}

fn cubic(z: Complex64, quad: f64, lin: f64) -> Complex64 {
    z * z * z / 3.0 + quad * z * z + lin * z
}

/// Four-fold contour form of `φ1` or `ψ1` with the offsets of `c`.
pub fn fourfold_contour(p: &TwoTimeParams, x: f64, y: f64, which: FourFoldKernel, c: &ContourSpec) -> Result<f64> {
    check_finite("x", x)?;
    check_finite("y", y)?;
    check_decay(p, c)?;
    let sep = p.alpha * c.d3 - c.d1;
    match which {
        FourFoldKernel::Phi1 if sep < 1.0 - 1e-12 => {
            return Err(Error::Argument(format!("phi1 contour needs alpha*d3 - d1 >= 1, got {sep}")));
        }
        FourFoldKernel::Psi1 if -sep < 1.0 - 1e-12 => {
            return Err(Error::Argument(format!("psi1 contour needs d1 - alpha*d3 >= 1, got {}", -sep)));
        }
        _ => {}
    }
    let zeta = line_values(|s| (-cubic(s, -p.nu1, -(p.lambda1 - y))).exp(), -c.d2, c)?;
    let omega = line_values(|s| (-cubic(s, -p.dnu, -(p.dlambda + p.alpha * x))).exp(), -c.d4, c)?;
    let zs = line_values(|z| cubic(z, -p.nu1, -p.lambda1).exp(), c.d1, c)?;
    let ws = line_values(|w| cubic(w, -p.dnu, -p.dlambda).exp(), c.d3, c)?;
    let s1 = cauchy_transform(&zs, &zeta);
    let s2 = cauchy_transform(&ws, &omega);
    let f: Vec<(Complex64, Complex64)> = zs.iter().zip(&s1).map(|((n, g), s)| (n.z, n.w * g * s)).collect();
    let g: Vec<(Complex64, Complex64)> = ws.iter().zip(&s2).map(|((n, g), s)| (p.alpha * n.z, n.w * g * s)).collect();
    for edge in [f[0].1, f[f.len() - 1].1, g[0].1, g[g.len() - 1].1] {
        if edge.norm() > c.endpoint_tol {
            return Err(Error::Truncation(format!("composed contour integrand {} exceeds endpoint tolerance", edge.norm())));
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (z, fz) in &f {
        let mut inner = Complex64::new(0.0, 0.0);
        for (aw, gw) in &g {
            inner += gw / (z - aw);
        }
        total += fz * inner;
    }
    real_part(p.alpha * total, "four-fold contour")
}

/// Contour form of `φ1` using `cfg.contour`; requires `α d3 − d1 ≥ 1`.
pub fn phi1_contour(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    fourfold_contour(p, x, y, FourFoldKernel::Phi1, &cfg.contour)
}

/// Contour form of `ψ1` using `cfg.contour`; requires `d1 − α d3 ≥ 1`.
pub fn psi1_contour(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    fourfold_contour(p, x, y, FourFoldKernel::Psi1, &cfg.contour)
}

fn twofold(
    outer_exp: impl Fn(Complex64) -> Complex64,
    inner_exp: impl Fn(Complex64) -> Complex64,
    d_out: f64,
    d_in: f64,
    c: &ContourSpec,
) -> Result<Complex64> {
    let inner = line_values(|s| (-inner_exp(s)).exp(), -d_in, c)?;
    let outer = line_values(|z| outer_exp(z).exp(), d_out, c)?;
    let s = cauchy_transform(&outer, &inner);
    Ok(outer.iter().zip(&s).map(|((n, g), s)| n.w * g * s).sum())
}

/// Two-fold contour form of `φ2` over `Γ_{d3} × Γ_{−d4}`.
pub fn phi2_contour(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    check_finite("x", x)?;
    check_finite("y", y)?;
    let c = &cfg.contour;
    check_decay(p, c)?;
    let v = twofold(
        |w| cubic(w, -p.dnu, -(p.dlambda + p.alpha * y)),
        |s| cubic(s, -p.dnu, -(p.dlambda + p.alpha * x)),
        c.d3,
        c.d4,
        c,
    )?;
    real_part(p.alpha * v, "phi2 contour")
}

/// Two-fold contour form of `φ3` over `Γ_{d1} × Γ_{−d2}`.
pub fn phi3_contour(p: &TwoTimeParams, x: f64, y: f64, cfg: &KernelEvalConfig) -> Result<f64> {
    check_finite("x", x)?;
    check_finite("y", y)?;
    let c = &cfg.contour;
    check_decay(p, c)?;
    let v = twofold(
        |z| cubic(z, -p.nu1, -(p.lambda1 - x)),
        |s| cubic(s, -p.nu1, -(p.lambda1 - y)),
        c.d1,
        c.d2,
        c,
    )?;
    real_part(v, "phi3 contour")
}

/// Orientation of the Airy–Gaussian line integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AiryContourSide {
    /// `(1/2πi)∫_{Γ_D} e^{z³/3 + Az² + Bz} dz = Ai(A² − B) e^{−AB + 2A³/3}`.
    Raising,
    /// `(1/2πi)∫_{Γ_{−D}} e^{−ζ³/3 + Aζ² + Bζ} dζ = Ai(A² + B) e^{AB + 2A³/3}`.
    Lowering,
}

/// Both sides of an Airy–Gaussian line-integral identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryContourValues {
    /// The contour integral by quadrature (real part).
    pub contour: f64,
    /// The closed form in terms of `Ai`.
    pub closed_form: f64,
}

/// Length of each ray of the Airy–Gaussian path.
pub const AIRY_RAY_LENGTH: f64 = 9.0;

/// Gauss panels per ray (or per half-line) of the Airy–Gaussian path.
pub const AIRY_RAY_PANELS: usize = 12;

/// Smallest Gaussian decay rate `D + A` for which the vertical line is used.
pub const AIRY_LINE_MIN_DECAY: f64 = 0.5;

/// Evaluates the integral and the closed form for given `A`, `B`, `D > 0`.
///
/// On `Γ_{±D}` the integrand decays like `e^{−(D+A)t²}`. When `D + A` is at
/// least [`AIRY_LINE_MIN_DECAY`] the vertical line is used as is; otherwise the
/// path is bent into the two rays `±D + s e^{±iθ}`, `s ≥ 0`, with `θ = π/3`
/// (raising) or `2π/3` (lowering), which lie in the same end sectors and on
/// which the cubic term decays for every `A`.
pub fn airy_gaussian_contour(a: f64, b: f64, side: AiryContourSide, d: f64, cfg: &KernelEvalConfig) -> Result<AiryContourValues> {
    check_finite("A", a)?;
    check_finite("B", b)?;
    check_finite("D", d)?;
    if !(d > 0.0) {
        return Err(Error::Domain(format!("D must be positive, got {d}")));
    }
    let (start, theta, cubic_sign) = match side {
        AiryContourSide::Raising => (d, PI / 3.0, 1.0),
        AiryContourSide::Lowering => (-d, 2.0 * PI / 3.0, -1.0),
    };
    let g = |z: Complex64| (cubic_sign * z * z * z / 3.0 + a * z * z + b * z).exp();
    let nodes = (cfg.contour.line_nodes / AIRY_RAY_PANELS).max(8);
    let (x, w) = gauss_legendre(nodes)?;
    let decay = d + a;
    let (theta, length) = if decay >= AIRY_LINE_MIN_DECAY {
        (PI / 2.0, (45.0 / decay).sqrt().min(AIRY_RAY_LENGTH))
    } else {
        (theta, AIRY_RAY_LENGTH)
    };
    let panel = length / AIRY_RAY_PANELS as f64;
    let mut v = Complex64::new(0.0, 0.0);
    for sgn in [1.0, -1.0] {
        let dir = Complex64::from_polar(1.0, sgn * theta);
        for k in 0..AIRY_RAY_PANELS {
            let lo = k as f64 * panel;
            for (xi, wi) in x.iter().zip(&w) {
                let s = lo + 0.5 * panel * (xi + 1.0);
                v += sgn * dir * g(start + s * dir) * (0.5 * panel * wi);
            }
        }
        let tail = g(start + length * dir).norm();
        if tail > cfg.contour.endpoint_tol {
            return Err(Error::Truncation(format!("Airy path integrand {tail} at the path end exceeds {}", cfg.contour.endpoint_tol)));
        }
    }
    let v = v / Complex64::new(0.0, 2.0 * PI);
    let closed = match side {
        AiryContourSide::Raising => airy_ai(a * a - b)? * (-a * b + 2.0 * a * a * a / 3.0).exp(),
        AiryContourSide::Lowering => airy_ai(a * a + b)? * (a * b + 2.0 * a * a * a / 3.0).exp(),
    };
    Ok(AiryContourValues { contour: real_part(v, "Airy contour")?, closed_form: closed })
}
