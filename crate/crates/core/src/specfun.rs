//! Real Airy functions and the Airy kernel.
//!
//! `Ai` and `Ai'` are evaluated from their Maclaurin series in double-double
//! arithmetic for `|x| <= 9` and from the classical asymptotic expansions
//! (exponential for `x > 9`, oscillatory for `x < -9`) beyond that. The
//! double-double accumulation absorbs the cancellation between the two
//! power series that make up `Ai`, which grows like `exp((2/3)|x|^{3/2})`.
//!
//! The Airy kernel
//!
//! ```text
//! K(x, y) = ∫₀^∞ Ai(x+τ) Ai(y+τ) dτ = (Ai(x)Ai'(y) − Ai'(x)Ai(y)) / (x − y)
//! ```
//!
//! is evaluated from the closed two-point form, with a third-order Taylor
//! expansion around the diagonal when `|x − y| < 1e-4`.

use crate::error::{check_finite, Error, Result};
use crate::quad::gauss_legendre;

/// Tolerance record for adaptive special-function evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPrecision {
    /// Absolute tolerance.
    pub abs_tol: f64,
    /// Relative tolerance.
    pub rel_tol: f64,
    /// Maximum number of refinement rounds.
    pub max_refine: usize,
}

impl Default for EvalPrecision {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-12, max_refine: 6 }
    }
}

impl EvalPrecision {
    /// Checks `abs_tol > 0`, `rel_tol > 0` and `max_refine >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_refine < 1 {
            return Err(Error::Argument(format!("invalid precision record {self:?}")));
        }
        Ok(())
    }
}

/// `Ai(0) = 3^{-2/3}/Γ(2/3)` as a double-double pair.
const AI0: Dd = Dd { hi: 0.3550280538878172, lo: 2.05233632436212e-17 };
/// `-Ai'(0) = 3^{-1/3}/Γ(1/3)` as a double-double pair.
const MAI1: Dd = Dd { hi: 0.2588194037928068, lo: -2.522243111610832e-17 };

/// Crossover between the series and the asymptotic expansions.
const SEAM: f64 = 9.0;

/// Separation below which the kernel uses its diagonal Taylor expansion.
pub const KERNEL_DIAGONAL_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        let t = Dd::two_sum(self.lo, o.lo);
        let r = Dd::quick_two_sum(s.hi, s.lo + t.hi);
        Dd::quick_two_sum(r.hi, r.lo + t.lo)
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p) + (self.hi * o.lo + self.lo * o.hi);
        Dd::quick_two_sum(p, e)
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let p = q1 * d;
        let pe = q1.mul_add(d, -p);
        let r = Dd::two_sum(self.hi, -p);
        let rem = r.hi + (r.lo - pe + self.lo);
        Dd::quick_two_sum(q1, rem / d)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

fn airy_series(x: f64) -> (f64, f64) {
    let xd = Dd::from_f64(x);
    let x3 = xd.mul(xd).mul(xd);
    let mut f_term = Dd::from_f64(1.0);
    let mut g_term = xd;
    let mut fp_term = xd.mul(xd).div_f64(2.0);
    let mut gp_term = Dd::from_f64(1.0);
    let mut f = f_term;
    let mut g = g_term;
    let mut fp = fp_term;
    let mut gp = gp_term;
    let mut peak = 1.0f64.max(x.abs());
    for k in 0..200usize {
        let kf = k as f64;
        f_term = f_term.mul(x3).div_f64((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        g_term = g_term.mul(x3).div_f64((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        let kk = kf + 1.0;
        fp_term = fp_term.mul(x3).div_f64(3.0 * kk * (3.0 * kk + 2.0));
        gp_term = gp_term.mul(x3).div_f64((3.0 * kf + 1.0) * (3.0 * kf + 3.0));
        f = f.add(f_term);
        g = g.add(g_term);
        fp = fp.add(fp_term);
        gp = gp.add(gp_term);
        let size = f_term.hi.abs().max(g_term.hi.abs()).max(fp_term.hi.abs()).max(gp_term.hi.abs());
        peak = peak.max(size);
        if k > 2 && size < 1e-34 * peak {
            break;
        }
    }
    let ai = AI0.mul(f).add(MAI1.mul(g).neg());
    let aip = AI0.mul(fp).add(MAI1.mul(gp).neg());
    (ai.to_f64(), aip.to_f64())
}

fn asymptotic_coefficients() -> [(f64, f64); 40] {
    let mut out = [(0.0, 0.0); 40];
    let mut u = 1.0f64;
    out[0] = (1.0, 1.0);
    for k in 1..40 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / (216.0 * kf * (2.0 * kf - 1.0));
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        out[k] = (u, v);
    }
    out
}

fn airy_asymptotic_positive(x: f64) -> (f64, f64) {
    let coef = asymptotic_coefficients();
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let (mut su, mut sv) = (0.0, 0.0);
    let mut pow = 1.0;
    let mut sign = 1.0;
    let mut last = f64::INFINITY;
    for (u, v) in coef.iter() {
        let tu = sign * u * pow;
        let tv = sign * v * pow;
        let size = tu.abs().max(tv.abs());
        if size > last {
            break;
        }
        su += tu;
        sv += tv;
        last = size;
        if size < 1e-18 {
            break;
        }
        pow /= zeta;
        sign = -sign;
    }
    let e = (-zeta).exp();
    let q = x.sqrt().sqrt();
    let c = 0.5 / std::f64::consts::PI.sqrt();
    (c * e / q * su, -c * e * q * sv)
}

fn airy_asymptotic_negative(x: f64) -> (f64, f64) {
    let coef = asymptotic_coefficients();
    let y = -x;
    let zeta = 2.0 / 3.0 * y * y.sqrt();
    let (mut p, mut q, mut r, mut s) = (0.0, 0.0, 0.0, 0.0);
    let mut pow = 1.0;
    let mut last = f64::INFINITY;
    for (k, (u, v)) in coef.iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let tu = sign * u * pow;
        let tv = sign * v * pow;
        let size = tu.abs().max(tv.abs());
        if size > last {
            break;
        }
        if k % 2 == 0 {
            p += tu;
            r += tv;
        } else {
            q += tu;
            s += tv;
        }
        last = size;
        if size < 1e-18 {
            break;
        }
        pow /= zeta;
    }
    let theta = zeta + std::f64::consts::FRAC_PI_4;
    let (sn, cs) = theta.sin_cos();
    let y4 = y.sqrt().sqrt();
    let rp = 1.0 / std::f64::consts::PI.sqrt();
    let ai = rp / y4 * (sn * p - cs * q);
    let aip = -rp * y4 * (cs * r + sn * s);
    (ai, aip)
}

/// Returns `(Ai(x), Ai'(x))` without input validation.
///
/// Non-finite inputs yield NaN; callers that need an error use
/// [`airy_ai`] or [`airy_ai_prime`].
pub fn airy_pair(x: f64) -> (f64, f64) {
    if !x.is_finite() {
        return (f64::NAN, f64::NAN);
    }
    if x.abs() <= SEAM {
        airy_series(x)
    } else if x > 0.0 {
        airy_asymptotic_positive(x)
    } else {
        airy_asymptotic_negative(x)
    }
}

/// The Airy function `Ai(x)`.
pub fn airy_ai(x: f64) -> Result<f64> {
    check_finite("x", x)?;
    Ok(airy_pair(x).0)
}

/// The derivative `Ai'(x)`.
pub fn airy_ai_prime(x: f64) -> Result<f64> {
    check_finite("x", x)?;
    Ok(airy_pair(x).1)
}

/// Airy kernel from precomputed `(Ai, Ai')` values at both arguments.
///
/// The arguments are ordered internally so that the result is exactly
/// symmetric under `(x, ax, apx) <-> (y, ay, apy)`.
pub fn airy_kernel_from_values(x: f64, ax: f64, apx: f64, y: f64, ay: f64, apy: f64) -> f64 {
    let (a, aa, aap, b, ba, bap) = if x <= y { (x, ax, apx, y, ay, apy) } else { (y, ay, apy, x, ax, apx) };
    let h = b - a;
    if h < KERNEL_DIAGONAL_THRESHOLD {
        let a2 = aa * aa;
        let ap2 = aap * aap;
        let k0 = ap2 - a * a2;
        let k1 = -0.5 * a2;
        let k2 = -(aa * aap + a * a * a2 - a * ap2) / 6.0;
        let k3 = (ap2 - 2.0 * a * a2) / 12.0;
        k0 + h * (k1 + h * (k2 + h * k3))
    } else {
        (aa * bap - aap * ba) / (a - b)
    }
}

/// The Airy kernel `K_Ai(x, y)`.
pub fn airy_kernel(x: f64, y: f64) -> Result<f64> {
    check_finite("x", x)?;
    check_finite("y", y)?;
    Ok(airy_kernel_unchecked(x, y))
}

/// The Airy kernel without input validation.
pub fn airy_kernel_unchecked(x: f64, y: f64) -> f64 {
    let (ax, apx) = airy_pair(x);
    let (ay, apy) = airy_pair(y);
    airy_kernel_from_values(x, ax, apx, y, ay, apy)
}

/// The Airy kernel from its integral representation
/// `∫₀^∞ Ai(x+τ)Ai(y+τ)dτ`, using the map `τ = u/(1−u)` and composite
/// Gauss–Legendre panels on `u ∈ [0, 1)`.
pub fn airy_kernel_integral(x: f64, y: f64, panels: usize, nodes: usize) -> Result<f64> {
    check_finite("x", x)?;
    check_finite("y", y)?;
    if panels == 0 || nodes == 0 {
        return Err(Error::Argument("panels and nodes must be positive".into()));
    }
    let (gx, gw) = gauss_legendre(nodes)?;
    let mut sum = 0.0;
    let width = 1.0 / panels as f64;
    for p in 0..panels {
        let lo = p as f64 * width;
        let mid = lo + 0.5 * width;
        for (g, w) in gx.iter().zip(gw.iter()) {
            let u = mid + 0.5 * width * g;
            let tau = u / (1.0 - u);
            let jac = 1.0 / ((1.0 - u) * (1.0 - u));
            let v = airy_pair(x + tau).0 * airy_pair(y + tau).0;
            if v != 0.0 {
                sum += 0.5 * width * w * v * jac;
            }
        }
    }
    Ok(sum)
}

/// Evaluation route for [`airy_pair_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AiryMethod {
    /// Double-double Maclaurin series.
    Series,
    /// Asymptotic expansion (exponential for `x > 0`, oscillatory for `x < 0`).
    Asymptotic,
}

/// `(Ai(x), Ai'(x))` forced through one evaluation route, for cross-checks at the seam.
pub fn airy_pair_with(x: f64, method: AiryMethod) -> Result<(f64, f64)> {
    check_finite("x", x)?;
    match method {
        AiryMethod::Series => Ok(airy_series(x)),
        AiryMethod::Asymptotic if x > 0.0 => Ok(airy_asymptotic_positive(x)),
        AiryMethod::Asymptotic if x < 0.0 => Ok(airy_asymptotic_negative(x)),
        AiryMethod::Asymptotic => Err(Error::Domain("asymptotic expansion undefined at 0".into())),
    }
}
