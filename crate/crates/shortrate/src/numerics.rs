//! Shared numerical kernels: adaptive Gauss-Kronrod quadrature, truncated
//! semi-infinite integration, Levin collocation for Fourier-type tails,
//! Brent root finding and central differences.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("quadrature did not converge on [{lo}, {hi}]: estimate {estimate}, error {error}")]
    DepthExceeded {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
    },
    #[error("damping envelope is not decreasing near {at}")]
    InvalidEnvelope { at: f64 },
    #[error("no sign change on [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
    #[error("collocation system is singular")]
    Singular,
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Tolerances and subdivision limit for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_depth: 60,
        }
    }
}

impl QuadSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_depth: u32) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_depth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(NumericsError::InvalidSpec("abs_tol must be positive"));
        }
        if !(self.rel_tol >= 0.0) || !self.rel_tol.is_finite() {
            return Err(NumericsError::InvalidSpec("rel_tol must be non-negative"));
        }
        if self.max_depth < 1 {
            return Err(NumericsError::InvalidSpec("max_depth must be at least 1"));
        }
        Ok(())
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Default root tolerance.
pub const ROOT_TOL: f64 = 1e-12;

/// An interval known to contain a sign change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and checks for a sign change.
    pub fn new<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(NumericsError::InvalidInterval { lo, hi });
        }
        Self::from_values(lo, hi, f(lo), f(hi))
    }

    pub fn from_values(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(NumericsError::InvalidInterval { lo, hi });
        }
        if !(f_lo * f_hi < 0.0) {
            return Err(NumericsError::InvalidBracket { lo, hi });
        }
        Ok(Self { lo, hi, f_lo, f_hi })
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// Gauss-Kronrod 7/15 nodes and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    if !fc.is_finite() {
        return Err(NumericsError::NonFinite { at: center });
    }
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let (x1, x2) = (center - dx, center + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(NumericsError::NonFinite { at: x1 });
        }
        if !f2.is_finite() {
            return Err(NumericsError::NonFinite { at: x2 });
        }
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (1.0f64).min((200.0 * err / res_asc).powf(1.5));
    }
    let round = 50.0 * f64::EPSILON * res_abs;
    if round > err {
        err = round;
    }
    Ok((value, err))
}

/// Upper bound on live subintervals; a safeguard beside `max_depth`.
const MAX_SEGMENTS: usize = 50_000;

/// Integral estimate with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Globally adaptive G7-K15 quadrature. The rule never evaluates the
/// endpoints, so integrable endpoint singularities need no special handling.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: QuadSpec) -> Result<f64> {
    integrate_with_error(f, lo, hi, spec).map(|r| r.value)
}

pub fn integrate_with_error<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    spec: QuadSpec,
) -> Result<Integral> {
    spec.validate()?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(NumericsError::InvalidInterval { lo, hi });
    }
    let (value, error) = gk15(&f, lo, hi)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        lo,
        hi,
        value,
        error,
        depth: 0,
    });
    let mut total = value;
    let mut total_err = error;
    loop {
        // Re-sum to keep drift from repeated updates out of the stopping test.
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            let mut s = CompensatedSum::new();
            let mut e = 0.0;
            for seg in heap.iter() {
                s.add(seg.value);
                e += seg.error;
            }
            if e <= spec.abs_tol.max(spec.rel_tol * s.value().abs()) {
                return Ok(Integral {
                    value: s.value(),
                    error: e,
                });
            }
            total = s.value();
            total_err = e;
            continue;
        }
        let worst = heap.pop().expect("segment heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if worst.depth >= spec.max_depth
            || heap.len() >= MAX_SEGMENTS
            || !(worst.lo < mid && mid < worst.hi)
        {
            return Err(NumericsError::DepthExceeded {
                lo: worst.lo,
                hi: worst.hi,
                estimate: total,
                error: total_err,
            });
        }
        let (v1, e1) = gk15(&f, worst.lo, mid)?;
        let (v2, e2) = gk15(&f, mid, worst.hi)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        let depth = worst.depth + 1;
        heap.push(Segment {
            lo: worst.lo,
            hi: mid,
            value: v1,
            error: e1,
            depth,
        });
        heap.push(Segment {
            lo: mid,
            hi: worst.hi,
            value: v2,
            error: e2,
            depth,
        });
    }
}

/// Locates the point where a decreasing envelope first drops below `threshold`.
pub fn envelope_cutoff<D: Fn(f64) -> f64>(damping: D, lo: f64, threshold: f64) -> Result<f64> {
    let mut prev_x = lo;
    let mut prev = damping(lo);
    if !prev.is_finite() {
        return Err(NumericsError::InvalidEnvelope { at: lo });
    }
    if prev < threshold {
        return Ok(lo);
    }
    let mut step = 1.0;
    for _ in 0..2000 {
        let x = prev_x + step;
        let v = damping(x);
        if !v.is_finite() || v > prev {
            return Err(NumericsError::InvalidEnvelope { at: x });
        }
        if v < threshold {
            let g = |r: f64| damping(r) - threshold;
            let b = Bracket::from_values(prev_x, x, prev - threshold, v - threshold)?;
            let r = find_root(g, b, 1e-6 * (1.0 + x.abs()));
            // Err on the far side of the crossing.
            return Ok((r + 1e-6 * (1.0 + x.abs())).min(x));
        }
        prev_x = x;
        prev = v;
        step *= 2.0;
    }
    Err(NumericsError::InvalidEnvelope { at: prev_x })
}

/// Integrates over [lo, ∞) by truncating where `damping` falls below
/// `abs_tol / 100`, then integrating adaptively on the finite range.
pub fn integrate_semi_infinite<F, D>(f: F, lo: f64, damping: D, spec: QuadSpec) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    spec.validate()?;
    if !(lo >= 0.0) {
        return Err(NumericsError::InvalidInterval {
            lo,
            hi: f64::INFINITY,
        });
    }
    let hi = envelope_cutoff(&damping, lo, spec.abs_tol * 1e-2)?;
    if hi <= lo {
        return Ok(0.0);
    }
    integrate(f, lo, hi, spec)
}

/// Brent's method. Falls back to bisection whenever the interpolated step
/// leaves the bracket or converges too slowly. The returned point `r`
/// satisfies: `f` changes sign (or vanishes) on `[r - tol/2, r + tol/2]`.
pub fn find_root<F: Fn(f64) -> f64>(f: F, b: Bracket, tol: f64) -> f64 {
    let tol = if tol > 0.0 { tol } else { ROOT_TOL };
    let (mut a, mut fa) = (b.lo, b.f_lo);
    let (mut bb, mut fb) = (b.hi, b.f_hi);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return bb;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = bb - a;
    let mut e = d;
    for _ in 0..500 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = bb - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = bb;
            bb = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * bb.abs() + 0.25 * tol;
        let xm = 0.5 * (c - bb);
        if xm.abs() <= tol1 || fb == 0.0 {
            return bb;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (bb - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = bb;
        fa = fb;
        bb += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(bb);
    }
    bb
}

/// Holds the first error raised inside a quadrature integrand, which can
/// only report failure by returning a non-finite value.
pub(crate) struct ErrorSlot<E>(std::cell::RefCell<Option<E>>);

impl<E> ErrorSlot<E> {
    pub(crate) fn new() -> Self {
        Self(std::cell::RefCell::new(None))
    }

    /// Unwraps `r`, or records its error and returns NaN.
    pub(crate) fn guard<F: Into<E>>(&self, r: std::result::Result<f64, F>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                let mut slot = self.0.borrow_mut();
                if slot.is_none() {
                    *slot = Some(e.into());
                }
                f64::NAN
            }
        }
    }

    /// Removes and returns the recorded error, if any.
    pub(crate) fn take(&self) -> Option<E> {
        self.0.borrow_mut().take()
    }

    /// Returns the recorded error if any, otherwise maps `r`'s error.
    pub(crate) fn finish<T, F: Into<E>>(
        self,
        r: std::result::Result<T, F>,
    ) -> std::result::Result<T, E> {
        if let Some(e) = self.0.into_inner() {
            return Err(e);
        }
        r.map_err(Into::into)
    }
}

/// ∫_a^b F(u) e^{iwu} du for a non-oscillatory F, by Levin collocation:
/// solve p′ + iwp = F at n Chebyshev-Lobatto points, then the integral is
/// p(b)e^{iwb} − p(a)e^{iwa}. Intended for w(b − a) well above 1.
pub fn levin_integral<F>(f: F, a: f64, b: f64, w: f64, n: usize) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::InvalidInterval { lo: a, hi: b });
    }
    if n < 3 || !(w != 0.0) || !w.is_finite() {
        return Err(NumericsError::InvalidSpec(
            "levin needs n >= 3 and finite w != 0",
        ));
    }
    let m = n - 1;
    // Nodes run from b (j = 0) to a (j = m).
    let t: Vec<f64> = (0..n)
        .map(|j| (std::f64::consts::PI * j as f64 / m as f64).cos())
        .collect();
    let half = 0.5 * (b - a);
    let u: Vec<f64> = t.iter().map(|&t| a + half * (t + 1.0)).collect();
    let c = |j: usize| if j == 0 || j == m { 2.0 } else { 1.0 };
    let sign = |j: usize| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut mat = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let d = c(i) / c(j) * sign(i + j) / (t[i] - t[j]);
                mat[i * n + j] = Complex64::new(d / half, 0.0);
                diag -= d;
            }
        }
        mat[i * n + i] = Complex64::new(diag / half, w);
    }
    let mut rhs: Vec<Complex64> = u.iter().map(|&x| f(x)).collect();
    for (i, v) in rhs.iter().enumerate() {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(NumericsError::NonFinite { at: u[i] });
        }
    }
    solve_complex(&mut mat, &mut rhs, n)?;
    let e = |x: f64| Complex64::from_polar(1.0, w * x);
    Ok(rhs[0] * e(b) - rhs[m] * e(a))
}

/// Gaussian elimination with partial pivoting; the solution replaces `rhs`.
fn solve_complex(mat: &mut [Complex64], rhs: &mut [Complex64], n: usize) -> Result<()> {
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| mat[i * n + k].norm().total_cmp(&mat[j * n + k].norm()))
            .expect("non-empty pivot range");
        if piv != k {
            for j in 0..n {
                mat.swap(k * n + j, piv * n + j);
            }
            rhs.swap(k, piv);
        }
        let d = mat[k * n + k];
        if !(d.norm() > 0.0) {
            return Err(NumericsError::Singular);
        }
        for i in k + 1..n {
            let factor = mat[i * n + k] / d;
            if factor.norm() == 0.0 {
                continue;
            }
            for j in k..n {
                let v = mat[k * n + j];
                mat[i * n + j] -= factor * v;
            }
            let v = rhs[k];
            rhs[i] -= factor * v;
        }
    }
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= mat[k * n + j] * rhs[j];
        }
        rhs[k] = s / mat[k * n + k];
    }
    if rhs.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::Singular)
    }
}

/// Central differences: returns (f'(x), f''(x)), both O(h²).
pub fn fd_derivatives<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> (f64, f64) {
    let fp = f(x + h);
    let fm = f(x - h);
    let f0 = f(x);
    ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, SQRT_2};

    #[test]
    fn constant_integrand() {
        let v = integrate(|_| 1.0, 0.0, 1.0, QuadSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_weight_against_antiderivative() {
        let c = 2.0 * SQRT_2;
        let v = integrate(|x| x * (c * x).exp(), 0.0, 1.0, QuadSpec::default()).unwrap();
        // Antiderivative of x e^{cx} is e^{cx}(cx - 1)/c².
        let exact = (c.exp() * (c - 1.0) + 1.0) / (c * c);
        assert!((v - exact).abs() < 1e-9 * exact);
        let printed = (2.0 * SQRT_2 - 1.0) * c.exp() / 8.0 + 1.0 / 8.0;
        assert!((exact - printed).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, QuadSpec::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn non_integrable_reports_depth() {
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, QuadSpec::default());
        assert!(matches!(r, Err(NumericsError::DepthExceeded { .. })));
    }

    #[test]
    fn bad_spec_rejected() {
        assert!(QuadSpec::new(0.0, 1e-8, 10).is_err());
        assert!(QuadSpec::new(1e-8, -1.0, 10).is_err());
        assert!(QuadSpec::new(1e-8, 0.0, 0).is_err());
        assert!(QuadSpec::new(1e-8, 0.0, 1).is_ok());
    }

    #[test]
    fn semi_infinite_gaussian() {
        let v = integrate_semi_infinite(
            |r| (-r * r).exp(),
            0.0,
            |r| (-r * r).exp(),
            QuadSpec::default(),
        )
        .unwrap();
        assert!((v - PI.sqrt() / 2.0).abs() < 1e-8);
    }

    #[test]
    fn semi_infinite_moment() {
        let v = integrate_semi_infinite(
            |r| r * (-0.5 * r * r).exp(),
            0.0,
            |r| (-0.5 * r * r).exp(),
            QuadSpec::default(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn increasing_envelope_rejected() {
        let r = integrate_semi_infinite(|r| r, 0.0, |r| 1.0 + r, QuadSpec::default());
        assert!(matches!(r, Err(NumericsError::InvalidEnvelope { .. })));
    }

    #[test]
    fn roots() {
        let f = |x: f64| x * x - 2.0;
        let r = find_root(f, Bracket::new(f, 1.0, 2.0).unwrap(), 1e-12);
        assert!((r - SQRT_2).abs() < 1e-8);
        let g = |x: f64| x.cos();
        let r = find_root(g, Bracket::new(g, 1.0, 2.0).unwrap(), 1e-12);
        assert!((r - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn bracket_requires_sign_change() {
        assert!(Bracket::new(|x| x * x + 1.0, -1.0, 1.0).is_err());
        assert!(Bracket::new(|x| x, 1.0, -1.0).is_err());
    }

    #[test]
    fn root_of_step_function_uses_bisection() {
        let f = |x: f64| if x < 0.3 { -1.0 } else { 1.0 };
        let r = find_root(f, Bracket::new(f, 0.0, 1.0).unwrap(), 1e-12);
        assert!((r - 0.3).abs() < 1e-11);
    }

    #[test]
    fn finite_differences() {
        let (d1, d2) = fd_derivatives(|x| x * x * x, 2.0, 1e-4);
        assert!((d1 - 12.0).abs() < 1e-6 && (d2 - 12.0).abs() < 1e-6);
        let (d1, d2) = fd_derivatives(f64::exp, 0.0, 1e-4);
        assert!((d1 - 1.0).abs() < 1e-7 && (d2 - 1.0).abs() < 1e-7);
        let x = PI / 4.0;
        let (d1, d2) = fd_derivatives(f64::sin, x, 1e-4);
        assert!((d1 - x.cos()).abs() < 1e-7 && (d2 + x.sin()).abs() < 1e-7);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-13).abs() < 1e-20);
    }

    proptest! {
        #[test]
        fn linearity(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, w in 0.5f64..5.0, c in 0.1f64..2.0) {
            let spec = QuadSpec::default();
            let f = move |x: f64| (w * x).sin();
            let g = move |x: f64| (-c * x * x).exp();
            let lhs = integrate(|x| alpha * f(x) + beta * g(x), 0.0, 2.0, spec).unwrap();
            let rhs = alpha * integrate(f, 0.0, 2.0, spec).unwrap() + beta * integrate(g, 0.0, 2.0, spec).unwrap();
            prop_assert!((lhs - rhs).abs() <= 3.0 * spec.abs_tol);
        }

        #[test]
        fn additivity(mid in 0.05f64..1.95, w in 0.5f64..6.0) {
            let spec = QuadSpec::default();
            let f = move |x: f64| (w * x).cos() * (1.0 + x).ln();
            let whole = integrate(f, 0.0, 2.0, spec).unwrap();
            let split = integrate(f, 0.0, mid, spec).unwrap() + integrate(f, mid, 2.0, spec).unwrap();
            prop_assert!((whole - split).abs() <= 2.0 * spec.abs_tol);
        }

        #[test]
        fn root_rebracket(shift in -0.9f64..0.9, scale in 0.1f64..10.0) {
            let f = move |x: f64| scale * ((x - shift).powi(3) + 0.5 * (x - shift));
            let tol = 1e-12;
            let r = find_root(f, Bracket::new(f, -1.0, 1.0).unwrap(), tol);
            let (fl, fh) = (f(r - 0.5 * tol), f(r + 0.5 * tol));
            prop_assert!(fl * fh <= 0.0 || f(r) == 0.0);
        }

        #[test]
        fn fd_quadratic_exact(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in -5.0f64..5.0, x in -2.0f64..2.0) {
            let h = 1e-3;
            let (d1, d2) = fd_derivatives(|t| c0 + c1 * t + c2 * t * t, x, h);
            let scale = 1.0 + c0.abs() + c1.abs() * 3.0 + c2.abs() * 9.0;
            prop_assert!((d1 - (c1 + 2.0 * c2 * x)).abs() <= 1e2 * f64::EPSILON * scale / h);
            prop_assert!((d2 - 2.0 * c2).abs() <= 1e2 * f64::EPSILON * scale / (h * h));
        }
    }
}
