//! The power-law model family: coefficients, the f-function, the drift under
//! the transformed measure, scale and speed densities, the Liouville
//! transform, and boundary/spectrum classification.
//!
//! With φ(x) = (2/a²) x^{2k−1} the dynamics are σ(x) = a x^{1−k} and
//! μ(x) = a²(1/4 − k/2) x^{1−2k}. Writing f for the solution of the
//! f-ODE, the densities take the compact forms
//! s̃ = x^{k−1/2} e^{2f} and m̃ = (2/a²) x^{k−3/2} e^{−2f}.

use std::f64::consts::SQRT_2;
use std::fmt;

use thiserror::Error;

use crate::numerics::{integrate, NumericsError, QuadSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("x = {x} is outside the open state space (0, {l})")]
    OutOfDomain { x: f64, l: f64 },
    #[error("numeric boundary probe inconclusive: {0}")]
    Inconclusive(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// The triple (k, a, L).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    k: f64,
    a: f64,
    l: f64,
}

impl ModelParams {
    /// Validates a > 0, L > 0, and, for k = −1/2, that the Bessel order
    /// 2√2/a is not within 1e-9 of an integer.
    pub fn new(k: f64, a: f64, l: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "k must be finite, got {k}"
            )));
        }
        if !(a > 0.0) || !a.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "a must be positive, got {a}"
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "L must be positive, got {l}"
            )));
        }
        let p = Self { k, a, l };
        if p.is_k_neg_half() {
            let nu = p.bessel_order();
            if (nu - nu.round()).abs() < 1e-9 {
                return Err(ModelError::InvalidParams(format!(
                    "k = -1/2 needs a non-integer Bessel order 2*sqrt(2)/a; a = {a} gives {nu}"
                )));
            }
        }
        Ok(p)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn is_k_half(&self) -> bool {
        self.k == 0.5
    }

    pub fn is_k_neg_half(&self) -> bool {
        self.k == -0.5
    }

    /// ν = 2√2/a, the Bessel order of the k = −1/2 eigenfunctions.
    pub fn bessel_order(&self) -> f64 {
        2.0 * SQRT_2 / self.a
    }

    fn check_open(&self, x: f64) -> Result<()> {
        if x > 0.0 && x < self.l {
            Ok(())
        } else {
            Err(ModelError::OutOfDomain { x, l: self.l })
        }
    }

    fn check_half_open(&self, x: f64) -> Result<()> {
        if x > 0.0 && x <= self.l {
            Ok(())
        } else {
            Err(ModelError::OutOfDomain { x, l: self.l })
        }
    }
}

/// Drift under the physical measure, μ(x) = a²(1/4 − k/2) x^{1−2k}.
pub fn drift(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_open(x)?;
    Ok(drift_unchecked(p, x))
}

/// Volatility σ(x) = a x^{1−k}.
pub fn vol(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_open(x)?;
    Ok(vol_unchecked(p, x))
}

pub(crate) fn drift_unchecked(p: &ModelParams, x: f64) -> f64 {
    p.a * p.a * (0.25 - 0.5 * p.k) * x.powf(1.0 - 2.0 * p.k)
}

pub(crate) fn vol_unchecked(p: &ModelParams, x: f64) -> f64 {
    p.a * x.powf(1.0 - p.k)
}

/// f with additive constant 0: −√(8x^{2k+1})/(a(2k+1)), or −(√2/a) ln x at k = −1/2.
pub fn f_func(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_half_open(x)?;
    Ok(f_unchecked(p, x))
}

pub(crate) fn f_unchecked(p: &ModelParams, x: f64) -> f64 {
    if p.is_k_neg_half() {
        -SQRT_2 / p.a * x.ln()
    } else {
        let e = p.k + 0.5;
        -SQRT_2 * x.powf(e) / (p.a * e)
    }
}

/// f′ = −√φ = −(√2/a) x^{k−1/2}.
pub fn f_prime(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_half_open(x)?;
    Ok(f_prime_unchecked(p, x))
}

pub(crate) fn f_prime_unchecked(p: &ModelParams, x: f64) -> f64 {
    -SQRT_2 / p.a * x.powf(p.k - 0.5)
}

/// f″ = −(√2/a)(k − 1/2) x^{k−3/2}.
pub fn f_double_prime(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_half_open(x)?;
    Ok(f_double_prime_unchecked(p, x))
}

pub(crate) fn f_double_prime_unchecked(p: &ModelParams, x: f64) -> f64 {
    -SQRT_2 / p.a * (p.k - 0.5) * x.powf(p.k - 1.5)
}

/// Drift under the transformed measure, μ̃ = μ − σ² f′.
pub fn drift_tilde(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_open(x)?;
    Ok(drift_tilde_unchecked(p, x))
}

pub(crate) fn drift_tilde_unchecked(p: &ModelParams, x: f64) -> f64 {
    let s = vol_unchecked(p, x);
    drift_unchecked(p, x) - s * s * f_prime_unchecked(p, x)
}

/// Scale density with C = 1: x^{k−1/2} e^{2f(x)}.
pub fn scale_density(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_open(x)?;
    Ok(scale_density_unchecked(p, x))
}

pub(crate) fn scale_density_unchecked(p: &ModelParams, x: f64) -> f64 {
    x.powf(p.k - 0.5) * (2.0 * f_unchecked(p, x)).exp()
}

/// Speed density with C = 1: (2/a²) x^{k−3/2} e^{−2f(x)}.
pub fn speed_density(p: &ModelParams, x: f64) -> Result<f64> {
    p.check_open(x)?;
    Ok(speed_density_unchecked(p, x))
}

pub(crate) fn speed_density_unchecked(p: &ModelParams, x: f64) -> f64 {
    2.0 / (p.a * p.a) * x.powf(p.k - 1.5) * (-2.0 * f_unchecked(p, x)).exp()
}

/// Scale measure S[x, y] = (a/(2√2))(e^{2f(x)} − e^{2f(y)}); y may be L.
/// x = 0 gives S(0, y], which is infinite when k ≤ −1/2.
pub fn scale_measure(p: &ModelParams, x: f64, y: f64) -> f64 {
    let c = p.a / (2.0 * SQRT_2);
    if x == 0.0 && p.k <= -0.5 {
        return f64::INFINITY;
    }
    // f(0) = 0 when k > −1/2; expm1 keeps short intervals accurate.
    let f = |z: f64| if z == 0.0 { 0.0 } else { f_unchecked(p, z) };
    let (fx, fy) = (f(x), f(y));
    -c * (2.0 * fx).exp() * (2.0 * (fy - fx)).exp_m1()
}

/// Feller classification of the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryClass {
    Regular,
    Exit,
    Natural,
}

impl fmt::Display for BoundaryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Regular => "regular",
            Self::Exit => "exit",
            Self::Natural => "natural",
        })
    }
}

/// Spectrum of the transformed generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumClass {
    PurelyDiscrete,
    PurelyContinuous,
    Mixed { cutoff: f64 },
}

impl fmt::Display for SpectrumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PurelyDiscrete => f.write_str("discrete"),
            Self::PurelyContinuous => f.write_str("continuous"),
            Self::Mixed { cutoff } => write!(f, "mixed; cutoff {cutoff}"),
        }
    }
}

/// Closed-form rule: k ≤ 0 natural, 0 < k ≤ 1/2 exit, k > 1/2 regular.
pub fn classify_origin(p: &ModelParams) -> BoundaryClass {
    if p.k <= 0.0 {
        BoundaryClass::Natural
    } else if p.k <= 0.5 {
        BoundaryClass::Exit
    } else {
        BoundaryClass::Regular
    }
}

/// k > 0 discrete, k < 0 continuous, k = 0 mixed with cutoff −a²/32.
pub fn classify_spectrum(p: &ModelParams) -> SpectrumClass {
    if p.k > 0.0 {
        SpectrumClass::PurelyDiscrete
    } else if p.k < 0.0 {
        SpectrumClass::PurelyContinuous
    } else {
        SpectrumClass::Mixed {
            cutoff: -p.a * p.a / 32.0,
        }
    }
}

/// Evidence from the numeric I₀/J₀ probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport {
    pub boundary: BoundaryClass,
    pub spectrum: SpectrumClass,
    pub i0_finite: bool,
    pub j0_finite: bool,
    pub i0_estimate: f64,
    pub j0_estimate: f64,
}

/// Number of rungs δ = ε·2^{−j} in the convergence ladder.
const LADDER_RUNGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Verdict {
    Finite(f64),
    Infinite,
}

/// Decides convergence of an increasing sequence from its increments.
fn judge_ladder(values: &[f64]) -> std::result::Result<Verdict, String> {
    if values.iter().any(|v| !v.is_finite() || *v > 1e250) {
        return Ok(Verdict::Infinite);
    }
    let n = values.len();
    let last = values[n - 1];
    let inc: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &inc[inc.len() - 12..];
    // Increments below this floor are quadrature noise.
    let floor = 1e-12 * last.abs();
    let ratios: Vec<f64> = tail
        .windows(2)
        .filter(|w| w[0].abs() > floor && w[1].abs() > floor)
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.len() < 5 {
        if tail[tail.len() - 3..]
            .iter()
            .all(|d| d.abs() <= 1e3 * floor)
        {
            return Ok(Verdict::Finite(last));
        }
        return Err("too few resolved increments".into());
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let r = sorted[sorted.len() / 2];
    let spread = sorted[sorted.len() - 2] - sorted[1];
    if r >= 0.99 && spread < 0.05 {
        return Ok(Verdict::Infinite);
    }
    if r <= 0.97 && r > -1.0 && spread < 0.05 {
        let d = inc[inc.len() - 1];
        return Ok(Verdict::Finite(last + d * r / (1.0 - r)));
    }
    Err(format!(
        "increment ratio {r:.4} (spread {spread:.3}) is undecided"
    ))
}

/// Numeric Feller probe of the origin.
///
/// Truncated versions I₀(δ) = ∫_δ^ε S[δ,z] m̃(z) dz and J₀(δ) = ∫_δ^ε S[z,ε] m̃(z) dz
/// are evaluated along δ = ε·2^{−j}, j ≤ 40. A limit is declared finite when
/// the increments decay geometrically and infinite when they do not decay.
pub fn classify_origin_numeric(p: &ModelParams, eps: f64) -> Result<BoundaryReport> {
    p.check_open(eps)?;
    let spec = QuadSpec::default().with_abs_tol(1e-300).with_rel_tol(1e-12);
    let c = 1.0 / (SQRT_2 * p.a);
    // 2f(z) − 2f(y); the integrands only need differences of f.
    let df2 = |z: f64, y: f64| 2.0 * (f_unchecked(p, z) - f_unchecked(p, y));
    // In u = ln z the integrands become smooth on every rung.
    let i0_integrand = |u: f64, delta: f64| {
        let z = u.exp();
        let growth = -df2(z, delta);
        let bracket = if growth > 700.0 {
            f64::INFINITY
        } else {
            growth.exp_m1()
        };
        c * z.powf(p.k - 0.5) * bracket
    };
    let j0_integrand = |u: f64| {
        let z = u.exp();
        c * z.powf(p.k - 0.5) * (-(df2(eps, z)).exp_m1())
    };
    let mut i_vals = Vec::with_capacity(LADDER_RUNGS);
    let mut j_vals = Vec::with_capacity(LADDER_RUNGS);
    let mut j_acc = 0.0;
    let mut i_diverged = false;
    let mut upper = eps;
    let ln_eps = eps.ln();
    for j in 1..=LADDER_RUNGS {
        let delta = eps * 0.5f64.powi(j as i32);
        if !i_diverged {
            let v = match integrate(|u| i0_integrand(u, delta), delta.ln(), ln_eps, spec) {
                Ok(v) => v,
                Err(NumericsError::NonFinite { .. }) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            if !v.is_finite() || v > 1e250 {
                i_diverged = true;
            }
            i_vals.push(v);
        }
        j_acc += integrate(j0_integrand, delta.ln(), upper.ln(), spec)?;
        j_vals.push(j_acc);
        upper = delta;
    }
    let verdict = |vals: &[f64], name: &str| -> Result<Verdict> {
        judge_ladder(vals).map_err(|m| ModelError::Inconclusive(format!("{name}: {m}")))
    };
    let iv = if i_diverged {
        Verdict::Infinite
    } else {
        verdict(&i_vals, "I0")?
    };
    let jv = verdict(&j_vals, "J0")?;
    let (i0_finite, i0_estimate) = match iv {
        Verdict::Finite(v) => (true, v),
        Verdict::Infinite => (false, f64::INFINITY),
    };
    let (j0_finite, j0_estimate) = match jv {
        Verdict::Finite(v) => (true, v),
        Verdict::Infinite => (false, f64::INFINITY),
    };
    let boundary = match (i0_finite, j0_finite) {
        (true, true) => BoundaryClass::Regular,
        (true, false) => BoundaryClass::Exit,
        (false, false) => BoundaryClass::Natural,
        (false, true) => {
            return Err(ModelError::Inconclusive(
                "I0 infinite with J0 finite matches no boundary class".into(),
            ))
        }
    };
    Ok(BoundaryReport {
        boundary,
        spectrum: classify_spectrum(p),
        i0_finite,
        j0_finite,
        i0_estimate,
        j0_estimate,
    })
}

/// Liouville coordinate z and potential U at x.
pub fn liouville(p: &ModelParams, x: f64) -> Result<(f64, f64)> {
    p.check_open(x)?;
    let (k, a) = (p.k, p.a);
    if k == 0.0 {
        return Ok((x.ln() / a, x + a * a / 32.0));
    }
    let z = x.powf(k) / (a * k);
    let u = x.powf(-2.0 * k) * (32.0 * x.powf(2.0 * k + 1.0) + a * a * (4.0 * k + 1.0)) / 32.0;
    Ok((z, u))
}

/// Inverse of the Liouville coordinate.
pub fn liouville_inverse(p: &ModelParams, z: f64) -> f64 {
    let (k, a) = (p.k, p.a);
    if k == 0.0 {
        (a * z).exp()
    } else {
        (a * k * z).powf(1.0 / k)
    }
}

/// Ã applied to a function known only through its values, by central
/// differences with step h.
pub fn apply_generator_fd<F: Fn(f64) -> f64>(p: &ModelParams, g: F, x: f64, h: f64) -> f64 {
    let (d1, d2) = crate::numerics::fd_derivatives(g, x, h);
    let s = vol_unchecked(p, x);
    drift_tilde_unchecked(p, x) * d1 + 0.5 * s * s * d2
}
