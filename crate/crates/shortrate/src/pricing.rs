//! Bond prices, yield curves and a generic pricer for European payoffs
//! g(X_T) discounted at the short rate.
//!
//! Every price is split as u = e^{−x(T−t)} g(x) + e^{−f(x)} w, where w is a
//! Duhamel integral of the source q = (∂_t + Ã)[e^{−x(T−t)+f(x)} g(x)]
//! against the transformed density Γ̃. Internally the source is carried in
//! reduced form q_r = e^{−f} q = e^{−ξτ}(α + βτ + γτ²), so the time
//! integrals against e^{λ(s−t)} are closed-form.
//!
//! The two bond routines subtract the large-|λ| behaviour of each spectral
//! term and add it back through the λ = 0 Green operator G₀ and its square,
//! which makes the remaining series/integral converge quickly.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{self, ModelError, ModelParams};
use crate::numerics::{
    fd_derivatives, integrate, levin_integral, CompensatedSum, ErrorSlot, NumericsError, QuadSpec,
};
use crate::specfun::{self, SpecfunError};
use crate::spectral::{
    self, psi_n, Backend, DensityField, EigenSystem, PsiRho, SpectralError, PSI_RHO_X_MIN, TAU_MIN,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("x = {x} outside [0, {l}]")]
    OutOfDomain { x: f64, l: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("horizon T - t = {tau} is below the minimum {tau_min}")]
    HorizonTooShort { tau: f64, tau_min: f64 },
    #[error("series not converged: last term {last_term:e} against partial sum {partial_sum:e} after {terms} terms")]
    SeriesNotConverged {
        terms: usize,
        last_term: f64,
        partial_sum: f64,
    },
    #[error("bond price {bond} at maturity {maturity} violates e^(-L T) < B <= 1")]
    BoundViolation { maturity: f64, bond: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

pub type Result<T> = std::result::Result<T, PricingError>;

/// Below this |κ d| the exponential-polynomial integral uses its series.
const SERIES_SWITCH: f64 = 0.5;
/// Relative size of the last bond series term that counts as converged.
const SERIES_TOL: f64 = 1e-10;
/// Upper limit of u = √(L/ξ) in continuous-spectrum ξ-integrals.
const U_MAX: f64 = 1000.0;
/// Levin collocation is used where the Bessel argument exceeds this.
const LEVIN_Z_MIN: f64 = 25.0;
/// Smallest phase span w·(b − a) handed to Levin collocation.
const LEVIN_MIN_PHASE: f64 = 4.0 * PI;
const LEVIN_NODES: usize = 16;
/// Absolute accuracy of each ρ-node of a continuous-spectrum price.
const RHO_NODE_TOL: f64 = 1e-13;
/// Width of the first ρ-panel for the k = −1/2 bond remainder.
const RHO_PANEL0: f64 = 1.0;
const MAX_RHO_PANELS: usize = 24;
/// Absolute accuracy of each ρ-panel, relative to the bond price.
const RHO_PANEL_TOL: f64 = 1e-11;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A payoff g with its first two derivatives. Kinks (points where g′
/// jumps) contribute a point source to q and are handled exactly.
#[derive(Clone)]
pub struct Payoff {
    name: String,
    g: Scalar,
    g_prime: Scalar,
    g_double_prime: Scalar,
    kinks: Vec<(f64, f64)>,
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Payoff")
            .field("name", &self.name)
            .field("kinks", &self.kinks)
            .finish()
    }
}

impl Payoff {
    pub fn new<G, G1, G2>(name: &str, g: G, g_prime: G1, g_double_prime: G2) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        G1: Fn(f64) -> f64 + Send + Sync + 'static,
        G2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            g: Arc::new(g),
            g_prime: Arc::new(g_prime),
            g_double_prime: Arc::new(g_double_prime),
            kinks: Vec::new(),
        }
    }

    /// Adds a kink at `at` where g′ jumps by `jump` (right minus left).
    pub fn with_kink(mut self, at: f64, jump: f64) -> Self {
        self.kinks.push((at, jump));
        self.kinks.sort_by(|a, b| a.0.total_cmp(&b.0));
        self
    }

    /// g ≡ 1, the zero-coupon bond.
    pub fn one() -> Self {
        Self::new("one", |_| 1.0, |_| 0.0, |_| 0.0)
    }

    /// g(x) = x.
    pub fn linear() -> Self {
        Self::new("linear", |x| x, |_| 1.0, |_| 0.0)
    }

    /// g(x) = (K − x)⁺.
    pub fn put_on_rate(strike: f64) -> Self {
        Self::new(
            "put-on-rate",
            move |x| (strike - x).max(0.0),
            move |x| if x < strike { -1.0 } else { 0.0 },
            |_| 0.0,
        )
        .with_kink(strike, 1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn g_prime(&self, x: f64) -> f64 {
        (self.g_prime)(x)
    }

    pub fn g_double_prime(&self, x: f64) -> f64 {
        (self.g_double_prime)(x)
    }

    pub fn kinks(&self) -> &[(f64, f64)] {
        &self.kinks
    }

    fn interior_kinks(&self, l: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.kinks
            .iter()
            .copied()
            .filter(move |&(k, _)| k > 0.0 && k < l)
    }
}

/// ∫₀^d e^{−κv}(c₀ + c₁v + c₂v²) dv.
pub(crate) fn exp_poly_integral(kappa: f64, d: f64, c: [f64; 3]) -> f64 {
    if (kappa * d).abs() <= SERIES_SWITCH {
        exp_poly_series(kappa, d, c)
    } else {
        exp_poly_direct(kappa, d, c)
    }
}

/// Closed form by repeated integration by parts; cancels for small |κd|.
pub(crate) fn exp_poly_direct(kappa: f64, d: f64, c: [f64; 3]) -> f64 {
    let e = (-kappa * d).exp();
    let p_end = [
        c[0] + d * (c[1] + d * c[2]),
        c[1] + 2.0 * c[2] * d,
        2.0 * c[2],
    ];
    let p_start = [c[0], c[1], 2.0 * c[2]];
    let mut sum = CompensatedSum::new();
    let mut kp = kappa;
    for j in 0..3 {
        sum.add((p_start[j] - e * p_end[j]) / kp);
        kp *= kappa;
    }
    sum.value()
}

/// Σ_m (−κ)^m/m! Σ_j c_j d^{m+j+1}/(m+j+1).
pub(crate) fn exp_poly_series(kappa: f64, d: f64, c: [f64; 3]) -> f64 {
    let mut sum = CompensatedSum::new();
    let mut coef = 1.0;
    for m in 0..60 {
        let mut term = 0.0;
        let mut dp = d.powi(m + 1);
        for (j, cj) in c.iter().enumerate() {
            term += cj * dp / (m + j as i32 + 1) as f64;
            dp *= d;
        }
        let t = coef * term;
        sum.add(t);
        if t.abs() <= 1e-18 * sum.value().abs() && m > 2 {
            break;
        }
        coef *= -kappa / (m + 1) as f64;
    }
    sum.value()
}

/// Time kernel of the k = 1/2 bond series,
/// h = (a²ξ/2) e^{ξ(√2/a − D)} ∫₀^D (D − r)² e^{(λ+ξ)r} dr with D = T − t.
pub fn h_kernel_k_half(a: f64, t: f64, big_t: f64, xi: f64, lambda: f64) -> Result<f64> {
    let d = big_t - t;
    if !(a > 0.0) || !(d >= 0.0) || !(xi >= 0.0) || !lambda.is_finite() || !d.is_finite() {
        return Err(PricingError::InvalidArgument(format!(
            "h kernel needs a > 0, T >= t, xi >= 0 (a = {a}, t = {t}, T = {big_t}, xi = {xi})"
        )));
    }
    let tail = exp_poly_integral(-(lambda + xi), d, [d * d, -2.0 * d, 1.0]);
    Ok(0.5 * a * a * xi * (xi * (std::f64::consts::SQRT_2 / a - d)).exp() * tail)
}

/// Coefficients (α, β, γ) of the reduced source
/// q_r(τ, ξ) = e^{−ξτ}(α + βτ + γτ²), τ = T − s.
fn reduced_coeffs(p: &ModelParams, pay: &Payoff, xi: f64) -> [f64; 3] {
    let mu = model::drift_unchecked(p, xi);
    let s = model::vol_unchecked(p, xi);
    let s2 = s * s;
    let (g, g1, g2) = (pay.g(xi), pay.g_prime(xi), pay.g_double_prime(xi));
    [mu * g1 + 0.5 * s2 * g2, -(mu * g + s2 * g1), 0.5 * s2 * g]
}

fn reduced_source(c: [f64; 3], xi: f64, tau: f64) -> f64 {
    (-xi * tau).exp() * (c[0] + tau * (c[1] + tau * c[2]))
}

/// ∂_s q_r = −∂_τ q_r.
fn reduced_source_ds(c: [f64; 3], xi: f64, tau: f64) -> f64 {
    xi * reduced_source(c, xi, tau) - (-xi * tau).exp() * (c[1] + 2.0 * c[2] * tau)
}

/// ∫_{t+τ₀}^T e^{λ(s−t)} q_r(T − s, ξ) ds, where D = T − t.
fn reduced_time_integral(c: [f64; 3], xi: f64, lambda: f64, d: f64, tau0: f64) -> f64 {
    let dd = d - tau0;
    if dd <= 0.0 {
        return 0.0;
    }
    // τ = dd − v.
    let poly = [
        c[0] + dd * (c[1] + dd * c[2]),
        -c[1] - 2.0 * c[2] * dd,
        c[2],
    ];
    (lambda * tau0 - xi * dd).exp() * exp_poly_integral(-(lambda + xi), dd, poly)
}

/// m̃(ξ) e^{f(ξ)}.
fn source_weight(p: &ModelParams, xi: f64) -> f64 {
    2.0 / (p.a() * p.a()) * xi.powf(p.k() - 1.5) * (-model::f_unchecked(p, xi)).exp()
}

fn check_times(t: f64, big_t: f64) -> Result<f64> {
    if !(t >= 0.0 && t < big_t) || !big_t.is_finite() {
        return Err(PricingError::InvalidArgument(format!(
            "need 0 <= t < T, got t = {t}, T = {big_t}"
        )));
    }
    Ok(big_t - t)
}

fn check_closed(p: &ModelParams, x: f64) -> Result<()> {
    if x >= 0.0 && x <= p.l() {
        Ok(())
    } else {
        Err(PricingError::OutOfDomain { x, l: p.l() })
    }
}

/// q(t, x) = (∂_t + Ã)[e^{−x(T−t)+f(x)} g(x)] for x ∈ (0, L), t ≤ T.
pub fn q_source(p: &ModelParams, pay: &Payoff, t: f64, x: f64, big_t: f64) -> Result<f64> {
    q_source_offset(p, pay, t, x, big_t, 0.0)
}

/// [`q_source`] with f replaced by f + c.
pub fn q_source_offset(
    p: &ModelParams,
    pay: &Payoff,
    t: f64,
    x: f64,
    big_t: f64,
    c: f64,
) -> Result<f64> {
    if !(x > 0.0 && x < p.l()) {
        return Err(PricingError::OutOfDomain { x, l: p.l() });
    }
    if !(t <= big_t) || !t.is_finite() || !big_t.is_finite() {
        return Err(PricingError::InvalidArgument(format!(
            "need t <= T, got t = {t}, T = {big_t}"
        )));
    }
    let coeffs = reduced_coeffs(p, pay, x);
    Ok((model::f_unchecked(p, x) + c).exp() * reduced_source(coeffs, x, big_t - t))
}

/// ∫₀^L G₀(x, ξ) w(ξ) dξ with G₀(x, ξ) = S(0, x∧ξ] S[x∨ξ, L] / S(0, L].
/// At a natural origin the ratio S(0, ·]/S(0, L] is 1.
pub(crate) fn green0<W: Fn(f64) -> f64>(
    p: &ModelParams,
    w: W,
    x: f64,
    spec: QuadSpec,
) -> Result<f64> {
    let l = p.l();
    let finite_origin = model::scale_measure(p, 0.0, l).is_finite();
    let lower = |z: f64| {
        if finite_origin {
            model::scale_measure(p, 0.0, z) / model::scale_measure(p, 0.0, l)
        } else {
            1.0
        }
    };
    let upper = |z: f64| model::scale_measure(p, z, l);
    // A vanishing factor also skips an integral that may diverge at the boundary.
    let (up_x, low_x) = (upper(x), lower(x));
    let left = if x > 0.0 && up_x != 0.0 {
        up_x * integrate(|z| lower(z) * w(z), 0.0, x, spec)?
    } else {
        0.0
    };
    let right = if x < l && low_x != 0.0 {
        low_x * integrate(|z| upper(z) * w(z), x, l, spec)?
    } else {
        0.0
    };
    Ok(left + right)
}

/// G₀[w](x) + G₀[m̃ G₀[w₂]](x), accurate to about 1e-14 once lifted by e^{−f(x)}.
fn green_terms<W1, W2>(p: &ModelParams, w1: W1, w2: Option<W2>, x: f64) -> Result<f64>
where
    W1: Fn(f64) -> f64,
    W2: Fn(f64) -> f64,
{
    let abs_tol = 1e-14 * model::f_unchecked(p, x).exp();
    let spec = QuadSpec::default()
        .with_abs_tol(abs_tol)
        .with_rel_tol(1e-12);
    let first = green0(p, w1, x, spec)?;
    let second = match w2 {
        Some(w2) => {
            let slot = ErrorSlot::<PricingError>::new();
            let r = green0(
                p,
                |z| {
                    slot.guard(
                        green0(p, &w2, z, spec).map(|g| model::speed_density_unchecked(p, z) * g),
                    )
                },
                x,
                spec,
            );
            slot.finish(r)?
        }
        None => 0.0,
    };
    Ok(first + second)
}

/// Zero-coupon bond for k = 1/2 from the eigen-system `sys`, with
/// B(t, 0, T) = 1 and B(t, L, T) = e^{−L(T−t)}.
pub fn bond_k_half(sys: &EigenSystem, t: f64, x: f64, big_t: f64) -> Result<f64> {
    let p = *sys.params();
    let d = check_times(t, big_t)?;
    check_closed(&p, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x == p.l() {
        return Ok((-p.l() * d).exp());
    }
    let one = Payoff::one();
    let coeffs = |xi: f64| reduced_coeffs(&p, &one, xi);
    let w1 = |xi: f64| source_weight(&p, xi) * reduced_source(coeffs(xi), xi, d);
    let w2 = |xi: f64| source_weight(&p, xi) * reduced_source_ds(coeffs(xi), xi, d);
    let head = green_terms(&p, w1, Some(w2), x)?;

    let spec = QuadSpec::default().with_abs_tol(1e-16).with_rel_tol(1e-12);
    let mut series = CompensatedSum::new();
    let mut last = 0.0;
    for pair in sys.pairs() {
        let lambda = pair.lambda;
        let slot = ErrorSlot::<PricingError>::new();
        let r = integrate(
            |xi| {
                slot.guard(
                    psi_n(sys, pair.n, xi)
                        .map_err(PricingError::from)
                        .map(|psi| {
                            let c = coeffs(xi);
                            let rem = reduced_time_integral(c, xi, lambda, d, 0.0)
                                - reduced_source(c, xi, d) / -lambda
                                - reduced_source_ds(c, xi, d) / (lambda * lambda);
                            psi * source_weight(&p, xi) * rem
                        }),
                )
            },
            0.0,
            p.l(),
            spec,
        );
        let inner = slot.finish(r)?;
        last = psi_n(sys, pair.n, x)? * inner;
        series.add(last);
    }
    let lift = (-model::f_unchecked(&p, x)).exp();
    let bond = (-x * d).exp() + lift * (head + series.value());
    if (lift * last).abs() > SERIES_TOL * bond.abs() {
        return Err(PricingError::SeriesNotConverged {
            terms: sys.n_max(),
            last_term: lift * last,
            partial_sum: bond,
        });
    }
    Ok(bond)
}

/// ∫ over ξ ∈ [1e-6 L, L] of m̃(ξ)e^{f(ξ)} ψ(ρ, ξ) r(ξ), written in u = √(L/ξ).
/// `r` is the reduced source quantity; kinks split the range. Where the
/// Bessel argument wu is large the integrand is Re[F(u)e^{iwu}] with F
/// smooth, and those panels use Levin collocation.
fn continuous_xi_integral<R: Fn(f64) -> f64>(
    p: &ModelParams,
    psi: &PsiRho,
    r: R,
    splits: &[f64],
    spec: QuadSpec,
) -> Result<f64> {
    let l = p.l();
    let scale = 2.0 / (p.a() * p.a());
    // m̃ e^f ψ = (2/a²) ξ^{−2} · ξ^{ν/2}ψ and dξ = 2L u^{−3} du.
    let weight = |u: f64| scale * r(l / (u * u)) * 2.0 * u / l;
    let slot = ErrorSlot::<PricingError>::new();
    let integrand = |u: f64| {
        slot.guard(
            psi.scaled_at_u(u)
                .map_err(PricingError::from)
                .map(|s| s * weight(u)),
        )
    };
    let (w, nu) = (psi.w(), psi.nu());
    let u_switch = (LEVIN_Z_MIN.max(2.0 * nu * nu) / w).max(1.0);

    let mut direct = vec![1.0];
    let mut u = 1.0;
    while u * 2.0 < u_switch.min(U_MAX) {
        u *= 2.0;
        direct.push(u);
    }
    direct.push(u_switch.min(U_MAX));
    let mut levin = Vec::new();
    if u_switch < U_MAX {
        let mut u = u_switch;
        while u < U_MAX {
            levin.push(u);
            u *= 2.0;
        }
        levin.push(U_MAX);
    }
    for &k in splits {
        let u = (l / k).sqrt();
        if u > 1.0 && u < U_MAX {
            if u < u_switch {
                direct.push(u);
            } else {
                levin.push(u);
            }
        }
    }
    for cuts in [&mut direct, &mut levin] {
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
    }

    let mut sum = CompensatedSum::new();
    for win in direct.windows(2) {
        // Later panels only need accuracy relative to the running total.
        let panel_spec = spec.with_abs_tol(spec.abs_tol.max(spec.rel_tol * sum.value().abs()));
        let r = integrate(integrand, win[0], win[1], panel_spec);
        if let Some(e) = slot.take() {
            return Err(e);
        }
        sum.add(r?);
    }
    let amp = psi.hankel_amplitude();
    for win in levin.windows(2) {
        let f = |u: f64| {
            let z = w * u;
            let (pp, qq) = specfun::hankel_pq(nu, z);
            amp * Complex64::new(pp, qq) * ((2.0 / (PI * z)).sqrt() * weight(u))
        };
        // Collocation needs a few oscillations per panel; short pieces left
        // by kink splits go to the adaptive rule.
        let v = if w * (win[1] - win[0]) < LEVIN_MIN_PHASE {
            let r = integrate(
                integrand,
                win[0],
                win[1],
                spec.with_abs_tol(spec.abs_tol.max(spec.rel_tol * sum.value().abs())),
            );
            if let Some(e) = slot.take() {
                return Err(e);
            }
            r?
        } else {
            levin_integral(f, win[0], win[1], w, LEVIN_NODES)?.re
        };
        sum.add(v);
    }
    Ok(sum.value())
}

fn nu_allows_second_order(p: &ModelParams) -> bool {
    p.bessel_order() > 1.25
}

/// Zero-coupon bond for k = −1/2, T − t ≥ `TAU_MIN`, B(t, L, T) = e^{−L(T−t)}.
pub fn bond_k_neg_half(p: &ModelParams, t: f64, x: f64, big_t: f64) -> Result<f64> {
    if !p.is_k_neg_half() {
        return Err(SpectralError::RequiresKNegHalf.into());
    }
    let d = check_times(t, big_t)?;
    if d < TAU_MIN * (1.0 - 1e-12) {
        return Err(PricingError::HorizonTooShort {
            tau: d,
            tau_min: TAU_MIN,
        });
    }
    check_closed(p, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x == p.l() {
        return Ok((-p.l() * d).exp());
    }
    let l = p.l();
    let u_x = (l / x).sqrt();
    let second = nu_allows_second_order(p);
    let one = Payoff::one();
    let coeffs = |xi: f64| reduced_coeffs(p, &one, xi);
    let w1 = |xi: f64| source_weight(p, xi) * reduced_source(coeffs(xi), xi, d);
    let w2 = |xi: f64| source_weight(p, xi) * reduced_source_ds(coeffs(xi), xi, d);
    let head = if second {
        green_terms(p, w1, Some(w2), x)?
    } else {
        green_terms(p, w1, None::<fn(f64) -> f64>, x)?
    };

    let inner_spec = QuadSpec::default().with_rel_tol(1e-10);
    let outer_spec = QuadSpec::default().with_abs_tol(1e-12).with_rel_tol(1e-9);
    let slot = ErrorSlot::<PricingError>::new();
    let rho_integrand = |rho: f64| {
        let lambda = -l * rho * rho;
        slot.guard((|| {
            let psi = PsiRho::new(p, rho)?;
            let at_x = psi.scaled_at_u(u_x)?;
            let spec = inner_spec.with_abs_tol(RHO_NODE_TOL / at_x.abs().max(1e-300));
            let inner = continuous_xi_integral(
                p,
                &psi,
                |xi| {
                    let c = coeffs(xi);
                    let mut rem = reduced_time_integral(c, xi, lambda, d, 0.0)
                        - reduced_source(c, xi, d) / -lambda;
                    if second {
                        rem -= reduced_source_ds(c, xi, d) / (lambda * lambda);
                    }
                    rem
                },
                &[],
                spec,
            )?;
            Ok::<f64, PricingError>(at_x * inner)
        })())
    };
    let mut tail = CompensatedSum::new();
    let mut lo = 0.0;
    let mut hi = RHO_PANEL0;
    let mut quiet = 0;
    let mut converged = false;
    let mut last = 0.0;
    let free_and_head = (-x * d).exp() + head * (-model::f_unchecked(p, x)).exp();
    let outer_spec =
        outer_spec.with_abs_tol(outer_spec.abs_tol.max(RHO_PANEL_TOL * free_and_head.abs()));
    for _ in 0..MAX_RHO_PANELS {
        let r = integrate(rho_integrand, lo, hi, outer_spec);
        if let Some(e) = slot.take() {
            return Err(e);
        }
        last = r?;
        tail.add(last);
        let bond = free_and_head + tail.value();
        if last.abs() <= SERIES_TOL * bond.abs() {
            quiet += 1;
            if quiet == 2 {
                converged = true;
                break;
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !converged {
        return Err(PricingError::SeriesNotConverged {
            terms: MAX_RHO_PANELS,
            last_term: last,
            partial_sum: tail.value(),
        });
    }
    Ok((-x * d).exp() + (-model::f_unchecked(p, x)).exp() * head + tail.value())
}

/// Result of the generic pricer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralPrice {
    pub value: f64,
    /// Contribution of s ∈ [t, t + τ_min], already included in `value`.
    pub sliver: f64,
    /// Heuristic size of the neglected O(τ_min³) sliver term.
    pub sliver_error: f64,
}

/// Generic price E[e^{−∫r} g(X_T)] from the transition density of `field`,
/// for T − t ≥ `TAU_MIN`.
pub fn price_general(
    field: &DensityField,
    pay: &Payoff,
    t: f64,
    x: f64,
    big_t: f64,
) -> Result<f64> {
    price_general_report(field, pay, t, x, big_t, 0.0).map(|r| r.value)
}

/// [`price_general`] computed with f + c in place of f; the value does not
/// depend on c.
pub fn price_general_offset(
    field: &DensityField,
    pay: &Payoff,
    t: f64,
    x: f64,
    big_t: f64,
    c: f64,
) -> Result<f64> {
    price_general_report(field, pay, t, x, big_t, c).map(|r| r.value)
}

pub fn price_general_report(
    field: &DensityField,
    pay: &Payoff,
    t: f64,
    x: f64,
    big_t: f64,
    c: f64,
) -> Result<GeneralPrice> {
    let p = *field.params();
    let l = p.l();
    let d = check_times(t, big_t)?;
    if d < TAU_MIN * (1.0 - 1e-12) {
        return Err(PricingError::HorizonTooShort {
            tau: d,
            tau_min: TAU_MIN,
        });
    }
    if !c.is_finite() {
        return Err(PricingError::InvalidArgument(format!(
            "offset must be finite, got {c}"
        )));
    }
    check_closed(&p, x)?;
    let free = (-x * d).exp() * pay.g(x);
    if x == l || x == 0.0 {
        return Ok(GeneralPrice {
            value: free,
            sliver: 0.0,
            sliver_error: 0.0,
        });
    }
    let scale = c.exp();
    let tau0 = TAU_MIN.min(d);
    let kinks: Vec<(f64, f64)> = pay.interior_kinks(l).collect();
    let kink_coeffs = |k: f64, jump: f64| {
        let s = model::vol_unchecked(&p, k);
        [0.5 * s * s * jump, 0.0, 0.0]
    };
    let coeffs = |xi: f64| reduced_coeffs(&p, pay, xi);

    let main = match field.backend() {
        Backend::Discrete(sys) => {
            let spec = QuadSpec::default()
                .with_abs_tol(1e-16 * scale)
                .with_rel_tol(1e-11);
            let mut bounds = vec![0.0];
            bounds.extend(kinks.iter().map(|k| k.0));
            bounds.push(l);
            let mut sum = CompensatedSum::new();
            for pair in sys.pairs() {
                let lambda = pair.lambda;
                let psi_x = psi_n(sys, pair.n, x)?;
                let slot = ErrorSlot::<PricingError>::new();
                let integrand = |xi: f64| {
                    slot.guard(
                        psi_n(sys, pair.n, xi)
                            .map_err(PricingError::from)
                            .map(|psi| {
                                scale
                                    * psi
                                    * source_weight(&p, xi)
                                    * reduced_time_integral(coeffs(xi), xi, lambda, d, tau0)
                            }),
                    )
                };
                let mut inner = CompensatedSum::new();
                for w in bounds.windows(2) {
                    let r = integrate(integrand, w[0], w[1], spec);
                    if let Some(e) = slot.take() {
                        return Err(e);
                    }
                    inner.add(r?);
                }
                for &(k, jump) in &kinks {
                    inner.add(
                        scale
                            * psi_n(sys, pair.n, k)?
                            * source_weight(&p, k)
                            * reduced_time_integral(kink_coeffs(k, jump), k, lambda, d, tau0),
                    );
                }
                sum.add(psi_x * inner.value());
            }
            sum.value()
        }
        Backend::Continuous(cspec) => {
            let inner_spec = QuadSpec::default().with_rel_tol(1e-10);
            let outer_spec = cspec
                .quad
                .with_abs_tol(cspec.quad.abs_tol.min(1e-12) * scale);
            let rho_max = cspec.rho_max(l, tau0);
            let splits: Vec<f64> = kinks.iter().map(|k| k.0).collect();
            let slot = ErrorSlot::<PricingError>::new();
            let rho_integrand = |rho: f64| {
                let lambda = -l * rho * rho;
                slot.guard((|| {
                    let psi = PsiRho::new(&p, rho)?;
                    let at_x = psi.scaled_at_u((l / x).sqrt())? * x.powf(-0.5 * p.bessel_order());
                    let spec =
                        inner_spec.with_abs_tol(RHO_NODE_TOL * scale / at_x.abs().max(1e-300));
                    let mut inner = continuous_xi_integral(
                        &p,
                        &psi,
                        |xi| scale * reduced_time_integral(coeffs(xi), xi, lambda, d, tau0),
                        &splits,
                        spec,
                    )?;
                    for &(k, jump) in &kinks {
                        if k >= PSI_RHO_X_MIN * l {
                            inner += scale * 2.0 / (p.a() * p.a() * k * k)
                                * psi.eval_scaled(k)?
                                * reduced_time_integral(kink_coeffs(k, jump), k, lambda, d, tau0);
                        }
                    }
                    Ok::<f64, PricingError>(at_x * inner)
                })())
            };
            let r = integrate(rho_integrand, 0.0, rho_max, outer_spec);
            if let Some(e) = slot.take() {
                return Err(e);
            }
            r?
        }
    };

    let (sliver, sliver_error) = sliver(&p, pay, &kinks, x, d, tau0)?;
    let value = free + (-model::f_unchecked(&p, x) - c).exp() * main + sliver;
    Ok(GeneralPrice {
        value,
        sliver,
        sliver_error,
    })
}

/// Reduced contribution of s ∈ [t, t + τ₀]:
/// τ₀ q_r + τ₀²/2 (∂_s + A − x) q_r at (t, x), which treats q_r as smooth
/// through x. Each kink adds its point source and the jump of q_r beyond it,
/// both against a short-time Gaussian density.
fn sliver(
    p: &ModelParams,
    pay: &Payoff,
    kinks: &[(f64, f64)],
    x: f64,
    d: f64,
    tau0: f64,
) -> Result<(f64, f64)> {
    let l = p.l();
    let qr = |z: f64| reduced_source(reduced_coeffs(p, pay, z), z, d);
    let mut h = (1e-4 * l).min(0.25 * x.min(l - x));
    for &(k, _) in kinks {
        if (k - x).abs() > 1e-9 * l {
            h = h.min(0.25 * (k - x).abs());
        }
    }
    let (d1, d2) = fd_derivatives(qr, x, h);
    let s = model::vol_unchecked(p, x);
    let generator = model::drift_unchecked(p, x) * d1 + 0.5 * s * s * d2 - x * qr(x);
    let ds = reduced_source_ds(reduced_coeffs(p, pay, x), x, d);
    let first = tau0 * qr(x);
    let second = 0.5 * tau0 * tau0 * (ds + generator);
    let quad = QuadSpec::default().with_abs_tol(1e-14).with_rel_tol(1e-9);
    let mut kink_part = 0.0;
    for &(k, jump) in kinks {
        let sk = model::vol_unchecked(p, k);
        let weight = 0.5 * sk * sk * jump;
        kink_part += integrate(
            |r| short_time_density(p, x, k, r) * (-k * (d - r)).exp() * weight,
            0.0,
            tau0,
            quad,
        )?;

        // Beyond the kink, q_r minus its linear extension from the side of x.
        let side = if k >= x { 1.0 } else { -1.0 };
        let step = (1e-3 * l).min(0.25 * (k - x).abs()).max(1e-9 * l);
        let (k1, k2) = (k - side * step, k - side * 2.0 * step);
        let (c1, c2) = (reduced_coeffs(p, pay, k1), reduced_coeffs(p, pay, k2));
        let extended = |z: f64| {
            let t = (z - k1) / (k1 - k2);
            [0, 1, 2].map(|i| c1[i] + (c1[i] - c2[i]) * t)
        };
        let reach = 12.0
            * sk.max(model::vol_unchecked(p, (k + side * 0.1 * l).clamp(0.0, l)))
            * tau0.sqrt();
        let far = (k + side * reach).clamp(0.0, l);
        let (lo, hi) = if side > 0.0 { (k, far) } else { (far, k) };
        if hi > lo {
            let slot = ErrorSlot::<PricingError>::new();
            let r = integrate(
                |r| {
                    slot.guard(integrate(
                        |z| {
                            let tau = d - r;
                            let jump_q = reduced_source(reduced_coeffs(p, pay, z), z, tau)
                                - reduced_source(extended(z), z, tau);
                            short_time_density(p, x, z, r) * jump_q
                        },
                        lo,
                        hi,
                        quad,
                    ))
                },
                0.0,
                tau0,
                quad,
            );
            kink_part += slot.finish(r)?;
        }
    }
    Ok((
        first + second + kink_part,
        (second * tau0 / d.max(tau0)).abs(),
    ))
}

/// Discounted short-time transition density from x to z over time r, from
/// the unit-vol coordinate y = ∫dx/σ whose drift is b = −(a/4)x^{−k}.
fn short_time_density(p: &ModelParams, x: f64, z: f64, r: f64) -> f64 {
    if r <= 0.0 || z <= 0.0 {
        return 0.0;
    }
    let dy = lamperti(p, z) - lamperti(p, x);
    let mid = 0.5 * (x + z);
    let b = -0.25 * p.a() * mid.powf(-p.k());
    (-(dy * dy) / (2.0 * r) + b * dy - 0.5 * b * b * r - mid * r).exp()
        / ((2.0 * std::f64::consts::PI * r).sqrt() * model::vol_unchecked(p, z))
}

fn lamperti(p: &ModelParams, x: f64) -> f64 {
    if p.k() == 0.0 {
        x.ln() / p.a()
    } else {
        x.powf(p.k()) / (p.a() * p.k())
    }
}

/// One point of a yield curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub maturity: f64,
    pub bond: f64,
    pub yield_: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
}

/// Which bond pricer a curve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricerSelector {
    /// The closed-form spectral bond for k = ±1/2.
    Analytic,
    /// The generic density pricer with g ≡ 1.
    Duhamel,
}

/// A bond pricer with its spectral data built once.
#[derive(Debug, Clone)]
pub enum BondEngine {
    KHalf(EigenSystem),
    KNegHalf(ModelParams),
    Duhamel(DensityField),
}

impl BondEngine {
    pub fn new(p: &ModelParams, selector: PricerSelector) -> Result<Self> {
        match selector {
            PricerSelector::Analytic if p.is_k_half() => Ok(Self::KHalf(spectral::solve_eigen(
                p,
                spectral::DEFAULT_N_MAX,
            )?)),
            PricerSelector::Analytic if p.is_k_neg_half() => Ok(Self::KNegHalf(*p)),
            PricerSelector::Analytic => Err(SpectralError::Unsupported(p.k()).into()),
            PricerSelector::Duhamel => Ok(Self::Duhamel(DensityField::new(p)?)),
        }
    }

    pub fn params(&self) -> &ModelParams {
        match self {
            Self::KHalf(sys) => sys.params(),
            Self::KNegHalf(p) => p,
            Self::Duhamel(field) => field.params(),
        }
    }

    pub fn bond(&self, t: f64, x: f64, big_t: f64) -> Result<f64> {
        match self {
            Self::KHalf(sys) => bond_k_half(sys, t, x, big_t),
            Self::KNegHalf(p) => bond_k_neg_half(p, t, x, big_t),
            Self::Duhamel(field) => price_general(field, &Payoff::one(), t, x, big_t),
        }
    }
}

/// Yield to maturity Y = −ln B / τ of a bond price B with time to maturity τ.
pub fn yield_from_bond(bond: f64, tau: f64) -> f64 {
    -bond.ln() / tau
}

/// Bond prices and yields Y = −ln B / T at the given maturities (t = 0).
pub fn yield_curve(
    p: &ModelParams,
    selector: PricerSelector,
    x: f64,
    maturities: &[f64],
) -> Result<Curve> {
    yield_curve_with(&BondEngine::new(p, selector)?, x, maturities)
}

/// Maturities must be strictly increasing and at least `TAU_MIN`. Points
/// are evaluated in parallel; the result does not depend on the thread count.
pub fn yield_curve_with(engine: &BondEngine, x: f64, maturities: &[f64]) -> Result<Curve> {
    validate_maturities(maturities)?;
    let l = engine.params().l();
    let points = maturities
        .par_iter()
        .map(|&m| {
            let bond = engine.bond(0.0, x, m)?;
            if !(bond > (-l * m).exp() * (1.0 - 1e-9) && bond <= 1.0 + 1e-12) {
                return Err(PricingError::BoundViolation { maturity: m, bond });
            }
            Ok(CurvePoint {
                maturity: m,
                bond,
                yield_: yield_from_bond(bond, m),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve { points })
}

fn validate_maturities(maturities: &[f64]) -> Result<()> {
    if maturities.is_empty() {
        return Err(PricingError::InvalidArgument("no maturities given".into()));
    }
    for (i, &m) in maturities.iter().enumerate() {
        if !m.is_finite() || m < TAU_MIN {
            return Err(PricingError::InvalidArgument(format!(
                "maturity {m} is below the minimum {TAU_MIN}"
            )));
        }
        if i > 0 && !(m > maturities[i - 1]) {
            return Err(PricingError::InvalidArgument(
                "maturities must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}
