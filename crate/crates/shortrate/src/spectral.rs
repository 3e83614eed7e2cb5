//! Spectral representations of the transition density Γ̃ under the
//! transformed measure.
//!
//! For k = 1/2 the spectrum is discrete. The eigenvalues are the roots of
//! λ ↦ M(1 − λ/(a√2), 2; −2√2L/a) and ψ_n(x) = (a/√(2c_n)) x M(…; −2√2x/a).
//!
//! For k = −1/2 the spectrum is continuous, with λ(ρ) = −Lρ² and improper
//! eigenfunctions built from J_{±ν}, ν = 2√2/a. The resolvent Wronskian is
//! exposed as a consistency check.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{self, ModelParams};
use crate::numerics::{
    find_root, integrate, Bracket, CompensatedSum, ErrorSlot, NumericsError, QuadSpec, ROOT_TOL,
};
use crate::specfun::{self, SpecfunError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("discrete eigensolver requires k=1/2")]
    RequiresKHalf,
    #[error("continuous eigenfunctions require k=-1/2")]
    RequiresKNegHalf,
    #[error("no transition density representation for k = {0}")]
    Unsupported(f64),
    #[error("found {found} of {wanted} eigenvalues above lambda = {floor}")]
    BracketScanExhausted {
        found: usize,
        wanted: usize,
        floor: f64,
    },
    #[error("eigen-index {n} outside 1..={n_max}")]
    IndexOutOfRange { n: usize, n_max: usize },
    #[error("x = {x} outside the admissible range for L = {l}")]
    OutOfDomain { x: f64, l: f64 },
    #[error("horizon T - t = {tau} is below the minimum {tau_min}")]
    HorizonTooShort { tau: f64, tau_min: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Default truncation of the discrete series.
pub const DEFAULT_N_MAX: usize = 25;
/// Shortest horizon at which densities are evaluated pointwise.
pub const TAU_MIN: f64 = 0.01;
/// Target for the discrete tail envelope at `TAU_MIN`.
const TAIL_TARGET: f64 = 1e-12;
/// The eigenvalue scan stops at λ = −SCAN_FLOOR·a.
const SCAN_FLOOR: f64 = 1e4;
/// ψ(ρ, x) is refused for x below this fraction of L.
pub const PSI_RHO_X_MIN: f64 = 1e-6;
/// Continuous densities whose Gaussian separation exponent exceeds this are zero.
const SEPARATION_CUTOFF: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub n: usize,
    pub lambda: f64,
    pub c_n: f64,
}

/// Eigenpairs of Ã for k = 1/2, sorted by n (λ decreasing).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    params: ModelParams,
    pairs: Vec<EigenPair>,
    /// sup|ψ_N| · sup|ψ_N m̃| for the last pair, sampled on a grid.
    envelope: f64,
}

impl EigenSystem {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn n_max(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair(&self, n: usize) -> Result<&EigenPair> {
        if n == 0 || n > self.pairs.len() {
            return Err(SpectralError::IndexOutOfRange {
                n,
                n_max: self.pairs.len(),
            });
        }
        Ok(&self.pairs[n - 1])
    }

    /// Bound on the neglected terms Σ_{n>N} e^{λ_n τ} |ψ_n(x)ψ_n(y)| m̃(y).
    ///
    /// Uses the last pair's amplitude as B and assumes the eigenvalue gaps
    /// keep growing, which holds for this spectrum.
    pub fn tail_envelope(&self, tau: f64) -> f64 {
        let n = self.pairs.len();
        let last = self.pairs[n - 1].lambda;
        let gap = if n >= 2 {
            self.pairs[n - 2].lambda - last
        } else {
            -last
        };
        let ratio = (-gap * tau).exp();
        self.envelope * ((last - gap) * tau).exp() / (1.0 - ratio)
    }
}

fn require_k_half(p: &ModelParams) -> Result<()> {
    if p.is_k_half() {
        Ok(())
    } else {
        Err(SpectralError::RequiresKHalf)
    }
}

fn require_k_neg_half(p: &ModelParams) -> Result<()> {
    if p.is_k_neg_half() {
        Ok(())
    } else {
        Err(SpectralError::RequiresKNegHalf)
    }
}

/// M(1 − λ/(a√2), 2; −2√2x/a).
pub(crate) fn eigen_kummer(p: &ModelParams, lambda: f64, x: f64) -> specfun::Result<f64> {
    let alpha = 1.0 - lambda / (p.a() * SQRT_2);
    specfun::kummer_m(alpha, 2.0, -2.0 * SQRT_2 * x / p.a())
}

/// The eigenvalue condition M(1 − λ/(a√2), 2; −2√2L/a), zero at every eigenvalue.
pub fn eigen_residual(p: &ModelParams, lambda: f64) -> Result<f64> {
    require_k_half(p)?;
    Ok(eigen_kummer(p, lambda, p.l())?)
}

/// First `n_max` eigenpairs for k = 1/2.
///
/// The scan runs from λ = 0 downward in steps of a/√2, brackets each sign
/// change of M at x = L and refines it with Brent's method. c_n is the
/// integral of x e^{2√2x/a} M² over (0, L).
pub fn solve_eigen(p: &ModelParams, n_max: usize) -> Result<EigenSystem> {
    require_k_half(p)?;
    if n_max == 0 {
        return Err(SpectralError::InvalidArgument(
            "n_max must be positive".into(),
        ));
    }
    let lambdas = scan_eigenvalues(p, n_max)?;
    let pairs = lambdas
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            Ok(EigenPair {
                n: i + 1,
                lambda,
                c_n: normalization(p, lambda)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let envelope = amplitude(p, pairs[pairs.len() - 1])?;
    Ok(EigenSystem {
        params: *p,
        pairs,
        envelope,
    })
}

/// Smallest system with n_max ≥ 25 whose tail envelope at `tau` is below 1e-12.
pub fn solve_eigen_for_horizon(p: &ModelParams, tau: f64) -> Result<EigenSystem> {
    if !(tau > 0.0) {
        return Err(SpectralError::InvalidArgument(format!(
            "horizon must be positive, got {tau}"
        )));
    }
    let mut n = DEFAULT_N_MAX;
    loop {
        let sys = solve_eigen(p, n)?;
        if sys.tail_envelope(tau) < TAIL_TARGET {
            return Ok(sys);
        }
        n *= 2;
    }
}

fn scan_eigenvalues(p: &ModelParams, wanted: usize) -> Result<Vec<f64>> {
    let (a, l) = (p.a(), p.l());
    let floor = -SCAN_FLOOR * a;
    let step = a / SQRT_2;
    let mut roots = Vec::with_capacity(wanted);
    let mut hi = 0.0;
    let mut g_hi = eigen_kummer(p, hi, l)?;
    let mut j = 0u64;
    while roots.len() < wanted {
        j += 1;
        let lo = -(j as f64) * step;
        if lo < floor {
            return Err(SpectralError::BracketScanExhausted {
                found: roots.len(),
                wanted,
                floor,
            });
        }
        let g_lo = eigen_kummer(p, lo, l)?;
        if g_lo == 0.0 {
            roots.push(lo);
            // Step just past the root so the next bracket sees the new sign.
            hi = lo;
            g_hi = -g_hi;
            continue;
        }
        if g_lo * g_hi < 0.0 {
            let slot = ErrorSlot::<SpectralError>::new();
            let bracket = Bracket::from_values(lo, hi, g_lo, g_hi)?;
            let root = find_root(
                |lam| slot.guard(eigen_kummer(p, lam, l)),
                bracket,
                ROOT_TOL * lo.abs().max(1.0),
            );
            roots.push(slot.finish(Ok::<f64, SpectralError>(root))?);
        }
        hi = lo;
        g_hi = g_lo;
    }
    Ok(roots)
}

fn normalization(p: &ModelParams, lambda: f64) -> Result<f64> {
    let c = 2.0 * SQRT_2 / p.a();
    let spec = QuadSpec::default().with_abs_tol(1e-300).with_rel_tol(1e-12);
    let slot = ErrorSlot::<SpectralError>::new();
    let r = integrate(
        |x| {
            let m = slot.guard(eigen_kummer(p, lambda, x));
            x * (c * x).exp() * m * m
        },
        0.0,
        p.l(),
        spec,
    );
    slot.finish(r)
}

fn amplitude(p: &ModelParams, pair: EigenPair) -> Result<f64> {
    let pref = p.a() / (2.0 * pair.c_n).sqrt();
    let (mut sup_psi, mut sup_weighted) = (0.0f64, 0.0f64);
    for i in 1..128 {
        let x = p.l() * i as f64 / 128.0;
        let psi = pref * x * eigen_kummer(p, pair.lambda, x)?;
        sup_psi = sup_psi.max(psi.abs());
        sup_weighted = sup_weighted.max((psi * model::speed_density_unchecked(p, x)).abs());
    }
    // Grid maxima of an oscillating function undershoot slightly.
    Ok(2.0 * sup_psi * sup_weighted)
}

/// Normalized eigenfunction ψ_n(x) on [0, L], n starting at 1.
pub fn psi_n(sys: &EigenSystem, n: usize, x: f64) -> Result<f64> {
    let pair = sys.pair(n)?;
    let p = &sys.params;
    if !(x >= 0.0 && x <= p.l()) {
        return Err(SpectralError::OutOfDomain { x, l: p.l() });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(p.a() / (2.0 * pair.c_n).sqrt() * x * eigen_kummer(p, pair.lambda, x)?)
}

/// ψ(ρ, ·) for one ρ, with the x-independent Bessel factors precomputed.
#[derive(Debug, Clone, Copy)]
pub struct PsiRho {
    nu: f64,
    l: f64,
    w: f64,
    j_pos: f64,
    j_neg: f64,
    pref: f64,
}

impl PsiRho {
    pub fn new(p: &ModelParams, rho: f64) -> Result<Self> {
        require_k_neg_half(p)?;
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(SpectralError::InvalidArgument(format!(
                "rho must be positive, got {rho}"
            )));
        }
        let nu = p.bessel_order();
        let w = nu * rho;
        let jy = specfun::bessel_jy_all(nu, w)?;
        let k_abs = specfun::abs_k_imag(nu, w)?;
        let pref = (p.l() * rho / 2.0).sqrt() * PI / ((nu * PI).sin() * k_abs);
        Ok(Self {
            nu,
            l: p.l(),
            w,
            j_pos: jy.j,
            j_neg: jy.j_neg,
            pref,
        })
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= PSI_RHO_X_MIN * self.l && x <= self.l) {
            return Err(SpectralError::OutOfDomain { x, l: self.l });
        }
        let jy = specfun::bessel_jy_all(self.nu, self.w * (self.l / x).sqrt())?;
        let mut bracket = CompensatedSum::new();
        bracket.add(self.j_pos * jy.j_neg);
        bracket.add(-self.j_neg * jy.j);
        Ok(self.pref * x.powf(-0.5 * self.nu) * bracket.value())
    }

    /// x^{ν/2} ψ(ρ, x), which stays bounded as x → 0.
    pub fn eval_scaled(&self, x: f64) -> Result<f64> {
        if !(x >= PSI_RHO_X_MIN * self.l && x <= self.l) {
            return Err(SpectralError::OutOfDomain { x, l: self.l });
        }
        self.scaled_at_u((self.l / x).sqrt())
    }

    pub(crate) fn w(&self) -> f64 {
        self.w
    }

    pub(crate) fn nu(&self) -> f64 {
        self.nu
    }

    /// For large w·u, x^{ν/2} ψ(ρ, L/u²) = Re[A (P + iQ)(wu) e^{iwu}] √(2/(πwu)),
    /// where P, Q are the Hankel factors of order ν; returns A.
    pub(crate) fn hankel_amplitude(&self) -> Complex64 {
        let half = 0.5 * self.nu * PI;
        let c = Complex64::from_polar(self.j_pos, half) - Complex64::from_polar(self.j_neg, -half);
        self.pref * Complex64::from_polar(1.0, -0.25 * PI) * c
    }

    /// x^{ν/2} ψ(ρ, x) at x = L/u².
    pub(crate) fn scaled_at_u(&self, u: f64) -> Result<f64> {
        let jy = specfun::bessel_jy_all(self.nu, self.w * u)?;
        let mut bracket = CompensatedSum::new();
        bracket.add(self.j_pos * jy.j_neg);
        bracket.add(-self.j_neg * jy.j);
        Ok(self.pref * bracket.value())
    }
}

/// Improper eigenfunction ψ(ρ, x) for k = −1/2, x ∈ [1e-6·L, L].
pub fn psi_rho(p: &ModelParams, rho: f64, x: f64) -> Result<f64> {
    PsiRho::new(p, rho)?.eval(x)
}

/// Quadrature and truncation for the continuous-spectrum integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSpec {
    pub quad: QuadSpec,
    /// ρ is truncated where e^{−Lρ²τ} = eps.
    pub eps: f64,
}

impl Default for ContinuousSpec {
    fn default() -> Self {
        Self {
            quad: QuadSpec::default().with_abs_tol(1e-10).with_rel_tol(1e-10),
            eps: 1e-12,
        }
    }
}

impl ContinuousSpec {
    pub fn rho_max(&self, l: f64, tau: f64) -> f64 {
        ((1.0 / self.eps).ln() / (l * tau)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Discrete(EigenSystem),
    Continuous(ContinuousSpec),
}

/// A model paired with the representation used to evaluate Γ̃.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    params: ModelParams,
    backend: Backend,
}

impl DensityField {
    /// Picks the backend from the spectrum: k = 1/2 discrete (sized for
    /// `TAU_MIN`), k = −1/2 continuous.
    pub fn new(p: &ModelParams) -> Result<Self> {
        if p.is_k_half() {
            Ok(Self::discrete(solve_eigen_for_horizon(p, TAU_MIN)?))
        } else if p.is_k_neg_half() {
            Self::continuous(p, ContinuousSpec::default())
        } else {
            Err(SpectralError::Unsupported(p.k()))
        }
    }

    pub fn discrete(sys: EigenSystem) -> Self {
        Self {
            params: sys.params,
            backend: Backend::Discrete(sys),
        }
    }

    pub fn continuous(p: &ModelParams, spec: ContinuousSpec) -> Result<Self> {
        require_k_neg_half(p)?;
        spec.quad.validate()?;
        if !(spec.eps > 0.0 && spec.eps < 1.0) {
            return Err(SpectralError::InvalidArgument(format!(
                "eps must lie in (0, 1), got {}",
                spec.eps
            )));
        }
        Ok(Self {
            params: *p,
            backend: Backend::Continuous(spec),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }
}

/// A density value with a bound on the truncated remainder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    pub tail_bound: f64,
}

/// Γ̃(t, x; T, ·) with the x-dependent factors computed once.
#[derive(Debug, Clone)]
pub struct DensityRow<'a> {
    field: &'a DensityField,
    tau: f64,
    x: f64,
    /// e^{λ_n τ} ψ_n(x); discrete backend only.
    coeffs: Vec<f64>,
}

impl<'a> DensityRow<'a> {
    pub fn new(field: &'a DensityField, t: f64, x: f64, big_t: f64) -> Result<Self> {
        let p = &field.params;
        if !(t >= 0.0 && t < big_t) || !big_t.is_finite() {
            return Err(SpectralError::InvalidArgument(format!(
                "need 0 <= t < T, got t = {t}, T = {big_t}"
            )));
        }
        let tau = big_t - t;
        if tau < TAU_MIN * (1.0 - 1e-12) {
            return Err(SpectralError::HorizonTooShort {
                tau,
                tau_min: TAU_MIN,
            });
        }
        check_interior(p, x)?;
        let coeffs = match &field.backend {
            Backend::Discrete(sys) => (1..=sys.n_max())
                .map(|n| Ok((sys.pairs[n - 1].lambda * tau).exp() * psi_n(sys, n, x)?))
                .collect::<Result<Vec<_>>>()?,
            Backend::Continuous(_) => Vec::new(),
        };
        Ok(Self {
            field,
            tau,
            x,
            coeffs,
        })
    }

    pub fn at(&self, y: f64) -> Result<f64> {
        self.estimate(y).map(|e| e.value)
    }

    /// Defined on (0, L]; every eigenfunction vanishes at the cap, so y = L gives 0.
    pub fn estimate(&self, y: f64) -> Result<DensityEstimate> {
        let p = &self.field.params;
        if y == p.l() {
            return Ok(DensityEstimate {
                value: 0.0,
                tail_bound: 0.0,
            });
        }
        check_interior(p, y)?;
        let m = model::speed_density_unchecked(p, y);
        match &self.field.backend {
            Backend::Discrete(sys) => {
                let mut sum = CompensatedSum::new();
                for (n, c) in self.coeffs.iter().enumerate() {
                    sum.add(c * psi_n(sys, n + 1, y)?);
                }
                Ok(DensityEstimate {
                    value: m * sum.value(),
                    tail_bound: sys.tail_envelope(self.tau),
                })
            }
            Backend::Continuous(_)
                if self.x < PSI_RHO_X_MIN * p.l() || y < PSI_RHO_X_MIN * p.l() =>
            {
                // Deep in the natural-boundary region the density is below
                // any representable accuracy of the ρ-integral.
                Ok(DensityEstimate {
                    value: 0.0,
                    tail_bound: 0.0,
                })
            }
            Backend::Continuous(spec) => {
                let l = p.l();
                let (x, tau) = (self.x, self.tau);
                let nu = p.bessel_order();
                // Large-ρ amplitude of |ψ(ρ, ·)| from the Bessel asymptotics.
                let amp = |z: f64| {
                    4.0 / (nu * PI).sin().abs()
                        * (l / (PI * nu)).sqrt()
                        * (z / l).powf(0.25)
                        * z.powf(-0.5 * nu)
                };
                let scale = m * amp(x) * amp(y);
                // Gaussian decay in the Liouville distance between x and y.
                let dist = nu * ((l / x).sqrt() - (l / y).sqrt()).abs();
                let exponent = dist * dist / (4.0 * l * tau);
                if exponent > SEPARATION_CUTOFF {
                    return Ok(DensityEstimate {
                        value: 0.0,
                        tail_bound: scale * (PI / (l * tau)).sqrt() * (-exponent).exp(),
                    });
                }
                let rho_max = spec.rho_max(l, tau);
                let slot = ErrorSlot::<SpectralError>::new();
                let r = integrate(
                    |rho| {
                        slot.guard(PsiRho::new(p, rho).and_then(|psi| {
                            Ok(m * (-l * rho * rho * tau).exp() * psi.eval(x)? * psi.eval(y)?)
                        }))
                    },
                    0.0,
                    rho_max,
                    spec.quad,
                );
                Ok(DensityEstimate {
                    value: slot.finish(r)?,
                    tail_bound: scale * spec.eps / (2.0 * l * tau * rho_max),
                })
            }
        }
    }
}

fn check_interior(p: &ModelParams, x: f64) -> Result<()> {
    if x > 0.0 && x < p.l() {
        Ok(())
    } else {
        Err(SpectralError::OutOfDomain { x, l: p.l() })
    }
}

/// Γ̃(t, x; T, y) for T − t ≥ `TAU_MIN`.
pub fn density(field: &DensityField, t: f64, x: f64, big_t: f64, y: f64) -> Result<f64> {
    DensityRow::new(field, t, x, big_t)?.at(y)
}

/// Like [`density`], also reporting the truncation bound.
pub fn density_estimate(
    field: &DensityField,
    t: f64,
    x: f64,
    big_t: f64,
    y: f64,
) -> Result<DensityEstimate> {
    DensityRow::new(field, t, x, big_t)?.estimate(y)
}

/// (ψ_λ′φ_λ − ψ_λφ_λ′)/s̃ at x for k = −1/2, with
/// ψ_λ = x^{−ν/2} K_ν(ν√(λ/x)) and
/// φ_λ = x^{−ν/2}(I_ν(ν√(λ/x)) K_ν(ν√(λ/L)) − I_ν(ν√(λ/L)) K_ν(ν√(λ/x))).
/// The result does not depend on x and equals ½ K_ν(ν√(λ/L)).
pub fn greens_wronskian(p: &ModelParams, lambda: f64, x: f64) -> Result<f64> {
    require_k_neg_half(p)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SpectralError::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    check_interior(p, x)?;
    let nu = p.bessel_order();
    let ax = nu * (lambda / x).sqrt();
    let al = nu * (lambda / p.l()).sqrt();
    let (kx, kpx) = (specfun::bessel_k(nu, ax)?, specfun::bessel_k_prime(nu, ax)?);
    let (ix, ipx) = (specfun::bessel_i(nu, ax)?, specfun::bessel_i_prime(nu, ax)?);
    let (kl, il) = (specfun::bessel_k(nu, al)?, specfun::bessel_i(nu, al)?);
    let dax = -ax / (2.0 * x);
    let pw = x.powf(-0.5 * nu);
    let dpw = -0.5 * nu * pw / x;
    let psi = pw * kx;
    let dpsi = dpw * kx + pw * kpx * dax;
    let core = ix * kl - il * kx;
    let phi = pw * core;
    let dphi = dpw * core + pw * (ipx * kl - il * kpx) * dax;
    Ok((dpsi * phi - psi * dphi) / model::scale_density_unchecked(p, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        apply_generator_fd, liouville, liouville_inverse, scale_density, speed_density, vol,
    };
    use crate::numerics::fd_derivatives;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn unit_half() -> ModelParams {
        ModelParams::new(0.5, 1.0, 1.0).unwrap()
    }

    fn unit_neg_half() -> ModelParams {
        ModelParams::new(-0.5, 1.0, 1.0).unwrap()
    }

    fn sys25() -> &'static EigenSystem {
        static S: OnceLock<EigenSystem> = OnceLock::new();
        S.get_or_init(|| solve_eigen(&unit_half(), 25).unwrap())
    }

    fn field_half() -> &'static DensityField {
        static F: OnceLock<DensityField> = OnceLock::new();
        F.get_or_init(|| DensityField::new(&unit_half()).unwrap())
    }

    fn field_neg_half() -> &'static DensityField {
        static F: OnceLock<DensityField> = OnceLock::new();
        F.get_or_init(|| DensityField::new(&unit_neg_half()).unwrap())
    }

    fn tight() -> QuadSpec {
        QuadSpec::default().with_abs_tol(1e-13).with_rel_tol(1e-11)
    }

    #[test]
    fn first_eigenvalues_unit_model() {
        let sys = solve_eigen(&unit_half(), 4).unwrap();
        let reference = [-2.16096, -6.48742, -13.2721, -22.5243];
        for (pair, r) in sys.pairs().iter().zip(reference) {
            assert!((pair.lambda - r).abs() < 1e-3, "{} vs {r}", pair.lambda);
        }
    }

    #[test]
    fn eigenvalues_solve_defining_equation() {
        let sys = sys25();
        for w in sys.pairs().windows(2) {
            assert!(w[1].lambda < w[0].lambda);
        }
        for pair in sys.pairs() {
            assert!(pair.lambda < 0.0 && pair.c_n > 0.0);
            let m = specfun::kummer_m(1.0 - pair.lambda / SQRT_2, 2.0, -2.0 * SQRT_2).unwrap();
            assert!(m.abs() < 1e-8, "n={} M={m}", pair.n);
        }
    }

    #[test]
    fn scan_reports_exhaustion_and_wrong_model() {
        assert_eq!(
            solve_eigen(&unit_neg_half(), 4).unwrap_err(),
            SpectralError::RequiresKHalf
        );
        let err = solve_eigen(&unit_half(), 10_000).unwrap_err();
        assert!(
            matches!(
                err,
                SpectralError::BracketScanExhausted { wanted: 10_000, .. }
            ),
            "{err:?}"
        );
    }

    /// M(α, 2; z) by its plain power series, adequate for |z| ≤ 3 and small α.
    fn kummer_plain(alpha: f64, z: f64) -> f64 {
        let (mut term, mut sum) = (1.0f64, 0.0f64);
        for k in 0..400 {
            sum += term;
            let k = k as f64;
            term *= (alpha + k) * z / ((2.0 + k) * (k + 1.0));
        }
        sum
    }

    #[test]
    fn c1_matches_simpson() {
        let sys = sys25();
        let lam = sys.pairs()[0].lambda;
        let alpha = 1.0 - lam / SQRT_2;
        let g = |x: f64| {
            let m = kummer_plain(alpha, -2.0 * SQRT_2 * x);
            x * (2.0 * SQRT_2 * x).exp() * m * m
        };
        let n = 1_000_000usize;
        let h = 1.0 / n as f64;
        let mut s = g(0.0) + g(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        let simpson = s * h / 3.0;
        let c1 = sys.pairs()[0].c_n;
        assert!((c1 - simpson).abs() < 1e-10 * simpson, "{c1} vs {simpson}");
    }

    #[test]
    fn psi_boundary_values() {
        let sys = solve_eigen(&unit_half(), 4).unwrap();
        for n in 1..=4 {
            assert_eq!(psi_n(&sys, n, 0.0).unwrap(), 0.0);
            assert!(psi_n(&sys, n, 1.0).unwrap().abs() < 1e-7);
        }
        assert!(matches!(
            psi_n(&sys, 5, 0.5),
            Err(SpectralError::IndexOutOfRange { n: 5, n_max: 4 })
        ));
        assert!(matches!(
            psi_n(&sys, 0, 0.5),
            Err(SpectralError::IndexOutOfRange { .. })
        ));
        assert!(psi_n(&sys, 1, 1.5).is_err());
    }

    fn inner(sys: &EigenSystem, m: usize, n: usize) -> f64 {
        let p = *sys.params();
        integrate(
            |x| {
                psi_n(sys, m, x).unwrap()
                    * psi_n(sys, n, x).unwrap()
                    * speed_density(&p, x).unwrap()
            },
            0.0,
            p.l(),
            tight(),
        )
        .unwrap()
    }

    #[test]
    fn orthonormal_first_six() {
        let sys = sys25();
        for m in 1..=6 {
            for n in m..=6 {
                let v = inner(sys, m, n);
                let target = if m == n { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-6, "<{m},{n}> = {v}");
            }
        }
    }

    #[test]
    fn orthonormal_for_other_scales() {
        for (a, l) in [(0.5, 1.0), (2.0, 1.0), (1.0, 2.0)] {
            let p = ModelParams::new(0.5, a, l).unwrap();
            let sys = solve_eigen(&p, 3).unwrap();
            for m in 1..=3 {
                for n in m..=3 {
                    let v = inner(&sys, m, n);
                    let target = if m == n { 1.0 } else { 0.0 };
                    assert!((v - target).abs() < 1e-6, "a={a} L={l} <{m},{n}> = {v}");
                }
            }
        }
    }

    #[test]
    fn eigen_residual() {
        let sys = sys25();
        let p = *sys.params();
        for n in 1..=8 {
            let lam = sys.pairs()[n - 1].lambda;
            let psi = |x: f64| psi_n(sys, n, x).unwrap();
            let grid: Vec<f64> = (0..=90).map(|i| 0.05 + 0.01 * i as f64).collect();
            let sup = grid.iter().map(|&x| psi(x).abs()).fold(0.0, f64::max);
            for &x in &grid {
                let r = apply_generator_fd(&p, psi, x, 2e-5) - lam * psi(x);
                assert!(r.abs() < 1e-4 * sup, "n={n} x={x} r={r}");
            }
        }
    }

    #[test]
    fn liouville_equation_holds_for_psi1() {
        let sys = sys25();
        let p = *sys.params();
        let lam = sys.pairs()[0].lambda;
        let eta = |z: f64| {
            let x = liouville_inverse(&p, z);
            psi_n(sys, 1, x).unwrap() / (vol(&p, x).unwrap() * scale_density(&p, x).unwrap()).sqrt()
        };
        for i in 0..=28 {
            let z = 0.3 + 0.05 * i as f64;
            let x = liouville_inverse(&p, z);
            let (_, v) = liouville(&p, x).unwrap();
            let (_, d2) = fd_derivatives(eta, z, 1e-4);
            let r = 0.5 * d2 - v * eta(z) - lam * eta(z);
            assert!(r.abs() < 1e-4, "z={z} r={r}");
        }
    }

    #[test]
    fn psi_rho_vanishes_at_cap() {
        let p = unit_neg_half();
        for rho in [0.5, 1.0, 3.0] {
            assert_eq!(psi_rho(&p, rho, 1.0).unwrap(), 0.0);
            assert!(psi_rho(&p, rho, 0.5).unwrap().abs() > 0.0);
        }
        assert!(matches!(
            psi_rho(&p, 1.0, 1e-7),
            Err(SpectralError::OutOfDomain { .. })
        ));
        assert!(psi_rho(&p, -1.0, 0.5).is_err());
        assert_eq!(
            psi_rho(&unit_half(), 1.0, 0.5).unwrap_err(),
            SpectralError::RequiresKNegHalf
        );
    }

    #[test]
    fn psi_rho_eigen_residual() {
        let (a, l, rho): (f64, f64, f64) = (1.0, 1.0, 1.0);
        let p = unit_neg_half();
        let x = 0.5;
        let (d1, d2) = fd_derivatives(|x| psi_rho(&p, rho, x).unwrap(), x, 1e-4);
        let r = (a * a / 2.0 + a * SQRT_2) * x * x * d1
            + a * a / 2.0 * x * x * x * d2
            + l * rho * rho * psi_rho(&p, rho, x).unwrap();
        assert!(r.abs() < 2e-4, "r={r}");
    }

    #[test]
    fn psi_rho_delta_normalization() {
        // Smooth ψ(ρ', x) over ρ' with a Gaussian of width h, then integrate
        // against ψ(ρ0, x) m̃(x): the delta normalization returns G_h(0).
        let p = unit_neg_half();
        let (rho0, h) = (1.0, 0.05);
        let gauss = |d: f64| (-0.5 * (d / h).powi(2)).exp() / (h * (2.0 * PI).sqrt());
        let spec = QuadSpec::default().with_abs_tol(1e-9).with_rel_tol(1e-7);
        let smoothed = |x: f64| {
            integrate(
                |r| gauss(rho0 - r) * psi_rho(&p, r, x).unwrap(),
                rho0 - 8.0 * h,
                rho0 + 8.0 * h,
                spec,
            )
            .unwrap()
        };
        let base = PsiRho::new(&p, rho0).unwrap();
        let total = integrate(
            |u| {
                let x = u.exp();
                x * base.eval(x).unwrap() * smoothed(x) * speed_density(&p, x).unwrap()
            },
            (1e-4f64).ln(),
            0.0,
            QuadSpec::default().with_abs_tol(1e-8).with_rel_tol(1e-6),
        )
        .unwrap();
        let ratio = total / gauss(0.0);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn density_is_sub_probability() {
        for field in [field_half(), field_neg_half()] {
            let row = DensityRow::new(field, 0.0, 0.5, 0.3).unwrap();
            let mass = integrate(|y| row.at(y).unwrap(), 0.0, 1.0, QuadSpec::default()).unwrap();
            assert!(mass < 1.0 && mass > 0.5, "mass {mass}");
        }
    }

    #[test]
    fn density_symmetry() {
        for field in [field_half(), field_neg_half()] {
            let p = *field.params();
            let (x, y) = (0.3, 0.7);
            let lhs = density(field, 0.1, x, 0.3, y).unwrap() / speed_density(&p, y).unwrap();
            let rhs = density(field, 0.1, y, 0.3, x).unwrap() / speed_density(&p, x).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-6 * lhs.abs(),
                "k={} {lhs} {rhs}",
                p.k()
            );
        }
    }

    #[test]
    fn density_guards() {
        let f = field_half();
        assert!(matches!(
            density(f, 0.0, 0.5, 0.005, 0.5),
            Err(SpectralError::HorizonTooShort { .. })
        ));
        assert!(density(f, 0.0, 0.5, TAU_MIN, 0.5).is_ok());
        assert!(matches!(
            density(f, 0.0, 1.0, 0.2, 0.5),
            Err(SpectralError::OutOfDomain { .. })
        ));
        assert!(density(f, 0.3, 0.5, 0.2, 0.5).is_err());
        assert_eq!(density(f, 0.0, 0.5, 0.2, 1.0), Ok(0.0));
        assert_eq!(density(field_neg_half(), 0.0, 0.5, 0.2, 1.0), Ok(0.0));
        assert!(density(f, 0.0, 0.5, 0.2, 0.0).is_err());
        let k0 = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(
            DensityField::new(&k0).unwrap_err(),
            SpectralError::Unsupported(0.0)
        );
    }

    #[test]
    fn adaptive_system_meets_tail_target() {
        let Backend::Discrete(sys) = field_half().backend() else {
            panic!("expected discrete backend");
        };
        assert!(sys.n_max() >= DEFAULT_N_MAX);
        assert!(sys.tail_envelope(TAU_MIN) < 1e-12);
        let est = density_estimate(field_half(), 0.0, 0.5, 0.2, 0.4).unwrap();
        assert!(est.tail_bound < 1e-12);
    }

    #[test]
    fn truncation_doubling_is_stable() {
        let p = unit_half();
        let f25 = DensityField::discrete(solve_eigen(&p, 25).unwrap());
        let f50 = DensityField::discrete(solve_eigen(&p, 50).unwrap());
        for tau in [0.05, 0.2, 1.0] {
            for (x, y) in [(0.5, 0.5), (0.2, 0.9), (0.8, 0.1)] {
                let d25 = density(&f25, 0.0, x, tau, y).unwrap();
                let d50 = density(&f50, 0.0, x, tau, y).unwrap();
                assert!((d25 - d50).abs() < 1e-8, "tau={tau} ({x},{y}) {d25} {d50}");
            }
        }
    }

    #[test]
    fn short_time_identity() {
        let h = TAU_MIN;
        let x = 0.5;
        let g = |y: f64| (PI * y).sin();
        for field in [field_half(), field_neg_half()] {
            let p = *field.params();
            let row = DensityRow::new(field, 0.0, x, h).unwrap();
            let linear =
                integrate(|y| row.at(y).unwrap() * y, 0.0, 1.0, QuadSpec::default()).unwrap();
            assert!((linear - x).abs() < 0.02 * x, "k={} {linear}", p.k());
            let smooth =
                integrate(|y| row.at(y).unwrap() * g(y), 0.0, 1.0, QuadSpec::default()).unwrap();
            // First-order expansion g + hÃg; the remainder is O(h²).
            let expected = g(x) + h * apply_generator_fd(&p, g, x, 1e-4);
            assert!(
                (smooth - expected).abs() < 1e-3,
                "k={} {smooth} vs {expected}",
                p.k()
            );
        }
        // For k = -1/2 the diffusion is weak enough that the plain limit is within 2%.
        let row = DensityRow::new(field_neg_half(), 0.0, x, h).unwrap();
        let smooth =
            integrate(|y| row.at(y).unwrap() * g(y), 0.0, 1.0, QuadSpec::default()).unwrap();
        assert!((smooth - g(x)).abs() < 0.02 * g(x));
    }

    #[test]
    fn chapman_kolmogorov() {
        let (x, y, s, t_end) = (0.5, 0.5, 0.1, 0.2);
        for field in [field_half(), field_neg_half()] {
            let left = DensityRow::new(field, 0.0, x, s).unwrap();
            let composed = integrate(
                |z| left.at(z).unwrap() * density(field, s, z, t_end, y).unwrap(),
                0.0,
                1.0,
                QuadSpec::default().with_abs_tol(1e-11).with_rel_tol(1e-9),
            )
            .unwrap();
            let direct = density(field, 0.0, x, t_end, y).unwrap();
            assert!(
                (composed - direct).abs() < 1e-6 * direct,
                "{composed} {direct}"
            );
        }
    }

    #[test]
    fn continuous_density_matches_riemann_sum() {
        let p = unit_neg_half();
        let (x, y, tau) = (0.3, 0.7, 0.2);
        let rho_max = ContinuousSpec::default().rho_max(1.0, tau);
        let n = 100_000;
        let h = rho_max / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let rho = (i as f64 + 0.5) * h;
            let psi = PsiRho::new(&p, rho).unwrap();
            s += (-rho * rho * tau).exp() * psi.eval(x).unwrap() * psi.eval(y).unwrap();
        }
        let oracle = s * h * speed_density(&p, y).unwrap();
        let v = density(field_neg_half(), 0.0, x, tau, y).unwrap();
        assert!((v - oracle).abs() < 1e-7 * oracle.abs(), "{v} vs {oracle}");
    }

    #[test]
    fn wronskian_constant_and_closed_form() {
        let p = unit_neg_half();
        let nu = 2.0 * SQRT_2;
        let closed = 0.5 * specfun::bessel_k(nu, nu).unwrap();
        for x in [0.2, 0.5, 0.8] {
            let w = greens_wronskian(&p, 1.0, x).unwrap();
            assert!((w - closed).abs() < 1e-7 * closed, "x={x} {w} {closed}");
        }
        assert!((closed - 0.0688965516900331).abs() < 1e-12);
        let ws: Vec<f64> = [1.0, 4.0, 9.0]
            .iter()
            .map(|&l| greens_wronskian(&p, l, 0.5).unwrap())
            .collect();
        assert!(ws[0] > ws[1] && ws[1] > ws[2]);
        assert!(greens_wronskian(&unit_half(), 1.0, 0.5).is_err());
        assert!(greens_wronskian(&p, -1.0, 0.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn discrete_symmetry_everywhere(x in 0.02f64..0.98, y in 0.02f64..0.98, tau in 0.02f64..1.0) {
            let f = field_half();
            let p = *f.params();
            let lhs = density(f, 0.0, x, tau, y).unwrap() / speed_density(&p, y).unwrap();
            let rhs = density(f, 0.0, y, tau, x).unwrap() / speed_density(&p, x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1e-6));
        }

        #[test]
        fn psi_rho_zero_at_cap(rho in 0.01f64..20.0, a in prop::sample::select(vec![0.7, 1.0, 1.3, 2.5])) {
            let p = ModelParams::new(-0.5, a, 1.0).unwrap();
            prop_assert_eq!(psi_rho(&p, rho, 1.0).unwrap(), 0.0);
        }
    }
}
