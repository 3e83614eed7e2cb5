//! Euler-Maruyama simulation of the absorbed short rate, under the physical
//! measure P or the transformed measure P̃.
//!
//! Paths are frozen at the first exit from (0, L). The cap L is always
//! absorbing; the origin absorbs only when it is regular or exit. A step
//! that would cross a natural origin is redone as two half steps. Each step
//! also tests for a crossing between the grid points with the Brownian
//! bridge probability, unless [`SimConfig::bridge`] is off.
//!
//! Every path draws from its own ChaCha8 stream, selected by the path index,
//! and all reductions run in path order, so results do not depend on how
//! rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{self, BoundaryClass, ModelParams};
use crate::numerics::CompensatedSum;
use crate::pricing::Payoff;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
}

pub type Result<T> = std::result::Result<T, McError>;

/// Probability measure the paths are drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    P,
    PTilde,
}

/// Half-step retries allowed when a step overshoots a natural origin.
const MAX_HALVINGS: u32 = 40;

/// Bridge exponents below this give crossing probabilities under 1e-300.
const BRIDGE_ARG_MIN: f64 = -690.0;

/// Seed offset of the P̃ run in [`compare_measures`].
const TILDE_SEED_SALT: u64 = 0x5851_F42D_4C95_7F2D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub x0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub measure: Measure,
    /// Brownian-bridge crossing test between grid points.
    pub bridge: bool,
    /// Number of equal-width histogram bins on [0, L].
    pub bins: usize,
}

impl SimConfig {
    pub fn new(
        x0: f64,
        dt: f64,
        horizon: f64,
        n_paths: usize,
        seed: u64,
        measure: Measure,
    ) -> Self {
        Self {
            x0,
            dt,
            horizon,
            n_paths,
            seed,
            measure,
            bridge: true,
            bins: 50,
        }
    }

    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        let bad = |m: String| Err(McError::ConfigInvalid(m));
        if !(self.x0 >= 0.0 && self.x0 <= p.l()) {
            return bad(format!("x0 = {} is outside [0, {}]", self.x0, p.l()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.dt > self.horizon {
            return bad(format!(
                "dt = {} exceeds the horizon {}",
                self.dt, self.horizon
            ));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be positive".into());
        }
        if self.bins == 0 {
            return bad("bins must be positive".into());
        }
        Ok(())
    }
}

/// Where a path is at an observation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathState {
    Interior,
    AbsorbedAtZero,
    AbsorbedAtL,
}

/// One path observed at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRecord {
    pub state: PathState,
    pub terminal: f64,
    /// ∫₀ᵀ X_s ds by the trapezoid rule.
    pub integrated_rate: f64,
    /// log dP̃/dP along the path; 0 under P̃.
    pub log_weight: f64,
}

impl PathRecord {
    pub fn discount(&self) -> f64 {
        (-self.integrated_rate).exp()
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

/// Sub-probability masses of interior terminal values.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Masses divided by bin widths.
    pub fn density(&self) -> Vec<f64> {
        self.masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, w)| m / (w[1] - w[0]))
            .collect()
    }

    /// Binomial standard error of each density value.
    pub fn density_stderr(&self, n_paths: usize) -> Vec<f64> {
        let n = n_paths as f64;
        self.masses
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&m, w)| (m * (1.0 - m) / n).sqrt() / (w[1] - w[0]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    pub price_mean: f64,
    pub price_stderr: f64,
    pub absorbed_at_l: f64,
    pub absorbed_at_0: f64,
    pub terminal_histogram: Histogram,
    pub n_paths: usize,
}

/// Sample mean and standard error, summed in input order.
pub fn mean_stderr<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    let mut s = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    let mut n = 0usize;
    for v in values {
        s.add(v);
        s2.add(v * v);
        n += 1;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = s.value() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((s2.value() - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Increment θ dW − θ²dt/2 of a Girsanov log-density with kernel θ.
pub fn girsanov_increment(theta: f64, dw: f64, dt: f64) -> f64 {
    theta * dw - 0.5 * theta * theta * dt
}

/// x^e with exact shortcuts for the exponents the k = ±1/2 models use.
fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.5 {
        x.sqrt()
    } else if e == 1.5 {
        x * x.sqrt()
    } else {
        x.powf(e)
    }
}

struct Dynamics {
    l: f64,
    a: f64,
    vol_exp: f64,
    drift_coef: f64,
    drift_exp: f64,
    tilde: bool,
    origin_absorbs: bool,
    weighted: bool,
    bridge: bool,
}

impl Dynamics {
    fn new(p: &ModelParams, measure: Measure, weighted: bool, bridge: bool) -> Self {
        Self {
            l: p.l(),
            a: p.a(),
            vol_exp: 1.0 - p.k(),
            drift_coef: p.a() * p.a() * (0.25 - 0.5 * p.k()),
            drift_exp: 1.0 - 2.0 * p.k(),
            tilde: measure == Measure::PTilde,
            origin_absorbs: model::classify_origin(p) != BoundaryClass::Natural,
            weighted,
            bridge,
        }
    }

    /// (μ or μ̃, σ, θ) at x ≥ 0, where θ = −σf′ = √(2x) is the Girsanov kernel,
    /// left at 0 when nothing uses it.
    fn coefficients(&self, x: f64) -> (f64, f64, f64) {
        let x = x.max(0.0);
        let sigma = self.a * pow(x, self.vol_exp);
        let theta = if self.tilde || self.weighted {
            (2.0 * x).sqrt()
        } else {
            0.0
        };
        let mut mu = self.drift_coef * pow(x, self.drift_exp);
        if self.tilde {
            mu += sigma * theta;
        }
        (mu, sigma, theta)
    }
}

#[derive(Clone, Copy)]
struct Walker {
    x: f64,
    state: PathState,
    rate_integral: f64,
    log_weight: f64,
}

impl Walker {
    fn absorb(&mut self, at: PathState) {
        self.state = at;
        self.x = if at == PathState::AbsorbedAtL {
            f64::NAN
        } else {
            0.0
        };
    }

    fn level(&self, l: f64) -> f64 {
        match self.state {
            PathState::Interior => self.x,
            PathState::AbsorbedAtZero => 0.0,
            PathState::AbsorbedAtL => l,
        }
    }

    /// Advances by h; an overshoot of a natural origin is redone as two half steps.
    fn step(&mut self, dy: &Dynamics, h: f64, rng: &mut ChaCha8Rng, depth: u32) {
        let x0 = self.x;
        let (mu, sigma, theta) = dy.coefficients(x0);
        let z: f64 = rng.sample(StandardNormal);
        let dw = h.sqrt() * z;
        let x1 = x0 + mu * h + sigma * dw;
        if x1 <= 0.0 && !dy.origin_absorbs {
            if depth < MAX_HALVINGS {
                self.step(dy, 0.5 * h, rng, depth + 1);
                if self.state == PathState::Interior {
                    self.step(dy, 0.5 * h, rng, depth + 1);
                }
            } else {
                // Unreachable in practice; keep the path at its current level.
                self.rate_integral += x0 * h;
            }
            return;
        }
        if dy.weighted {
            self.log_weight += girsanov_increment(theta, dw, h);
        }
        if x1 >= dy.l {
            self.rate_integral += 0.5 * (x0 + dy.l) * h;
            self.absorb(PathState::AbsorbedAtL);
            return;
        }
        if x1 <= 0.0 {
            self.rate_integral += 0.5 * x0 * h;
            self.absorb(PathState::AbsorbedAtZero);
            return;
        }
        if dy.bridge && sigma > 0.0 {
            let var = sigma * sigma * h;
            let crossing = |d0: f64, d1: f64| {
                let arg = -2.0 * d0 * d1 / var;
                if arg < BRIDGE_ARG_MIN {
                    0.0
                } else {
                    arg.exp()
                }
            };
            let p_top = crossing(dy.l - x0, dy.l - x1);
            let p_bottom = if dy.origin_absorbs {
                crossing(x0, x1)
            } else {
                0.0
            };
            // A uniform is drawn only when a crossing is possible.
            if p_top > 0.0 || p_bottom > 0.0 {
                let u: f64 = rng.random();
                if u < p_top {
                    self.rate_integral += 0.5 * (x0 + dy.l) * h;
                    self.absorb(PathState::AbsorbedAtL);
                    return;
                }
                if u < p_top + p_bottom {
                    self.rate_integral += 0.5 * x0 * h;
                    self.absorb(PathState::AbsorbedAtZero);
                    return;
                }
            }
        }
        self.rate_integral += 0.5 * (x0 + x1) * h;
        self.x = x1;
    }
}

fn validate_horizons(cfg: &SimConfig, horizons: &[f64]) -> Result<()> {
    if horizons.is_empty() {
        return Err(McError::ConfigInvalid("no observation horizons".into()));
    }
    let mut prev = 0.0;
    for &h in horizons {
        if !(h > prev) || !h.is_finite() {
            return Err(McError::ConfigInvalid(format!(
                "observation horizons must be positive and strictly increasing, got {horizons:?}"
            )));
        }
        prev = h;
    }
    if cfg.dt > horizons[0] {
        return Err(McError::ConfigInvalid(format!(
            "dt = {} exceeds the first horizon {}",
            cfg.dt, horizons[0]
        )));
    }
    Ok(())
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn run_path(
    p: &ModelParams,
    dy: &Dynamics,
    cfg: &SimConfig,
    horizons: &[f64],
    index: usize,
) -> Vec<PathRecord> {
    let l = p.l();
    let mut rng = path_rng(cfg.seed, index);
    let mut w = Walker {
        x: cfg.x0,
        state: PathState::Interior,
        rate_integral: 0.0,
        log_weight: 0.0,
    };
    if cfg.x0 >= l {
        w.absorb(PathState::AbsorbedAtL);
    } else if cfg.x0 == 0.0 && dy.origin_absorbs {
        w.absorb(PathState::AbsorbedAtZero);
    }
    // σ and μ vanish at 0: a path started at a natural origin stays there, unabsorbed.
    let pinned = cfg.x0 == 0.0;
    let mut out = Vec::with_capacity(horizons.len());
    let mut t = 0.0;
    let mut k = 0usize;
    let snap = 1e-9 * cfg.dt;
    for &obs in horizons {
        while t < obs {
            if w.state != PathState::Interior || pinned {
                // Flat at the absorbing level until the observation time.
                w.rate_integral += w.level(l) * (obs - t);
                t = obs;
                k = (obs / cfg.dt + 1e-9).floor() as usize;
                break;
            }
            let grid = (k + 1) as f64 * cfg.dt;
            let next = if grid >= obs - snap { obs } else { grid };
            if (grid - next).abs() <= snap {
                k += 1;
            }
            w.step(dy, next - t, &mut rng, 0);
            t = next;
        }
        out.push(PathRecord {
            state: w.state,
            terminal: w.level(l),
            integrated_rate: w.rate_integral,
            log_weight: w.log_weight,
        });
    }
    out
}

/// Per-path records at each horizon, in path order: `result[i][j]` is path j at `horizons[i]`.
pub fn simulate_records(
    p: &ModelParams,
    cfg: &SimConfig,
    horizons: &[f64],
    weighted: bool,
) -> Result<Vec<Vec<PathRecord>>> {
    cfg.validate(p)?;
    validate_horizons(cfg, horizons)?;
    if weighted && cfg.measure != Measure::P {
        return Err(McError::ConfigInvalid(
            "the Radon-Nikodym weight needs measure P".into(),
        ));
    }
    let dy = Dynamics::new(p, cfg.measure, weighted, cfg.bridge);
    let paths: Vec<Vec<PathRecord>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_path(p, &dy, cfg, horizons, i))
        .collect();
    Ok((0..horizons.len())
        .map(|j| paths.iter().map(|r| r[j]).collect())
        .collect())
}

/// Histogram of interior terminal values on `bins` equal bins over [0, L].
pub fn histogram(p: &ModelParams, records: &[PathRecord], bins: usize) -> Histogram {
    let l = p.l();
    let edges: Vec<f64> = (0..=bins).map(|i| l * i as f64 / bins as f64).collect();
    let mut counts = vec![0u64; bins];
    for r in records.iter().filter(|r| r.state == PathState::Interior) {
        let b = ((r.terminal / l * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = records.len() as f64;
    let masses = counts.iter().map(|&c| c as f64 / n).collect();
    Histogram {
        edges,
        masses,
        counts,
    }
}

/// Price estimate, absorbed fractions and terminal histogram of one horizon's records.
pub fn path_stats(p: &ModelParams, records: &[PathRecord], pay: &Payoff, bins: usize) -> PathStats {
    let (price_mean, price_stderr) =
        mean_stderr(records.iter().map(|r| r.discount() * pay.g(r.terminal)));
    let n = records.len() as f64;
    let frac = |s: PathState| records.iter().filter(|r| r.state == s).count() as f64 / n;
    PathStats {
        price_mean,
        price_stderr,
        absorbed_at_l: frac(PathState::AbsorbedAtL),
        absorbed_at_0: frac(PathState::AbsorbedAtZero),
        terminal_histogram: histogram(p, records, bins),
        n_paths: records.len(),
    }
}

/// Feynman-Kac estimate of E[e^{−∫X} g(X_T)] at T = `cfg.horizon`.
pub fn simulate(p: &ModelParams, cfg: &SimConfig, pay: &Payoff) -> Result<PathStats> {
    let records = simulate_records(p, cfg, &[cfg.horizon], false)?;
    Ok(path_stats(p, &records[0], pay, cfg.bins))
}

/// As [`simulate`] at several horizons read off the same paths.
pub fn simulate_at(
    p: &ModelParams,
    cfg: &SimConfig,
    pay: &Payoff,
    horizons: &[f64],
) -> Result<Vec<PathStats>> {
    let records = simulate_records(p, cfg, horizons, false)?;
    Ok(records
        .iter()
        .map(|r| path_stats(p, r, pay, cfg.bins))
        .collect())
}

/// Terminal histogram under P̃, for comparison with the transition density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistogram {
    pub histogram: Histogram,
    pub absorbed_at_l: f64,
    pub absorbed_at_0: f64,
    pub n_paths: usize,
}

impl DensityHistogram {
    /// Interior masses plus absorbed fractions.
    pub fn total_mass(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for &m in &self.histogram.masses {
            s.add(m);
        }
        s.add(self.absorbed_at_l);
        s.add(self.absorbed_at_0);
        s.value()
    }
}

pub fn density_histogram(
    p: &ModelParams,
    cfg: &SimConfig,
    big_t: f64,
    bins: usize,
) -> Result<DensityHistogram> {
    if cfg.measure != Measure::PTilde {
        return Err(McError::ConfigInvalid(
            "density histograms are drawn under P-tilde".into(),
        ));
    }
    if bins == 0 {
        return Err(McError::ConfigInvalid("bins must be positive".into()));
    }
    let cfg = SimConfig {
        horizon: big_t,
        ..*cfg
    };
    let records = simulate_records(p, &cfg, &[big_t], false)?;
    let s = path_stats(p, &records[0], &Payoff::one(), bins);
    Ok(DensityHistogram {
        histogram: s.terminal_histogram,
        absorbed_at_l: s.absorbed_at_l,
        absorbed_at_0: s.absorbed_at_0,
        n_paths: s.n_paths,
    })
}

/// One test function compared across measures.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub name: &'static str,
    /// E_P[W_T h(X_T)].
    pub weighted: f64,
    pub weighted_stderr: f64,
    /// E_P̃[h(X_T)].
    pub tilde: f64,
    pub tilde_stderr: f64,
}

impl MeasureRow {
    pub fn combined_stderr(&self) -> f64 {
        self.weighted_stderr.hypot(self.tilde_stderr)
    }

    /// Difference in units of the combined standard error.
    pub fn z_score(&self) -> f64 {
        let s = self.combined_stderr();
        if s == 0.0 {
            if self.weighted == self.tilde {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.weighted - self.tilde) / s
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub horizon: f64,
    pub mean_weight: f64,
    pub mean_weight_stderr: f64,
    pub rows: Vec<MeasureRow>,
}

type TestFn = (&'static str, fn(&PathRecord) -> f64);

const TEST_FUNCTIONS: [TestFn; 4] = [
    ("x_interior", |r| {
        if r.state == PathState::Interior {
            r.terminal
        } else {
            0.0
        }
    }),
    ("interior", |r| {
        f64::from(u8::from(r.state == PathState::Interior))
    }),
    ("absorbed_at_l", |r| {
        f64::from(u8::from(r.state == PathState::AbsorbedAtL))
    }),
    ("absorbed_at_0", |r| {
        f64::from(u8::from(r.state == PathState::AbsorbedAtZero))
    }),
];

/// Weighted P-expectations against plain P̃-expectations at horizon `big_t`.
pub fn compare_measures(p: &ModelParams, cfg: &SimConfig, big_t: f64) -> Result<MeasureReport> {
    if cfg.measure != Measure::P {
        return Err(McError::ConfigInvalid(
            "compare_measures simulates under P".into(),
        ));
    }
    let cfg_p = SimConfig {
        horizon: big_t,
        ..*cfg
    };
    let cfg_t = SimConfig {
        measure: Measure::PTilde,
        seed: cfg.seed ^ TILDE_SEED_SALT,
        ..cfg_p
    };
    let under_p = simulate_records(p, &cfg_p, &[big_t], true)?.remove(0);
    let under_t = simulate_records(p, &cfg_t, &[big_t], false)?.remove(0);
    let (mean_weight, mean_weight_stderr) = mean_stderr(under_p.iter().map(PathRecord::weight));
    let rows = TEST_FUNCTIONS
        .iter()
        .map(|&(name, h)| {
            let (weighted, weighted_stderr) =
                mean_stderr(under_p.iter().map(|r| r.weight() * h(r)));
            let (tilde, tilde_stderr) = mean_stderr(under_t.iter().map(h));
            MeasureRow {
                name,
                weighted,
                weighted_stderr,
                tilde,
                tilde_stderr,
            }
        })
        .collect();
    Ok(MeasureReport {
        horizon: big_t,
        mean_weight,
        mean_weight_stderr,
        rows,
    })
}
