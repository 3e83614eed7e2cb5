//! Subcommand bodies. Each returns the text to emit and, when a
//! self-check failed, the reason for exit code 2.

use std::fmt::Write as _;
use std::path::PathBuf;

use shortrate::model::{
    classify_origin, classify_origin_numeric, classify_spectrum, BoundaryReport, ModelParams,
};
use shortrate::montecarlo::{
    compare_measures, path_stats, simulate_records, Measure, PathState, SimConfig,
};
use shortrate::pricing::{price_general, yield_curve_with, BondEngine, Payoff, PricerSelector};
use shortrate::spectral::{eigen_residual, solve_eigen, DensityField, DensityRow};

use crate::config::{FloatList, Layers};
use crate::error::{CliError, Result};
use crate::output::{emit, num, Csv};
use crate::{
    ClassifyArgs, CompareArgs, CurveArgs, DensityArgs, EigenArgs, Engine, MeasureName, ModelArgs,
    PathArgs, PayoffArgs, PayoffName, PriceArgs, SimulateArgs,
};

pub struct Report {
    pub text: String,
    pub failure: Option<String>,
}

impl Report {
    fn ok(text: String) -> Self {
        Self {
            text,
            failure: None,
        }
    }
}

/// An eigenvalue passes when it is within this relative distance of a
/// root of the eigen-equation, judged from the local slope.
const EIGEN_REL_TOL: f64 = 1e-8;

fn model(layers: &Layers, m: ModelArgs, default_k: Option<f64>) -> Result<ModelParams> {
    let k = match default_k {
        Some(d) => layers.or(m.k, "k", d)?,
        None => layers.require(m.k, "k")?,
    };
    let a = layers.or(m.a, "a", 1.0)?;
    let l = layers.or(m.l, "L", 1.0)?;
    Ok(ModelParams::new(k, a, l)?)
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    Ok(pool.install(f))
}

fn list(layers: &Layers, flag: Option<FloatList>, key: &str) -> Result<Vec<f64>> {
    let v = layers.require(flag, key)?.0;
    if v.is_empty() {
        return Err(CliError::Usage(format!("`{key}` is empty")));
    }
    Ok(v)
}

fn probe_line(report: &BoundaryReport) -> String {
    let part = |finite: bool, est: f64| {
        if finite {
            format!("finite ({est:.6e})")
        } else {
            "infinite".to_string()
        }
    };
    format!(
        "numeric: origin {}; spectrum {}; I0 {}; J0 {}",
        report.boundary,
        report.spectrum,
        part(report.i0_finite, report.i0_estimate),
        part(report.j0_finite, report.j0_estimate)
    )
}

pub fn classify(layers: &Layers, args: ClassifyArgs) -> Result<Report> {
    let p = model(layers, args.model, None)?;
    let eps = layers.or(args.eps, "eps", 0.5 * p.l())?;
    let (boundary, spectrum) = (classify_origin(&p), classify_spectrum(&p));
    let numeric = classify_origin_numeric(&p, eps)?;
    let agree = numeric.boundary == boundary && numeric.spectrum == spectrum;
    let mut text = format!("origin: {boundary}; spectrum: {spectrum}\n");
    writeln!(text, "{}", probe_line(&numeric)).unwrap();
    writeln!(text, "agreement: {}", if agree { "yes" } else { "no" }).unwrap();
    Ok(Report {
        text,
        failure: (!agree).then(|| "closed-form and numeric classifiers disagree".to_string()),
    })
}

pub fn eigen(layers: &Layers, args: EigenArgs) -> Result<Report> {
    let p = model(layers, args.model, Some(0.5))?;
    let n = layers.or(args.n, "n", 4)?;
    let sys = solve_eigen(&p, n)?;
    let mut csv = Csv::new(&["n", "lambda", "c_n", "residual"]);
    let mut failure = None;
    for pair in sys.pairs() {
        let lam = pair.lambda;
        let r = eigen_residual(&p, lam)?;
        let h = 1e-6 * lam.abs();
        let slope = (eigen_residual(&p, lam + h)? - eigen_residual(&p, lam - h)?) / (2.0 * h);
        let within = r.abs() <= EIGEN_REL_TOL * lam.abs() * slope.abs();
        if !within && failure.is_none() {
            failure = Some(format!(
                "eigenvalue {} = {lam} leaves residual {r:e}",
                pair.n
            ));
        }
        csv.row(&[pair.n.to_string(), num(lam), num(pair.c_n), num(r)]);
    }
    Ok(Report {
        text: csv.finish(),
        failure,
    })
}

pub fn density(layers: &Layers, args: DensityArgs) -> Result<Report> {
    let p = model(layers, args.model, None)?;
    let x = layers.require(args.x, "x")?;
    let t = layers.or(args.t, "t", 0.0)?;
    let horizons = list(layers, args.big_t, "T")?;
    let grid = layers.or(args.grid, "grid", 100)?;
    if grid == 0 {
        return Err(CliError::Usage("grid must be positive".into()));
    }
    let field = DensityField::new(&p)?;
    let mut csv = Csv::new(&["T", "y", "gamma"]);
    for &big_t in &horizons {
        let row = DensityRow::new(&field, t, x, big_t)?;
        for i in 1..=grid {
            let y = p.l() * i as f64 / grid as f64;
            csv.row(&[num(big_t), num(y), num(row.at(y)?)]);
        }
    }
    Ok(Report::ok(csv.finish()))
}

pub fn curve(layers: &Layers, args: CurveArgs) -> Result<Report> {
    let p = model(layers, args.model, None)?;
    let xs = list(layers, args.x, "x")?;
    let maturities = list(layers, args.maturities, "maturities")?;
    let engine = layers.or(args.engine, "engine", Engine::Analytic)?;
    let threads = layers.or(args.threads, "threads", 0)?;
    let selector = match engine {
        Engine::Analytic => PricerSelector::Analytic,
        Engine::Duhamel => PricerSelector::Duhamel,
    };
    let engine = BondEngine::new(&p, selector)?;
    let curves = with_threads(threads, || {
        xs.iter()
            .map(|&x| yield_curve_with(&engine, x, &maturities))
            .collect::<shortrate::pricing::Result<Vec<_>>>()
    })??;
    let mut csv = Csv::new(&["x", "T", "B", "Y"]);
    for (&x, c) in xs.iter().zip(&curves) {
        for pt in &c.points {
            csv.row(&[num(x), num(pt.maturity), num(pt.bond), num(pt.yield_)]);
        }
    }
    Ok(Report::ok(csv.finish()))
}

fn payoff(layers: &Layers, args: PayoffArgs) -> Result<Payoff> {
    Ok(match layers.or(args.payoff, "payoff", PayoffName::One)? {
        PayoffName::One => Payoff::one(),
        PayoffName::Linear => Payoff::linear(),
        PayoffName::PutOnRate => {
            let strike: f64 = layers.require(args.strike, "strike")?;
            if !strike.is_finite() {
                return Err(CliError::Usage(format!(
                    "strike must be finite, got {strike}"
                )));
            }
            Payoff::put_on_rate(strike)
        }
    })
}

pub fn price(layers: &Layers, args: PriceArgs) -> Result<Report> {
    let p = model(layers, args.model, None)?;
    let pay = payoff(layers, args.payoff)?;
    let xs = list(layers, args.x, "x")?;
    let t = layers.or(args.t, "t", 0.0)?;
    let big_t = layers.require(args.big_t, "T")?;
    let field = DensityField::new(&p)?;
    let mut csv = Csv::new(&["payoff", "x", "t", "T", "value"]);
    for &x in &xs {
        let v = price_general(&field, &pay, t, x, big_t)?;
        csv.row(&[pay.name().to_string(), num(x), num(t), num(big_t), num(v)]);
    }
    Ok(Report::ok(csv.finish()))
}

fn sim_config(
    layers: &Layers,
    args: &PathArgs,
    horizon: f64,
    measure: Measure,
) -> Result<(SimConfig, usize)> {
    let x0 = layers.require(args.x0, "x0")?;
    let mut cfg = SimConfig::new(
        x0,
        layers.or(args.dt, "dt", 1e-3)?,
        horizon,
        layers.or(args.paths, "paths", 10_000)?,
        layers.or(args.seed, "seed", 1)?,
        measure,
    );
    cfg.bridge = layers.or(args.bridge, "bridge", true)?;
    Ok((cfg, layers.or(args.threads, "threads", 0)?))
}

fn state_name(s: PathState) -> &'static str {
    match s {
        PathState::Interior => "interior",
        PathState::AbsorbedAtZero => "zero",
        PathState::AbsorbedAtL => "cap",
    }
}

pub fn simulate(layers: &Layers, args: SimulateArgs) -> Result<Report> {
    let p = model(layers, args.model, None)?;
    let pay = payoff(layers, args.payoff)?;
    let horizons = list(layers, args.horizon, "horizon")?;
    let measure = match layers.or(args.measure, "measure", MeasureName::P)? {
        MeasureName::P => Measure::P,
        MeasureName::PTilde => Measure::PTilde,
    };
    let last = *horizons.last().unwrap();
    let (mut cfg, threads) = sim_config(layers, &args.paths, last, measure)?;
    cfg.bins = layers.or(args.bins, "bins", 50)?;
    let dump: Option<PathBuf> = layers.get(args.dump, "dump")?;
    let hist_path: Option<PathBuf> = layers.get(args.histogram, "histogram")?;
    let records = with_threads(threads, || simulate_records(&p, &cfg, &horizons, false))??;
    let label = match measure {
        Measure::P => "P",
        Measure::PTilde => "P-tilde",
    };
    let mut csv = Csv::new(&[
        "horizon",
        "measure",
        "payoff",
        "price",
        "price_stderr",
        "absorbed_at_L",
        "absorbed_at_0",
        "n_paths",
    ]);
    let mut hist = Csv::new(&["horizon", "lo", "hi", "mass", "count"]);
    for (&h, recs) in horizons.iter().zip(&records) {
        let s = path_stats(&p, recs, &pay, cfg.bins);
        csv.row(&[
            num(h),
            label.into(),
            pay.name().into(),
            num(s.price_mean),
            num(s.price_stderr),
            num(s.absorbed_at_l),
            num(s.absorbed_at_0),
            s.n_paths.to_string(),
        ]);
        let th = &s.terminal_histogram;
        for (i, w) in th.edges.windows(2).enumerate() {
            hist.row(&[
                num(h),
                num(w[0]),
                num(w[1]),
                num(th.masses[i]),
                th.counts[i].to_string(),
            ]);
        }
    }
    if let Some(path) = dump {
        let mut d = Csv::new(&["path", "state", "terminal", "integrated_rate"]);
        for (i, r) in records.last().unwrap().iter().enumerate() {
            d.row(&[
                i.to_string(),
                state_name(r.state).into(),
                num(r.terminal),
                num(r.integrated_rate),
            ]);
        }
        emit(Some(&path), &d.finish())?;
    }
    if let Some(path) = hist_path {
        emit(Some(&path), &hist.finish())?;
    }
    Ok(Report::ok(csv.finish()))
}

pub fn compare(layers: &Layers, args: CompareArgs) -> Result<Report> {
    let p = model(layers, args.model, None)?;
    let horizon = match args.horizon {
        Some(h) => h,
        None => {
            let v = list(layers, None, "horizon")?;
            if v.len() != 1 {
                return Err(CliError::Usage(
                    "compare-measures takes a single horizon".into(),
                ));
            }
            v[0]
        }
    };
    let (cfg, threads) = sim_config(layers, &args.paths, horizon, Measure::P)?;
    let r = with_threads(threads, || compare_measures(&p, &cfg, horizon))??;
    let mut csv = Csv::new(&[
        "horizon",
        "quantity",
        "weighted",
        "weighted_stderr",
        "tilde",
        "tilde_stderr",
        "z",
    ]);
    csv.row(&[
        num(r.horizon),
        "weight".into(),
        num(r.mean_weight),
        num(r.mean_weight_stderr),
        num(1.0),
        num(0.0),
        num((r.mean_weight - 1.0) / r.mean_weight_stderr),
    ]);
    for row in &r.rows {
        csv.row(&[
            num(r.horizon),
            row.name.into(),
            num(row.weighted),
            num(row.weighted_stderr),
            num(row.tilde),
            num(row.tilde_stderr),
            num(row.z_score()),
        ]);
    }
    Ok(Report::ok(csv.finish()))
}
