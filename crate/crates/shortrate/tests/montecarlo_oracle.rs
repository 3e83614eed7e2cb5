//! The simulator against the spectral and pricing code paths, at budgets
//! small enough for the regular test run.

use shortrate::model::ModelParams;
use shortrate::montecarlo::{
    compare_measures, density_histogram, simulate, simulate_at, Measure, SimConfig,
};
use shortrate::numerics::{integrate, QuadSpec};
use shortrate::pricing::{bond_k_half, bond_k_neg_half, price_general, Payoff};
use shortrate::spectral::{solve_eigen, DensityField, DensityRow};

fn half() -> ModelParams {
    ModelParams::new(0.5, 1.0, 1.0).unwrap()
}

fn neg() -> ModelParams {
    ModelParams::new(-0.5, 1.0, 1.0).unwrap()
}

fn within(mc: f64, se: f64, reference: f64, k: f64) -> bool {
    (mc - reference).abs() < k * se
}

#[test]
fn bonds_match_simulation() {
    let sys = solve_eigen(&half(), 25).unwrap();
    let horizons = [0.25, 0.5];
    for (p, seed) in [(half(), 101), (neg(), 102)] {
        let cfg = SimConfig::new(0.5, 5e-4, 0.5, 50_000, seed, Measure::P);
        let stats = simulate_at(&p, &cfg, &Payoff::one(), &horizons).unwrap();
        for (s, &big_t) in stats.iter().zip(&horizons) {
            let b = if p.is_k_half() {
                bond_k_half(&sys, 0.0, 0.5, big_t).unwrap()
            } else {
                bond_k_neg_half(&p, 0.0, 0.5, big_t).unwrap()
            };
            assert!(
                within(s.price_mean, s.price_stderr, b, 3.0),
                "k={} T={big_t}: mc {} ± {} vs {b}",
                p.k(),
                s.price_mean,
                s.price_stderr
            );
        }
    }
}

#[test]
fn generic_payoffs_match_simulation() {
    let cases = [
        (half(), Payoff::linear(), 201),
        (half(), Payoff::put_on_rate(0.45), 202),
        (neg(), Payoff::linear(), 203),
        (neg(), Payoff::put_on_rate(0.55), 204),
    ];
    for (p, pay, seed) in cases {
        let field = DensityField::new(&p).unwrap();
        let v = price_general(&field, &pay, 0.0, 0.5, 0.5).unwrap();
        let cfg = SimConfig::new(0.5, 5e-4, 0.5, 50_000, seed, Measure::P);
        let s = simulate(&p, &cfg, &pay).unwrap();
        assert!(
            within(s.price_mean, s.price_stderr, v, 3.0),
            "k={} {}: mc {} ± {} vs {v}",
            p.k(),
            pay.name(),
            s.price_mean,
            s.price_stderr
        );
    }
}

#[test]
fn halving_dt_is_within_noise() {
    let p = half();
    let coarse = SimConfig::new(0.5, 1e-3, 0.5, 40_000, 301, Measure::P);
    let fine = SimConfig {
        dt: 5e-4,
        seed: 302,
        ..coarse
    };
    let a = simulate(&p, &coarse, &Payoff::one()).unwrap();
    let b = simulate(&p, &fine, &Payoff::one()).unwrap();
    let combined = a.price_stderr.hypot(b.price_stderr);
    assert!(
        (a.price_mean - b.price_mean).abs() < 2.0 * combined,
        "{a:?} vs {b:?}"
    );
}

#[test]
fn histogram_matches_spectral_density() {
    let p = half();
    let field = DensityField::new(&p).unwrap();
    let row = DensityRow::new(&field, 0.0, 0.5, 0.2).unwrap();
    let cfg = SimConfig::new(0.5, 2e-4, 0.2, 100_000, 401, Measure::PTilde);
    let h = density_histogram(&p, &cfg, 0.2, 40).unwrap();
    let (centers, dens, se) = (
        h.histogram.centers(),
        h.histogram.density(),
        h.histogram.density_stderr(h.n_paths),
    );
    let mut checked = 0;
    for i in 0..centers.len() {
        if h.histogram.counts[i] < 200 {
            continue;
        }
        let g = row.at(centers[i]).unwrap();
        assert!(
            (dens[i] - g).abs() < 3.0 * se[i],
            "y={}: mc {} ± {} vs {g}",
            centers[i],
            dens[i],
            se[i]
        );
        checked += 1;
    }
    assert!(checked >= 20);
    assert!((h.total_mass() - 1.0).abs() < 1e-12);
}

#[test]
fn natural_origin_holds_little_mass() {
    let p = neg();
    let cfg = SimConfig::new(0.5, 2e-4, 0.2, 50_000, 501, Measure::PTilde);
    let h = density_histogram(&p, &cfg, 0.2, 20).unwrap();
    assert_eq!(h.absorbed_at_0, 0.0);
    assert!(h.histogram.masses[0] < 0.01);
}

#[test]
fn interior_mass_and_absorption_add_up() {
    for (p, seed) in [(half(), 601), (neg(), 602)] {
        let field = DensityField::new(&p).unwrap();
        let row = DensityRow::new(&field, 0.0, 0.5, 0.2).unwrap();
        let spec = QuadSpec::default().with_abs_tol(1e-9).with_rel_tol(1e-8);
        let interior = integrate(|y| row.at(y).unwrap(), 0.0, 1.0, spec).unwrap();
        let cfg = SimConfig::new(0.5, 2e-4, 0.2, 50_000, seed, Measure::PTilde);
        let h = density_histogram(&p, &cfg, 0.2, 20).unwrap();
        let absorbed = h.absorbed_at_l + h.absorbed_at_0;
        let n = h.n_paths as f64;
        let se = (absorbed * (1.0 - absorbed) / n).sqrt();
        assert!(interior < 1.0);
        assert!(
            (interior + absorbed - 1.0).abs() < 3.0 * se,
            "k={}: {interior} + {absorbed}",
            p.k()
        );
    }
}

#[test]
fn weighted_physical_paths_reproduce_transformed_measure() {
    let p = half();
    let cfg = SimConfig::new(0.5, 5e-4, 0.25, 40_000, 701, Measure::P);
    let r = compare_measures(&p, &cfg, 0.25).unwrap();
    assert!((r.mean_weight - 1.0).abs() < 3.0 * r.mean_weight_stderr);
    for row in &r.rows {
        assert!(row.z_score().abs() < 3.0, "{row:?}");
    }
}
