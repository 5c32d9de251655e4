use nalgebra::{Matrix4, Vector4};
use nssfit::calibration::{
    calibrate, calibrate_series, reuse_shape_params, BoundsPreset, CalibrationResult, RollingPlan,
};
use nssfit::curve::{CurveParams, ModelKind, SpotLoadings};
use nssfit::ga::GaConfig;
use nssfit::ingest::fixtures;
use nssfit::objective::{residuals, TermStructure};

fn config(pop: usize, generations: usize, seed: u64) -> GaConfig {
    GaConfig {
        population_size: pop,
        max_generations: generations,
        rng_seed: seed,
        ..GaConfig::default()
    }
}

fn first_day() -> TermStructure {
    fixtures::eur_ois_curves().remove(0)
}

fn base_fit() -> CalibrationResult {
    calibrate(
        &first_day(),
        ModelKind::Nss,
        &BoundsPreset::Ois.bounds(),
        &config(512, 800, 3),
        &[],
    )
    .unwrap()
}

/// Least squares via the 4x4 normal equations.
fn normal_equations(market: &TermStructure, lambda: f64, kappa: f64) -> Vector4<f64> {
    let mut xtx = Matrix4::zeros();
    let mut xty = Vector4::zeros();
    for &(t, r) in market.points() {
        let l = SpotLoadings::at(t, lambda, Some(kappa)).unwrap();
        let row = Vector4::from_column_slice(l.as_slice());
        xtx += row * row.transpose();
        xty += row * r;
    }
    xtx.lu().solve(&xty).unwrap()
}

#[test]
fn result_is_consistent_with_best_fitness() {
    let r = base_fit();
    assert!((-(r.errors.l2 * r.errors.l2) - r.fitness).abs() <= 1e-12);
    assert!(r.fitness >= r.initial_fitness);
    assert_eq!(r.winners[0].values, r.params.to_values());
    assert!(r.winners.len() <= 64);
    let distinct: std::collections::HashSet<Vec<u64>> = r
        .winners
        .iter()
        .map(|g| g.values.iter().map(|v| v.to_bits()).collect())
        .collect();
    assert_eq!(distinct.len(), r.winners.len());
}

#[test]
fn refit_on_base_market_matches_normal_equations() {
    let base = base_fit();
    let market = first_day();
    let refit = reuse_shape_params(
        &base,
        std::slice::from_ref(&market),
        &BoundsPreset::Ois.bounds(),
        &config(64, 100, 0),
    )
    .unwrap();
    let oracle = normal_equations(&market, base.params.lambda, base.params.kappa().unwrap());
    let betas = refit[0].params.betas();
    for (b, o) in betas.iter().zip(oracle.iter()) {
        assert!((b - o).abs() <= 1e-6, "beta {b} vs normal equations {o}");
    }
    assert_eq!(refit[0].params.lambda, base.params.lambda);
    assert_eq!(refit[0].params.kappa(), base.params.kappa());
    assert!(refit[0].errors.l2 <= base.errors.l2 + 1e-6);
    assert_eq!(refit[0].generations, 0);
}

#[test]
fn refit_reproduces_exact_curve_with_same_shape() {
    let base = base_fit();
    let (lambda, kappa) = (base.params.lambda, base.params.kappa().unwrap());
    let truth = CurveParams::nss(0.03, -0.01, 0.2, 0.5, lambda, kappa).unwrap();
    let market = TermStructure::new(
        first_day().as_of(),
        first_day()
            .tenors()
            .into_iter()
            .map(|t| (t, truth.spot_rate(t).unwrap()))
            .collect(),
    )
    .unwrap();
    let refit = reuse_shape_params(
        &base,
        std::slice::from_ref(&market),
        &BoundsPreset::Ois.bounds(),
        &config(64, 10, 0),
    )
    .unwrap();
    for r in residuals(&refit[0].params, &market).unwrap() {
        assert!(r.abs() <= 1e-10);
    }
}

#[test]
fn parallel_shift_moves_only_the_level() {
    let base = base_fit();
    let market = first_day();
    let shifts: Vec<f64> = (0..100)
        .map(|i| -0.0005 + 0.001 * i as f64 / 99.0)
        .collect();
    let scenarios: Vec<TermStructure> = shifts.iter().map(|&s| market.shifted(s)).collect();
    let bounds = BoundsPreset::Ois.bounds();
    let unshifted = reuse_shape_params(&base, &[market], &bounds, &config(64, 10, 0)).unwrap();
    let fitted = reuse_shape_params(&base, &scenarios, &bounds, &config(64, 10, 0)).unwrap();
    let b0 = unshifted[0].params.beta0;
    for (shift, r) in shifts.iter().zip(&fitted) {
        assert!((r.params.beta0 - b0 - shift).abs() <= 1e-6);
        assert!((r.params.beta1 - unshifted[0].params.beta1).abs() <= 1e-6);
        assert!((r.errors.l2 - unshifted[0].errors.l2).abs() <= 1e-6);
    }
}

#[test]
fn warm_start_beats_cold_start_at_generation_zero() {
    let curves = fixtures::eur_ois_curves();
    let bounds = BoundsPreset::Ois.bounds();
    let day1 = calibrate(
        &curves[0],
        ModelKind::Nss,
        &bounds,
        &config(512, 300, 1),
        &[],
    )
    .unwrap();
    for seed in [2, 3, 4] {
        let cfg = config(512, 0, seed);
        let warm = calibrate(&curves[1], ModelKind::Nss, &bounds, &cfg, &day1.winners).unwrap();
        let cold = calibrate(&curves[1], ModelKind::Nss, &bounds, &cfg, &[]).unwrap();
        assert!(warm.initial_fitness >= cold.initial_fitness);
    }
}

#[test]
fn short_series_runs_each_date_once() {
    let curves: Vec<TermStructure> = fixtures::eur_ois_curves().into_iter().take(3).collect();
    let plan = RollingPlan {
        first_day_generations: 200,
        subsequent_day_generations: 50,
        carry_count: 16,
    };
    let results = calibrate_series(
        &curves,
        ModelKind::Nss,
        &BoundsPreset::Ois.bounds(),
        &config(256, 200, 9),
        &plan,
    )
    .unwrap();
    let dates: Vec<_> = results.iter().map(|r| r.date).collect();
    assert_eq!(dates, curves.iter().map(|c| c.as_of()).collect::<Vec<_>>());
    assert_eq!(
        results.iter().map(|r| r.generations).collect::<Vec<_>>(),
        vec![200, 50, 50]
    );
}

#[test]
fn ns_fit_is_worse_than_nss_on_first_day() {
    let market = first_day();
    let ns = calibrate(
        &market,
        ModelKind::Ns,
        &BoundsPreset::OisNs.bounds(),
        &config(512, 1_000, 0),
        &[],
    )
    .unwrap();
    let nss = calibrate(
        &market,
        ModelKind::Nss,
        &BoundsPreset::Ois.bounds(),
        &config(512, 1_000, 0),
        &[],
    )
    .unwrap();
    assert!(ns.errors.l2 > nss.errors.l2);
}
