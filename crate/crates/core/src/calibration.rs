//! Single-date calibration, the rolling warm-started protocol over a series
//! of dates, and the fixed-shape re-fit for scenario sets.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{spot_loadings, CurveError, CurveParams, ModelKind};
use crate::ga::{evolve, Bounds, GaConfig, GaError, Gene};
use crate::objective::{fit_errors, CurveObjective, FitErrors, TermStructure};

/// Smallest shape parameter the search will visit, in years. Bounds that
/// start at zero for lambda or kappa are raised to this value, since the
/// curve is undefined at a zero shape.
pub const SHAPE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no term structures to calibrate")]
    EmptySeries,
    #[error("term structures must be in ascending date order ({0} follows {1})")]
    Unordered(NaiveDate, NaiveDate),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Named bounds sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundsPreset {
    /// NSS bounds for OIS curves.
    Ois,
    /// NS bounds for OIS curves, lambda spanning both NSS shape ranges.
    OisNs,
    /// Wider NSS bounds for raw government bond yields.
    Usd,
}

impl BoundsPreset {
    pub fn kind(self) -> ModelKind {
        match self {
            BoundsPreset::OisNs => ModelKind::Ns,
            BoundsPreset::Ois | BoundsPreset::Usd => ModelKind::Nss,
        }
    }

    pub fn bounds(self) -> Bounds {
        let intervals = match self {
            BoundsPreset::Ois => vec![
                (0.0, 0.10),
                (-0.10, 1.0),
                (-2.0, 2.0),
                (0.0, 2.0),
                (0.0, 4.0),
                (4.0, 30.0),
            ],
            BoundsPreset::OisNs => vec![(0.0, 0.10), (-0.10, 1.0), (-2.0, 2.0), (0.0, 30.0)],
            BoundsPreset::Usd => vec![
                (0.0, 0.10),
                (-1.0, 4.0),
                (-2.0, 4.0),
                (-2.0, 8.0),
                (0.0, 6.0),
                (6.0, 30.0),
            ],
        };
        Bounds::new(intervals).expect("preset bounds are valid")
    }
}

impl fmt::Display for BoundsPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundsPreset::Ois => "ois",
            BoundsPreset::OisNs => "ois-ns",
            BoundsPreset::Usd => "usd",
        })
    }
}

impl FromStr for BoundsPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ois" => Ok(BoundsPreset::Ois),
            "ois-ns" => Ok(BoundsPreset::OisNs),
            "usd" => Ok(BoundsPreset::Usd),
            other => Err(format!("unknown bounds preset `{other}`")),
        }
    }
}

/// Generation budget for a rolling run over consecutive dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingPlan {
    pub first_day_generations: usize,
    pub subsequent_day_generations: usize,
    /// Winners of day `t - 1` injected into day `t`'s initial population.
    pub carry_count: usize,
}

impl RollingPlan {
    pub fn for_config(config: &GaConfig) -> Self {
        RollingPlan {
            first_day_generations: 10_000,
            subsequent_day_generations: 1_000,
            carry_count: config.returning_genes,
        }
    }

    pub fn validate(&self, config: &GaConfig) -> Result<(), CalibrationError> {
        if self.subsequent_day_generations == 0
            || self.first_day_generations < self.subsequent_day_generations
        {
            return Err(CalibrationError::Config(format!(
                "need first-day generations ({}) >= subsequent-day generations ({}) >= 1",
                self.first_day_generations, self.subsequent_day_generations
            )));
        }
        if self.carry_count > config.returning_genes {
            return Err(CalibrationError::Config(format!(
                "carry count {} exceeds returning genes {}",
                self.carry_count, config.returning_genes
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub date: NaiveDate,
    pub params: CurveParams,
    pub errors: FitErrors,
    pub generations: usize,
    /// Fitness of the best gene (negative sum of squared residuals).
    pub fitness: f64,
    /// Best fitness in the initial population, before any evolution.
    pub initial_fitness: f64,
    /// Distinct top genes of the final population, fittest first.
    pub winners: Vec<Gene>,
}

/// Bounds actually searched: shape lower bounds raised to [`SHAPE_FLOOR`].
pub fn search_bounds(kind: ModelKind, bounds: &Bounds) -> Result<Bounds, CalibrationError> {
    if bounds.dimension() != kind.dimension() {
        return Err(CalibrationError::Config(format!(
            "{kind} needs {} bounds, got {}",
            kind.dimension(),
            bounds.dimension()
        )));
    }
    let mut intervals = bounds.intervals().to_vec();
    for &i in kind.shape_indices() {
        let (lo, hi) = intervals[i];
        if hi <= SHAPE_FLOOR {
            return Err(CalibrationError::Config(format!(
                "upper bound {hi} for a shape parameter must be positive"
            )));
        }
        intervals[i] = (lo.max(SHAPE_FLOOR), hi);
    }
    Ok(Bounds::new(intervals)?)
}

/// Fits one term structure.
pub fn calibrate(
    market: &TermStructure,
    kind: ModelKind,
    bounds: &Bounds,
    config: &GaConfig,
    injected: &[Gene],
) -> Result<CalibrationResult, CalibrationError> {
    let search = search_bounds(kind, bounds)?;
    let objective = CurveObjective::new(kind, market);
    let run = evolve(config, &search, |x: &[f64]| objective.evaluate(x), injected)?;
    let params = CurveParams::from_values(kind, &run.best.values)?;
    Ok(CalibrationResult {
        date: market.as_of(),
        errors: fit_errors(&params, market)?,
        params,
        generations: run.generations_run,
        fitness: run.best.score(),
        initial_fitness: run.initial_best_fitness(),
        winners: distinct_top(&run.winners, config.returning_genes),
    })
}

fn distinct_top(sorted: &[Gene], count: usize) -> Vec<Gene> {
    let mut seen = HashSet::new();
    sorted
        .iter()
        .filter(|g| seen.insert(g.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .take(count)
        .cloned()
        .collect()
}

/// Fits consecutive dates, seeding each day after the first with the
/// previous day's winners.
pub fn calibrate_series(
    markets: &[TermStructure],
    kind: ModelKind,
    bounds: &Bounds,
    config: &GaConfig,
    plan: &RollingPlan,
) -> Result<Vec<CalibrationResult>, CalibrationError> {
    if markets.is_empty() {
        return Err(CalibrationError::EmptySeries);
    }
    plan.validate(config)?;
    for pair in markets.windows(2) {
        if pair[1].as_of() <= pair[0].as_of() {
            return Err(CalibrationError::Unordered(
                pair[1].as_of(),
                pair[0].as_of(),
            ));
        }
    }
    let mut results: Vec<CalibrationResult> = Vec::with_capacity(markets.len());
    for (day, market) in markets.iter().enumerate() {
        let (generations, injected) = match results.last() {
            None => (plan.first_day_generations, &[][..]),
            Some(prev) => {
                let carry = plan.carry_count.min(prev.winners.len());
                (plan.subsequent_day_generations, &prev.winners[..carry])
            }
        };
        let day_config = GaConfig {
            max_generations: generations,
            rng_seed: config.rng_seed.wrapping_add(day as u64),
            ..config.clone()
        };
        let result = calibrate(market, kind, bounds, &day_config, injected)?;
        results.push(result);
    }
    Ok(results)
}

/// Re-fits only the betas of each market with `base`'s shape parameters held fixed.
///
/// With the shape fixed the model is linear in the betas, so an ordinary least
/// squares solve is tried first. If that solution breaks a beta bound, a GA
/// restricted to the betas is run instead, using `config`.
pub fn reuse_shape_params(
    base: &CalibrationResult,
    markets: &[TermStructure],
    bounds: &Bounds,
    config: &GaConfig,
) -> Result<Vec<CalibrationResult>, CalibrationError> {
    let kind = base.params.kind();
    let search = search_bounds(kind, bounds)?;
    let beta_bounds = Bounds::new(search.intervals()[..kind.beta_count()].to_vec())?;
    let lambda = base.params.lambda;
    let kappa = base.params.kappa();

    markets
        .iter()
        .map(|market| {
            let loadings = spot_loadings(&market.tenors(), lambda, kappa)?;
            let design = DMatrix::from_row_iterator(
                loadings.len(),
                kind.beta_count(),
                loadings.iter().flat_map(|l| l.as_slice().iter().copied()),
            );
            let rates = DVector::from_vec(market.rates());
            let (betas, generations) = match least_squares(&design, &rates) {
                Some(b) if beta_bounds.contains(b.as_slice()) => (b.as_slice().to_vec(), 0),
                _ => {
                    let objective = |x: &[f64]| -> Result<f64, CurveError> {
                        let beta = DVector::from_column_slice(x);
                        Ok(-(&design * beta - &rates).norm_squared())
                    };
                    let run = evolve(config, &beta_bounds, objective, &[])?;
                    (run.best.values, run.generations_run)
                }
            };
            let mut values = betas;
            values.push(lambda);
            if let Some(k) = kappa {
                values.push(k);
            }
            let params = CurveParams::from_values(kind, &values)?;
            let errors = fit_errors(&params, market)?;
            Ok(CalibrationResult {
                date: market.as_of(),
                params,
                errors,
                generations,
                fitness: -errors.l2 * errors.l2,
                initial_fitness: f64::NEG_INFINITY,
                winners: Vec::new(),
            })
        })
        .collect()
}

fn least_squares(design: &DMatrix<f64>, rates: &DVector<f64>) -> Option<DVector<f64>> {
    design
        .clone()
        .svd(true, true)
        .solve(rates, 1e-14)
        .ok()
        .filter(|b| b.iter().all(|v| v.is_finite()))
}
