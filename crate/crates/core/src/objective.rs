//! Market term structures, the GA fitness and the reported error norms.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{hump_loading, loading_pair, CurveError, CurveParams, ModelKind, Tenor};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TermStructureError {
    #[error("term structure for {0} has no points")]
    Empty(NaiveDate),
    #[error("term structure for {date}: tenor {tenor} at point {index} must be positive")]
    NonPositiveTenor {
        date: NaiveDate,
        index: usize,
        tenor: f64,
    },
    #[error("term structure for {date}: tenors decrease at point {index}")]
    Unordered { date: NaiveDate, index: usize },
    #[error("term structure for {date}: rate at point {index} is not finite")]
    NonFiniteRate { date: NaiveDate, index: usize },
}

/// Dated market observations `(tenor, decimal rate)` in ascending tenor order.
///
/// Equal tenors are allowed: two bonds with the same maturity both enter the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermStructure {
    as_of: NaiveDate,
    points: Vec<(Tenor, f64)>,
}

impl TermStructure {
    pub fn new(as_of: NaiveDate, points: Vec<(Tenor, f64)>) -> Result<Self, TermStructureError> {
        if points.is_empty() {
            return Err(TermStructureError::Empty(as_of));
        }
        for (index, &(tenor, rate)) in points.iter().enumerate() {
            if tenor.years() <= 0.0 {
                return Err(TermStructureError::NonPositiveTenor {
                    date: as_of,
                    index,
                    tenor: tenor.years(),
                });
            }
            if !rate.is_finite() {
                return Err(TermStructureError::NonFiniteRate { date: as_of, index });
            }
            if index > 0 && tenor < points[index - 1].0 {
                return Err(TermStructureError::Unordered { date: as_of, index });
            }
        }
        Ok(TermStructure { as_of, points })
    }

    pub fn as_of(&self) -> NaiveDate {
        self.as_of
    }

    pub fn points(&self) -> &[(Tenor, f64)] {
        &self.points
    }

    pub fn tenors(&self) -> Vec<Tenor> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same tenors, every rate moved by `shift`.
    pub fn shifted(&self, shift: f64) -> TermStructure {
        TermStructure {
            as_of: self.as_of,
            points: self.points.iter().map(|&(t, r)| (t, r + shift)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitErrors {
    /// Euclidean norm of the residual vector (not normalized by point count).
    pub l2: f64,
    /// Largest absolute residual.
    pub linf: f64,
}

impl FitErrors {
    pub fn from_residuals(residuals: &[f64]) -> Self {
        FitErrors {
            l2: sum_of_squares(residuals).sqrt(),
            linf: residuals.iter().fold(0.0, |m, r| m.max(r.abs())),
        }
    }
}

fn sum_of_squares(residuals: &[f64]) -> f64 {
    residuals.iter().map(|r| r * r).sum()
}

/// Model minus market, in market order.
pub fn residuals(params: &CurveParams, market: &TermStructure) -> Result<Vec<f64>, CurveError> {
    market
        .points
        .iter()
        .map(|&(tau, rate)| Ok(params.spot_rate(tau)? - rate))
        .collect()
}

pub fn fit_errors(params: &CurveParams, market: &TermStructure) -> Result<FitErrors, CurveError> {
    Ok(FitErrors::from_residuals(&residuals(params, market)?))
}

/// Negative sum of squared residuals. Zero is a perfect fit.
pub fn fitness(params: &CurveParams, market: &TermStructure) -> Result<f64, CurveError> {
    Ok(-sum_of_squares(&residuals(params, market)?))
}

/// Allocation-free fitness over raw parameter vectors in gene order,
/// for use inside the GA hot loop.
#[derive(Debug, Clone)]
pub struct CurveObjective {
    kind: ModelKind,
    tenors: Vec<f64>,
    rates: Vec<f64>,
}

impl CurveObjective {
    pub fn new(kind: ModelKind, market: &TermStructure) -> Self {
        CurveObjective {
            kind,
            tenors: market.points.iter().map(|p| p.0.years()).collect(),
            rates: market.points.iter().map(|p| p.1).collect(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Same value as [`fitness`] on the decoded parameters.
    pub fn evaluate(&self, values: &[f64]) -> Result<f64, CurveError> {
        let params = CurveParams::from_values(self.kind, values)?;
        let lambda = params.lambda;
        let second = params.second;
        let mut sum = 0.0;
        for (&t, &market) in self.tenors.iter().zip(&self.rates) {
            let (slope, hump) = loading_pair(t / lambda);
            let mut model = params.beta0 + params.beta1 * slope + params.beta2 * hump;
            if let Some(h) = second {
                model += h.beta3 * hump_loading(t / h.kappa);
            }
            let r = model - market;
            sum += r * r;
        }
        Ok(-sum)
    }
}
