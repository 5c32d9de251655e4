//! Nelson-Siegel and Nelson-Siegel-Svensson curve families.
//!
//! Both families are linear in the betas once the shape parameters are fixed,
//! so evaluation is split into a loading step (basis values per tenor and
//! shape) and a dot product with the coefficients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this `tau / shape` ratio the hump loading uses its Taylor series,
/// since `F1 - exp(-x)` cancels catastrophically near zero.
const SERIES_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurveError {
    #[error("shape parameter {name} must be positive and finite, got {value}")]
    NonPositiveShape { name: &'static str, value: f64 },
    #[error("tenor must be a finite, nonnegative number of years, got {0}")]
    InvalidTenor(f64),
    #[error("coefficient {name} is not finite")]
    NonFiniteCoefficient { name: &'static str },
    #[error("{kind} expects {expected} parameters, got {got}")]
    WrongArity {
        kind: ModelKind,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ns,
    Nss,
}

impl ModelKind {
    /// Number of free parameters: 4 for NS, 6 for NSS.
    pub const fn dimension(self) -> usize {
        match self {
            ModelKind::Ns => 4,
            ModelKind::Nss => 6,
        }
    }

    /// Number of linear coefficients (betas).
    pub const fn beta_count(self) -> usize {
        match self {
            ModelKind::Ns => 3,
            ModelKind::Nss => 4,
        }
    }

    /// Parameter names in gene order: betas first, then shape parameters.
    pub const fn parameter_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ns => &["beta0", "beta1", "beta2", "lambda"],
            ModelKind::Nss => &["beta0", "beta1", "beta2", "beta3", "lambda", "kappa"],
        }
    }

    /// Positions of the shape parameters (lambda, kappa) in gene order.
    pub const fn shape_indices(self) -> &'static [usize] {
        match self {
            ModelKind::Ns => &[3],
            ModelKind::Nss => &[4, 5],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ns => "ns",
            ModelKind::Nss => "nss",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ns" => Ok(ModelKind::Ns),
            "nss" => Ok(ModelKind::Nss),
            other => Err(format!("unknown model `{other}` (expected ns or nss)")),
        }
    }
}

/// Time to maturity in years.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tenor(f64);

impl Tenor {
    pub const ZERO: Tenor = Tenor(0.0);

    pub fn new(years: f64) -> Result<Self, CurveError> {
        if years.is_finite() && years >= 0.0 {
            Ok(Tenor(years))
        } else {
            Err(CurveError::InvalidTenor(years))
        }
    }

    /// ACT/365 conversion from a day count.
    pub fn from_days(days: u32) -> Self {
        Tenor(f64::from(days) / 365.0)
    }

    pub fn years(self) -> f64 {
        self.0
    }
}

/// Second hump of the Svensson extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondHump {
    pub beta3: f64,
    pub kappa: f64,
}

/// Coefficients of an NS curve, or an NSS curve when `second` is present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda: f64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub second: Option<SecondHump>,
}

impl CurveParams {
    pub fn ns(beta0: f64, beta1: f64, beta2: f64, lambda: f64) -> Result<Self, CurveError> {
        let params = CurveParams {
            beta0,
            beta1,
            beta2,
            lambda,
            second: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn nss(
        beta0: f64,
        beta1: f64,
        beta2: f64,
        beta3: f64,
        lambda: f64,
        kappa: f64,
    ) -> Result<Self, CurveError> {
        let params = CurveParams {
            beta0,
            beta1,
            beta2,
            lambda,
            second: Some(SecondHump { beta3, kappa }),
        };
        params.validate()?;
        Ok(params)
    }

    /// Decodes a parameter vector in gene order
    /// (`beta0, beta1, beta2, [beta3], lambda, [kappa]`).
    pub fn from_values(kind: ModelKind, values: &[f64]) -> Result<Self, CurveError> {
        if values.len() != kind.dimension() {
            return Err(CurveError::WrongArity {
                kind,
                expected: kind.dimension(),
                got: values.len(),
            });
        }
        match kind {
            ModelKind::Ns => CurveParams::ns(values[0], values[1], values[2], values[3]),
            ModelKind::Nss => CurveParams::nss(
                values[0], values[1], values[2], values[3], values[4], values[5],
            ),
        }
    }

    /// Inverse of [`CurveParams::from_values`].
    pub fn to_values(&self) -> Vec<f64> {
        match self.second {
            None => vec![self.beta0, self.beta1, self.beta2, self.lambda],
            Some(h) => vec![
                self.beta0,
                self.beta1,
                self.beta2,
                h.beta3,
                self.lambda,
                h.kappa,
            ],
        }
    }

    pub fn kind(&self) -> ModelKind {
        if self.second.is_some() {
            ModelKind::Nss
        } else {
            ModelKind::Ns
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        let mut betas = vec![self.beta0, self.beta1, self.beta2];
        if let Some(h) = self.second {
            betas.push(h.beta3);
        }
        betas
    }

    pub fn kappa(&self) -> Option<f64> {
        self.second.map(|h| h.kappa)
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        check_shape("lambda", self.lambda)?;
        for (name, v) in [
            ("beta0", self.beta0),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ] {
            if !v.is_finite() {
                return Err(CurveError::NonFiniteCoefficient { name });
            }
        }
        if let Some(h) = self.second {
            check_shape("kappa", h.kappa)?;
            if !h.beta3.is_finite() {
                return Err(CurveError::NonFiniteCoefficient { name: "beta3" });
            }
        }
        Ok(())
    }

    /// Spot (zero) rate at `tau`.
    pub fn spot_rate(&self, tau: Tenor) -> Result<f64, CurveError> {
        self.validate()?;
        let loadings = SpotLoadings::at(tau, self.lambda, self.kappa())?;
        Ok(loadings.combine(&self.betas()))
    }

    /// Instantaneous forward rate at `tau`.
    pub fn forward_rate(&self, tau: Tenor) -> Result<f64, CurveError> {
        self.validate()?;
        let x = tau.years() / self.lambda;
        let decay = (-x).exp();
        let mut rate = self.beta0 + self.beta1 * decay + self.beta2 * x * decay;
        if let Some(h) = self.second {
            let y = tau.years() / h.kappa;
            rate += h.beta3 * y * (-y).exp();
        }
        Ok(rate)
    }
}

fn check_shape(name: &'static str, value: f64) -> Result<(), CurveError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CurveError::NonPositiveShape { name, value })
    }
}

/// `(1 - exp(-x)) / x` with the limit 1 at `x = 0`.
#[inline]
pub(crate) fn slope_loading(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - exp(-x)) / x - exp(-x)` with the limit 0 at `x = 0`.
#[inline]
pub(crate) fn hump_loading(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // x/2 - x^2/3 + x^3/8 - x^4/30
        x * (0.5 + x * (-1.0 / 3.0 + x * (0.125 - x / 30.0)))
    } else {
        slope_loading(x) - (-x).exp()
    }
}

/// `(slope_loading(x), hump_loading(x))` sharing a single exponential.
#[inline]
pub(crate) fn loading_pair(x: f64) -> (f64, f64) {
    if x < SERIES_CUTOFF {
        return (slope_loading(x), hump_loading(x));
    }
    let decay = (-x).exp();
    // 1 - exp(-x) loses no precision once x is away from zero
    let slope = if x < 0.5 {
        -(-x).exp_m1() / x
    } else {
        (1.0 - decay) / x
    };
    (slope, slope - decay)
}

/// Spot basis `(F0, F1, F2)` of the Nelson-Siegel family at `tau` for shape `lambda`.
pub fn ns_spot_basis(tau: Tenor, lambda: f64) -> Result<[f64; 3], CurveError> {
    check_shape("lambda", lambda)?;
    let x = tau.years() / lambda;
    Ok([1.0, slope_loading(x), hump_loading(x)])
}

/// Spot-rate loadings of one tenor: `[1, F1, F2]` for NS and `[1, F1, F2, F3]` for NSS.
///
/// The rate is the dot product of these loadings with the betas, so the
/// loadings can be computed once per shape and reused for many coefficient sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotLoadings {
    values: [f64; 4],
    len: usize,
}

impl SpotLoadings {
    pub fn at(tau: Tenor, lambda: f64, kappa: Option<f64>) -> Result<Self, CurveError> {
        let [f0, f1, f2] = ns_spot_basis(tau, lambda)?;
        match kappa {
            None => Ok(SpotLoadings {
                values: [f0, f1, f2, 0.0],
                len: 3,
            }),
            Some(kappa) => {
                check_shape("kappa", kappa)?;
                let f3 = hump_loading(tau.years() / kappa);
                Ok(SpotLoadings {
                    values: [f0, f1, f2, f3],
                    len: 4,
                })
            }
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn combine(&self, betas: &[f64]) -> f64 {
        self.as_slice().iter().zip(betas).map(|(l, b)| l * b).sum()
    }
}

/// Loadings for a whole tenor grid at a fixed shape.
pub fn spot_loadings(
    tenors: &[Tenor],
    lambda: f64,
    kappa: Option<f64>,
) -> Result<Vec<SpotLoadings>, CurveError> {
    tenors
        .iter()
        .map(|&tau| SpotLoadings::at(tau, lambda, kappa))
        .collect()
}
