//! Bound-constrained real-coded genetic algorithm.
//!
//! One generation: evaluate, sort by fitness, split the population into
//! winners (top half) and losers, split the winners into two parental pools
//! by alternating rank, refill the loser slots with blended and mutated
//! offspring of tournament-selected parents. The elite are carried over
//! untouched. Every gene stays inside the bounds box by construction.

mod engine;
mod operators;
pub mod sobol;

pub use engine::{evolve, GaResult};
pub use operators::{
    adapt_mutation_rate, admissible_weight_range, blend, blend_value, init_population, mutate,
    partition, tournament_select, Partition,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    Config(String),
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("gene {index} lies outside the bounds box: {values:?}")]
    OutOfBounds { index: usize, values: Vec<f64> },
    #[error("gene {index} has {got} components, bounds have {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("population must be sorted by evaluated fitness, descending")]
    Unsorted,
    #[error("tournament of size {k} needs a pool of at least {k}, got {pool}")]
    PoolTooSmall { k: usize, pool: usize },
    #[error("fitness evaluation failed for gene {values:?}: {message}")]
    Fitness { values: Vec<f64>, message: String },
}

/// Closed search interval per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Bounds {
    intervals: Vec<(f64, f64)>,
}

impl Bounds {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, GaError> {
        if intervals.is_empty() {
            return Err(GaError::Bounds("no dimensions".into()));
        }
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(GaError::Bounds(format!(
                    "dimension {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Bounds { intervals })
    }

    pub fn dimension(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn get(&self, dim: usize) -> (f64, f64) {
        self.intervals[dim]
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.intervals.len()
            && values
                .iter()
                .zip(&self.intervals)
                .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }

    /// `true` when every component is strictly inside its interval.
    pub fn contains_strictly(&self, values: &[f64]) -> bool {
        values.len() == self.intervals.len()
            && values
                .iter()
                .zip(&self.intervals)
                .all(|(&v, &(lo, hi))| lo < v && v < hi)
    }

    /// Affine map from the unit hypercube onto the box.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(&self.intervals)
            .map(|(&u, &(lo, hi))| lo + u * (hi - lo))
            .collect()
    }
}

impl TryFrom<Vec<(f64, f64)>> for Bounds {
    type Error = GaError;

    fn try_from(intervals: Vec<(f64, f64)>) -> Result<Self, GaError> {
        Bounds::new(intervals)
    }
}

impl From<Bounds> for Vec<(f64, f64)> {
    fn from(b: Bounds) -> Self {
        b.intervals
    }
}

/// A candidate parameter vector and its fitness, once evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gene {
    pub values: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Gene {
    pub fn new(values: Vec<f64>) -> Self {
        Gene {
            values,
            fitness: None,
        }
    }

    /// Fitness, or negative infinity when not yet evaluated.
    pub fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    /// Must be a multiple of 4.
    pub population_size: usize,
    pub max_generations: usize,
    pub elite_count: usize,
    pub tournament_size: usize,
    pub mutation_rate_min: f64,
    pub mutation_rate_max: f64,
    /// Upper limit on injected genes, and how many winners a run hands back.
    pub returning_genes: usize,
    pub rng_seed: u64,
    /// Generations without improvement before the mutation rate starts to rise.
    pub stagnation_window: usize,
    /// Blend weights are drawn from `[-alpha, 1 + alpha]`, narrowed to keep
    /// children inside the bounds.
    pub blend_alpha: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 512,
            max_generations: 5_000,
            elite_count: 3,
            tournament_size: 3,
            mutation_rate_min: 0.2,
            mutation_rate_max: 0.5,
            returning_genes: 64,
            rng_seed: 0,
            stagnation_window: 50,
            blend_alpha: 1.0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let fail = |msg: String| Err(GaError::Config(msg));
        let n = self.population_size;
        if n == 0 || !n.is_multiple_of(4) {
            return fail(format!(
                "population size {n} must be a positive multiple of 4"
            ));
        }
        if self.elite_count == 0 || self.elite_count >= n / 2 {
            return fail(format!(
                "elite count {} must be in 1..{}",
                self.elite_count,
                n / 2
            ));
        }
        if self.tournament_size == 0 || self.tournament_size > n / 4 {
            return fail(format!(
                "tournament size {} must be in 1..={} (one parental pool)",
                self.tournament_size,
                n / 4
            ));
        }
        let (lo, hi) = (self.mutation_rate_min, self.mutation_rate_max);
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return fail(format!(
                "mutation rates need 0 < min <= max < 1, got {lo}..{hi}"
            ));
        }
        if self.returning_genes > n / 2 {
            return fail(format!(
                "returning genes {} exceed half the population",
                self.returning_genes
            ));
        }
        if self.stagnation_window == 0 {
            return fail("stagnation window must be positive".into());
        }
        if !(self.blend_alpha.is_finite() && self.blend_alpha >= 0.0) {
            return fail(format!("blend alpha {} must be >= 0", self.blend_alpha));
        }
        Ok(())
    }
}

/// Random stream for one `(generation, slot)` pair, independent of the
/// order in which slots are processed.
pub(crate) fn slot_rng(seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | (slot as u64 & 0xffff_ffff));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        GaConfig::default().validate().unwrap();
    }

    #[test]
    fn config_invariants() {
        let base = GaConfig::default();
        let bad = [
            GaConfig {
                population_size: 510,
                ..base.clone()
            },
            GaConfig {
                elite_count: 256,
                ..base.clone()
            },
            GaConfig {
                mutation_rate_min: 0.6,
                ..base.clone()
            },
            GaConfig {
                returning_genes: 257,
                ..base.clone()
            },
            GaConfig {
                tournament_size: 0,
                ..base.clone()
            },
            GaConfig {
                stagnation_window: 0,
                ..base.clone()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(GaError::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn bounds_validation_and_mapping() {
        assert!(Bounds::new(vec![(1.0, 1.0)]).is_err());
        assert!(Bounds::new(vec![]).is_err());
        let b = Bounds::new(vec![(0.0, 0.1), (4.0, 30.0)]).unwrap();
        assert_eq!(b.from_unit(&[0.5, 0.5]), vec![0.05, 17.0]);
        assert!(b.contains(&[0.0, 30.0]));
        assert!(!b.contains_strictly(&[0.0, 30.0]));
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, "[[0.0,0.1],[4.0,30.0]]");
        assert!(serde_json::from_str::<Bounds>("[[2.0,1.0]]").is_err());
    }
}
