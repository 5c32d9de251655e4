use std::fmt::Display;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operators::{
    adapt_mutation_rate, blend, init_population, mutate, partition, tournament_select,
};
use super::{slot_rng, Bounds, GaConfig, GaError, Gene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    /// Fittest gene seen over the whole run.
    pub best: Gene,
    /// Top half of the final population, fittest first.
    pub winners: Vec<Gene>,
    pub generations_run: usize,
    /// Best fitness after each generation; entry 0 is the initial population.
    pub best_fitness_history: Vec<f64>,
}

impl GaResult {
    /// Best fitness of generation 0.
    pub fn initial_best_fitness(&self) -> f64 {
        self.best_fitness_history[0]
    }
}

/// Runs the GA for exactly `config.max_generations` generations, maximizing `fitness`.
///
/// Results depend only on the inputs and `config.rng_seed`: every offspring
/// pair draws from its own stream keyed by generation and slot, so parallel
/// evaluation order has no effect.
pub fn evolve<F, E>(
    config: &GaConfig,
    bounds: &Bounds,
    fitness: F,
    injected: &[Gene],
) -> Result<GaResult, GaError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Display,
{
    let mut population = init_population(config, bounds, injected)?;
    evaluate(&mut population, &fitness)?;
    sort_by_fitness(&mut population);

    let n = config.population_size;
    let mut best = population[0].clone();
    let mut history = Vec::with_capacity(config.max_generations + 1);
    history.push(best.score());

    for generation in 1..=config.max_generations {
        let rate = adapt_mutation_rate(&history, config);
        let parts = partition(&population, config)?;
        let offspring = (0..n / 4)
            .into_par_iter()
            .map(|slot| {
                let mut rng = slot_rng(config.rng_seed, generation, slot);
                let mother = tournament_select(&parts.female, config.tournament_size, &mut rng)?;
                let father = tournament_select(&parts.male, config.tournament_size, &mut rng)?;
                let (a, b) = blend(mother, father, bounds, config.blend_alpha, &mut rng);
                Ok([
                    mutate(&a, rate, bounds, &mut rng),
                    mutate(&b, rate, bounds, &mut rng),
                ])
            })
            .collect::<Result<Vec<_>, GaError>>()?;

        let mut next = Vec::with_capacity(n);
        next.extend_from_slice(parts.winners);
        next.extend(offspring.into_iter().flatten());
        evaluate(&mut next, &fitness)?;
        sort_by_fitness(&mut next);
        population = next;

        if population[0].score() > best.score() {
            best = population[0].clone();
        }
        history.push(best.score());
    }

    Ok(GaResult {
        best,
        winners: population[..n / 2].to_vec(),
        generations_run: config.max_generations,
        best_fitness_history: history,
    })
}

fn evaluate<F, E>(population: &mut [Gene], fitness: &F) -> Result<(), GaError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Display,
{
    population
        .par_iter_mut()
        .filter(|g| g.fitness.is_none())
        .try_for_each(|gene| match fitness(&gene.values) {
            Ok(f) if !f.is_nan() => {
                gene.fitness = Some(f);
                Ok(())
            }
            Ok(_) => Err(GaError::Fitness {
                values: gene.values.clone(),
                message: "fitness is NaN".into(),
            }),
            Err(e) => Err(GaError::Fitness {
                values: gene.values.clone(),
                message: e.to_string(),
            }),
        })
}

/// Stable: equal fitness keeps insertion order.
fn sort_by_fitness(population: &mut [Gene]) {
    population.sort_by(|a, b| b.score().total_cmp(&a.score()));
}
