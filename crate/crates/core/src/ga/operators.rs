use rand::seq::index;
use rand::Rng;

use super::sobol::Sobol;
use super::{Bounds, GaConfig, GaError, Gene};

/// Initial population: the injected genes first, verbatim, then Sobol points
/// (origin skipped) mapped onto the bounds box.
pub fn init_population(
    config: &GaConfig,
    bounds: &Bounds,
    injected: &[Gene],
) -> Result<Vec<Gene>, GaError> {
    config.validate()?;
    if injected.len() > config.returning_genes {
        return Err(GaError::Config(format!(
            "{} injected genes exceed the returning-gene limit {}",
            injected.len(),
            config.returning_genes
        )));
    }
    check_genes(bounds, injected)?;
    let sobol = Sobol::new(bounds.dimension()).ok_or_else(|| {
        GaError::Bounds(format!(
            "quasi-random initialization supports 1..={} dimensions, got {}",
            super::sobol::MAX_DIMENSION,
            bounds.dimension()
        ))
    })?;
    let mut population: Vec<Gene> = injected
        .iter()
        .map(|g| Gene::new(g.values.clone()))
        .collect();
    population.extend(
        sobol
            .take(config.population_size - injected.len())
            .map(|u| Gene::new(bounds.from_unit(&u))),
    );
    Ok(population)
}

pub(crate) fn check_genes(bounds: &Bounds, genes: &[Gene]) -> Result<(), GaError> {
    for (index, gene) in genes.iter().enumerate() {
        if gene.values.len() != bounds.dimension() {
            return Err(GaError::Dimension {
                index,
                expected: bounds.dimension(),
                got: gene.values.len(),
            });
        }
        if !bounds.contains(&gene.values) {
            return Err(GaError::OutOfBounds {
                index,
                values: gene.values.clone(),
            });
        }
    }
    Ok(())
}

/// Views into a fitness-sorted population.
#[derive(Debug)]
pub struct Partition<'a> {
    pub elite: &'a [Gene],
    pub winners: &'a [Gene],
    /// Winners at even rank (0, 2, 4, ...).
    pub female: Vec<&'a Gene>,
    /// Winners at odd rank.
    pub male: Vec<&'a Gene>,
    pub losers: &'a [Gene],
}

pub fn partition<'a>(population: &'a [Gene], config: &GaConfig) -> Result<Partition<'a>, GaError> {
    let n = population.len();
    if n == 0 || !n.is_multiple_of(4) {
        return Err(GaError::Config(format!(
            "population of {n} is not a positive multiple of 4"
        )));
    }
    if config.elite_count >= n / 2 {
        return Err(GaError::Config(format!(
            "elite count {} must be below half of {n}",
            config.elite_count
        )));
    }
    let mut previous = f64::INFINITY;
    for gene in population {
        match gene.fitness {
            Some(f) if f <= previous => previous = f,
            _ => return Err(GaError::Unsorted),
        }
    }
    let (winners, losers) = population.split_at(n / 2);
    let (female, male) = winners.iter().enumerate().fold(
        (Vec::with_capacity(n / 4), Vec::with_capacity(n / 4)),
        |(mut f, mut m), (rank, gene)| {
            if rank % 2 == 0 {
                f.push(gene);
            } else {
                m.push(gene);
            }
            (f, m)
        },
    );
    Ok(Partition {
        elite: &winners[..config.elite_count],
        winners,
        female,
        male,
        losers,
    })
}

/// Draws `k` distinct pool members uniformly and returns the fittest.
/// Ties go to the member listed first.
pub fn tournament_select<'a, R: Rng + ?Sized>(
    pool: &[&'a Gene],
    k: usize,
    rng: &mut R,
) -> Result<&'a Gene, GaError> {
    if k == 0 || pool.len() < k {
        return Err(GaError::PoolTooSmall {
            k,
            pool: pool.len(),
        });
    }
    let best = index::sample(rng, pool.len(), k)
        .into_iter()
        .reduce(|a, b| {
            let (fa, fb) = (pool[a].score(), pool[b].score());
            if fb > fa || (fb == fa && b < a) {
                b
            } else {
                a
            }
        })
        .expect("k >= 1");
    Ok(pool[best])
}

/// Interval of weights `mu` for which `mu * ma + (1 - mu) * pa` stays in
/// `[lower, upper]`. `None` when the parents coincide (any weight works).
pub fn admissible_weight_range(ma: f64, pa: f64, lower: f64, upper: f64) -> Option<(f64, f64)> {
    let d = ma - pa;
    if d == 0.0 {
        return None;
    }
    let a = (lower - pa) / d;
    let b = (upper - pa) / d;
    Some(if d > 0.0 { (a, b) } else { (b, a) })
}

/// `mu * ma + (1 - mu) * pa`.
#[inline]
pub fn blend_value(mu: f64, ma: f64, pa: f64) -> f64 {
    mu * ma + (1.0 - mu) * pa
}

/// Eshelman-Shaffer blending of two parents, one weight per child and dimension.
///
/// Weights are uniform on `[-alpha, 1 + alpha]` intersected with the admissible
/// range for that dimension, so children never leave the box.
pub fn blend<R: Rng + ?Sized>(
    ma: &Gene,
    pa: &Gene,
    bounds: &Bounds,
    alpha: f64,
    rng: &mut R,
) -> (Gene, Gene) {
    let dim = bounds.dimension();
    let mut first = Vec::with_capacity(dim);
    let mut second = Vec::with_capacity(dim);
    for (i, (&m, &p)) in ma.values.iter().zip(&pa.values).enumerate() {
        let (lower, upper) = bounds.get(i);
        match admissible_weight_range(m, p, lower, upper) {
            None => {
                first.push(m);
                second.push(m);
            }
            Some((a, b)) => {
                let (a, b) = (a.max(-alpha), b.min(1.0 + alpha));
                for child in [&mut first, &mut second] {
                    let mu = a + (b - a) * rng.random::<f64>();
                    let value = blend_value(mu, m, p);
                    // only float rounding at the edge of the admissible range can land outside
                    child.push(value.clamp(lower, upper));
                }
            }
        }
    }
    (Gene::new(first), Gene::new(second))
}

/// Resamples each component uniformly within its bounds with probability `rate`.
pub fn mutate<R: Rng + ?Sized>(gene: &Gene, rate: f64, bounds: &Bounds, rng: &mut R) -> Gene {
    let mut changed = false;
    let values = gene
        .values
        .iter()
        .zip(bounds.intervals())
        .map(|(&v, &(lo, hi))| {
            if rng.random::<f64>() < rate {
                changed = true;
                lo + (hi - lo) * rng.random::<f64>()
            } else {
                v
            }
        })
        .collect();
    Gene {
        values,
        fitness: if changed { None } else { gene.fitness },
    }
}

/// Minimum rate while the best fitness keeps improving; after
/// `stagnation_window` generations without improvement the rate ramps
/// linearly, reaching the maximum at twice the window.
pub fn adapt_mutation_rate(history: &[f64], config: &GaConfig) -> f64 {
    let last_improvement = history
        .windows(2)
        .rposition(|w| w[1] > w[0])
        .map_or(0, |i| i + 1);
    let streak = history.len().saturating_sub(1) - last_improvement;
    let window = config.stagnation_window as f64;
    let (lo, hi) = (config.mutation_rate_min, config.mutation_rate_max);
    if (streak as f64) < window {
        lo
    } else {
        let ramp = ((streak as f64 - window) / window).min(1.0);
        lo + (hi - lo) * ramp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table3() -> Bounds {
        Bounds::new(vec![
            (0.0, 0.10),
            (-0.10, 1.0),
            (-2.0, 2.0),
            (0.0, 2.0),
            (0.0, 4.0),
            (4.0, 30.0),
        ])
        .unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-14, "{a:?} vs {b:?}");
        }
    }

    fn scored(fitness: &[f64]) -> Vec<Gene> {
        fitness
            .iter()
            .enumerate()
            .map(|(i, &f)| Gene {
                values: vec![i as f64],
                fitness: Some(f),
            })
            .collect()
    }

    #[test]
    fn first_quasi_random_gene_is_box_midpoint() {
        let pop = init_population(&GaConfig::default(), &table3(), &[]).unwrap();
        assert_close(&pop[0].values, &[0.05, 0.45, 0.0, 1.0, 2.0, 17.0]);
    }

    #[test]
    fn injected_genes_lead_the_population() {
        let injected: Vec<Gene> = (0..16)
            .map(|i| Gene::new(vec![0.02, 0.0, 0.1, 0.5, 1.0 + i as f64 * 0.1, 9.0]))
            .collect();
        let config = GaConfig {
            population_size: 1024,
            ..GaConfig::default()
        };
        let pop = init_population(&config, &table3(), &injected).unwrap();
        assert_eq!(pop.len(), 1024);
        for (a, b) in pop.iter().zip(&injected) {
            assert_eq!(a.values, b.values);
        }
        assert_close(&pop[16].values, &[0.05, 0.45, 0.0, 1.0, 2.0, 17.0]);
    }

    #[test]
    fn cold_population_is_distinct_and_in_bounds() {
        let bounds = table3();
        let pop = init_population(&GaConfig::default(), &bounds, &[]).unwrap();
        assert_eq!(pop.len(), 512);
        assert!(pop.iter().all(|g| bounds.contains(&g.values)));
        let mut keys: Vec<Vec<u64>> = pop
            .iter()
            .map(|g| g.values.iter().map(|v| v.to_bits()).collect())
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 512);
    }

    #[test]
    fn out_of_bounds_injection_is_rejected() {
        let bad = Gene::new(vec![0.5, 0.0, 0.0, 0.0, 1.0, 9.0]);
        assert!(matches!(
            init_population(&GaConfig::default(), &table3(), &[bad]),
            Err(GaError::OutOfBounds { index: 0, .. })
        ));
        let too_many = vec![Gene::new(vec![0.02, 0.0, 0.0, 0.0, 1.0, 9.0]); 65];
        assert!(init_population(&GaConfig::default(), &table3(), &too_many).is_err());
    }

    #[test]
    fn partition_arithmetic() {
        let config = GaConfig {
            population_size: 8,
            elite_count: 1,
            tournament_size: 1,
            returning_genes: 4,
            ..GaConfig::default()
        };
        let pop = scored(&[8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let p = partition(&pop, &config).unwrap();
        assert_eq!(p.elite.len(), 1);
        assert_eq!((p.female.len(), p.male.len(), p.losers.len()), (2, 2, 4));
        assert_eq!(p.female[1].values, vec![2.0]);
        assert_eq!(p.male[0].values, vec![1.0]);

        let big = scored(&(0..512).map(|i| -(i as f64)).collect::<Vec<_>>());
        let p = partition(&big, &GaConfig::default()).unwrap();
        assert_eq!(p.elite.len(), 3);
        assert_eq!(p.winners.len(), 256);
        assert_eq!(
            (p.female.len(), p.male.len(), p.losers.len()),
            (128, 128, 256)
        );
    }

    #[test]
    fn partition_handles_ties_and_rejects_unsorted() {
        let config = GaConfig {
            population_size: 8,
            elite_count: 1,
            tournament_size: 1,
            returning_genes: 4,
            ..GaConfig::default()
        };
        let flat = scored(&[0.0; 8]);
        let p = partition(&flat, &config).unwrap();
        assert_eq!(p.female[0].values, vec![0.0]);
        assert_eq!(p.male[0].values, vec![1.0]);
        let unsorted = scored(&[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            partition(&unsorted, &config),
            Err(GaError::Unsorted)
        ));
        let mut unevaluated = scored(&[0.0; 8]);
        unevaluated[3].fitness = None;
        assert!(matches!(
            partition(&unevaluated, &config),
            Err(GaError::Unsorted)
        ));
    }

    #[test]
    fn tournament_edge_cases() {
        let genes = scored(&[1.0, 5.0, 3.0]);
        let pool: Vec<&Gene> = genes.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            tournament_select(&pool, 3, &mut rng).unwrap().fitness,
            Some(5.0)
        );
        assert!(matches!(
            tournament_select(&pool, 4, &mut rng),
            Err(GaError::PoolTooSmall { k: 4, pool: 3 })
        ));
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            let g = tournament_select(&pool, 1, &mut rng).unwrap();
            counts[g.values[0] as usize] += 1;
        }
        assert!(
            counts.iter().all(|&c| (c as f64 - 10_000.0).abs() < 400.0),
            "{counts:?}"
        );
    }

    #[test]
    fn weight_range_for_interior_parents() {
        let (a, b) = admissible_weight_range(0.02, 0.08, 0.0, 0.10).unwrap();
        assert!((a + 1.0 / 3.0).abs() < 1e-12);
        assert!((b - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(admissible_weight_range(0.3, 0.3, 0.0, 1.0), None);
    }

    #[test]
    fn blend_endpoints_reproduce_parents() {
        assert_eq!(blend_value(1.0, 0.02, 0.08), 0.02);
        assert_eq!(blend_value(0.0, 0.02, 0.08), 0.08);
    }

    #[test]
    fn blend_of_identical_parents_is_identity() {
        let g = Gene::new(vec![0.02, 0.1, -0.3, 0.4, 1.5, 9.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = blend(&g, &g, &table3(), 0.5, &mut rng);
        assert_eq!(a.values, g.values);
        assert_eq!(b.values, g.values);
    }

    #[test]
    fn blend_children_respect_bounds() {
        let bounds = Bounds::new(vec![(0.0, 0.10)]).unwrap();
        let ma = Gene::new(vec![0.02]);
        let pa = Gene::new(vec![0.08]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..100_000 {
            let (a, b) = blend(&ma, &pa, &bounds, 10.0, &mut rng);
            for v in [a.values[0], b.values[0]] {
                assert!((0.0..=0.10).contains(&v));
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        // with a wide alpha the whole admissible interval is used
        assert!(lo < 0.001 && hi > 0.099, "{lo} {hi}");
    }

    #[test]
    fn mutation_rate_extremes() {
        let bounds = table3();
        let g = Gene {
            values: vec![0.02, 0.1, -0.3, 0.4, 1.5, 9.0],
            fitness: Some(-1.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(mutate(&g, 0.0, &bounds, &mut rng), g);
        let m = mutate(&g, 1.0, &bounds, &mut rng);
        assert!(bounds.contains(&m.values));
        assert!(m.values.iter().zip(&g.values).all(|(a, b)| a != b));
        assert_eq!(m.fitness, None);
    }

    #[test]
    fn mutated_component_count_is_binomial() {
        let bounds = table3();
        let g = Gene::new(vec![0.02, 0.1, -0.3, 0.4, 1.5, 9.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 100_000;
        let total: usize = (0..trials)
            .map(|_| {
                let m = mutate(&g, 0.35, &bounds, &mut rng);
                m.values
                    .iter()
                    .zip(&g.values)
                    .filter(|(a, b)| a != b)
                    .count()
            })
            .sum();
        let mean = total as f64 / trials as f64;
        assert!((mean - 2.1).abs() < 0.05, "{mean}");
    }

    #[test]
    fn mutation_schedule() {
        let config = GaConfig::default(); // window 50, rates 0.2..0.5
        let improving: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(adapt_mutation_rate(&improving, &config), 0.2);
        assert_eq!(adapt_mutation_rate(&[-1.0], &config), 0.2);

        let stalled = |streak: usize| {
            let mut h = vec![-2.0, -1.0];
            h.extend(std::iter::repeat_n(-1.0, streak));
            h
        };
        assert_eq!(adapt_mutation_rate(&stalled(49), &config), 0.2);
        assert!((adapt_mutation_rate(&stalled(75), &config) - 0.35).abs() < 1e-12);
        assert_eq!(adapt_mutation_rate(&stalled(100), &config), 0.5);
        assert_eq!(adapt_mutation_rate(&stalled(400), &config), 0.5);
    }
}
