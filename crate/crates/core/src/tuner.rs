//! Seeded real-valued genetic algorithm for hyperparameter search.
//!
//! Selection is tournament of two, crossover is a blend (BLX-0.5) and
//! mutation is additive Gaussian noise scaled to each gene's bound range.
//! Elites carry over unchanged with their stored fitness, so the
//! per-generation best never decreases. Fitness callbacks that fail score
//! the sentinel -1 and the run continues.
//!
//! Gene layouts used by the pipeline: SVDD chromosomes are
//! `(log10 sigma, fracrej)`, SVM chromosomes `(log10 sigma, log10 box_c)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Search-space and operator parameters. `bounds` holds one `(min, max)`
/// interval per gene.
#[derive(Clone, Debug)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each gene's bound range.
    pub mutation_scale: f64,
    pub elitism_count: usize,
    pub seed: u64,
    pub bounds: Vec<(f64, f64)>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 20,
            generations: 15,
            crossover_rate: 0.9,
            mutation_rate: 0.25,
            mutation_scale: 0.05,
            elitism_count: 1,
            seed: 0,
            bounds: Vec::new(),
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidConfig(
                "population_size must be >= 2".into(),
            ));
        }
        if self.elitism_count >= self.population_size {
            return Err(Error::InvalidConfig(
                "elitism_count must be < population_size".into(),
            ));
        }
        for rate in [self.crossover_rate, self.mutation_rate] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "rates must be in [0,1], got {}",
                    rate
                )));
            }
        }
        if !(self.mutation_scale > 0.0) {
            return Err(Error::InvalidConfig("mutation_scale must be > 0".into()));
        }
        if self.bounds.is_empty() {
            return Err(Error::InvalidConfig("bounds must not be empty".into()));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo < hi) {
                return Err(Error::InvalidConfig(format!(
                    "each gene bound needs min < max, got ({}, {})",
                    lo, hi
                )));
            }
        }
        Ok(())
    }
}

/// One candidate: gene values plus the fitness assigned to them
/// (higher is better).
#[derive(Clone, Debug)]
pub struct Chromosome {
    pub genes: Vec<f64>,
    pub fitness: f64,
}

/// Per-generation summary retained for the tuning history file.
#[derive(Clone, Debug)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_genes: Vec<f64>,
}

/// Result of a GA run: the best chromosome ever seen plus the
/// generation-by-generation trajectory (entry 0 is the initial population).
#[derive(Clone, Debug)]
pub struct GaOutcome {
    pub best: Chromosome,
    pub history: Vec<GenerationStats>,
}

/// Scores one gene vector through the objective; failures inside the
/// callback log a warning and score the worst sentinel -1.
pub fn evaluate_fitness<F>(genes: &[f64], objective: &F) -> f64
where
    F: Fn(&[f64]) -> Result<f64>,
{
    match objective(genes) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("fitness evaluation failed for {:?}: {}", genes, e);
            -1.0
        }
    }
}

/// Runs the generational loop and returns the best chromosome together with
/// the best-fitness trajectory. Fully deterministic per seed.
pub fn run_ga<F>(config: &GaConfig, objective: &F) -> Result<GaOutcome>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_genes = config.bounds.len();

    let mut population: Vec<Chromosome> = (0..config.population_size)
        .map(|_| {
            let genes: Vec<f64> = config
                .bounds
                .iter()
                .map(|&(lo, hi)| rng.gen_range(lo..hi))
                .collect();
            let fitness = evaluate_fitness(&genes, objective);
            Chromosome { genes, fitness }
        })
        .collect();

    let mut history = Vec::with_capacity(config.generations + 1);
    let mut best = snapshot(0, &population, &mut history);

    for generation in 1..=config.generations {
        let mut ranked: Vec<usize> = (0..population.len()).collect();
        ranked.sort_by(|&a, &b| {
            population[b]
                .fitness
                .partial_cmp(&population[a].fitness)
                .unwrap()
        });

        let mut next: Vec<Chromosome> = ranked
            .iter()
            .take(config.elitism_count)
            .map(|&i| population[i].clone())
            .collect();

        while next.len() < config.population_size {
            let a = tournament(&population, &mut rng);
            let b = tournament(&population, &mut rng);
            let mut genes = if rng.gen::<f64>() < config.crossover_rate {
                blend_crossover(&population[a].genes, &population[b].genes, &mut rng)
            } else {
                population[a].genes.clone()
            };
            for (g, &(lo, hi)) in genes.iter_mut().zip(&config.bounds) {
                if rng.gen::<f64>() < config.mutation_rate {
                    let noise: f64 = rng.sample(StandardNormal);
                    *g += noise * config.mutation_scale * (hi - lo);
                }
                *g = g.clamp(lo, hi);
            }
            debug_assert_eq!(genes.len(), n_genes);
            let fitness = evaluate_fitness(&genes, objective);
            next.push(Chromosome { genes, fitness });
        }
        population = next;

        let gen_best = snapshot(generation, &population, &mut history);
        if gen_best.fitness > best.fitness {
            best = gen_best;
        }
    }

    Ok(GaOutcome { best, history })
}

fn tournament(population: &[Chromosome], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..population.len());
    let b = rng.gen_range(0..population.len());
    if population[a].fitness >= population[b].fitness {
        a
    } else {
        b
    }
}

/// BLX-0.5: each child gene is uniform over the parent interval widened by
/// half its length on both sides.
fn blend_crossover(a: &[f64], b: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let lo = x.min(y);
            let hi = x.max(y);
            let d = hi - lo;
            if d == 0.0 {
                x
            } else {
                rng.gen_range((lo - 0.5 * d)..(hi + 0.5 * d))
            }
        })
        .collect()
}

fn snapshot(
    generation: usize,
    population: &[Chromosome],
    history: &mut Vec<GenerationStats>,
) -> Chromosome {
    let best = population
        .iter()
        .max_by(|a, b| a.fitness.partial_cmp(&b.fitness).unwrap())
        .unwrap()
        .clone();
    let mean = population.iter().map(|c| c.fitness).sum::<f64>() / population.len() as f64;
    history.push(GenerationStats {
        generation,
        best_fitness: best.fitness,
        mean_fitness: mean,
        best_genes: best.genes.clone(),
    });
    best
}

/// Default SVDD search space: `log10 sigma` in `[-2, 2]`, `fracrej` linear
/// in `[0.005, 0.2]`.
pub fn default_svdd_bounds() -> Vec<(f64, f64)> {
    vec![(-2.0, 2.0), (0.005, 0.2)]
}

/// Default SVM search space: `log10 sigma` and `log10 box_c`, both in
/// `[-2, 2]`.
pub fn default_svm_bounds() -> Vec<(f64, f64)> {
    vec![(-2.0, 2.0), (-2.0, 2.0)]
}
