//! Generational bitstring EA over per-particle stiffness classes.
//!
//! Only `types` evolves; lattice shape and the designated particles come
//! from a template and never change.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::logic_eval::{evaluate_truth_table, validate_targets, GateReport, GateTarget};
use crate::substrate::Genome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EaParams {
    pub population_size: usize,
    pub generations: usize,
    pub elite_count: usize,
    /// Parents are drawn uniformly from this top fraction of the ranking.
    pub truncation_fraction: f64,
    /// Per-bit flip probability; `None` means `1 / genome length`.
    pub mutation_rate: Option<f64>,
    pub crossover_rate: f64,
    pub seed: u64,
    /// Stop as soon as the best fitness strictly exceeds this value.
    pub target_fitness: Option<f64>,
}

impl Default for EaParams {
    fn default() -> Self {
        EaParams {
            population_size: 64,
            generations: 300,
            elite_count: 1,
            truncation_fraction: 0.25,
            mutation_rate: None,
            crossover_rate: 0.5,
            seed: 1,
            target_fitness: None,
        }
    }
}

impl EaParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::config("ea.population_size", "must be >= 2"));
        }
        if self.generations < 1 {
            return Err(Error::config("ea.generations", "must be >= 1"));
        }
        if self.elite_count < 1 || self.elite_count >= self.population_size {
            return Err(Error::config(
                "ea.elite_count",
                "must satisfy 1 <= elite_count < population_size",
            ));
        }
        if !(self.truncation_fraction > 0.0 && self.truncation_fraction <= 1.0) {
            return Err(Error::config(
                "ea.truncation_fraction",
                "must lie in (0, 1]",
            ));
        }
        if let Some(r) = self.mutation_rate {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config("ea.mutation_rate", "must lie in [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(Error::config("ea.crossover_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn mutation_rate_for(&self, genome_len: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / genome_len as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Generations,
    Target,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub median: f64,
    /// Cumulative fitness requests up to and including this generation.
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub best_genome: Genome,
    pub best_fitness: f64,
    pub best_report: Option<GateReport>,
    pub history: Vec<GenerationStats>,
    /// Fitness requests, one per individual per generation.
    pub evaluations: usize,
    /// Requests that actually ran the simulator (cache misses).
    pub simulations: usize,
    pub terminated_by: Termination,
}

pub fn init_population<R: Rng>(params: &EaParams, template: &Genome, rng: &mut R) -> Vec<Genome> {
    (0..params.population_size)
        .map(|_| Genome {
            types: (0..template.len())
                .map(|_| u8::from(rng.gen::<bool>()))
                .collect(),
            ..template.clone()
        })
        .collect()
}

pub fn mutate<R: Rng>(genome: &Genome, rate: f64, rng: &mut R) -> Genome {
    let mut child = genome.clone();
    for bit in child.types.iter_mut() {
        if rng.gen_bool(rate) {
            *bit ^= 1;
        }
    }
    child
}

/// Uniform crossover; designations come from `a`.
pub fn crossover<R: Rng>(a: &Genome, b: &Genome, rng: &mut R) -> Result<Genome> {
    if a.width != b.width || a.height != b.height || a.types.len() != b.types.len() {
        return Err(Error::config(
            "crossover",
            format!(
                "parents differ in shape: {}×{} vs {}×{}",
                a.width, a.height, b.width, b.height
            ),
        ));
    }
    let types = a
        .types
        .iter()
        .zip(&b.types)
        .map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y })
        .collect();
    Ok(Genome { types, ..a.clone() })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fitness of every genome, simulating only bitstrings not seen before in
/// this run. A failed simulation scores −∞.
fn evaluate_generation(
    population: &[Genome],
    config: &RunConfig,
    targets: &[GateTarget],
    cache: &mut HashMap<Vec<u8>, (f64, Option<GateReport>)>,
) -> (Vec<f64>, usize) {
    let mut fresh: Vec<&Genome> = Vec::new();
    for g in population {
        if !cache.contains_key(&g.types) && !fresh.iter().any(|f| f.types == g.types) {
            fresh.push(g);
        }
    }
    let results: Vec<(Vec<u8>, (f64, Option<GateReport>))> = fresh
        .par_iter()
        .map(|g| {
            let entry = match evaluate_truth_table(g, config, targets) {
                Ok(r) => (r.fitness, Some(r)),
                Err(_) => (f64::NEG_INFINITY, None),
            };
            (g.types.clone(), entry)
        })
        .collect();
    let simulated = results.len();
    cache.extend(results);
    let fitness = population.iter().map(|g| cache[&g.types].0).collect();
    (fitness, simulated)
}

pub fn run_evolution(
    config: &RunConfig,
    template: &Genome,
    targets: &[GateTarget],
    params: &EaParams,
) -> Result<EvolutionResult> {
    config.validate()?;
    template.validate()?;
    validate_targets(targets)?;
    params.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let rate = params.mutation_rate_for(template.len());
    let pool_size = ((params.truncation_fraction * params.population_size as f64).ceil() as usize)
        .clamp(1, params.population_size);

    let mut population = init_population(params, template, &mut rng);
    let mut cache = HashMap::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, Genome)> = None;
    let mut evaluations = 0;
    let mut simulations = 0;
    let mut terminated_by = Termination::Generations;

    for generation in 0..params.generations {
        let (fitness, simulated) = evaluate_generation(&population, config, targets, &mut cache);
        evaluations += population.len();
        simulations += simulated;

        // Rank by fitness, ties by position, so breeding order is fixed.
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));

        let finite: Vec<f64> = {
            let mut v: Vec<f64> = fitness.iter().copied().filter(|f| f.is_finite()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        if finite.is_empty() {
            terminated_by = Termination::Error;
            history.push(GenerationStats {
                generation,
                best: f64::NEG_INFINITY,
                mean: f64::NEG_INFINITY,
                median: f64::NEG_INFINITY,
                evaluations,
            });
            break;
        }
        let gen_best = fitness[order[0]];
        history.push(GenerationStats {
            generation,
            best: gen_best,
            mean: finite.iter().sum::<f64>() / finite.len() as f64,
            median: median(&finite),
            evaluations,
        });
        if best.as_ref().is_none_or(|(f, _)| gen_best > *f) {
            best = Some((gen_best, population[order[0]].clone()));
        }

        if params.target_fitness.is_some_and(|t| gen_best > t) {
            terminated_by = Termination::Target;
            break;
        }
        if generation + 1 == params.generations {
            break;
        }

        let mut next: Vec<Genome> = order[..params.elite_count]
            .iter()
            .map(|&i| population[i].clone())
            .collect();
        while next.len() < params.population_size {
            let a = &population[order[rng.gen_range(0..pool_size)]];
            let child = if rng.gen_bool(params.crossover_rate) {
                let b = &population[order[rng.gen_range(0..pool_size)]];
                crossover(a, b, &mut rng)?
            } else {
                a.clone()
            };
            next.push(mutate(&child, rate, &mut rng));
        }
        population = next;
    }

    let (best_fitness, best_genome) = match best {
        Some(b) => b,
        None => (f64::NEG_INFINITY, population[0].clone()),
    };
    let best_report = cache.get(&best_genome.types).and_then(|(_, r)| r.clone());
    Ok(EvolutionResult {
        best_genome,
        best_fitness,
        best_report,
        history,
        evaluations,
        simulations,
        terminated_by,
    })
}
