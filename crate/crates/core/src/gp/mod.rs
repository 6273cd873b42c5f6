//! Generational tree GP with tournament selection, subtree crossover and
//! subtree mutation, parameterized over a fitness oracle.

mod fitness;
mod generate;
mod operators;

pub use fitness::{fitness_mse, metric_r2, metric_rmse, Dataset};
pub use generate::{full_tree, init_trees, random_terminal};
pub use operators::{crossover, mutate, tournament_index, tournament_select};

use std::convert::Infallible;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("evaluation produced a non-finite value")]
    NonFinite,
    #[error("target has zero variance")]
    DegenerateTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitMethod {
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitnessKind {
    Mse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub population_size: usize,
    pub tournament_size: usize,
    pub mutation_prob: f64,
    pub crossover_prob: f64,
    pub min_subtree_depth: usize,
    pub max_subtree_depth: usize,
    pub max_depth: usize,
    pub max_length: usize,
    pub init_method: InitMethod,
    pub fitness: FitnessKind,
    pub max_generations: usize,
    pub elitism_count: usize,
    pub rng_seed: u64,
    /// Ephemeral constants are drawn uniformly from this closed range.
    pub constant_range: (f64, f64),
    /// The run stops once the best fitness drops below this value.
    pub target_fitness: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 1000,
            tournament_size: 5,
            mutation_prob: 0.25,
            crossover_prob: 0.95,
            min_subtree_depth: 0,
            max_subtree_depth: 2,
            max_depth: 15,
            max_length: 100,
            init_method: InitMethod::Full,
            fitness: FitnessKind::Mse,
            max_generations: 50,
            elitism_count: 1,
            rng_seed: 0,
            constant_range: (-1.0, 1.0),
            target_fitness: 1e-10,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        let bad = |m: &str| Err(GpError::InvalidConfig(m.to_string()));
        let (_, hi) = self.init_depths();
        if self.population_size == 0 || self.tournament_size == 0 {
            return bad("population and tournament sizes must be positive");
        }
        if self.tournament_size > self.population_size {
            return bad("tournament size exceeds population size");
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) || !(0.0..=1.0).contains(&self.crossover_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.max_depth == 0 || self.max_length == 0 {
            return bad("size limits must be positive");
        }
        if self.min_subtree_depth > self.max_subtree_depth {
            return bad("min_subtree_depth exceeds max_subtree_depth");
        }
        if hi > self.max_depth || (1usize << (hi + 1)) - 1 > self.max_length {
            return bad("initial trees could exceed the size limits");
        }
        if self.elitism_count > self.population_size {
            return bad("elitism count exceeds population size");
        }
        let (a, b) = self.constant_range;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return bad("constant range must be finite and ordered");
        }
        Ok(())
    }

    /// Range of Full initialization depths, `[2, max_subtree_depth + 2]`.
    pub fn init_depths(&self) -> (usize, usize) {
        (2, self.max_subtree_depth + 2)
    }

    pub fn within_limits(&self, tree: &Expr) -> bool {
        tree.depth() <= self.max_depth && tree.len() <= self.max_length
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub tree: Expr,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(tree: Expr) -> Self {
        Individual { tree, fitness: None }
    }

    /// Fitness for ranking; unevaluated counts as worst.
    pub fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::INFINITY)
    }
}

pub fn init_population<R: Rng + ?Sized>(config: &GpConfig, n_vars: usize, rng: &mut R) -> Vec<Individual> {
    init_trees(config, n_vars, rng).into_iter().map(Individual::new).collect()
}

/// Scores a batch of trees; lower is better.
pub trait FitnessOracle {
    type Error;

    fn evaluate(&mut self, trees: &[&Expr]) -> Result<Vec<f64>, Self::Error>;
}

impl<O: FitnessOracle + ?Sized> FitnessOracle for &mut O {
    type Error = O::Error;

    fn evaluate(&mut self, trees: &[&Expr]) -> Result<Vec<f64>, Self::Error> {
        (**self).evaluate(trees)
    }
}

/// Plaintext MSE on a dataset. Non-finite fitness becomes `+inf`.
pub struct PlainOracle<'a> {
    pub data: &'a Dataset,
}

impl FitnessOracle for PlainOracle<'_> {
    type Error = Infallible;

    fn evaluate(&mut self, trees: &[&Expr]) -> Result<Vec<f64>, Infallible> {
        Ok(trees.iter().map(|t| fitness_mse(t, self.data).unwrap_or(f64::INFINITY)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    /// Mean over finite fitness values.
    pub mean: f64,
    /// Individuals with non-finite fitness.
    pub invalid: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub best: Individual,
    /// Entry 0 describes the initial population.
    pub history: Vec<GenerationStats>,
    /// Generations bred after initialization.
    pub generations: usize,
    /// Trees sent to the oracle.
    pub evaluations: usize,
}

/// Runs GP with the generator seeded from `config.rng_seed`.
pub fn evolve<O: FitnessOracle>(config: &GpConfig, n_vars: usize, oracle: &mut O) -> Result<RunResult, EvolveError<O::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    evolve_with_rng(config, n_vars, oracle, &mut rng)
}

#[derive(Debug, Error)]
pub enum EvolveError<E> {
    #[error(transparent)]
    Config(GpError),
    #[error("fitness oracle failed: {0}")]
    Oracle(E),
}

impl<E> EvolveError<E> {
    pub fn into_oracle(self) -> Result<E, GpError> {
        match self {
            EvolveError::Oracle(e) => Ok(e),
            EvolveError::Config(e) => Err(e),
        }
    }
}

pub fn evolve_with_rng<O: FitnessOracle, R: Rng + ?Sized>(
    config: &GpConfig,
    n_vars: usize,
    oracle: &mut O,
    rng: &mut R,
) -> Result<RunResult, EvolveError<O::Error>> {
    config.validate().map_err(EvolveError::Config)?;
    if n_vars == 0 || n_vars > u16::MAX as usize {
        return Err(EvolveError::Config(GpError::InvalidConfig("variable count out of range".into())));
    }
    let mut evaluations = 0;
    let mut pop = init_population(config, n_vars, rng);
    evaluations += score(&mut pop, oracle).map_err(EvolveError::Oracle)?;
    let mut history = vec![stats(0, &pop)];
    let mut generation = 0;
    while generation < config.max_generations && history[generation].best >= config.target_fitness {
        generation += 1;
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[a].score().total_cmp(&pop[b].score()).then(a.cmp(&b)));
        let mut next: Vec<Individual> = order[..config.elitism_count].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < config.population_size {
            let a = tournament_select(&pop, config.tournament_size, rng);
            let b = tournament_select(&pop, config.tournament_size, rng);
            let (c1, c2) = if rng.gen_bool(config.crossover_prob) {
                crossover(config, a, b, rng)
            } else {
                (a.clone(), b.clone())
            };
            for child in [c1, c2] {
                let child = if rng.gen_bool(config.mutation_prob) { mutate(config, n_vars, &child, rng) } else { child };
                if next.len() < config.population_size {
                    next.push(child);
                }
            }
        }
        pop = next;
        evaluations += score(&mut pop, oracle).map_err(EvolveError::Oracle)?;
        history.push(stats(generation, &pop));
    }
    let best = (0..pop.len())
        .min_by(|&a, &b| pop[a].score().total_cmp(&pop[b].score()).then(a.cmp(&b)))
        .map(|i| pop[i].clone())
        .expect("population is non-empty");
    Ok(RunResult { best, history, generations: generation, evaluations })
}

fn score<O: FitnessOracle>(pop: &mut [Individual], oracle: &mut O) -> Result<usize, O::Error> {
    let pending: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].fitness.is_none()).collect();
    if pending.is_empty() {
        return Ok(0);
    }
    let trees: Vec<&Expr> = pending.iter().map(|&i| &pop[i].tree).collect();
    let scores = oracle.evaluate(&trees)?;
    assert_eq!(scores.len(), pending.len(), "oracle returned a wrong number of scores");
    for (&i, s) in pending.iter().zip(scores) {
        pop[i].fitness = Some(if s.is_finite() { s } else { f64::INFINITY });
    }
    Ok(pending.len())
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    let finite: Vec<f64> = pop.iter().map(Individual::score).filter(|s| s.is_finite()).collect();
    let best = pop.iter().map(Individual::score).fold(f64::INFINITY, f64::min);
    let mean = if finite.is_empty() { f64::INFINITY } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    GenerationStats { generation, best, mean, invalid: pop.len() - finite.len() }
}
