//! Real-valued evolutionary algorithm with self-adaptive Gaussian mutation,
//! tournament parent selection, arithmetic recombination and (mu+lambda)
//! survivor selection.

use std::time::Instant;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objective::{evaluate_at, Objective};
use crate::space::{SearchSpace, Solution};
use crate::trace::{Stage, Trace};

/// Source of standard normal variates. Every RNG is one; tests substitute
/// deterministic stubs.
pub trait NormalSource {
    fn standard_normal(&mut self) -> f64;
}

impl<R: RngCore + ?Sized> NormalSource for R {
    fn standard_normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub fitness: Option<f64>,
}

impl Individual {
    /// An unevaluated individual with the initial step sizes of `cfg`.
    pub fn new(x: Vec<f64>, space: &SearchSpace, cfg: &EaConfig) -> Self {
        let sigmas = (0..space.dims()).map(|j| cfg.sigma_init(space, j)).collect();
        Self {
            x,
            sigmas,
            fitness: None,
        }
    }

    fn rank_key(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaConfig {
    pub pop_size: usize,
    pub tournament_size: usize,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    /// Initial step size as a fraction of each coordinate's range.
    pub sigma_init_frac: f64,
    /// Step-size floor as a fraction of each coordinate's range.
    pub epsilon0_frac: f64,
    pub seed: u64,
}

impl Default for EaConfig {
    fn default() -> Self {
        Self {
            pop_size: 10,
            tournament_size: 2,
            mutation_rate: 0.8,
            crossover_rate: 0.7,
            sigma_init_frac: 0.1,
            epsilon0_frac: 1e-4,
            seed: 0,
        }
    }
}

impl EaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 2 {
            return Err(invalid("population size must be at least 2"));
        }
        if self.tournament_size == 0 || self.tournament_size > self.pop_size {
            return Err(invalid(format!(
                "tournament size {} must lie in 1..={}",
                self.tournament_size, self.pop_size
            )));
        }
        for (name, rate) in [("mutation", self.mutation_rate), ("crossover", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(invalid(format!("{name} rate {rate} outside [0, 1]")));
            }
        }
        if !(self.sigma_init_frac > 0.0 && self.epsilon0_frac > 0.0) {
            return Err(invalid("step sizes must be positive"));
        }
        Ok(())
    }

    pub fn sigma_init(&self, space: &SearchSpace, j: usize) -> f64 {
        self.sigma_init_frac * space.width(j)
    }

    pub fn epsilon0(&self, space: &SearchSpace, j: usize) -> f64 {
        self.epsilon0_frac * space.width(j)
    }
}

/// Coordinate-wise learning rate `1/sqrt(2 sqrt(n))`.
pub fn tau(n: usize) -> f64 {
    1.0 / (2.0 * (n as f64).sqrt()).sqrt()
}

/// Global learning rate `1/sqrt(2n)`.
pub fn tau_prime(n: usize) -> f64 {
    1.0 / (2.0 * n as f64).sqrt()
}

/// Best of `size` members drawn without replacement. Unevaluated members
/// rank last; ties go to the earlier draw.
pub fn tournament_select<'p, R: Rng + ?Sized>(
    pop: &'p [Individual],
    size: usize,
    rng: &mut R,
) -> Result<&'p Individual> {
    if pop.is_empty() {
        return Err(invalid("tournament on an empty population"));
    }
    if size == 0 || size > pop.len() {
        return Err(invalid(format!("tournament size {size} outside 1..={}", pop.len())));
    }
    let mut best: Option<&Individual> = None;
    for i in index::sample(rng, pop.len(), size) {
        let cand = &pop[i];
        if best.is_none_or(|b| cand.rank_key() > b.rank_key()) {
            best = Some(cand);
        }
    }
    Ok(best.expect("size >= 1"))
}

/// Midpoint of the parents in both position and step sizes.
pub fn arithmetic_crossover(a: &Individual, b: &Individual) -> Result<Individual> {
    if a.x.len() != b.x.len() || a.sigmas.len() != b.sigmas.len() {
        return Err(Error::DimensionMismatch {
            expected: a.x.len(),
            got: b.x.len(),
        });
    }
    let mid = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| 0.5 * p + 0.5 * q).collect();
    Ok(Individual {
        x: mid(&a.x, &b.x),
        sigmas: mid(&a.sigmas, &b.sigmas),
        fitness: None,
    })
}

/// Lognormal step-size update, floored at `epsilon0`.
pub(crate) fn mutate_sigmas<N: NormalSource + ?Sized>(
    sigmas: &[f64],
    space: &SearchSpace,
    cfg: &EaConfig,
    noise: &mut N,
) -> Vec<f64> {
    let n = sigmas.len();
    let (t, tp) = (tau(n), tau_prime(n));
    let global = tp * noise.standard_normal();
    sigmas
        .iter()
        .enumerate()
        .map(|(j, s)| (s * (global + t * noise.standard_normal()).exp()).max(cfg.epsilon0(space, j)))
        .collect()
}

/// Self-adaptive Gaussian mutation; out-of-range coordinates are clamped.
pub fn self_adaptive_mutate<N: NormalSource + ?Sized>(
    ind: &Individual,
    space: &SearchSpace,
    cfg: &EaConfig,
    noise: &mut N,
) -> Individual {
    let sigmas = mutate_sigmas(&ind.sigmas, space, cfg, noise);
    let mut x: Vec<f64> = ind
        .x
        .iter()
        .zip(&sigmas)
        .map(|(v, s)| v + s * noise.standard_normal())
        .collect();
    space.clamp(&mut x);
    Individual {
        x,
        sigmas,
        fitness: None,
    }
}

/// Mutation operator plugged into the generation loop.
pub trait Mutation {
    /// Called once before each offspring is created, with the trace so far.
    fn prepare(&mut self, _trace: &Trace) {}

    fn mutate(&mut self, ind: &Individual, space: &SearchSpace, cfg: &EaConfig, rng: &mut ChaCha8Rng) -> Individual;
}

/// The standalone EA's operator.
#[derive(Debug, Default, Clone, Copy)]
pub struct SelfAdaptive;

impl Mutation for SelfAdaptive {
    fn mutate(&mut self, ind: &Individual, space: &SearchSpace, cfg: &EaConfig, rng: &mut ChaCha8Rng) -> Individual {
        self_adaptive_mutate(ind, space, cfg, rng)
    }
}

/// (mu+lambda) selection: the `keep` fittest of parents and offspring,
/// ordered best first. The sort is stable, so parents win ties.
pub fn select_survivors(mut parents: Vec<Individual>, offspring: Vec<Individual>, keep: usize) -> Vec<Individual> {
    parents.extend(offspring);
    parents.sort_by(|a, b| b.rank_key().total_cmp(&a.rank_key()));
    parents.truncate(keep);
    parents
}

/// Evaluates unevaluated members of `pop`, then runs generations until the
/// trace holds `iters` records. Returns the final population.
#[allow(clippy::too_many_arguments)]
pub(crate) fn evolve<O, M>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &EaConfig,
    trace: &mut Trace,
    mut pop: Vec<Individual>,
    iters: usize,
    mutation: &mut M,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Individual>>
where
    O: Objective + ?Sized,
    M: Mutation,
{
    for ind in pop.iter_mut().filter(|i| i.fitness.is_none()) {
        if trace.len() >= iters {
            break;
        }
        let f = evaluate_at(objective, &ind.x, trace.len() + 1)?;
        ind.fitness = Some(f);
        trace.push(Solution(ind.x.clone()), f, 0.0, Stage::Ea);
    }
    pop.retain(|i| i.fitness.is_some());
    if pop.is_empty() {
        return Ok(pop);
    }

    while trace.len() < iters {
        let lambda = cfg.pop_size.min(iters - trace.len());
        let first = trace.len();
        let mut offspring = Vec::with_capacity(lambda);
        let mut overhead = 0.0;
        for _ in 0..lambda {
            let start = Instant::now();
            mutation.prepare(trace);
            let tsize = cfg.tournament_size.min(pop.len());
            let a = tournament_select(&pop, tsize, rng)?;
            let mut child = if rng.random::<f64>() < cfg.crossover_rate {
                let b = tournament_select(&pop, tsize, rng)?;
                arithmetic_crossover(a, b)?
            } else {
                Individual {
                    fitness: None,
                    ..a.clone()
                }
            };
            if rng.random::<f64>() < cfg.mutation_rate {
                child = mutation.mutate(&child, space, cfg, rng);
            }
            overhead += start.elapsed().as_secs_f64();

            let f = evaluate_at(objective, &child.x, trace.len() + 1)?;
            child.fitness = Some(f);
            trace.push(Solution(child.x.clone()), f, 0.0, Stage::Ea);
            offspring.push(child);
        }

        let start = Instant::now();
        pop = select_survivors(pop, offspring, cfg.pop_size);
        overhead += start.elapsed().as_secs_f64();

        let share = overhead / lambda as f64;
        for r in &mut trace.records_mut()[first..] {
            r.overhead_s = share;
        }
    }
    Ok(pop)
}

/// Uniformly random population with initial step sizes.
pub fn random_population<R: Rng + ?Sized>(space: &SearchSpace, cfg: &EaConfig, rng: &mut R) -> Vec<Individual> {
    (0..cfg.pop_size)
        .map(|_| Individual::new(space.sample_uniform(rng), space, cfg))
        .collect()
}

/// Runs the standalone EA for exactly `iters` evaluations.
pub fn run_ea<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &EaConfig,
    iters: usize,
    initial_pop: Option<Vec<Individual>>,
) -> Result<Trace> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pop = match initial_pop {
        Some(pop) => {
            if pop.is_empty() {
                return Err(invalid("initial population is empty"));
            }
            for ind in &pop {
                space.check_dims(&ind.x)?;
                if ind.sigmas.len() != space.dims() {
                    return Err(Error::DimensionMismatch {
                        expected: space.dims(),
                        got: ind.sigmas.len(),
                    });
                }
            }
            pop
        }
        None => {
            if iters < cfg.pop_size {
                return Err(invalid(format!("iters {iters} < population size {}", cfg.pop_size)));
            }
            random_population(space, cfg, &mut rng)
        }
    };
    let mut trace = Trace::new("ea", cfg.seed);
    evolve(
        objective,
        space,
        cfg,
        &mut trace,
        pop,
        iters,
        &mut SelfAdaptive,
        &mut rng,
    )?;
    Ok(trace)
}
