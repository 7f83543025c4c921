//! The Bayesian-evolutionary hybrid: BO up to a switch point, transfer of
//! BO's archive into an initial population, then an EA whose mutation is
//! scaled by a gain-driven factor `sigma2`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bo::{BayesOpt, BoConfig};
use crate::ea::{evolve, mutate_sigmas, EaConfig, Individual, Mutation, NormalSource};
use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeans, DEFAULT_MAX_ITERS};
use crate::objective::Objective;
use crate::space::SearchSpace;
use crate::trace::Trace;

pub const SIGMA2_MIN: f64 = 1e-3;
pub const SIGMA2_MAX: f64 = 1e3;
/// Resampling attempts per coordinate before falling back to clamping.
pub const MAX_RESAMPLES: usize = 100;

/// How BO's archive seeds the EA population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TransferStrategy {
    /// The last `p` evaluated solutions.
    S1,
    /// The `p` best solutions.
    S2,
    /// Best solution of each of `p` k-means clusters over the whole archive.
    S3,
    /// As `S3`, restricted to the top `top_percent` of the archive.
    S4 { top_percent: f64 },
}

impl Default for TransferStrategy {
    fn default() -> Self {
        TransferStrategy::S4 { top_percent: 50.0 }
    }
}

impl TransferStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            TransferStrategy::S4 { top_percent } if !(*top_percent > 0.0 && *top_percent <= 100.0) => {
                Err(invalid(format!("top percent {top_percent} outside (0, 100]")))
            }
            _ => Ok(()),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            TransferStrategy::S1 => "s1",
            TransferStrategy::S2 => "s2",
            TransferStrategy::S3 => "s3",
            TransferStrategy::S4 { .. } => "s4",
        }
    }
}

impl fmt::Display for TransferStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for TransferStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(TransferStrategy::S1),
            "s2" => Ok(TransferStrategy::S2),
            "s3" => Ok(TransferStrategy::S3),
            "s4" => Ok(TransferStrategy::default()),
            other => Err(invalid(format!("unknown transfer strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeaConfig {
    /// BO stage settings. Its `seed` is replaced by [`BeaConfig::seed`].
    pub bo: BoConfig,
    /// EA stage settings. Its `seed` is ignored; the EA stream derives from
    /// [`BeaConfig::seed`]. The default starts transferred individuals with
    /// step sizes of 0.3% of each range, so the EA refines around the BO
    /// archive instead of scattering from it.
    pub ea: EaConfig,
    pub switch_point: usize,
    pub alpha: f64,
    pub beta: f64,
    pub window: usize,
    pub strategy: TransferStrategy,
    pub seed: u64,
}

impl Default for BeaConfig {
    fn default() -> Self {
        Self {
            bo: BoConfig::default(),
            ea: EaConfig {
                crossover_rate: 0.1,
                sigma_init_frac: 0.003,
                ..EaConfig::default()
            },
            switch_point: 250,
            alpha: 1.03,
            beta: 0.99,
            window: crate::efficiency::DEFAULT_WINDOW,
            strategy: TransferStrategy::default(),
            seed: 0,
        }
    }
}

impl BeaConfig {
    pub fn validate(&self) -> Result<()> {
        self.bo.validate()?;
        self.ea.validate()?;
        self.strategy.validate()?;
        if !(self.alpha > 1.0) || !(self.beta < 1.0 && self.beta > 0.0) {
            return Err(invalid(format!(
                "need alpha > 1 and 0 < beta < 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.window == 0 {
            return Err(invalid("window must be at least 1"));
        }
        if self.switch_point < self.bo.n_init {
            return Err(invalid(format!(
                "switch point {} precedes the {} initial samples",
                self.switch_point, self.bo.n_init
            )));
        }
        Ok(())
    }

    fn bo_config(&self) -> BoConfig {
        BoConfig {
            seed: self.seed,
            ..self.bo.clone()
        }
    }

    fn ea_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }
}

/// Global mutation scale of the gain-aware EA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainAwareState {
    pub sigma2: f64,
    pub updates: usize,
}

impl Default for GainAwareState {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            updates: 0,
        }
    }
}

/// Grows `sigma2` by `alpha` after a window without gain, shrinks it by
/// `beta` otherwise. The result is kept within `[SIGMA2_MIN, SIGMA2_MAX]`.
pub fn update_sigma2(state: GainAwareState, delta: f64, alpha: f64, beta: f64) -> GainAwareState {
    let factor = if delta == 0.0 { alpha } else { beta };
    GainAwareState {
        sigma2: (state.sigma2 * factor).clamp(SIGMA2_MIN, SIGMA2_MAX),
        updates: state.updates + 1,
    }
}

/// Self-adaptive mutation scaled by `sigma2`. Coordinates leaving the open
/// box are redrawn around the violated bound.
pub fn gain_aware_mutate<N: NormalSource + ?Sized>(
    ind: &Individual,
    sigma2: f64,
    space: &SearchSpace,
    cfg: &EaConfig,
    noise: &mut N,
) -> Individual {
    let sigmas = mutate_sigmas(&ind.sigmas, space, cfg, noise);
    let x = ind
        .x
        .iter()
        .zip(&sigmas)
        .enumerate()
        .map(|(j, (v, s))| {
            let (lo, hi) = (space.lower()[j], space.upper()[j]);
            let mut y = v + s * noise.standard_normal() * sigma2;
            let mut tries = 0;
            while !(lo < y && y < hi) && tries < MAX_RESAMPLES {
                let anchor = if y <= lo { lo } else { hi };
                y = anchor + s * noise.standard_normal();
                tries += 1;
            }
            if lo < y && y < hi {
                y
            } else {
                let eps = cfg.epsilon0(space, j);
                y.clamp(lo + eps, hi - eps)
            }
        })
        .collect();
    Individual {
        x,
        sigmas,
        fitness: None,
    }
}

/// The EA-stage operator: refreshes `sigma2` from the trailing window gain
/// before each offspring.
#[derive(Debug, Clone)]
pub struct GainAwareMutation {
    pub state: GainAwareState,
    pub alpha: f64,
    pub beta: f64,
    pub window: usize,
    /// `sigma2` after each update, in order.
    pub history: Vec<f64>,
    best: Vec<f64>,
}

impl GainAwareMutation {
    pub fn new(alpha: f64, beta: f64, window: usize) -> Self {
        Self {
            state: GainAwareState::default(),
            alpha,
            beta,
            window,
            history: Vec::new(),
            best: Vec::new(),
        }
    }
}

impl Mutation for GainAwareMutation {
    fn prepare(&mut self, trace: &Trace) {
        for r in &trace.records()[self.best.len()..] {
            let prev = self.best.last().copied().unwrap_or(f64::NEG_INFINITY);
            self.best.push(prev.max(r.objective));
        }
        let i = self.best.len();
        if i > self.window {
            let delta = self.best[i - 1] - self.best[i - 1 - self.window];
            self.state = update_sigma2(self.state, delta, self.alpha, self.beta);
            self.history.push(self.state.sigma2);
        }
    }

    fn mutate(&mut self, ind: &Individual, space: &SearchSpace, cfg: &EaConfig, rng: &mut ChaCha8Rng) -> Individual {
        gain_aware_mutate(ind, self.state.sigma2, space, cfg, rng)
    }
}

/// Picks `p` archive solutions to seed the EA. Returned individuals carry the
/// archive objective as fitness and fresh initial step sizes.
pub fn select_transfer_population<R: Rng + ?Sized>(
    archive: &Trace,
    strategy: TransferStrategy,
    p: usize,
    space: &SearchSpace,
    cfg: &EaConfig,
    rng: &mut R,
) -> Result<Vec<Individual>> {
    strategy.validate()?;
    let n = archive.len();
    if p == 0 || n < p {
        return Err(invalid(format!("archive of {n} cannot supply {p} individuals")));
    }
    let records = archive.records();
    // Indices by descending objective, earlier iteration first on ties.
    let ranked = || {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|a, b| records[*b].objective.total_cmp(&records[*a].objective));
        idx
    };
    let chosen: Vec<usize> = match strategy {
        TransferStrategy::S1 => (n - p..n).collect(),
        TransferStrategy::S2 => ranked().into_iter().take(p).collect(),
        TransferStrategy::S3 => best_per_cluster(archive, (0..n).collect(), p, space, rng)?,
        TransferStrategy::S4 { top_percent } => {
            let top = (n as f64 * top_percent / 100.0).floor() as usize;
            if top < p {
                return Err(invalid(format!(
                    "top {top_percent}% of {n} solutions is fewer than {p}"
                )));
            }
            let mut pool: Vec<usize> = ranked().into_iter().take(top).collect();
            pool.sort_unstable();
            best_per_cluster(archive, pool, p, space, rng)?
        }
    };
    chosen
        .into_iter()
        .map(|i| {
            let r = &records[i];
            space.check_dims(&r.solution)?;
            let mut ind = Individual::new(r.solution.0.clone(), space, cfg);
            ind.fitness = Some(r.objective);
            Ok(ind)
        })
        .collect()
}

fn best_per_cluster<R: Rng + ?Sized>(
    archive: &Trace,
    pool: Vec<usize>,
    k: usize,
    space: &SearchSpace,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let records = archive.records();
    let points: Vec<Vec<f64>> = pool
        .iter()
        .map(|&i| {
            space.check_dims(&records[i].solution)?;
            Ok(space.normalize(&records[i].solution))
        })
        .collect::<Result<_>>()?;
    let labels = kmeans(&points, k, rng, DEFAULT_MAX_ITERS)?;
    let mut best: Vec<Option<usize>> = vec![None; k];
    for (&i, &c) in pool.iter().zip(&labels) {
        if best[c].is_none_or(|b| records[i].objective > records[b].objective) {
            best[c] = Some(i);
        }
    }
    Ok(best.into_iter().map(|b| b.expect("clusters are nonempty")).collect())
}

/// A BEA run plus the `sigma2` trajectory of its EA stage.
#[derive(Debug, Clone)]
pub struct BeaRun {
    pub trace: Trace,
    pub sigma2_history: Vec<f64>,
}

/// Runs BEA for `iters` evaluations; records `1..=switch_point` come from BO.
pub fn run_bea<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &BeaConfig,
    iters: usize,
) -> Result<Trace> {
    run_bea_detailed(objective, space, cfg, iters).map(|r| r.trace)
}

pub fn run_bea_detailed<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &BeaConfig,
    iters: usize,
) -> Result<BeaRun> {
    cfg.validate()?;
    if iters <= cfg.switch_point {
        return Err(invalid(format!(
            "iters {iters} must exceed the switch point {}",
            cfg.switch_point
        )));
    }
    let mut bo = BayesOpt::new(space, cfg.bo_config())?;
    let mut trace = Trace::new("bea", cfg.seed);
    for _ in 0..cfg.switch_point {
        bo.step(objective, &mut trace)?;
    }
    continue_from_bo(objective, space, cfg, trace, iters)
}

/// Transfer and EA stages on top of an existing BO-stage trace of length
/// `switch_point`, as produced by `run_bo` with the same seed.
pub fn continue_from_bo<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &BeaConfig,
    bo_stage: Trace,
    iters: usize,
) -> Result<BeaRun> {
    cfg.validate()?;
    if bo_stage.len() != cfg.switch_point {
        return Err(invalid(format!(
            "BO stage has {} records, switch point is {}",
            bo_stage.len(),
            cfg.switch_point
        )));
    }
    if iters <= cfg.switch_point {
        return Err(invalid(format!(
            "iters {iters} must exceed the switch point {}",
            cfg.switch_point
        )));
    }
    let mut trace = bo_stage;
    trace.algorithm = "bea".to_string();
    trace.seed = cfg.seed;
    let mut rng = cfg.ea_rng();
    let pop = select_transfer_population(&trace, cfg.strategy, cfg.ea.pop_size, space, &cfg.ea, &mut rng)?;
    let mut mutation = GainAwareMutation::new(cfg.alpha, cfg.beta, cfg.window);
    evolve(
        objective,
        space,
        &cfg.ea,
        &mut trace,
        pop,
        iters,
        &mut mutation,
        &mut rng,
    )?;
    Ok(BeaRun {
        trace,
        sigma2_history: mutation.history,
    })
}
