//! Bayesian optimization: GP surrogate plus GP-UCB acquisition.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gp::{GpModel, KernelParams, DEFAULT_JITTER};
use crate::objective::{evaluate_at, Objective};
use crate::space::{SearchSpace, Solution};
use crate::trace::{Stage, Trace};

const REFINE_INITIAL_STEP: f64 = 0.05;
const REFINE_PATIENCE: usize = 10;
const MAX_JITTER: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Matérn length scale in normalized input units.
    pub theta: f64,
    pub gamma: f64,
    pub nu: f64,
    pub n_init: usize,
    pub acq_samples: usize,
    pub acq_refine_steps: usize,
    /// Also refine from the best observed point.
    pub include_incumbent: bool,
    /// Divide centered targets by their standard deviation before fitting.
    pub standardize: bool,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            theta: 0.1,
            gamma: 0.1,
            nu: 1.0,
            n_init: 10,
            acq_samples: 1000,
            acq_refine_steps: 100,
            include_incumbent: true,
            standardize: true,
            jitter: DEFAULT_JITTER,
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.nu > 0.0) {
            return Err(invalid(format!("nu must be positive, got {}", self.nu)));
        }
        if self.n_init == 0 {
            return Err(invalid("n_init must be at least 1"));
        }
        if self.acq_samples == 0 && !self.include_incumbent {
            return Err(invalid("acquisition search needs at least one candidate"));
        }
        KernelParams::new(self.theta)?;
        Ok(())
    }
}

/// Exploration weight `tau_t = 2 log(t^(d/2+2) pi^2 / (3 gamma))`.
pub fn tau(t: usize, dims: usize, gamma: f64) -> f64 {
    let t = t as f64;
    2.0 * ((dims as f64 / 2.0 + 2.0) * t.ln() + (PI * PI / (3.0 * gamma)).ln())
}

/// GP-UCB: `mu + sqrt(nu * tau_t) * sigma`.
pub fn ucb(mu: f64, sigma: f64, t: usize, dims: usize, gamma: f64, nu: f64) -> Result<f64> {
    if t == 0 || dims == 0 {
        return Err(invalid("ucb needs t >= 1 and dims >= 1"));
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    let tau_t = tau(t, dims, gamma);
    if !(tau_t > 0.0) {
        return Err(invalid(format!("tau_t = {tau_t} is not positive")));
    }
    Ok(mu + (nu * tau_t).sqrt() * sigma)
}

struct Acquisition<'a> {
    model: &'a GpModel,
    weight: f64,
    work: Vec<f64>,
}

impl Acquisition<'_> {
    fn value(&mut self, u: &[f64]) -> f64 {
        let (mu, var) = self.model.predict_with(u, &mut self.work);
        mu + self.weight * var.max(0.0).sqrt()
    }
}

/// Maximizes GP-UCB over the unit cube. Returns the point and its value.
pub fn propose_normalized<R: Rng + ?Sized>(
    model: &GpModel,
    cfg: &BoConfig,
    t: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    let dims = model.dims();
    let weight = ucb(0.0, 1.0, t.max(1), dims, cfg.gamma, cfg.nu)?;
    let mut acq = Acquisition {
        model,
        weight,
        work: Vec::with_capacity(model.len()),
    };

    let mut starts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2);
    if cfg.include_incumbent {
        let top = (0..model.len())
            .max_by(|a, b| model.targets()[*a].total_cmp(&model.targets()[*b]).then(b.cmp(a)))
            .expect("model is nonempty");
        let u = model.input(top).to_vec();
        let v = acq.value(&u);
        starts.push((u, v));
    }
    let mut best_raw: Option<(Vec<f64>, f64)> = None;
    for _ in 0..cfg.acq_samples {
        let u: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let v = acq.value(&u);
        if best_raw.as_ref().is_none_or(|(_, bv)| v > *bv) {
            best_raw = Some((u, v));
        }
    }
    starts.extend(best_raw);

    let mut best: Option<(Vec<f64>, f64)> = None;
    for (u, v) in starts {
        let refined = refine(&mut acq, u, v, cfg.acq_refine_steps, rng);
        if best.as_ref().is_none_or(|(_, bv)| refined.1 > *bv) {
            best = Some(refined);
        }
    }
    best.ok_or_else(|| invalid("no acquisition candidates"))
}

/// (1+1) local search on the acquisition with step halving.
fn refine<R: Rng + ?Sized>(
    acq: &mut Acquisition,
    mut current: Vec<f64>,
    mut current_val: f64,
    steps: usize,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let mut step = REFINE_INITIAL_STEP;
    let mut failures = 0;
    let mut cand = vec![0.0; current.len()];
    for _ in 0..steps {
        for (c, x) in cand.iter_mut().zip(&current) {
            let z: f64 = rng.sample(StandardNormal);
            *c = (x + step * z).clamp(0.0, 1.0);
        }
        let v = acq.value(&cand);
        if v > current_val {
            std::mem::swap(&mut current, &mut cand);
            current_val = v;
            failures = 0;
        } else {
            failures += 1;
            if failures == REFINE_PATIENCE {
                step *= 0.5;
                failures = 0;
            }
        }
    }
    (current, current_val)
}

/// Next candidate in the coordinates of `space`.
pub fn propose<R: Rng + ?Sized>(
    model: &GpModel,
    space: &SearchSpace,
    cfg: &BoConfig,
    t: usize,
    rng: &mut R,
) -> Result<Solution> {
    let (u, _) = propose_normalized(model, cfg, t, rng)?;
    Ok(Solution(space.denormalize(&u)))
}

/// Incremental BO state, shared by [`run_bo`] and the first stage of BEA.
pub struct BayesOpt<'s> {
    space: &'s SearchSpace,
    cfg: BoConfig,
    rng: ChaCha8Rng,
    params: KernelParams,
    normalized: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl<'s> BayesOpt<'s> {
    pub fn new(space: &'s SearchSpace, cfg: BoConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            space,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            params: KernelParams::new(cfg.theta)?,
            cfg,
            normalized: Vec::new(),
            values: Vec::new(),
        })
    }

    /// Fits a GP to the data seen so far. Targets are centered on their mean
    /// so the zero prior mean sits at the average observation.
    pub fn fit_model(&self) -> Result<GpModel> {
        let n = self.values.len() as f64;
        let mean = self.values.iter().sum::<f64>() / n;
        let sd = (self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let scale = if self.cfg.standardize && sd > 0.0 {
            1.0 / sd
        } else {
            1.0
        };
        let centered: Vec<f64> = self.values.iter().map(|v| (v - mean) * scale).collect();
        let mut jitter = self.cfg.jitter;
        loop {
            match GpModel::fit(&self.normalized, &centered, self.params, jitter) {
                Err(crate::Error::NotPositiveDefinite { .. }) if jitter * 10.0 <= MAX_JITTER => jitter *= 10.0,
                other => return other,
            }
        }
    }

    /// Generates, evaluates and records one candidate.
    pub fn step<O: Objective + ?Sized>(&mut self, objective: &mut O, trace: &mut Trace) -> Result<()> {
        let iteration = trace.len() + 1;
        let start = Instant::now();
        let u = if self.values.len() < self.cfg.n_init {
            (0..self.space.dims()).map(|_| self.rng.random::<f64>()).collect()
        } else {
            let model = self.fit_model()?;
            propose_normalized(&model, &self.cfg, self.values.len(), &mut self.rng)?.0
        };
        let x = self.space.denormalize(&u);
        let overhead = start.elapsed().as_secs_f64();
        let f = evaluate_at(objective, &x, iteration)?;
        self.normalized.push(self.space.normalize(&x));
        self.values.push(f);
        trace.push(Solution(x), f, overhead, Stage::Bo);
        Ok(())
    }
}

/// Runs `iters` iterations: `n_init` uniform samples, then one GP refit and
/// acquisition maximization per iteration.
pub fn run_bo<O: Objective + ?Sized>(
    objective: &mut O,
    space: &SearchSpace,
    cfg: &BoConfig,
    iters: usize,
) -> Result<Trace> {
    if iters < cfg.n_init {
        return Err(invalid(format!("iters {iters} < n_init {}", cfg.n_init)));
    }
    let mut bo = BayesOpt::new(space, cfg.clone())?;
    let mut trace = Trace::new("bo", cfg.seed);
    for _ in 0..iters {
        bo.step(objective, &mut trace)?;
    }
    Ok(trace)
}
