//! Checks shared by the property tests and the acceptance binary.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;

use optbench_core::bea::{
    gain_aware_mutate, run_bea_detailed, select_transfer_population, update_sigma2, BeaConfig, GainAwareState,
    TransferStrategy, SIGMA2_MAX, SIGMA2_MIN,
};
use optbench_core::ea::{select_survivors, self_adaptive_mutate, EaConfig, Individual};
use optbench_core::harness::{export_csv, run_experiment, Algorithm, ExperimentSpec};
use optbench_core::kmeans::{kmeans, sse, DEFAULT_MAX_ITERS};
use optbench_core::trace::quantize_sig9;
use optbench_core::{SearchSpace, Solution, Stage, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of cases examined and a description of each failed one.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl Outcome {
    fn fail(&mut self, msg: String) {
        if self.failures.len() < 10 {
            self.failures.push(msg);
        } else if self.failures.len() == 10 {
            self.failures.push("...".into());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checked > 0
    }

    pub fn assert_ok(&self) {
        assert!(self.checked > 0, "nothing was checked");
        assert!(
            self.failures.is_empty(),
            "{} failures: {:#?}",
            self.failures.len(),
            self.failures
        );
    }
}

fn random_space(rng: &mut ChaCha8Rng) -> SearchSpace {
    let d = rng.random_range(1..=6);
    let lower: Vec<f64> = (0..d).map(|_| rng.random_range(-1000.0..100.0)).collect();
    let upper: Vec<f64> = lower
        .iter()
        .map(|l| l + 10f64.powf(rng.random_range(-3.0..3.0)))
        .collect();
    SearchSpace::new(lower, upper).unwrap()
}

/// Point strictly inside the box, sometimes hugging a bound.
fn random_point(space: &SearchSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..space.dims())
        .map(|j| {
            let (lo, w) = (space.lower()[j], space.width(j));
            let u: f64 = match rng.random_range(0..4) {
                0 => 1e-9,
                1 => 1.0 - 1e-9,
                _ => rng.random_range(0.0..1.0),
            };
            (lo + u * w).clamp(lo + 1e-12 * w, lo + w - 1e-12 * w)
        })
        .collect()
}

/// Both mutation operators keep offspring in the domain: the gain-aware one
/// strictly inside the open box, the standard one inside the closed box.
pub fn mutation_in_domain(trials: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = EaConfig::default();
    let mut out = Outcome::default();
    for t in 0..trials {
        let space = random_space(&mut rng);
        let x = random_point(&space, &mut rng);
        let sigmas: Vec<f64> = (0..space.dims())
            .map(|j| space.width(j) * 10f64.powf(rng.random_range(-5.0..1.5)))
            .collect();
        let ind = Individual {
            x,
            sigmas,
            fitness: None,
        };
        let sigma2 = 10f64.powf(rng.random_range(SIGMA2_MIN.log10()..=SIGMA2_MAX.log10()));
        let child = gain_aware_mutate(&ind, sigma2, &space, &cfg, &mut rng);
        let open = child
            .x
            .iter()
            .enumerate()
            .all(|(j, v)| space.lower()[j] < *v && *v < space.upper()[j]);
        if !open {
            out.fail(format!("trial {t}: gain-aware child {:?} left the open box", child.x));
        }
        let plain = self_adaptive_mutate(&ind, &space, &cfg, &mut rng);
        if !space.contains(&plain.x) {
            out.fail(format!("trial {t}: child {:?} left the closed box", plain.x));
        }
        let floor_ok = child
            .sigmas
            .iter()
            .chain(&plain.sigmas)
            .zip((0..space.dims()).cycle())
            .all(|(s, j)| *s >= cfg.epsilon0(&space, j));
        if !floor_ok {
            out.fail(format!("trial {t}: step size fell below its floor"));
        }
        out.checked += 1;
    }
    out
}

/// The global scale after `u` updates equals the closed form: `alpha^u` on
/// a flat objective and `beta^u` on one that improves every evaluation,
/// both clamped to the allowed range.
pub fn sigma2_exactness() -> Outcome {
    let mut out = Outcome::default();
    let space = SearchSpace::cube(2, -1.0, 1.0).unwrap();
    let cfg = BeaConfig {
        switch_point: 20,
        bo: optbench_core::bo::BoConfig {
            n_init: 5,
            acq_samples: 50,
            acq_refine_steps: 5,
            ..Default::default()
        },
        ..BeaConfig::default()
    };
    for (label, factor, iters) in [("flat", cfg.alpha, 400usize), ("rising", cfg.beta, 300)] {
        let mut calls = 0.0f64;
        let mut objective = |_: &[f64]| -> Result<f64, optbench_core::ObjectiveError> {
            calls += 1.0;
            Ok(if label == "flat" { 0.0 } else { calls })
        };
        let run = run_bea_detailed(&mut objective, &space, &cfg, iters).unwrap();
        // One update before each offspring once the trace is longer than a window.
        let expected_updates = iters - cfg.switch_point.max(cfg.window + 1);
        if run.sigma2_history.len() != expected_updates {
            out.fail(format!(
                "{label}: {} updates, expected {expected_updates}",
                run.sigma2_history.len()
            ));
        }
        let mut state = GainAwareState::default();
        for (u, got) in run.sigma2_history.iter().enumerate() {
            let delta = if label == "flat" { 0.0 } else { 1.0 };
            state = update_sigma2(state, delta, cfg.alpha, cfg.beta);
            let closed = factor.powi(u as i32 + 1).clamp(SIGMA2_MIN, SIGMA2_MAX);
            if *got != state.sigma2 || (got - closed).abs() > 1e-9 * closed {
                out.fail(format!("{label}: update {} gave {got}, expected {closed}", u + 1));
            }
            out.checked += 1;
        }
    }
    out
}

/// (mu+lambda) selection never loses the best individual and returns
/// exactly the fittest members of parents and offspring.
pub fn elitism(trials: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let ind = |f: f64| Individual {
        x: vec![f],
        sigmas: vec![1.0],
        fitness: Some(f),
    };
    for t in 0..trials {
        let keep = rng.random_range(1..=12);
        let parents: Vec<Individual> = (0..keep).map(|_| ind(rng.random_range(-5..5) as f64)).collect();
        let lambda = rng.random_range(0..=12);
        let offspring: Vec<Individual> = (0..lambda).map(|_| ind(rng.random_range(-5..5) as f64)).collect();
        let mut pool: Vec<f64> = parents.iter().chain(&offspring).map(|i| i.fitness.unwrap()).collect();
        pool.sort_by(|a, b| b.total_cmp(a));
        pool.truncate(keep);
        let best_parent = parents
            .iter()
            .map(|i| i.fitness.unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let survivors = select_survivors(parents, offspring, keep);
        let got: Vec<f64> = survivors.iter().map(|i| i.fitness.unwrap()).collect();
        if got != pool {
            out.fail(format!("trial {t}: survivors {got:?}, expected {pool:?}"));
        }
        if got[0] < best_parent {
            out.fail(format!("trial {t}: best fell from {best_parent} to {}", got[0]));
        }
        out.checked += 1;
    }
    out
}

/// Minimum SSE over every partition of `points` into exactly `k` nonempty
/// clusters, enumerated as restricted growth strings.
pub fn exhaustive_min_sse(points: &[Vec<f64>], k: usize) -> f64 {
    fn rec(points: &[Vec<f64>], k: usize, labels: &mut Vec<usize>, used: usize, best: &mut f64) {
        let n = points.len();
        if labels.len() == n {
            if used == k {
                *best = best.min(sse(points, labels, k));
            }
            return;
        }
        // Not enough points left to open the remaining clusters.
        if k - used > n - labels.len() {
            return;
        }
        for c in 0..=used.min(k - 1) {
            labels.push(c);
            rec(points, k, labels, used.max(c + 1), best);
            labels.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(points, k, &mut Vec::new(), 0, &mut best);
    best
}

/// k-means reaches the exhaustive optimum on small point sets.
pub fn kmeans_matches_exhaustive(trials: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    for t in 0..trials {
        let n = rng.random_range(1..=8);
        let d = rng.random_range(1..=3);
        let k = rng.random_range(1..=n.min(4));
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let labels = kmeans(&points, k, &mut rng, DEFAULT_MAX_ITERS).unwrap();
        let got = sse(&points, &labels, k);
        let oracle = exhaustive_min_sse(&points, k);
        if (got - oracle).abs() > 1e-12 * oracle.max(1e-300) {
            out.fail(format!("trial {t}: n={n} k={k} sse {got} vs optimum {oracle}"));
        }
        out.checked += 1;
    }
    out
}

/// S2 transfers the same (solution, objective) multiset as sorting the
/// archive by objective and taking the first `p`.
pub fn s2_matches_sort(trials: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let space = SearchSpace::cube(2, -10.0, 10.0).unwrap();
    let cfg = EaConfig::default();
    for t in 0..trials {
        let n = rng.random_range(1..=40);
        let p = rng.random_range(1..=n);
        let mut archive = Trace::new("bo", 0);
        for _ in 0..n {
            let x = space.sample_uniform(&mut rng);
            // Few distinct values so ties are common.
            let f = rng.random_range(0..6) as f64;
            archive.push(Solution(x), f, 0.0, Stage::Bo);
        }
        let got = select_transfer_population(&archive, TransferStrategy::S2, p, &space, &cfg, &mut rng).unwrap();
        let mut got: Vec<(f64, Vec<f64>)> = got.into_iter().map(|i| (i.fitness.unwrap(), i.x)).collect();

        let mut sorted: Vec<(f64, Vec<f64>)> = archive
            .records()
            .iter()
            .map(|r| (r.objective, r.solution.0.clone()))
            .collect();
        sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
        let cutoff = sorted[p - 1].0;
        // Values above the cutoff must all be present; ties at the cutoff
        // may be broken either way.
        let mut expect_above: Vec<_> = sorted.iter().filter(|(f, _)| *f > cutoff).cloned().collect();
        let mut got_above: Vec<_> = got.iter().filter(|(f, _)| *f > cutoff).cloned().collect();
        let key = |v: &mut Vec<(f64, Vec<f64>)>| v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1[0].total_cmp(&b.1[0])));
        key(&mut expect_above);
        key(&mut got_above);
        let mut got_values: Vec<f64> = got.iter().map(|g| g.0).collect();
        let mut expect_values: Vec<f64> = sorted[..p].iter().map(|s| s.0).collect();
        got_values.sort_by(f64::total_cmp);
        expect_values.sort_by(f64::total_cmp);
        let all_from_archive = got.iter().all(|g| sorted.contains(g));
        key(&mut got);
        got.dedup();
        if got_above != expect_above || got_values != expect_values || !all_from_archive || got.len() != p {
            out.fail(format!("trial {t}: n={n} p={p} selection differs from sort oracle"));
        }
        out.checked += 1;
    }
    out
}

/// Trace CSV written and read back reproduces every value at 9 significant
/// digits, and a second round trip is lossless.
pub fn csv_round_trip(trials: usize, seed: u64) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    for t in 0..trials {
        let mut trace = Trace::new("ea", t as u64);
        for _ in 0..rng.random_range(0..50) {
            let f = rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-12..12));
            let oh = rng.random_range(0.0..1.0) * 10f64.powi(rng.random_range(-9..2));
            trace.push(Solution(vec![f]), f, oh, Stage::Ea);
        }
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = Trace::read_csv(buf.as_slice(), "ea", t as u64, Stage::Ea).unwrap();
        let same = back.len() == trace.len()
            && trace.records().iter().zip(back.records()).all(|(a, b)| {
                a.index == b.index
                    && quantize_sig9(a.objective) == b.objective
                    && quantize_sig9(a.overhead_s) == b.overhead_s
            });
        let mut again = Vec::new();
        back.write_csv(&mut again).unwrap();
        if !same || again != buf {
            out.fail(format!("trial {t}: round trip changed the trace"));
        }
        out.checked += 1;
    }
    out
}

/// A small experiment with overhead recording off.
pub fn replay_spec() -> ExperimentSpec {
    ExperimentSpec {
        functions: vec!["rastrigin".into(), "schwefel".into()],
        algorithms: Algorithm::ALL.to_vec(),
        iters: 40,
        reps: 2,
        dims: 3,
        record_overhead: false,
        bea: BeaConfig {
            switch_point: 20,
            ..BeaConfig::default()
        },
        ..ExperimentSpec::default()
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

/// Two runs of the same experiment export byte-identical files.
pub fn deterministic_replay(root: &Path) -> Outcome {
    let mut out = Outcome::default();
    let spec = replay_spec();
    let mut exports = Vec::new();
    for name in ["first", "second"] {
        let dir = root.join(name);
        let outcome = run_experiment(&spec).unwrap();
        if !outcome.failures.is_empty() {
            out.fail(format!("{name}: {} runs failed", outcome.failures.len()));
        }
        export_csv(&outcome, &spec, &dir).unwrap();
        exports.push(dir_bytes(&dir));
    }
    let expected_files = 2 * 3 * 2 + 2;
    if exports[0].len() != expected_files {
        out.fail(format!("{} files written, expected {expected_files}", exports[0].len()));
    }
    for ((na, a), (nb, b)) in exports[0].iter().zip(&exports[1]) {
        if na != nb || a != b {
            out.fail(format!("{na} differs between invocations"));
        }
        out.checked += 1;
    }
    out
}

/// Matérn 5/2 at scaled distance `r`, written out independently.
pub fn matern52_reference(r: f64) -> f64 {
    let s5 = 5f64.sqrt();
    (1.0 + s5 * r + 5.0 * r * r / 3.0) * (-s5 * r).exp()
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn naive_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        m[c].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Posterior mean and variance from an explicit inverse of `K + jitter I`.
pub fn naive_posterior(inputs: &[Vec<f64>], targets: &[f64], theta: f64, jitter: f64, s: &[f64]) -> (f64, f64) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let k: Vec<Vec<f64>> = inputs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            inputs
                .iter()
                .enumerate()
                .map(|(j, b)| matern52_reference(dist(a, b) / theta) + if i == j { jitter } else { 0.0 })
                .collect()
        })
        .collect();
    let inv = naive_inverse(&k);
    let ks: Vec<f64> = inputs.iter().map(|a| matern52_reference(dist(a, s) / theta)).collect();
    let kinv_ks: Vec<f64> = inv
        .iter()
        .map(|row| row.iter().zip(&ks).map(|(a, b)| a * b).sum())
        .collect();
    let mu = kinv_ks.iter().zip(targets).map(|(a, y)| a * y).sum();
    let var = 1.0 - ks.iter().zip(&kinv_ks).map(|(a, b)| a * b).sum::<f64>();
    (mu, var)
}

/// Largest absolute difference between the factored GP and the naive
/// oracle over random training sets with `n <= 50` and `d <= 20`.
pub fn gp_oracle(sets: usize, seed: u64, tol: f64) -> (Outcome, f64) {
    use optbench_core::gp::{GpModel, KernelParams, DEFAULT_JITTER};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let mut worst = 0.0f64;
    for t in 0..sets {
        let n = rng.random_range(1..=50);
        let d = rng.random_range(1..=20);
        let theta = [0.1, 0.2, 0.5][rng.random_range(0..3)];
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..=1.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let model = GpModel::fit(&inputs, &targets, KernelParams::new(theta).unwrap(), DEFAULT_JITTER).unwrap();
        for _ in 0..5 {
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
            let (mu, var) = model.posterior_unclamped(&s).unwrap();
            let (mu_ref, var_ref) = naive_posterior(&inputs, &targets, theta, DEFAULT_JITTER, &s);
            let err = (mu - mu_ref).abs().max((var - var_ref).abs());
            worst = worst.max(err);
            if !(err <= tol) {
                out.fail(format!("set {t} (n={n}, d={d}, theta={theta}): error {err:e}"));
            }
        }
        out.checked += 1;
    }
    (out, worst)
}
