use std::f64::consts::PI;

use optbench_core::bea::{
    continue_from_bo, gain_aware_mutate, run_bea, run_bea_detailed, select_transfer_population, BeaConfig,
    TransferStrategy, SIGMA2_MAX, SIGMA2_MIN,
};
use optbench_core::bench::{Benchmark, BenchmarkFunction};
use optbench_core::bo::{propose_normalized, run_bo, tau, ucb, BoConfig};
use optbench_core::ea::{run_ea, self_adaptive_mutate, tau as ea_tau, tau_prime, EaConfig, Individual};
use optbench_core::gp::{GpModel, KernelParams, DEFAULT_JITTER};
use optbench_core::{ObjectiveError, SearchSpace, Stage, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench(kind: Benchmark, dims: usize) -> BenchmarkFunction {
    BenchmarkFunction::new(kind, dims).unwrap()
}

fn small_bo(seed: u64) -> BoConfig {
    BoConfig {
        seed,
        acq_samples: 200,
        acq_refine_steps: 20,
        ..BoConfig::default()
    }
}

fn slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = ys.iter().enumerate().map(|(i, y)| (i as f64 - mx) * (y - my)).sum();
    let den: f64 = (0..ys.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    num / den
}

#[test]
fn ucb_values() {
    let v = ucb(0.0, 1.0, 1, 2, 0.1, 1.0).unwrap();
    assert!((v - (2.0 * (PI * PI / 0.3).ln()).sqrt()).abs() < 1e-12);
    assert!((v - 2.6433).abs() < 1e-4);
    assert_eq!(ucb(3.5, 0.0, 7, 20, 0.1, 1.0).unwrap(), 3.5);
    assert!(ucb(0.0, 0.6, 7, 20, 0.1, 1.0).unwrap() > ucb(0.0, 0.5, 7, 20, 0.1, 1.0).unwrap());
    assert!(ucb(0.0, 1.0, 0, 2, 0.1, 1.0).is_err());
    assert!(ucb(0.0, -1.0, 1, 2, 0.1, 1.0).is_err());
    for d in [1, 2, 20] {
        for t in 1..1000 {
            assert!(tau(t + 1, d, 0.1) > tau(t, d, 0.1));
        }
    }
}

#[test]
fn single_raw_candidate_is_returned() {
    let model = GpModel::fit(
        &[vec![0.5, 0.5]],
        &[1.0],
        KernelParams::new(0.2).unwrap(),
        DEFAULT_JITTER,
    )
    .unwrap();
    let cfg = BoConfig {
        acq_samples: 1,
        acq_refine_steps: 0,
        include_incumbent: false,
        ..BoConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut copy = rng.clone();
    let expect: Vec<f64> = (0..2).map(|_| copy.random::<f64>()).collect();
    let (u, _) = propose_normalized(&model, &cfg, 1, &mut rng).unwrap();
    assert_eq!(u, expect);
}

#[test]
fn proposal_beats_every_probed_candidate() {
    let inputs = vec![vec![0.2, 0.3], vec![0.8, 0.6], vec![0.4, 0.9]];
    let model = GpModel::fit(
        &inputs,
        &[2.0, -1.0, 0.0],
        KernelParams::new(0.1).unwrap(),
        DEFAULT_JITTER,
    )
    .unwrap();
    let cfg = BoConfig::default();
    let (u, v) = propose_normalized(&model, &cfg, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let acq = |s: &[f64]| {
        let (mu, var) = model.posterior(s).unwrap();
        ucb(mu, var.sqrt(), 4, 2, cfg.gamma, cfg.nu).unwrap()
    };
    assert!((acq(&u) - v).abs() < 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..cfg.acq_samples {
        let c: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
        assert!(v >= acq(&c) - 1e-12);
    }
    let again = propose_normalized(&model, &cfg, 4, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(again.0, u);
}

#[test]
fn bo_runs() {
    let f = bench(Benchmark::Griewank, 2);
    let space = f.domain();
    let cfg = small_bo(1);
    let t = run_bo(&mut f.objective(), &space, &cfg, 50).unwrap();
    assert_eq!(t.len(), 50);
    assert!(t
        .records()
        .iter()
        .all(|r| space.contains(&r.solution) && r.stage == Stage::Bo));
    assert!(t.overheads().iter().all(|o| o.is_finite() && *o >= 0.0));
    let best = t.best_curve();
    assert!(best[49] >= best[9]);
    let again = run_bo(&mut f.objective(), &space, &cfg, 50).unwrap();
    assert_eq!(t.objectives(), again.objectives());

    // Only the initial design.
    let t = run_bo(&mut f.objective(), &space, &cfg, cfg.n_init).unwrap();
    assert_eq!(t.len(), cfg.n_init);
    assert!(run_bo(&mut f.objective(), &space, &cfg, cfg.n_init - 1).is_err());
}

#[test]
fn bo_reports_failing_iteration() {
    let space = SearchSpace::cube(2, 0.0, 1.0).unwrap();
    let mut calls = 0;
    let mut f = |_: &[f64]| {
        calls += 1;
        if calls == 13 {
            Err(ObjectiveError("boom".into()))
        } else {
            Ok(calls as f64)
        }
    };
    let err = run_bo(&mut f, &space, &small_bo(0), 20).unwrap_err().to_string();
    assert!(err.contains("13") && err.contains("boom"), "{err}");
}

#[test]
fn bo_overhead_grows() {
    let f = bench(Benchmark::Rastrigin, 2);
    let space = f.domain();
    let (mut early, mut late) = (0.0, 0.0);
    for seed in 0..5 {
        let cfg = BoConfig {
            seed,
            ..BoConfig::default()
        };
        let t = run_bo(&mut f.objective(), &space, &cfg, 300).unwrap();
        let oh = t.overheads();
        early += oh[90..100].iter().sum::<f64>();
        late += oh[290..300].iter().sum::<f64>();
    }
    assert!(late / early > 5.0, "overhead ratio {}", late / early);
}

#[test]
fn zero_noise_and_floor() {
    let space = SearchSpace::cube(3, -1.0, 1.0).unwrap();
    let cfg = EaConfig::default();
    struct Zero;
    impl optbench_core::ea::NormalSource for Zero {
        fn standard_normal(&mut self) -> f64 {
            0.0
        }
    }
    let ind = Individual {
        x: vec![0.1, -0.2, 0.3],
        sigmas: vec![0.01, 0.02, 1e-9],
        fitness: None,
    };
    let out = self_adaptive_mutate(&ind, &space, &cfg, &mut Zero);
    assert_eq!(out.x, ind.x);
    assert_eq!(&out.sigmas[..2], &ind.sigmas[..2]);
    assert_eq!(out.sigmas[2], cfg.epsilon0(&space, 2));
}

#[test]
fn mutation_spread_matches_lognormal_model() {
    let d = 20;
    let space = SearchSpace::cube(d, -100.0, 100.0).unwrap();
    let cfg = EaConfig::default();
    let sigma = 1.0;
    let ind = Individual {
        x: vec![0.0; d],
        sigmas: vec![sigma; d],
        fitness: None,
    };
    let s2 = ea_tau(d).powi(2) + tau_prime(d).powi(2);
    // sd of sigma' * N = sqrt(E[sigma'^2]) = sigma * exp(s2).
    let model_sd = sigma * s2.exp();
    let mean_step = sigma * (s2 / 2.0).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let trials = 100_000;
    let mut sq = vec![0.0; d];
    let mut sq2 = vec![0.0; d];
    for _ in 0..trials {
        let a = self_adaptive_mutate(&ind, &space, &cfg, &mut rng);
        let b = gain_aware_mutate(&ind, 2.0, &space, &cfg, &mut rng);
        for j in 0..d {
            sq[j] += a.x[j] * a.x[j];
            sq2[j] += b.x[j] * b.x[j];
        }
    }
    for j in 0..d {
        let sd = (sq[j] / trials as f64).sqrt();
        assert!(
            (sd / mean_step - 1.0).abs() < 0.10,
            "coordinate {j}: sd {sd} vs E[sigma'] {mean_step}"
        );
        assert!(
            (sd / model_sd - 1.0).abs() < 0.03,
            "coordinate {j}: sd {sd} vs model {model_sd}"
        );
        let ratio = (sq2[j] / sq[j]).sqrt();
        assert!((ratio - 2.0).abs() < 0.2, "coordinate {j}: spread ratio {ratio}");
    }
}

#[test]
fn ea_runs() {
    let f = bench(Benchmark::Rastrigin, 5);
    let space = f.domain();
    let cfg = EaConfig {
        seed: 2,
        ..EaConfig::default()
    };
    let t = run_ea(&mut f.objective(), &space, &cfg, 95, None).unwrap();
    assert_eq!(t.len(), 95);
    assert!(t
        .records()
        .iter()
        .all(|r| space.contains(&r.solution) && r.stage == Stage::Ea));
    assert_eq!(
        t.objectives(),
        run_ea(&mut f.objective(), &space, &cfg, 95, None).unwrap().objectives()
    );
    assert!(run_ea(&mut f.objective(), &space, &cfg, 5, None).is_err());

    // A given population of p is evaluated and nothing else.
    let seeds: Vec<Individual> = (0..cfg.pop_size)
        .map(|i| Individual::new(vec![i as f64 * 0.1; 5], &space, &cfg))
        .collect();
    let t = run_ea(&mut f.objective(), &space, &cfg, cfg.pop_size, Some(seeds.clone())).unwrap();
    let xs: Vec<Vec<f64>> = t.records().iter().map(|r| r.solution.0.clone()).collect();
    assert_eq!(xs, seeds.iter().map(|s| s.x.clone()).collect::<Vec<_>>());
}

#[test]
fn ea_overhead_is_flat() {
    let f = bench(Benchmark::Rastrigin, 20);
    let t = run_ea(&mut f.objective(), &f.domain(), &EaConfig::default(), 1000, None).unwrap();
    let oh = t.overheads();
    assert!(slope(&oh).abs() < 1e-6, "slope {}", slope(&oh));
    let mut sorted = oh.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    assert!(median > 0.0);
    // Each generation's overhead is shared by its p records.
    let over = oh.iter().filter(|o| **o > 3.0 * median).count();
    assert!(
        over <= oh.len() / 100,
        "{over} of {} records above 3x the median {median}",
        oh.len()
    );
}

fn bea_cfg(seed: u64, switch_point: usize) -> BeaConfig {
    BeaConfig {
        bo: small_bo(seed),
        seed,
        switch_point,
        ..BeaConfig::default()
    }
}

#[test]
fn bea_stages_and_bo_prefix() {
    let f = bench(Benchmark::Schwefel, 3);
    let space = f.domain();
    let cfg = bea_cfg(5, 30);
    let run = run_bea_detailed(&mut f.objective(), &space, &cfg, 80).unwrap();
    let t = &run.trace;
    assert_eq!(t.len(), 80);
    for r in t.records() {
        let expect = if r.index <= 30 { Stage::Bo } else { Stage::Ea };
        assert_eq!(r.stage, expect, "record {}", r.index);
        assert!(space.contains(&r.solution));
    }
    let bo = run_bo(&mut f.objective(), &space, &cfg.bo, 30).unwrap();
    let prefix: Vec<_> = t.records()[..30]
        .iter()
        .map(|r| (r.solution.0.clone(), r.objective))
        .collect();
    let direct: Vec<_> = bo
        .records()
        .iter()
        .map(|r| (r.solution.0.clone(), r.objective))
        .collect();
    assert_eq!(prefix, direct);
    let best = t.best_curve();
    assert!(best[79] >= best[29]);

    // Continuing a separately run BO stage gives the same trace.
    let cont = continue_from_bo(&mut f.objective(), &space, &cfg, bo, 80).unwrap();
    assert_eq!(cont.trace.objectives(), t.objectives());
    assert_eq!(cont.sigma2_history, run.sigma2_history);

    // sigma2 moves by exactly alpha or beta, within the clamp.
    let mut prev = 1.0;
    for s in &run.sigma2_history {
        let up = (prev * cfg.alpha).clamp(SIGMA2_MIN, SIGMA2_MAX);
        let down = (prev * cfg.beta).clamp(SIGMA2_MIN, SIGMA2_MAX);
        assert!(*s == up || *s == down, "{prev} -> {s}");
        prev = *s;
    }
    assert_eq!(run.sigma2_history.len(), 80 - 30);
}

#[test]
fn bea_on_flat_objective() {
    let space = SearchSpace::cube(2, 0.0, 1.0).unwrap();
    let cfg = bea_cfg(0, 20);
    let iters = cfg.switch_point + cfg.ea.pop_size;
    let run = run_bea_detailed(&mut |_: &[f64]| Ok(4.0), &space, &cfg, iters).unwrap();
    let updates = run.sigma2_history.len();
    assert_eq!(updates, cfg.ea.pop_size);
    let mut expect = 1.0f64;
    for _ in 0..updates {
        expect *= cfg.alpha;
    }
    assert_eq!(*run.sigma2_history.last().unwrap(), expect);
    assert!((expect - 1.03f64.powi(updates as i32)).abs() < 1e-12);
}

#[test]
fn bea_validates() {
    let f = bench(Benchmark::Griewank, 2);
    let space = f.domain();
    assert!(run_bea(&mut f.objective(), &space, &bea_cfg(0, 30), 30).is_err());
    let short = run_bo(&mut f.objective(), &space, &small_bo(0), 20).unwrap();
    assert!(continue_from_bo(&mut f.objective(), &space, &bea_cfg(0, 30), short, 60).is_err());
}

#[test]
fn transfers_copy_archive_solutions() {
    let space = SearchSpace::cube(3, -1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut archive = Trace::new("bo", 0);
    for _ in 0..60 {
        let x = space.sample_uniform(&mut rng);
        let f = -x.iter().map(|v| v * v).sum::<f64>();
        archive.push(x.into(), f, 0.0, Stage::Bo);
    }
    let cfg = EaConfig {
        sigma_init_frac: 0.05,
        ..EaConfig::default()
    };
    for strategy in [
        TransferStrategy::S1,
        TransferStrategy::S2,
        TransferStrategy::S3,
        TransferStrategy::S4 { top_percent: 50.0 },
    ] {
        let pop = select_transfer_population(&archive, strategy, 10, &space, &cfg, &mut rng).unwrap();
        assert_eq!(pop.len(), 10);
        let mut seen = Vec::new();
        for ind in &pop {
            let r = archive
                .records()
                .iter()
                .find(|r| r.solution.0 == ind.x)
                .unwrap_or_else(|| panic!("{strategy}: {:?} not in archive", ind.x));
            assert_eq!(ind.fitness, Some(r.objective));
            assert_eq!(ind.sigmas, vec![0.1; 3]);
            assert!(!seen.contains(&r.index), "{strategy} picked record {} twice", r.index);
            seen.push(r.index);
        }
        if let TransferStrategy::S4 { .. } = strategy {
            let mut objs = archive.objectives();
            objs.sort_by(|a, b| b.total_cmp(a));
            let cutoff = objs[29];
            assert!(pop.iter().all(|i| i.fitness.unwrap() >= cutoff));
        }
    }
}
