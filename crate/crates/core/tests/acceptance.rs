//! End-to-end acceptance checks. Each test prints one PASS/FAIL line before
//! asserting, so `cargo test --test acceptance -- --nocapture` gives a report.

mod common;

use std::time::Instant;

use clustered_diffusion::adapt::{
    atc_step, centralized_descent, lms_step, multitask_step, project_simplex, single_task_step, AdaptConfig,
    AdaptState, DiffusionPlan, DESCENT_MAX_ITERS,
};
use clustered_diffusion::harness::{
    compare_strategies, run, run_ensemble, run_unmix_ensemble, Algorithm, Ensemble, ExperimentSpec, GridPoint,
    RunEntry, ScenarioSpec,
};
use clustered_diffusion::synth::{illustrative_env, unmix_env, LocalizationParams, SpectrumParams, UnmixParams};
use clustered_diffusion::theory::{db, spectral_radius, TheoryModel, DEFAULT_SIZE_CAP};
use clustered_diffusion::topology::{uniform_combiners, ClusteredNetwork, CombinerSet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_combiners, random_graph, random_instance, random_sample, random_vector};

fn report(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name} failed: {detail}");
}

fn spec(scenario: ScenarioSpec, algorithms: Vec<Algorithm>, grid: Vec<GridPoint>, trials: usize, iters: usize) -> ExperimentSpec {
    ExperimentSpec {
        scenario,
        algorithms,
        grid,
        n_trials: trials,
        n_iters: iters,
        seed: 1,
        theory: false,
        size_cap: DEFAULT_SIZE_CAP,
    }
}

fn steady_db(e: &Ensemble) -> f64 {
    e.steady_state().expect("some trials converged").msd_db()
}

fn entry(entries: &[RunEntry], strategy: Algorithm, eta: f64) -> &RunEntry {
    entries.iter().find(|e| e.strategy == strategy && e.point.eta == eta).expect("entry present")
}

#[test]
fn theory_matches_simulation() {
    let start = Instant::now();
    let grid = vec![GridPoint { mu: 0.01, eta: 0.1 }, GridPoint { mu: 0.05, eta: 0.1 }, GridPoint { mu: 0.01, eta: 1.0 }];
    let s = ExperimentSpec { theory: true, ..spec(ScenarioSpec::Illustrative, vec![Algorithm::Atc], grid, 100, 2000) };
    let report_entries = run(&s).unwrap().entries;
    let mut pass = true;
    let mut details = Vec::new();
    for e in &report_entries {
        let ss = e.ensemble.steady_state().unwrap();
        let theory = e.theory.as_ref().unwrap();
        let gap = (ss.msd_db() - db(theory.steady_state_msd)).abs();
        let tol = 0.5f64.max(3.0 * ss.stderr_db());
        let transient = e.ensemble.curve.msd[10..]
            .iter()
            .zip(&theory.curve.msd[10..])
            .map(|(a, b)| (db(*a) - db(*b)).abs())
            .fold(0.0, f64::max);
        pass &= gap <= tol && transient <= 1.0;
        details.push(format!(
            "(mu={}, eta={}) sim {:.2} dB theory {:.2} dB gap {gap:.2}/{tol:.2}, transient dev {transient:.2}/1.00",
            e.point.mu,
            e.point.eta,
            ss.msd_db(),
            db(theory.steady_state_msd)
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    details.push(format!("{elapsed:.1}s"));
    report("theory_matches_simulation", pass && elapsed < 120.0, &details.join("; "));
}

#[test]
fn strategy_ordering() {
    let s = spec(ScenarioSpec::Illustrative, vec![], vec![GridPoint { mu: 0.01, eta: 1.0 }], 100, 2000);
    let r = compare_strategies(&s).unwrap().remove(0);
    let ss = |a| steady_db(&r.entries.iter().find(|e| e.strategy == a).unwrap().ensemble);
    let (lms, mt, atc) = (ss(Algorithm::Lms), ss(Algorithm::Multitask), ss(Algorithm::Atc));
    report(
        "strategy_ordering",
        lms - mt >= 1.0 && mt - atc >= 1.0,
        &format!("non-cooperative {lms:.2} dB > multitask {mt:.2} dB > clustered {atc:.2} dB at (0.01, 1)"),
    );
}

#[test]
fn mean_stability_bound() {
    let mut stable = 0;
    let mut diverged_instances = 0;
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let (net, comb, env) = random_instance(1000 + seed, 6, 3);
        let eta = ChaCha8Rng::seed_from_u64(seed).random_range(0.0..1.0);
        let probe = TheoryModel::assemble(&net, &comb, &env, &AdaptConfig::new(1e-3, eta).unwrap(), DEFAULT_SIZE_CAP)
            .unwrap();
        let bound = probe.step_size_bound();
        let model =
            TheoryModel::assemble(&net, &comb, &env, &AdaptConfig::new(0.9 * bound, eta).unwrap(), DEFAULT_SIZE_CAP)
                .unwrap();
        let radius = model.spectral_radius_b();
        worst = worst.max(radius);
        if radius < 1.0 {
            stable += 1;
        }
        let plan = DiffusionPlan::clustered(&net, &comb);
        let fast = AdaptConfig::new(5.0 * bound, eta).unwrap();
        if !run_ensemble(&env, &plan, &fast, 3, 2000, seed).diverged.is_empty() {
            diverged_instances += 1;
        }
    }
    report(
        "mean_stability_bound",
        stable == 50 && diverged_instances >= 1,
        &format!("{stable}/50 stable at 0.9x bound (max rho(B) {worst:.4}); {diverged_instances}/50 diverged at 5x"),
    );
}

#[test]
fn bias_validation() {
    let (mu, eta) = (0.01, 0.1);
    let (net, env) = illustrative_env();
    let comb = uniform_combiners(&net);
    let cfg = AdaptConfig::new(mu, eta).unwrap();
    let model = TheoryModel::assemble(&net, &comb, &env, &cfg, DEFAULT_SIZE_CAP).unwrap();
    let bias = model.asymptotic_bias().unwrap();

    let ens = run_ensemble(&env, &DiffusionPlan::clustered(&net, &comb), &cfg, 1000, 2000, 4);
    let (mean, se) = ens.mean_error().unwrap();
    let worst_z = (0..bias.len()).map(|i| (mean[i] - bias[i]).abs() / se[i]).fold(0.0, f64::max);

    let descent = centralized_descent(&env, &net, &comb, &cfg, DESCENT_MAX_ITERS).unwrap();
    let stacked: Vec<f64> = descent.per_node(&net).iter().flat_map(|w| w.iter().copied().collect::<Vec<_>>()).collect();
    let nash = DVector::from_vec(stacked) - env.stacked_w_star();
    let nash_gap = (&bias - &nash).amax();

    report(
        "bias_validation",
        worst_z <= 3.0 && nash_gap <= 1e-6,
        &format!(
            "max |sim - theory| = {worst_z:.2} SE over {} entries (|bias| {:.2e}); equilibrium gap {nash_gap:.1e}",
            bias.len(),
            bias.amax()
        ),
    );
}

fn bits(s: &AdaptState) -> Vec<u64> {
    s.w.iter().flat_map(|w| w.iter().map(|v| v.to_bits())).collect()
}

#[test]
fn reduction_equivalences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut single, mut multi, mut lms) = (0, 0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let l = rng.random_range(1..=4);
        let edges = random_graph(&mut rng, n);
        let state = AdaptState::from_estimates((0..n).map(|_| random_vector(&mut rng, l, 2.0)).collect());
        let sample = random_sample(&mut rng, n, l);
        let cfg = AdaptConfig::new(rng.random_range(1e-3..0.5), rng.random_range(0.0..2.0)).unwrap();

        let one = ClusteredNetwork::new(n, &edges, vec![(0..n).collect()]).unwrap();
        let comb = random_combiners(&mut rng, &one);
        single += (bits(&atc_step(&state, &sample, &one, &comb, &cfg))
            == bits(&single_task_step(&state, &sample, &one, &comb, &cfg))) as usize;

        let solo = ClusteredNetwork::new(n, &edges, (0..n).map(|k| vec![k]).collect()).unwrap();
        let comb = CombinerSet { a: DMatrix::identity(n, n), c: DMatrix::identity(n, n), ..random_combiners(&mut rng, &solo) };
        multi += (bits(&atc_step(&state, &sample, &solo, &comb, &cfg))
            == bits(&multitask_step(&state, &sample, &solo, &comb, &cfg))) as usize;

        let zero = AdaptConfig::new(cfg.mu, 0.0).unwrap();
        lms += (bits(&atc_step(&state, &sample, &solo, &comb, &zero)) == bits(&lms_step(&state, &sample, &zero)))
            as usize;
    }
    report(
        "reduction_equivalences",
        single == 1000 && multi == 1000 && lms == 1000,
        &format!("bit-identical steps: single-task {single}/1000, multitask {multi}/1000, lms {lms}/1000"),
    );
}

#[test]
fn theory_internal_consistency() {
    let (net, env) = illustrative_env();
    let comb = uniform_combiners(&net);
    let (mut limit_rel, mut fixed_abs, mut radius_abs) = (0.0f64, 0.0f64, 0.0f64);
    for (mu, eta) in [(0.01, 0.1), (0.05, 0.1), (0.01, 1.0)] {
        let model =
            TheoryModel::assemble(&net, &comb, &env, &AdaptConfig::new(mu, eta).unwrap(), DEFAULT_SIZE_CAP).unwrap();
        let ss = model.steady_state_msd().unwrap();
        let curve = model.transient_msd(&model.zero_start_error(), 6000).unwrap();
        limit_rel = limit_rel.max((curve.zeta.last().unwrap() - ss).abs() / ss);
        let mean = model.mean_recursion(&model.zero_start_error(), 6000);
        fixed_abs = fixed_abs.max((mean.last().unwrap() - model.asymptotic_bias().unwrap()).amax());
        let rb = model.spectral_radius_b();
        radius_abs = radius_abs.max((spectral_radius(&model.k_dense()) - rb * rb).abs());
    }
    report(
        "theory_internal_consistency",
        limit_rel <= 1e-6 && fixed_abs <= 1e-8 && radius_abs <= 1e-10,
        &format!("transient limit rel err {limit_rel:.1e}, mean fixed point err {fixed_abs:.1e}, |rho(K) - rho(B)^2| {radius_abs:.1e}"),
    );
}

/// Enumerates supports; see tests/simplex.rs for the derivation.
fn kkt_oracle(v: &DVector<f64>) -> DVector<f64> {
    let r = v.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << r) {
        let support: Vec<usize> = (0..r).filter(|i| mask & (1 << i) != 0).collect();
        let tau = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let w = DVector::from_fn(r, |i, _| if mask & (1 << i) != 0 { v[i] - tau } else { 0.0 });
        if w.iter().all(|&x| x >= -1e-14) {
            let dist = (&w - v).norm_squared();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, w));
            }
        }
    }
    best.unwrap().1
}

#[test]
fn simplex_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut worst, mut infeasible, mut moved) = (0.0f64, 0, 0);
    for _ in 0..10_000 {
        let r = rng.random_range(1..=8);
        let v = DVector::from_fn(r, |_, _| rng.random_range(-3.0..3.0));
        let w = project_simplex(&v).unwrap();
        worst = worst.max((&w - kkt_oracle(&v)).amax());
        if w.iter().any(|&x| x < 0.0) || (w.sum() - 1.0).abs() > 1e-12 {
            infeasible += 1;
        }
        if (project_simplex(&w).unwrap() - &w).amax() > 1e-12 {
            moved += 1;
        }
    }
    report(
        "simplex_projection",
        worst <= 1e-9 && infeasible == 0 && moved == 0,
        &format!("max deviation from KKT oracle {worst:.1e}; infeasible {infeasible}; not idempotent {moved}"),
    );
}

#[test]
fn unmixing_regularization_helps() {
    let env = unmix_env(&UnmixParams { height: 20, width: 20, n_endmembers: 5, n_bands: 64, snr_db: 20.0, n_regions: 8, seed: 0 })
        .unwrap();
    let rmse = |eta: f64| {
        let e = run_unmix_ensemble(&env, &AdaptConfig::new(0.02, eta).unwrap(), 4, 2000, 1).unwrap();
        (e.steady_state().unwrap().msd / 5.0).sqrt()
    };
    let (plain, regularized) = (rmse(0.0), rmse(0.05));
    let gain = 1.0 - regularized / plain;
    report(
        "unmixing_regularization_helps",
        gain >= 0.10,
        &format!("RMSE eta=0 {plain:.4}, eta=0.05 {regularized:.4}, improvement {:.1}%", 100.0 * gain),
    );
}

#[test]
fn localization_ordering() {
    let p = LocalizationParams { n_clusters: 5, nodes_per_cluster: 8, ..Default::default() };
    let grid = vec![GridPoint { mu: 0.05, eta: 0.5 }, GridPoint { mu: 0.05, eta: 0.0 }];
    let entries = run(&spec(ScenarioSpec::Localization(p), vec![Algorithm::Atc, Algorithm::Lms], grid, 50, 3000))
        .unwrap()
        .entries;
    let coop = steady_db(&entry(&entries, Algorithm::Atc, 0.5).ensemble);
    let isolated = steady_db(&entry(&entries, Algorithm::Atc, 0.0).ensemble);
    let lms = steady_db(&entry(&entries, Algorithm::Lms, 0.0).ensemble);
    report(
        "localization_ordering",
        coop < isolated && isolated < lms,
        &format!("clustered eta=0.5 {coop:.2} dB < per-cluster eta=0 {isolated:.2} dB < non-cooperative {lms:.2} dB"),
    );
}

#[test]
fn spectrum_sensing_trends() {
    let mut coop = Vec::new();
    let mut alone = Vec::new();
    for n_r in [1, 2, 4] {
        let p = SpectrumParams { n_su: 5, n_antennas: n_r, p0: Some(0.05), ..Default::default() };
        let grid = vec![GridPoint { mu: 0.5, eta: 0.01 }, GridPoint { mu: 0.5, eta: 0.0 }];
        let entries = run(&spec(ScenarioSpec::Spectrum(p), vec![Algorithm::Atc], grid, 10, 20_000)).unwrap().entries;
        coop.push(steady_db(&entry(&entries, Algorithm::Atc, 0.01).ensemble));
        alone.push(steady_db(&entry(&entries, Algorithm::Atc, 0.0).ensemble));
    }
    let monotone = coop.windows(2).all(|w| w[1] < w[0]);
    let cooperation_wins = coop.iter().zip(&alone).all(|(c, a)| c < a);
    report(
        "spectrum_sensing_trends",
        monotone && cooperation_wins,
        &format!(
            "N_R = 1, 2, 4: eta=0.01 [{:.2}, {:.2}, {:.2}] dB, eta=0 [{:.2}, {:.2}, {:.2}] dB",
            coop[0], coop[1], coop[2], alone[0], alone[1], alone[2]
        ),
    );
}
