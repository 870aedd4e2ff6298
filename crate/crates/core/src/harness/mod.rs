//! Seeded Monte Carlo ensembles, steady-state estimates and theory overlays.
//!
//! Trial `t` draws iteration-`n` data from `data_stream(seed, t, n)` only, so
//! results do not depend on execution order or thread count. Trials run in
//! parallel and are reduced in trial order.

mod scenario;

pub use scenario::{Algorithm, LinearWorkload, ScenarioSpec, Workload};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapt::{network_msd, unmix_step, AdaptConfig, AdaptError, AdaptState, DiffusionPlan};
use crate::rng::data_stream;
use crate::synth::{DataModel, SynthError, UnmixEnv};
use crate::theory::{db, MsdCurve, TheoryError, TheoryModel};
use crate::topology::DocumentError;

/// Any ‖w_k‖ above this, or a non-finite entry, aborts the trial.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Fraction of the final iterations averaged for steady-state estimates.
pub const TAIL_FRACTION: f64 = 0.25;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Document(#[from] DocumentError),
    #[error("theory is not available for this workload: {0}")]
    TheoryUnsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub mu: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSpec,
    pub algorithms: Vec<Algorithm>,
    pub grid: Vec<GridPoint>,
    pub n_trials: usize,
    pub n_iters: usize,
    pub seed: u64,
    pub theory: bool,
    pub size_cap: usize,
}

impl ExperimentSpec {
    pub fn check(&self) -> Result<(), HarnessError> {
        if self.n_trials == 0 {
            return Err(HarnessError::Spec("n_trials must be at least 1".into()));
        }
        if self.n_iters == 0 {
            return Err(HarnessError::Spec("n_iters must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Spec("no algorithm selected".into()));
        }
        if self.grid.is_empty() {
            return Err(HarnessError::Spec("grid is empty".into()));
        }
        for g in &self.grid {
            AdaptConfig::new(g.mu, g.eta)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Empirical,
    Theory,
}

/// Per-iteration network MSD, index n holding the MSD of w(n).
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub msd: Vec<f64>,
    pub n_trials: usize,
    pub provenance: Provenance,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        crate::theory::curve_csv(&self.msd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub trial: usize,
    /// Iteration index of the first offending estimate.
    pub iteration: usize,
}

/// Tail-mean estimate with its standard error across trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub msd: f64,
    pub stderr: f64,
}

impl SteadyState {
    pub fn msd_db(&self) -> f64 {
        db(self.msd)
    }

    /// Delta-method error in dB: (10 / ln 10) · se / mean.
    pub fn stderr_db(&self) -> f64 {
        10.0 / std::f64::consts::LN_10 * self.stderr / self.msd
    }
}

#[derive(Debug, Clone)]
struct TrialOutcome {
    curve: Vec<f64>,
    tail_msd: f64,
    tail_error: DVector<f64>,
    diverged: Option<usize>,
}

/// Results over all trials of one (strategy, μ, η).
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub curve: LearningCurve,
    /// Per-trial tail-mean MSD for the trials that did not diverge.
    pub tail_msd: Vec<f64>,
    /// Per-trial tail-mean of the stacked error w − w*.
    pub tail_error: Vec<DVector<f64>>,
    pub diverged: Vec<Divergence>,
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl Ensemble {
    fn reduce(outcomes: Vec<TrialOutcome>, n_iters: usize) -> Self {
        let mut diverged = Vec::new();
        let mut msd = vec![0.0; n_iters];
        let mut tail_msd = Vec::new();
        let mut tail_error = Vec::new();
        for (trial, o) in outcomes.into_iter().enumerate() {
            if let Some(iteration) = o.diverged {
                diverged.push(Divergence { trial, iteration });
                continue;
            }
            for (acc, v) in msd.iter_mut().zip(&o.curve) {
                *acc += v;
            }
            tail_msd.push(o.tail_msd);
            tail_error.push(o.tail_error);
        }
        let kept = tail_msd.len();
        if kept == 0 {
            msd.clear();
        } else {
            msd.iter_mut().for_each(|v| *v /= kept as f64);
        }
        Self {
            curve: LearningCurve { msd, n_trials: kept, provenance: Provenance::Empirical },
            tail_msd,
            tail_error,
            diverged,
        }
    }

    /// None when every trial diverged.
    pub fn steady_state(&self) -> Option<SteadyState> {
        if self.tail_msd.is_empty() {
            return None;
        }
        let (msd, stderr) = mean_and_stderr(self.tail_msd.iter().copied());
        Some(SteadyState { msd, stderr })
    }

    /// Entrywise mean and standard error of the tail-averaged error vector.
    pub fn mean_error(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let first = self.tail_error.first()?;
        let len = first.len();
        let mut mean = DVector::zeros(len);
        let mut se = DVector::zeros(len);
        for i in 0..len {
            let (m, s) = mean_and_stderr(self.tail_error.iter().map(|e| e[i]));
            mean[i] = m;
            se[i] = s;
        }
        Some((mean, se))
    }
}

fn tail_start(n_iters: usize) -> usize {
    let len = ((n_iters as f64 * TAIL_FRACTION).round() as usize).clamp(1, n_iters);
    n_iters - len
}

fn stacked_error(w: &[DVector<f64>], truth: &[DVector<f64>]) -> DVector<f64> {
    let l = truth[0].len();
    DVector::from_fn(l * w.len(), |i, _| w[i / l][i % l] - truth[i / l][i % l])
}

fn blew_up(state: &AdaptState) -> bool {
    !state.is_finite() || state.max_norm() > DIVERGENCE_THRESHOLD
}

fn run_trial(
    model: &dyn DataModel,
    plan: &DiffusionPlan,
    config: &AdaptConfig,
    n_iters: usize,
    seed: u64,
    trial: usize,
) -> TrialOutcome {
    let truth = model.truth();
    let start = tail_start(n_iters);
    let mut state = AdaptState::zeros(model.n_nodes(), model.dim());
    let mut curve = Vec::with_capacity(n_iters);
    let mut tail_error = DVector::zeros(truth.len() * model.dim());
    for n in 0..n_iters {
        curve.push(network_msd(&state.w, truth));
        if n >= start {
            tail_error += stacked_error(&state.w, truth);
        }
        if n + 1 == n_iters {
            break;
        }
        let sample = model.draw(&mut data_stream(seed, trial as u64, n as u64));
        state = plan.step(&state, &sample, config);
        if blew_up(&state) {
            return TrialOutcome { curve, tail_msd: f64::NAN, tail_error, diverged: Some(n + 1) };
        }
    }
    let tail = (n_iters - start) as f64;
    let tail_msd = curve[start..].iter().sum::<f64>() / tail;
    TrialOutcome { curve, tail_msd, tail_error: tail_error / tail, diverged: None }
}

/// Runs `n_trials` independent trials of a diffusion plan from w(0) = 0.
pub fn run_ensemble(
    model: &dyn DataModel,
    plan: &DiffusionPlan,
    config: &AdaptConfig,
    n_trials: usize,
    n_iters: usize,
    seed: u64,
) -> Ensemble {
    let outcomes: Vec<TrialOutcome> = (0..n_trials)
        .into_par_iter()
        .map(|t| run_trial(model, plan, config, n_iters, seed, t))
        .collect();
    Ensemble::reduce(outcomes, n_iters)
}

/// Projected unmixing from uniform abundances 1/R. Each trial observes the
/// scene once with its own noise; the curve is (1/N)Σ‖w_k − w*_k‖², so
/// RMSE = sqrt(curve / R).
pub fn run_unmix_ensemble(
    env: &UnmixEnv,
    config: &AdaptConfig,
    n_trials: usize,
    n_iters: usize,
    seed: u64,
) -> Result<Ensemble, HarnessError> {
    let truth = &env.abundances;
    let r = env.params.n_endmembers;
    let start = tail_start(n_iters);
    let outcomes: Result<Vec<TrialOutcome>, AdaptError> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let data = env.data(env.observe(&mut data_stream(seed, t as u64, 0)));
            let mut state = AdaptState::from_estimates(vec![DVector::from_element(r, 1.0 / r as f64); env.n_pixels()]);
            let mut curve = Vec::with_capacity(n_iters);
            let mut tail_error = DVector::zeros(truth.len() * r);
            for n in 0..n_iters {
                curve.push(network_msd(&state.w, truth));
                if n >= start {
                    tail_error += stacked_error(&state.w, truth);
                }
                if n + 1 == n_iters {
                    break;
                }
                state = unmix_step(&state, &data, config)?;
                if blew_up(&state) {
                    return Ok(TrialOutcome { curve, tail_msd: f64::NAN, tail_error, diverged: Some(n + 1) });
                }
            }
            let tail = (n_iters - start) as f64;
            let tail_msd = curve[start..].iter().sum::<f64>() / tail;
            Ok(TrialOutcome { curve, tail_msd, tail_error: tail_error / tail, diverged: None })
        })
        .collect();
    Ok(Ensemble::reduce(outcomes?, n_iters))
}

/// Theory curve and steady-state value for one strategy.
#[derive(Debug, Clone)]
pub struct TheoryOverlay {
    pub curve: LearningCurve,
    pub steady_state_msd: f64,
    pub model: MsdCurve,
}

#[derive(Debug, Clone)]
pub struct RunEntry {
    pub strategy: Algorithm,
    pub point: GridPoint,
    pub ensemble: Ensemble,
    pub theory: Option<TheoryOverlay>,
    /// Why the theory overlay is missing when it was requested.
    pub theory_note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub entries: Vec<RunEntry>,
}

/// Theory for one strategy on a linear workload.
pub fn theory_overlay(
    workload: &LinearWorkload,
    strategy: Algorithm,
    point: GridPoint,
    n_iters: usize,
    size_cap: usize,
) -> Result<TheoryOverlay, HarnessError> {
    let (network, combiners, eta) = workload.strategy_topology(strategy)?;
    let env = workload
        .moments
        .as_ref()
        .ok_or_else(|| HarnessError::TheoryUnsupported("scenario has no Gaussian moment model".into()))?;
    env.check_clusters(&network)
        .map_err(|e| HarnessError::TheoryUnsupported(format!("cluster optima differ under {strategy}: {e}")))?;
    let config = AdaptConfig::new(point.mu, eta.unwrap_or(point.eta))?;
    let model = TheoryModel::assemble(&network, &combiners, env, &config, size_cap)?;
    let steady_state_msd = model.steady_state_msd()?;
    let curve = model.transient_msd(&model.zero_start_error(), n_iters)?;
    Ok(TheoryOverlay {
        curve: LearningCurve { msd: curve.zeta.clone(), n_trials: 0, provenance: Provenance::Theory },
        steady_state_msd,
        model: curve,
    })
}

fn run_one(
    workload: &Workload,
    spec: &ExperimentSpec,
    strategy: Algorithm,
    point: GridPoint,
) -> Result<RunEntry, HarnessError> {
    let (ensemble, theory) = match (workload, strategy) {
        (Workload::Unmix(env), Algorithm::Unmix) => {
            let config = AdaptConfig::new(point.mu, point.eta)?;
            let ensemble = run_unmix_ensemble(env, &config, spec.n_trials, spec.n_iters, spec.seed)?;
            let theory = spec.theory.then(|| Err(HarnessError::TheoryUnsupported("unmixing is nonlinear".into())));
            (ensemble, theory)
        }
        (Workload::Unmix(_), other) => {
            return Err(HarnessError::Spec(format!("algorithm {other} does not apply to the unmix scenario")))
        }
        (Workload::Linear(_), Algorithm::Unmix) => {
            return Err(HarnessError::Spec("algorithm unmix needs the unmix scenario".into()))
        }
        (Workload::Linear(lin), strategy) => {
            let (plan, eta) = lin.plan(strategy)?;
            let config = AdaptConfig::new(point.mu, eta.unwrap_or(point.eta))?;
            let ensemble = run_ensemble(lin.model.as_ref(), &plan, &config, spec.n_trials, spec.n_iters, spec.seed);
            let theory = spec.theory.then(|| theory_overlay(lin, strategy, point, spec.n_iters, spec.size_cap));
            (ensemble, theory)
        }
    };
    let (theory, theory_note) = match theory {
        None => (None, None),
        Some(Ok(t)) => (Some(t), None),
        Some(Err(HarnessError::Theory(TheoryError::SizeCap { required, cap }))) => {
            return Err(TheoryError::SizeCap { required, cap }.into())
        }
        Some(Err(e)) => (None, Some(e.to_string())),
    };
    Ok(RunEntry { strategy, point, ensemble, theory, theory_note })
}

/// Runs every (algorithm, μ, η) of an experiment on one workload.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport, HarnessError> {
    spec.check()?;
    let workload = spec.scenario.build()?;
    run_on(&workload, spec)
}

/// Like [`run`] with a prebuilt workload.
pub fn run_on(workload: &Workload, spec: &ExperimentSpec) -> Result<RunReport, HarnessError> {
    spec.check()?;
    let mut entries = Vec::new();
    for &point in &spec.grid {
        for &strategy in &spec.algorithms {
            entries.push(run_one(workload, spec, strategy, point)?);
        }
    }
    Ok(RunReport { entries })
}

#[derive(Debug, Clone)]
pub struct StrategyReport {
    pub point: GridPoint,
    pub entries: Vec<RunEntry>,
    /// Strategies sorted by steady-state MSD, largest first.
    pub ordering: Vec<Algorithm>,
}

/// Runs non-cooperative LMS, per-node multitask and clustered ATC on the same
/// seeds at every grid point.
pub fn compare_strategies(spec: &ExperimentSpec) -> Result<Vec<StrategyReport>, HarnessError> {
    let spec = ExperimentSpec {
        algorithms: vec![Algorithm::Lms, Algorithm::Multitask, Algorithm::Atc],
        ..spec.clone()
    };
    let workload = spec.scenario.build()?;
    spec.grid
        .iter()
        .map(|&point| {
            let one = ExperimentSpec { grid: vec![point], ..spec.clone() };
            let entries = run_on(&workload, &one)?.entries;
            let mut ranked: Vec<(Algorithm, f64)> = entries
                .iter()
                .map(|e| (e.strategy, e.ensemble.steady_state().map_or(f64::INFINITY, |s| s.msd)))
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
            Ok(StrategyReport { point, entries, ordering: ranked.into_iter().map(|(a, _)| a).collect() })
        })
        .collect()
}
