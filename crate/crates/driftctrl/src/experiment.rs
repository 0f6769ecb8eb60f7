//! Monte Carlo experiment orchestration.
//!
//! Two experiments back the command-line interface: a stabilization sweep
//! (how often does the first learning round produce a stabilizing
//! estimate, as a function of the round length τ?) and a regret experiment
//! (how fast does the cost of an adaptive policy approach the cost of the
//! optimal one?). Replications fan out over a bounded worker pool; every
//! replication is a pure function of the scenario and its own seed, and
//! results are gathered in replication order, so the emitted CSV is
//! byte-identical regardless of the parallelism degree. All file writes
//! happen on the calling thread after the workers have joined.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{
    build_experiment_result, default_checkpoints, normalize_regret, regret_at_checkpoints,
    CheckpointRecord,
};
use crate::policy::{
    check_failure_event, run_algorithm1, run_algorithm2, run_optimal, run_randomized_estimate,
    ExplorationSpec, RecoveryPolicy,
};
use crate::scenario::Scenario;
use crate::sim::{grid_steps, sample_wiener_increments};
use crate::SimRng;

/// Offset between the noise stream and the policy stream of a replication.
/// Both are derived from the same per-replication seed, so two policies run
/// on the same replication see identical Wiener increments (common random
/// numbers) and identical exploration randomness.
const POLICY_STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

/// The policies the regret experiment can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Episodic Thompson sampling: act on a posterior draw each episode.
    ThompsonSampling,
    /// Certainty equivalence on the posterior mean with decaying action
    /// noise.
    RandomizedEstimate,
    /// The optimal stationary feedback for the true parameters.
    Optimal,
}

impl PolicyKind {
    /// The identifier used in CSV rows and on the command line.
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::ThompsonSampling => "ts",
            PolicyKind::RandomizedEstimate => "rand-est",
            PolicyKind::Optimal => "optimal",
        }
    }

    /// Inverse of [`PolicyKind::label`].
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "ts" => Ok(PolicyKind::ThompsonSampling),
            "rand-est" => Ok(PolicyKind::RandomizedEstimate),
            "optimal" => Ok(PolicyKind::Optimal),
            other => Err(Error::Parse(format!(
                "unknown policy '{other}' (expected ts, rand-est, or optimal)"
            ))),
        }
    }
}

/// Everything an experiment run needs beyond the scenario itself.
///
/// One config type serves both experiments; the regret experiment ignores
/// `tau_grid` and the stabilization sweep ignores `policies`, `horizon`,
/// and `checkpoints`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Policies to run, in CSV emission order.
    pub policies: Vec<PolicyKind>,
    /// Control horizon T for the regret experiment.
    pub horizon: f64,
    /// Number of independent replications.
    pub reps: usize,
    /// Base seed; replication r uses `base_seed + r`.
    pub base_seed: u64,
    /// Regret/estimation checkpoint times; empty selects the default grid.
    pub checkpoints: Vec<f64>,
    /// Stabilization round lengths for the sweep.
    pub tau_grid: Vec<f64>,
    /// Worker threads; 0 selects one per available core.
    pub parallelism: usize,
    /// Where to write the CSV; `None` returns it without touching disk.
    pub out_path: Option<PathBuf>,
    /// Action-noise scale for the randomized-estimate baseline. Defaults to
    /// the scenario's dither scale sigma, so the baseline explores as loudly
    /// as the warm-up phase does.
    pub exploration_amplitude: f64,
}

impl RunConfig {
    /// A config with desk-scale defaults: both learning policies plus the
    /// optimal baseline, T = 600, 100 replications, seed 0.
    pub fn new(scenario: Scenario) -> Self {
        let exploration_amplitude = scenario.sigma();
        Self {
            scenario,
            policies: vec![
                PolicyKind::ThompsonSampling,
                PolicyKind::RandomizedEstimate,
                PolicyKind::Optimal,
            ],
            horizon: 600.0,
            reps: 100,
            base_seed: 0,
            checkpoints: Vec::new(),
            tau_grid: Vec::new(),
            parallelism: 0,
            out_path: None,
            exploration_amplitude,
        }
    }
}

/// One replication's checkpoint series for one policy.
struct PolicySeries {
    records: Vec<CheckpointRecord>,
    failed: bool,
}

/// Run the stabilization sweep: for each τ in the grid, `reps` independent
/// rounds of the stabilization algorithm, each classified as success or
/// failure by whether the sampled estimate's regulator stabilizes the true
/// plant. Returns the CSV text (`tau,reps,successes,success_rate,seed`)
/// and writes it to `config.out_path` when set.
pub fn run_stabilization_sweep(config: &RunConfig) -> Result<String> {
    check_reps(config.reps)?;
    if config.tau_grid.is_empty() {
        return Err(Error::Config("stabilization sweep needs a non-empty tau grid".into()));
    }
    let min_tau = 10.0 * config.scenario.delta();
    for &tau in &config.tau_grid {
        if !(tau.is_finite() && tau >= min_tau) {
            return Err(Error::Config(format!(
                "tau {tau} is below the minimum {min_tau} (ten simulation steps)"
            )));
        }
    }

    let tasks: Vec<(usize, usize)> = (0..config.tau_grid.len())
        .flat_map(|ti| (0..config.reps).map(move |r| (ti, r)))
        .collect();
    let pool = build_pool(config.parallelism)?;
    let outcomes: Vec<bool> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(ti, r)| {
                stabilization_task(
                    &config.scenario,
                    config.tau_grid[ti],
                    config.base_seed.wrapping_add(r as u64),
                )
            })
            .collect::<Result<_>>()
    })?;

    let mut csv = String::from("tau,reps,successes,success_rate,seed\n");
    for (ti, &tau) in config.tau_grid.iter().enumerate() {
        let successes = outcomes[ti * config.reps..(ti + 1) * config.reps]
            .iter()
            .filter(|&&ok| ok)
            .count();
        let rate = successes as f64 / config.reps as f64;
        writeln!(
            csv,
            "{},{},{},{},{}",
            csv_num(tau)?,
            config.reps,
            successes,
            csv_num(rate)?,
            config.base_seed
        )
        .expect("writing to a string cannot fail");
    }
    emit(config, &csv)?;
    Ok(csv)
}

/// One stabilization round; `Ok(true)` means the round succeeded. A
/// posterior too ill-conditioned to sample counts as a failure rather than
/// an error: it is a (bad) outcome of the round, not a broken
/// configuration.
fn stabilization_task(scenario: &Scenario, tau: f64, seed: u64) -> Result<bool> {
    let delta = scenario.delta();
    let n = grid_steps(tau, delta)?;
    let mut inc_rng = SimRng::seed_from_u64(seed);
    let increments = sample_wiener_increments(scenario.noise(), delta, n, &mut inc_rng)?;
    let dither = scenario.dither_for(tau)?;
    let mut rng = SimRng::seed_from_u64(seed ^ POLICY_STREAM_SALT);
    match run_algorithm1(
        scenario.truth(),
        scenario.cost(),
        scenario.g_init(),
        tau,
        &dither,
        delta,
        &increments,
        &mut rng,
    ) {
        Ok(round) => Ok(!check_failure_event(&round.sample, scenario.truth(), scenario.cost())),
        Err(Error::IllConditioned { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Run the regret experiment: for each replication, simulate the optimal
/// policy and every configured learning policy on the same Wiener
/// increments, then report regret and estimation error at the checkpoint
/// times. Returns the CSV text
/// (`policy,T,rep,regret,norm_regret,est_err_sq,norm_est_err`) with
/// per-replication rows followed by `mean` and `worst` aggregate rows for
/// each policy, and writes it to `config.out_path` when set.
pub fn run_regret_experiment(config: &RunConfig) -> Result<String> {
    check_reps(config.reps)?;
    if config.policies.is_empty() {
        return Err(Error::Config("regret experiment needs at least one policy".into()));
    }
    if !(config.horizon.is_finite() && config.horizon >= config.scenario.tau0()) {
        return Err(Error::Config(format!(
            "horizon {} must be at least the first episode length {}",
            config.horizon,
            config.scenario.tau0()
        )));
    }
    if !(config.exploration_amplitude.is_finite() && config.exploration_amplitude > 0.0) {
        return Err(Error::Config(format!(
            "exploration amplitude must be positive, got {}",
            config.exploration_amplitude
        )));
    }
    let checkpoints = effective_checkpoints(config)?;

    let pool = build_pool(config.parallelism)?;
    let per_rep: Vec<Vec<PolicySeries>> = pool.install(|| {
        (0..config.reps)
            .into_par_iter()
            .map(|r| {
                regret_task(config, &checkpoints, config.base_seed.wrapping_add(r as u64))
            })
            .collect::<Result<_>>()
    })?;

    for (r, series) in per_rep.iter().enumerate() {
        for (kind, s) in config.policies.iter().zip(series) {
            if s.failed {
                log::warn!(
                    "replication {r} of policy {} exhausted its recovery budget; \
                     it completed on the fallback gain and is included in the output",
                    kind.label()
                );
            }
        }
    }

    let mut csv = String::from("policy,T,rep,regret,norm_regret,est_err_sq,norm_est_err\n");
    for (pi, kind) in config.policies.iter().enumerate() {
        let reps: Vec<&PolicySeries> = per_rep.iter().map(|series| &series[pi]).collect();
        for (r, series) in reps.iter().enumerate() {
            for rec in &series.records {
                push_regret_row(&mut csv, kind.label(), &r.to_string(), rec)?;
            }
        }
        let (mean, worst) = aggregate(&reps, checkpoints.len());
        for rec in &mean {
            push_regret_row(&mut csv, kind.label(), "mean", rec)?;
        }
        for rec in &worst {
            push_regret_row(&mut csv, kind.label(), "worst", rec)?;
        }
    }
    emit(config, &csv)?;
    Ok(csv)
}

/// One replication: shared increments, one optimal run, one run per
/// configured policy.
fn regret_task(
    config: &RunConfig,
    checkpoints: &[f64],
    seed: u64,
) -> Result<Vec<PolicySeries>> {
    let scenario = &config.scenario;
    let truth = scenario.truth();
    let cost = scenario.cost();
    let delta = scenario.delta();
    let p = truth.state_dim();
    let q = truth.input_dim();

    let n = grid_steps(config.horizon, delta)?;
    let mut inc_rng = SimRng::seed_from_u64(seed);
    let increments = sample_wiener_increments(scenario.noise(), delta, n, &mut inc_rng)?;
    let optimal = run_optimal(truth, cost, config.horizon, delta, &increments)?;

    let schedule = scenario.schedule()?;
    let dither = scenario.dither_for(scenario.tau0())?;
    let recovery = RecoveryPolicy::default();

    config
        .policies
        .iter()
        .map(|kind| match kind {
            PolicyKind::Optimal => {
                // Self-comparison under common random numbers: the regret
                // of the optimal policy against itself is exactly zero.
                let pairs = regret_at_checkpoints(&optimal, &optimal, checkpoints)?;
                let records = pairs
                    .iter()
                    .map(|&(t, r)| {
                        Ok(CheckpointRecord {
                            time: t,
                            regret: r,
                            normalized_regret: normalize_regret(r, t, p, q)?,
                            estimation_error_sq: 0.0,
                            normalized_estimation_error: 0.0,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(PolicySeries { records, failed: false })
            }
            PolicyKind::ThompsonSampling => {
                let mut rng = SimRng::seed_from_u64(seed ^ POLICY_STREAM_SALT);
                let started = Instant::now();
                let run = run_algorithm2(
                    truth,
                    cost,
                    scenario.g_init(),
                    &schedule,
                    &dither,
                    &recovery,
                    config.horizon,
                    delta,
                    &increments,
                    &mut rng,
                    None,
                )?;
                let result = build_experiment_result(
                    scenario.name(),
                    kind.label(),
                    seed,
                    &run,
                    &optimal,
                    truth,
                    checkpoints,
                    started.elapsed(),
                )?;
                Ok(PolicySeries { records: result.checkpoints, failed: result.failed })
            }
            PolicyKind::RandomizedEstimate => {
                let exploration = ExplorationSpec::decaying(config.exploration_amplitude)?;
                let mut rng = SimRng::seed_from_u64(seed ^ POLICY_STREAM_SALT);
                let started = Instant::now();
                let run = run_randomized_estimate(
                    truth,
                    cost,
                    scenario.g_init(),
                    &schedule,
                    &dither,
                    &exploration,
                    &recovery,
                    config.horizon,
                    delta,
                    &increments,
                    &mut rng,
                )?;
                let result = build_experiment_result(
                    scenario.name(),
                    kind.label(),
                    seed,
                    &run,
                    &optimal,
                    truth,
                    checkpoints,
                    started.elapsed(),
                )?;
                Ok(PolicySeries { records: result.checkpoints, failed: result.failed })
            }
        })
        .collect()
}

/// Per-checkpoint mean and worst (field-wise maximum) over replications,
/// accumulated in replication order.
fn aggregate(reps: &[&PolicySeries], n_checkpoints: usize) -> (Vec<CheckpointRecord>, Vec<CheckpointRecord>) {
    let mut mean = Vec::with_capacity(n_checkpoints);
    let mut worst = Vec::with_capacity(n_checkpoints);
    for ci in 0..n_checkpoints {
        let mut m = CheckpointRecord {
            time: reps[0].records[ci].time,
            regret: 0.0,
            normalized_regret: 0.0,
            estimation_error_sq: 0.0,
            normalized_estimation_error: 0.0,
        };
        let mut w = m;
        w.regret = f64::NEG_INFINITY;
        w.normalized_regret = f64::NEG_INFINITY;
        w.estimation_error_sq = f64::NEG_INFINITY;
        w.normalized_estimation_error = f64::NEG_INFINITY;
        for series in reps {
            let rec = &series.records[ci];
            m.regret += rec.regret;
            m.normalized_regret += rec.normalized_regret;
            m.estimation_error_sq += rec.estimation_error_sq;
            m.normalized_estimation_error += rec.normalized_estimation_error;
            w.regret = w.regret.max(rec.regret);
            w.normalized_regret = w.normalized_regret.max(rec.normalized_regret);
            w.estimation_error_sq = w.estimation_error_sq.max(rec.estimation_error_sq);
            w.normalized_estimation_error =
                w.normalized_estimation_error.max(rec.normalized_estimation_error);
        }
        let count = reps.len() as f64;
        m.regret /= count;
        m.normalized_regret /= count;
        m.estimation_error_sq /= count;
        m.normalized_estimation_error /= count;
        mean.push(m);
        worst.push(w);
    }
    (mean, worst)
}

fn push_regret_row(csv: &mut String, policy: &str, rep: &str, rec: &CheckpointRecord) -> Result<()> {
    writeln!(
        csv,
        "{},{},{},{},{},{},{}",
        policy,
        csv_num(rec.time)?,
        rep,
        csv_num(rec.regret)?,
        csv_num(rec.normalized_regret)?,
        csv_num(rec.estimation_error_sq)?,
        csv_num(rec.normalized_estimation_error)?
    )
    .expect("writing to a string cannot fail");
    Ok(())
}

/// Decimal text with 17 significant digits; rejects non-finite values so
/// every emitted field is guaranteed parseable.
fn csv_num(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("refusing to emit non-finite value {x}")));
    }
    Ok(format!("{x:.16e}"))
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    Ok(())
}

fn effective_checkpoints(config: &RunConfig) -> Result<Vec<f64>> {
    let cps = if config.checkpoints.is_empty() {
        default_checkpoints(config.horizon)
    } else {
        config.checkpoints.clone()
    };
    for pair in cps.windows(2) {
        if pair[1].is_nan() || pair[1] <= pair[0] {
            return Err(Error::Config("checkpoints must be strictly increasing".into()));
        }
    }
    match (cps.first(), cps.last()) {
        (Some(&first), Some(&last)) => {
            if !(first.is_finite() && first > 1.0) {
                return Err(Error::Config(format!(
                    "checkpoints must exceed 1 (normalization divides by ln t), got {first}"
                )));
            }
            if last > config.horizon {
                return Err(Error::Config(format!(
                    "checkpoint {last} lies beyond the horizon {}",
                    config.horizon
                )));
            }
        }
        _ => return Err(Error::Config("checkpoint grid is empty".into())),
    }
    Ok(cps)
}

fn build_pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("building the worker pool: {e}")))
}

fn emit(config: &RunConfig, csv: &str) -> Result<()> {
    if let Some(path) = &config.out_path {
        std::fs::write(path, csv)?;
    }
    Ok(())
}
