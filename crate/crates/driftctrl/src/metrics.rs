//! Regret, estimation-error, and diagnostic statistics computed from
//! trajectory logs, with oracle access to the true parameters.
//!
//! Regret is pathwise: a learning run and the optimal-feedback run are
//! simulated on identical Wiener increments (common random numbers) and
//! their integrated costs are differenced at checkpoint times. The
//! normalizations divide out the growth rates the analysis predicts, so a
//! well-behaved controller produces O(1) normalized series.

use std::time::Duration;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::policy::PolicyRun;
use crate::posterior::{estimation_error, stack_regressor, PosteriorState};
use crate::riccati::{self, CostSpec};
use crate::sim::{DriftParams, NoiseSpec, TrajectoryLog};

/// One row of the per-checkpoint series.
#[derive(Debug, Clone, Copy)]
pub struct CheckpointRecord {
    pub time: f64,
    pub regret: f64,
    pub normalized_regret: f64,
    /// Squared estimation error ‖θ̂ − θ₀‖² of the estimate in force at this
    /// time (the prior mean before the first handover).
    pub estimation_error_sq: f64,
    pub normalized_estimation_error: f64,
}

/// Per-episode summary kept with a result: which estimate was acted on and
/// how far it was from the truth.
#[derive(Debug, Clone)]
pub struct EpisodeSummary {
    pub index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub estimate: Option<DMatrix<f64>>,
    pub gain: DMatrix<f64>,
    pub estimation_error_sq: Option<f64>,
    pub redraws: usize,
}

/// Everything a replication contributes to the experiment CSVs.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub checkpoints: Vec<CheckpointRecord>,
    pub episodes: Vec<EpisodeSummary>,
    pub failed: bool,
    pub wall_clock: Duration,
}

/// Default checkpoint grid: 25, 50, then every 50 time units, always ending
/// exactly at the horizon.
pub fn default_checkpoints(horizon: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for t in [25.0, 50.0] {
        if t < horizon {
            out.push(t);
        }
    }
    let mut t = 100.0;
    while t < horizon {
        out.push(t);
        t += 50.0;
    }
    out.push(horizon);
    out
}

/// Pathwise regret R(T) = ∫(stage cost − optimal stage cost)dt at each
/// checkpoint, from two logs produced on identical increments.
pub fn regret_at_checkpoints(
    policy: &TrajectoryLog,
    optimal: &TrajectoryLog,
    checkpoints: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_paired(policy, optimal)?;
    if checkpoints.is_empty() {
        return Err(Error::Empty("no checkpoints requested".into()));
    }
    for w in checkpoints.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Domain(format!(
                "checkpoints must increase strictly, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    checkpoints
        .iter()
        .map(|&t| Ok((t, policy.cost_at(t)? - optimal.cost_at(t)?)))
        .collect()
}

fn check_paired(policy: &TrajectoryLog, optimal: &TrajectoryLog) -> Result<()> {
    if policy.delta() != optimal.delta() {
        return Err(Error::Pairing(format!(
            "logs use different step sizes ({} vs {})",
            policy.delta(),
            optimal.delta()
        )));
    }
    if policy.n_steps() != optimal.n_steps() {
        return Err(Error::Pairing(format!(
            "logs span different horizons ({} vs {} steps)",
            policy.n_steps(),
            optimal.n_steps()
        )));
    }
    if policy.noise_increments() != optimal.noise_increments() {
        return Err(Error::Pairing(
            "logs were not produced on identical noise increments".into(),
        ));
    }
    Ok(())
}

/// Regret divided by its predicted growth rate p(p+q)√T·ln T.
pub fn normalize_regret(r: f64, t: f64, p: usize, q: usize) -> Result<f64> {
    let denom = normalizer_dims(p, q)? * t.sqrt() * check_log_time(t)?;
    Ok(r / denom)
}

/// Squared estimation error divided by its predicted decay rate
/// p(p+q)·τ^(−1/2)·ln τ.
pub fn normalize_estimation_error(err_sq: f64, tau: f64, p: usize, q: usize) -> Result<f64> {
    let denom = normalizer_dims(p, q)? / tau.sqrt() * check_log_time(tau)?;
    Ok(err_sq / denom)
}

fn normalizer_dims(p: usize, q: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("state dimension must be positive".into()));
    }
    Ok((p * (p + q)) as f64)
}

fn check_log_time(t: f64) -> Result<f64> {
    if t.is_nan() || t <= 1.0 {
        return Err(Error::Domain(format!(
            "normalization is defined for times > 1, got {t}"
        )));
    }
    Ok(t.ln())
}

/// Oracle-side accumulated noise moment M = Σ_k z_k dW_kᵀ from a log, the
/// martingale paired with the posterior's information matrix.
pub fn noise_cross_moment(log: &TrajectoryLog) -> DMatrix<f64> {
    let p = log.states().nrows();
    let q = log.actions().nrows();
    let mut m = DMatrix::zeros(p + q, p);
    let mut z = DVector::zeros(p + q);
    for k in 0..log.n_steps() {
        stack_regressor(log.state_at(k), log.actions().column(k), &mut z);
        m.ger(1.0, &z, &log.noise_increments().column(k).clone_owned(), 1.0);
    }
    m
}

/// Self-normalized martingale statistic and its theoretical budget:
/// stat = λ_max(MᵀΣ⁻¹M), budget = p·λ_max(C)·(log det Σ − log det Σ₀).
/// Both are monitoring quantities; the analysis bounds stat by a run-level
/// constant times budget.
pub fn self_normalized_stat(
    posterior: &PosteriorState,
    m: &DMatrix<f64>,
    noise: &NoiseSpec,
) -> Result<(f64, f64)> {
    let rows = posterior.param_rows();
    let p = posterior.state_dim();
    if m.nrows() != rows || m.ncols() != p {
        return Err(Error::Dimension(format!(
            "noise moment must be {rows}x{p}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if noise.dim() != p {
        return Err(Error::Dimension(format!(
            "noise covariance is {}-dimensional, posterior tracks {p} states",
            noise.dim()
        )));
    }
    let chol = posterior.checked_factor()?;
    let solved = chol.solve(m);
    let mut quad = m.transpose() * solved;
    linalg::symmetrize(&mut quad);
    let (_, stat) = linalg::symmetric_eig_range(&quad);
    let logdet = log_det_spd(posterior.precision())?;
    let logdet0 = log_det_spd(posterior.prior_precision())?;
    let budget = p as f64 * noise.max_eigenvalue() * (logdet - logdet0);
    Ok((stat, budget))
}

fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("log-determinant argument".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Riemann sum of ‖u_t − G*x_t‖² over grid times t ≥ `from_time`, where G*
/// is the optimal gain for the true parameters. This is the action-deviation
/// functional that upper-bounds regret up to problem constants; for the
/// optimal policy itself it is exactly zero.
pub fn action_deviation_integral(
    log: &TrajectoryLog,
    truth: &DriftParams,
    cost: &CostSpec,
    from_time: f64,
) -> Result<f64> {
    if log.states().nrows() != truth.state_dim() || log.actions().nrows() != truth.input_dim() {
        return Err(Error::Dimension(format!(
            "log dimensions ({}, {}) do not match the plant ({}, {})",
            log.states().nrows(),
            log.actions().nrows(),
            truth.state_dim(),
            truth.input_dim()
        )));
    }
    if from_time < 0.0 || from_time.is_nan() {
        return Err(Error::Domain(format!(
            "from_time must be non-negative, got {from_time}"
        )));
    }
    let sol = riccati::solve_care(truth, cost)?;
    let gain = sol.gain();
    let delta = log.delta();
    let from_step = (from_time / delta).ceil() as usize;
    let mut dev = DVector::zeros(truth.input_dim());
    let mut total = 0.0;
    for k in from_step..log.n_steps() {
        dev.gemv(-1.0, gain, &log.state_at(k).clone_owned(), 0.0);
        dev += log.actions().column(k);
        total += dev.norm_squared() * delta;
    }
    Ok(total)
}

/// Assemble the per-replication result: the regret series against the
/// paired optimal log, estimation errors of the estimates actually acted
/// on, and per-episode summaries.
#[allow(clippy::too_many_arguments)]
pub fn build_experiment_result(
    scenario: &str,
    policy_name: &str,
    seed: u64,
    run: &PolicyRun,
    optimal: &TrajectoryLog,
    truth: &DriftParams,
    checkpoints: &[f64],
    wall_clock: Duration,
) -> Result<ExperimentResult> {
    let p = truth.state_dim();
    let q = truth.input_dim();
    let theta0 = truth.stacked();
    let regret = regret_at_checkpoints(&run.log, optimal, checkpoints)?;

    let episodes: Vec<EpisodeSummary> = run
        .episodes
        .iter()
        .map(|ep| {
            let err_sq = ep
                .sample
                .as_ref()
                .map(|s| estimation_error(s, &theta0).map(|e| e * e))
                .transpose()?;
            Ok(EpisodeSummary {
                index: ep.index,
                start_time: ep.start_time,
                end_time: ep.end_time,
                estimate: ep.sample.clone(),
                gain: ep.gain.clone(),
                estimation_error_sq: err_sq,
                redraws: ep.redraws,
            })
        })
        .collect::<Result<_>>()?;

    // Error of the prior mean, used before the first handover.
    let prior_err_sq = {
        let e = estimation_error(run.posterior.prior_mean(), &theta0)?;
        e * e
    };

    let checkpoints_out: Vec<CheckpointRecord> = regret
        .iter()
        .map(|&(t, r)| {
            let err_sq = episodes
                .iter()
                .rfind(|ep| ep.start_time <= t && ep.estimation_error_sq.is_some())
                .and_then(|ep| ep.estimation_error_sq)
                .unwrap_or(prior_err_sq);
            Ok(CheckpointRecord {
                time: t,
                regret: r,
                normalized_regret: normalize_regret(r, t, p, q)?,
                estimation_error_sq: err_sq,
                normalized_estimation_error: normalize_estimation_error(err_sq, t, p, q)?,
            })
        })
        .collect::<Result<_>>()?;

    Ok(ExperimentResult {
        scenario: scenario.to_string(),
        policy: policy_name.to_string(),
        seed,
        checkpoints: checkpoints_out,
        episodes,
        failed: run.failed,
        wall_clock,
    })
}
