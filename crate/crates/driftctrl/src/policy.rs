//! Learning-to-control runners for the linear plant dx = (A₀x + B₀u)dt + dW.
//!
//! The protocol has two stages. A stabilization round holds a known
//! stabilizing gain and adds piecewise-constant excitation so the posterior
//! concentrates enough to hand over control. After that, time is split into
//! geometrically growing episodes: at each episode boundary the controller
//! commits to a fresh gain computed from the current posterior (a posterior
//! sample for the Thompson-sampling controller, the posterior mean plus
//! decaying action noise for the randomized-estimate baseline) and holds it
//! until the next boundary, while the posterior keeps absorbing every
//! observed transition.
//!
//! All runners consume an explicit matrix of Wiener increments instead of
//! drawing their own, so competing policies can be compared on common random
//! numbers; the generator passed in drives only policy-internal randomness
//! (excitation values and posterior draws).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::posterior::PosteriorState;
use crate::riccati::{self, CostSpec};
use crate::sim::{
    check_cost_dims, drive_feedback_segment, grid_steps, simulate_feedback, DitherSignal,
    DriftParams, TrajectoryLog, TrajectoryRecorder,
};

/// Episode boundaries τₙ = τ₀(1+ᾱ)ⁿ with configured growth bounds
/// α̲ ≤ (τₙ₊₁ − τₙ)/τₙ ≤ ᾱ.
///
/// The generator uses the upper bound; custom sequences respecting a
/// genuine interval (α̲ < ᾱ) can be validated against the same bounds in
/// tests.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeSchedule {
    tau0: f64,
    growth_lo: f64,
    growth_hi: f64,
}

impl EpisodeSchedule {
    pub fn new(tau0: f64, growth_lo: f64, growth_hi: f64) -> Result<Self> {
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::Config(format!(
                "stabilization length tau0 must be positive and finite, got {tau0}"
            )));
        }
        if !(growth_lo > 0.0 && growth_hi >= growth_lo && growth_hi.is_finite()) {
            return Err(Error::Config(format!(
                "episode growth bounds must satisfy 0 < lo <= hi, got ({growth_lo}, {growth_hi})"
            )));
        }
        Ok(Self { tau0, growth_lo, growth_hi })
    }

    /// Schedule with a single growth factor: τₙ = τ₀(1+α)ⁿ.
    pub fn geometric(tau0: f64, growth: f64) -> Result<Self> {
        Self::new(tau0, growth, growth)
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn growth_lo(&self) -> f64 {
        self.growth_lo
    }

    pub fn growth_hi(&self) -> f64 {
        self.growth_hi
    }

    /// End time of the n-th episode (n = 0 is the stabilization phase).
    pub fn episode_end(&self, n: usize) -> f64 {
        self.tau0 * (1.0 + self.growth_hi).powi(n as i32)
    }

    /// Episode end times from τ₀ up to and including the horizon. The final
    /// episode is truncated at the horizon, so its growth ratio may fall
    /// below the configured lower bound.
    pub fn ends_until(&self, horizon: f64) -> Result<Vec<f64>> {
        if horizon.is_nan() || horizon < self.tau0 {
            return Err(Error::Config(format!(
                "horizon {horizon} is shorter than the stabilization phase {}",
                self.tau0
            )));
        }
        let mut out = Vec::new();
        for n in 0.. {
            if n > 100_000 {
                return Err(Error::Config(
                    "episode schedule produces more than 100000 episodes".into(),
                ));
            }
            let t = self.episode_end(n);
            if t >= horizon {
                out.push(horizon);
                break;
            }
            out.push(t);
        }
        Ok(out)
    }
}

/// Excitation added to the held gain during the stabilization phase:
/// `kappa` segments of i.i.d. N(0, σ²I) values over the phase window.
#[derive(Debug, Clone, Copy)]
pub struct DitherSpec {
    sigma: f64,
    kappa: usize,
}

impl DitherSpec {
    pub fn new(sigma: f64, kappa: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "excitation scale sigma must be positive and finite, got {sigma}"
            )));
        }
        if kappa == 0 {
            return Err(Error::Config("excitation needs at least one segment".into()));
        }
        Ok(Self { sigma, kappa })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn segments(&self) -> usize {
        self.kappa
    }

    /// The stabilization guarantee is proved for segment counts growing like
    /// the square of the window length; the experiments deliberately run far
    /// fewer segments and still succeed. Note it at info level (never fail,
    /// never spam default logs) when the window is sparse.
    fn warn_if_sparse(&self, tau: f64) {
        let wanted = tau * tau;
        if (self.kappa as f64) < wanted {
            log::info!(
                "excitation uses {} segments over a window of {tau} time units \
                 (fewer than tau^2 = {wanted:.0}); stabilization guarantees degrade",
                self.kappa
            );
        }
    }
}

/// Decaying per-step action noise for the randomized-estimate baseline:
/// standard deviation `amplitude · t^(-exponent)` at time t.
#[derive(Debug, Clone, Copy)]
pub struct ExplorationSpec {
    amplitude: f64,
    exponent: f64,
}

impl ExplorationSpec {
    pub fn new(amplitude: f64, exponent: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "exploration amplitude must be positive and finite, got {amplitude}"
            )));
        }
        if !(exponent >= 0.0 && exponent.is_finite()) {
            return Err(Error::Config(format!(
                "exploration decay exponent must be non-negative, got {exponent}"
            )));
        }
        Ok(Self { amplitude, exponent })
    }

    /// The default quarter-power decay.
    pub fn decaying(amplitude: f64) -> Result<Self> {
        Self::new(amplitude, 0.25)
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// Noise standard deviation at time t > 0.
    pub fn std_at(&self, t: f64) -> f64 {
        self.amplitude * t.powf(-self.exponent)
    }
}

/// How an episodic run reacts when a sampled gain destabilizes the real
/// plant: the episode aborts once ‖x‖ exceeds `blowup_factor · (1 + ‖x(τ₀)‖)`
/// and the controller redraws from the current posterior, at most
/// `max_redraws` times per episode. Exhausting the budget switches the
/// episode to the initial stabilizing gain and marks the run as failed.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryPolicy {
    pub blowup_factor: f64,
    pub max_redraws: usize,
}

impl Default for RecoveryPolicy {
    fn default() -> Self {
        Self { blowup_factor: 1e3, max_redraws: 10 }
    }
}

/// One episode of an episodic run. Index 0 is the stabilization phase.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub index: usize,
    /// Episode window [start, end) in time units, snapped to the grid.
    pub start_time: f64,
    pub end_time: f64,
    /// Parameter estimate the episode's gain was computed from: a posterior
    /// draw for Thompson sampling, the posterior mean for the
    /// randomized-estimate baseline, absent for the stabilization phase and
    /// for episodes that fell back to the initial gain.
    pub sample: Option<DMatrix<f64>>,
    /// Posterior mean at the start of the episode (diagnostic; best effort).
    pub posterior_mean: Option<DMatrix<f64>>,
    /// Feedback gain in force at the end of the episode.
    pub gain: DMatrix<f64>,
    /// Mid-episode recoveries plus rejected draws charged to this episode.
    pub redraws: usize,
}

/// Output of an episodic run: the full trajectory, per-episode bookkeeping,
/// the final posterior, and whether any episode exhausted its recovery
/// budget (the run still completes under the initial gain when that
/// happens).
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub log: TrajectoryLog,
    pub episodes: Vec<EpisodeRecord>,
    pub posterior: PosteriorState,
    pub failed: bool,
}

/// Output of a stabilization round: the posterior draw taken at its end,
/// the posterior itself, and the logged trajectory.
#[derive(Debug, Clone)]
pub struct StabilizationRun {
    pub sample: DMatrix<f64>,
    pub posterior: PosteriorState,
    pub log: TrajectoryLog,
}

/// Stabilization round: hold `g_init` plus piecewise-constant excitation on
/// [0, τ], fold the whole trajectory into a fresh default-prior posterior,
/// and draw one posterior sample.
///
/// `increments` supplies the Wiener increments (at least ⌈τ/Δ⌉ columns);
/// `rng` drives the excitation values and the final draw.
#[allow(clippy::too_many_arguments)]
pub fn run_algorithm1<R: Rng + ?Sized>(
    truth: &DriftParams,
    cost: &CostSpec,
    g_init: &DMatrix<f64>,
    tau: f64,
    dither: &DitherSpec,
    delta: f64,
    increments: &DMatrix<f64>,
    rng: &mut R,
) -> Result<StabilizationRun> {
    let p = truth.state_dim();
    let q = truth.input_dim();
    check_cost_dims(truth, cost)?;
    check_stabilizing_gain(truth, g_init, "initial gain")?;
    let n = grid_steps(tau, delta)?;
    if increments.nrows() != p || increments.ncols() < n {
        return Err(Error::Dimension(format!(
            "increments must be {p}x(>= {n}), got {}x{}",
            increments.nrows(),
            increments.ncols()
        )));
    }
    dither.warn_if_sparse(tau);
    let signal = DitherSignal::sample(dither.sigma(), dither.segments(), q, n, rng)?;

    let x0 = DVector::zeros(p);
    let mut rec = TrajectoryRecorder::new(p, q, delta, n, &x0);
    let mut x = x0;
    drive_feedback_segment(
        truth,
        cost,
        g_init,
        Some((&signal, 0)),
        increments,
        0,
        n,
        delta,
        None,
        &mut x,
        &mut rec,
    );
    let log = rec.finish();
    let mut posterior = PosteriorState::default_prior(p, q);
    posterior.accumulate_trajectory(&log)?;
    let sample = posterior.sample_posterior(rng)?;
    Ok(StabilizationRun { sample, posterior, log })
}

/// True when acting on the stacked estimate θ̂ = [Âᵀ; B̂ᵀ]ᵀ would leave the
/// real plant unstable: either θ̂ admits no regulator at all, or the gain it
/// induces gives A₀ + B₀Ĝ an eigenvalue with non-negative real part. Used
/// on the oracle side of stabilization experiments; the controller itself
/// never sees the truth.
pub fn check_failure_event(sample: &DMatrix<f64>, truth: &DriftParams, cost: &CostSpec) -> bool {
    let p = truth.state_dim();
    let q = truth.input_dim();
    if sample.nrows() != p + q || sample.ncols() != p {
        return true;
    }
    match gain_for_estimate(sample, p, q, cost) {
        None => true,
        Some(gain) => {
            let d = truth.a() + truth.b() * &gain;
            !linalg::is_stable(&d)
        }
    }
}

/// Thompson-sampling controller: stabilization round on [0, τ₀], then
/// episodes on the given schedule, each run under the gain of a posterior
/// draw taken at its start, with mid-episode recovery per `recovery`.
///
/// `oracle` is a diagnostic bypass: when set, every episode (including the
/// stabilization phase, which then runs without excitation) acts on the
/// given parameter instead of the posterior, touching neither the
/// generator nor the recovery machinery. With `oracle = Some(truth)` the
/// run reproduces [`run_optimal`] on the same increments bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn run_algorithm2<R: Rng + ?Sized>(
    truth: &DriftParams,
    cost: &CostSpec,
    g_init: &DMatrix<f64>,
    schedule: &EpisodeSchedule,
    dither: &DitherSpec,
    recovery: &RecoveryPolicy,
    horizon: f64,
    delta: f64,
    increments: &DMatrix<f64>,
    rng: &mut R,
    oracle: Option<&DriftParams>,
) -> Result<PolicyRun> {
    let mode = match oracle {
        Some(theta) => GainMode::Injected { theta },
        None => GainMode::Sample,
    };
    run_episodic(truth, cost, g_init, schedule, dither, recovery, horizon, delta, increments, rng, mode)
}

/// Randomized-estimate baseline: the same episodic skeleton as
/// [`run_algorithm2`], but each episode acts on the posterior mean
/// (certainty equivalence) and adds i.i.d. per-step action noise with
/// standard deviation decaying per `exploration`. Episodes whose mean gain
/// misbehaves fall back to the initial gain until the next boundary.
#[allow(clippy::too_many_arguments)]
pub fn run_randomized_estimate<R: Rng + ?Sized>(
    truth: &DriftParams,
    cost: &CostSpec,
    g_init: &DMatrix<f64>,
    schedule: &EpisodeSchedule,
    dither: &DitherSpec,
    exploration: &ExplorationSpec,
    recovery: &RecoveryPolicy,
    horizon: f64,
    delta: f64,
    increments: &DMatrix<f64>,
    rng: &mut R,
) -> Result<PolicyRun> {
    run_episodic(
        truth,
        cost,
        g_init,
        schedule,
        dither,
        recovery,
        horizon,
        delta,
        increments,
        rng,
        GainMode::Mean { exploration },
    )
}

/// Oracle baseline: the optimal stationary feedback for the true parameters
/// over the whole horizon, on the supplied increments. Pairing this with a
/// learning run on the same increments implements common random numbers.
pub fn run_optimal(
    truth: &DriftParams,
    cost: &CostSpec,
    horizon: f64,
    delta: f64,
    increments: &DMatrix<f64>,
) -> Result<TrajectoryLog> {
    let sol = riccati::solve_care(truth, cost)?;
    let x0 = DVector::zeros(truth.state_dim());
    simulate_feedback(truth, cost, sol.gain(), None, &x0, horizon, delta, increments)
}

enum GainMode<'a> {
    Sample,
    Mean { exploration: &'a ExplorationSpec },
    Injected { theta: &'a DriftParams },
}

#[allow(clippy::too_many_arguments)]
fn run_episodic<R: Rng + ?Sized>(
    truth: &DriftParams,
    cost: &CostSpec,
    g_init: &DMatrix<f64>,
    schedule: &EpisodeSchedule,
    dither: &DitherSpec,
    recovery: &RecoveryPolicy,
    horizon: f64,
    delta: f64,
    increments: &DMatrix<f64>,
    rng: &mut R,
    mode: GainMode<'_>,
) -> Result<PolicyRun> {
    let p = truth.state_dim();
    let q = truth.input_dim();
    check_cost_dims(truth, cost)?;
    check_stabilizing_gain(truth, g_init, "initial gain")?;
    if !(recovery.blowup_factor.is_finite() && recovery.blowup_factor > 0.0) {
        return Err(Error::Config(format!(
            "blowup factor must be positive and finite, got {}",
            recovery.blowup_factor
        )));
    }
    let n_total = grid_steps(horizon, delta)?;
    let boundaries = episode_step_grid(schedule, horizon, delta, n_total)?;
    let n0 = boundaries[0];
    if increments.nrows() != p || increments.ncols() < n_total {
        return Err(Error::Dimension(format!(
            "increments must be {p}x(>= {n_total}), got {}x{}",
            increments.nrows(),
            increments.ncols()
        )));
    }

    let injected_gain = match &mode {
        GainMode::Injected { theta } => {
            if theta.state_dim() != p || theta.input_dim() != q {
                return Err(Error::Dimension(format!(
                    "injected parameter is for dimensions ({}, {}), plant has ({p}, {q})",
                    theta.state_dim(),
                    theta.input_dim()
                )));
            }
            Some(riccati::solve_care(theta, cost)?.gain().clone())
        }
        _ => None,
    };

    let x0 = DVector::zeros(p);
    let mut rec = TrajectoryRecorder::new(p, q, delta, n_total, &x0);
    let mut x = x0;
    let mut posterior = PosteriorState::default_prior(p, q);
    let mut episodes: Vec<EpisodeRecord> = Vec::with_capacity(boundaries.len());
    let mut failed = false;

    // Stabilization phase on [0, τ0).
    match &mode {
        GainMode::Injected { theta } => {
            let g = injected_gain.as_ref().expect("gain computed above");
            drive_feedback_segment(
                truth, cost, g, None, increments, 0, n0, delta, None, &mut x, &mut rec,
            );
            posterior.accumulate_span(rec.raw_states(), rec.raw_actions(), delta, 0, n0);
            episodes.push(EpisodeRecord {
                index: 0,
                start_time: 0.0,
                end_time: n0 as f64 * delta,
                sample: Some(theta.stacked()),
                posterior_mean: None,
                gain: g.clone(),
                redraws: 0,
            });
        }
        _ => {
            dither.warn_if_sparse(n0 as f64 * delta);
            let signal = DitherSignal::sample(dither.sigma(), dither.segments(), q, n0, rng)?;
            drive_feedback_segment(
                truth,
                cost,
                g_init,
                Some((&signal, 0)),
                increments,
                0,
                n0,
                delta,
                None,
                &mut x,
                &mut rec,
            );
            posterior.accumulate_span(rec.raw_states(), rec.raw_actions(), delta, 0, n0);
            episodes.push(EpisodeRecord {
                index: 0,
                start_time: 0.0,
                end_time: n0 as f64 * delta,
                sample: None,
                posterior_mean: None,
                gain: g_init.clone(),
                redraws: 0,
            });
        }
    }

    let threshold = recovery.blowup_factor * (1.0 + x.norm());

    for (i, window) in boundaries.windows(2).enumerate() {
        let (k_start, k_end) = (window[0], window[1]);
        let index = i + 1;
        let mut redraws = 0usize;
        let mut fallback = false;

        // Commit to the episode's parameter estimate and gain.
        let (mut gain, mut sample_rec, mean_rec) = match &mode {
            GainMode::Injected { theta } => (
                injected_gain.as_ref().expect("gain computed above").clone(),
                Some(theta.stacked()),
                None,
            ),
            GainMode::Sample => {
                let mean = posterior.posterior_mean_cov().ok().map(|(m, _)| m);
                match draw_admissible(&posterior, cost, p, q, recovery.max_redraws, &mut redraws, rng)
                {
                    Some((theta, g)) => (g, Some(theta), mean),
                    None => {
                        failed = true;
                        fallback = true;
                        (g_init.clone(), None, mean)
                    }
                }
            }
            GainMode::Mean { .. } => match posterior.posterior_mean_cov().ok().map(|(m, _)| m) {
                Some(mu) => match gain_for_estimate(&mu, p, q, cost) {
                    Some(g) => (g, Some(mu.clone()), Some(mu)),
                    None => {
                        redraws += 1;
                        fallback = true;
                        (g_init.clone(), Some(mu.clone()), Some(mu))
                    }
                },
                None => {
                    failed = true;
                    fallback = true;
                    (g_init.clone(), None, None)
                }
            },
        };

        // Per-step exploration noise for the mean-based baseline, laid out
        // as a dense excitation signal local to the episode.
        let ep_signal = match &mode {
            GainMode::Mean { exploration } => {
                let len = k_end - k_start;
                let mut values = DMatrix::zeros(q, len);
                for j in 0..len {
                    let t = (k_start + j) as f64 * delta;
                    let std = exploration.std_at(t);
                    for row in 0..q {
                        values[(row, j)] = std * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                Some(DitherSignal::from_values(values, len))
            }
            _ => None,
        };

        let mut k_cur = k_start;
        while k_cur < k_end {
            let abort = if fallback || matches!(mode, GainMode::Injected { .. }) {
                None
            } else {
                Some(threshold)
            };
            let out = drive_feedback_segment(
                truth,
                cost,
                &gain,
                ep_signal.as_ref().map(|s| (s, k_start)),
                increments,
                k_cur,
                k_end,
                delta,
                abort,
                &mut x,
                &mut rec,
            );
            let k_new = k_cur + out.steps_done;
            posterior.accumulate_span(rec.raw_states(), rec.raw_actions(), delta, k_cur, k_new);
            k_cur = k_new;
            if !out.aborted {
                continue;
            }
            redraws += 1;
            if redraws > recovery.max_redraws {
                failed = true;
                fallback = true;
                gain = g_init.clone();
                continue;
            }
            match &mode {
                GainMode::Sample => {
                    match draw_admissible(
                        &posterior,
                        cost,
                        p,
                        q,
                        recovery.max_redraws,
                        &mut redraws,
                        rng,
                    ) {
                        Some((theta, g)) => {
                            gain = g;
                            sample_rec = Some(theta);
                        }
                        None => {
                            failed = true;
                            fallback = true;
                            gain = g_init.clone();
                        }
                    }
                }
                GainMode::Mean { .. } => {
                    fallback = true;
                    gain = g_init.clone();
                }
                GainMode::Injected { .. } => unreachable!("injected runs never abort"),
            }
        }

        episodes.push(EpisodeRecord {
            index,
            start_time: k_start as f64 * delta,
            end_time: k_end as f64 * delta,
            sample: sample_rec,
            posterior_mean: mean_rec,
            gain,
            redraws,
        });
    }

    Ok(PolicyRun { log: rec.finish(), episodes, posterior, failed })
}

/// Map the episode end times onto the step grid, requiring strictly
/// increasing boundaries (every episode at least one step long). The last
/// boundary always lands on the final step of the horizon.
fn episode_step_grid(
    schedule: &EpisodeSchedule,
    horizon: f64,
    delta: f64,
    n_total: usize,
) -> Result<Vec<usize>> {
    let times = schedule.ends_until(horizon)?;
    let mut steps = Vec::with_capacity(times.len());
    let mut prev = 0usize;
    for &t in &times {
        let k = ((t / delta).round() as usize).min(n_total);
        if k <= prev {
            return Err(Error::Config(format!(
                "episode boundaries collapse on the step grid near t = {t}: \
                 episodes must span at least one step of length {delta}"
            )));
        }
        steps.push(k);
        prev = k;
        if k == n_total {
            break;
        }
    }
    debug_assert_eq!(steps.last().copied(), Some(n_total));
    Ok(steps)
}

pub(crate) fn check_stabilizing_gain(
    truth: &DriftParams,
    gain: &DMatrix<f64>,
    what: &str,
) -> Result<()> {
    let p = truth.state_dim();
    let q = truth.input_dim();
    if gain.nrows() != q || gain.ncols() != p {
        return Err(Error::Dimension(format!(
            "{what} must be {q}x{p}, got {}x{}",
            gain.nrows(),
            gain.ncols()
        )));
    }
    let d = truth.a() + truth.b() * gain;
    if !linalg::is_stable(&d) {
        let margin = -linalg::max_real_eigenvalue(&d);
        return Err(Error::Config(format!(
            "{what} does not stabilize the plant (closed-loop margin {margin:.3e})"
        )));
    }
    Ok(())
}

/// Regulator gain for a stacked estimate, or None when the estimate admits
/// no regulator (wrong shape, non-stabilizable, or a diverging solve).
fn gain_for_estimate(theta: &DMatrix<f64>, p: usize, q: usize, cost: &CostSpec) -> Option<DMatrix<f64>> {
    let est = DriftParams::from_stacked(theta, p, q).ok()?;
    let sol = riccati::solve_care(&est, cost).ok()?;
    Some(sol.gain().clone())
}

/// Draw posterior samples until one admits a regulator. Rejected draws are
/// charged to `redraws`; returns None once the budget is exhausted or the
/// posterior itself stops being usable.
fn draw_admissible<R: Rng + ?Sized>(
    posterior: &PosteriorState,
    cost: &CostSpec,
    p: usize,
    q: usize,
    max_redraws: usize,
    redraws: &mut usize,
    rng: &mut R,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    loop {
        let theta = posterior.sample_posterior(rng).ok()?;
        if let Some(gain) = gain_for_estimate(&theta, p, q, cost) {
            return Some((theta, gain));
        }
        *redraws += 1;
        if *redraws > max_redraws {
            return None;
        }
    }
}
