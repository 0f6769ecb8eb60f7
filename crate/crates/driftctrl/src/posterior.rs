//! Conjugate Gaussian identification of the drift parameter.
//!
//! The unknown θ = [A, B]ᵀ ∈ ℝ^{(p+q)×p} enters the dynamics through
//! dx = θᵀz dt + dW with regressor z = [x; u]. Continuously observed data
//! is summarized by the information pair
//!
//! ```text
//! Σ_τ = Σ₀ + ∫₀^τ z_s z_sᵀ ds,    S_τ = Σ₀μ₀ + ∫₀^τ z_s dx_sᵀ,
//! ```
//!
//! giving the matrix-normal posterior with mean μ_τ = Σ_τ⁻¹S_τ and column
//! covariance Σ_τ⁻¹. Integrals are discretized as left-endpoint (Itô,
//! non-anticipating) sums; right-endpoint sums would correlate the
//! regressor with the noise increment and bias the estimate.

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::sim::TrajectoryLog;

/// Condition-number ceiling for the information matrix.
pub const PRECISION_CONDITION_LIMIT: f64 = 1e14;

/// Accumulated Gaussian belief over the stacked drift parameter.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    state_dim: usize,
    input_dim: usize,
    precision: DMatrix<f64>,
    cross: DMatrix<f64>,
    prior_precision: DMatrix<f64>,
    prior_mean: DMatrix<f64>,
    elapsed: f64,
}

impl PosteriorState {
    /// Belief with the flat default prior μ₀ = 0, Σ₀ = I.
    pub fn default_prior(p: usize, q: usize) -> Self {
        Self::new(p, q, None, None).expect("default prior is always valid")
    }

    /// Belief with optional custom prior mean ((p+q)×p) and precision
    /// (SPD (p+q)×(p+q)); omitted pieces fall back to the defaults.
    pub fn new(
        p: usize,
        q: usize,
        prior_mean: Option<DMatrix<f64>>,
        prior_precision: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::Dimension("state and input dimensions must be >= 1".into()));
        }
        let rows = p + q;
        let prior_precision = match prior_precision {
            Some(s0) => {
                linalg::check_spd(&s0, 1e-10, 1e-12, "prior precision")?;
                if s0.nrows() != rows {
                    return Err(Error::Dimension(format!(
                        "prior precision must be {rows}x{rows}, got {}x{}",
                        s0.nrows(),
                        s0.ncols()
                    )));
                }
                s0
            }
            None => DMatrix::identity(rows, rows),
        };
        let prior_mean = match prior_mean {
            Some(m0) => {
                if m0.nrows() != rows || m0.ncols() != p {
                    return Err(Error::Dimension(format!(
                        "prior mean must be {rows}x{p}, got {}x{}",
                        m0.nrows(),
                        m0.ncols()
                    )));
                }
                m0
            }
            None => DMatrix::zeros(rows, p),
        };
        let cross = &prior_precision * &prior_mean;
        Ok(Self {
            state_dim: p,
            input_dim: q,
            precision: prior_precision.clone(),
            cross,
            prior_precision,
            prior_mean,
            elapsed: 0.0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Rows of the stacked parameter, p + q.
    pub fn param_rows(&self) -> usize {
        self.state_dim + self.input_dim
    }

    /// Information matrix Σ_τ.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// Accumulated cross moment S_τ (including the prior term Σ₀μ₀).
    pub fn cross_moment(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn prior_precision(&self) -> &DMatrix<f64> {
        &self.prior_precision
    }

    pub fn prior_mean(&self) -> &DMatrix<f64> {
        &self.prior_mean
    }

    /// Total observation time τ behind this belief.
    pub fn elapsed_time(&self) -> f64 {
        self.elapsed
    }

    /// Fold in one observed increment: regressor z = [x; u] held over a
    /// window of length Δ with state change dx.
    pub fn accumulate(&mut self, z: &DVector<f64>, dx: &DVector<f64>, delta: f64) -> Result<()> {
        if z.len() != self.param_rows() || dx.len() != self.state_dim {
            return Err(Error::Dimension(format!(
                "regressor/increment must have lengths {}/{}, got {}/{}",
                self.param_rows(),
                self.state_dim,
                z.len(),
                dx.len()
            )));
        }
        if delta <= 0.0 {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        self.precision.ger(delta, z, z, 1.0);
        self.cross.ger(1.0, z, dx, 1.0);
        self.elapsed += delta;
        Ok(())
    }

    /// Fold in a whole logged trajectory, step by step in order, using the
    /// left-endpoint regressor of each window.
    pub fn accumulate_trajectory(&mut self, log: &TrajectoryLog) -> Result<()> {
        let p = self.state_dim;
        let q = self.input_dim;
        if log.states().nrows() != p || log.actions().nrows() != q {
            return Err(Error::Dimension(format!(
                "trajectory dimensions ({}, {}) do not match the belief ({p}, {q})",
                log.states().nrows(),
                log.actions().nrows()
            )));
        }
        self.accumulate_span(
            log.states().as_slice(),
            log.actions().as_slice(),
            log.delta(),
            0,
            log.n_steps(),
        );
        Ok(())
    }

    /// Fold in steps `[from_step, to_step)` of a run held as raw
    /// column-major buffers (`p` state entries per column, `q` action
    /// entries per column, states having one extra leading column). Performs
    /// the same floating-point operations in the same order as
    /// [`accumulate`](Self::accumulate) per step, so chunked and one-pass
    /// accumulation agree bit for bit.
    pub(crate) fn accumulate_span(
        &mut self,
        states: &[f64],
        actions: &[f64],
        delta: f64,
        from_step: usize,
        to_step: usize,
    ) {
        let p = self.state_dim;
        let q = self.input_dim;
        debug_assert!(states.len() >= (to_step + 1) * p);
        debug_assert!(actions.len() >= to_step * q);
        let mut z = DVector::zeros(p + q);
        let mut dx = DVector::zeros(p);
        for k in from_step..to_step {
            let cur = &states[k * p..(k + 1) * p];
            let next = &states[(k + 1) * p..(k + 2) * p];
            let act = &actions[k * q..(k + 1) * q];
            for i in 0..p {
                z[i] = cur[i];
                dx[i] = next[i] - cur[i];
            }
            for j in 0..q {
                z[p + j] = act[j];
            }
            self.precision.ger(delta, &z, &z, 1.0);
            self.cross.ger(1.0, &z, &dx, 1.0);
        }
        self.elapsed += (to_step - from_step) as f64 * delta;
    }

    /// Posterior mean μ = Σ⁻¹S (by Cholesky solve) and the information
    /// matrix Σ. Errors when Σ's condition number exceeds 10¹⁴.
    pub fn posterior_mean_cov(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let chol = self.checked_factor()?;
        Ok((chol.solve(&self.cross), self.precision.clone()))
    }

    /// Draw θ̂ = μ + L⁻ᵀZ with LLᵀ = Σ and Z i.i.d. standard normal:
    /// columns are independent N(μ_col, Σ⁻¹).
    pub fn sample_posterior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DMatrix<f64>> {
        let chol = self.checked_factor()?;
        let mu = chol.solve(&self.cross);
        let z = DMatrix::from_fn(self.param_rows(), self.state_dim, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let spread = chol
            .l()
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or_else(|| Error::NotPositiveDefinite("posterior factor is singular".into()))?;
        Ok(mu + spread)
    }

    pub(crate) fn checked_factor(&self) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let (lo, hi) = linalg::symmetric_eig_range(&self.precision);
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if cond > PRECISION_CONDITION_LIMIT {
            return Err(Error::IllConditioned {
                cond,
                limit: PRECISION_CONDITION_LIMIT,
            });
        }
        self.precision
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("information matrix".into()))
    }
}

/// Write z = [x; u] into `out`.
pub(crate) fn stack_regressor(
    x: DVectorView<'_, f64>,
    u: DVectorView<'_, f64>,
    out: &mut DVector<f64>,
) {
    let p = x.len();
    for i in 0..p {
        out[i] = x[i];
    }
    for j in 0..u.len() {
        out[p + j] = u[j];
    }
}

/// Estimation error ‖θ̂ − θ₀‖₂ (spectral norm of the difference).
pub fn estimation_error(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(Error::Dimension(format!(
            "estimate is {}x{}, truth is {}x{}",
            estimate.nrows(),
            estimate.ncols(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    Ok(linalg::spectral_norm(&(estimate - truth)))
}
