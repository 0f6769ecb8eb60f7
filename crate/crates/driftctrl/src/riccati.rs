//! Continuous-time Riccati and Lyapunov machinery.
//!
//! For the drift pair (A, B) and quadratic cost weights (Qx, Qu), the
//! optimal stationary policy is linear feedback u = Gx with
//!
//! ```text
//! G = −Qu⁻¹ Bᵀ K,    AᵀK + KA − K B Qu⁻¹ Bᵀ K + Qx = 0,
//! ```
//!
//! the algebraic Riccati equation being solved by Newton–Kleinman iteration
//! (each step one Lyapunov solve) from a stabilizing initial gain. The
//! surrounding sensitivity tools, directional derivatives of K and of BᵀK,
//! the cost of an arbitrary stabilizing feedback, and an eigenvalue
//! perturbation bound, quantify how estimation error in (A, B) degrades the
//! controller built from it.
//!
//! All solvers are dense and direct: state dimensions stay in single digits,
//! so the O(p⁶) Kronecker Lyapunov solve is both negligible and the easiest
//! thing to trust.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sim::{DriftParams, NoiseSpec};

/// Quadratic stage-cost weights (Qx, Qu), both symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    qx: DMatrix<f64>,
    qu: DMatrix<f64>,
}

impl CostSpec {
    pub fn new(qx: DMatrix<f64>, qu: DMatrix<f64>) -> Result<Self> {
        linalg::check_spd(&qx, 1e-10, 1e-12, "state cost weight")?;
        linalg::check_spd(&qu, 1e-10, 1e-12, "input cost weight")?;
        Ok(Self { qx, qu })
    }

    /// Scaled identity weights `qx_scale·I_p`, `qu_scale·I_q`.
    pub fn isotropic(p: usize, q: usize, qx_scale: f64, qu_scale: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(p, p) * qx_scale,
            DMatrix::identity(q, q) * qu_scale,
        )
    }

    pub fn state_dim(&self) -> usize {
        self.qx.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.qu.nrows()
    }

    pub fn qx(&self) -> &DMatrix<f64> {
        &self.qx
    }

    pub fn qu(&self) -> &DMatrix<f64> {
        &self.qu
    }

    /// Instantaneous cost xᵀQx·x + uᵀQu·u; allocation-free for the
    /// simulator's hot loop.
    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        linalg::quad_form(&self.qx, x) + linalg::quad_form(&self.qu, u)
    }
}

/// Output of [`solve_care`]: the Riccati solution with its derived policy
/// and diagnostics.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    value: DMatrix<f64>,
    gain: DMatrix<f64>,
    closed_loop: DMatrix<f64>,
    residual: f64,
    margin: f64,
    iterations: usize,
}

impl RiccatiSolution {
    /// CARE solution K (symmetric positive semidefinite).
    pub fn value(&self) -> &DMatrix<f64> {
        &self.value
    }

    /// Optimal feedback G = −Qu⁻¹BᵀK.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// Closed-loop matrix D = A + BG.
    pub fn closed_loop(&self) -> &DMatrix<f64> {
        &self.closed_loop
    }

    /// Frobenius norm of the Riccati residual at the returned K.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Stability margin ζ = −max Re λ(D) of the closed loop.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Newton iterations consumed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Average cost of the optimal policy under noise covariance C:
    /// tr(K C).
    pub fn optimal_average_cost(&self, noise: &NoiseSpec) -> f64 {
        (&self.value * noise.covariance()).trace()
    }
}

/// Solve the Lyapunov equation DᵀP + PD + Q = 0 for stable D.
///
/// Vectorizes to (I⊗Dᵀ + Dᵀ⊗I)vec(P) = −vec(Q) and solves by dense LU,
/// then validates the residual against 10⁻¹⁰·(1 + ‖Q‖).
pub fn solve_lyapunov(d: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if d.nrows() != d.ncols() || q.nrows() != q.ncols() || d.nrows() != q.nrows() {
        return Err(Error::Dimension(format!(
            "Lyapunov solve needs square D and Q of equal size, got {}x{} and {}x{}",
            d.nrows(),
            d.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let skew = (q - q.transpose()).norm();
    if skew > 1e-10 * (1.0 + q.norm()) {
        return Err(Error::Domain(format!(
            "Lyapunov right-hand side is not symmetric (skew norm {skew:.3e})"
        )));
    }
    let margin = stability_margin(d);
    if margin <= 0.0 {
        return Err(Error::NotStable { margin });
    }
    let p = lyapunov_raw(d, q)?;
    let residual = (d.transpose() * &p + &p * d + q).norm();
    let limit = 1e-10 * (1.0 + q.norm());
    if residual > limit {
        return Err(Error::IllConditioned {
            cond: residual / limit,
            limit: 1.0,
        });
    }
    Ok(p)
}

/// Lyapunov solve without stability or residual validation; the Newton
/// iteration calls this with closed loops it has already verified.
pub(crate) fn lyapunov_raw(d: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = d.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let dt = d.transpose();
    let op = ident.kronecker(&dt) + dt.kronecker(&ident);
    let rhs = DVector::from_column_slice(q.as_slice()) * -1.0;
    let vec_p = op.lu().solve(&rhs).ok_or(Error::NotStable {
        margin: stability_margin(d),
    })?;
    let mut p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    linalg::symmetrize(&mut p);
    Ok(p)
}

/// Stability margin ζ = −max Re λ(D); positive iff D is stable.
pub fn stability_margin(d: &DMatrix<f64>) -> f64 {
    assert_eq!(d.nrows(), d.ncols(), "stability margin needs a square matrix");
    -linalg::max_real_eigenvalue(d)
}

const NEWTON_CAP: usize = 100;
const CARE_RESIDUAL_LIMIT: f64 = 1e-8;

/// Solve the continuous-time algebraic Riccati equation for `drift` and
/// `cost` by Newton–Kleinman iteration.
///
/// The initial stabilizing gain comes from an eigenvalue-shifting
/// construction: with β exceeding the most negative real part of λ(A),
/// the solution P of (A+βI)P + P(A+βI)ᵀ = 2BBᵀ yields G₀ = −BᵀP⁻¹ with
/// A + BG₀ stable whenever (A, B) is controllable. Iteration then drives
/// the step norm to the floor of double precision, so downstream
/// finite-difference checks see a fully converged K.
///
/// The returned residual is at most 10⁻⁸ for well-scaled problems; for
/// solutions of extreme norm (nearly uncontrollable pairs) the guarantee
/// weakens to 10⁻¹⁰·(1 + ‖K‖), the attainable floor in double precision.
pub fn solve_care(drift: &DriftParams, cost: &CostSpec) -> Result<RiccatiSolution> {
    crate::sim::check_cost_dims(drift, cost)?;
    let a = drift.a();
    let b = drift.b();

    let qu_chol = cost
        .qu
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("input cost weight".into()))?;
    let next_gain = |k: &DMatrix<f64>| -> DMatrix<f64> {
        let mut g = qu_chol.solve(&(b.transpose() * k));
        g.neg_mut();
        g
    };

    let mut gain = initial_stabilizing_gain(drift)?;
    let mut k_prev: Option<DMatrix<f64>> = None;
    let mut prev_step = f64::INFINITY;
    let mut last_residual = f64::INFINITY;

    for iter in 1..=NEWTON_CAP {
        let d = a + b * &gain;
        if !linalg::is_stable(&d) {
            return Err(Error::NotStabilizable(format!(
                "Newton iteration lost closed-loop stability at step {iter}"
            )));
        }
        let mut q_eff = &cost.qx + gain.transpose() * &cost.qu * &gain;
        linalg::symmetrize(&mut q_eff);
        let mut k = lyapunov_raw(&d, &q_eff)?;
        linalg::symmetrize(&mut k);

        let g_next = next_gain(&k);
        let residual_mat = a.transpose() * &k + &k * a + &cost.qx + &k * (b * &g_next);
        last_residual = residual_mat.norm();

        let step = k_prev
            .as_ref()
            .map(|prev| (&k - prev).norm())
            .unwrap_or(f64::INFINITY);
        let scale = 1.0 + k.norm();
        // 1e-8 absolute for well-scaled problems; solutions of extreme norm
        // (near-uncontrollable pairs) only reach a proportional floor.
        let residual_limit = CARE_RESIDUAL_LIMIT.max(1e-10 * scale);
        // Converge to the double-precision floor; accept stagnation only
        // once the iterate already satisfies the residual contract.
        let at_floor = step <= 1e-12 * scale;
        let stagnated =
            step <= 1e-6 * scale && step >= prev_step && last_residual <= residual_limit;
        if at_floor || stagnated {
            if last_residual > residual_limit {
                return Err(Error::RiccatiDivergence {
                    residual: last_residual,
                    iterations: iter,
                });
            }
            let closed_loop = a + b * &g_next;
            let margin = stability_margin(&closed_loop);
            if margin <= 0.0 {
                return Err(Error::NotStable { margin });
            }
            let (min_eig, _) = linalg::symmetric_eig_range(&k);
            if min_eig < -1e-8 * scale {
                return Err(Error::NotPositiveDefinite(format!(
                    "Riccati solution has eigenvalue {min_eig:.3e}"
                )));
            }
            return Ok(RiccatiSolution {
                value: k,
                gain: g_next,
                closed_loop,
                residual: last_residual,
                margin,
                iterations: iter,
            });
        }
        k_prev = Some(k);
        prev_step = step;
        gain = g_next;
    }
    Err(Error::RiccatiDivergence {
        residual: last_residual,
        iterations: NEWTON_CAP,
    })
}

/// Gain G₀ with A + BG₀ stable, or an error when none is found.
fn initial_stabilizing_gain(drift: &DriftParams) -> Result<DMatrix<f64>> {
    let a = drift.a();
    let b = drift.b();
    let p = drift.state_dim();
    let q = drift.input_dim();
    if linalg::is_stable(a) {
        return Ok(DMatrix::zeros(q, p));
    }
    let beta = 1.0 + (-linalg::min_real_eigenvalue(a)).max(0.0);
    let shifted = -(a + DMatrix::identity(p, p) * beta);
    let bbt2 = b * b.transpose() * 2.0;
    let gram = lyapunov_raw(&shifted.transpose(), &bbt2).map_err(|_| {
        Error::NotStabilizable("shifted Lyapunov equation for the initial gain is singular".into())
    })?;
    let solve_gain = |g: &DMatrix<f64>| -> Option<DMatrix<f64>> {
        let chol = g.clone().cholesky()?;
        let mut gain = chol.solve(b).transpose();
        gain.neg_mut();
        Some(gain)
    };
    let candidate = solve_gain(&gram).or_else(|| {
        // Retry with a whisper of regularization: rescues numerically
        // semidefinite Gramians without changing well-posed cases.
        let bump = DMatrix::identity(p, p) * (1e-10 * (1.0 + gram.norm()));
        solve_gain(&(&gram + bump))
    });
    match candidate {
        Some(gain) if linalg::is_stable(&(a + b * &gain)) => Ok(gain),
        _ => Err(Error::NotStabilizable(
            "no stabilizing initial gain found; the pair (A, B) may not be stabilizable".into(),
        )),
    }
}

/// Largest possible upward shift of max Re λ when `m` is perturbed to
/// `m + e`: max(1, ‖E‖₂·κ(Γ)) with Γ an eigenvector basis of `m`.
///
/// The bound is sound for any diagonalizable `m` (the Bauer–Fike theorem
/// caps the shift at κ(Γ)‖E‖₂); near-defective matrices, where κ(Γ)
/// exceeds 10⁸, are rejected since the bound degenerates there.
pub fn eig_perturbation_bound(m: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() || e.nrows() != e.ncols() || m.nrows() != e.nrows() {
        return Err(Error::Dimension(format!(
            "perturbation bound needs square M and E of equal size, got {}x{} and {}x{}",
            m.nrows(),
            m.ncols(),
            e.nrows(),
            e.ncols()
        )));
    }
    let cond = linalg::eigenbasis_condition(m)?;
    if cond >= 1e8 {
        return Err(Error::NearDefective { cond });
    }
    Ok((linalg::spectral_norm(e) * cond).max(1.0))
}

/// Condition number κ(Γ) of an eigenvector basis of `m`: how trustworthy
/// [`eig_perturbation_bound`] is for this matrix. Small values (tens)
/// mean a well-separated spectrum; values past 10⁸ are rejected as
/// near-defective.
pub fn eigenbasis_condition(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigenbasis conditioning needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    linalg::eigenbasis_condition(m)
}

/// Directional derivative of the Riccati solution K at `drift` in the
/// parameter direction (X, Y) for A and B respectively.
///
/// With M = X + YG, dK solves Dᵀ·dK + dK·D + (KM + MᵀK) = 0, i.e. the
/// integral ∫₀^∞ e^{Dᵀt}(KM + MᵀK)e^{Dt} dt along the closed loop.
pub fn riccati_directional_derivative(
    drift: &DriftParams,
    cost: &CostSpec,
    direction_a: &DMatrix<f64>,
    direction_b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let sol = solve_care(drift, cost)?;
    sol.directional_derivative(direction_a, direction_b)
}

/// Directional derivative of BᵀK at `drift` in direction (X, Y):
/// YᵀK + Bᵀ·dK. Zero exactly on directions tangent to the manifold of
/// parameters sharing this optimal policy.
pub fn feedback_directional_derivative(
    drift: &DriftParams,
    cost: &CostSpec,
    direction_a: &DMatrix<f64>,
    direction_b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let sol = solve_care(drift, cost)?;
    let dk = sol.directional_derivative(direction_a, direction_b)?;
    Ok(direction_b.transpose() * &sol.value + drift.b().transpose() * dk)
}

impl RiccatiSolution {
    /// See [`riccati_directional_derivative`]; reuses this solution instead
    /// of solving the Riccati equation again.
    pub fn directional_derivative(
        &self,
        direction_a: &DMatrix<f64>,
        direction_b: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let p = self.value.nrows();
        let q = self.gain.nrows();
        if direction_a.nrows() != p
            || direction_a.ncols() != p
            || direction_b.nrows() != p
            || direction_b.ncols() != q
        {
            return Err(Error::Dimension(format!(
                "directions must be {p}x{p} and {p}x{q}, got {}x{} and {}x{}",
                direction_a.nrows(),
                direction_a.ncols(),
                direction_b.nrows(),
                direction_b.ncols()
            )));
        }
        let m = direction_a + direction_b * &self.gain;
        let km = &self.value * m;
        let rhs = &km + km.transpose();
        let mut dk = lyapunov_raw(&self.closed_loop, &rhs)?;
        linalg::symmetrize(&mut dk);
        Ok(dk)
    }
}

/// Stationary cost matrix of the (possibly suboptimal) feedback `gain`:
/// the solution P of (A+BG)ᵀP + P(A+BG) + Qx + GᵀQuG = 0.
///
/// The average cost of the policy u = Gx is tr(P C); P − K is positive
/// semidefinite, vanishing exactly at the optimal gain.
pub fn cost_of_feedback(
    drift: &DriftParams,
    cost: &CostSpec,
    gain: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    crate::sim::check_cost_dims(drift, cost)?;
    let p = drift.state_dim();
    let q = drift.input_dim();
    if gain.nrows() != q || gain.ncols() != p {
        return Err(Error::Dimension(format!(
            "gain must be {q}x{p}, got {}x{}",
            gain.nrows(),
            gain.ncols()
        )));
    }
    let d = drift.a() + drift.b() * gain;
    let margin = stability_margin(&d);
    if margin <= 0.0 {
        return Err(Error::NotStable { margin });
    }
    let mut q_eff = cost.qx() + gain.transpose() * cost.qu() * gain;
    linalg::symmetrize(&mut q_eff);
    let mut p_mat = lyapunov_raw(&d, &q_eff)?;
    linalg::symmetrize(&mut p_mat);
    Ok(p_mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn drift(a: DMatrix<f64>, b: DMatrix<f64>) -> DriftParams {
        DriftParams::new(a, b).unwrap()
    }

    fn scalar_drift(a: f64, b: f64) -> DriftParams {
        drift(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, b))
    }

    fn unit_cost(p: usize, q: usize) -> CostSpec {
        CostSpec::isotropic(p, q, 1.0, 1.0).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_stable(rng: &mut ChaCha12Rng, n: usize, margin: f64) -> DMatrix<f64> {
        let raw = random_matrix(rng, n, n);
        let shift = linalg::max_real_eigenvalue(&raw) + margin;
        raw - DMatrix::identity(n, n) * shift
    }

    fn random_spd(rng: &mut ChaCha12Rng, n: usize) -> DMatrix<f64> {
        let r = random_matrix(rng, n, n);
        &r * r.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn cost_spec_validation() {
        assert!(CostSpec::isotropic(2, 1, 1.0, 0.1).is_ok());
        assert!(CostSpec::isotropic(2, 1, -1.0, 0.1).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(CostSpec::new(asym, DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn stage_cost_arithmetic() {
        let cost = CostSpec::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            DMatrix::from_element(1, 1, 3.0),
        )
        .unwrap();
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let u = DVector::from_vec(vec![2.0]);
        assert_relative_eq!(cost.stage_cost(&x, &u), 15.0, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_half_identity_returns_q() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let q = random_spd(&mut rng, 3);
        let d = DMatrix::identity(3, 3) * -0.5;
        let p = solve_lyapunov(&d, &q).unwrap();
        assert_relative_eq!(p, q, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_decoupled_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -3.0]));
        let p = solve_lyapunov(&d, &DMatrix::identity(2, 2)).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0 / 6.0]));
        assert_relative_eq!(p, expected, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, -1.0]));
        assert!(matches!(
            solve_lyapunov(&d, &DMatrix::identity(2, 2)),
            Err(Error::NotStable { .. })
        ));
    }

    #[test]
    fn lyapunov_random_residuals() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..20 {
            let d = random_stable(&mut rng, 6, 0.4);
            let q = random_spd(&mut rng, 6);
            let p = solve_lyapunov(&d, &q).unwrap();
            let residual = (d.transpose() * &p + &p * &d + &q).norm();
            assert!(residual <= 1e-10 * (1.0 + q.norm()), "residual {residual}");
            assert_relative_eq!(p, p.transpose(), epsilon = 1e-12);
        }
    }

    #[test]
    fn margin_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        assert_relative_eq!(stability_margin(&d), 1.0, epsilon = 1e-12);
        // Block-diagonal realization of eigenvalues −0.3 ± 2i and −5.
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[-0.3, 2.0, 0.0, -2.0, -0.3, 0.0, 0.0, 0.0, -5.0],
        );
        assert_relative_eq!(stability_margin(&m), 0.3, epsilon = 1e-10);
    }

    #[test]
    fn care_scalar_closed_form() {
        let sol = solve_care(&scalar_drift(0.0, 1.0), &unit_cost(1, 1)).unwrap();
        assert_relative_eq!(sol.value()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.gain()[(0, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.closed_loop()[(0, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.margin(), 1.0, epsilon = 1e-12);
        assert!(sol.residual() <= 1e-8);
    }

    #[test]
    fn care_decoupled_closed_form() {
        let a = DMatrix::identity(2, 2) * -1.0;
        let b = DMatrix::identity(2, 2);
        let sol = solve_care(&drift(a, b), &unit_cost(2, 2)).unwrap();
        let expected = DMatrix::identity(2, 2) * (2f64.sqrt() - 1.0);
        assert_relative_eq!(sol.value(), &expected, epsilon = 1e-12);
        assert_relative_eq!(sol.margin(), 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn care_average_cost_is_trace() {
        let sol = solve_care(&scalar_drift(0.0, 1.0), &unit_cost(1, 1)).unwrap();
        let noise = NoiseSpec::isotropic(1, 0.25).unwrap();
        assert_relative_eq!(sol.optimal_average_cost(&noise), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn care_gain_invariant_under_cost_scaling() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..3 {
            let a = random_matrix(&mut rng, 3, 3);
            let b = random_matrix(&mut rng, 3, 2);
            let sys = drift(a, b);
            let base = solve_care(&sys, &unit_cost(3, 2)).unwrap();
            let scaled_cost = CostSpec::isotropic(3, 2, 3.7, 3.7).unwrap();
            let scaled = solve_care(&sys, &scaled_cost).unwrap();
            let k_rel = (scaled.value() - base.value() * 3.7).norm() / base.value().norm();
            assert!(k_rel <= 1e-9, "K scaling deviation {k_rel}");
            let g_dev = (scaled.gain() - base.gain()).norm();
            assert!(g_dev <= 1e-9 * (1.0 + base.gain().norm()), "gain deviation {g_dev}");
        }
    }

    #[test]
    fn care_handles_unstable_open_loop() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4, 4) + DMatrix::identity(4, 4) * 0.5;
            let b = random_matrix(&mut rng, 4, 2);
            let sys = drift(a, b);
            let sol = solve_care(&sys, &CostSpec::isotropic(4, 2, 1.0, 0.1).unwrap()).unwrap();
            assert!(sol.residual() <= 1e-8);
            assert!(sol.margin() > 0.0);
            let (min_eig, _) = linalg::symmetric_eig_range(sol.value());
            assert!(min_eig >= -1e-9 * (1.0 + sol.value().norm()));
        }
    }

    #[test]
    fn care_rejects_unstabilizable_pair() {
        // Unstable mode with no input authority: A = diag(1, -1), B = e₂.
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!(solve_care(&drift(a, b), &unit_cost(2, 1)).is_err());
    }

    #[test]
    fn perturbation_bound_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let e = DMatrix::identity(2, 2) * 0.1;
        let bound = eig_perturbation_bound(&m, &e).unwrap();
        assert_relative_eq!(bound, 1.0, epsilon = 1e-9);

        // Normal matrix: bound reduces to max(1, ‖E‖₂).
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let r = random_matrix(&mut rng, 3, 3);
        let sym = (&r + r.transpose()) * 0.5;
        let e_big = random_matrix(&mut rng, 3, 3) * 2.0;
        let bound = eig_perturbation_bound(&sym, &e_big).unwrap();
        let expected = linalg::spectral_norm(&e_big).max(1.0);
        assert_relative_eq!(bound, expected, max_relative = 1e-6);
    }

    #[test]
    fn perturbation_bound_dominates_actual_shift() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let mut checked = 0;
        while checked < 50 {
            let m = random_matrix(&mut rng, 4, 4);
            let e = random_matrix(&mut rng, 4, 4) * rng.gen_range(0.01..2.0);
            let bound = match eig_perturbation_bound(&m, &e) {
                Ok(b) => b,
                Err(_) => continue,
            };
            let shift =
                linalg::max_real_eigenvalue(&(&m + &e)) - linalg::max_real_eigenvalue(&m);
            assert!(
                bound >= shift - 1e-9,
                "bound {bound} below actual shift {shift}"
            );
            checked += 1;
        }
    }

    #[test]
    fn perturbation_bound_rejects_defective() {
        let jordan = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!(eig_perturbation_bound(&jordan, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn directional_derivative_scalar_example() {
        let sys = scalar_drift(0.0, 1.0);
        let cost = unit_cost(1, 1);
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DMatrix::zeros(1, 1);
        let dk = riccati_directional_derivative(&sys, &cost, &x, &y).unwrap();
        assert_relative_eq!(dk[(0, 0)], 1.0, epsilon = 1e-12);
        let dbk = feedback_directional_derivative(&sys, &cost, &x, &y).unwrap();
        assert_relative_eq!(dbk[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn directional_derivative_zero_direction() {
        let sys = scalar_drift(0.0, 1.0);
        let cost = unit_cost(1, 1);
        let z = DMatrix::zeros(1, 1);
        assert_eq!(
            riccati_directional_derivative(&sys, &cost, &z, &z).unwrap()[(0, 0)],
            0.0
        );
        assert_eq!(
            feedback_directional_derivative(&sys, &cost, &z, &z).unwrap()[(0, 0)],
            0.0
        );
    }

    fn fd_check(sys: &DriftParams, cost: &CostSpec, rng: &mut ChaCha12Rng) {
        let p = sys.state_dim();
        let q = sys.input_dim();
        let x = random_matrix(rng, p, p);
        let y = random_matrix(rng, p, q);
        let scale = (x.norm().powi(2) + y.norm().powi(2)).sqrt();
        let x = x / scale;
        let y = y / scale;
        let eps = 1e-6;
        let shift = |s: f64| {
            let a = sys.a() + &x * s;
            let b = sys.b() + &y * s;
            solve_care(&drift(a, b), cost).unwrap()
        };
        let hi = shift(eps);
        let lo = shift(-eps);
        let fd_k = (hi.value() - lo.value()) / (2.0 * eps);
        let dk = riccati_directional_derivative(sys, cost, &x, &y).unwrap();
        let rel = (&fd_k - &dk).norm() / dk.norm();
        assert!(rel <= 1e-4, "K derivative relative error {rel}");
        let fd_bk = (sys.b() + &y * eps).transpose() * hi.value();
        let fd_bk = (fd_bk - (sys.b() - &y * eps).transpose() * lo.value()) / (2.0 * eps);
        let dbk = feedback_directional_derivative(sys, cost, &x, &y).unwrap();
        let rel = (&fd_bk - &dbk).norm() / dbk.norm();
        assert!(rel <= 1e-4, "BᵀK derivative relative error {rel}");
    }

    #[test]
    fn directional_derivative_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 2, 1);
        let sys = drift(a, b);
        let cost = unit_cost(2, 1);
        for _ in 0..3 {
            fd_check(&sys, &cost, &mut rng);
        }
    }

    #[test]
    fn riccati_lipschitz_bound_holds() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 3, 1);
        let sys = drift(a, b);
        let cost = unit_cost(3, 1);
        let base = solve_care(&sys, &cost).unwrap();
        // Estimate the local Lipschitz constant from directional derivatives.
        let mut lip = 0.0f64;
        for _ in 0..20 {
            let x = random_matrix(&mut rng, 3, 3);
            let y = random_matrix(&mut rng, 3, 1);
            let scale = (x.norm().powi(2) + y.norm().powi(2)).sqrt();
            let dk = base
                .directional_derivative(&(&x / scale), &(&y / scale))
                .unwrap();
            lip = lip.max(dk.norm());
        }
        for _ in 0..100 {
            let dx = random_matrix(&mut rng, 3, 3);
            let dy = random_matrix(&mut rng, 3, 1);
            let scale = (dx.norm().powi(2) + dy.norm().powi(2)).sqrt() / 1e-2;
            let perturbed = drift(sys.a() + dx / scale, sys.b() + dy / scale);
            let sol = solve_care(&perturbed, &cost).unwrap();
            let diff = (sol.value() - base.value()).norm();
            assert!(
                diff <= 2.0 * lip * 1e-2,
                "K moved {diff} against Lipschitz budget {}",
                2.0 * lip * 1e-2
            );
        }
    }

    #[test]
    fn cost_of_feedback_examples() {
        let sys = scalar_drift(0.0, 1.0);
        let cost = unit_cost(1, 1);
        let p = cost_of_feedback(&sys, &cost, &DMatrix::from_element(1, 1, -2.0)).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.25, epsilon = 1e-12);

        let sol = solve_care(&sys, &cost).unwrap();
        let p_opt = cost_of_feedback(&sys, &cost, sol.gain()).unwrap();
        assert!((p_opt[(0, 0)] - sol.value()[(0, 0)]).abs() <= 1e-8);

        assert!(matches!(
            cost_of_feedback(&sys, &cost, &DMatrix::from_element(1, 1, 0.5)),
            Err(Error::NotStable { .. })
        ));
    }

    #[test]
    fn cost_of_feedback_dominates_optimum() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 2, 1);
        let sys = drift(a, b);
        let cost = unit_cost(2, 1);
        let sol = solve_care(&sys, &cost).unwrap();
        let mut tried = 0;
        while tried < 20 {
            let g = sol.gain() + random_matrix(&mut rng, 1, 2) * 0.5;
            let Ok(p) = cost_of_feedback(&sys, &cost, &g) else {
                continue;
            };
            let (min_eig, _) = linalg::symmetric_eig_range(&(p - sol.value()));
            assert!(min_eig >= -1e-8, "dominance violated: {min_eig}");
            tried += 1;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

        #[test]
        fn prop_lyapunov_solves_and_preserves_symmetry(seed in 0u64..1_000_000, n in 1usize..=5) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let d = random_stable(&mut rng, n, 0.3);
            let q = random_spd(&mut rng, n);
            let p = solve_lyapunov(&d, &q).unwrap();
            let residual = (d.transpose() * &p + &p * &d + &q).norm();
            prop_assert!(residual <= 1e-10 * (1.0 + q.norm()));
            let (min_eig, _) = linalg::symmetric_eig_range(&p);
            prop_assert!(min_eig > 0.0, "stationary solution must be positive definite");
        }

        #[test]
        fn prop_care_postconditions(seed in 0u64..1_000_000, p_dim in 1usize..=4, q_dim in 1usize..=2) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, p_dim, p_dim);
            let b = random_matrix(&mut rng, p_dim, q_dim);
            let sys = drift(a, b);
            let cost = CostSpec::isotropic(p_dim, q_dim, 1.0, 0.5).unwrap();
            let sol = solve_care(&sys, &cost).unwrap();
            prop_assert!(sol.residual() <= 1e-8f64.max(1e-10 * (1.0 + sol.value().norm())));
            prop_assert!(sol.margin() > 0.0);
            prop_assert!((sol.value() - sol.value().transpose()).norm() <= 1e-10 * (1.0 + sol.value().norm()));
            let (min_eig, _) = linalg::symmetric_eig_range(sol.value());
            prop_assert!(min_eig >= -1e-9 * (1.0 + sol.value().norm()));
        }
    }
}
