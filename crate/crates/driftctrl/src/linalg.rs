//! Shared dense linear-algebra helpers.
//!
//! Everything here operates on small matrices (p ≤ 8 state dimensions in all
//! scenarios), so dense O(n³) methods are used without apology.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest real part among the eigenvalues of `m`.
pub(crate) fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest real part among the eigenvalues of `m`.
pub(crate) fn min_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|l| l.re)
        .fold(f64::INFINITY, f64::min)
}

/// True iff every eigenvalue of `m` has strictly negative real part.
pub(crate) fn is_stable(m: &DMatrix<f64>) -> bool {
    max_real_eigenvalue(m) < 0.0
}

/// Quadratic form vᵀMv without allocating.
pub(crate) fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for j in 0..n {
        let vj = v[j];
        if vj == 0.0 {
            continue;
        }
        let col = m.column(j);
        let mut s = 0.0;
        for i in 0..n {
            s += v[i] * col[i];
        }
        acc += s * vj;
    }
    acc
}

/// Spectral norm (largest singular value).
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// (λ_min, λ_max) of a symmetric matrix.
pub(crate) fn symmetric_eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (lo, hi)
}

/// Replace `m` with its symmetric part (m + mᵀ)/2.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
}

/// Validate that `m` is symmetric (tolerance `tol` on the Frobenius norm of
/// the skew part) and positive definite (min eigenvalue > `min_eig`).
pub(crate) fn check_spd(m: &DMatrix<f64>, tol: f64, min_eig: f64, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let skew = (m - m.transpose()).norm();
    if skew > tol * (1.0 + m.norm()) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} is not symmetric (skew norm {skew:.3e})"
        )));
    }
    let (lo, _) = symmetric_eig_range(m);
    if lo <= min_eig {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has min eigenvalue {lo:.3e} <= {min_eig:.1e}"
        )));
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has no Cholesky factorization"
        )));
    }
    Ok(())
}

/// Condition number κ(Γ) of the eigenvector basis of `m`, computed by
/// shifted inverse iteration on each eigenvalue followed by an SVD of the
/// assembled (complex) basis.
///
/// Distinct start vectors per eigenvalue keep repeated-but-semisimple
/// eigenvalues (e.g. scalar multiples of I) from collapsing onto one
/// direction; genuinely defective matrices still produce a near-singular
/// basis and hence a huge condition number, which is the desired signal.
pub(crate) fn eigenbasis_condition(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!(
            "eigenbasis condition needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Empty("eigenbasis of a 0x0 matrix".into()));
    }
    let scale = m.norm().max(1.0);
    let eigs = m.complex_eigenvalues();
    let mc = m.map(|x| Complex::new(x, 0.0));
    let mut basis = DMatrix::<Complex<f64>>::zeros(n, n);

    for (j, lambda) in eigs.iter().enumerate() {
        let mut vec = start_vector(n, j);
        let mut shift_scale = 1e-12;
        // Shift slightly off the computed eigenvalue so the LU factorization
        // stays invertible; retry with a larger shift on exact breakdown.
        loop {
            let shifted = &mc
                - DMatrix::<Complex<f64>>::identity(n, n)
                    * (lambda + Complex::new(shift_scale * scale, shift_scale * scale));
            let lu = shifted.lu();
            let mut ok = true;
            for _ in 0..3 {
                match lu.solve(&vec) {
                    Some(next) => {
                        let norm = next.norm();
                        if !norm.is_finite() || norm == 0.0 {
                            ok = false;
                            break;
                        }
                        vec = next / Complex::new(norm, 0.0);
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                break;
            }
            shift_scale *= 100.0;
            if shift_scale > 1e-3 {
                return Err(Error::NearDefective { cond: f64::INFINITY });
            }
            vec = start_vector(n, j);
        }
        basis.set_column(j, &vec);
    }

    let sv = basis.svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0f64, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !smin.is_finite() || smin <= 0.0 || !smax.is_finite() {
        return Err(Error::NearDefective { cond: f64::INFINITY });
    }
    Ok(smax / smin)
}

/// Deterministic, index-dependent start vector for inverse iteration.
fn start_vector(n: usize, j: usize) -> DVector<Complex<f64>> {
    // Small multiplicative congruential stream; any fixed full-support
    // vector works, it only has to differ across j.
    let mut state = (j as u64).wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut v = DVector::<Complex<f64>>::zeros(n);
    for i in 0..n {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let re = 0.25 + ((state >> 33) as f64) / (u32::MAX as f64);
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let im = ((state >> 33) as f64) / (u32::MAX as f64) - 0.5;
        v[i] = Complex::new(re, im);
    }
    let norm = v.norm();
    v / Complex::new(norm, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn max_real_eigenvalue_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, -1.0, -2.0]));
        assert_relative_eq!(max_real_eigenvalue(&m), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_pair_real_part() {
        // Eigenvalues -0.3 ± 2i.
        let m = DMatrix::from_row_slice(2, 2, &[-0.3, 2.0, -2.0, -0.3]);
        assert_relative_eq!(max_real_eigenvalue(&m), -0.3, epsilon = 1e-10);
        assert!(is_stable(&m));
    }

    #[test]
    fn spectral_norm_matches_rank_one() {
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let v = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let m = &u * v.transpose();
        assert_relative_eq!(spectral_norm(&m), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenbasis_condition_orthogonal_is_one() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, 3.0]));
        let cond = eigenbasis_condition(&m).unwrap();
        assert_relative_eq!(cond, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn eigenbasis_condition_repeated_semisimple() {
        // 2I is diagonalizable with a perfectly conditioned basis even though
        // the eigenvalue is repeated.
        let m = DMatrix::<f64>::identity(3, 3) * 2.0;
        let cond = eigenbasis_condition(&m).unwrap();
        assert!(cond < 1e3, "cond = {cond}");
    }

    #[test]
    fn eigenbasis_condition_detects_jordan_block() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        match eigenbasis_condition(&m) {
            Ok(cond) => assert!(cond > 1e7, "Jordan block should look defective, cond = {cond}"),
            Err(Error::NearDefective { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn eigenbasis_condition_known_similarity() {
        // M = V Λ V⁻¹ with κ(V) known from its SVD. Columns are normalized
        // first because the computed basis uses unit-norm eigenvectors.
        let mut v =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 1.0, 0.4, 0.1, 0.0, 1.0]);
        for j in 0..3 {
            let norm = v.column(j).norm();
            let mut col = v.column_mut(j);
            col /= norm;
        }
        let lam = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.5, -4.0]));
        let m = &v * lam * v.clone().try_inverse().unwrap();
        let sv = v.clone().svd(false, false).singular_values;
        let expected = sv.max() / sv.min();
        let got = eigenbasis_condition(&m).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-6);
    }
}
