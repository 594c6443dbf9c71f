//! Dense least squares via Householder QR with column pivoting.
//!
//! Small problems only: energy-model fits have a handful of columns
//! (instruction classes) and at most a few hundred rows, so an O(m·n²)
//! dense factorization is plenty. Column pivoting gives a rank decision
//! and names the dependent columns, which the model fit reports back to
//! the user.

use crate::real::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LstsqError {
    #[error("empty system: no rows")]
    Empty,
    #[error("rank-deficient system: rank {rank}, dependent columns {dependent_columns:?}")]
    RankDeficient {
        rank: usize,
        /// Indices of columns that are linear combinations of the others
        /// (as decided by the pivot order).
        dependent_columns: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstsq<S> {
    /// Minimizer of ‖A·x − b‖₂.
    pub coefficients: Vec<S>,
    /// ‖A·x − b‖₂ at the minimizer, computed against the original system.
    pub residual_norm: S,
    /// |R₀₀| / |Rₙ₋₁ₙ₋₁| of the pivoted factor — a cheap conditioning proxy
    /// (1 = perfectly conditioned, large = nearly dependent columns).
    pub condition_indicator: S,
}

/// Solve min ‖A·x − b‖₂ for a dense `rows × cols` system given row-wise.
///
/// Every row of `a` must have the same length and match `b`. Returns
/// `RankDeficient` when the columns of `A` are not independent, listing the
/// columns the pivot order classified as dependent.
pub fn lstsq<S: Real>(a: &[Vec<S>], b: &[S]) -> Result<Lstsq<S>, LstsqError> {
    let m = a.len();
    if m == 0 {
        return Err(LstsqError::Empty);
    }
    let n = a[0].len();
    assert!(a.iter().all(|row| row.len() == n), "ragged matrix");
    assert_eq!(b.len(), m, "rhs length mismatch");
    if n == 0 {
        return Ok(Lstsq {
            coefficients: vec![],
            residual_norm: norm2(b),
            condition_indicator: S::one(),
        });
    }
    if n == 1 {
        // Scalar case in closed form: exact whenever the data is.
        let saa: S = a.iter().map(|r| r[0] * r[0]).sum();
        let sab: S = a.iter().zip(b.iter()).map(|(r, &bi)| r[0] * bi).sum();
        if saa == S::zero() {
            return Err(LstsqError::RankDeficient {
                rank: 0,
                dependent_columns: vec![0],
            });
        }
        let x = sab / saa;
        let residual: Vec<S> = a.iter().zip(b.iter()).map(|(r, &bi)| r[0] * x - bi).collect();
        return Ok(Lstsq {
            coefficients: vec![x],
            residual_norm: norm2(&residual),
            condition_indicator: S::one(),
        });
    }

    // Column-major working copy; `qtb` accumulates Qᵀb.
    let mut cols: Vec<Vec<S>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    let mut qtb: Vec<S> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    let steps = m.min(n);
    let mut diag: Vec<S> = Vec::with_capacity(steps);
    let mut rank = 0;
    for k in 0..steps {
        // Pivot: bring the remaining column with the largest tail norm to k.
        let (jmax, norm_max) = (k..n)
            .map(|j| (j, norm2(&cols[j][k..])))
            .fold((k, S::neg_infinity()), |best, cand| {
                if cand.1 > best.1 {
                    cand
                } else {
                    best
                }
            });
        let tol = if k == 0 {
            S::zero()
        } else {
            S::epsilon() * S::from_count(m.max(n)) * diag[0].abs()
        };
        if norm_max <= tol {
            break;
        }
        cols.swap(k, jmax);
        perm.swap(k, jmax);

        // Householder reflector annihilating rows k+1.. of column k.
        let x0 = cols[k][k];
        let alpha = if x0 > S::zero() { -norm_max } else { norm_max };
        let mut v: Vec<S> = cols[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vtv = norm2(&v) * norm2(&v);
        if vtv > S::zero() {
            for col in cols.iter_mut().skip(k + 1) {
                reflect(&v, &mut col[k..], vtv);
            }
            reflect(&v, &mut qtb[k..], vtv);
        }
        cols[k][k] = alpha;
        for i in k + 1..m {
            cols[k][i] = S::zero();
        }
        diag.push(alpha);
        rank = k + 1;
    }

    if rank < n {
        let mut dependent: Vec<usize> = perm[rank..].to_vec();
        dependent.sort_unstable();
        return Err(LstsqError::RankDeficient {
            rank,
            dependent_columns: dependent,
        });
    }

    // Back-substitute R·y = (Qᵀb)[..n], then undo the permutation.
    let mut y = vec![S::zero(); n];
    for k in (0..n).rev() {
        let mut s = qtb[k];
        for j in k + 1..n {
            s = s - cols[j][k] * y[j];
        }
        y[k] = s / diag[k];
    }
    let mut x = vec![S::zero(); n];
    for (k, &pk) in perm.iter().enumerate() {
        x[pk] = y[k];
    }

    let mut residual = Vec::with_capacity(m);
    for i in 0..m {
        let pred: S = (0..n).map(|j| a[i][j] * x[j]).sum();
        residual.push(pred - b[i]);
    }
    let condition = (diag[0].abs() / diag[n - 1].abs()).max(S::one());

    Ok(Lstsq {
        coefficients: x,
        residual_norm: norm2(&residual),
        condition_indicator: condition,
    })
}

fn norm2<S: Real>(xs: &[S]) -> S {
    xs.iter().map(|&x| x * x).sum::<S>().sqrt()
}

fn reflect<S: Real>(v: &[S], target: &mut [S], vtv: S) {
    let dot: S = v.iter().zip(target.iter()).map(|(&a, &b)| a * b).sum();
    let scale = (S::one() + S::one()) * dot / vtv;
    for (t, &vi) in target.iter_mut().zip(v.iter()) {
        *t = *t - scale * vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_through_origin() {
        // Single class, rows (2, 4.0) and (3, 6.0) -> coefficient 2 exactly.
        let a = vec![vec![2.0], vec![3.0]];
        let b = vec![4.0, 6.0];
        let fit = lstsq(&a, &b).unwrap();
        assert_eq!(fit.coefficients, vec![2.0]);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn recovers_planted_coefficients() {
        let truth = [1.0, 3.0, 2.0];
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![2.0, 5.0, 1.0],
            vec![7.0, 2.0, 4.0],
        ];
        let b: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(truth.iter()).map(|(a, t)| a * t).sum())
            .collect();
        let fit = lstsq(&rows, &b).unwrap();
        for (got, want) in fit.coefficients.iter().zip(truth.iter()) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn overdetermined_inconsistent_minimizes() {
        // min over c of (c-1)^2 + (c-3)^2 -> c = 2, residual sqrt(2).
        let a: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0]];
        let b = vec![1.0, 3.0];
        let fit = lstsq(&a, &b).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.residual_norm - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn underdetermined_is_rank_deficient() {
        // 2 columns, 1 row.
        let a = vec![vec![1.0, 2.0]];
        let b = vec![3.0];
        match lstsq(&a, &b) {
            Err(LstsqError::RankDeficient {
                rank,
                dependent_columns,
            }) => {
                assert_eq!(rank, 1);
                assert_eq!(dependent_columns.len(), 1);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_column_is_reported_dependent() {
        let a = vec![
            vec![1.0, 1.0, 2.0],
            vec![2.0, 2.0, 1.0],
            vec![3.0, 3.0, 5.0],
            vec![4.0, 4.0, 0.5],
        ];
        let b = vec![1.0, 2.0, 3.0, 4.0];
        match lstsq(&a, &b) {
            Err(LstsqError::RankDeficient {
                rank,
                dependent_columns,
            }) => {
                assert_eq!(rank, 2);
                // One of the two duplicate columns (0, 1) must be flagged.
                assert!(dependent_columns == vec![0] || dependent_columns == vec![1]);
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn empty_system() {
        assert_eq!(lstsq::<f64>(&[], &[]), Err(LstsqError::Empty));
    }

    #[test]
    fn works_at_f32() {
        let a = vec![vec![2.0f32, 0.0], vec![3.0, 1.0], vec![0.0, 2.0]];
        let b = vec![4.0f32, 7.0, 2.0]; // planted x = (2, 1)
        let fit = lstsq(&a, &b).unwrap();
        for (got, want) in fit.coefficients.iter().zip([2.0f32, 1.0]) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
    }
}
