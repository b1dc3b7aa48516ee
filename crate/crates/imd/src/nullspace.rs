//! Null-space parameterization of the equilibrium constraint.
//!
//! Every nodal stress vector satisfying `B * T = Q` is `T0 + N * alpha`,
//! where `T0` is the minimum-norm particular solution and the columns of `N`
//! span `ker(B)`. The constrained design problem thereby becomes an
//! unconstrained minimization over the coefficient vector `alpha`.
//!
//! The decomposition is dense (full singular value decomposition) with an
//! explicit size guard: robust rank decisions matter more than scalability at
//! the problem sizes this crate targets, and `B`'s entries are exact
//! polynomial integrals, so its rank gap is sharp.

use crate::statics::StaticsSystem;
use faer::Mat;
use thiserror::Error;

/// Default relative cutoff separating zero from nonzero singular values.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Largest number of stress unknowns the dense decomposition accepts
/// (roughly 4000 nodes).
pub const MAX_DENSE_DOFS: usize = 12000;

#[derive(Debug, Error)]
pub enum NullSpaceError {
    #[error(
        "problem has {dofs} stress unknowns, above the dense decomposition guard {max}; \
         refine the mesh less or split the domain"
    )]
    TooLarge { dofs: usize, max: usize },
    #[error(
        "load not equilibrable with given supports: least-squares residual {residual:.3e} \
         exceeds {tol:.3e}"
    )]
    NotEquilibrable { residual: f64, tol: f64 },
    #[error("numerical failure in the singular value decomposition: {0}")]
    Numerical(String),
}

/// Particular solution and null-space basis of the equilibrium operator.
///
/// `basis` is stored row-major (`basis[i * nullity + j]` is entry `(i, j)`),
/// which keeps rows contiguous for the hot matrix-vector products.
#[derive(Debug, Clone)]
pub struct NullSpaceRep {
    /// Minimum-norm solution of `B * T0 = Q`; length `num_stress_dofs`.
    pub t0: Vec<f64>,
    /// Orthonormal columns spanning `ker(B)`, row-major.
    pub basis: Vec<f64>,
    pub num_stress_dofs: usize,
    /// Dimension of the null space (number of design degrees of freedom).
    pub nullity: usize,
    pub rank: usize,
    pub rank_tol: f64,
}

impl NullSpaceRep {
    /// Entry `(i, j)` of the basis matrix.
    #[inline]
    pub fn basis_at(&self, i: usize, j: usize) -> f64 {
        self.basis[i * self.nullity + j]
    }

    /// Serial reference computation of `T0 + N * alpha`.
    pub fn stress(&self, alpha: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.nullity);
        let mut t = self.t0.clone();
        for (i, ti) in t.iter_mut().enumerate() {
            let row = &self.basis[i * self.nullity..(i + 1) * self.nullity];
            *ti += row.iter().zip(alpha).map(|(n, a)| n * a).sum::<f64>();
        }
        t
    }
}

/// Computes the minimum-norm particular solution and an orthonormal
/// null-space basis of the assembled equilibrium system.
pub fn decompose(
    system: &StaticsSystem,
    rank_tol: f64,
) -> Result<NullSpaceRep, NullSpaceError> {
    let m = system.num_stress_dofs;
    let n_eq = system.num_equations();
    if m > MAX_DENSE_DOFS {
        return Err(NullSpaceError::TooLarge {
            dofs: m,
            max: MAX_DENSE_DOFS,
        });
    }

    let mut b_dense = Mat::<f64>::zeros(n_eq, m);
    for r in 0..n_eq {
        for k in system.b.indptr[r]..system.b.indptr[r + 1] {
            b_dense[(r, system.b.indices[k])] = system.b.values[k];
        }
    }
    let svd = b_dense
        .svd()
        .map_err(|e| NullSpaceError::Numerical(format!("{e:?}")))?;
    let u = svd.U();
    let v = svd.V();
    let sigma = svd.S().column_vector();

    let num_sv = sigma.nrows();
    let sigma_max = if num_sv > 0 { sigma[0] } else { 0.0 };
    let rank = (0..num_sv)
        .take_while(|&i| sigma[i] >= rank_tol * sigma_max && sigma[i] > 0.0)
        .count();
    let nullity = m - rank;

    // T0 = V_r * diag(1/sigma) * U_r^T * Q  (minimum-norm least squares).
    let q = &system.q;
    let mut y = vec![0.0; rank];
    for (i, yi) in y.iter_mut().enumerate() {
        let mut acc = 0.0;
        for r in 0..n_eq {
            acc += u[(r, i)] * q[r];
        }
        *yi = acc / sigma[i];
    }
    let mut t0 = vec![0.0; m];
    for (i, t) in t0.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, yj) in y.iter().enumerate() {
            acc += v[(i, j)] * yj;
        }
        *t = acc;
    }

    // Consistency: the load must lie in the range of B.
    let mut bt0 = vec![0.0; n_eq];
    system.b.matvec(&t0, &mut bt0);
    let residual = bt0
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let q_norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = rank_tol * q_norm;
    if residual > tol {
        return Err(NullSpaceError::NotEquilibrable { residual, tol });
    }

    let mut basis = vec![0.0; m * nullity];
    for i in 0..m {
        for j in 0..nullity {
            basis[i * nullity + j] = v[(i, rank + j)];
        }
    }

    Ok(NullSpaceRep {
        t0,
        basis,
        num_stress_dofs: m,
        nullity,
        rank,
        rank_tol,
    })
}
