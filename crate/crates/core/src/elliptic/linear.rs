//! Sparse LU with iterative refinement.
//!
//! The factorization is sequential, so identical systems give bit-identical
//! solutions.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use super::{BulkField, DiscreteSystem};
use crate::error::{FbError, Result};

const MAX_REFINEMENTS: usize = 6;

/// LU factors of an assembled system.
pub struct Factorization {
    lu: Lu<usize, f64>,
    n: usize,
}

impl Factorization {
    pub fn new(system: &DiscreteSystem) -> Result<Self> {
        let n = system.len();
        let triplets: Vec<Triplet<usize, usize, f64>> = system
            .triplets()
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| FbError::InvalidInput(format!("sparse assembly failed: {e:?}")))?;
        let lu = a
            .sp_lu()
            .map_err(|e| FbError::InvalidInput(format!("LU factorization failed: {e:?}")))?;
        Ok(Self { lu, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `A^{-1} rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[i]).collect()
    }
}

pub(super) fn residual_vector(system: &DiscreteSystem, u: &[f64]) -> Vec<f64> {
    (0..system.len())
        .map(|p| system.rhs()[p] - system.apply_row(p, u))
        .collect()
}

/// Solves the assembled system to a scaled max-norm residual `<= tol`.
pub fn solve_linear(system: &DiscreteSystem, tol: f64) -> Result<BulkField> {
    if system.is_empty() {
        return Ok(BulkField {
            values: Vec::new(),
            boundary: system.boundary().clone(),
            residual: 0.0,
            iterations: 0,
        });
    }
    let factors = Factorization::new(system)?;
    refine(system, &factors, tol)
}

/// Direct solve with `factors` followed by iterative refinement.
pub(super) fn refine(system: &DiscreteSystem, factors: &Factorization, tol: f64) -> Result<BulkField> {
    let mut u = factors.solve(system.rhs());
    let mut residual = system.scaled_residual(&u);
    let mut iterations = 1;
    while residual > tol && iterations <= MAX_REFINEMENTS {
        let r = residual_vector(system, &u);
        let du = factors.solve(&r);
        for (a, b) in u.iter_mut().zip(&du) {
            *a += b;
        }
        residual = system.scaled_residual(&u);
        iterations += 1;
    }
    if !(residual <= tol) {
        return Err(FbError::NonConvergence {
            residual,
            iterations,
        });
    }
    Ok(BulkField {
        values: u,
        boundary: system.boundary().clone(),
        residual,
        iterations,
    })
}
