//! Numerical linearization of `I` at a base profile.
//!
//! `w_j = [I(f + e E_j) - I(f - e E_j)](x0) / (2 e)` with `E_j` the unit hat
//! at column `j`, and `c0` the same difference for the constant profile 1.
//! Every bumped system differs from the base one in a few cut rows, so all
//! solves reuse the base factorization.

use serde::{Deserialize, Serialize};

use crate::elliptic::{solve_bulk_cached, BoundaryData, EllipticOperatorSpec, SolverCache};
use crate::error::{FbError, Result};
use crate::fboperator::{normal_derivative_probe, FluxOptions, ProbeOrder};
use crate::geometry::{build_domain, GraphInterface, Phase};

/// Linearization row of `I` at column `base_point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub base_point: usize,
    /// Response to the constant perturbation.
    pub c0: f64,
    /// `sum_j w_j h_j` over off-diagonal columns; the antipodal column, whose
    /// offset sign is ambiguous, is left out.
    pub drift: f64,
    /// Sensitivity to a unit hat at each column (index = column).
    pub weights: Vec<f64>,
    /// Minimal-image offset `x_j - x0` of each column.
    pub offsets: Vec<f64>,
    pub fd_step: f64,
    pub order: ProbeOrder,
}

impl KernelEstimate {
    /// `sum_{|h_j| > r} w_j`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.offsets)
            .filter(|(_, h)| h.abs() > r)
            .map(|(w, _)| w)
            .sum()
    }

    /// Smallest weight away from the base column.
    pub fn min_off_diagonal(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.base_point)
            .map(|(_, w)| *w)
            .fold(f64::INFINITY, f64::min)
    }

    /// `sum_{j != x0} |w_j|`.
    pub fn off_diagonal_mass(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != self.base_point)
            .map(|(_, w)| w.abs())
            .sum()
    }

    /// Tail masses at each of `radii`.
    pub fn tail_profile(&self, radii: &[f64]) -> Vec<f64> {
        radii.iter().map(|&r| self.tail_mass(r)).collect()
    }
}

fn flux_at(
    f: &GraphInterface,
    x0: usize,
    spec: &EllipticOperatorSpec,
    opts: &FluxOptions,
    cache: &mut SolverCache,
) -> Result<f64> {
    let d = build_domain(f, Phase::Positive)?;
    let u = solve_bulk_cached(&d, spec, &BoundaryData::free_boundary(Phase::Positive), opts.tol, cache)?;
    Ok(normal_derivative_probe(&u, &d, x0, opts.order, opts.step)?.0)
}

fn shifted_fits(f: &GraphInterface, eps: f64) -> bool {
    f.add_constant(eps).is_ok() && f.add_constant(-eps).is_ok()
}

/// Linearization with the default step `1e-4 * sup|f|`.
pub fn linearize_i(
    f: &GraphInterface,
    x0: usize,
    spec: &EllipticOperatorSpec,
    opts: &FluxOptions,
) -> Result<KernelEstimate> {
    linearize_i_with(f, x0, 1e-4 * f.sup_norm(), spec, opts)
}

/// Linearization with finite-difference step `eps`; the step shrinks tenfold
/// once if `f +- eps` leaves the phase band.
pub fn linearize_i_with(
    f: &GraphInterface,
    x0: usize,
    eps: f64,
    spec: &EllipticOperatorSpec,
    opts: &FluxOptions,
) -> Result<KernelEstimate> {
    if f.is_two_phase() {
        return Err(FbError::InvalidInput("linearization is defined for the one-phase operator".into()));
    }
    let n = f.len();
    if x0 >= n || !(eps > 0.0) {
        return Err(FbError::InvalidInput(format!("bad base point {x0} or step {eps}")));
    }
    let eps = if shifted_fits(f, eps) {
        eps
    } else if shifted_fits(f, eps / 10.0) {
        eps / 10.0
    } else {
        return Err(f.add_constant(eps / 10.0).and(f.add_constant(-eps / 10.0)).unwrap_err());
    };

    let mut cache = SolverCache::pinned();
    flux_at(f, x0, spec, opts, &mut cache)?;
    let mut eval = |v: Vec<f64>| -> Result<f64> { flux_at(&f.with_values(v)?, x0, spec, opts, &mut cache) };
    let base = f.values();
    let mut weights = Vec::with_capacity(n);
    for j in 0..n {
        let mut plus = base.to_vec();
        plus[j] += eps;
        let mut minus = base.to_vec();
        minus[j] -= eps;
        weights.push((eval(plus)? - eval(minus)?) / (2.0 * eps));
    }
    let c0 = (eval(base.iter().map(|v| v + eps).collect())? - eval(base.iter().map(|v| v - eps).collect())?)
        / (2.0 * eps);

    let g = f.grid();
    let offsets: Vec<f64> = (0..n).map(|j| g.periodic_offset(g.x(j), g.x(x0))).collect();
    let half = 0.5 * g.period() * (1.0 - 1e-12);
    let drift = weights
        .iter()
        .zip(&offsets)
        .filter(|(_, h)| h.abs() < half)
        .map(|(w, h)| w * h)
        .sum();
    Ok(KernelEstimate {
        base_point: x0,
        c0,
        drift,
        weights,
        offsets,
        fd_step: eps,
        order: opts.order,
    })
}

/// Largest relative change of the weights (and `c0`) when the step is halved,
/// over weights above `floor * max|w|`.
pub fn richardson_change(
    f: &GraphInterface,
    x0: usize,
    eps: f64,
    spec: &EllipticOperatorSpec,
    opts: &FluxOptions,
    floor: f64,
) -> Result<f64> {
    let a = linearize_i_with(f, x0, eps, spec, opts)?;
    let b = linearize_i_with(f, x0, eps / 2.0, spec, opts)?;
    let scale = a.weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let mut worst = ((a.c0 - b.c0) / b.c0).abs();
    for (wa, wb) in a.weights.iter().zip(&b.weights) {
        if wb.abs() > floor * scale {
            worst = worst.max(((wa - wb) / wb).abs());
        }
    }
    Ok(worst)
}
