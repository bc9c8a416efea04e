//! Bump barriers `phi_R = C + A Phi(d / R)` with `Phi(s) = s^2 / (1 + s^2)`.
//!
//! `d` is the minimal-image distance to the center column, so `phi_R`
//! vanishes (up to `C`) at the center and is pointwise non-increasing in `R`.
//! Added to `g` it touches `g + C` from above at the center, so by the
//! comparison principle the center response is non-negative for `C = 0` and
//! shrinks as `R` grows.

use crate::elliptic::EllipticOperatorSpec;
use crate::error::Result;
use crate::fboperator::{op_i, FluxOptions};
use crate::geometry::{GraphInterface, PeriodicGrid};

fn phi(s: f64) -> f64 {
    s * s / (1.0 + s * s)
}

/// Samples of `C + A Phi(d(x, x_center) / R)`.
pub fn bump_phi_r(grid: &PeriodicGrid, center: usize, r: f64, offset: f64, amplitude: f64) -> Vec<f64> {
    assert!(r > 0.0, "R must be positive");
    let xc = grid.x(center);
    grid.xs()
        .iter()
        .map(|&x| offset + amplitude * phi(grid.periodic_offset(x, xc).abs() / r))
        .collect()
}

/// `I(g + phi_R) - I(g)` per column.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpResponse {
    pub per_column: Vec<f64>,
    pub center: f64,
    pub max: f64,
}

pub fn bump_response(
    g: &GraphInterface,
    center: usize,
    r: f64,
    offset: f64,
    amplitude: f64,
    spec: &EllipticOperatorSpec,
    opts: &FluxOptions,
) -> Result<BumpResponse> {
    let bump = bump_phi_r(g.grid(), center, r, offset, amplitude);
    let raised = g.with_values(g.values().iter().zip(&bump).map(|(a, b)| a + b).collect())?;
    let base = op_i(g, spec, opts)?.i_plus;
    let up = op_i(&raised, spec, opts)?.i_plus;
    let per_column: Vec<f64> = up.iter().zip(&base).map(|(a, b)| a - b).collect();
    Ok(BumpResponse {
        center: per_column[center],
        max: per_column.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        per_column,
    })
}
