//! Verification toolkit: kernel extraction, envelopes, bump barriers and the
//! randomized property suites.

mod bump;
mod convolution;
mod kernel;
mod profiles;
mod suites;

use serde::{Deserialize, Serialize};

use crate::elliptic::EllipticOperatorSpec;
use crate::error::Result;
use crate::fboperator::{op_i, FluxOptions};
use crate::geometry::{GraphInterface, PeriodicGrid};

pub use bump::{bump_phi_r, bump_response, BumpResponse};
pub use convolution::{inf_convolution, second_differences, sup_convolution};
pub use kernel::{linearize_i, linearize_i_with, richardson_change, KernelEstimate};
pub use profiles::{even_bump, random_smooth, trial_rng};
pub use suites::*;

/// Outcome of one property suite. `pass` holds iff `max_violation <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl PropertyReport {
    pub fn new(name: &str, trials: usize, max_violation: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            trials,
            max_violation,
            tolerance,
            pass: max_violation <= tolerance,
            notes: Vec::new(),
        }
    }

    /// A suite that could not be evaluated.
    pub fn errored(name: &str, trials: usize, tolerance: f64, err: impl std::fmt::Display) -> Self {
        let mut r = Self::new(name, trials, f64::INFINITY, tolerance);
        r.notes.push(format!("error: {err}"));
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// One summary line, `PASS`/`FAIL` first.
    pub fn line(&self) -> String {
        format!(
            "{} {}: max violation {:.3e} (tolerance {:.1e}, {} trials)",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.max_violation,
            self.tolerance,
            self.trials
        )
    }
}

/// Fourier multiplier of the linearized one-phase operator at a flat front
/// of height `a`: `-(k / a) coth(k a)`.
///
/// Under `f = a + e cos(k x)` the harmonic field is
/// `1 - y/a + (e/a) sinh(k y)/sinh(k a) cos(k x) + O(e^2)`, whose normal
/// derivative on the graph is `1/a - e (k/a) coth(k a) cos(k x) + O(e^2)`.
pub fn dispersion_multiplier(a: f64, k: f64) -> f64 {
    if k == 0.0 {
        return -1.0 / (a * a);
    }
    -(k / a) / (k * a).tanh()
}

/// First-order response of `I` to the mode `cos(2 pi k x / period)` around
/// the flat front `a`, by a symmetric difference in the amplitude and
/// projection of the flux onto the mode.
pub fn measure_dispersion(
    grid: PeriodicGrid,
    a: f64,
    k: usize,
    amplitude: f64,
    delta: f64,
    spec: &EllipticOperatorSpec,
    opts: &FluxOptions,
) -> Result<f64> {
    let w = 2.0 * std::f64::consts::PI * k as f64 / grid.period();
    let n = grid.n_x();
    let mut coef = [0.0; 2];
    for (c, s) in coef.iter_mut().zip([1.0, -1.0]) {
        let f = GraphInterface::from_fn(grid, delta, false, |x| a + s * amplitude * (w * x).cos())?;
        let flux = op_i(&f, spec, opts)?.i_plus;
        *c = 2.0 / n as f64 * (0..n).map(|i| flux[i] * (w * grid.x(i)).cos()).sum::<f64>();
    }
    Ok((coef[0] - coef[1]) / (2.0 * amplitude))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplier_limits() {
        assert_eq!(dispersion_multiplier(1.0, 0.0), -1.0);
        assert!((dispersion_multiplier(1.0, 1e-4) + 1.0).abs() < 1e-7);
        assert!((dispersion_multiplier(1.0, 2.0) + 2.074_6).abs() < 1e-4);
        let k = 40.0;
        assert!((dispersion_multiplier(0.5, k) / -k - 2.0).abs() < 1e-12);
    }

    #[test]
    fn measured_multiplier_close_to_closed_form() {
        let g = PeriodicGrid::isotropic(64, 32, 2.0 * std::f64::consts::PI).unwrap();
        let m = measure_dispersion(g, 1.0, 1, 0.02, 0.1, &EllipticOperatorSpec::laplace(), &FluxOptions::default()).unwrap();
        let exact = dispersion_multiplier(1.0, 1.0);
        assert!(((m - exact) / exact).abs() < 0.02, "{m} vs {exact}");
    }

    #[test]
    fn report_pass_flag() {
        assert!(PropertyReport::new("x", 1, 1e-7, 1e-6).pass);
        let r = PropertyReport::errored("x", 1, 1e-6, "boom");
        assert!(!r.pass);
        assert!(r.line().starts_with("FAIL x"));
    }
}
