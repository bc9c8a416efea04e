//! Closed-form and independently computed reference values.

use std::f64::consts::PI;

use hsflow::analysis::{dispersion_multiplier, linearize_i_with, measure_dispersion};
use hsflow::elliptic::{pucci_eval, EllipticOperatorSpec, PucciSign};
use hsflow::evolution::{run, EvolutionConfig};
use hsflow::fboperator::{op_i, two_phase_fluxes, Arity, FluxOptions, ProbeOrder, VelocityLaw};
use hsflow::geometry::{GraphInterface, PeriodicGrid};

/// `-k coth(k)` for k = 1, 2, 4, evaluated with 30-digit arithmetic.
const NEG_K_COTH_K: [(f64, f64); 3] = [
    (1.0, -1.313_035_285_499_331),
    (2.0, -2.074_629_441_455_1),
    (4.0, -4.002_684_601_606_73),
];

#[test]
fn dispersion_closed_form_values() {
    for (k, want) in NEG_K_COTH_K {
        assert!((dispersion_multiplier(1.0, k) - want).abs() < 1e-12);
    }
    // Scaling: -(k/a) coth(k a) at a = 1.5, 0.5.
    assert!((dispersion_multiplier(1.5, 2.0) - -1.339_959_764_418_25).abs() < 1e-12);
    assert!((dispersion_multiplier(0.5, 4.0) - -8.298_517_765_820_39).abs() < 1e-12);
    assert!((dispersion_multiplier(2.0, 0.0) + 0.25).abs() < 1e-15);
}

#[test]
fn pucci_on_eigenvalues() {
    assert_eq!(pucci_eval(&[1.0, -2.0], 1.0, 2.0, PucciSign::Plus), 0.0);
    assert_eq!(pucci_eval(&[1.0, -2.0], 1.0, 2.0, PucciSign::Minus), -3.0);
    assert_eq!(pucci_eval(&[3.0, 1.0], 0.5, 4.0, PucciSign::Minus), 2.0);
}

#[test]
fn flat_fluxes_are_reciprocal_heights() {
    let g = PeriodicGrid::isotropic(32, 32, 2.0 * PI).unwrap();
    for order in [ProbeOrder::First, ProbeOrder::Second] {
        let opts = FluxOptions { order, ..FluxOptions::default() };
        for a in [0.5, 1.0, 2.5] {
            let f = GraphInterface::one_phase(g, vec![a; 32], 0.1).unwrap();
            let i = op_i(&f, &EllipticOperatorSpec::laplace(), &opts).unwrap().i_plus;
            assert!(i.iter().all(|v| (v - 1.0 / a).abs() < 1e-9), "a = {a}: {}", i[0]);
        }
    }
}

#[test]
fn flat_two_phase_fluxes() {
    let g = PeriodicGrid::new(16, 30, 2.0 * PI, 3.0).unwrap();
    let f = GraphInterface::two_phase(g, vec![1.2; 16], 0.1).unwrap();
    let spec = EllipticOperatorSpec::laplace();
    let fl = two_phase_fluxes(&f, &spec, &spec, &FluxOptions::default()).unwrap();
    let minus = fl.i_minus.unwrap();
    for i in 0..16 {
        assert!((fl.i_plus[i] - 1.0 / 1.2).abs() < 1e-9);
        assert!((minus[i] - 1.0 / 1.8).abs() < 1e-9);
    }
}

/// Flat one-phase runs follow the explicit Euler recursion of `f' = 1/f`
/// exactly, and that recursion tracks `sqrt(1 + 2t)` to first order in dt.
#[test]
fn flat_run_is_the_euler_recursion() {
    // dy = dx keeps both probe points below the top interior row.
    let g = PeriodicGrid::new(8, 32, 1.0, 4.0).unwrap();
    let f0 = GraphInterface::one_phase(g, vec![1.0; 8], 0.1).unwrap();
    let mut cfg = EvolutionConfig::new(0.2, VelocityLaw::identity(Arity::OnePhase));
    cfg.dt_max = 0.01;
    let frames = run(&f0, &cfg).into_result().unwrap();
    let mut y = 1.0f64;
    for w in frames.windows(2) {
        y += w[1].dt / y;
        assert!((w[1].f.values()[3] - y).abs() < 1e-9, "{} {} {}", w[1].t, w[1].f.values()[3], y);
    }
    assert!((y - (1.0f64 + 0.4).sqrt()).abs() < 0.01 * 0.2);
}

#[test]
fn squares_law_values() {
    let law = VelocityLaw::squares(Arity::TwoPhase);
    assert_eq!(law.eval(3.0, Some(2.0)), 5.0);
    let one = VelocityLaw::squares(Arity::OnePhase);
    assert_eq!(one.eval(1.5, None), 2.25);
}

#[test]
fn measured_dispersion_on_a_coarse_box() {
    let g = PeriodicGrid::isotropic(128, 64, 2.0 * PI).unwrap();
    let opts = FluxOptions::default();
    for (k, tol) in [(1, 0.02), (2, 0.02)] {
        let m = measure_dispersion(g, 1.0, k, 0.02, 0.1, &EllipticOperatorSpec::laplace(), &opts).unwrap();
        let want = NEG_K_COTH_K[k - 1].1;
        assert!(((m - want) / want).abs() < tol, "k = {k}: {m}");
    }
}

#[test]
fn kernel_acts_on_constants_like_minus_inverse_square() {
    let g = PeriodicGrid::isotropic(64, 48, 2.0 * PI).unwrap();
    for a in [0.75, 1.5] {
        let f = GraphInterface::one_phase(g, vec![a; 64], 0.1).unwrap();
        let spec = EllipticOperatorSpec::laplace();
        let k = linearize_i_with(&f, 10, 1e-6, &spec, &FluxOptions::first_order(1e-13)).unwrap();
        assert!((k.c0 * a * a + 1.0).abs() < 0.02, "a = {a}: c0 = {}", k.c0);
        // Row sum reproduces the constant response. Neighbour bumps tilt the
        // normal across a grid column, where interpolation has a kink, so the
        // difference quotients carry an O(eps) one-sided bias.
        let sum: f64 = k.weights.iter().sum();
        assert!((sum - k.c0).abs() < 1e-4 * k.c0.abs(), "{sum} {}", k.c0);
    }
}
