//! Spatial sup/inf convolutions on the torus.
//!
//! `sup_convolution` is a max of downward parabolas of curvature `1/eps`,
//! hence semi-convex: `f(x+dx) - 2 f(x) + f(x-dx) >= -dx^2/eps`. The inf
//! convolution is the mirror statement, semi-concave with bound `dx^2/eps`.
//! Both hold exactly on the grid because the minimal-image squared distance
//! is itself a min of parabolas.

use crate::geometry::GraphInterface;

fn envelope(f: &GraphInterface, eps: f64, sign: f64) -> Vec<f64> {
    assert!(eps > 0.0, "eps must be positive");
    let g = f.grid();
    let v = f.values();
    let n = v.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let d = g.periodic_offset(g.x(j), g.x(i));
                    sign * v[j] - d * d / (2.0 * eps)
                })
                .fold(f64::NEG_INFINITY, f64::max)
                * sign
        })
        .collect()
}

/// `f^eps(x_i) = max_j [f_j - d(x_i, x_j)^2 / (2 eps)]`; `f^eps >= f`.
pub fn sup_convolution(f: &GraphInterface, eps: f64) -> Vec<f64> {
    envelope(f, eps, 1.0)
}

/// `f_eps(x_i) = min_j [f_j + d(x_i, x_j)^2 / (2 eps)]`; `f_eps <= f`.
pub fn inf_convolution(f: &GraphInterface, eps: f64) -> Vec<f64> {
    envelope(f, eps, -1.0)
}

/// Periodic `v_{i+1} - 2 v_i + v_{i-1}`.
pub fn second_differences(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PeriodicGrid;

    fn hat() -> GraphInterface {
        let g = PeriodicGrid::new(64, 16, 1.0, 4.0).unwrap();
        GraphInterface::from_fn(g, 0.1, false, |x| 1.0 + (0.25 - (x - 0.5).abs()).max(0.0)).unwrap()
    }

    #[test]
    fn constants_are_fixed() {
        let g = PeriodicGrid::new(16, 16, 1.0, 4.0).unwrap();
        let f = GraphInterface::one_phase(g, vec![1.3; 16], 0.1).unwrap();
        assert_eq!(sup_convolution(&f, 0.01), vec![1.3; 16]);
        assert_eq!(inf_convolution(&f, 0.01), vec![1.3; 16]);
    }

    #[test]
    fn hat_envelopes() {
        let f = hat();
        let dx = f.grid().dx();
        for eps in [0.01, 0.05, 0.2] {
            let up = sup_convolution(&f, eps);
            let down = inf_convolution(&f, eps);
            for i in 0..64 {
                assert!(up[i] >= f.values()[i] && f.values()[i] >= down[i]);
            }
            let tol = 1e-12;
            assert!(second_differences(&up).iter().all(|d| *d >= -dx * dx / eps - tol));
            assert!(second_differences(&down).iter().all(|d| *d <= dx * dx / eps + tol));
        }
        // The hat's convex feet survive the sup envelope, so the upper
        // second-difference bound belongs to the inf envelope only.
        let up = sup_convolution(&f, 0.05);
        let top = second_differences(&up).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(top > dx * dx / 0.05);
    }
}
