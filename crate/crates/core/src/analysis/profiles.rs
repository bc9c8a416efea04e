//! Seeded random smooth periodic profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::PeriodicGrid;

pub fn trial_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Zero-mean trigonometric polynomial with `modes` modes and coefficients
/// decaying like `1/k^2`, scaled to unit sup-norm over the columns.
pub fn random_smooth(rng: &mut impl Rng, grid: &PeriodicGrid, modes: usize) -> Vec<f64> {
    let w = 2.0 * std::f64::consts::PI / grid.period();
    let coeffs: Vec<(f64, f64)> = (1..=modes.max(1))
        .map(|k| {
            let s = 1.0 / (k * k) as f64;
            (s * rng.random_range(-1.0..1.0), s * rng.random_range(-1.0..1.0))
        })
        .collect();
    let mut v: Vec<f64> = grid
        .xs()
        .iter()
        .map(|&x| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let kx = (k + 1) as f64 * w * x;
                    a * kx.cos() + b * kx.sin()
                })
                .sum()
        })
        .collect();
    let m = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
    v
}

/// Non-negative profile, even about column `x0` and zero there:
/// `sum_m b_m (1 - cos(m w (x - x0)))` with random `b_m >= 0`, scaled to sup `amp`.
pub fn even_bump(rng: &mut impl Rng, grid: &PeriodicGrid, x0: usize, modes: usize, amp: f64) -> Vec<f64> {
    let w = 2.0 * std::f64::consts::PI / grid.period();
    let b: Vec<f64> = (1..=modes.max(1))
        .map(|m| rng.random_range(0.0..1.0) / (m * m) as f64)
        .collect();
    let n = grid.n_x();
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            // Integer offsets keep the profile exactly even about x0.
            let off = (i as isize - x0 as isize) as f64 * grid.dx();
            b.iter()
                .enumerate()
                .map(|(m, bm)| bm * (1.0 - ((m + 1) as f64 * w * off).cos()))
                .sum()
        })
        .collect();
    let m = v.iter().fold(0.0f64, |m, x| m.max(*x));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x *= amp / m);
    }
    v[x0] = 0.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_profiles_repeat() {
        let g = PeriodicGrid::new(32, 16, 1.0, 1.0).unwrap();
        let a = random_smooth(&mut trial_rng(7), &g, 4);
        let b = random_smooth(&mut trial_rng(7), &g, 4);
        assert_eq!(a, b);
        let m = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn even_bump_is_even_and_touches() {
        let g = PeriodicGrid::new(32, 16, 1.0, 1.0).unwrap();
        let mut rng = trial_rng(3);
        for x0 in [0, 5, 31] {
            let v = even_bump(&mut rng, &g, x0, 5, 0.2);
            assert_eq!(v[x0], 0.0);
            assert!(v.iter().all(|x| *x >= 0.0));
            for d in 1..16 {
                let a = v[g.wrap(x0 as isize + d)];
                let b = v[g.wrap(x0 as isize - d)];
                assert!((a - b).abs() < 1e-14);
            }
        }
    }
}
