//! Randomized property suites. Trial inputs are drawn sequentially from one
//! seeded generator, evaluated in parallel and reduced in trial order, so a
//! report depends only on its settings.

use rand::Rng;
use rayon::prelude::*;

use super::profiles::{even_bump, random_smooth, trial_rng};
use super::{dispersion_multiplier, linearize_i, measure_dispersion, PropertyReport};
use crate::elliptic::{solve_bulk, BoundaryData, EllipticOperatorSpec, OperatorKind};
use crate::error::Result;
use crate::evolution::{run, run_coupled, EvolutionConfig};
use crate::fboperator::{op_i, op_i_minus, solve_phase, FluxOptions, ProbeOrder};
use crate::geometry::{build_domain, GraphInterface, PeriodicGrid, Phase};

/// Shared knobs of the randomized suites.
#[derive(Debug, Clone)]
pub struct SuiteSettings {
    pub grid: PeriodicGrid,
    pub delta: f64,
    /// Mean height of random profiles.
    pub mean: f64,
    /// Sup-norm of the random part of a profile.
    pub amplitude: f64,
    pub modes: usize,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub spec: EllipticOperatorSpec,
    pub flux: FluxOptions,
}

impl SuiteSettings {
    /// One-phase trials on `grid` around height 1.
    pub fn one_phase(grid: PeriodicGrid, trials: usize, seed: u64) -> Self {
        Self {
            grid,
            delta: 0.1,
            mean: 1.0,
            amplitude: 0.3,
            modes: 4,
            trials,
            seed,
            tolerance: 1e-6,
            spec: EllipticOperatorSpec::laplace(),
            flux: FluxOptions::default(),
        }
    }

    fn profile(&self, rng: &mut impl Rng) -> Result<GraphInterface> {
        let shape = random_smooth(rng, &self.grid, self.modes);
        let values = shape.iter().map(|s| self.mean + self.amplitude * s).collect();
        GraphInterface::one_phase(self.grid, values, self.delta)
    }

    fn first_order(&self) -> FluxOptions {
        FluxOptions {
            order: ProbeOrder::First,
            ..self.flux
        }
    }
}

fn max_or_zero(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

/// Collects per-trial violations into a report; the first error wins.
fn reduce(name: &str, trials: usize, tol: f64, results: Vec<Result<f64>>) -> PropertyReport {
    let mut worst = 0.0f64;
    for r in results {
        match r {
            Ok(v) => worst = worst.max(v),
            Err(e) => return PropertyReport::errored(name, trials, tol, e),
        }
    }
    PropertyReport::new(name, trials, worst, tol)
}

/// Touching pairs `f <= g = f + psi` with `psi >= 0` even about a random
/// column `x0`, `psi(x0) = 0`: checks `I(f)(x0) <= I(g)(x0)` with order-1 probes.
pub fn check_gcp(s: &SuiteSettings) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let n = s.grid.n_x();
    let inputs: Vec<Result<(GraphInterface, GraphInterface, usize)>> = (0..s.trials)
        .map(|_| {
            let f = s.profile(&mut rng)?;
            let x0 = rng.random_range(0..n);
            let amp = rng.random_range(0.02..0.2);
            let psi = even_bump(&mut rng, &s.grid, x0, s.modes, amp);
            let g = f.with_values(f.values().iter().zip(&psi).map(|(a, b)| a + b).collect())?;
            Ok((f, g, x0))
        })
        .collect();
    let opts = s.first_order();
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|inp| {
            let (f, g, x0) = inp?;
            let a = op_i(&f, &s.spec, &opts)?.i_plus[x0];
            let b = op_i(&g, &s.spec, &opts)?.i_plus[x0];
            Ok((a - b).max(0.0))
        })
        .collect();
    reduce("gcp", s.trials, s.tolerance, results)
}

/// `f <= g` implies `U_f <= U_g` on the common interior nodes.
pub fn check_bulk_monotone(s: &SuiteSettings) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let n = s.grid.n_x();
    let inputs: Vec<Result<(GraphInterface, GraphInterface)>> = (0..s.trials)
        .map(|_| {
            let f = s.profile(&mut rng)?;
            let x0 = rng.random_range(0..n);
            let lift = rng.random_range(0.0..0.05);
            let amp = rng.random_range(0.01..0.2);
            let psi = even_bump(&mut rng, &s.grid, x0, s.modes, amp);
            let g = f.with_values(f.values().iter().zip(&psi).map(|(a, b)| a + b + lift).collect())?;
            Ok((f, g))
        })
        .collect();
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|inp| {
            let (f, g) = inp?;
            let (df, uf) = solve_phase(&f, Phase::Positive, &s.spec, s.flux.tol)?;
            let (dg, ug) = solve_phase(&g, Phase::Positive, &s.spec, s.flux.tol)?;
            Ok(max_or_zero(df.nodes().iter().enumerate().filter_map(|(p, &(i, j))| {
                dg.unknown(i, j).map(|q| uf.values[p] - ug.values[q])
            })))
        })
        .collect();
    reduce("bulk_monotone", s.trials, s.tolerance, results)
}

/// `I(shift(f, j))[i] == I(f)[i + j]` for random integer shifts.
pub fn check_translation(s: &SuiteSettings, shifts_per_profile: usize) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let n = s.grid.n_x();
    let inputs: Vec<Result<(GraphInterface, Vec<isize>)>> = (0..s.trials)
        .map(|_| {
            let f = s.profile(&mut rng)?;
            let shifts = (0..shifts_per_profile).map(|_| rng.random_range(1..n) as isize).collect();
            Ok((f, shifts))
        })
        .collect();
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|inp| {
            let (f, shifts) = inp?;
            let base = op_i(&f, &s.spec, &s.flux)?.i_plus;
            let mut worst = 0.0f64;
            for j in shifts {
                let moved = op_i(&f.shifted(j), &s.spec, &s.flux)?.i_plus;
                for (i, v) in moved.iter().enumerate() {
                    worst = worst.max((v - base[s.grid.wrap(i as isize + j)]).abs());
                }
            }
            Ok(worst)
        })
        .collect();
    reduce("translation", s.trials * shifts_per_profile, s.tolerance, results)
}

/// `I(f + c) <= I(f)` for every `c` in `shifts`.
pub fn check_constant_shift(s: &SuiteSettings, shifts: &[f64]) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let inputs: Vec<Result<GraphInterface>> = (0..s.trials).map(|_| s.profile(&mut rng)).collect();
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|inp| {
            let f = inp?;
            let base = op_i(&f, &s.spec, &s.flux)?.i_plus;
            let mut worst = 0.0f64;
            for &c in shifts {
                let up = op_i(&f.add_constant(c)?, &s.spec, &s.flux)?.i_plus;
                worst = worst.max(max_or_zero(up.iter().zip(&base).map(|(a, b)| a - b)));
            }
            Ok(worst)
        })
        .collect();
    reduce("constant_shift", s.trials * shifts.len(), s.tolerance, results)
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Perturbations vanishing on the window `|x - x0| <= R` move `I(x0)` by an
/// amount non-increasing in `R`, and by less than a tenth of the perturbation
/// once `R >= period/4`.
///
/// The perturbation is `amplitude * smoothstep((d - R) / (period/8))`. The
/// violation is the larger of the worst increase of the response across
/// consecutive radii and the excess of `response / amplitude` over 0.1.
pub fn check_far_field_decay(s: &SuiteSettings, radii: &[f64]) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let n = s.grid.n_x();
    let p = s.grid.period();
    let inputs: Vec<Result<(GraphInterface, usize)>> = (0..s.trials)
        .map(|_| Ok((s.profile(&mut rng)?, rng.random_range(0..n))))
        .collect();
    let amp = s.amplitude;
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|inp| {
            let (f, x0) = inp?;
            let base = op_i(&f, &s.spec, &s.flux)?.i_plus[x0];
            let xc = s.grid.x(x0);
            let mut resp = Vec::with_capacity(radii.len());
            for &r in radii {
                let values = f
                    .values()
                    .iter()
                    .zip(s.grid.xs())
                    .map(|(v, x)| {
                        let d = s.grid.periodic_offset(x, xc).abs();
                        v + amp * smoothstep((d - r) / (p / 8.0))
                    })
                    .collect();
                resp.push((op_i(&f.with_values(values)?, &s.spec, &s.flux)?.i_plus[x0] - base).abs());
            }
            let growth = max_or_zero(resp.windows(2).map(|w| w[1] - w[0]));
            let far = max_or_zero(
                radii
                    .iter()
                    .zip(&resp)
                    .filter(|(r, _)| **r >= p / 4.0)
                    .map(|(_, v)| v / amp - 0.1),
            );
            Ok(growth.max(far))
        })
        .collect();
    reduce("far_field_decay", s.trials, s.tolerance, results)
}

/// Shift moduli and the Lipschitz seminorm never grow along a run.
///
/// Violation: the largest of `omega_h(f(t)) - omega_h(f0)` over all shifts
/// `h` and frames, and `Lip(f(t_k)) - Lip(f(t_{k-1}))` over consecutive frames.
pub fn check_modulus(f0: &GraphInterface, config: &EvolutionConfig, tolerance: f64) -> PropertyReport {
    let name = if f0.is_two_phase() { "modulus_two_phase" } else { "modulus_one_phase" };
    let tr = run(f0, config);
    let n = f0.len();
    let m0: Vec<f64> = (1..=n / 2).map(|h| f0.shift_modulus(h)).collect();
    let mut worst = 0.0f64;
    let mut prev_lip = f0.lipschitz_seminorm();
    for fr in &tr.frames {
        for (h, m) in (1..=n / 2).zip(&m0) {
            worst = worst.max(fr.f.shift_modulus(h) - m);
        }
        let lip = fr.f.lipschitz_seminorm();
        worst = worst.max(lip - prev_lip);
        prev_lip = lip;
    }
    let report = PropertyReport::new(name, tr.frames.len(), worst, tolerance);
    match tr.failure {
        Some(e) => PropertyReport::errored(name, tr.frames.len(), tolerance, e),
        None => report,
    }
}

/// Ordered initial pairs `f0 <= g0` stay ordered under a shared step
/// schedule, with order-1 probes.
pub fn check_evolution_comparison(s: &SuiteSettings, config: &EvolutionConfig) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let n = s.grid.n_x();
    let inputs: Vec<Result<[GraphInterface; 2]>> = (0..s.trials)
        .map(|_| {
            let f = s.profile(&mut rng)?;
            let x0 = rng.random_range(0..n);
            let lift = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.05) };
            let amp = rng.random_range(0.02..0.2);
            let psi = even_bump(&mut rng, &s.grid, x0, s.modes, amp);
            let g = f.with_values(f.values().iter().zip(&psi).map(|(a, b)| a + b + lift).collect())?;
            Ok([f, g])
        })
        .collect();
    let mut cfg = config.clone();
    cfg.flux.order = ProbeOrder::First;
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|inp| {
            let pair = inp?;
            let trs = run_coupled(&pair, &cfg);
            if let Some(e) = &trs[0].failure {
                return Err(e.clone());
            }
            Ok(max_or_zero(trs[0].frames.iter().zip(&trs[1].frames).flat_map(|(a, b)| {
                a.f.values().iter().zip(b.f.values()).map(|(x, y)| x - y).collect::<Vec<_>>()
            })))
        })
        .collect();
    reduce("evolution_comparison", s.trials, s.tolerance, results)
}

/// Kernel structure at flat bases: one report each for the action on
/// constants (relative error of `c0` against `-1/a^2`, tolerance
/// `c0_rel_tol`), off-diagonal positivity (`-min w_j`, tolerance
/// `positivity_tol`) and tail monotonicity (largest increase of the tail
/// mass over increasing radii, tolerance 0).
pub fn check_kernel_structure(
    grid: PeriodicGrid,
    bases: &[f64],
    delta: f64,
    spec: &EllipticOperatorSpec,
    tol: f64,
    c0_rel_tol: f64,
    positivity_tol: f64,
) -> [PropertyReport; 3] {
    let opts = FluxOptions::first_order(tol);
    let radii: Vec<f64> = (0..=grid.n_x() / 2).map(|k| k as f64 * grid.dx() + 0.5 * grid.dx()).collect();
    let mut c0_err = 0.0f64;
    let mut neg = 0.0f64;
    let mut tail_up = 0.0f64;
    let mut notes = Vec::new();
    for &a in bases {
        let est = GraphInterface::one_phase(grid, vec![a; grid.n_x()], delta)
            .and_then(|f| linearize_i(&f, 0, spec, &opts));
        let k = match est {
            Ok(k) => k,
            Err(e) => {
                return [
                    PropertyReport::errored("kernel_c0", bases.len(), c0_rel_tol, &e),
                    PropertyReport::errored("kernel_positivity", bases.len(), positivity_tol, &e),
                    PropertyReport::errored("kernel_tail", bases.len(), 0.0, &e),
                ]
            }
        };
        let want = -1.0 / (a * a);
        c0_err = c0_err.max(((k.c0 - want) / want).abs());
        neg = neg.max(-k.min_off_diagonal());
        let tails = k.tail_profile(&radii);
        tail_up = tail_up.max(max_or_zero(tails.windows(2).map(|w| w[1] - w[0])));
        notes.push(format!(
            "a = {a}: c0 = {:.6}, min off-diagonal weight = {:.3e}, tail(P/4) / off-diagonal mass = {:.3e}",
            k.c0,
            k.min_off_diagonal(),
            k.tail_mass(grid.period() / 4.0) / k.off_diagonal_mass()
        ));
    }
    let mut c0 = PropertyReport::new("kernel_c0", bases.len(), c0_err, c0_rel_tol);
    c0.notes = notes;
    [
        c0,
        PropertyReport::new("kernel_positivity", bases.len(), neg.max(0.0), positivity_tol),
        PropertyReport::new("kernel_tail", bases.len(), tail_up, 0.0),
    ]
}

/// Relative error of the measured dispersion multiplier at height `a` for
/// each `(k, tolerance)`; the violation is the largest excess of error over
/// tolerance, so the report tolerance is 0.
pub fn check_dispersion(
    grid: PeriodicGrid,
    a: f64,
    modes: &[(usize, f64)],
    amplitude: f64,
    flux: &FluxOptions,
) -> PropertyReport {
    let spec = EllipticOperatorSpec::laplace();
    let mut worst = f64::NEG_INFINITY;
    let mut notes = Vec::new();
    for &(k, tol) in modes {
        let kw = 2.0 * std::f64::consts::PI * k as f64 / grid.period();
        match measure_dispersion(grid, a, k, amplitude, 0.1, &spec, flux) {
            Ok(m) => {
                let exact = dispersion_multiplier(a, kw);
                let rel = ((m - exact) / exact).abs();
                worst = worst.max(rel - tol);
                notes.push(format!("k = {k}: measured {m:.6}, closed form {exact:.6}, relative error {rel:.3e}"));
            }
            Err(e) => return PropertyReport::errored("dispersion", modes.len(), 0.0, e),
        }
    }
    let mut r = PropertyReport::new("dispersion", modes.len(), worst.max(0.0), 0.0);
    r.notes = notes;
    r
}

/// Two-phase reflection identity: `I^-(f)_i` equals the one-phase `I` of
/// `g_i = L - f_{-i}` at column `-i`. `s.grid` must be the strip and
/// `s.mean` is replaced by `L/2`.
pub fn check_reflection(s: &SuiteSettings) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let l = s.grid.height_cap();
    let inputs: Vec<Vec<f64>> = (0..s.trials)
        .map(|_| {
            random_smooth(&mut rng, &s.grid, s.modes)
                .iter()
                .map(|v| 0.5 * l + s.amplitude * v)
                .collect()
        })
        .collect();
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|values| {
            let f = GraphInterface::two_phase(s.grid, values.clone(), s.delta)?;
            let direct = op_i_minus(&f, &s.spec, &s.flux)?;
            let g = GraphInterface::one_phase(s.grid, values.iter().map(|v| l - v).collect(), s.delta)?.reflected();
            let via = op_i(&g, &s.spec, &s.flux)?.i_plus;
            Ok(max_or_zero(
                (0..direct.len()).map(|i| (direct[i] - via[s.grid.wrap(-(i as isize))]).abs()),
            ))
        })
        .collect();
    reduce("reflection", s.trials, s.tolerance, results)
}

/// `U_{M-} <= U_Laplace <= U_{M+}` nodewise and the same order for `I`, with
/// Pucci bounds `(lambda, big_lambda)` enclosing 1.
pub fn check_pucci_ordering(s: &SuiteSettings, lambda: f64, big_lambda: f64) -> PropertyReport {
    let mut rng = trial_rng(s.seed);
    let inputs: Vec<Result<GraphInterface>> = (0..s.trials).map(|_| s.profile(&mut rng)).collect();
    let specs = [
        EllipticOperatorSpec::new(OperatorKind::PucciMinus, lambda, big_lambda),
        Ok(EllipticOperatorSpec::laplace()),
        EllipticOperatorSpec::new(OperatorKind::PucciPlus, lambda, big_lambda),
    ];
    let results: Vec<Result<f64>> = inputs
        .into_par_iter()
        .map(|inp| {
            let f = inp?;
            let d = build_domain(&f, Phase::Positive)?;
            let bc = BoundaryData::free_boundary(Phase::Positive);
            let mut fields = Vec::new();
            let mut fluxes = Vec::new();
            for spec in &specs {
                let spec = spec.clone()?;
                let u = solve_bulk(&d, &spec, &bc, s.flux.tol)?;
                fluxes.push(super::super::fboperator::fluxes_from_field(&u, &d, &s.flux)?.0);
                fields.push(u.values);
            }
            let pair_gap = |a: &[f64], b: &[f64]| max_or_zero(a.iter().zip(b).map(|(x, y)| x - y));
            Ok(pair_gap(&fields[0], &fields[1])
                .max(pair_gap(&fields[1], &fields[2]))
                .max(pair_gap(&fluxes[0], &fluxes[1]))
                .max(pair_gap(&fluxes[1], &fluxes[2])))
        })
        .collect();
    reduce("pucci_ordering", s.trials, s.tolerance, results)
}

/// Max-norm errors of the Laplace solve against the harmonic field
/// `u = y/2 + e^y cos(x)/4 + sinh(2y) sin(2x)/20` on
/// `0 < y < 1 + 0.3 sin x` (period `2 pi`), with `u` as Dirichlet data on
/// every boundary, for each column count `n` (isotropic grid, `n/2` rows).
pub fn elliptic_convergence(resolutions: &[usize], tol: f64) -> Result<Vec<f64>> {
    let exact = |x: f64, y: f64| 0.5 * y + 0.25 * y.exp() * x.cos() + 0.05 * (2.0 * y).sinh() * (2.0 * x).sin();
    resolutions
        .iter()
        .map(|&n| {
            let g = PeriodicGrid::isotropic(n, n / 2, 2.0 * std::f64::consts::PI)?;
            let f = GraphInterface::from_fn(g, 0.1, false, |x| 1.0 + 0.3 * x.sin())?;
            let d = build_domain(&f, Phase::Positive)?;
            let u = solve_bulk(&d, &EllipticOperatorSpec::laplace(), &BoundaryData::from_field(exact), tol)?;
            Ok(max_or_zero(d.nodes().iter().enumerate().map(|(p, &(i, j))| {
                (u.values[p] - exact(g.x(i), g.y(j))).abs()
            })))
        })
        .collect()
}

/// Observed orders `log2(e_k / e_{k+1})` for successive doublings.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
