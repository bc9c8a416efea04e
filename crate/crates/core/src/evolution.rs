//! Explicit time stepping of `d f / d t = G(I^+, I^-) sqrt(1 + f'^2)`.
//!
//! The step is `dt = min(dt_max, cfl * h / max(1, max|rhs|))` with
//! `h = min(dx, dy)`, shortened at the end so the last frame sits exactly at
//! `t_final`. Samples leaving the phase band halt the run; nothing is clamped.

use crate::elliptic::EllipticOperatorSpec;
use crate::error::{FbError, Result};
use crate::fboperator::{interface_fluxes, interface_velocity, Arity, FluxOptions, InterfaceFluxes, VelocityLaw};
use crate::geometry::GraphInterface;

/// Time-stepping parameters and the flow law.
#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub t_final: f64,
    pub cfl: f64,
    pub dt_max: f64,
    /// Steps between emitted frames; the initial and final frames are always emitted.
    pub frame_stride: usize,
    pub flux: FluxOptions,
    pub spec_plus: EllipticOperatorSpec,
    pub spec_minus: EllipticOperatorSpec,
    pub law: VelocityLaw,
}

pub const DEFAULT_CFL: f64 = 0.4;

impl EvolutionConfig {
    /// Laplacian bulk, order-2 probes, default CFL, every step emitted.
    pub fn new(t_final: f64, law: VelocityLaw) -> Self {
        Self {
            t_final,
            cfl: DEFAULT_CFL,
            dt_max: f64::INFINITY,
            frame_stride: 1,
            flux: FluxOptions::default(),
            spec_plus: EllipticOperatorSpec::laplace(),
            spec_minus: EllipticOperatorSpec::laplace(),
            law,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(FbError::InvalidInput(format!("T must be positive, got {}", self.t_final)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(FbError::InvalidInput(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0) {
            return Err(FbError::InvalidInput(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if self.frame_stride == 0 {
            return Err(FbError::InvalidInput("frame_stride must be at least 1".into()));
        }
        self.spec_plus.validate()?;
        self.spec_minus.validate()
    }

    fn check_arity(&self, f: &GraphInterface) -> Result<()> {
        let want = if f.is_two_phase() { Arity::TwoPhase } else { Arity::OnePhase };
        if self.law.arity() != want {
            return Err(FbError::InvalidInput(format!(
                "velocity law arity {:?} does not match the interface ({want:?})",
                self.law.arity()
            )));
        }
        Ok(())
    }

    /// CFL step for a velocity sample.
    pub fn stable_dt(&self, f: &GraphInterface, rhs: &[f64]) -> f64 {
        let peak = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        self.dt_max.min(self.cfl * f.grid().h_min() / peak)
    }
}

/// Summary numbers of one frame, all recomputable from its arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub min_f: f64,
    pub max_f: f64,
    pub lipschitz: f64,
    pub max_rhs: f64,
    pub dt: f64,
}

impl FrameStats {
    pub fn compute(f: &GraphInterface, rhs: &[f64], dt: f64) -> Self {
        Self {
            min_f: f.min(),
            max_f: f.max(),
            lipschitz: f.lipschitz_seminorm(),
            max_rhs: rhs.iter().fold(0.0, |m, v| m.max(v.abs())),
            dt,
        }
    }
}

/// Interface state at time `t` with the velocity evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    /// Step that led to this frame (0 for the initial frame).
    pub dt: f64,
    pub f: GraphInterface,
    pub fluxes: InterfaceFluxes,
    pub rhs: Vec<f64>,
    pub stats: FrameStats,
}

/// Frames of one run; `failure` holds the error that halted it, if any.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub failure: Option<FbError>,
}

impl Trajectory {
    pub fn last(&self) -> Option<&Frame> {
        self.frames.last()
    }

    pub fn into_result(self) -> Result<Vec<Frame>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.frames),
        }
    }
}

/// Fluxes and `d f / d t` at `f`.
pub fn velocity(f: &GraphInterface, config: &EvolutionConfig) -> Result<(InterfaceFluxes, Vec<f64>)> {
    let fluxes = interface_fluxes(f, &config.spec_plus, &config.spec_minus, &config.flux)?;
    let rhs = interface_velocity(f, &config.law, &fluxes, config.flux.tol)?;
    Ok((fluxes, rhs))
}

fn advance(f: &GraphInterface, rhs: &[f64], dt: f64, t_next: f64) -> Result<GraphInterface> {
    let values: Vec<f64> = f.values().iter().zip(rhs).map(|(v, r)| v + dt * r).collect();
    f.with_values(values).map_err(|e| match e {
        FbError::PhaseBand { columns, .. } => FbError::PhaseBand { t: Some(t_next), columns },
        other => other,
    })
}

/// One explicit Euler step with the CFL step size.
pub fn step(f: &GraphInterface, config: &EvolutionConfig) -> Result<(GraphInterface, f64)> {
    config.validate()?;
    config.check_arity(f)?;
    let (_, rhs) = velocity(f, config)?;
    let dt = config.stable_dt(f, &rhs);
    Ok((advance(f, &rhs, dt, dt)?, dt))
}

/// Evolves `f0` to `t_final`.
pub fn run(f0: &GraphInterface, config: &EvolutionConfig) -> Trajectory {
    run_coupled(std::slice::from_ref(f0), config)
        .pop()
        .expect("one trajectory per initial datum")
}

/// Evolves several initial data with one shared step schedule: every step
/// uses the smallest CFL step over the members, so frames align in time.
///
/// A failure in any member halts all of them at the same step.
pub fn run_coupled(initial: &[GraphInterface], config: &EvolutionConfig) -> Vec<Trajectory> {
    let mut out: Vec<Trajectory> = initial
        .iter()
        .map(|_| Trajectory {
            frames: Vec::new(),
            failure: None,
        })
        .collect();
    let fail = |out: &mut Vec<Trajectory>, e: FbError| {
        for tr in out.iter_mut() {
            tr.failure = Some(e.clone());
        }
    };
    if let Err(e) = config.validate().and_then(|_| initial.iter().try_for_each(|f| config.check_arity(f))) {
        fail(&mut out, e);
        return out;
    }

    let mut state: Vec<GraphInterface> = initial.to_vec();
    let mut t = 0.0;
    let mut dt_prev = 0.0;
    let mut steps = 0usize;
    loop {
        let evals: Result<Vec<_>> = state.iter().map(|f| velocity(f, config)).collect();
        let evals = match evals {
            Ok(v) => v,
            Err(e) => {
                fail(&mut out, e);
                return out;
            }
        };
        let done = t >= config.t_final;
        if done || steps % config.frame_stride == 0 {
            for ((tr, f), (fluxes, rhs)) in out.iter_mut().zip(&state).zip(&evals) {
                tr.frames.push(Frame {
                    t,
                    dt: dt_prev,
                    f: f.clone(),
                    fluxes: fluxes.clone(),
                    stats: FrameStats::compute(f, rhs, dt_prev),
                    rhs: rhs.clone(),
                });
            }
        }
        if done {
            return out;
        }
        let mut dt = state
            .iter()
            .zip(&evals)
            .map(|(f, (_, rhs))| config.stable_dt(f, rhs))
            .fold(f64::INFINITY, f64::min);
        let remaining = config.t_final - t;
        // Avoid a sliver of a step caused by rounding in the accumulated time.
        if dt >= remaining * (1.0 - 1e-9) {
            dt = remaining;
        }
        let t_next = if dt == remaining { config.t_final } else { t + dt };
        let next: Result<Vec<_>> = state
            .iter()
            .zip(&evals)
            .map(|(f, (_, rhs))| advance(f, rhs, dt, t_next))
            .collect();
        match next {
            Ok(v) => state = v,
            Err(e) => {
                fail(&mut out, e);
                return out;
            }
        }
        t = t_next;
        dt_prev = dt;
        steps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PeriodicGrid;

    fn flat_one(c: f64) -> GraphInterface {
        let g = PeriodicGrid::new(16, 64, 1.0, 4.0).unwrap();
        GraphInterface::one_phase(g, vec![c; 16], 0.1).unwrap()
    }

    #[test]
    fn flat_step_is_exact() {
        let mut cfg = EvolutionConfig::new(1.0, VelocityLaw::identity(Arity::OnePhase));
        cfg.dt_max = 0.01;
        let (next, dt) = step(&flat_one(1.0), &cfg).unwrap();
        assert_eq!(dt, 0.01);
        for v in next.values() {
            assert!((v - 1.01).abs() < 1e-12);
        }
    }

    #[test]
    fn two_phase_midline_is_fixed() {
        let g = PeriodicGrid::new(16, 60, 1.0, 3.0).unwrap();
        let f = GraphInterface::two_phase(g, vec![1.5; 16], 0.1).unwrap();
        let cfg = EvolutionConfig::new(1.0, VelocityLaw::identity(Arity::TwoPhase));
        let (next, _) = step(&f, &cfg).unwrap();
        for v in next.values() {
            assert!((v - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn run_hits_final_time_and_respects_stride() {
        let mut cfg = EvolutionConfig::new(0.1, VelocityLaw::identity(Arity::OnePhase));
        cfg.dt_max = 0.015;
        cfg.frame_stride = 2;
        let tr = run(&flat_one(1.0), &cfg);
        assert!(tr.failure.is_none());
        let ts: Vec<f64> = tr.frames.iter().map(|f| f.t).collect();
        assert_eq!(ts.len(), 5);
        assert_eq!(ts[0], 0.0);
        assert!((ts[1] - 0.03).abs() < 1e-15);
        assert_eq!(*ts.last().unwrap(), 0.1);
        let last = tr.last().unwrap();
        assert!((last.dt - 0.01).abs() < 1e-12);
        assert_eq!(last.stats, FrameStats::compute(&last.f, &last.rhs, last.dt));
    }

    #[test]
    fn band_violation_halts_with_frames() {
        let g = PeriodicGrid::new(16, 40, 1.0, 2.0).unwrap();
        let f = GraphInterface::one_phase(g, vec![1.6; 16], 0.1).unwrap();
        let mut cfg = EvolutionConfig::new(5.0, VelocityLaw::identity(Arity::OnePhase));
        cfg.dt_max = 0.05;
        let tr = run(&f, &cfg);
        assert!(!tr.frames.is_empty());
        match tr.failure {
            Some(FbError::PhaseBand { t: Some(t), columns }) => {
                assert!(t > 0.0);
                assert_eq!(columns.len(), 16);
            }
            Some(FbError::ResolutionInsufficient { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let cfg = EvolutionConfig::new(1.0, VelocityLaw::identity(Arity::TwoPhase));
        assert!(step(&flat_one(1.0), &cfg).is_err());
        assert!(run(&flat_one(1.0), &cfg).failure.is_some());
    }

    #[test]
    fn coupled_runs_share_times() {
        let mut cfg = EvolutionConfig::new(0.2, VelocityLaw::identity(Arity::OnePhase));
        cfg.dt_max = 0.5;
        let trs = run_coupled(&[flat_one(0.5), flat_one(1.0)], &cfg);
        let a: Vec<f64> = trs[0].frames.iter().map(|f| f.t).collect();
        let b: Vec<f64> = trs[1].frames.iter().map(|f| f.t).collect();
        assert_eq!(a, b);
        // The faster member (rhs = 2) sets the shared step.
        let h = flat_one(0.5).grid().h_min();
        assert!((trs[1].frames[1].dt - 0.4 * h / 2.0).abs() < 1e-12);
    }
}
