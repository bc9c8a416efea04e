//! Configuration, run orchestration and serialized outputs behind the CLI.

mod config;
mod output;
pub mod verify;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{linearize_i, linearize_i_with, KernelEstimate, PropertyReport};
use crate::error::{FbError, Result};
use crate::evolution::{run, Frame};
use crate::fboperator::{op_h, op_i, op_i_minus, two_phase_fluxes, ProbeOrder};

pub use config::{
    parse_config, EvolutionSection, GridConfig, InitialProfile, LawConfig, LinearizeSection, OperatorConfig,
    OperatorEntry, OperatorName, OutputConfig, PhaseCount, RunConfig, VerifySection,
};
pub use output::{
    read_frames, record_interface, write_frames, write_json, write_summary, FrameRecord, StatsRecord, SUMMARY_HEADER,
};
pub use verify::{run_criterion, VerifyPlan, CRITERIA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_BAND: i32 = 4;
pub const EXIT_PROPERTY: i32 = 5;

/// Process exit code for an error.
pub fn exit_code(e: &FbError) -> i32 {
    match e {
        FbError::Config(_)
        | FbError::InvalidGrid(_)
        | FbError::InvalidInput(_)
        | FbError::NonMonotoneLaw(_)
        | FbError::Io(_) => EXIT_CONFIG,
        FbError::NonConvergence { .. }
        | FbError::PolicyIteration { .. }
        | FbError::ProbeOutOfPhase { .. }
        | FbError::LawDomain { .. } => EXIT_SOLVER,
        FbError::PhaseBand { .. } | FbError::ResolutionInsufficient { .. } => EXIT_BAND,
    }
}

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub resolution: Option<(usize, usize)>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some((nx, ny)) = self.resolution {
            cfg.grid.n_x = nx;
            cfg.grid.n_y = ny;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `<n_x>x<n_y>`.
pub fn parse_resolution(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected <n_x>x<n_y>, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    Ok(cfg.output.dir.join(name))
}

/// Result of `cmd_run`: frames written before any failure, and the failure.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub frames: Vec<Frame>,
    pub failure: Option<FbError>,
    pub frames_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Evolves the configured interface and writes the frame stream and the
/// summary. Frames up to a failure are still written.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutcome> {
    let f0 = cfg.initial_interface()?;
    let tr = run(&f0, &cfg.evolution_config()?);
    let frames_path = out_path(cfg, &cfg.output.frames)?;
    let summary_path = out_path(cfg, &cfg.output.summary)?;
    write_frames(&frames_path, &tr.frames)?;
    write_summary(&summary_path, &tr.frames)?;
    Ok(RunOutcome {
        frames: tr.frames,
        failure: tr.failure,
        frames_path,
        summary_path,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeSubject {
    /// One-phase `I`.
    I,
    IPlus,
    IMinus,
    H,
}

impl std::str::FromStr for ProbeSubject {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "i" => Ok(Self::I),
            "iplus" => Ok(Self::IPlus),
            "iminus" => Ok(Self::IMinus),
            "h" => Ok(Self::H),
            _ => Err(format!("unknown subject {s:?}; expected I, Iplus, Iminus or H")),
        }
    }
}

/// One flux profile of the initial interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub subject: ProbeSubject,
    pub order: ProbeOrder,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub values: Vec<f64>,
    /// Columns whose order-2 probe fell back to order 1.
    pub clipped: Vec<usize>,
}

pub fn cmd_probe(cfg: &RunConfig, subject: ProbeSubject) -> Result<(ProbeRecord, PathBuf)> {
    let f = cfg.initial_interface()?;
    let opts = cfg.flux_options();
    let sp = cfg.operator.plus.spec()?;
    let sm = cfg.operator.minus.spec()?;
    let need_two = |two: bool| {
        if two != f.is_two_phase() {
            Err(FbError::Config(format!(
                "subject {subject:?} needs phase = \"{}\"",
                if two { "two" } else { "one" }
            )))
        } else {
            Ok(())
        }
    };
    let (values, clipped) = match subject {
        ProbeSubject::I => {
            need_two(false)?;
            let fl = op_i(&f, &sp, &opts)?;
            (fl.i_plus, fl.clipped)
        }
        ProbeSubject::IPlus => {
            need_two(true)?;
            let fl = two_phase_fluxes(&f, &sp, &sm, &opts)?;
            (fl.i_plus, fl.clipped)
        }
        ProbeSubject::IMinus => {
            need_two(true)?;
            (op_i_minus(&f, &sm, &opts)?, Vec::new())
        }
        ProbeSubject::H => {
            need_two(true)?;
            (op_h(&f, &cfg.law.build(cfg.arity())?, &sp, &sm, &opts)?, Vec::new())
        }
    };
    let rec = ProbeRecord {
        subject,
        order: opts.order,
        x: f.grid().xs(),
        f: f.values().to_vec(),
        values,
        clipped,
    };
    let path = out_path(cfg, &cfg.output.probe)?;
    write_json(&path, &rec)?;
    Ok((rec, path))
}

/// Kernel row of the one-phase `I` at the configured base point.
pub fn cmd_linearize(cfg: &RunConfig) -> Result<(KernelEstimate, PathBuf)> {
    let f = cfg.initial_interface()?;
    let spec = cfg.operator.plus.spec()?;
    let opts = cfg.flux_options();
    let k = match cfg.linearize.eps {
        Some(eps) => linearize_i_with(&f, cfg.linearize.base_point, eps, &spec, &opts)?,
        None => linearize_i(&f, cfg.linearize.base_point, &spec, &opts)?,
    };
    let path = out_path(cfg, &cfg.output.kernel)?;
    write_json(&path, &k)?;
    Ok((k, path))
}

/// The verification plan implied by a config: its resolution, period, band
/// margin, seed, probe settings and trial override.
pub fn verify_plan(cfg: &RunConfig) -> VerifyPlan {
    VerifyPlan {
        n_x: cfg.grid.n_x,
        n_y: cfg.grid.n_y,
        period: cfg.grid.period,
        delta: cfg.delta,
        seed: cfg.seed,
        trials: cfg.verify.trials,
        flux: cfg.flux_options(),
    }
}

/// Runs the named criteria (`all` expands to every one) and writes the reports.
pub fn cmd_verify(cfg: &RunConfig, suites: &[String]) -> Result<(Vec<PropertyReport>, PathBuf)> {
    let names: Vec<&str> = if suites.is_empty() || suites.iter().any(|s| s == "all") {
        CRITERIA.to_vec()
    } else {
        suites.iter().map(String::as_str).collect()
    };
    if let Some(bad) = names.iter().find(|n| !CRITERIA.contains(n)) {
        return Err(FbError::Config(format!(
            "unknown suite {bad:?}; known: all, {}",
            CRITERIA.join(", ")
        )));
    }
    let plan = verify_plan(cfg);
    let mut reports = Vec::new();
    for n in names {
        reports.extend(run_criterion(n, &plan).expect("known criterion"));
    }
    let path = out_path(cfg, &cfg.output.report)?;
    write_json(&path, &reports)?;
    Ok((reports, path))
}

/// Reads a config file and applies overrides.
pub fn load(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    overrides.apply(parse_config(path)?)
}
