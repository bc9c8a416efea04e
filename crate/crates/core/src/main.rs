use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hsflow::io::{
    cmd_linearize, cmd_probe, cmd_run, cmd_verify, exit_code, load, parse_resolution, Overrides, ProbeSubject,
    EXIT_PROPERTY,
};
use hsflow::FbError;

#[derive(Parser)]
#[command(name = "hsflow", version, about = "Nonlocal interface flows on a periodic strip")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed of the randomized suites (overrides seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid override, `<n_x>x<n_y>`.
    #[arg(long, global = true, value_parser = parse_resolution)]
    resolution: Option<(usize, usize)>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial interface and write frames and a summary.
    Run,
    /// Evaluate one flux profile of the initial interface.
    Probe {
        /// I, Iplus, Iminus or H.
        #[arg(long, default_value = "I")]
        subject: ProbeSubject,
    },
    /// Estimate the kernel row of I at the configured base point.
    Linearize,
    /// Run property suites; exits 0 iff all pass.
    Verify {
        /// Suite names, or `all`.
        suites: Vec<String>,
    },
}

fn fail(e: &FbError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(e) as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        resolution: cli.resolution,
    };
    let cfg = match &cli.config {
        Some(p) => load(p, &overrides),
        None => overrides.apply(Default::default()),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match cli.command {
        Command::Run => match cmd_run(&cfg) {
            Ok(out) => {
                println!("wrote {} frames to {}", out.frames.len(), out.frames_path.display());
                println!("summary: {}", out.summary_path.display());
                match out.failure {
                    Some(e) => fail(&e),
                    None => ExitCode::SUCCESS,
                }
            }
            Err(e) => fail(&e),
        },
        Command::Probe { subject } => match cmd_probe(&cfg, subject) {
            Ok((_, path)) => {
                println!("wrote {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Linearize => match cmd_linearize(&cfg) {
            Ok((k, path)) => {
                println!("c0 = {:.6}, fd step = {:.3e}; wrote {}", k.c0, k.fd_step, path.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Verify { suites } => match cmd_verify(&cfg, &suites) {
            Ok((reports, path)) => {
                for r in &reports {
                    println!("{}", r.line());
                }
                println!("wrote {}", path.display());
                if reports.iter().all(|r| r.pass) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_PROPERTY as u8)
                }
            }
            Err(e) => fail(&e),
        },
    }
}
