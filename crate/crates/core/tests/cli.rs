//! Config handling, serialized outputs and the command-line entry point.

use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;

use hsflow::io::{
    exit_code, read_frames, EvolutionSection, GridConfig, InitialProfile, LawConfig, OperatorEntry, OperatorName,
    PhaseCount, RunConfig, SUMMARY_HEADER,
};
use hsflow::fboperator::ProbeOrder;
use hsflow::FbError;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hsflow"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

const FLAT_RUN: &str = r#"
[grid]
n_x = 32
n_y = 32

[initial]
kind = "flat"
value = 1.0

[evolution]
t_final = 1.5
dt_max = 1e-3
frame_stride = 100
"#;

#[test]
fn flat_run_reaches_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FLAT_RUN);
    let out = dir.path().join("out");
    let (code, _, err) = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let frames = read_frames(&out.join("frames.ndjson")).unwrap();
    let last = frames.last().unwrap();
    assert_eq!(last.t, 1.5);
    assert!(last.f.iter().all(|v| (v - 2.0).abs() < 2e-3), "{}", last.f[0]);
    for w in frames.windows(2) {
        assert!(w[1].t > w[0].t);
        assert_eq!(w[1].f.len(), w[0].f.len());
    }
    for fr in &frames {
        fr.check().unwrap();
        assert!(fr.i_minus.is_none());
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some(SUMMARY_HEADER));
    assert_eq!(lines.count(), frames.len());
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nn_x = 32\nn_y = 32\n[initial]\nkind = \"sine\"\nmean = 1.0\namp = 0.2\nmode = 2\n[evolution]\nt_final = 0.2\n",
    );
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        let (code, _, err) = run_cli(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
        texts.push((
            std::fs::read(out.join("frames.ndjson")).unwrap(),
            std::fs::read(out.join("summary.csv")).unwrap(),
        ));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn probe_of_flat_half_is_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn_x = 32\nn_y = 32\n[initial]\nkind = \"flat\"\nvalue = 0.5\n");
    let out = dir.path().join("p");
    let (code, _, err) = run_cli(&["probe", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let rec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("probe.json")).unwrap()).unwrap();
    let vals = rec["values"].as_array().unwrap();
    assert_eq!(vals.len(), 32);
    assert!(vals.iter().all(|v| (v.as_f64().unwrap() - 2.0).abs() < 1e-9));
}

#[test]
fn probe_subjects_need_matching_phase() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "phase = \"two\"\n[grid]\nn_x = 16\nn_y = 32\nstrip_height = 3.0\n[initial]\nkind = \"flat\"\nvalue = 1.0\n",
    );
    let c = cfg.to_str().unwrap();
    let out = dir.path().join("p");
    let o = out.to_str().unwrap();
    for (subject, expect) in [("Iminus", 0.5), ("Iplus", 1.0), ("H", 0.5)] {
        let (code, _, err) = run_cli(&["probe", "--subject", subject, "--config", c, "--out", o]);
        assert_eq!(code, 0, "{subject}: {err}");
        let rec: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("probe.json")).unwrap()).unwrap();
        let v = rec["values"][0].as_f64().unwrap();
        assert!((v - expect).abs() < 1e-9, "{subject}: {v}");
    }
    let (code, _, _) = run_cli(&["probe", "--subject", "I", "--config", c, "--out", o]);
    assert_eq!(code, 2);
}

#[test]
fn linearize_writes_a_kernel_document() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nn_x = 32\nn_y = 24\n[initial]\nkind = \"flat\"\nvalue = 1.0\n[evolution]\norder = 1\n[linearize]\nbase_point = 4\n",
    );
    let out = dir.path().join("k");
    let (code, _, err) = run_cli(&["linearize", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let k: hsflow::analysis::KernelEstimate =
        serde_json::from_str(&std::fs::read_to_string(out.join("kernel.json")).unwrap()).unwrap();
    assert_eq!(k.base_point, 4);
    assert_eq!(k.weights.len(), 32);
    assert_eq!(k.order, ProbeOrder::First);
    assert!((k.c0 + 1.0).abs() < 0.02);
}

#[test]
fn verify_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 3\n[grid]\nn_x = 48\nn_y = 48\n[verify]\ntrials = 2\n");
    let out = dir.path().join("v");
    let (code, stdout, err) = run_cli(&[
        "verify",
        "translation",
        "constant_shift",
        "gcp",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stdout}{err}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{stdout}");
    let reports: Vec<hsflow::analysis::PropertyReport> =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(reports.len(), 3);
    let (code, _, _) = run_cli(&["verify", "nonsense", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "[grid]\nn_x = 32\nunknown = 1\n");
    let (code, _, err) = run_cli(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("unknown"), "{err}");

    let missing_l = write_config(dir.path(), "phase = \"two\"\n");
    let (code, _, err) = run_cli(&["run", "--config", missing_l.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("grid.strip_height"), "{err}");

    let out = dir.path().join("band");
    let rising = write_config(
        dir.path(),
        "[grid]\nn_x = 16\nn_y = 64\nheight_cap = 4.0\n[initial]\nkind = \"flat\"\nvalue = 3.5\n[evolution]\nt_final = 2.0\n",
    );
    let (code, _, err) = run_cli(&["run", "--config", rising.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 4, "{err}");
    // Frames before the failure are kept.
    assert!(!read_frames(&out.join("frames.ndjson")).unwrap().is_empty());

    let (code, _, _) = run_cli(&["run", "--resolution", "32by32"]);
    assert_eq!(code, 2);

    assert_eq!(exit_code(&FbError::NonConvergence { residual: 1.0, iterations: 3 }), 3);
    assert_eq!(exit_code(&FbError::PolicyIteration { history: vec![] }), 3);
    assert_eq!(exit_code(&FbError::PhaseBand { t: Some(0.1), columns: vec![1] }), 4);
    assert_eq!(exit_code(&FbError::Config("x".into())), 2);
}

#[test]
fn samples_file_is_resolved_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let samples: Vec<String> = (0..16).map(|i| format!("{}", 1.0 + 0.01 * i as f64)).collect();
    std::fs::write(dir.path().join("f0.txt"), samples.join("\n")).unwrap();
    let cfg = write_config(
        dir.path(),
        "[grid]\nn_x = 16\nn_y = 16\n[initial]\nkind = \"samples\"\npath = \"f0.txt\"\n",
    );
    let c = hsflow::io::parse_config(&cfg).unwrap();
    let f = c.initial_interface().unwrap();
    assert_eq!(f.values()[3], 1.03);
    let wrong = write_config(
        dir.path(),
        "[grid]\nn_x = 8\nn_y = 16\n[initial]\nkind = \"samples\"\npath = \"f0.txt\"\n",
    );
    assert!(hsflow::io::parse_config(&wrong).unwrap().initial_interface().is_err());
    let absent = write_config(dir.path(), "[initial]\nkind = \"samples\"\npath = \"nope.txt\"\n");
    assert!(matches!(hsflow::io::parse_config(&absent), Err(FbError::Config(_))));
}

fn operator_entry() -> impl Strategy<Value = OperatorEntry> {
    (0usize..3, 0.5f64..1.0, 1.0f64..3.0).prop_map(|(k, lambda, big_lambda)| OperatorEntry {
        kind: [OperatorName::Laplace, OperatorName::PucciPlus, OperatorName::PucciMinus][k],
        lambda,
        big_lambda,
    })
}

fn run_config() -> impl Strategy<Value = RunConfig> {
    (
        any::<bool>(),
        0..=i64::MAX as u64,
        8usize..300,
        8usize..300,
        0usize..4,
        operator_entry(),
        operator_entry(),
        0usize..3,
        (0.1f64..5.0, 0.05f64..0.9, 1usize..10, any::<bool>(), 1e-12f64..1e-6, prop::option::of(1e-4f64..1.0)),
    )
        .prop_map(|(two, seed, n_x, n_y, law, plus, minus, init, (t, cfl, stride, first, tol, dt_max))| {
            let mut c = RunConfig {
                phase: if two { PhaseCount::Two } else { PhaseCount::One },
                seed,
                ..RunConfig::default()
            };
            c.grid = GridConfig {
                n_x,
                n_y,
                height_cap: if two { None } else { Some(3.5) },
                strip_height: if two { Some(3.5) } else { None },
                ..GridConfig::default()
            };
            c.operator.plus = plus;
            c.operator.minus = minus;
            c.law = match law {
                0 => LawConfig::Identity,
                1 if two => LawConfig::Affine,
                1 | 2 => LawConfig::Squares,
                _ => LawConfig::Table { knots: vec![[0.0, 0.0], [1.0, 0.5], [2.5, 3.0]] },
            };
            c.initial = match init {
                0 => InitialProfile::Flat { value: 1.25 },
                _ => InitialProfile::Sine { mean: 1.5, amp: 0.25, mode: init as u32 },
            };
            c.evolution = EvolutionSection {
                t_final: t,
                cfl,
                dt_max,
                frame_stride: stride,
                order: if first { ProbeOrder::First } else { ProbeOrder::Second },
                tol,
                probe_step: None,
            };
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(c in run_config()) {
        c.validate().unwrap();
        let text = c.to_toml().unwrap();
        let back = RunConfig::from_toml(&text, None).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }
}
