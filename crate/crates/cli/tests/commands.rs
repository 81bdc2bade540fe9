use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use colbreak::output::{read_trajectory_csv, Manifest, CSV_HEADER};
use colbreak::{parse_config, StudyReport};
use colbreak_cli::{dispatch, Command, EXIT_ERROR, EXIT_FAILED_VERDICT, EXIT_OK};

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn manifest(out: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

const SHORT_RUN: &str = "[grid]\nn = 32\ncells_per_decade = 4\n[solver]\nt_end = 0.5\ncheckpoints = 3\n";

#[test]
fn run_default_scenario_writes_trajectory_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    assert_eq!(dispatch(Command::Run, &config, &out, Some(2)), EXIT_OK);
    for f in ["trajectory.csv", "trajectory.json", "manifest.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    let m = manifest(&out);
    assert_eq!(m.command, "run");
    assert_eq!(m.threads, 2);
    let grid = m.grid.as_ref().unwrap();
    assert_eq!(read_trajectory_csv(&out.join("trajectory.csv")).unwrap().len(), 11 * grid.cell_count);
    assert!(m.certificate.is_some() && m.bound_check.as_ref().unwrap().pass);
    assert!(m.max_mass_drift.unwrap() <= 1e-8);
    assert!(m.step_stats.unwrap().accepted > 0);
    assert!(!m.software.version.is_empty());
}

#[test]
fn manifest_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[kernel]\nvariant = \"singular_bound\"\nk = 0.7\nomega = 0.3\nsigma = 0.25\n\
                [probability]\nvariant = \"volume_dependent\"\nsmall = 0.9\nlarge = 0.4\ncrossover_volume = 2.0\n\
                [daughter]\ntheta = -0.2\n[diagnostics]\nextra_moments = [2.0]\ntail_volume = 3.0\n"
        .to_string()
        + SHORT_RUN;
    let config = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(dispatch(Command::Run, &config, &out, None), EXIT_OK);
    let m = manifest(&out);
    let original = parse_config(&text).unwrap();
    let echoed = parse_config(&m.config).unwrap();
    assert_eq!(echoed, original);
    assert_eq!(echoed.hash(), m.config_hash);
}

#[test]
fn uniqueness_outside_class_fails_naming_the_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[kernel]\nvariant = \"product\"\n[probability]\nvalue = 0.95\n[study]\nkind = \"uniqueness\"\n",
    );
    let out = dir.path().join("out");
    assert_eq!(dispatch(Command::CheckAssumptions, &config, &out, None), EXIT_FAILED_VERDICT);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("assumptions.json")).unwrap()).unwrap();
    let failed: Vec<&str> = report["failed_required"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(failed.contains(&"2.7"), "{failed:?}");
    assert_eq!(report["records"].as_array().unwrap().len(), 5);
}

#[test]
fn assumptions_pass_inside_the_theory() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[probability]\nvalue = 0.95\n");
    let out = dir.path().join("out");
    assert_eq!(dispatch(Command::CheckAssumptions, &config, &out, None), EXIT_OK);
    assert!(manifest(&out).outputs.contains(&"assumptions.json".to_string()));
}

#[test]
fn missing_config_is_an_execution_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for cmd in [Command::Run, Command::CheckAssumptions, Command::Study, Command::CompareAnalytic] {
        assert_eq!(dispatch(cmd, &dir.path().join("absent.toml"), &out, None), EXIT_ERROR);
    }
}

#[test]
fn invalid_config_and_missing_study_are_execution_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(dir.path(), "[daughter]\ntheta = -1.5\n");
    assert_eq!(dispatch(Command::Run, &bad, &out, None), EXIT_ERROR);
    let no_study = write_config(dir.path(), SHORT_RUN);
    assert_eq!(dispatch(Command::Study, &no_study, &out, None), EXIT_ERROR);
}

#[test]
fn unwritable_output_is_an_execution_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SHORT_RUN);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    assert_eq!(dispatch(Command::Run, &config, &blocker.join("out"), None), EXIT_ERROR);
}

#[test]
fn failing_study_verdict_exits_one() {
    // outside the uniqueness class the experiment completes but cannot pass
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[kernel]\nvariant = \"product\"\n[study]\nkind = \"uniqueness\"\n[solver]\nt_end = 0.2\n",
    );
    let out = dir.path().join("out");
    assert_eq!(dispatch(Command::Study, &config, &out, None), EXIT_FAILED_VERDICT);
    let report: StudyReport =
        serde_json::from_str(&fs::read_to_string(out.join("study.json")).unwrap()).unwrap();
    assert!(!report.passed());
}

#[test]
fn study_writes_report_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[grid]\ncells_per_decade = 4\n[solver]\nt_end = 1.0\n[study]\nkind = \"truncation_sweep\"\nn_values = [8.0, 32.0, 128.0]\n",
    );
    let out = dir.path().join("out");
    assert_eq!(dispatch(Command::Study, &config, &out, None), EXIT_OK);
    let report: StudyReport =
        serde_json::from_str(&fs::read_to_string(out.join("study.json")).unwrap()).unwrap();
    assert_eq!(report.sweep, vec![8.0, 32.0, 128.0]);
    for s in &report.series {
        let tsv = fs::read_to_string(out.join(format!("{}.tsv", s.name))).unwrap();
        assert_eq!(tsv.lines().next().unwrap(), s.columns.join("\t"));
        assert_eq!(tsv.lines().count(), s.rows.len() + 1);
    }
}

#[test]
fn compare_analytic_defaults_to_constant_kernel() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[grid]\nn = 1000\ncells_per_decade = 16\n[solver]\nt_end = 2.0\n");
    let out = dir.path().join("out");
    assert_eq!(dispatch(Command::CompareAnalytic, &config, &out, None), EXIT_OK);
    let report: StudyReport =
        serde_json::from_str(&fs::read_to_string(out.join("study.json")).unwrap()).unwrap();
    assert_eq!(report.scenario, Some(colbreak::Scenario::ConstantKernelPureCoag));
}

#[test]
fn binary_maps_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_colbreak");
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SHORT_RUN);
    let status = |args: &[&str]| Process::new(bin).args(args).output().unwrap().status.code();
    let out = dir.path().join("out");
    let (c, o) = (config.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(status(&["run", "--config", c, "--out", o, "--threads", "1"]), Some(0));
    assert_eq!(status(&["run", "--config", "/nonexistent/x.toml", "--out", o]), Some(2));
    assert_eq!(status(&["frobnicate"]), Some(2));
    assert_eq!(status(&["run", "--config", c, "--out", o, "--threads", "0"]), Some(2));
}
