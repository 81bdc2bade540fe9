//! Command dispatch for the `colbreak` binary.
//!
//! Every command reads one configuration file, writes its artifacts into an
//! output directory and maps the outcome onto the exit-code contract:
//! `0` success with all verdicts passing, `1` completed with a failing
//! verdict, `2` execution error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::json;

use colbreak::output::{write_json, write_trajectory_csv, write_tsv, Manifest, Software, TrajectorySummary};
use colbreak::studies::{analytic_compare, assumptions, required_hypotheses, run_study, simulate};
use colbreak::{load_config, Hypothesis, RunConfig, Scenario, StudyReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED_VERDICT: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    CheckAssumptions,
    Study,
    CompareAnalytic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::CheckAssumptions => "check-assumptions",
            Command::Study => "study",
            Command::CompareAnalytic => "compare-analytic",
        }
    }
}

/// Runs `command` and returns its exit code; errors are reported on stderr.
pub fn dispatch(command: Command, config: &Path, out: &Path, threads: Option<usize>) -> u8 {
    let result = match threads {
        None => execute(command, config, out),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .context("building thread pool")
            .and_then(|pool| pool.install(|| execute(command, config, out))),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED_VERDICT,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

/// `Ok(pass)` once every artifact is written.
fn execute(command: Command, config: &Path, out: &Path) -> Result<bool> {
    let start = Instant::now();
    let cfg = load_config(config).with_context(|| format!("loading {}", config.display()))?;
    let base_dir = config.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = Manifest {
        software: Software::default(),
        command: command.name().to_string(),
        config: cfg.to_toml(),
        config_hash: cfg.hash(),
        threads: rayon::current_num_threads(),
        wall_time_seconds: 0.0,
        grid: None,
        workspace: None,
        step_stats: None,
        max_mass_drift: None,
        certificate: None,
        bound_check: None,
        tail: None,
        assumptions: None,
        outputs: Vec::new(),
    };
    let pass = match command {
        Command::Run => run(&cfg, &base_dir, out, &mut manifest)?,
        Command::CheckAssumptions => check(&cfg, out, &mut manifest)?,
        Command::Study => {
            let report = run_study(&cfg, &base_dir)?;
            write_report(&report, out, &mut manifest)?
        }
        Command::CompareAnalytic => {
            let scenario = cfg.study.as_ref().map_or(Scenario::ConstantKernelPureCoag, |s| s.scenario);
            let report = analytic_compare(&cfg, scenario, &base_dir)?;
            write_report(&report, out, &mut manifest)?
        }
    };
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    manifest.outputs.push("manifest.json".into());
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(pass)
}

fn run(cfg: &RunConfig, base_dir: &Path, out: &Path, manifest: &mut Manifest) -> Result<bool> {
    let result = simulate(cfg, base_dir)?;
    let grid = cfg.grid()?;
    let csv = fs::File::create(out.join("trajectory.csv"))?;
    write_trajectory_csv(std::io::BufWriter::new(csv), &result.trajectory, &grid)?;
    write_json(
        &out.join("trajectory.json"),
        &TrajectorySummary::new(&result.trajectory, Some(&result.moments)),
    )?;
    manifest.outputs.extend(["trajectory.csv".into(), "trajectory.json".into()]);

    let report = assumptions(cfg)?;
    for h in report.failures(&required_hypotheses(cfg)) {
        eprintln!("warning: hypothesis {} fails: {}", h.id(), h.description());
    }
    let pass = result.bound_check.as_ref().is_none_or(|c| c.pass);
    manifest.grid = Some(result.grid);
    manifest.workspace = Some(result.workspace);
    manifest.step_stats = Some(result.trajectory.stats);
    manifest.max_mass_drift = Some(result.trajectory.max_mass_drift());
    manifest.certificate = result.certificate;
    manifest.bound_check = result.bound_check;
    manifest.tail = Some(result.tail);
    manifest.assumptions = Some(report);
    Ok(pass)
}

fn check(cfg: &RunConfig, out: &Path, manifest: &mut Manifest) -> Result<bool> {
    let report = assumptions(cfg)?;
    let required = required_hypotheses(cfg);
    let failed = report.failures(&required);
    let ids = |hs: &[Hypothesis]| hs.iter().map(|h| h.id()).collect::<Vec<_>>();
    for h in &failed {
        eprintln!("hypothesis {} fails: {}", h.id(), h.description());
    }
    write_json(
        &out.join("assumptions.json"),
        &json!({
            "required": ids(&required),
            "failed_required": ids(&failed),
            "records": report.records,
        }),
    )?;
    manifest.outputs.push("assumptions.json".into());
    manifest.assumptions = Some(report);
    Ok(failed.is_empty())
}

fn write_report(report: &StudyReport, out: &Path, manifest: &mut Manifest) -> Result<bool> {
    write_json(&out.join("study.json"), report)?;
    manifest.outputs.push("study.json".into());
    for series in &report.series {
        let file = format!("{}.tsv", series.name);
        let header: Vec<&str> = series.columns.iter().map(String::as_str).collect();
        write_tsv(&out.join(&file), &header, &series.rows)?;
        manifest.outputs.push(file);
    }
    for v in report.verdicts.iter().filter(|v| !v.pass) {
        eprintln!("verdict failed: {} ({} {} {})", v.name, v.value, v.relation, v.threshold);
    }
    Ok(report.passed())
}
