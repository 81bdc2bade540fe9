//! Experiment suites: single runs with certificates, truncation sweeps,
//! analytic comparisons and the uniqueness contraction experiment.
//!
//! Independent runs execute concurrently; report assembly is sequential, so
//! every metric is reproducible bit for bit.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Scenario, StudyKind};
use crate::diagnostics::{
    bound_certificate, check_bound, contraction_rate, moment, s_norm, tail_mass,
    weighted_distance, BoundCertificate, BoundCheck, MomentRecord, TailMass,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridSummary};
use crate::integrator::{run, InitialData, Trajectory};
use crate::kernels::{
    check_assumptions, AssumptionReport, CoalescenceProbability, Fragmentation, Hypothesis,
    KernelModel, KernelVariant, SamplePlan,
};
use crate::operators::{OperatorWorkspace, State, WorkspaceStats};

/// Everything produced by one configured run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub grid: GridSummary,
    pub workspace: WorkspaceStats,
    pub trajectory: Trajectory,
    /// Per-checkpoint moments including the configured extra exponents.
    pub moments: Vec<MomentRecord>,
    pub certificate: Option<BoundCertificate>,
    pub bound_check: Option<BoundCheck>,
    pub tail: Vec<TailMass>,
}

/// Hypotheses a configuration must satisfy; the uniqueness class only
/// matters when a uniqueness study is requested.
pub fn required_hypotheses(cfg: &RunConfig) -> Vec<Hypothesis> {
    let mut req = vec![
        Hypothesis::KernelGrowth,
        Hypothesis::CoalescenceFloor,
        Hypothesis::NegativeMoment,
        Hypothesis::FragmentSingularity,
    ];
    if cfg.study.as_ref().is_some_and(|s| s.kind == StudyKind::Uniqueness) {
        req.push(Hypothesis::UniquenessKernel);
    }
    req
}

pub fn assumptions(cfg: &RunConfig) -> Result<AssumptionReport> {
    Ok(check_assumptions(
        &cfg.kernel_model()?,
        &cfg.probability,
        &cfg.fragmentation()?,
        &SamplePlan::default(),
    ))
}

/// `S`-norm bound constants for a run of `cfg` starting from `initial`.
pub fn certificate_for(
    cfg: &RunConfig,
    kernel: &KernelModel,
    initial: &State,
    grid: &Grid,
) -> Result<Option<BoundCertificate>> {
    let Some(d) = cfg.fragmentation()?.power_law().copied() else {
        return Ok(None);
    };
    let eta = match d.eta(2.0 * kernel.sigma) {
        Ok(eta) => eta,
        Err(_) => return Ok(None),
    };
    bound_certificate(
        s_norm(initial, grid, kernel.sigma)?,
        kernel.bound_k,
        kernel.omega,
        kernel.sigma,
        eta,
        cfg.solver.t_end,
    )
    .map(Some)
}

fn simulate_from(cfg: &RunConfig, ws: &OperatorWorkspace, initial: &State) -> Result<RunResult> {
    let grid = ws.grid();
    let kernel = *ws.kernel();
    let trajectory = run(ws, initial, &cfg.solver_config())?;
    let moments = trajectory
        .states()
        .map(|s| MomentRecord::compute(s, grid, kernel.sigma, &cfg.diagnostics.extra_moments))
        .collect::<Result<Vec<_>>>()?;
    let certificate = certificate_for(cfg, &kernel, initial, grid)?;
    let bound_check = certificate
        .as_ref()
        .map(|c| check_bound(trajectory.states(), grid, c))
        .transpose()?;
    let m1 = moment(initial, grid, 1.0)?;
    let tail = trajectory
        .states()
        .map(|s| tail_mass(s, grid, cfg.diagnostics.tail_volume, kernel.sigma, m1))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        grid: grid.summary(),
        workspace: ws.stats().clone(),
        trajectory,
        moments,
        certificate,
        bound_check,
        tail,
    })
}

/// Assembles, truncates the initial data and integrates.
pub fn simulate(cfg: &RunConfig, base_dir: &Path) -> Result<RunResult> {
    let ws = cfg.workspace()?;
    let initial = cfg.initial_state(ws.grid(), base_dir)?;
    simulate_from(cfg, &ws, &initial)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub parameter: f64,
    pub cells: usize,
    pub final_mass: Option<f64>,
    pub final_number: Option<f64>,
    pub max_mass_drift: Option<f64>,
    pub accepted_steps: Option<usize>,
    pub rejected_steps: Option<usize>,
    pub failure: Option<String>,
}

impl RunSummary {
    fn from_run(label: String, parameter: f64, cells: usize, traj: &Result<Trajectory>) -> Self {
        match traj {
            Ok(t) => {
                let last = t.checkpoints.last().expect("trajectory is never empty");
                Self {
                    label,
                    parameter,
                    cells,
                    final_mass: Some(last.moments.mass()),
                    final_number: Some(last.moments.number()),
                    max_mass_drift: Some(t.max_mass_drift()),
                    accepted_steps: Some(t.stats.accepted),
                    rejected_steps: Some(t.stats.rejected),
                    failure: None,
                }
            }
            Err(e) => Self {
                label,
                parameter,
                cells,
                final_mass: None,
                final_number: None,
                max_mass_drift: None,
                accepted_steps: None,
                rejected_steps: None,
                failure: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    #[serde(deserialize_with = "null_as_nan")]
    pub value: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub threshold: f64,
    /// How `value` is compared with `threshold`, e.g. `"<="`.
    pub relation: String,
    pub pass: bool,
}

/// JSON has no NaN; serde_json writes it as `null`.
fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Verdict {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            relation: "<=".into(),
            pass: value <= threshold,
        }
    }

    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            relation: "<".into(),
            pass: value < threshold,
        }
    }

    fn failed(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: f64::NAN,
            threshold: f64::NAN,
            relation: "completed".into(),
            pass: false,
        }
    }
}

/// Plot-ready table: one row per sample of `columns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub scenario: Option<Scenario>,
    pub config_hash: String,
    pub sweep: Vec<f64>,
    pub runs: Vec<RunSummary>,
    pub metrics: Vec<(String, f64)>,
    pub verdicts: Vec<Verdict>,
    pub series: Vec<Series>,
    pub notes: Vec<String>,
}

impl StudyReport {
    fn new(kind: StudyKind, cfg: &RunConfig) -> Self {
        Self {
            kind,
            scenario: None,
            config_hash: cfg.hash(),
            sweep: Vec::new(),
            runs: Vec::new(),
            metrics: Vec::new(),
            verdicts: Vec::new(),
            series: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

/// Conservative restriction of `fine` (on `from`) onto the cells of `to`:
/// each source cell's mass is split by overlap fraction and re-expressed as a
/// density at the target pivot. Mass outside `to` is dropped.
pub fn restrict(fine: &State, from: &Grid, to: &Grid) -> Result<State> {
    if fine.len() != from.len() {
        return Err(Error::LengthMismatch {
            expected: from.len(),
            got: fine.len(),
        });
    }
    if from == to {
        return Ok(fine.clone());
    }
    let mut g = vec![0.0; to.len()];
    let mut k = 0;
    for (l, c) in to.cells().iter().enumerate() {
        while k < from.len() && from.cell(k).right <= c.left {
            k += 1;
        }
        let mut mass = 0.0;
        let mut j = k;
        while j < from.len() && from.cell(j).left < c.right {
            let f = from.cell(j);
            let overlap = f.right.min(c.right) - f.left.max(c.left);
            if overlap > 0.0 {
                mass += f.volume * fine.g[j] * overlap;
            }
            j += 1;
        }
        g[l] = mass / (c.volume * c.width);
    }
    Ok(State { t: fine.t, g })
}

fn run_at(cfg: &RunConfig, base_dir: &Path) -> (Grid, Result<Trajectory>) {
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => return (Grid::geometric(2.0, 1).expect("valid fallback"), Err(e)),
    };
    let traj = cfg
        .workspace()
        .and_then(|ws| {
            let s = cfg.initial_state(ws.grid(), base_dir)?;
            run(&ws, &s, &cfg.solver_config())
        });
    (grid, traj)
}

/// Runs `base` at each `n` and measures successive restricted distances
/// `d(n_i, n_{i+1})` of the final states on the coarser domain. Verdict:
/// strict decrease, a desk-scale proxy for convergence of the truncations.
pub fn truncation_sweep(base: &RunConfig, n_values: &[f64], base_dir: &Path) -> Result<StudyReport> {
    if n_values.len() < 2 {
        return Err(Error::Config(vec![
            "truncation sweep needs at least two values of n".into(),
        ]));
    }
    let mut report = StudyReport::new(StudyKind::TruncationSweep, base);
    report.sweep = n_values.to_vec();
    report
        .notes
        .push("monotone decrease of successive distances is a pragmatic proxy; no rate is asserted".into());

    let runs: Vec<(Grid, Result<Trajectory>)> = n_values
        .par_iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.grid.n = n;
            run_at(&cfg, base_dir)
        })
        .collect();

    for (&n, (grid, traj)) in n_values.iter().zip(&runs) {
        report
            .runs
            .push(RunSummary::from_run(format!("n={n}"), n, grid.len(), traj));
    }
    if runs.iter().any(|(_, t)| t.is_err()) {
        report.verdicts.push(Verdict::failed("all runs completed"));
        return Ok(report);
    }

    let sigma = base.kernel.sigma;
    let mut distances = Vec::new();
    let mut rows = Vec::new();
    for w in runs.windows(2) {
        let (coarse_grid, coarse) = (&w[0].0, w[0].1.as_ref().expect("checked above"));
        let (fine_grid, fine) = (&w[1].0, w[1].1.as_ref().expect("checked above"));
        let restricted = restrict(fine.final_state(), fine_grid, coarse_grid)?;
        let d = weighted_distance(coarse.final_state(), &restricted, coarse_grid, sigma)?;
        distances.push(d);
    }
    for (i, d) in distances.iter().enumerate() {
        let (a, b) = (n_values[i], n_values[i + 1]);
        report.metrics.push((format!("distance_{a}_{b}"), *d));
        rows.push(vec![a, b, *d]);
    }
    for (i, w) in distances.windows(2).enumerate() {
        report.verdicts.push(Verdict::below(
            format!(
                "d({}, {}) < d({}, {})",
                n_values[i + 1],
                n_values[i + 2],
                n_values[i],
                n_values[i + 1]
            ),
            w[1],
            w[0],
        ));
    }
    report.series.push(Series {
        name: "truncation_distances".into(),
        columns: vec!["n_coarse".into(), "n_fine".into(), "distance".into()],
        rows,
    });
    Ok(report)
}

/// Relative L¹ error of cell averages against the exact cell averages of
/// `g_ref(μ, t) = (4/(t+2)²) e^{−2μ/(t+2)}`.
pub fn constant_kernel_l1_error(s: &State, grid: &Grid) -> Result<f64> {
    if s.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: s.len(),
        });
    }
    let a = s.t + 2.0;
    let mut err = 0.0;
    let mut norm = 0.0;
    for (c, g) in grid.cells().iter().zip(&s.g) {
        // ∫_L^R g_ref = (2/a)(e^{−2L/a} − e^{−2R/a})
        let exact = 2.0 / a * ((-2.0 * c.left / a).exp() - (-2.0 * c.right / a).exp());
        err += (g * c.width - exact).abs();
        norm += exact;
    }
    Ok(err / norm)
}

/// Constant-kernel reference number density `2/(t+2)`.
pub fn constant_kernel_number(t: f64) -> f64 {
    2.0 / (t + 2.0)
}

fn scenario_config(base: &RunConfig, scenario: Scenario) -> RunConfig {
    use crate::config::InitialSection;
    let mut cfg = base.clone();
    match scenario {
        Scenario::ConstantKernelPureCoag => {
            cfg.kernel.variant = KernelVariant::Constant;
            cfg.kernel.k = 1.0;
            cfg.kernel.bound_k = None;
            cfg.probability = CoalescenceProbability::Constant { value: 1.0 };
            cfg.initial = InitialSection::Preset(InitialData::Exponential {
                number: 1.0,
                mean_volume: 1.0,
            });
        }
        Scenario::ElasticReduction => {
            cfg.probability = CoalescenceProbability::Constant { value: 0.5 };
            cfg.daughter.elastic = true;
        }
        Scenario::PureBreakage => {
            cfg.probability = CoalescenceProbability::Constant { value: 0.0 };
            cfg.daughter.elastic = false;
            cfg.initial = InitialSection::Preset(InitialData::Monodisperse {
                volume: 1.0,
                number: 1.0,
            });
        }
    }
    cfg.study = None;
    cfg
}

/// Special cases with a known answer. The physics is fixed by the scenario;
/// grid, horizon and tolerances come from `base`.
pub fn analytic_compare(base: &RunConfig, scenario: Scenario, base_dir: &Path) -> Result<StudyReport> {
    let mut report = StudyReport::new(StudyKind::AnalyticCompare, base);
    report.scenario = Some(scenario);
    let cfg = scenario_config(base, scenario);
    match scenario {
        Scenario::ConstantKernelPureCoag => {
            let mut fine = cfg.clone();
            fine.grid.cells_per_decade *= 2;
            report.sweep = vec![
                cfg.grid.cells_per_decade as f64,
                fine.grid.cells_per_decade as f64,
            ];
            let runs: Vec<(Grid, Result<Trajectory>)> = [&cfg, &fine]
                .par_iter()
                .map(|c| run_at(c, base_dir))
                .collect();
            for (c, (grid, traj)) in [&cfg, &fine].iter().zip(&runs) {
                let cpd = c.grid.cells_per_decade;
                report.runs.push(RunSummary::from_run(
                    format!("cells_per_decade={cpd}"),
                    cpd as f64,
                    grid.len(),
                    traj,
                ));
            }
            let (grid, traj) = match &runs[0] {
                (g, Ok(t)) => (g, t),
                (_, Err(e)) => return Err(Error::Input(format!("base run failed: {e}"))),
            };
            let mut rows = Vec::new();
            for c in &traj.checkpoints {
                let l1 = constant_kernel_l1_error(&c.state, grid)?;
                let m0_ref = constant_kernel_number(c.state.t);
                let m0_err = (c.moments.number() - m0_ref).abs() / m0_ref;
                rows.push(vec![c.state.t, l1, c.moments.number(), m0_ref, m0_err]);
            }
            let last = rows.last().expect("at least one checkpoint").clone();
            let t_end = last[0];
            report.metrics.push(("l1_error".into(), last[1]));
            report.metrics.push(("m0".into(), last[2]));
            report.metrics.push(("m0_reference".into(), last[3]));
            report.metrics.push(("m0_relative_error".into(), last[4]));
            report
                .verdicts
                .push(Verdict::at_most(format!("L1 error at t={t_end}"), last[1], 0.02));
            report
                .verdicts
                .push(Verdict::at_most(format!("|M0 - 2/(t+2)| / (2/(t+2)) at t={t_end}"), last[4], 0.01));
            match &runs[1] {
                (g, Ok(t)) => {
                    let refined = constant_kernel_l1_error(t.final_state(), g)?;
                    report.metrics.push(("l1_error_refined".into(), refined));
                    report
                        .verdicts
                        .push(Verdict::below("L1 error decreases under refinement", refined, last[1]));
                }
                (_, Err(_)) => report.verdicts.push(Verdict::failed("refined run completed")),
            }
            report.series.push(Series {
                name: "constant_kernel".into(),
                columns: ["t", "l1_error", "m0", "m0_reference", "m0_relative_error"]
                    .map(String::from)
                    .to_vec(),
                rows,
            });
        }
        Scenario::ElasticReduction => {
            let mut halved = cfg.clone();
            halved.probability = CoalescenceProbability::Constant { value: 1.0 };
            halved.daughter.elastic = false;
            let ws_a = cfg.workspace()?;
            let kernel_b = cfg.kernel_model()?.scaled(0.5);
            let ws_b = OperatorWorkspace::assemble(
                ws_a.grid(),
                &kernel_b,
                &halved.probability,
                &halved.fragmentation()?,
                cfg.solver.breakage_tensor,
            )?;
            let initial = cfg.initial_state(ws_a.grid(), base_dir)?;
            let solver = cfg.solver_config();
            let (a, b) = rayon::join(|| run(&ws_a, &initial, &solver), || run(&ws_b, &initial, &solver));
            let grid = ws_a.grid();
            report.runs.push(RunSummary::from_run("E=1/2, elastic".into(), 0.5, grid.len(), &a));
            report.runs.push(RunSummary::from_run("E=1, kernel/2".into(), 1.0, grid.len(), &b));
            let (a, b) = (a?, b?);
            let sigma = cfg.kernel.sigma;
            let zero = State::zeros(grid.len());
            let mut worst: f64 = 0.0;
            let mut rows = Vec::new();
            for (x, y) in a.states().zip(b.states()) {
                let d = weighted_distance(x, y, grid, sigma)?;
                let scale = weighted_distance(x, &zero, grid, sigma)?;
                let rel = if scale > 0.0 { d / scale } else { d };
                worst = worst.max(rel);
                rows.push(vec![x.t, d, rel]);
            }
            report.metrics.push(("max_relative_distance".into(), worst));
            report
                .verdicts
                .push(Verdict::at_most("relative distance between reductions", worst, 1e-7));
            report.series.push(Series {
                name: "elastic_reduction".into(),
                columns: ["t", "distance", "relative_distance"].map(String::from).to_vec(),
                rows,
            });
        }
        Scenario::PureBreakage => {
            let (grid, traj) = run_at(&cfg, base_dir);
            report
                .runs
                .push(RunSummary::from_run("E=0".into(), 0.0, grid.len(), &traj));
            let traj = traj?;
            let rows: Vec<Vec<f64>> = traj
                .checkpoints
                .iter()
                .map(|c| vec![c.state.t, c.moments.number(), c.moments.mass(), c.mass_drift])
                .collect();
            let n0 = rows[0][1];
            let n1 = rows[rows.len() - 1][1];
            report.metrics.push(("max_mass_drift".into(), traj.max_mass_drift()));
            report.metrics.push(("m0_growth_ratio".into(), n1 / n0));
            report
                .verdicts
                .push(Verdict::at_most("max relative M1 drift", traj.max_mass_drift(), 1e-8));
            report.series.push(Series {
                name: "pure_breakage".into(),
                columns: ["t", "m0", "m1", "mass_drift"].map(String::from).to_vec(),
                rows,
            });
        }
    }
    Ok(report)
}

/// Runs `g_in` and `(1+ε) g_in`, tracks `Ξ(t)` and compares it with
/// `Ξ(0) e^{Ct}` inflated by 5%. Kernels outside the uniqueness class are
/// reported without a contraction verdict.
pub fn uniqueness_experiment(base: &RunConfig, epsilon: f64, base_dir: &Path) -> Result<StudyReport> {
    const SLACK: f64 = 0.05;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("ε must be ≥ 0, got {epsilon}")));
    }
    let mut report = StudyReport::new(StudyKind::Uniqueness, base);
    report.sweep = vec![epsilon];
    let kernel = base.kernel_model()?;
    let class = check_assumptions(
        &kernel,
        &base.probability,
        &base.fragmentation()?,
        &SamplePlan::default(),
    );
    let in_class = class.passes(Hypothesis::UniquenessKernel);
    let eta_sigma = match base.fragmentation()? {
        Fragmentation::PowerLaw(d) => d.eta(kernel.sigma).ok(),
        Fragmentation::Elastic => None,
    };

    let ws = base.workspace()?;
    let grid = ws.grid();
    let g0 = base.initial_state(grid, base_dir)?;
    let h0 = State {
        t: 0.0,
        g: g0.g.iter().map(|v| v * (1.0 + epsilon)).collect(),
    };
    let solver = base.solver_config();
    let (g, h) = rayon::join(|| run(&ws, &g0, &solver), || run(&ws, &h0, &solver));
    report.runs.push(RunSummary::from_run("g".into(), 0.0, grid.len(), &g));
    report.runs.push(RunSummary::from_run("h".into(), epsilon, grid.len(), &h));
    let (g, h) = (g?, h?);

    let sigma = kernel.sigma;
    let xi: Vec<(f64, f64)> = g
        .states()
        .zip(h.states())
        .map(|(a, b)| Ok((a.t, weighted_distance(a, b, grid, sigma)?)))
        .collect::<Result<_>>()?;
    let xi0 = xi[0].1;
    let (gs, hs) = (g.max_s_norm(), h.max_s_norm());
    report.metrics.push(("xi0".into(), xi0));
    report.metrics.push(("g_norm_sup".into(), gs));
    report.metrics.push(("h_norm_sup".into(), hs));

    let rate = eta_sigma.map(|eta| contraction_rate(gs, hs, kernel.bound_k, eta));
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &(t, x) in &xi {
        let bound = rate.map_or(f64::NAN, |c| xi0 * (c * t).exp() * (1.0 + SLACK));
        if x > 0.0 {
            worst = worst.max(x / bound);
        }
        rows.push(vec![t, x, bound]);
    }
    report.series.push(Series {
        name: "uniqueness".into(),
        columns: ["t", "xi", "bound"].map(String::from).to_vec(),
        rows,
    });
    match (rate, in_class) {
        (Some(c), true) => {
            report.metrics.push(("contraction_rate".into(), c));
            report.metrics.push(("worst_ratio".into(), worst));
            report.verdicts.push(Verdict::at_most(
                "max_t Ξ(t) / (Ξ(0) e^{Ct} (1 + 0.05))",
                worst,
                1.0,
            ));
        }
        (rate, _) => {
            if let Some(c) = rate {
                report.metrics.push(("contraction_rate".into(), c));
            }
            report.notes.push(
                "kernel outside the uniqueness class or no η(σ) available: report only".into(),
            );
            report
                .verdicts
                .push(Verdict::failed("kernel satisfies hypothesis 2.7"));
        }
    }
    Ok(report)
}

/// Dispatches on the configured `[study]` section.
pub fn run_study(cfg: &RunConfig, base_dir: &Path) -> Result<StudyReport> {
    let Some(study) = &cfg.study else {
        return Err(Error::Config(vec!["[study] section required".into()]));
    };
    match study.kind {
        StudyKind::TruncationSweep => truncation_sweep(cfg, &study.n_values, base_dir),
        StudyKind::AnalyticCompare => analytic_compare(cfg, study.scenario, base_dir),
        StudyKind::Uniqueness => uniqueness_experiment(cfg, study.epsilon, base_dir),
    }
}
