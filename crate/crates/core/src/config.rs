//! Run configuration: a flat-section TOML document with dimensionless
//! volumes, validated in one pass that reports every problem it finds.
//!
//! ```toml
//! [kernel]
//! variant = "kinetic_theory"   # constant | singular_bound | uniqueness_class | product
//! k = 1.0
//! omega = 0.2
//! sigma = 0.2
//!
//! [probability]
//! variant = "constant"         # or "volume_dependent" with small, large, crossover_volume
//! value = 0.5
//!
//! [daughter]
//! theta = -0.5                 # or elastic = true
//!
//! [grid]
//! n = 100.0
//! cells_per_decade = 8
//!
//! [initial]
//! preset = "exponential"       # gamma | monodisperse | table (path = "…")
//! number = 1.0
//! mean_volume = 1.0
//!
//! [solver]
//! t_end = 5.0
//! checkpoints = 11
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrator::{InitialData, SolverConfig};
use crate::kernels::{
    kernel_exponent_violations, CoalescenceProbability, DaughterModel, Fragmentation,
    KernelModel, KernelVariant,
};
use crate::operators::{BreakageMode, OperatorWorkspace, State};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSection {
    pub variant: KernelVariant,
    pub k: f64,
    pub omega: f64,
    pub sigma: f64,
    /// Overrides the variant's default growth-bound constant.
    pub bound_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaughterSection {
    pub theta: f64,
    pub elastic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub n: f64,
    pub cells_per_decade: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialSection {
    Preset(InitialData),
    /// CSV with header `volume,density`; relative paths resolve against the
    /// configuration file's directory.
    TableFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSection {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub negativity_clip: f64,
    pub checkpoints: usize,
    /// Explicit checkpoint times; replaces the evenly spaced `checkpoints`.
    pub output_times: Option<Vec<f64>>,
    pub max_steps: usize,
    pub breakage_tensor: BreakageMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSection {
    pub extra_moments: Vec<f64>,
    pub tail_volume: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    TruncationSweep,
    AnalyticCompare,
    Uniqueness,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::TruncationSweep => "truncation_sweep",
            StudyKind::AnalyticCompare => "analytic_compare",
            StudyKind::Uniqueness => "uniqueness",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        [
            StudyKind::TruncationSweep,
            StudyKind::AnalyticCompare,
            StudyKind::Uniqueness,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ConstantKernelPureCoag,
    ElasticReduction,
    PureBreakage,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::ConstantKernelPureCoag => "constant_kernel_pure_coag",
            Scenario::ElasticReduction => "elastic_reduction",
            Scenario::PureBreakage => "pure_breakage",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            Scenario::ConstantKernelPureCoag,
            Scenario::ElasticReduction,
            Scenario::PureBreakage,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySection {
    pub kind: StudyKind,
    pub n_values: Vec<f64>,
    pub scenario: Scenario,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kernel: KernelSection,
    pub probability: CoalescenceProbability,
    pub daughter: DaughterSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub diagnostics: DiagnosticsSection,
    pub study: Option<StudySection>,
}

impl Default for RunConfig {
    /// Kinetic-theory kernel, `E = ½`, `θ = −½`, `σ = ω = 0.2`, `n = 100`,
    /// `g_in = e^{−μ}`, `T = 5`.
    fn default() -> Self {
        Self {
            kernel: KernelSection {
                variant: KernelVariant::KineticTheory,
                k: 1.0,
                omega: 0.2,
                sigma: 0.2,
                bound_k: None,
            },
            probability: CoalescenceProbability::Constant { value: 0.5 },
            daughter: DaughterSection {
                theta: -0.5,
                elastic: false,
            },
            grid: GridSection {
                n: 100.0,
                cells_per_decade: 8,
            },
            initial: InitialSection::Preset(InitialData::Exponential {
                number: 1.0,
                mean_volume: 1.0,
            }),
            solver: SolverSection {
                t_end: 5.0,
                rel_tol: 1e-6,
                abs_tol: 1e-10,
                dt_init: 1e-3,
                dt_min: 1e-12,
                dt_max: 1.0,
                negativity_clip: 1e-14,
                checkpoints: 11,
                output_times: None,
                max_steps: 1_000_000,
                breakage_tensor: BreakageMode::MassRescaled,
            },
            diagnostics: DiagnosticsSection {
                extra_moments: Vec::new(),
                tail_volume: 1.0,
            },
            study: None,
        }
    }
}

/// Parses and validates a configuration document. Missing keys take the
/// defaults of [`RunConfig::default`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![e.message().trim().to_string()]))?;
    let mut errors = Vec::new();
    let cfg = Reader::new(&doc, &mut errors).read();
    if let Some(cfg) = cfg {
        // mistyped keys fell back to valid defaults, so these are genuine
        errors.extend(cfg.violations());
        if errors.is_empty() {
            return Ok(cfg);
        }
    }
    Err(Error::Config(errors))
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn f64(&mut self, key: &'static str, default: f64, errors: &mut Vec<String>) -> f64 {
        match self.raw(key) {
            None => default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(other) => {
                errors.push(format!(
                    "[{}] {key}: expected a number, got {}",
                    self.name,
                    other.type_str()
                ));
                default
            }
        }
    }

    fn opt_f64(&mut self, key: &'static str, errors: &mut Vec<String>) -> Option<f64> {
        self.table.and_then(|t| t.get(key))?;
        Some(self.f64(key, 0.0, errors))
    }

    fn usize(&mut self, key: &'static str, default: usize, errors: &mut Vec<String>) -> usize {
        match self.raw(key) {
            None => default,
            Some(Value::Integer(v)) if *v >= 0 => *v as usize,
            Some(other) => {
                errors.push(format!(
                    "[{}] {key}: expected a nonnegative integer, got {other}",
                    self.name
                ));
                default
            }
        }
    }

    fn bool(&mut self, key: &'static str, default: bool, errors: &mut Vec<String>) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(v)) => *v,
            Some(other) => {
                errors.push(format!(
                    "[{}] {key}: expected true or false, got {other}",
                    self.name
                ));
                default
            }
        }
    }

    fn str(&mut self, key: &'static str, errors: &mut Vec<String>) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s),
            other => {
                errors.push(format!(
                    "[{}] {key}: expected a string, got {other}",
                    self.name
                ));
                None
            }
        }
    }

    fn f64_list(&mut self, key: &'static str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
        match self.raw(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for v in items {
                    match v {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(x) => out.push(*x as f64),
                        other => {
                            errors.push(format!(
                                "[{}] {key}: expected numbers, found {other}",
                                self.name
                            ));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                errors.push(format!(
                    "[{}] {key}: expected an array of numbers, got {other}",
                    self.name
                ));
                None
            }
        }
    }

    /// Reports keys that were never looked up.
    fn finish(self, errors: &mut Vec<String>) {
        if let Some(t) = self.table {
            for key in t.keys() {
                if !self.seen.contains(&key.as_str()) {
                    errors.push(format!("[{}] unknown key `{key}`", self.name));
                }
            }
        }
    }
}

struct Reader<'a, 'e> {
    doc: &'a Table,
    errors: &'e mut Vec<String>,
}

const SECTIONS: [&str; 8] = [
    "kernel",
    "probability",
    "daughter",
    "grid",
    "initial",
    "solver",
    "diagnostics",
    "study",
];

impl<'a, 'e> Reader<'a, 'e> {
    fn new(doc: &'a Table, errors: &'e mut Vec<String>) -> Self {
        Self { doc, errors }
    }

    fn section(&mut self, name: &'static str) -> Section<'a> {
        let table = match self.doc.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                self.errors.push(format!(
                    "`{name}` must be a section, got {}",
                    other.type_str()
                ));
                None
            }
        };
        Section {
            name,
            table,
            seen: Vec::new(),
        }
    }

    fn read(mut self) -> Option<RunConfig> {
        for key in self.doc.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                self.errors.push(format!("unknown section `{key}`"));
            }
        }
        let d = RunConfig::default();
        let kernel = self.kernel(&d.kernel);
        let probability = self.probability();
        let daughter = self.daughter(&d.daughter);
        let grid = self.grid(&d.grid);
        let initial = self.initial();
        let solver = self.solver(&d.solver);
        let diagnostics = self.diagnostics(&d.diagnostics);
        let study = self.study();
        Some(RunConfig {
            kernel: kernel?,
            probability: probability?,
            daughter,
            grid,
            initial: initial?,
            solver: solver?,
            diagnostics: diagnostics?,
            study: study?,
        })
    }

    fn kernel(&mut self, d: &KernelSection) -> Option<KernelSection> {
        let mut s = self.section("kernel");
        let e = &mut *self.errors;
        let variant = match s.str("variant", e) {
            None => Some(d.variant),
            Some(name) => KernelVariant::from_name(name).or_else(|| {
                e.push(format!("[kernel] variant: unknown kernel `{name}`"));
                None
            }),
        };
        let out = KernelSection {
            variant: variant.unwrap_or(d.variant),
            k: s.f64("k", d.k, e),
            omega: s.f64("omega", d.omega, e),
            sigma: s.f64("sigma", d.sigma, e),
            bound_k: s.opt_f64("bound_k", e),
        };
        s.finish(e);
        variant.map(|_| out)
    }

    fn probability(&mut self) -> Option<CoalescenceProbability> {
        let mut s = self.section("probability");
        let e = &mut *self.errors;
        let out = match s.str("variant", e).unwrap_or("constant") {
            "constant" => Some(CoalescenceProbability::Constant {
                value: s.f64("value", 0.5, e),
            }),
            "volume_dependent" => Some(CoalescenceProbability::VolumeDependent {
                small: s.f64("small", 1.0, e),
                large: s.f64("large", 0.5, e),
                crossover: s.f64("crossover_volume", 1.0, e),
            }),
            other => {
                e.push(format!("[probability] variant: unknown variant `{other}`"));
                None
            }
        };
        s.finish(e);
        out
    }

    fn daughter(&mut self, d: &DaughterSection) -> DaughterSection {
        let mut s = self.section("daughter");
        let e = &mut *self.errors;
        let out = DaughterSection {
            theta: s.f64("theta", d.theta, e),
            elastic: s.bool("elastic", d.elastic, e),
        };
        s.finish(e);
        out
    }

    fn grid(&mut self, d: &GridSection) -> GridSection {
        let mut s = self.section("grid");
        let e = &mut *self.errors;
        let out = GridSection {
            n: s.f64("n", d.n, e),
            cells_per_decade: s.usize("cells_per_decade", d.cells_per_decade, e),
        };
        s.finish(e);
        out
    }

    fn initial(&mut self) -> Option<InitialSection> {
        let mut s = self.section("initial");
        let e = &mut *self.errors;
        let out = match s.str("preset", e).unwrap_or("exponential") {
            "exponential" => Some(InitialSection::Preset(InitialData::Exponential {
                number: s.f64("number", 1.0, e),
                mean_volume: s.f64("mean_volume", 1.0, e),
            })),
            "gamma" => Some(InitialSection::Preset(InitialData::Gamma {
                number: s.f64("number", 1.0, e),
                shape: s.f64("shape", 2.0, e),
                mean_volume: s.f64("mean_volume", 1.0, e),
            })),
            "monodisperse" => Some(InitialSection::Preset(InitialData::Monodisperse {
                volume: s.f64("volume", 1.0, e),
                number: s.f64("number", 1.0, e),
            })),
            "table" => match s.str("path", e) {
                Some(p) => Some(InitialSection::TableFile(PathBuf::from(p))),
                None => {
                    e.push("[initial] path: required for preset `table`".into());
                    None
                }
            },
            other => {
                e.push(format!("[initial] preset: unknown preset `{other}`"));
                None
            }
        };
        s.finish(e);
        out
    }

    fn solver(&mut self, d: &SolverSection) -> Option<SolverSection> {
        let mut s = self.section("solver");
        let e = &mut *self.errors;
        let mode = match s.str("breakage_tensor", e) {
            None => Some(d.breakage_tensor),
            Some(name) => BreakageMode::from_name(name).or_else(|| {
                e.push(format!(
                    "[solver] breakage_tensor: expected `mass_rescaled` or `exact_count`, got `{name}`"
                ));
                None
            }),
        };
        let out = SolverSection {
            t_end: s.f64("t_end", d.t_end, e),
            rel_tol: s.f64("rel_tol", d.rel_tol, e),
            abs_tol: s.f64("abs_tol", d.abs_tol, e),
            dt_init: s.f64("dt_init", d.dt_init, e),
            dt_min: s.f64("dt_min", d.dt_min, e),
            dt_max: s.f64("dt_max", d.dt_max, e),
            negativity_clip: s.f64("negativity_clip", d.negativity_clip, e),
            checkpoints: s.usize("checkpoints", d.checkpoints, e),
            output_times: s.f64_list("output_times", e),
            max_steps: s.usize("max_steps", d.max_steps, e),
            breakage_tensor: mode.unwrap_or_default(),
        };
        s.finish(e);
        mode.map(|_| out)
    }

    fn diagnostics(&mut self, d: &DiagnosticsSection) -> Option<DiagnosticsSection> {
        let mut s = self.section("diagnostics");
        let e = &mut *self.errors;
        let out = DiagnosticsSection {
            extra_moments: s.f64_list("extra_moments", e).unwrap_or_default(),
            tail_volume: s.f64("tail_volume", d.tail_volume, e),
        };
        s.finish(e);
        Some(out)
    }

    fn study(&mut self) -> Option<Option<StudySection>> {
        if !self.doc.contains_key("study") {
            return Some(None);
        }
        let mut s = self.section("study");
        let e = &mut *self.errors;
        let kind = match s.str("kind", e) {
            None => {
                e.push("[study] kind: required".into());
                None
            }
            Some(name) => StudyKind::from_name(name).or_else(|| {
                e.push(format!("[study] kind: unknown study `{name}`"));
                None
            }),
        };
        let scenario = match s.str("scenario", e) {
            None => Some(Scenario::ConstantKernelPureCoag),
            Some(name) => Scenario::from_name(name).or_else(|| {
                e.push(format!("[study] scenario: unknown scenario `{name}`"));
                None
            }),
        };
        let n_values = s.f64_list("n_values", e).unwrap_or_else(|| vec![16.0, 64.0, 256.0]);
        let epsilon = s.f64("epsilon", 1e-3, e);
        s.finish(e);
        Some(Some(StudySection {
            kind: kind?,
            n_values,
            scenario: scenario?,
            epsilon,
        }))
    }
}

fn float(v: f64) -> Value {
    Value::Float(v)
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().copied().map(float).collect())
}

fn string(s: &str) -> Value {
    Value::String(s.to_string())
}

impl RunConfig {
    /// Cross-parameter feasibility; one message per violation.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let k = &self.kernel;
        out.extend(kernel_exponent_violations(k.omega, k.sigma));
        if !(k.k >= 0.0 && k.k.is_finite()) {
            out.push(format!("[kernel] k must be finite and ≥ 0, got {}", k.k));
        }
        if let Some(b) = k.bound_k {
            if !(b >= 0.0 && b.is_finite()) {
                out.push(format!("[kernel] bound_k must be finite and ≥ 0, got {b}"));
            }
        }
        if let Err(e) = self.probability.validate() {
            out.push(format!("[probability] {e}"));
        }
        if !self.daughter.elastic {
            let theta = self.daughter.theta;
            if let Err(e) = DaughterModel::new(theta) {
                out.push(format!("[daughter] {e}"));
            } else if -theta + k.sigma >= 1.0 {
                out.push(format!(
                    "τ2 + σ < 1 required (hypothesis 2.6), got τ2 = {}, σ = {}",
                    -theta, k.sigma
                ));
            }
        }
        if !(self.grid.n > 1.0 && self.grid.n.is_finite()) {
            out.push(format!("[grid] n must exceed 1, got {}", self.grid.n));
        }
        if self.grid.cells_per_decade == 0 {
            out.push("[grid] cells_per_decade must be ≥ 1".into());
        }
        if let InitialSection::Preset(data) = &self.initial {
            out.extend(data.violations().into_iter().map(|m| format!("[initial] {m}")));
        }
        out.extend(
            self.solver_config()
                .violations()
                .into_iter()
                .map(|m| format!("[solver] {m}")),
        );
        if !(self.diagnostics.tail_volume > 0.0) {
            out.push(format!(
                "[diagnostics] tail_volume must be > 0, got {}",
                self.diagnostics.tail_volume
            ));
        }
        if let Some(st) = &self.study {
            if st.kind == StudyKind::TruncationSweep {
                if st.n_values.len() < 3 {
                    out.push("[study] n_values needs at least three entries".into());
                }
                if st.n_values.windows(2).any(|w| !(w[0] < w[1])) || st.n_values.iter().any(|&n| !(n > 1.0)) {
                    out.push("[study] n_values must be increasing and > 1".into());
                }
            }
            if !(st.epsilon >= 0.0 && st.epsilon.is_finite()) {
                out.push(format!("[study] epsilon must be ≥ 0, got {}", st.epsilon));
            }
        }
        out
    }

    pub fn kernel_model(&self) -> Result<KernelModel> {
        let k = &self.kernel;
        let model = KernelModel::new(k.variant, k.k, k.omega, k.sigma)?;
        match k.bound_k {
            Some(b) => model.with_bound_constant(b),
            None => Ok(model),
        }
    }

    pub fn fragmentation(&self) -> Result<Fragmentation> {
        if self.daughter.elastic {
            Ok(Fragmentation::Elastic)
        } else {
            Ok(Fragmentation::PowerLaw(DaughterModel::new(self.daughter.theta)?))
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::geometric(self.grid.n, self.grid.cells_per_decade)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let mut cfg = SolverConfig::with_checkpoints(s.t_end, s.checkpoints);
        cfg.rel_tol = s.rel_tol;
        cfg.abs_tol = s.abs_tol;
        cfg.dt_init = s.dt_init;
        cfg.dt_min = s.dt_min;
        cfg.dt_max = s.dt_max;
        cfg.negativity_clip = s.negativity_clip;
        cfg.max_steps = s.max_steps;
        if let Some(times) = &s.output_times {
            cfg.output_times = times.clone();
        }
        cfg
    }

    pub fn workspace(&self) -> Result<OperatorWorkspace> {
        OperatorWorkspace::assemble(
            &self.grid()?,
            &self.kernel_model()?,
            &self.probability,
            &self.fragmentation()?,
            self.solver.breakage_tensor,
        )
    }

    /// Initial data, reading table files relative to `base_dir`.
    pub fn initial_data(&self, base_dir: &Path) -> Result<InitialData> {
        match &self.initial {
            InitialSection::Preset(d) => Ok(d.clone()),
            InitialSection::TableFile(p) => {
                let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
                read_table(&path)
            }
        }
    }

    pub fn initial_state(&self, grid: &Grid, base_dir: &Path) -> Result<State> {
        crate::integrator::truncate_initial(&self.initial_data(base_dir)?, grid)
    }

    /// Canonical TOML echo; parsing it reproduces `self` exactly.
    pub fn to_toml(&self) -> String {
        let mut doc = Table::new();
        let k = &self.kernel;
        let mut kernel = Table::new();
        kernel.insert("variant".into(), string(k.variant.name()));
        kernel.insert("k".into(), float(k.k));
        kernel.insert("omega".into(), float(k.omega));
        kernel.insert("sigma".into(), float(k.sigma));
        if let Some(b) = k.bound_k {
            kernel.insert("bound_k".into(), float(b));
        }
        doc.insert("kernel".into(), Value::Table(kernel));

        let mut prob = Table::new();
        match self.probability {
            CoalescenceProbability::Constant { value } => {
                prob.insert("variant".into(), string("constant"));
                prob.insert("value".into(), float(value));
            }
            CoalescenceProbability::VolumeDependent {
                small,
                large,
                crossover,
            } => {
                prob.insert("variant".into(), string("volume_dependent"));
                prob.insert("small".into(), float(small));
                prob.insert("large".into(), float(large));
                prob.insert("crossover_volume".into(), float(crossover));
            }
        }
        doc.insert("probability".into(), Value::Table(prob));

        let mut daughter = Table::new();
        daughter.insert("theta".into(), float(self.daughter.theta));
        daughter.insert("elastic".into(), Value::Boolean(self.daughter.elastic));
        doc.insert("daughter".into(), Value::Table(daughter));

        let mut grid = Table::new();
        grid.insert("n".into(), float(self.grid.n));
        grid.insert(
            "cells_per_decade".into(),
            Value::Integer(self.grid.cells_per_decade as i64),
        );
        doc.insert("grid".into(), Value::Table(grid));

        let mut initial = Table::new();
        match &self.initial {
            InitialSection::Preset(InitialData::Exponential {
                number,
                mean_volume,
            }) => {
                initial.insert("preset".into(), string("exponential"));
                initial.insert("number".into(), float(*number));
                initial.insert("mean_volume".into(), float(*mean_volume));
            }
            InitialSection::Preset(InitialData::Gamma {
                number,
                shape,
                mean_volume,
            }) => {
                initial.insert("preset".into(), string("gamma"));
                initial.insert("number".into(), float(*number));
                initial.insert("shape".into(), float(*shape));
                initial.insert("mean_volume".into(), float(*mean_volume));
            }
            InitialSection::Preset(InitialData::Monodisperse { volume, number }) => {
                initial.insert("preset".into(), string("monodisperse"));
                initial.insert("volume".into(), float(*volume));
                initial.insert("number".into(), float(*number));
            }
            InitialSection::Preset(InitialData::Table { .. }) => {
                unreachable!("inline tables are built programmatically, never parsed")
            }
            InitialSection::TableFile(p) => {
                initial.insert("preset".into(), string("table"));
                initial.insert("path".into(), string(&p.to_string_lossy()));
            }
        }
        doc.insert("initial".into(), Value::Table(initial));

        let s = &self.solver;
        let mut solver = Table::new();
        solver.insert("t_end".into(), float(s.t_end));
        solver.insert("rel_tol".into(), float(s.rel_tol));
        solver.insert("abs_tol".into(), float(s.abs_tol));
        solver.insert("dt_init".into(), float(s.dt_init));
        solver.insert("dt_min".into(), float(s.dt_min));
        solver.insert("dt_max".into(), float(s.dt_max));
        solver.insert("negativity_clip".into(), float(s.negativity_clip));
        solver.insert("checkpoints".into(), Value::Integer(s.checkpoints as i64));
        if let Some(t) = &s.output_times {
            solver.insert("output_times".into(), floats(t));
        }
        solver.insert("max_steps".into(), Value::Integer(s.max_steps as i64));
        solver.insert("breakage_tensor".into(), string(s.breakage_tensor.name()));
        doc.insert("solver".into(), Value::Table(solver));

        let mut diag = Table::new();
        diag.insert("extra_moments".into(), floats(&self.diagnostics.extra_moments));
        diag.insert("tail_volume".into(), float(self.diagnostics.tail_volume));
        doc.insert("diagnostics".into(), Value::Table(diag));

        if let Some(st) = &self.study {
            let mut study = Table::new();
            study.insert("kind".into(), string(st.kind.name()));
            study.insert("n_values".into(), floats(&st.n_values));
            study.insert("scenario".into(), string(st.scenario.name()));
            study.insert("epsilon".into(), float(st.epsilon));
            doc.insert("study".into(), Value::Table(study));
        }
        toml::to_string(&doc).expect("plain tables always serialize")
    }

    /// SHA-256 of the canonical TOML echo, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads `volume,density` rows.
pub fn read_table(path: &Path) -> Result<InitialData> {
    #[derive(Deserialize)]
    struct Row {
        volume: f64,
        density: f64,
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        points.push((row.volume, row.density));
    }
    let data = InitialData::Table { points };
    let v = data.violations();
    if v.is_empty() {
        Ok(data)
    } else {
        Err(Error::Input(format!("{}: {}", path.display(), v.join("; "))))
    }
}
