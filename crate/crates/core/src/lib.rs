//! Sectional solver for the continuous coagulation equation with collisional
//! breakage, posed on the truncated volume domain `[1/n, n]`.

// `!(x > 0.0)` rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod integrator;
pub mod kernels;
pub mod operators;
pub mod output;
pub mod quad;
pub mod studies;

pub use error::{Error, Result};
pub use grid::{Cell, Grid, GridSummary, PairTarget};
pub use kernels::{
    check_assumptions, AssumptionReport, CoalescenceProbability, DaughterModel, Fragmentation,
    Hypothesis, HypothesisRecord, HypothesisStatus, KernelModel, KernelVariant, SamplePlan,
};
pub use operators::{BreakageMode, NumberBalance, OperatorWorkspace, State, WorkspaceStats};
pub use config::{load_config, parse_config, RunConfig, Scenario, StudyKind};
pub use diagnostics::{
    bound_certificate, check_bound, moment, s_norm, tail_mass, weighted_distance, BoundCertificate,
    BoundCheck, MomentRecord, TailMass,
};
pub use integrator::{run, truncate_initial, InitialData, SolverConfig, StepStats, Trajectory};
pub use output::Manifest;
pub use studies::{run_study, simulate, RunResult, StudyReport, Verdict};
