//! Adaptive explicit time stepping of the truncated system and projection of
//! initial data onto the grid.
//!
//! Steps use the Bogacki–Shampine 3(2) pair with first-same-as-last reuse.
//! Accepted states are nonnegative: undershoot within the clip threshold is
//! zeroed, anything deeper rejects the step and halves `dt`. Checkpoints are
//! read off cubic Hermite dense output and never shorten a step.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{s_norm, MomentRecord};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operators::{OperatorWorkspace, State};
use crate::quad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub t_end: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Negative values above `−negativity_clip · max(state)` are zeroed.
    pub negativity_clip: f64,
    /// Checkpoint times in `[0, t_end]`; `0` and `t_end` are always added.
    pub output_times: Vec<f64>,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::with_checkpoints(5.0, 11)
    }
}

impl SolverConfig {
    /// Default tolerances with `count` evenly spaced checkpoints on `[0, t_end]`.
    pub fn with_checkpoints(t_end: f64, count: usize) -> Self {
        Self {
            t_end,
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            dt_init: 1e-3,
            dt_min: 1e-12,
            dt_max: 1.0,
            negativity_clip: 1e-14,
            output_times: evenly_spaced(t_end, count),
            max_steps: 1_000_000,
        }
    }

    /// All violated constraints, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            out.push(format!("t_end must be finite and ≥ 0, got {}", self.t_end));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            out.push(format!(
                "tolerances must be > 0, got rel_tol = {}, abs_tol = {}",
                self.rel_tol, self.abs_tol
            ));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            out.push(format!(
                "0 < dt_min ≤ dt_init ≤ dt_max required, got {} / {} / {}",
                self.dt_min, self.dt_init, self.dt_max
            ));
        }
        if !(self.negativity_clip >= 0.0) {
            out.push(format!(
                "negativity_clip must be ≥ 0, got {}",
                self.negativity_clip
            ));
        }
        if let Some(t) = self
            .output_times
            .iter()
            .find(|&&t| !(0.0..=self.t_end).contains(&t))
        {
            out.push(format!("output time {t} outside [0, t_end]"));
        }
        if self.max_steps == 0 {
            out.push("max_steps must be ≥ 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    /// Sorted, deduplicated checkpoint times starting at 0 and ending at `t_end`.
    pub fn checkpoint_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self.output_times.clone();
        times.push(0.0);
        times.push(self.t_end);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

fn evenly_spaced(t_end: f64, count: usize) -> Vec<f64> {
    match count {
        0 | 1 => vec![0.0, t_end],
        _ => (0..count)
            .map(|k| t_end * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Named initial densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum InitialData {
    /// `(N/m) e^{−μ/m}`
    Exponential { number: f64, mean_volume: f64 },
    /// Gamma density with total number `N`, shape `α` and mean volume `m`.
    Gamma {
        number: f64,
        shape: f64,
        mean_volume: f64,
    },
    /// `N` particles spread uniformly over the cell containing `volume`.
    Monodisperse { volume: f64, number: f64 },
    /// Piecewise linear in `ln μ` between tabulated `(μ, g)` points, zero
    /// outside the table.
    Table { points: Vec<(f64, f64)> },
}

impl InitialData {
    pub fn violations(&self) -> Vec<String> {
        let positive = |name: &str, v: f64| {
            (!(v > 0.0 && v.is_finite())).then(|| format!("initial {name} must be > 0, got {v}"))
        };
        match self {
            InitialData::Exponential {
                number,
                mean_volume,
            } => [positive("number", *number), positive("mean_volume", *mean_volume)]
                .into_iter()
                .flatten()
                .collect(),
            InitialData::Gamma {
                number,
                shape,
                mean_volume,
            } => [
                positive("number", *number),
                positive("shape", *shape),
                positive("mean_volume", *mean_volume),
            ]
            .into_iter()
            .flatten()
            .collect(),
            InitialData::Monodisperse { volume, number } => {
                [positive("volume", *volume), positive("number", *number)]
                    .into_iter()
                    .flatten()
                    .collect()
            }
            InitialData::Table { points } => {
                let mut out = Vec::new();
                if points.len() < 2 {
                    out.push("initial table needs at least two rows".into());
                }
                if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    out.push("initial table volumes must be strictly increasing".into());
                }
                if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.0.is_finite())) {
                    out.push(format!("initial table volume must be > 0, got {}", p.0));
                }
                if let Some(p) = points.iter().find(|p| !(p.1 >= 0.0 && p.1.is_finite())) {
                    out.push(format!(
                        "initial table density must be finite and ≥ 0, got {} at μ = {}",
                        p.1, p.0
                    ));
                }
                out
            }
        }
    }

    /// Pointwise density; `None` for the monodisperse preset.
    pub fn density(&self, mu: f64) -> Option<f64> {
        match self {
            InitialData::Exponential {
                number,
                mean_volume,
            } => Some(number / mean_volume * (-mu / mean_volume).exp()),
            InitialData::Gamma {
                number,
                shape,
                mean_volume,
            } => {
                let scale = mean_volume / shape;
                let log = (shape - 1.0) * mu.ln()
                    - mu / scale
                    - statrs::function::gamma::ln_gamma(*shape)
                    - shape * scale.ln();
                Some(number * log.exp())
            }
            InitialData::Monodisperse { .. } => None,
            InitialData::Table { points } => Some(table_density(points, mu)),
        }
    }
}

fn table_density(points: &[(f64, f64)], mu: f64) -> f64 {
    let (first, last) = (points[0].0, points[points.len() - 1].0);
    if !(mu >= first && mu <= last) {
        return 0.0;
    }
    let k = points.partition_point(|p| p.0 <= mu).clamp(1, points.len() - 1);
    let (x0, g0) = points[k - 1];
    let (x1, g1) = points[k];
    let w = (mu.ln() - x0.ln()) / (x1.ln() - x0.ln());
    g0 + w * (g1 - g0)
}

/// Cell averages of `g_in` on the grid; zero outside `[1/n, n]`.
pub fn truncate_initial(data: &InitialData, grid: &Grid) -> Result<State> {
    let v = data.violations();
    if !v.is_empty() {
        return Err(Error::Input(v.join("; ")));
    }
    match data {
        InitialData::Monodisperse { volume, number } => {
            let mut s = State::zeros(grid.len());
            if let Some(l) = grid.locate(*volume)? {
                s.g[l] = number / grid.cell(l).width;
            }
            Ok(s)
        }
        InitialData::Table { points } => {
            let breaks: Vec<f64> = points.iter().map(|p| p.0).collect();
            average_cells(|mu| table_density(points, mu), grid, &breaks)
        }
        _ => average_cells(|mu| data.density(mu).unwrap_or(0.0), grid, &[]),
    }
}

/// Cell averages of an arbitrary density.
pub fn truncate_density<F: Fn(f64) -> f64>(density: F, grid: &Grid) -> Result<State> {
    average_cells(density, grid, &[])
}

fn average_cells<F: Fn(f64) -> f64>(density: F, grid: &Grid, breaks: &[f64]) -> Result<State> {
    let mut g = Vec::with_capacity(grid.len());
    for c in grid.cells() {
        let mut nodes = vec![c.left];
        nodes.extend(breaks.iter().copied().filter(|&b| b > c.left && b < c.right));
        nodes.push(c.right);
        let mut negative = None;
        let mut total = 0.0;
        for w in nodes.windows(2) {
            let q = quad::integrate(
                |mu| {
                    let v = density(mu);
                    if v < 0.0 || !v.is_finite() {
                        negative.get_or_insert((mu, v));
                    }
                    v
                },
                w[0],
                w[1],
                1e-10,
                0.0,
                200,
            );
            total += q.value;
        }
        if let Some((mu, v)) = negative {
            return Err(Error::Input(format!(
                "initial density must be finite and ≥ 0, got {v} at μ = {mu}"
            )));
        }
        g.push(total / c.width);
    }
    Ok(State { t: 0.0, g })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    /// Weighted RMS error estimate; `≤ 1` passes the tolerance test.
    pub error: f64,
    pub accepted: bool,
    /// The step passed the error test but undershot below the clip threshold.
    pub negative: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub negativity_rejections: usize,
    pub rhs_evaluations: usize,
    pub clipped_values: usize,
    pub min_dt: f64,
    pub max_dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub state: State,
    pub moments: MomentRecord,
    pub s_norm: f64,
    /// `(M₁(t) − M₁(0)) / M₁(0)`, zero for massless data.
    pub mass_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sigma: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.state.t).collect()
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.checkpoints.iter().map(|c| &c.state)
    }

    pub fn final_state(&self) -> &State {
        &self.checkpoints.last().expect("trajectory is never empty").state
    }

    pub fn max_mass_drift(&self) -> f64 {
        self.checkpoints
            .iter()
            .map(|c| c.mass_drift.abs())
            .fold(0.0, f64::max)
    }

    pub fn max_s_norm(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.s_norm).fold(0.0, f64::max)
    }
}

const A21: f64 = 0.5;
const A32: f64 = 0.75;
const B: [f64; 3] = [2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0];
/// Third-order minus embedded second-order weights.
const E: [f64; 4] = [-5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0];

struct Stepper<'a> {
    ws: &'a OperatorWorkspace,
    cfg: &'a SolverConfig,
    stage: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    y1: Vec<f64>,
    evaluations: usize,
}

struct Attempt {
    error: f64,
    accepted: bool,
    negative: bool,
    clipped: usize,
}

impl<'a> Stepper<'a> {
    fn new(ws: &'a OperatorWorkspace, cfg: &'a SolverConfig) -> Self {
        let m = ws.len();
        Self {
            ws,
            cfg,
            stage: vec![0.0; m],
            k2: vec![0.0; m],
            k3: vec![0.0; m],
            k4: vec![0.0; m],
            y1: vec![0.0; m],
            evaluations: 0,
        }
    }

    fn rhs(&mut self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.evaluations += 1;
        self.ws.rhs_into(y, out)
    }

    /// One trial step from `(t, y)` with slope `k1`. On acceptance `y1` holds
    /// the clipped new state and `k4` its slope.
    fn attempt(&mut self, t: f64, y: &[f64], k1: &[f64], dt: f64) -> Result<Attempt> {
        let Self {
            ws,
            cfg,
            stage,
            k2,
            k3,
            k4,
            y1,
            evaluations,
        } = self;
        let mut rhs = |y: &[f64], out: &mut [f64]| {
            *evaluations += 1;
            ws.rhs_into(y, out)
        };

        for ((s, y), k) in stage.iter_mut().zip(y).zip(k1) {
            *s = y + dt * A21 * k;
        }
        rhs(stage, k2)?;
        for ((s, y), k) in stage.iter_mut().zip(y).zip(k2.iter()) {
            *s = y + dt * A32 * k;
        }
        rhs(stage, k3)?;
        for l in 0..y.len() {
            y1[l] = y[l] + dt * (B[0] * k1[l] + B[1] * k2[l] + B[2] * k3[l]);
        }
        if let Some(cell) = y1.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t,
                dt,
                cell,
                state: y.to_vec(),
            });
        }
        rhs(y1, k4)?;

        let mut sum = 0.0;
        for l in 0..y.len() {
            let err = dt * (E[0] * k1[l] + E[1] * k2[l] + E[2] * k3[l] + E[3] * k4[l]);
            let scale = cfg.abs_tol + cfg.rel_tol * y[l].abs().max(y1[l].abs());
            sum += (err / scale).powi(2);
        }
        let error = (sum / y.len().max(1) as f64).sqrt();

        let mut outcome = Attempt {
            error,
            accepted: error <= 1.0,
            negative: false,
            clipped: 0,
        };
        if outcome.accepted {
            let peak = y1.iter().fold(0.0f64, |a, &v| a.max(v));
            let clip = cfg.negativity_clip * peak;
            if y1.iter().any(|&v| v < -clip) {
                outcome.accepted = false;
                outcome.negative = true;
            } else {
                for v in y1.iter_mut().filter(|v| **v < 0.0) {
                    *v = 0.0;
                    outcome.clipped += 1;
                }
                if outcome.clipped > 0 {
                    rhs(y1, k4)?;
                }
            }
        }
        Ok(outcome)
    }
}

/// Single trial step of size `dt` from `s`.
pub fn step(
    ws: &OperatorWorkspace,
    s: &State,
    dt: f64,
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let k1 = ws.apply_rhs(s)?;
    let mut stepper = Stepper::new(ws, cfg);
    let a = stepper.attempt(s.t, &s.g, &k1, dt)?;
    let state = if a.accepted {
        State {
            t: s.t + dt,
            g: stepper.y1,
        }
    } else {
        s.clone()
    };
    Ok(StepOutcome {
        state,
        error: a.error,
        accepted: a.accepted,
        negative: a.negative,
    })
}

fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len())
        .map(|l| (h00 * y0[l] + h10 * h * f0[l] + h01 * y1[l] + h11 * h * f1[l]).max(0.0))
        .collect()
}

fn checkpoint(s: State, grid: &Grid, sigma: f64, mass0: f64) -> Result<Checkpoint> {
    let moments = MomentRecord::compute(&s, grid, sigma, &[])?;
    let mass_drift = if mass0 > 0.0 {
        (moments.mass() - mass0) / mass0
    } else {
        0.0
    };
    Ok(Checkpoint {
        s_norm: s_norm(&s, grid, sigma)?,
        moments,
        mass_drift,
        state: s,
    })
}

/// Integrates from `initial` to `cfg.t_end`.
pub fn run(ws: &OperatorWorkspace, initial: &State, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if initial.len() != ws.len() {
        return Err(Error::LengthMismatch {
            expected: ws.len(),
            got: initial.len(),
        });
    }
    if let Some(cell) = initial.g.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Input(format!(
            "initial state must be finite and ≥ 0, cell {cell} holds {}",
            initial.g[cell]
        )));
    }
    let grid = ws.grid();
    let sigma = ws.kernel().sigma;
    let times = cfg.checkpoint_times();
    let mass0 = crate::diagnostics::moment(initial, grid, 1.0)?;

    let mut y = initial.g.clone();
    let mut t = 0.0;
    let mut stepper = Stepper::new(ws, cfg);
    let mut k1 = vec![0.0; y.len()];
    stepper.rhs(&y, &mut k1)?;

    let mut checkpoints = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() && times[next] <= t {
        checkpoints.push(checkpoint(State { t: times[next], g: y.clone() }, grid, sigma, mass0)?);
        next += 1;
    }

    let mut stats = StepStats {
        min_dt: f64::INFINITY,
        ..StepStats::default()
    };
    let mut dt = cfg.dt_init;
    while next < times.len() {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(Error::StepLimit(cfg.max_steps));
        }
        let remaining = cfg.t_end - t;
        let h = dt.min(remaining);
        let last = h == remaining;
        let a = stepper.attempt(t, &y, &k1, h)?;
        if !a.accepted {
            stats.rejected += 1;
            if a.negative {
                stats.negativity_rejections += 1;
                dt = 0.5 * h;
            } else {
                dt = h * (0.9 * a.error.powf(-1.0 / 3.0)).clamp(0.2, 1.0);
            }
            if dt < cfg.dt_min {
                return Err(Error::Stiffness {
                    t,
                    dt,
                    dt_min: cfg.dt_min,
                });
            }
            continue;
        }

        let t1 = if last { cfg.t_end } else { t + h };
        stats.accepted += 1;
        stats.clipped_values += a.clipped;
        stats.min_dt = stats.min_dt.min(h);
        stats.max_dt = stats.max_dt.max(h);
        while next < times.len() && times[next] <= t1 {
            let tc = times[next];
            let g = if tc == t1 {
                stepper.y1.clone()
            } else {
                hermite(t, &y, &k1, t1, &stepper.y1, &stepper.k4, tc)
            };
            checkpoints.push(checkpoint(State { t: tc, g }, grid, sigma, mass0)?);
            next += 1;
        }
        std::mem::swap(&mut y, &mut stepper.y1);
        std::mem::swap(&mut k1, &mut stepper.k4);
        t = t1;

        let factor = if a.error == 0.0 {
            5.0
        } else {
            (0.9 * a.error.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
        };
        // the clamped final step says nothing about the natural step size
        if !last {
            dt = (h * factor).clamp(cfg.dt_min, cfg.dt_max);
        }
    }
    stats.rhs_evaluations = stepper.evaluations;
    if stats.accepted == 0 {
        stats.min_dt = 0.0;
    }

    Ok(Trajectory {
        sigma,
        checkpoints,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::moment;
    use crate::kernels::{
        CoalescenceProbability, DaughterModel, Fragmentation, KernelModel, KernelVariant,
    };
    use crate::operators::BreakageMode;

    fn ws(n: f64, cpd: usize, variant: KernelVariant, e: f64, theta: f64, mode: BreakageMode) -> OperatorWorkspace {
        let grid = Grid::geometric(n, cpd).unwrap();
        OperatorWorkspace::assemble(
            &grid,
            &KernelModel::new(variant, 1.0, 0.2, 0.2).unwrap(),
            &CoalescenceProbability::constant(e).unwrap(),
            &Fragmentation::PowerLaw(DaughterModel::new(theta).unwrap()),
            mode,
        )
        .unwrap()
    }

    fn exponential() -> InitialData {
        InitialData::Exponential {
            number: 1.0,
            mean_volume: 1.0,
        }
    }

    #[test]
    fn exponential_cell_averages_closed_form() {
        let grid = Grid::geometric(10.0, 4).unwrap();
        let s = truncate_initial(&exponential(), &grid).unwrap();
        for (c, g) in grid.cells().iter().zip(&s.g) {
            let exact = ((-c.left).exp() - (-c.right).exp()) / c.width;
            assert!((g - exact).abs() <= 1e-10 * exact);
        }
    }

    #[test]
    fn density_below_domain_truncates_to_zero() {
        let grid = Grid::geometric(10.0, 4).unwrap();
        let s = truncate_density(|mu| if mu < 0.05 { 1.0 } else { 0.0 }, &grid).unwrap();
        assert!(s.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indicator_of_one_cell() {
        let grid = Grid::geometric(10.0, 4).unwrap();
        let c = *grid.cell(3);
        let s = truncate_density(|mu| if mu >= c.left && mu < c.right { 2.5 } else { 0.0 }, &grid).unwrap();
        for (l, g) in s.g.iter().enumerate() {
            let want = if l == 3 { 2.5 } else { 0.0 };
            assert!((g - want).abs() < 1e-9, "{l}: {g}");
        }
    }

    #[test]
    fn negative_density_is_an_input_error() {
        let grid = Grid::geometric(10.0, 2).unwrap();
        assert!(matches!(
            truncate_density(|mu| 1.0 - mu, &grid),
            Err(Error::Input(_))
        ));
        let bad = InitialData::Table {
            points: vec![(1.0, 1.0), (2.0, -1.0)],
        };
        assert!(matches!(truncate_initial(&bad, &grid), Err(Error::Input(_))));
    }

    #[test]
    fn gamma_and_table_presets() {
        let grid = Grid::geometric(1000.0, 32).unwrap();
        let gamma = InitialData::Gamma {
            number: 2.0,
            shape: 1.0,
            mean_volume: 1.0,
        };
        let a = truncate_initial(&gamma, &grid).unwrap();
        let b = truncate_initial(&exponential(), &grid).unwrap();
        for (x, y) in a.g.iter().zip(&b.g) {
            assert!((x - 2.0 * y).abs() <= 1e-12 * x.max(1e-300));
        }
        let g3 = InitialData::Gamma {
            number: 1.0,
            shape: 3.0,
            mean_volume: 2.0,
        };
        let s = truncate_initial(&g3, &grid).unwrap();
        assert!((moment(&s, &grid, 0.0).unwrap() - 1.0).abs() < 1e-6);
        assert!((moment(&s, &grid, 1.0).unwrap() - 2.0).abs() < 1e-2);

        let table = InitialData::Table {
            points: vec![(1.0, 2.0), (10.0, 2.0)],
        };
        let s = truncate_initial(&table, &grid).unwrap();
        let n0 = moment(&s, &grid, 0.0).unwrap();
        assert!((n0 - 18.0).abs() < 0.5, "{n0}");
        assert_eq!(table.density(0.5), Some(0.0));
        let ramp = InitialData::Table {
            points: vec![(1.0, 0.0), (100.0, 2.0)],
        };
        assert!((ramp.density(10.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monodisperse_preset() {
        let grid = Grid::geometric(10.0, 4).unwrap();
        let s = truncate_initial(
            &InitialData::Monodisperse {
                volume: 1.0,
                number: 3.0,
            },
            &grid,
        )
        .unwrap();
        assert!((moment(&s, &grid, 0.0).unwrap() - 3.0).abs() < 1e-14);
        let out = truncate_initial(
            &InitialData::Monodisperse {
                volume: 50.0,
                number: 3.0,
            },
            &grid,
        )
        .unwrap();
        assert!(out.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_state_step() {
        let w = ws(100.0, 4, KernelVariant::KineticTheory, 0.5, -0.5, BreakageMode::MassRescaled);
        let out = step(&w, &State::zeros(w.len()), 0.1, &SolverConfig::default()).unwrap();
        assert!(out.accepted);
        assert_eq!(out.error, 0.0);
        assert!(out.state.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_is_third_order_against_small_step_reference() {
        let w = ws(10.0, 2, KernelVariant::Constant, 0.7, -0.3, BreakageMode::MassRescaled);
        let s = State {
            t: 0.0,
            g: vec![1.0, 0.5, 0.2, 0.1],
        };
        let cfg = SolverConfig {
            rel_tol: 1.0,
            abs_tol: 1.0,
            ..SolverConfig::default()
        };
        // reference: forward Euler with tiny steps, then Richardson-extrapolated
        let euler = |h: f64, steps: usize| {
            let mut y = s.clone();
            for _ in 0..steps {
                let d = w.apply_rhs(&y).unwrap();
                for (v, d) in y.g.iter_mut().zip(&d) {
                    *v += h * d;
                }
            }
            y.g
        };
        let t = 0.05;
        let (a, b) = (euler(t / 20000.0, 20000), euler(t / 40000.0, 40000));
        let reference: Vec<f64> = a.iter().zip(&b).map(|(a, b)| 2.0 * b - a).collect();
        let err = |dt: f64| {
            let mut y = s.clone();
            let n = (t / dt).round() as usize;
            for _ in 0..n {
                y = step(&w, &y, dt, &cfg).unwrap().state;
            }
            y.g.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(t / 2.0), err(t / 4.0));
        let order = (e1 / e2).log2();
        assert!(order > 2.5, "observed order {order} ({e1:e}, {e2:e})");
    }

    #[test]
    fn overshoot_is_rejected_then_accepted() {
        // strong death on a nearly empty cell pushes it negative for large dt
        let w = ws(10.0, 2, KernelVariant::Constant, 1.0, 0.0, BreakageMode::MassRescaled);
        let s = State {
            t: 0.0,
            g: vec![1e-8, 50.0, 0.0, 0.0],
        };
        let cfg = SolverConfig {
            rel_tol: 1e12,
            abs_tol: 1e12,
            negativity_clip: 0.0,
            ..SolverConfig::default()
        };
        let mut dt = 0.5;
        let first = step(&w, &s, dt, &cfg).unwrap();
        assert!(!first.accepted && first.negative);
        let mut out = first;
        while !out.accepted {
            dt *= 0.5;
            out = step(&w, &s, dt, &cfg).unwrap();
        }
        assert!(out.state.g.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let w = ws(100.0, 4, KernelVariant::KineticTheory, 0.5, -0.5, BreakageMode::MassRescaled);
        let s = truncate_initial(&exponential(), w.grid()).unwrap();
        let cfg = SolverConfig::with_checkpoints(0.0, 3);
        let traj = run(&w, &s, &cfg).unwrap();
        assert_eq!(traj.checkpoints.len(), 1);
        assert_eq!(traj.final_state().g, s.g);
        assert_eq!(traj.stats.accepted, 0);
    }

    #[test]
    fn run_conserves_mass_and_stays_nonnegative() {
        let w = ws(100.0, 4, KernelVariant::KineticTheory, 0.5, -0.5, BreakageMode::MassRescaled);
        let s = truncate_initial(&exponential(), w.grid()).unwrap();
        let traj = run(&w, &s, &SolverConfig::with_checkpoints(2.0, 5)).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(traj.max_mass_drift() < 1e-10);
        assert!(traj.states().all(|s| s.g.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn pure_breakage_number_grows() {
        let w = ws(100.0, 4, KernelVariant::KineticTheory, 0.0, -0.5, BreakageMode::ExactCount);
        let s = truncate_initial(&exponential(), w.grid()).unwrap();
        let traj = run(&w, &s, &SolverConfig::with_checkpoints(1.0, 5)).unwrap();
        let n: Vec<f64> = traj.checkpoints.iter().map(|c| c.moments.number()).collect();
        assert!(n.windows(2).all(|w| w[1] >= w[0]));
        assert!(traj.max_mass_drift() < 1e-10);
    }

    #[test]
    fn invalid_config_reports_every_problem() {
        let cfg = SolverConfig {
            rel_tol: 0.0,
            dt_min: 1.0,
            negativity_clip: -1.0,
            ..SolverConfig::default()
        };
        match cfg.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dt_floor_reports_stiffness() {
        let w = ws(100.0, 4, KernelVariant::KineticTheory, 0.5, -0.5, BreakageMode::MassRescaled);
        let s = truncate_initial(&exponential(), w.grid()).unwrap();
        let cfg = SolverConfig {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            dt_init: 1e-3,
            dt_min: 1e-4,
            ..SolverConfig::default()
        };
        assert!(matches!(run(&w, &s, &cfg), Err(Error::Stiffness { .. })));
    }
}
