//! Shared fixtures for the benchmarks.

use colbreak::{
    BreakageMode, CoalescenceProbability, DaughterModel, Fragmentation, Grid, InitialData,
    KernelModel, KernelVariant, OperatorWorkspace, State,
};

/// Default-scenario physics on `[1/n, n]` with `cells_per_decade` resolution.
pub fn workspace(n: f64, cells_per_decade: usize, mode: BreakageMode) -> OperatorWorkspace {
    OperatorWorkspace::assemble(
        &Grid::geometric(n, cells_per_decade).expect("valid grid"),
        &KernelModel::new(KernelVariant::KineticTheory, 1.0, 0.2, 0.2).expect("valid kernel"),
        &CoalescenceProbability::Constant { value: 0.5 },
        &Fragmentation::PowerLaw(DaughterModel::new(-0.5).expect("valid θ")),
        mode,
    )
    .expect("assembly succeeds")
}

pub fn initial(ws: &OperatorWorkspace) -> State {
    let data = InitialData::Exponential {
        number: 1.0,
        mean_volume: 1.0,
    };
    colbreak::truncate_initial(&data, ws.grid()).expect("valid initial data")
}
