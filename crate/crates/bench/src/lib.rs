//! Shared fixtures for the benchmarks in `benches/`.

use strucdamp_core::{Forcing, FrequencyProfile, ModelParams, SpectralState, TorusGrid, TorusSolver};

/// n = 1, α = 2, θ = δ = 1.
pub fn beam() -> ModelParams {
    ModelParams::new(1, 2.0, 1.0, 1.0).expect("valid parameters")
}

/// Semilinear solver with p = 2 on a box of length 40 and its Gaussian initial state.
pub fn semilinear(n: usize, modes: usize) -> (TorusSolver, SpectralState) {
    let params = ModelParams::new(n, 2.0, 1.0, 1.0).expect("valid parameters");
    let grid = TorusGrid::new(n, 40.0, modes).expect("valid grid");
    let solver = TorusSolver::new(grid, params, Forcing::Power { p: 2.0 }).expect("solver");
    let g = FrequencyProfile::Gaussian { width: 1.0 };
    let state = solver.state_from_profiles(Some(&g), Some(&g), 0.1).expect("state");
    (solver, state)
}
