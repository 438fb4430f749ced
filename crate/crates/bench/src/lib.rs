//! Shared fixture for the benchmarks in `benches/`.

use sirnet_core::{generate_scenario, simulate, GeneratorSpec, Scenario, State};

/// Seeded default scenario and its state at the middle of the run.
pub fn fixture() -> (Scenario, State) {
    let sc = generate_scenario(&GeneratorSpec::default(), 1).expect("seed 1 is valid");
    let traj = simulate(&sc.params, &sc.initial, &sc.settings).expect("seed 1 integrates");
    let mid = traj.states[traj.len() / 2].clone();
    (sc, mid)
}
