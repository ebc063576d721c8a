#![allow(dead_code)]

pub mod checks;
pub mod grounding;

use std::path::PathBuf;

use townsim::decision::ScriptedOracle;
use townsim::engine::{self, RunOutcome};
use townsim::world::{load_scenario, RunMode, Scenario};

pub fn scenario_path(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(file)
}

pub fn reference() -> Scenario {
    load_scenario(scenario_path("reference.json")).expect("reference scenario loads")
}

pub fn reference_discount() -> Scenario {
    load_scenario(scenario_path("reference_discount.json")).expect("discount scenario loads")
}

pub fn oracle_for(sc: &Scenario) -> ScriptedOracle {
    ScriptedOracle::new(sc.sim.oracle.clone(), sc.sim.seed)
}

pub fn run_oracle(sc: &Scenario, mode: RunMode) -> RunOutcome {
    let oracle = oracle_for(sc);
    engine::run(sc, &oracle, mode).expect("oracle never fails")
}

pub fn with_seed(sc: &Scenario, seed: u64) -> Scenario {
    let mut s = sc.clone();
    s.sim.seed = seed;
    s
}
