//! Shared fixtures for the benchmark targets.

use mdpalign::{gen_lure_mdp, GenConfig, Mdp};

/// The default 10-state benchmark environment.
pub fn default_lure(seed: u64) -> Mdp {
    gen_lure_mdp(&GenConfig::default().with_seed(seed)).expect("valid generator config")
}

/// A reduced instance whose policy space (3^7) keeps exhaustive enumeration
/// benchmarks in the tens of milliseconds.
pub fn small_lure(seed: u64) -> Mdp {
    let cfg = GenConfig {
        n_states: 8,
        ..GenConfig::default()
    }
    .with_seed(seed);
    gen_lure_mdp(&cfg).expect("valid generator config")
}
