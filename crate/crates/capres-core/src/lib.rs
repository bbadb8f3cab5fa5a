//! Resonance-constrained optimal capacitor placement on radial distribution
//! feeders.
//!
//! The crate models a radial feeder, estimates branch flows with a simplified
//! single-sweep method, prices placements by annual loss cost plus amortized
//! equipment cost, screens installations against parallel-resonance limits,
//! and searches the placement space with two solvers: an extremal-optimization
//! method that enforces the resonance constraint during the search, and a
//! resonance-unaware memetic baseline whose answers are patched afterwards by
//! three repair strategies. A sweep harness reproduces the benchmark
//! protocol: seeded multi-run sweeps over energy prices and capacitor price
//! scales with per-type installation censuses and Welch tests.

pub mod cost;
pub mod eo;
pub mod error;
pub mod memetic;
pub mod network;
pub mod placement;
pub mod powerflow;
pub mod resonance;
pub mod stats;
pub mod sweep;

pub use cost::{amortized_cost, annual_savings, total_annual_cost, CapacitorCatalog, CatalogRow, EconomicParams};
pub use eo::{generate_neighbors, node_fitness, run_eo, sample_rank_exp, sample_rank_power, EoConfig, RunResult};
pub use error::{Error, Result};
pub use memetic::{repair, run_ma, MaConfig, RepairOutcome, RepairStrategy};
pub use network::{load_network, load_network_file, Branch, Bus, Network, ROOT};
pub use placement::Placement;
pub use powerflow::{loss_eq5, solve_flows, subtree_loss, subtree_losses, FlowState};
pub use resonance::{
    check_feasible, harmonic_order, placement_feasible, resonance_frequency, FeasibilityReport,
    ResonanceMode, ResonancePolicy,
};
pub use stats::{mean, sample_std, welch_t_test};
pub use sweep::{census, run_sweep, Algorithm, CellSummary, ExperimentSpec, GridParam, RunRecord, SweepReport};
