//! Non-Markovian quantum jump simulation.
//!
//! Three engines share one configuration and one output format:
//!
//! * [`ledger`]: deterministic existence-probability bookkeeping over the
//!   quantum trajectories of the ensemble,
//! * [`mc`]: the standard Monte Carlo unraveling with reversed jumps,
//! * [`exact`]: fourth-order Runge-Kutta integration of the master equation.

pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod ledger;
pub mod mc;
pub mod models;
pub mod observables;
pub mod qcore;
pub mod reservoir;
pub mod series;

pub use config::{parse_config, EngineKind, SimConfig};
pub use error::{Error, Result};
pub use series::RunOutput;

/// Runs the engine selected in `config`.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    match config.engine {
        EngineKind::Ledger => ledger::run_ledger(config),
        EngineKind::Mc => mc::run_ensemble(config, config.n_r, config.seed),
        EngineKind::Exact => exact::run_exact(config),
    }
}
