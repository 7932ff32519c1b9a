//! Agent-based market simulator coupling scalar opinion dynamics with
//! zero- and near-zero-intelligence traders on a limit-order-book
//! continuous double auction.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod opinion;
pub mod orderbook;
pub mod output;
pub mod session;
pub mod traders;

pub use config::{config_digest, parse_config, parse_config_with, ConfigError};
pub use opinion::{classify_convergence, Convergence, OdModel, OdParams, Opinion, OpinionPopulation};
pub use orderbook::{LimitOrderBook, Order, Side, Trade};
pub use session::{run_experiment, run_replications, ExperimentConfig, RunOutput};
pub use traders::{MarketContext, Role, Strategy, TraderState};
