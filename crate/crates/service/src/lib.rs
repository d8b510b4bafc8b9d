//! Coordinator, store and worker for distributed secant experiments.

pub mod api;
pub mod client;
pub mod config;
pub mod coordinator;
pub mod store;
pub mod worker;

pub use config::CoordinatorConfig;
pub use store::{ExperimentStore, StoreError};
