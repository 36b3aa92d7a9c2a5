//! Service, persistence and tooling for S-MBank on top of `smbank-core`.

pub mod api;
pub mod cli;
pub mod client;
pub mod config;
pub mod keys;
pub mod report;
pub mod service;
pub mod store;

pub use config::ServerConfig;
pub use service::{BackgroundServer, Service, ServiceError, Step};
