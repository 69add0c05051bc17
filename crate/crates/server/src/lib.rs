//! Command-line and HTTP front ends for the steering engine.

pub mod cli;
pub mod config;
pub mod error;
pub mod http;
pub mod service;

pub use config::ServiceConfig;
pub use error::ServiceError;
pub use service::{Outcome, Service};
