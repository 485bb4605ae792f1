//! HTTP service and command line front end over [`lexigraph_core::Workbench`].

pub mod cli;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod http;
pub mod jobs;
pub mod ops;

pub use config::ServiceConfig;
pub use error::{ErrorBody, ServiceError};
