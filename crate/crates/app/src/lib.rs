//! Runtime layer: configuration, HTTP providers, the response cache,
//! benchmark runners, the HTTP service and the command-line front end.

pub mod bench;
pub mod cache;
pub mod config;
pub mod error;
pub mod http;
pub mod report;
pub mod runtime;
pub mod server;

pub use error::AppError;
