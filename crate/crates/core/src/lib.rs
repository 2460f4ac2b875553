//! Claim decomposition into verification questions, web evidence retrieval
//! and ranking, stance-vote verdicts, and the metrics used to evaluate them.
//!
//! External models and search engines sit behind the traits in
//! [`providers`]; [`scripted`] has deterministic in-process implementations.

pub mod datasets;
pub mod evidence;
pub mod metrics;
pub mod providers;
pub mod questiongen;
pub mod scripted;
pub mod text;
pub mod verification;
