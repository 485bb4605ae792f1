//! Populate a terminology-mapped knowledge graph by querying a language model
//! concept by concept, then map the free-text objects it returns back onto
//! terminology codes with exact cosine search.
//!
//! The crate is split along the pipeline:
//!
//! - [`store`]: terminologies, code sets, triples, runs, matches and
//!   materialized custom tables, persisted as a versioned snapshot.
//! - [`embeddings`]: the embedder plugin contract, pooling, summary vectors
//!   and cosine geometry.
//! - [`llm`]: prompt rendering, response format instructions, response
//!   parsing, cost accounting and the record/replay provider.
//! - [`engine`]: run orchestration, repeat-sample finalization, beceptivity
//!   enforcement and expansion strings.
//! - [`matcher`]: nearest-code search over a code set.
//! - [`workbench`]: the facade the CLI and HTTP service drive.

pub mod embeddings;
pub mod engine;
pub mod error;
pub mod llm;
pub mod matcher;
pub mod store;
pub mod workbench;

pub use error::{Error, Result};
pub use workbench::{Workbench, WorkbenchConfig};
