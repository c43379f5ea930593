//! Surface-code decoding pipeline: lattice algebra, noise simulation,
//! Union-Find decoding with exact oracles, a framed syndrome stream and
//! latency accounting.

pub mod config;
pub mod conformance;
pub mod error;
pub mod flags;
pub mod geometry;
pub mod gf2;
pub mod graph;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod pipeline;
pub mod record;
pub mod service;
pub mod stream;
pub mod trace;
pub mod uf;

pub use error::{Error, Result};
