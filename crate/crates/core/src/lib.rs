//! Linear threshold cascades on large directed networks.
//!
//! The crate covers three layers:
//!
//! * exact synchronous dynamics ([`dynamics`]) on compressed adjacency
//!   networks ([`graph`]);
//! * random network ensembles with prescribed degree/threshold/state
//!   statistics ([`ensembles`], [`statistics`]);
//! * the one-dimensional mean-field recursion `x(t+1) = phi(x(t))`,
//!   `y(t+1) = psi(x(t))` with its fixed points and limit profiles
//!   ([`meanfield`]).
//!
//! [`ingest`] reads SNAP edge lists and writes result tables, and
//! [`harness`] bundles the experiment recipes used by the `ltm` binary.

pub mod dynamics;
pub mod ensembles;
mod error;
pub mod graph;
pub mod harness;
pub mod ingest;
pub mod meanfield;
pub mod rng;
pub mod statistics;
pub mod threshold;

pub use error::{Error, Result};
pub use graph::{Network, NodeId, StateVector};
