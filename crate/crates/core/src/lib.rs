//! Event-by-event simulation of single-neutron interferometry, Bell-type
//! spin-path correlation and error-disturbance experiments.
//!
//! Every neutron is a messenger carrying a two-component complex message.
//! Beam splitters are adaptive machines that learn from the messages they
//! see; no wave function of the ensemble is ever constructed. The
//! [`oracle`] module holds the quantum-theory predictions the simulation is
//! compared against.

pub mod acceptance;
pub mod beam_splitter;
pub mod devices;
pub mod error;
pub mod harness;
pub mod message;
pub mod network;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
pub use message::{Message, UnitVector};
pub use rng::RngStream;
