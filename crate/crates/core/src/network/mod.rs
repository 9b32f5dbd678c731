//! Event-driven executors for the three experiments.
//!
//! Every executor emits one messenger, follows it through the device graph
//! until it is detected or destroyed, and only then emits the next one.
//!
//! Interferometer wiring (shared by the interferometer and Bell networks):
//!
//! ```text
//! S ─► BS0 ─refl─► BS1 ─refl─► χ0 ─► BS3 port 0
//!       └─trans─► BS2 ─refl─► χ1 ─► BS3 port 1
//! BS1, BS2 transmitted ─► loss
//! BS3 transmitted from port 0 / reflected from port 1 ─► O beam, other exit ─► H beam
//! ```
//!
//! Neutrons reaching the O beam have been reflected twice.

mod bell;
mod interferometer;
mod ozawa;

pub use bell::{run_bell, BellConfig, BellCounts, BellRun, BellSetting};
pub use interferometer::{run_interferometer, InterferometerConfig, InterferometerCounts};
pub use ozawa::{run_ozawa, InitialState, OzawaConfig, OzawaCounts};

use serde::{Deserialize, Serialize};

use crate::beam_splitter::{BeamSplitter, RoutingDiagnostics};
use crate::devices::SourceSpec;
use crate::error::{Error, Result};
use crate::message::Message;
use crate::rng::RngStream;

/// Counts whose detections and losses must add up to the emitted number.
pub trait Conserved {
    fn emitted(&self) -> u64;
    fn accounted(&self) -> u64;

    fn is_conserved(&self) -> bool {
        self.emitted() == self.accounted()
    }
}

/// One row of a count table: the setting, the random stream it ran on and
/// the resulting counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRow<S, C> {
    pub setting: S,
    pub stream_id: u64,
    pub counts: C,
}

/// Detector tallies keyed by setting, in sweep order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountTable<S, C> {
    pub rows: Vec<CountRow<S, C>>,
}

impl<S, C> Default for CountTable<S, C> {
    fn default() -> Self {
        CountTable { rows: Vec::new() }
    }
}

impl<S, C: Conserved> CountTable<S, C> {
    pub fn is_conserved(&self) -> bool {
        self.rows.iter().all(|r| r.counts.is_conserved())
    }
}

impl<S, C> CountTable<S, C> {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CountRow<S, C>> {
        self.rows.iter()
    }
}

/// Source that refuses to emit while a messenger is still in flight.
#[derive(Debug)]
pub(crate) struct SerialSource {
    spec: SourceSpec,
    in_flight: bool,
    emitted: u64,
}

impl SerialSource {
    pub(crate) fn new(spec: SourceSpec) -> Self {
        SerialSource {
            spec,
            in_flight: false,
            emitted: 0,
        }
    }

    pub(crate) fn emit(&mut self) -> Message {
        assert!(!self.in_flight, "source emitted while a messenger was in flight");
        self.in_flight = true;
        self.emitted += 1;
        self.spec.emit()
    }

    /// The current messenger was detected or destroyed.
    pub(crate) fn retire(&mut self) {
        debug_assert!(self.in_flight);
        self.in_flight = false;
    }

    pub(crate) fn emitted(&self) -> u64 {
        self.emitted
    }
}

/// The four identical adaptive beam splitters of the interferometer.
#[derive(Clone, Debug)]
pub(crate) struct SplitterBank {
    pub(crate) bs: [BeamSplitter; 4],
}

impl SplitterBank {
    pub(crate) fn new(gamma: f64, reflectivity: f64, rng: &mut RngStream) -> Result<Self> {
        Ok(SplitterBank {
            bs: [
                BeamSplitter::new(gamma, reflectivity, rng)?,
                BeamSplitter::new(gamma, reflectivity, rng)?,
                BeamSplitter::new(gamma, reflectivity, rng)?,
                BeamSplitter::new(gamma, reflectivity, rng)?,
            ],
        })
    }

    pub(crate) fn diagnostics(&self) -> RoutingDiagnostics {
        self.bs.iter().fold(RoutingDiagnostics::default(), |acc, b| {
            let d = b.diagnostics();
            RoutingDiagnostics {
                swapped: acc.swapped + d.swapped,
                raw_register: acc.raw_register + d.raw_register,
            }
        })
    }
}

/// Where a messenger ends up after leaving the interferometer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Exit {
    O(Message),
    H(Message),
    Lost,
}

pub(crate) fn validate_gamma_reflectivity(gamma: f64, reflectivity: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if !(0.0..=1.0).contains(&reflectivity) {
        return Err(Error::ReflectivityOutOfRange(reflectivity));
    }
    Ok(())
}
