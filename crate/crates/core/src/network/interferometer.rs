use serde::{Deserialize, Serialize};

use super::{validate_gamma_reflectivity, Conserved, Exit, SerialSource, SplitterBank};
use crate::beam_splitter::{reflected_exit, transmitted_exit, Port, RoutingDiagnostics};
use crate::devices::{phase_shift, Beam, DetectorCounter, SourceSpec};
use crate::error::Result;
use crate::message::Message;
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferometerConfig {
    pub gamma: f64,
    pub reflectivity: f64,
    pub chi0: f64,
    pub chi1: f64,
    pub n_particles: u64,
    /// Messengers run through the network before counting starts.
    #[serde(default)]
    pub warmup: u64,
    pub seed: u64,
    pub stream: u64,
    #[serde(default = "SourceSpec::spin_up")]
    pub source: SourceSpec,
}

impl InterferometerConfig {
    pub fn new(gamma: f64, reflectivity: f64, chi: f64, n_particles: u64, seed: u64) -> Self {
        InterferometerConfig {
            gamma,
            reflectivity,
            chi0: chi,
            chi1: 0.0,
            n_particles,
            warmup: 0,
            seed,
            stream: 0,
            source: SourceSpec::spin_up(),
        }
    }

    /// Phase difference `χ0 − χ1`.
    pub fn chi(&self) -> f64 {
        self.chi0 - self.chi1
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterferometerCounts {
    pub emitted: u64,
    pub o_beam: u64,
    pub h_beam: u64,
    /// Transmitted by BS1 or BS2.
    pub lost: u64,
    pub diagnostics: RoutingDiagnostics,
}

impl Conserved for InterferometerCounts {
    fn emitted(&self) -> u64 {
        self.emitted
    }

    fn accounted(&self) -> u64 {
        self.o_beam + self.h_beam + self.lost
    }
}

/// Follows one messenger from BS0 to an exit. `turn` acts on the message in
/// each arm right after BS0 (identity for the plain interferometer, the
/// mu-metal turners in the Bell network). Arm A carries χ0 and the O-side
/// turner, arm B carries χ1 and the H-side turner.
pub(crate) fn traverse(
    bank: &mut SplitterBank,
    msg: Message,
    chi0: f64,
    chi1: f64,
    turn: impl Fn(&Message, Beam) -> Message,
    rng: &mut RngStream,
) -> Exit {
    let [bs0, bs1, bs2, bs3] = &mut bank.bs;
    let out0 = bs0.process(Port::Zero, msg, rng);
    let (arm_splitter, beam, chi, bs3_port) = if out0.channel == reflected_exit(Port::Zero) {
        (bs1, Beam::O, chi0, Port::Zero)
    } else {
        (bs2, Beam::H, chi1, Port::One)
    };
    let turned = turn(&out0.message, beam);
    let out_arm = arm_splitter.process(Port::Zero, turned, rng);
    if out_arm.channel != reflected_exit(Port::Zero) {
        return Exit::Lost;
    }
    let shifted = phase_shift(&out_arm.message, chi);
    let out3 = bs3.process(bs3_port, shifted, rng);
    if out3.channel == transmitted_exit(Port::Zero) {
        Exit::O(out3.message)
    } else {
        Exit::H(out3.message)
    }
}

/// Runs `n_particles` messengers (after `warmup` uncounted ones) through a
/// freshly initialized interferometer.
pub fn run_interferometer(cfg: &InterferometerConfig) -> Result<InterferometerCounts> {
    validate_gamma_reflectivity(cfg.gamma, cfg.reflectivity)?;
    let mut rng = RngStream::new(cfg.seed, cfg.stream);
    let mut bank = SplitterBank::new(cfg.gamma, cfg.reflectivity, &mut rng)?;
    let mut source = SerialSource::new(cfg.source);
    let mut d_o = DetectorCounter::default();
    let mut d_h = DetectorCounter::default();
    let mut lost = 0u64;
    let identity = |m: &Message, _: Beam| *m;

    for _ in 0..cfg.warmup {
        let msg = source.emit();
        traverse(&mut bank, msg, cfg.chi0, cfg.chi1, identity, &mut rng);
        source.retire();
    }
    let warm = source.emitted();
    for _ in 0..cfg.n_particles {
        let msg = source.emit();
        match traverse(&mut bank, msg, cfg.chi0, cfg.chi1, identity, &mut rng) {
            Exit::O(_) => d_o.detect(),
            Exit::H(_) => d_h.detect(),
            Exit::Lost => lost += 1,
        }
        source.retire();
    }

    Ok(InterferometerCounts {
        emitted: source.emitted() - warm,
        o_beam: d_o.count,
        h_beam: d_h.count,
        lost,
        diagnostics: bank.diagnostics(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::mzi_probabilities;
    use std::f64::consts::PI;

    #[test]
    fn zero_particles_give_zero_counts() {
        let counts = run_interferometer(&InterferometerConfig::new(0.9, 0.2, 0.0, 0, 1)).unwrap();
        assert_eq!(counts, InterferometerCounts::default());
        assert!(counts.is_conserved());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(run_interferometer(&InterferometerConfig::new(1.0, 0.2, 0.0, 10, 1)).is_err());
        assert!(run_interferometer(&InterferometerConfig::new(0.5, 1.5, 0.0, 10, 1)).is_err());
    }

    #[test]
    fn near_quantum_limit_matches_transfer_matrices() {
        let n = 100_000;
        let bright = run_interferometer(&InterferometerConfig::new(0.99, 0.2, 0.0, n, 1)).unwrap();
        assert!(bright.is_conserved());
        let p = mzi_probabilities(0.2, 0.0);
        let frac = bright.o_beam as f64 / n as f64;
        let sigma = (p.o * (1.0 - p.o) / n as f64).sqrt();
        assert!((frac - p.o).abs() < 3.0 * sigma, "{frac} vs {}", p.o);
        let lost = bright.lost as f64 / n as f64;
        assert!((lost - p.loss).abs() < 3.0 * (p.loss * (1.0 - p.loss) / n as f64).sqrt());

        // Dark fringe: the oracle gives exactly zero.
        let dark = run_interferometer(&InterferometerConfig::new(0.99, 0.2, PI, n, 2)).unwrap();
        assert!((dark.o_beam as f64 / n as f64) < 2e-3, "dark O count {}", dark.o_beam);
    }

    #[test]
    fn warmup_is_not_counted() {
        let mut cfg = InterferometerConfig::new(0.9, 0.3, 0.5, 1000, 3);
        cfg.warmup = 500;
        let counts = run_interferometer(&cfg).unwrap();
        assert_eq!(counts.emitted, 1000);
        assert!(counts.is_conserved());
    }

    #[test]
    fn replay_is_identical() {
        let cfg = InterferometerConfig::new(0.7, 0.22, 1.3, 20_000, 42);
        assert_eq!(run_interferometer(&cfg).unwrap(), run_interferometer(&cfg).unwrap());
    }
}
