use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Conserved, SerialSource};
use crate::devices::{analyzer_along, guide_precession, spin_rotate_x, DetectorCounter, SourceSpec};
use crate::error::{Error, Result};
use crate::message::{Message, UnitVector};
use crate::rng::RngStream;

/// Spin state prepared in stage 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InitialState {
    #[serde(rename = "+z")]
    PlusZ,
    #[serde(rename = "-z")]
    MinusZ,
    #[serde(rename = "+x")]
    PlusX,
    #[serde(rename = "+y")]
    PlusY,
}

impl InitialState {
    pub const ALL: [InitialState; 4] = [
        InitialState::PlusZ,
        InitialState::MinusZ,
        InitialState::PlusX,
        InitialState::PlusY,
    ];

    pub fn index(self) -> u64 {
        match self {
            InitialState::PlusZ => 0,
            InitialState::MinusZ => 1,
            InitialState::PlusX => 2,
            InitialState::PlusY => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InitialState::PlusZ => "+z",
            InitialState::MinusZ => "-z",
            InitialState::PlusX => "+x",
            InitialState::PlusY => "+y",
        }
    }

    /// `(α of SR1, extra Larmor precession after SR1)`.
    ///
    /// `+z`: SR1 off. `−z`: α = π. `+y`: α = π/2. `+x`: α = π/2 with SR1
    /// moved a quarter Larmor period upstream, i.e. a further π/2 of
    /// precession about `+z` after the rotator.
    pub fn preparation(self) -> (f64, f64) {
        match self {
            InitialState::PlusZ => (0.0, 0.0),
            InitialState::MinusZ => (PI, 0.0),
            InitialState::PlusY => (FRAC_PI_2, 0.0),
            InitialState::PlusX => (FRAC_PI_2, FRAC_PI_2),
        }
    }

    /// Stage 1 acting on a spin-up neutron from SA1.
    pub fn prepare(self, up: &Message) -> Message {
        let (alpha, larmor) = self.preparation();
        let m = if alpha != 0.0 { spin_rotate_x(up, alpha) } else { *up };
        if larmor != 0.0 {
            guide_precession(&m, larmor)
        } else {
            m
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+z" | "z" => Ok(InitialState::PlusZ),
            "-z" => Ok(InitialState::MinusZ),
            "+x" | "x" => Ok(InitialState::PlusX),
            "+y" | "y" => Ok(InitialState::PlusY),
            other => Err(Error::Config(format!("unknown initial state `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OzawaConfig {
    /// Detuning angle: M1 measures `σ^φ = cos φ σ^x + sin φ σ^y`.
    pub phi: f64,
    pub initial_state: InitialState,
    /// Analyzer settings of SA2 and SA3, each ±1.
    pub s1: i8,
    pub s2: i8,
    pub n_particles: u64,
    pub seed: u64,
    pub stream: u64,
    /// Replay the same random numbers for the four `(S1, S2)` settings of a
    /// given `(φ, state)`. When false every setting gets its own stream.
    #[serde(default = "default_true")]
    pub common_random_numbers: bool,
}

fn default_true() -> bool {
    true
}

impl OzawaConfig {
    pub fn new(phi: f64, initial_state: InitialState, s1: i8, s2: i8, n_particles: u64, seed: u64) -> Self {
        OzawaConfig {
            phi,
            initial_state,
            s1,
            s2,
            n_particles,
            seed,
            stream: 0,
            common_random_numbers: true,
        }
    }

    fn setting_index(&self) -> u64 {
        match (self.s1 > 0, self.s2 > 0) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }
    }

    /// Stream every particle of this sub-experiment forks from.
    pub fn particle_stream_root(&self) -> RngStream {
        let by_state = RngStream::new(self.seed, self.stream).fork(self.initial_state.index());
        if self.common_random_numbers {
            by_state
        } else {
            by_state.fork(self.setting_index())
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OzawaCounts {
    pub emitted: u64,
    /// Passed SA2 and SA3 and counted by the detector.
    pub detected: u64,
    /// Stopped in M1 (SA2).
    pub destroyed_m1: u64,
    /// Stopped in M2 (SA3).
    pub destroyed_m2: u64,
}

impl OzawaCounts {
    /// Fraction of emitted neutrons passing M1.
    pub fn m1_pass_fraction(&self) -> f64 {
        (self.detected + self.destroyed_m2) as f64 / self.emitted as f64
    }
}

impl Conserved for OzawaCounts {
    fn emitted(&self) -> u64 {
        self.emitted
    }

    fn accounted(&self) -> u64 {
        self.detected + self.destroyed_m1 + self.destroyed_m2
    }
}

fn check_sign(name: &str, s: i8) -> Result<()> {
    if s == 1 || s == -1 {
        Ok(())
    } else {
        Err(Error::field(name, format!("analyzer setting must be +1 or -1, got {s}")))
    }
}

/// One of the sixteen sub-experiments per detuning angle: prepare, measure
/// `σ^φ` with outcome `S1`, measure `σ^y` with outcome `S2`, count.
/// Particle `n` draws from `fork(n)` of [`OzawaConfig::particle_stream_root`].
pub fn run_ozawa(cfg: &OzawaConfig) -> Result<OzawaCounts> {
    check_sign("s1", cfg.s1)?;
    check_sign("s2", cfg.s2)?;
    let root = cfg.particle_stream_root();
    let m1_axis = UnitVector::in_plane(cfg.phi);
    let m2_axis = UnitVector::Y;
    let mut source = SerialSource::new(SourceSpec::spin_up());
    let mut detector = DetectorCounter::default();
    let mut counts = OzawaCounts::default();

    for n in 0..cfg.n_particles {
        let mut rng = root.fork(n);
        let up = source.emit();
        let prepared = cfg.initial_state.prepare(&up);
        match analyzer_along(&prepared, &m1_axis, cfg.s1, &mut rng) {
            None => counts.destroyed_m1 += 1,
            Some(after_m1) => match analyzer_along(&after_m1, &m2_axis, cfg.s2, &mut rng) {
                None => counts.destroyed_m2 += 1,
                Some(_) => detector.detect(),
            },
        }
        source.retire();
    }
    counts.emitted = source.emitted();
    counts.detected = detector.count;
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn preparation_reaches_labelled_directions() {
        let up = Message::spin_up();
        let cases = [
            (InitialState::PlusZ, [0.0, 0.0, 1.0]),
            (InitialState::MinusZ, [0.0, 0.0, -1.0]),
            (InitialState::PlusX, [1.0, 0.0, 0.0]),
            (InitialState::PlusY, [0.0, 1.0, 0.0]),
        ];
        for (state, want) in cases {
            let m = state.prepare(&up).moment();
            for k in 0..3 {
                assert_abs_diff_eq!(m.components()[k], want[k], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sigma_x_on_z_passes_half() {
        let n = 100_000;
        let counts = run_ozawa(&OzawaConfig::new(0.0, InitialState::PlusZ, 1, 1, n, 4)).unwrap();
        assert!(counts.is_conserved());
        let f = counts.m1_pass_fraction();
        assert!((f - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn aligned_analyzer_always_passes() {
        let counts = run_ozawa(&OzawaConfig::new(0.0, InitialState::PlusX, 1, 1, 10_000, 4)).unwrap();
        assert_eq!(counts.destroyed_m1, 0);
        assert_eq!(counts.m1_pass_fraction(), 1.0);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(run_ozawa(&OzawaConfig::new(0.0, InitialState::PlusX, 0, 1, 10, 4)).is_err());
        assert!(run_ozawa(&OzawaConfig::new(0.0, InitialState::PlusX, 1, 2, 10, 4)).is_err());
    }

    #[test]
    fn common_random_numbers_balance_z_states() {
        // For ±z the M1 outcome probability is 1/2 for both signs of S1, so
        // replayed random numbers give equal M1 survivors for S1 = ±1.
        for state in [InitialState::PlusZ, InitialState::MinusZ] {
            let plus = run_ozawa(&OzawaConfig::new(0.6, state, 1, 1, 5_000, 9)).unwrap();
            let minus = run_ozawa(&OzawaConfig::new(0.6, state, -1, -1, 5_000, 9)).unwrap();
            assert_eq!(plus.destroyed_m1, minus.destroyed_m1);
            assert_eq!(plus.detected, minus.detected);
        }
    }

    #[test]
    fn independent_streams_differ_per_setting() {
        let mut a = OzawaConfig::new(0.6, InitialState::PlusZ, 1, 1, 5_000, 9);
        a.common_random_numbers = false;
        let mut b = a.clone();
        b.s1 = -1;
        b.s2 = -1;
        let ca = run_ozawa(&a).unwrap();
        let cb = run_ozawa(&b).unwrap();
        assert!(ca.is_conserved() && cb.is_conserved());
        assert_ne!(ca, cb);
    }

    #[test]
    fn state_labels_round_trip() {
        for s in InitialState::ALL {
            assert_eq!(s.label().parse::<InitialState>().unwrap(), s);
        }
        assert!("up".parse::<InitialState>().is_err());
    }
}
