use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::interferometer::traverse;
use super::{validate_gamma_reflectivity, Conserved, Exit, SerialSource, SplitterBank};
use crate::beam_splitter::RoutingDiagnostics;
use crate::devices::{
    analyzer_pass, mu_metal, spin_flip, spin_rotate_x, DetectorCounter, MuMetalAxis, SourceSpec,
};
use crate::error::Result;
use crate::rng::RngStream;
use crate::stats::correlation_e;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellConfig {
    pub gamma: f64,
    pub reflectivity: f64,
    /// Spin-rotator angle about x.
    pub alpha: f64,
    /// Phase difference `χ0 − χ1` (applied as `χ0 = χ`, `χ1 = 0`).
    pub chi: f64,
    #[serde(default)]
    pub mu_metal_axis: MuMetalAxis,
    pub n_particles: u64,
    #[serde(default)]
    pub warmup: u64,
    pub seed: u64,
    pub stream: u64,
}

impl BellConfig {
    pub fn new(gamma: f64, reflectivity: f64, alpha: f64, chi: f64, n_particles: u64, seed: u64) -> Self {
        BellConfig {
            gamma,
            reflectivity,
            alpha,
            chi,
            mu_metal_axis: MuMetalAxis::Y,
            n_particles,
            warmup: 0,
            seed,
            stream: 0,
        }
    }
}

/// One of the four sub-runs entering the correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BellSetting {
    /// `(α, χ)`
    Base,
    /// `(α + π, χ + π)`
    BothShifted,
    /// `(α + π, χ)`
    SpinShifted,
    /// `(α, χ + π)`
    PhaseShifted,
}

impl BellSetting {
    pub const ALL: [BellSetting; 4] = [
        BellSetting::Base,
        BellSetting::BothShifted,
        BellSetting::SpinShifted,
        BellSetting::PhaseShifted,
    ];

    pub fn index(self) -> u64 {
        match self {
            BellSetting::Base => 0,
            BellSetting::BothShifted => 1,
            BellSetting::SpinShifted => 2,
            BellSetting::PhaseShifted => 3,
        }
    }

    /// The extra π goes through a spin flipper in front of the rotator.
    pub fn flips_spin(self) -> bool {
        matches!(self, BellSetting::BothShifted | BellSetting::SpinShifted)
    }

    pub fn chi_offset(self) -> f64 {
        match self {
            BellSetting::BothShifted | BellSetting::PhaseShifted => PI,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellCounts {
    pub emitted: u64,
    /// Passed the analyzer on the O beam and counted by `D_O`.
    pub o_detected: u64,
    /// Stopped by the analyzer on the O beam.
    pub o_absorbed: u64,
    /// Counted by `D_H`.
    pub h_beam: u64,
    /// Transmitted by BS1 or BS2.
    pub lost: u64,
    pub diagnostics: RoutingDiagnostics,
}

impl Conserved for BellCounts {
    fn emitted(&self) -> u64 {
        self.emitted
    }

    fn accounted(&self) -> u64 {
        self.o_detected + self.o_absorbed + self.h_beam + self.lost
    }
}

/// Counts for the four settings of one `(α, χ)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellRun {
    pub counts: [BellCounts; 4],
}

impl BellRun {
    pub fn counts(&self, setting: BellSetting) -> &BellCounts {
        &self.counts[setting.index() as usize]
    }

    /// `N(α,χ), N(α+π,χ+π), N(α+π,χ), N(α,χ+π)` on `D_O`.
    pub fn n(&self) -> [u64; 4] {
        [
            self.counts[0].o_detected,
            self.counts[1].o_detected,
            self.counts[2].o_detected,
            self.counts[3].o_detected,
        ]
    }

    pub fn correlation(&self) -> Result<f64> {
        let [n1, n2, n3, n4] = self.n();
        correlation_e(n1, n2, n3, n4)
    }

    pub fn is_conserved(&self) -> bool {
        self.counts.iter().all(Conserved::is_conserved)
    }
}

fn run_setting(cfg: &BellConfig, setting: BellSetting, rng: &mut RngStream) -> Result<BellCounts> {
    let mut bank = SplitterBank::new(cfg.gamma, cfg.reflectivity, rng)?;
    let mut source = SerialSource::new(SourceSpec::spin_up());
    let mut d_o = DetectorCounter::default();
    let mut d_h = DetectorCounter::default();
    let mut absorbed = 0u64;
    let mut lost = 0u64;
    let chi0 = cfg.chi + setting.chi_offset();
    let axis = cfg.mu_metal_axis;
    let turn = |m: &crate::message::Message, beam| mu_metal(m, beam, axis);

    for _ in 0..cfg.warmup {
        let msg = source.emit();
        traverse(&mut bank, msg, chi0, 0.0, turn, rng);
        source.retire();
    }
    let warm = source.emitted();
    for _ in 0..cfg.n_particles {
        let msg = source.emit();
        match traverse(&mut bank, msg, chi0, 0.0, turn, rng) {
            Exit::O(m) => {
                let m = if setting.flips_spin() { spin_flip(&m) } else { m };
                let m = spin_rotate_x(&m, cfg.alpha);
                match analyzer_pass(&m, rng) {
                    Some(_) => d_o.detect(),
                    None => absorbed += 1,
                }
            }
            Exit::H(_) => d_h.detect(),
            Exit::Lost => lost += 1,
        }
        source.retire();
    }

    Ok(BellCounts {
        emitted: source.emitted() - warm,
        o_detected: d_o.count,
        o_absorbed: absorbed,
        h_beam: d_h.count,
        lost,
        diagnostics: bank.diagnostics(),
    })
}

/// Runs the four settings of one `(α, χ)` cell, each on fresh devices and
/// its own child stream `fork(setting index)` of `(seed, stream)`.
pub fn run_bell(cfg: &BellConfig) -> Result<BellRun> {
    validate_gamma_reflectivity(cfg.gamma, cfg.reflectivity)?;
    let base = RngStream::new(cfg.seed, cfg.stream);
    let mut counts = [BellCounts::default(); 4];
    for setting in BellSetting::ALL {
        let mut rng = base.fork(setting.index());
        counts[setting.index() as usize] = run_setting(cfg, setting, &mut rng)?;
    }
    Ok(BellRun { counts })
}
