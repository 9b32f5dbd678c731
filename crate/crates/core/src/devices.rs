//! Non-adaptive devices: source, phase shifter, spin turners and rotators,
//! guiding-field precession, spin analyzers and detectors.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::message::{Message, UnitVector};
use crate::rng::RngStream;

/// Coherent source: every messenger starts with the same message.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub theta: f64,
    pub psi1: f64,
    pub psi2: f64,
}

impl SourceSpec {
    pub fn spin_up() -> Self {
        SourceSpec {
            theta: 0.0,
            psi1: 0.0,
            psi2: 0.0,
        }
    }

    pub fn emit(&self) -> Message {
        Message::new(self.theta, self.psi1, self.psi2)
    }
}

/// `e^{iχ} u`
pub fn phase_shift(msg: &Message, chi: f64) -> Message {
    msg.with_phase(chi)
}

/// Interferometer arm, named after the mu-metal turner placed in it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Beam {
    H,
    O,
}

/// Axis about which the mu-metal turns the moment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuMetalAxis {
    #[default]
    Y,
    X,
}

impl MuMetalAxis {
    pub fn unit(self) -> UnitVector {
        match self {
            MuMetalAxis::Y => UnitVector::Y,
            MuMetalAxis::X => UnitVector::X,
        }
    }
}

/// Mu-metal spin turner: `e^{±iπσ/4}` with `+` on the H arm and `−` on the O arm.
pub fn mu_metal(msg: &Message, beam: Beam, axis: MuMetalAxis) -> Message {
    let angle = match beam {
        Beam::H => FRAC_PI_2,
        Beam::O => -FRAC_PI_2,
    };
    msg.precess(&axis.unit(), angle)
}

/// Spin rotator `e^{iασ^x/2}`.
pub fn spin_rotate_x(msg: &Message, alpha: f64) -> Message {
    msg.precess(&UnitVector::X, alpha)
}

/// Spin flipper: a rotator with `α = π`.
pub fn spin_flip(msg: &Message) -> Message {
    spin_rotate_x(msg, PI)
}

/// Larmor precession in the guiding field along `+z`.
pub fn guide_precession(msg: &Message, angle: f64) -> Message {
    msg.precess(&UnitVector::Z, angle)
}

/// Heusler analyzer: passes with probability `(1 + m_z)/2`. A passing
/// neutron leaves spin up, keeping the phase of its spin-up component.
pub fn analyzer_pass(msg: &Message, rng: &mut RngStream) -> Option<Message> {
    let r = rng.next_uniform();
    let mz = msg.moment().mz;
    if r <= 0.5 * (1.0 + mz) {
        let c0 = msg.c0();
        let phase = if c0.norm() > 0.0 { c0 / c0.norm() } else { Complex64::new(1.0, 0.0) };
        Some(Message::from_raw(phase, Complex64::new(0.0, 0.0)))
    } else {
        None
    }
}

/// SU(2) rotation taking the eigen-message of `direction` to spin up:
/// `W u = (⟨e_d|u⟩, ⟨e_{−d}|u⟩)`.
#[derive(Clone, Copy, Debug)]
struct AlignToZ {
    a: Complex64,
    b: Complex64,
}

impl AlignToZ {
    fn new(direction: &UnitVector) -> Self {
        let e = Message::along(direction);
        AlignToZ { a: e.c0(), b: e.c1() }
    }

    // e_d = (a, b), e_{-d} = (-b*, a*), so W = [[a*, b*], [-b, a]].
    fn forward(&self, m: &Message) -> Message {
        Message::from_raw(
            self.a.conj() * m.c0() + self.b.conj() * m.c1(),
            -self.b * m.c0() + self.a * m.c1(),
        )
    }

    fn inverse(&self, m: &Message) -> Message {
        Message::from_raw(
            self.a * m.c0() - self.b.conj() * m.c1(),
            self.b * m.c0() + self.a.conj() * m.c1(),
        )
    }
}

/// Analyzer for the component along `direction` with outcome `sign`.
///
/// Rotates `direction` onto `+z`, flips for `sign = −1`, runs the Heusler
/// analyzer and undoes both rotations, so a passing neutron leaves in the
/// `sign·direction` eigenstate. The pass probability is `(1 + sign·m·d)/2`.
pub fn analyzer_along(
    msg: &Message,
    direction: &UnitVector,
    sign: i8,
    rng: &mut RngStream,
) -> Option<Message> {
    let align = AlignToZ::new(direction);
    let mut m = align.forward(msg);
    let flipped = sign < 0;
    if flipped {
        m = spin_flip(&m);
    }
    let passed = analyzer_pass(&m, rng)?;
    let mut out = passed;
    if flipped {
        out = spin_rotate_x(&out, -PI);
    }
    Some(align.inverse(&out))
}

/// Same as [`analyzer_along`] for an unvalidated direction.
pub fn analyzer_along_raw(
    msg: &Message,
    direction: [f64; 3],
    sign: i8,
    rng: &mut RngStream,
) -> Result<Option<Message>> {
    let d = UnitVector::new(direction[0], direction[1], direction[2])?;
    Ok(analyzer_along(msg, &d, sign, rng))
}

/// Ideal detector; counts every delivered neutron.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorCounter {
    pub count: u64,
}

impl DetectorCounter {
    pub fn detect(&mut self) {
        self.count += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::{random_message, MagneticMoment};
    use approx::assert_abs_diff_eq;

    fn assert_moment(m: MagneticMoment, expected: [f64; 3]) {
        assert_abs_diff_eq!(m.mx, expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(m.my, expected[1], epsilon = 1e-12);
        assert_abs_diff_eq!(m.mz, expected[2], epsilon = 1e-12);
    }

    fn three_sigma(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    fn pass_fraction(msg: &Message, direction: &UnitVector, sign: i8, n: usize, seed: u64) -> f64 {
        let mut rng = RngStream::new(seed, 0);
        let passed = (0..n)
            .filter(|_| analyzer_along(msg, direction, sign, &mut rng).is_some())
            .count();
        passed as f64 / n as f64
    }

    #[test]
    fn source_examples() {
        let up = SourceSpec::spin_up();
        assert!(up.emit().approx_eq(&Message::spin_up(), 1e-15));
        let eq = SourceSpec {
            theta: FRAC_PI_2,
            psi1: 0.0,
            psi2: 0.0,
        };
        let m = eq.emit();
        assert_abs_diff_eq!(m.c0().re, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.c1().re, 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(eq.emit(), eq.emit());
    }

    #[test]
    fn phase_shift_examples() {
        let m = Message::new(1.1, 0.3, -0.2);
        assert!(phase_shift(&m, 0.0).approx_eq(&m, 1e-15));
        let neg = Message::from_raw(-m.c0(), -m.c1());
        assert!(phase_shift(&m, PI).approx_eq(&neg, 1e-15));
        for chi in [0.4, 2.0, -5.0] {
            assert_moment(phase_shift(&m, chi).moment(), m.moment().components());
        }
    }

    #[test]
    fn mu_metal_turns_by_quarter_turns() {
        let up = Message::spin_up();
        assert_moment(mu_metal(&up, Beam::H, MuMetalAxis::Y).moment(), [-1.0, 0.0, 0.0]);
        assert_moment(mu_metal(&up, Beam::O, MuMetalAxis::Y).moment(), [1.0, 0.0, 0.0]);
        let back = mu_metal(&mu_metal(&up, Beam::H, MuMetalAxis::Y), Beam::O, MuMetalAxis::Y);
        assert_moment(back.moment(), [0.0, 0.0, 1.0]);
        assert_moment(mu_metal(&up, Beam::H, MuMetalAxis::X).moment(), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn spin_rotator_examples() {
        let up = Message::spin_up();
        assert!(spin_rotate_x(&up, 0.0).approx_eq(&up, 1e-15));
        assert_moment(spin_flip(&up).moment(), [0.0, 0.0, -1.0]);
        for alpha in [FRAC_PI_2, 0.3, 2.2] {
            assert_moment(spin_rotate_x(&up, alpha).moment(), [0.0, alpha.sin(), alpha.cos()]);
        }
        let m = Message::new(0.8, 0.1, 2.0);
        assert!(spin_rotate_x(&spin_rotate_x(&m, 1.3), -1.3).approx_eq(&m, 1e-9));
    }

    #[test]
    fn guide_precession_examples() {
        let m = Message::new(1.2, 0.4, -0.3);
        assert_moment(guide_precession(&m, 2.0 * PI).moment(), m.moment().components());
        let plus_x = Message::along(&UnitVector::X);
        // Under the crate convention +x precesses to −y after a quarter turn.
        assert_moment(guide_precession(&plus_x, FRAC_PI_2).moment(), [0.0, -1.0, 0.0]);
        assert_moment(guide_precession(&Message::spin_up(), 0.9).moment(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn heusler_analyzer_limits_and_rate() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            assert!(analyzer_pass(&Message::spin_up(), &mut rng).is_some());
            assert!(analyzer_pass(&Message::spin_down(), &mut rng).is_none());
        }
        let plus_x = Message::along(&UnitVector::X);
        let n = 100_000;
        let f = pass_fraction(&plus_x, &UnitVector::Z, 1, n, 4);
        assert!((f - 0.5).abs() < three_sigma(0.5, n), "pass fraction {f}");
    }

    #[test]
    fn heusler_keeps_spin_up_phase() {
        let m = Message::new(0.2, 0.7, 0.0);
        let mut rng = RngStream::new(1, 0);
        let out = loop {
            if let Some(out) = analyzer_pass(&m, &mut rng) {
                break out;
            }
        };
        assert_abs_diff_eq!(out.c0().arg(), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(out.c1().norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn analyzer_along_z_is_the_heusler_analyzer() {
        let m = Message::new(1.0, 0.3, 1.9);
        let mut a = RngStream::new(8, 0);
        let mut b = RngStream::new(8, 0);
        for _ in 0..2000 {
            let x = analyzer_along(&m, &UnitVector::Z, 1, &mut a);
            let y = analyzer_pass(&m, &mut b);
            assert_eq!(x.is_some(), y.is_some());
            if let (Some(x), Some(y)) = (x, y) {
                assert!(x.approx_eq(&y, 1e-12));
            }
        }
    }

    #[test]
    fn analyzer_along_aligned_and_perpendicular() {
        let d = UnitVector::normalized(0.3, -0.5, 0.8).unwrap();
        let aligned = Message::along(&d);
        let mut rng = RngStream::new(2, 0);
        for _ in 0..1000 {
            let out = analyzer_along(&aligned, &d, 1, &mut rng).expect("aligned always passes");
            assert_moment(out.moment(), d.components());
            assert!(analyzer_along(&aligned, &d, -1, &mut rng).is_none());
        }
        let n = 100_000;
        let phi = 0.77;
        let f = pass_fraction(&Message::spin_up(), &UnitVector::in_plane(phi), 1, n, 5);
        assert!((f - 0.5).abs() < three_sigma(0.5, n), "pass fraction {f}");
    }

    #[test]
    fn analyzer_exit_state_follows_sign() {
        let d = UnitVector::in_plane(0.4);
        let m = Message::spin_up();
        let mut rng = RngStream::new(6, 0);
        let mut seen = 0;
        while seen < 50 {
            if let Some(out) = analyzer_along(&m, &d, -1, &mut rng) {
                assert_moment(out.moment(), d.neg().components());
                assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-12);
                seen += 1;
            }
        }
    }

    #[test]
    fn analyzer_rate_matches_projection_for_random_configurations() {
        let mut setup = RngStream::new(99, 0);
        let n = 100_000;
        for k in 0..20 {
            let msg = random_message(&mut setup);
            let dir = random_message(&mut setup).moment();
            let dir = UnitVector::normalized(dir.mx, dir.my, dir.mz).unwrap();
            let sign = if k % 2 == 0 { 1 } else { -1 };
            let p = 0.5 * (1.0 + sign as f64 * msg.moment().dot(&dir));
            let f = pass_fraction(&msg, &dir, sign, n, 1000 + k);
            assert!((f - p).abs() <= three_sigma(p, n).max(1e-12), "config {k}: {f} vs {p}");
        }
    }

    #[test]
    fn analyzer_along_raw_rejects_non_unit_direction() {
        let mut rng = RngStream::new(1, 0);
        assert!(analyzer_along_raw(&Message::spin_up(), [0.0, 2.0, 0.0], 1, &mut rng).is_err());
    }

    #[test]
    fn detector_counts_deliveries() {
        let mut d = DetectorCounter::default();
        assert_eq!(d.count, 0);
        for _ in 0..17 {
            d.detect();
        }
        assert_eq!(d.count, 17);
    }
}
