//! Adaptive beam splitter built on a deterministic learning machine (DLM).
//!
//! The device keeps the last message seen on each input port and a convex
//! internal vector `v = (v0, v1)` that estimates how often each port fires.
//! Every arrival updates `v ← γ v + (1 − γ) q`, mixes the two registers into
//! four amplitudes, and sends one renormalized output message through one
//! output port chosen at random with the Born-like weight of each pair.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::message::{random_message, Message};
use crate::rng::RngStream;

/// Input or output port of a two-port device.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    Zero,
    One,
}

impl Port {
    pub fn index(self) -> usize {
        match self {
            Port::Zero => 0,
            Port::One => 1,
        }
    }
}

/// Output port for the pair `(h0, h2)`: transmission of port 0 and reflection
/// of port 1.
pub const UPPER_PAIR_EXIT: Port = Port::One;
/// Output port for the pair `(h1, h3)`: reflection of port 0 and transmission
/// of port 1.
pub const LOWER_PAIR_EXIT: Port = Port::Zero;

/// Output port on which a message entering `input` leaves after transmission.
pub fn transmitted_exit(input: Port) -> Port {
    match input {
        Port::Zero => UPPER_PAIR_EXIT,
        Port::One => LOWER_PAIR_EXIT,
    }
}

/// Output port on which a message entering `input` leaves after reflection.
pub fn reflected_exit(input: Port) -> Port {
    match input {
        Port::Zero => LOWER_PAIR_EXIT,
        Port::One => UPPER_PAIR_EXIT,
    }
}

/// The four complex numbers computed from the registers and internal vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeQuad {
    pub h: [Complex64; 4],
}

impl AmplitudeQuad {
    pub fn new(h0: Complex64, h1: Complex64, h2: Complex64, h3: Complex64) -> Self {
        AmplitudeQuad {
            h: [h0, h1, h2, h3],
        }
    }

    /// `|h0|² + |h2|²`
    pub fn upper_weight(&self) -> f64 {
        self.h[0].norm_sqr() + self.h[2].norm_sqr()
    }

    /// `|h1|² + |h3|²`
    pub fn lower_weight(&self) -> f64 {
        self.h[1].norm_sqr() + self.h[3].norm_sqr()
    }

    pub fn total_weight(&self) -> f64 {
        self.upper_weight() + self.lower_weight()
    }
}

/// A message leaving a device through `channel`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoutedMessage {
    pub channel: Port,
    pub message: Message,
}

/// Serializable copy of the ten state numbers plus the fixed parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterSnapshot {
    pub v: [f64; 2],
    pub registers: [[f64; 4]; 2],
    pub gamma: f64,
    pub reflectivity: f64,
}

/// Counters for the fallback paths taken when the selected amplitude pair
/// cannot be normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingDiagnostics {
    /// Selected pair was zero; the other pair was emitted instead.
    pub swapped: u64,
    /// Both pairs were zero; the raw register of the last input was emitted.
    pub raw_register: u64,
}

#[derive(Clone, Debug)]
pub struct BeamSplitter {
    v0: f64,
    registers: [Message; 2],
    gamma: f64,
    reflectivity: f64,
    sqrt_r: f64,
    sqrt_t: f64,
    last_input: Port,
    diagnostics: RoutingDiagnostics,
}

fn validate(gamma: f64, reflectivity: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    if !(0.0..=1.0).contains(&reflectivity) {
        return Err(Error::ReflectivityOutOfRange(reflectivity));
    }
    Ok(())
}

impl BeamSplitter {
    /// Fresh device: `v = (r, 1 − r)` and random unit registers, all drawn
    /// from `rng`.
    pub fn new(gamma: f64, reflectivity: f64, rng: &mut RngStream) -> Result<Self> {
        validate(gamma, reflectivity)?;
        let v0 = rng.next_uniform();
        let reg0 = random_message(rng);
        let reg1 = random_message(rng);
        Ok(Self::build(gamma, reflectivity, v0, [reg0, reg1]))
    }

    /// Device with an explicit state. `v0` is clamped into `[0, 1]`.
    pub fn with_state(
        gamma: f64,
        reflectivity: f64,
        v0: f64,
        registers: [Message; 2],
    ) -> Result<Self> {
        validate(gamma, reflectivity)?;
        Ok(Self::build(gamma, reflectivity, v0.clamp(0.0, 1.0), registers))
    }

    fn build(gamma: f64, reflectivity: f64, v0: f64, registers: [Message; 2]) -> Self {
        BeamSplitter {
            v0,
            registers,
            gamma,
            reflectivity,
            sqrt_r: reflectivity.sqrt(),
            sqrt_t: (1.0 - reflectivity).sqrt(),
            last_input: Port::Zero,
            diagnostics: RoutingDiagnostics::default(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn transmissivity(&self) -> f64 {
        1.0 - self.reflectivity
    }

    /// Internal vector `(v0, v1)`; `v1` is recovered from the constraint.
    pub fn v(&self) -> (f64, f64) {
        (self.v0, 1.0 - self.v0)
    }

    pub fn register(&self, port: Port) -> &Message {
        &self.registers[port.index()]
    }

    pub fn diagnostics(&self) -> RoutingDiagnostics {
        self.diagnostics
    }

    /// Stores `msg` in the register of `port` and moves `v` towards the basis
    /// vector of that port.
    pub fn update_internal(&mut self, port: Port, msg: Message) {
        self.registers[port.index()] = msg;
        self.last_input = port;
        let q0 = match port {
            Port::Zero => 1.0,
            Port::One => 0.0,
        };
        self.v0 = (self.gamma * self.v0 + (1.0 - self.gamma) * q0).clamp(0.0, 1.0);
    }

    /// The four amplitudes: the 4×4 splitting block applied to the registers
    /// weighted by `√v`.
    pub fn amplitudes(&self) -> AmplitudeQuad {
        let (v0, v1) = self.v();
        let w0 = v0.sqrt();
        let w1 = v1.sqrt();
        let t = Complex64::new(self.sqrt_t, 0.0);
        let ir = Complex64::new(0.0, self.sqrt_r);
        let r0 = &self.registers[0];
        let r1 = &self.registers[1];
        // Component 0 of both registers feeds (h0, h1); component 1 feeds (h2, h3).
        let a = r0.c0() * w0;
        let b = r1.c0() * w1;
        let c = r0.c1() * w0;
        let d = r1.c1() * w1;
        AmplitudeQuad::new(t * a + ir * b, ir * a + t * b, t * c + ir * d, ir * c + t * d)
    }

    /// Draws `r` and emits `(h0, h2)` on [`UPPER_PAIR_EXIT`] when
    /// `|h0|² + |h2|² > r`, otherwise `(h1, h3)` on [`LOWER_PAIR_EXIT`].
    pub fn route(&mut self, quad: &AmplitudeQuad, rng: &mut RngStream) -> RoutedMessage {
        let r = rng.next_uniform();
        let upper = (quad.h[0], quad.h[2]);
        let lower = (quad.h[1], quad.h[3]);
        let (first, first_exit, second, second_exit) = if quad.upper_weight() > r {
            (upper, UPPER_PAIR_EXIT, lower, LOWER_PAIR_EXIT)
        } else {
            (lower, LOWER_PAIR_EXIT, upper, UPPER_PAIR_EXIT)
        };
        if let Some(message) = Message::normalized(first.0, first.1) {
            return RoutedMessage {
                channel: first_exit,
                message,
            };
        }
        if let Some(message) = Message::normalized(second.0, second.1) {
            self.diagnostics.swapped += 1;
            return RoutedMessage {
                channel: second_exit,
                message,
            };
        }
        self.diagnostics.raw_register += 1;
        let raw = self.registers[self.last_input.index()];
        let message = Message::normalized(raw.c0(), raw.c1()).unwrap_or_else(Message::spin_up);
        RoutedMessage {
            channel: first_exit,
            message,
        }
    }

    /// Full event: store and learn, compute amplitudes, route.
    pub fn process(&mut self, port: Port, msg: Message, rng: &mut RngStream) -> RoutedMessage {
        self.update_internal(port, msg);
        let quad = self.amplitudes();
        self.route(&quad, rng)
    }

    pub fn snapshot(&self) -> BeamSplitterSnapshot {
        let (v0, v1) = self.v();
        let flat = |m: &Message| [m.c0().re, m.c0().im, m.c1().re, m.c1().im];
        BeamSplitterSnapshot {
            v: [v0, v1],
            registers: [flat(&self.registers[0]), flat(&self.registers[1])],
            gamma: self.gamma,
            reflectivity: self.reflectivity,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn up() -> Message {
        Message::spin_up()
    }

    fn splitter(gamma: f64, refl: f64, v0: f64) -> BeamSplitter {
        BeamSplitter::with_state(gamma, refl, v0, [up(), up()]).unwrap()
    }

    fn three_sigma(p: f64, n: usize) -> f64 {
        3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn init_validates_parameters() {
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            BeamSplitter::new(1.0, 0.2, &mut rng),
            Err(Error::GammaOutOfRange(_))
        ));
        assert!(matches!(
            BeamSplitter::new(0.0, 0.2, &mut rng),
            Err(Error::GammaOutOfRange(_))
        ));
        assert!(matches!(
            BeamSplitter::new(0.5, 1.1, &mut rng),
            Err(Error::ReflectivityOutOfRange(_))
        ));
        assert!(matches!(
            BeamSplitter::new(0.5, -0.1, &mut rng),
            Err(Error::ReflectivityOutOfRange(_))
        ));
    }

    #[test]
    fn init_is_deterministic_and_valid() {
        let a = BeamSplitter::new(0.9, 0.3, &mut RngStream::new(3, 1)).unwrap();
        let b = BeamSplitter::new(0.9, 0.3, &mut RngStream::new(3, 1)).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
        let (v0, v1) = a.v();
        assert!(v0 >= 0.0 && v1 >= 0.0);
        assert_abs_diff_eq!(v0 + v1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.register(Port::Zero).norm_sqr(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.register(Port::One).norm_sqr(), 1.0, epsilon = 1e-12);
        let snap = a.snapshot();
        let numbers = snap.v.len() + snap.registers.iter().map(|r| r.len()).sum::<usize>();
        assert_eq!(numbers, 10);
    }

    #[test]
    fn update_internal_examples() {
        let mut bs = splitter(0.9, 0.5, 0.5);
        bs.update_internal(Port::Zero, up());
        let (v0, v1) = bs.v();
        assert_abs_diff_eq!(v0, 0.55, epsilon = 1e-15);
        assert_abs_diff_eq!(v1, 0.45, epsilon = 1e-15);

        let mut bs = splitter(0.5, 0.5, 0.3);
        bs.update_internal(Port::One, up());
        let (v0, v1) = bs.v();
        assert_abs_diff_eq!(v0, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(v1, 0.85, epsilon = 1e-15);
    }

    #[test]
    fn geometric_learning_rate_is_gamma() {
        let gamma: f64 = 0.8;
        let start = 0.1;
        let mut bs = splitter(gamma, 0.5, start);
        for k in 1..=40 {
            bs.update_internal(Port::Zero, up());
            let expected = gamma.powi(k) * (1.0 - start);
            assert_abs_diff_eq!(1.0 - bs.v().0, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn amplitude_examples() {
        let bs = BeamSplitter::with_state(
            0.5,
            0.5,
            0.5,
            [up(), Message::from_raw(c(0.0, 0.0), c(0.0, 0.0))],
        )
        .unwrap();
        let q = bs.amplitudes();
        let want = [c(0.5, 0.0), c(0.0, 0.5), c(0.0, 0.0), c(0.0, 0.0)];
        for k in 0..4 {
            assert_abs_diff_eq!((q.h[k] - want[k]).norm(), 0.0, epsilon = 1e-15);
        }

        let refl = 0.3;
        let q = splitter(0.5, refl, 1.0).amplitudes();
        assert_abs_diff_eq!((q.h[0] - c((1.0 - refl).sqrt(), 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((q.h[1] - c(0.0, refl.sqrt())).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.h[2].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q.h[3].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_reflectivity_is_pure_transmission() {
        let r0 = Message::new(0.7, 0.1, 1.3);
        let r1 = Message::new(2.1, -0.4, 0.9);
        let bs = BeamSplitter::with_state(0.5, 0.0, 0.36, [r0, r1]).unwrap();
        let q = bs.amplitudes();
        assert_abs_diff_eq!((q.h[0] - r0.c0() * 0.6).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((q.h[1] - r1.c0() * 0.8).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((q.h[2] - r0.c1() * 0.6).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((q.h[3] - r1.c1() * 0.8).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn last_component_uses_second_port_weight() {
        // h3 = i√v0√R R10 + √v1√T R11: with R10 = 0 only the √v1 term survives.
        let bs = BeamSplitter::with_state(0.5, 0.2, 0.9, [up(), Message::spin_down()]).unwrap();
        let q = bs.amplitudes();
        let expected = (0.1f64).sqrt() * (0.8f64).sqrt();
        assert_abs_diff_eq!((q.h[3] - c(expected, 0.0)).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn route_thresholds() {
        let mut bs = splitter(0.5, 0.5, 0.5);
        let mut rng = RngStream::new(9, 0);
        let one = AmplitudeQuad::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let zero = AmplitudeQuad::new(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        for _ in 0..1000 {
            let out = bs.route(&one, &mut rng);
            assert_eq!(out.channel, Port::One);
            assert!(out.message.approx_eq(&up(), 1e-15));
            let out = bs.route(&zero, &mut rng);
            assert_eq!(out.channel, Port::Zero);
            assert!(out.message.approx_eq(&up(), 1e-15));
        }
        assert_eq!(bs.diagnostics(), RoutingDiagnostics::default());
    }

    #[test]
    fn route_frequency_matches_weight() {
        let mut bs = splitter(0.5, 0.5, 0.5);
        let mut rng = RngStream::new(10, 0);
        // |h0|² + |h2|² = 0.36
        let quad = AmplitudeQuad::new(c(0.0, 0.6), c(0.8, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| bs.route(&quad, &mut rng).channel == Port::One)
            .count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.36).abs() < three_sigma(0.36, n), "freq {freq}");
    }

    #[test]
    fn degenerate_pairs_are_total() {
        let mut rng = RngStream::new(1, 1);
        let mut bs = splitter(0.5, 0.5, 0.5);
        // Lower pair is zero and almost always selected; the upper pair is emitted instead.
        let quad = AmplitudeQuad::new(c(1e-6, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let out = bs.route(&quad, &mut rng);
        assert_eq!(out.channel, Port::One);
        assert!(out.message.approx_eq(&up(), 1e-15));
        assert_eq!(bs.diagnostics().swapped, 1);
        // Both pairs zero: the raw register of the last input is emitted.
        let zero = AmplitudeQuad::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let out = bs.route(&zero, &mut rng);
        assert!(out.message.approx_eq(&up(), 1e-15));
        assert_eq!(bs.diagnostics().raw_register, 1);
    }

    #[test]
    fn stationary_input_reproduces_splitting_ratios() {
        let refl = 0.2;
        let n = 100_000;
        let mut rng = RngStream::new(4, 2);
        let mut bs = BeamSplitter::new(0.99, refl, &mut rng).unwrap();
        let msg = Message::new(0.4, 0.2, -0.7);
        let mut reflected = 0usize;
        for _ in 0..n {
            if bs.process(Port::Zero, msg, &mut rng).channel == reflected_exit(Port::Zero) {
                reflected += 1;
            }
        }
        let freq = reflected as f64 / n as f64;
        assert!((freq - refl).abs() < three_sigma(refl, n), "reflected fraction {freq}");
    }

    #[test]
    fn full_reflectivity_reflects_after_transient() {
        let mut rng = RngStream::new(4, 3);
        let mut bs = BeamSplitter::new(0.99, 1.0, &mut rng).unwrap();
        let msg = Message::spin_up();
        for _ in 0..5_000 {
            bs.process(Port::Zero, msg, &mut rng);
        }
        let n = 10_000;
        let reflected = (0..n)
            .filter(|_| bs.process(Port::Zero, msg, &mut rng).channel == reflected_exit(Port::Zero))
            .count();
        assert_eq!(reflected, n);
    }

    #[test]
    fn replay_gives_identical_routing() {
        let run = || {
            let mut rng = RngStream::new(77, 5);
            let mut bs = BeamSplitter::new(0.9, 0.3, &mut rng).unwrap();
            (0..2000)
                .map(|k| {
                    let port = if k % 3 == 0 { Port::One } else { Port::Zero };
                    let out = bs.process(port, Message::new(k as f64, 0.1, 0.2), &mut rng);
                    (out.channel, out.message.c0().re.to_bits(), out.message.c1().im.to_bits())
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn constraints_hold_after_random_events(
            seed in any::<u64>(),
            gamma in 0.01f64..0.999,
            refl in 0.0f64..=1.0,
            ports in prop::collection::vec(any::<bool>(), 1..400),
        ) {
            let mut rng = RngStream::new(seed, 0);
            let mut bs = BeamSplitter::new(gamma, refl, &mut rng).unwrap();
            for p in ports {
                let port = if p { Port::One } else { Port::Zero };
                let msg = random_message(&mut rng);
                bs.update_internal(port, msg);
                let quad = bs.amplitudes();
                prop_assert!(quad.total_weight() <= 1.0 + 1e-9);
                let out = bs.route(&quad, &mut rng);
                let (v0, v1) = bs.v();
                prop_assert!(v0 >= 0.0 && v1 >= 0.0);
                prop_assert!((v0 + v1 - 1.0).abs() <= 1e-12);
                prop_assert!((out.message.norm_sqr() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
