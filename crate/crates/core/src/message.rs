//! The neutron messenger's message and the two rules that change it in flight.
//!
//! A message is a two-component complex unit vector
//! `u = (e^{iψ1} cos(θ/2), e^{iψ2} sin(θ/2))`. The polar angle θ and the phase
//! difference of the components encode the direction of the magnetic moment;
//! the common phase encodes the time of flight.
//!
//! Rotation convention: [`Message::precess`] applies
//! `cos(a/2)·I + i·sin(a/2)·(σ·n)`. On the magnetic moment this acts as the
//! right-handed rotation about `n` by `-a`. For example a precession of `π/2`
//! about `x` takes `+z` to `+y`. Every device in the crate uses this one rule.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating user-supplied axes and directions.
pub const AXIS_TOLERANCE: f64 = 1e-9;

/// A validated unit 3-vector (rotation axis or analyzer direction).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitVector {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector {
    pub const X: UnitVector = UnitVector { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector = UnitVector { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector = UnitVector { x: 0.0, y: 0.0, z: 1.0 };

    /// Rejects vectors whose norm differs from one by more than [`AXIS_TOLERANCE`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > AXIS_TOLERANCE {
            return Err(Error::NonUnitAxis { norm });
        }
        Ok(UnitVector { x, y, z })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NonUnitAxis { norm });
        }
        Ok(UnitVector {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Unit vector in the xy plane at azimuth `phi`: `(cos φ, sin φ, 0)`.
    pub fn in_plane(phi: f64) -> Self {
        UnitVector {
            x: phi.cos(),
            y: phi.sin(),
            z: 0.0,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn neg(&self) -> Self {
        UnitVector {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

/// Direction of the magnetic moment, `m = u†σu`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagneticMoment {
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

impl MagneticMoment {
    pub fn dot(&self, direction: &UnitVector) -> f64 {
        self.mx * direction.x + self.my * direction.y + self.mz * direction.z
    }

    pub fn norm(&self) -> f64 {
        (self.mx * self.mx + self.my * self.my + self.mz * self.mz).sqrt()
    }

    pub fn components(&self) -> [f64; 3] {
        [self.mx, self.my, self.mz]
    }
}

/// Phase accumulated during free flight, `phi = nu * dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlightPhase {
    /// Angular frequency characteristic of the neutron velocity.
    pub nu: f64,
    /// Time of flight.
    pub dt: f64,
}

impl FlightPhase {
    pub fn new(nu: f64, dt: f64) -> Self {
        FlightPhase { nu, dt }
    }

    /// A flight whose phase is `phi` (unit frequency).
    pub fn from_phase(phi: f64) -> Self {
        FlightPhase { nu: 1.0, dt: phi }
    }

    pub fn phi(&self) -> f64 {
        self.nu * self.dt
    }
}

/// The two-component complex unit vector carried by a messenger.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Message {
    c0: Complex64,
    c1: Complex64,
}

impl fmt::Debug for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Message({}, {})", self.c0, self.c1)
    }
}

impl Message {
    /// `(e^{iψ1} cos(θ/2), e^{iψ2} sin(θ/2))`.
    pub fn new(theta: f64, psi1: f64, psi2: f64) -> Self {
        let half = 0.5 * theta;
        Message {
            c0: Complex64::from_polar(half.cos(), psi1),
            c1: Complex64::from_polar(half.sin(), psi2),
        }
    }

    pub fn spin_up() -> Self {
        Message {
            c0: Complex64::new(1.0, 0.0),
            c1: Complex64::new(0.0, 0.0),
        }
    }

    pub fn spin_down() -> Self {
        Message {
            c0: Complex64::new(0.0, 0.0),
            c1: Complex64::new(1.0, 0.0),
        }
    }

    /// The message whose moment points along `direction`, with zero phase on
    /// the first component.
    pub fn along(direction: &UnitVector) -> Self {
        let theta = direction.z.clamp(-1.0, 1.0).acos();
        let delta = direction.y.atan2(direction.x);
        let half = 0.5 * theta;
        Message {
            c0: Complex64::new(half.cos(), 0.0),
            c1: Complex64::from_polar(half.sin(), delta),
        }
    }

    /// Normalizes `(c0, c1)`; `None` when the pair has zero (or non-finite) norm.
    pub fn normalized(c0: Complex64, c1: Complex64) -> Option<Self> {
        let n2 = c0.norm_sqr() + c1.norm_sqr();
        if !(n2.is_finite() && n2 > 0.0) {
            return None;
        }
        let inv = n2.sqrt().recip();
        Some(Message {
            c0: c0 * inv,
            c1: c1 * inv,
        })
    }

    /// Builds a message from raw components without normalizing. Used for
    /// register contents in tests and state snapshots.
    pub fn from_raw(c0: Complex64, c1: Complex64) -> Self {
        Message { c0, c1 }
    }

    pub fn c0(&self) -> Complex64 {
        self.c0
    }

    pub fn c1(&self) -> Complex64 {
        self.c1
    }

    pub fn components(&self) -> [Complex64; 2] {
        [self.c0, self.c1]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c0.norm_sqr() + self.c1.norm_sqr()
    }

    /// `e^{iφ}·u`, the free-flight rule.
    pub fn free_flight(&self, phase: FlightPhase) -> Self {
        self.with_phase(phase.phi())
    }

    /// Multiplies both components by `e^{iφ}`.
    pub fn with_phase(&self, phi: f64) -> Self {
        let w = Complex64::from_polar(1.0, phi);
        Message {
            c0: w * self.c0,
            c1: w * self.c1,
        }
    }

    /// `(cos(a/2) I + i sin(a/2) σ·n) u`, the magnetic-field rule with the
    /// field strength and duration folded into one precession angle.
    pub fn precess(&self, axis: &UnitVector, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        let i = Complex64::i();
        // σ·n = [[nz, nx - i ny], [nx + i ny, -nz]]
        let a00 = Complex64::new(c, s * axis.z);
        let a01 = i * s * Complex64::new(axis.x, -axis.y);
        let a10 = i * s * Complex64::new(axis.x, axis.y);
        let a11 = Complex64::new(c, -s * axis.z);
        Message {
            c0: a00 * self.c0 + a01 * self.c1,
            c1: a10 * self.c0 + a11 * self.c1,
        }
    }

    /// `m = u†σu`.
    pub fn moment(&self) -> MagneticMoment {
        let cross = self.c0.conj() * self.c1;
        MagneticMoment {
            mx: 2.0 * cross.re,
            my: 2.0 * cross.im,
            mz: self.c0.norm_sqr() - self.c1.norm_sqr(),
        }
    }

    /// Inner product `⟨self|other⟩`.
    pub fn inner(&self, other: &Message) -> Complex64 {
        self.c0.conj() * other.c0 + self.c1.conj() * other.c1
    }

    /// Equal up to `tol` in every real and imaginary part.
    pub fn approx_eq(&self, other: &Message, tol: f64) -> bool {
        (self.c0 - other.c0).norm() <= tol && (self.c1 - other.c1).norm() <= tol
    }
}

/// Free-function form of [`Message::new`].
pub fn make_message(theta: f64, psi1: f64, psi2: f64) -> Message {
    Message::new(theta, psi1, psi2)
}

/// Precession about an unvalidated axis; rejects axes that are not unit length.
pub fn field_precession(msg: &Message, axis: [f64; 3], angle: f64) -> Result<Message> {
    let axis = UnitVector::new(axis[0], axis[1], axis[2])?;
    Ok(msg.precess(&axis, angle))
}

/// Random message with θ uniform in (0, π) and both phases uniform in (0, 2π).
pub fn random_message(rng: &mut crate::rng::RngStream) -> Message {
    let theta = PI * rng.next_uniform();
    let psi1 = 2.0 * PI * rng.next_uniform();
    let psi2 = 2.0 * PI * rng.next_uniform();
    Message::new(theta, psi1, psi2)
}
