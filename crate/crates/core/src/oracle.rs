//! Quantum-theory predictions used as ground truth for the event simulation.
//!
//! Nothing here draws random numbers or touches the event-based devices.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::devices::MuMetalAxis;

type C = Complex64;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// 2×2 complex matrix acting on `(channel 0, channel 1)` amplitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferMatrix(pub Matrix2<C>);

impl TransferMatrix {
    /// `[[√T, i√R], [i√R, √T]]`: output 0 is the straight-through beam of
    /// input 0, output 1 its reflection.
    pub fn beam_splitter(reflectivity: f64) -> Self {
        let t = c((1.0 - reflectivity).sqrt());
        let r = C::new(0.0, reflectivity.sqrt());
        TransferMatrix(Matrix2::new(t, r, r, t))
    }

    /// `diag(e^{iχ0}, e^{iχ1})`.
    pub fn phase(chi0: f64, chi1: f64) -> Self {
        TransferMatrix(Matrix2::new(C::cis(chi0), c(0.0), c(0.0), C::cis(chi1)))
    }

    pub fn apply(&self, amp: Vector2<C>) -> Vector2<C> {
        self.0 * amp
    }

    pub fn then(&self, next: &TransferMatrix) -> TransferMatrix {
        TransferMatrix(next.0 * self.0)
    }

    /// Largest deviation of `M†M` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        (self.0.adjoint() * self.0 - Matrix2::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }
}

/// Exit probabilities of the four-splitter interferometer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziProbabilities {
    pub o: f64,
    pub h: f64,
    pub loss: f64,
}

/// Amplitudes entering BS3 on channels 0 and 1 and the two loss
/// amplitudes, for a neutron entering BS0 on channel 0. Follows the same
/// wiring as the event network.
fn mzi_arms(reflectivity: f64, chi0: f64, chi1: f64) -> (Vector2<C>, [C; 2]) {
    let bs = TransferMatrix::beam_splitter(reflectivity);
    let zero = c(0.0);
    let after0 = bs.apply(Vector2::new(c(1.0), zero));
    // Reflection feeds arm A (BS1), the straight beam arm B (BS2).
    let arm_a = bs.apply(Vector2::new(after0[1], zero));
    let arm_b = bs.apply(Vector2::new(after0[0], zero));
    let into3 = TransferMatrix::phase(chi0, chi1).apply(Vector2::new(arm_a[1], arm_b[1]));
    (into3, [arm_a[0], arm_b[0]])
}

/// Contributions of arms A and B to the O-beam amplitude.
pub fn o_beam_arm_amplitudes(reflectivity: f64, chi0: f64, chi1: f64) -> [C; 2] {
    let (into3, _) = mzi_arms(reflectivity, chi0, chi1);
    let bs = TransferMatrix::beam_splitter(reflectivity);
    let zero = c(0.0);
    [
        bs.apply(Vector2::new(into3[0], zero))[0],
        bs.apply(Vector2::new(zero, into3[1]))[0],
    ]
}

/// Amplitudes `(a_O, a_H, a_loss1, a_loss2)`.
pub fn mzi_amplitudes(reflectivity: f64, chi0: f64, chi1: f64) -> [C; 4] {
    let (into3, loss) = mzi_arms(reflectivity, chi0, chi1);
    let out3 = TransferMatrix::beam_splitter(reflectivity).apply(into3);
    [out3[0], out3[1], loss[0], loss[1]]
}

pub fn mzi_probabilities_split(reflectivity: f64, chi0: f64, chi1: f64) -> MziProbabilities {
    let [o, h, l1, l2] = mzi_amplitudes(reflectivity, chi0, chi1);
    MziProbabilities {
        o: o.norm_sqr(),
        h: h.norm_sqr(),
        loss: l1.norm_sqr() + l2.norm_sqr(),
    }
}

/// Exit probabilities at phase difference `χ = χ0 − χ1`.
pub fn mzi_probabilities(reflectivity: f64, chi: f64) -> MziProbabilities {
    mzi_probabilities_split(reflectivity, chi, 0.0)
}

/// `2R²T(1 + cos χ)`, `R(R² + T² − 2RT cos χ)`, `T`.
pub fn mzi_closed_form(reflectivity: f64, chi: f64) -> MziProbabilities {
    let r = reflectivity;
    let t = 1.0 - r;
    MziProbabilities {
        o: 2.0 * r * r * t * (1.0 + chi.cos()),
        h: r * (r * r + t * t - 2.0 * r * t * chi.cos()),
        loss: t,
    }
}

/// Fringe visibilities of the O and H beams: `1` and `2RT/(R² + T²)`.
pub fn mzi_visibilities(reflectivity: f64) -> (f64, f64) {
    let r = reflectivity;
    let t = 1.0 - r;
    (1.0, 2.0 * r * t / (r * r + t * t))
}

/// Spin-path correlation on the O beam.
pub fn bell_e_ideal(alpha: f64, chi: f64, axis: MuMetalAxis) -> f64 {
    match axis {
        MuMetalAxis::Y => (alpha + chi).cos(),
        MuMetalAxis::X => alpha.cos() * chi.cos(),
    }
}

fn pauli() -> [Matrix2<C>; 3] {
    let i = C::i();
    let (o, l) = (c(0.0), c(1.0));
    [
        Matrix2::new(o, l, l, o),
        Matrix2::new(o, -i, i, o),
        Matrix2::new(l, o, o, -l),
    ]
}

/// `cos(a/2) I + i sin(a/2) σ·n`.
fn rotation(n: [f64; 3], a: f64) -> Matrix2<C> {
    let [sx, sy, sz] = pauli();
    let sn = sx * c(n[0]) + sy * c(n[1]) + sz * c(n[2]);
    Matrix2::identity() * c((0.5 * a).cos()) + sn * C::new(0.0, (0.5 * a).sin())
}

/// `E` from the spin state of the O beam, built by composing path
/// amplitudes with the spin turners and evaluating the four analyzer
/// settings. Gives the same values as [`bell_e_ideal`].
pub fn bell_e_from_state(alpha: f64, chi: f64, axis: MuMetalAxis) -> f64 {
    let n = match axis {
        MuMetalAxis::Y => [0.0, 1.0, 0.0],
        MuMetalAxis::X => [1.0, 0.0, 0.0],
    };
    let up = Vector2::new(c(1.0), c(0.0));
    let spin_a = rotation(n, -FRAC_PI_2) * up;
    let spin_b = rotation(n, FRAC_PI_2) * up;
    let prob_up = |alpha: f64, chi: f64, flip: bool| {
        let [a, b] = o_beam_arm_amplitudes(0.2, chi, 0.0);
        let psi = spin_a * a + spin_b * b;
        let psi = if flip { rotation([1.0, 0.0, 0.0], PI) * psi } else { psi };
        let psi = rotation([1.0, 0.0, 0.0], alpha) * psi;
        psi[0].norm_sqr()
    };
    let n1 = prob_up(alpha, chi, false);
    let n2 = prob_up(alpha, chi + PI, true);
    let n3 = prob_up(alpha, chi, true);
    let n4 = prob_up(alpha, chi + PI, false);
    (n1 + n2 - n3 - n4) / (n1 + n2 + n3 + n4)
}

/// Ideal error, disturbance and both uncertainty-relation sides.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OzawaCurves {
    pub epsilon: f64,
    pub eta: f64,
    pub lhs_ozawa: f64,
    pub lhs_heisenberg: f64,
    pub rhs: f64,
}

/// `ε = 2|sin(φ/2)|`, `η = √2|cos φ|`, `Δ(A) = Δ(B) = 1` in `|z⟩`.
pub fn ozawa_curves(phi: f64) -> OzawaCurves {
    let epsilon = 2.0 * (0.5 * phi).sin().abs();
    let eta = SQRT_2 * phi.cos().abs();
    OzawaCurves {
        epsilon,
        eta,
        lhs_ozawa: 2.0 * SQRT_2 * phi.cos() * (0.5 * phi).sin() + 2.0 * (0.5 * phi).sin() + SQRT_2 * phi.cos(),
        lhs_heisenberg: epsilon * eta,
        rhs: 1.0,
    }
}

fn expect(m: &Matrix2<C>, psi: &Vector2<C>) -> f64 {
    (psi.adjoint() * m * psi)[(0, 0)].re
}

fn ket(state: [f64; 3]) -> Vector2<C> {
    // Eigenvector of σ·n with eigenvalue +1.
    let [x, y, z] = state;
    if z > -1.0 + 1e-15 {
        let norm = (2.0 * (1.0 + z)).sqrt();
        Vector2::new(c((1.0 + z) / norm), C::new(x, y) / norm)
    } else {
        Vector2::new(c(0.0), c(1.0))
    }
}

/// `σ^φ`, the observable measured by M1, and `O_B = Σ_s P_s σ^y P_s` with
/// `P_± = (1 ± σ^φ)/2`.
pub fn ozawa_operators(phi: f64) -> (Matrix2<C>, Matrix2<C>) {
    let [sx, sy, _] = pauli();
    let s_phi = sx * c(phi.cos()) + sy * c(phi.sin());
    let p_plus = (Matrix2::identity() + s_phi) * c(0.5);
    let p_minus = (Matrix2::identity() - s_phi) * c(0.5);
    let o_b = p_plus * sy * p_plus + p_minus * sy * p_minus;
    (s_phi, o_b)
}

/// `(⟨O_A⟩, ⟨O_B⟩)` in `|+z⟩, |−z⟩, |+x⟩, |+y⟩`, in that order.
pub fn ozawa_expectations(phi: f64) -> [(f64, f64); 4] {
    let (o_a, o_b) = ozawa_operators(phi);
    [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]].map(|n| {
        let psi = ket(n);
        (expect(&o_a, &psi), expect(&o_b, &psi))
    })
}

/// `(ε, η)` from their operator definitions in `|z⟩`: the noise operator
/// `σ^φ − σ^x` for the error and the commutators `[P_s, σ^y]` for the
/// disturbance of a projective measurement.
pub fn ozawa_from_operators(phi: f64) -> (f64, f64) {
    let [sx, sy, _] = pauli();
    let (s_phi, _) = ozawa_operators(phi);
    let z = ket([0.0, 0.0, 1.0]);
    let noise = s_phi - sx;
    let eps_sq = expect(&(noise.adjoint() * noise), &z);
    let mut eta_sq = 0.0;
    for sign in [1.0, -1.0] {
        let p = (Matrix2::identity() + s_phi * c(sign)) * c(0.5);
        let comm = p * sy - sy * p;
        eta_sq += expect(&(comm.adjoint() * comm), &z);
    }
    (eps_sq.max(0.0).sqrt(), eta_sq.max(0.0).sqrt())
}
