//! Derived quantities computed from detector counts.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::InitialState;

/// Correlation from the four O-beam counts
/// `N(α,χ), N(α+π,χ+π), N(α+π,χ), N(α,χ+π)`.
pub fn correlation_e(n1: u64, n2: u64, n3: u64, n4: u64) -> Result<f64> {
    let total = n1 + n2 + n3 + n4;
    if total == 0 {
        return Err(Error::UndefinedCorrelation);
    }
    let num = (n1 + n2) as f64 - (n3 + n4) as f64;
    Ok(num / total as f64)
}

/// `E(α,χ) + E(α,χ′) − E(α′,χ) + E(α′,χ′)`.
pub fn chsh<F>(e: F, alpha: f64, chi: f64, alpha_p: f64, chi_p: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    Ok(e(alpha, chi)? + e(alpha, chi_p)? - e(alpha_p, chi)? + e(alpha_p, chi_p)?)
}

/// Settings `(α, χ, α′, χ′)` quoted for the maximal CHSH value.
pub const CHSH_PRINTED_SETTINGS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, PI / 4.0];
/// Same settings with `χ′ = −π/4`, which maximize `S` for `E = cos(α+χ)`.
pub const CHSH_OPTIMAL_SETTINGS: [f64; 4] = [0.0, PI / 4.0, PI / 2.0, -PI / 4.0];

/// `n` equally spaced angles on `[0, 2π)`.
pub fn periodic_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

/// Indices and value of a CHSH combination on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshMax {
    /// `(α, χ, α′, χ′)` as grid indices.
    pub indices: [usize; 4],
    pub s: f64,
}

/// Measured `E` on a rectangular `(α, χ)` grid, row-major in `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub alphas: Vec<f64>,
    pub chis: Vec<f64>,
    values: Vec<f64>,
    totals: Vec<u64>,
}

impl CorrelationGrid {
    pub fn new(alphas: Vec<f64>, chis: Vec<f64>) -> Self {
        let n = alphas.len() * chis.len();
        CorrelationGrid {
            alphas,
            chis,
            values: vec![0.0; n],
            totals: vec![0; n],
        }
    }

    /// Builds the grid from a closure returning the four counts of each cell.
    pub fn from_counts<F>(alphas: Vec<f64>, chis: Vec<f64>, counts: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> [u64; 4],
    {
        let mut grid = CorrelationGrid::new(alphas, chis);
        for i in 0..grid.alphas.len() {
            for j in 0..grid.chis.len() {
                let [n1, n2, n3, n4] = counts(i, j);
                grid.set(i, j, correlation_e(n1, n2, n3, n4)?, n1 + n2 + n3 + n4);
            }
        }
        Ok(grid)
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.chis.len() + j
    }

    pub fn set(&mut self, i: usize, j: usize, e: f64, total: u64) {
        debug_assert!((-1.0..=1.0).contains(&e));
        let k = self.idx(i, j);
        self.values[k] = e;
        self.totals[k] = total;
    }

    pub fn e(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    pub fn total(&self, i: usize, j: usize) -> u64 {
        self.totals[self.idx(i, j)]
    }

    /// Grid index equal to `angle` modulo 2π.
    fn nearest(grid: &[f64], angle: f64) -> Option<usize> {
        grid.iter()
            .enumerate()
            .map(|(k, &g)| {
                let d = (angle - g).rem_euclid(TAU);
                (k, d.min(TAU - d))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, d)| d < 1e-9)
            .map(|(k, _)| k)
    }

    /// Measured `E` at the grid point matching `(α, χ)` modulo 2π.
    pub fn lookup(&self, alpha: f64, chi: f64) -> Result<f64> {
        let i = Self::nearest(&self.alphas, alpha);
        let j = Self::nearest(&self.chis, chi);
        match (i, j) {
            (Some(i), Some(j)) => Ok(self.e(i, j)),
            _ => Err(Error::Config(format!("({alpha}, {chi}) is not on the correlation grid"))),
        }
    }

    fn s_at(&self, i: usize, j: usize, ip: usize, jp: usize) -> f64 {
        self.e(i, j) + self.e(i, jp) - self.e(ip, j) + self.e(ip, jp)
    }

    /// Largest `|S|` with `(α, χ)` fixed at cell `(i, j)`.
    pub fn max_abs_chsh_at(&self, i: usize, j: usize) -> ChshMax {
        let mut best = ChshMax { indices: [i, j, i, j], s: 0.0 };
        for ip in 0..self.alphas.len() {
            for jp in 0..self.chis.len() {
                let s = self.s_at(i, j, ip, jp);
                if s.abs() > best.s.abs() {
                    best = ChshMax { indices: [i, j, ip, jp], s };
                }
            }
        }
        best
    }

    /// Largest `|S|` over all grid settings.
    pub fn max_abs_chsh(&self) -> ChshMax {
        let mut best = ChshMax { indices: [0; 4], s: 0.0 };
        for i in 0..self.alphas.len() {
            for j in 0..self.chis.len() {
                let cell = self.max_abs_chsh_at(i, j);
                if cell.s.abs() > best.s.abs() {
                    best = cell;
                }
            }
        }
        best
    }

    /// `S` from the measured grid at explicit settings `[α, χ, α′, χ′]`.
    pub fn chsh_at(&self, settings: [f64; 4]) -> Result<f64> {
        let [a, c, ap, cp] = settings;
        chsh(|x, y| self.lookup(x, y), a, c, ap, cp)
    }
}

/// Expectations `(⟨O_A⟩, ⟨O_B⟩)` of one initial state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expectations {
    pub o_a: f64,
    pub o_b: f64,
}

/// `⟨O_A⟩` and `⟨O_B⟩` from the detector counts `N_{S1 S2}` of the four
/// analyzer settings, normalized by their sum.
pub fn expectation_from_counts(npp: u64, npm: u64, nmp: u64, nmm: u64) -> Result<Expectations> {
    let total = npp + npm + nmp + nmm;
    if total == 0 {
        return Err(Error::UndefinedExpectation);
    }
    let n = total as f64;
    Ok(Expectations {
        o_a: ((npp + npm) as f64 - (nmp + nmm) as f64) / n,
        o_b: ((npp + nmp) as f64 - (npm + nmm) as f64) / n,
    })
}

/// Error, disturbance and both sides of the uncertainty relations at one `φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyPoint {
    pub phi: f64,
    pub epsilon: f64,
    pub eta: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub lhs_ozawa: f64,
    pub lhs_heisenberg: f64,
    /// `ε²` and `η²` before clamping.
    pub epsilon_sq: f64,
    pub eta_sq: f64,
    /// How many of `ε²`, `η²` were negative and clamped to zero.
    pub clamped: u8,
}

/// Standard deviations of `σ^x` and `σ^y` in `|z⟩`.
pub const DELTA_A: f64 = 1.0;
pub const DELTA_B: f64 = 1.0;

/// Evaluates `ε(A)`, `η(B)` and the Ozawa left-hand side from per-state
/// expectations of `O_A` and `O_B`.
pub fn epsilon_eta(table: &BTreeMap<InitialState, Expectations>, phi: f64) -> Result<UncertaintyPoint> {
    let get = |s: InitialState| table.get(&s).copied().ok_or(Error::MissingState(s.label()));
    let z = get(InitialState::PlusZ)?;
    let mz = get(InitialState::MinusZ)?;
    let x = get(InitialState::PlusX)?;
    let y = get(InitialState::PlusY)?;

    let epsilon_sq = 2.0 + z.o_a + mz.o_a - 2.0 * x.o_a;
    let eta_sq = 2.0 + z.o_b + mz.o_b - 2.0 * y.o_b;
    let clamped = u8::from(epsilon_sq < 0.0) + u8::from(eta_sq < 0.0);
    let epsilon = epsilon_sq.max(0.0).sqrt();
    let eta = eta_sq.max(0.0).sqrt();
    let lhs_heisenberg = epsilon * eta;
    Ok(UncertaintyPoint {
        phi,
        epsilon,
        eta,
        delta_a: DELTA_A,
        delta_b: DELTA_B,
        lhs_ozawa: lhs_heisenberg + epsilon * DELTA_B + DELTA_A * eta,
        lhs_heisenberg,
        epsilon_sq,
        eta_sq,
        clamped,
    })
}

/// Least-squares fit of `A (1 + V cos(χ + φ0))` to a fringe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub mean: f64,
    pub visibility: f64,
    pub phase: f64,
    pub residuals: Vec<f64>,
    /// Root mean square of the residuals.
    pub rms: f64,
    /// No modulation could be fitted; `visibility` is 0.
    pub degenerate: bool,
}

/// `(max − min) / (max + min)` of the raw curve, 0 for an all-zero curve.
pub fn raw_visibility(y: &[f64]) -> f64 {
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    }
}

pub fn fringe_stats(chi: &[f64], y: &[f64]) -> Result<FringeFit> {
    assert_eq!(chi.len(), y.len(), "chi and count vectors differ in length");
    let mut distinct: Vec<f64> = chi.iter().map(|c| c.rem_euclid(TAU)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if distinct.len() < 4 {
        return Err(Error::TooFewFringePoints { needed: 4, got: distinct.len() });
    }

    let n = chi.len();
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => chi[r].cos(),
        _ => chi[r].sin(),
    });
    let obs = DVector::from_column_slice(y);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&obs, 1e-14)
        .expect("SVD computed with both factors");
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    let fitted = &design * &coef;
    let residuals: Vec<f64> = (&obs - fitted).iter().copied().collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();

    let amp = b.hypot(c);
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = a <= 0.0 || amp <= 1e-12 * scale.max(f64::MIN_POSITIVE);
    let (visibility, phase) = if degenerate { (0.0, 0.0) } else { (amp / a, (-c).atan2(b)) };
    Ok(FringeFit { mean: a, visibility, phase, residuals, rms, degenerate })
}
