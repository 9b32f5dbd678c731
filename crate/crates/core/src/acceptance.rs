//! The acceptance criteria, each run at its stated parameters and
//! tolerance. Used by the `verify` subcommand and the acceptance test.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::fmt;

use crate::beam_splitter::{BeamSplitter, Port};
use crate::devices::{
    analyzer_along, analyzer_pass, guide_precession, mu_metal, phase_shift, spin_flip, spin_rotate_x, Beam,
    MuMetalAxis,
};
use crate::error::Result;
use crate::harness::{parse_config, quarter_turn_grid, render_results};
use crate::message::{random_message, Message, UnitVector};
use crate::oracle::{bell_e_ideal, mzi_probabilities, mzi_visibilities, ozawa_curves, TransferMatrix};
use crate::rng::RngStream;
use crate::stats::{fringe_stats, periodic_grid, FringeFit};
use crate::sweep::{
    correlation_grid, sweep_bell, sweep_interferometer, sweep_ozawa, uncertainty_points, BellSweep,
    InterferometerSweep, OzawaSweep,
};

/// Seed used by every criterion.
pub const ACCEPTANCE_SEED: u64 = 1;

/// Criteria that fail at their stated settings for reasons analysed in the
/// README: the counted start-up transient of randomly initialized devices
/// fills in the γ = 0.99 dark fringe (1) and keeps the Bell surface from
/// settling within 10^4 neutrons (3).
pub const KNOWN_FAILURES: &[u8] = &[1, 3];

/// Particles per setting for the grid-maximized CHSH values. The maximum
/// over a grid picks up the largest noise excursion, so it needs far more
/// events than any single cell to settle on the underlying value.
pub const CHSH_PARTICLES: u64 = 1_000_000;

#[derive(Clone, Debug)]
pub struct CriterionOutcome {
    pub number: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] criterion {}: {} -- {}", self.number, self.title, self.detail)
    }
}

fn outcome(number: u8, title: &'static str, checks: Vec<(bool, String)>) -> CriterionOutcome {
    CriterionOutcome {
        number,
        title,
        passed: checks.iter().all(|c| c.0),
        detail: checks
            .into_iter()
            .map(|(ok, s)| format!("{}{s}", if ok { "" } else { "(!) " }))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Interferometer at γ = 0.99: O-beam fraction against the transfer-matrix
/// oracle and fitted O-beam visibility.
pub fn criterion_1(seed: u64) -> Result<CriterionOutcome> {
    let (within, fit) = quantum_limit_points(seed, 0)?;
    let (within_eq, _) = quantum_limit_points(seed, EQUILIBRATION)?;
    let mut out = outcome(
        1,
        "interferometer quantum limit",
        vec![
            (within >= 14, format!("{within}/16 points within 3 sigma of p_O (need 14)")),
            (fit.visibility >= 0.98, format!("fitted O visibility {:.4} (need >= 0.98)", fit.visibility)),
        ],
    );
    out.detail += &format!("; for reference, after {EQUILIBRATION} uncounted neutrons: {within_eq}/16");
    Ok(out)
}

/// Points of the γ = 0.99, R = 0.2 fringe within 3σ of the oracle, and the
/// fit of the O-beam counts.
fn quantum_limit_points(seed: u64, warmup: u64) -> Result<(usize, FringeFit)> {
    let (gamma, r, n) = (0.99, 0.2, 100_000);
    let chis = periodic_grid(16);
    let table = sweep_interferometer(&InterferometerSweep {
        gamma,
        reflectivity: r,
        chis: chis.clone(),
        n_particles: n,
        warmup,
        seed,
    })?;
    let mut within = 0;
    for row in table.iter() {
        let p = mzi_probabilities(r, row.setting).o;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let frac = row.counts.o_beam as f64 / n as f64;
        if (frac - p).abs() <= 3.0 * sigma {
            within += 1;
        }
    }
    let o: Vec<f64> = table.iter().map(|r| r.counts.o_beam as f64).collect();
    Ok((within, fringe_stats(&chis, &o)?))
}

/// Interferometer at γ = 0.5, R = 0.22: counter-phased fringes, reduced H
/// visibility, exact particle conservation.
pub fn criterion_2(seed: u64) -> Result<CriterionOutcome> {
    let (gamma, r, n) = (0.5, 0.22, 22_727);
    let chis = periodic_grid(16);
    let table = sweep_interferometer(&InterferometerSweep {
        gamma,
        reflectivity: r,
        chis: chis.clone(),
        n_particles: n,
        warmup: 0,
        seed,
    })?;
    let o: Vec<f64> = table.iter().map(|r| r.counts.o_beam as f64).collect();
    let h: Vec<f64> = table.iter().map(|r| r.counts.h_beam as f64).collect();
    let fo = fringe_stats(&chis, &o)?;
    let fh = fringe_stats(&chis, &h)?;
    let shift = wrap(fo.phase - fh.phase).abs();
    let (_, ideal_h) = mzi_visibilities(r);
    let conserved = table.is_conserved() && table.iter().all(|r| r.counts.emitted == n);
    Ok(outcome(
        2,
        "imperfection knob",
        vec![
            (
                !fo.degenerate && !fh.degenerate && (shift - PI).abs() <= PI / 4.0,
                format!("O-H fringe phase difference {shift:.3} rad (need pi within pi/4)"),
            ),
            (
                fh.visibility < ideal_h,
                format!("H visibility {:.4} < ideal {:.4}", fh.visibility, ideal_h),
            ),
            (conserved, format!("detected + lost = emitted at all {} points", table.len())),
        ],
    ))
}

fn bell_surface_error(seed: u64, axis: MuMetalAxis, warmup: u64) -> Result<f64> {
    let g = periodic_grid(8);
    let table = sweep_bell(&BellSweep {
        gamma: 0.99,
        reflectivity: 0.2,
        alphas: g.clone(),
        chis: g.clone(),
        mu_metal_axis: axis,
        n_particles: 10_000,
        warmup,
        seed,
    })?;
    let grid = correlation_grid(&g, &g, &table)?;
    let mut worst = 0.0f64;
    for (i, &a) in g.iter().enumerate() {
        for (j, &c) in g.iter().enumerate() {
            worst = worst.max((grid.e(i, j) - bell_e_ideal(a, c, axis)).abs());
        }
    }
    Ok(worst)
}

/// Equilibration used for the informational figure of criterion 3.
pub const EQUILIBRATION: u64 = 5_000;

/// Bell correlation surface on an 8×8 grid, both mu-metal axes. Devices
/// start fresh for every setting and the transient is counted. The same
/// grid after `EQUILIBRATION` uncounted neutrons is reported for
/// reference only.
pub fn criterion_3(seed: u64) -> Result<CriterionOutcome> {
    let y = bell_surface_error(seed, MuMetalAxis::Y, 0)?;
    let x = bell_surface_error(seed, MuMetalAxis::X, 0)?;
    let y_eq = bell_surface_error(seed, MuMetalAxis::Y, EQUILIBRATION)?;
    let x_eq = bell_surface_error(seed, MuMetalAxis::X, EQUILIBRATION)?;
    let mut out = outcome(
        3,
        "Bell surface",
        vec![
            (y <= 0.06, format!("max |E - cos(a+x)| = {y:.4} (need <= 0.06)")),
            (x <= 0.06, format!("x-axis max |E - cos a cos x| = {x:.4} (need <= 0.06)")),
        ],
    );
    out.detail += &format!(
        "; for reference, after {EQUILIBRATION} uncounted neutrons: {y_eq:.4} and {x_eq:.4}"
    );
    Ok(out)
}

/// Grid-maximized `|S|` for one learning parameter.
pub fn chsh_max(seed: u64, gamma: f64, n_particles: u64) -> Result<f64> {
    let g = periodic_grid(8);
    let table = sweep_bell(&BellSweep {
        gamma,
        reflectivity: 0.2,
        alphas: g.clone(),
        chis: g.clone(),
        mu_metal_axis: MuMetalAxis::Y,
        n_particles,
        warmup: 0,
        seed,
    })?;
    Ok(correlation_grid(&g, &g, &table)?.max_abs_chsh().s.abs())
}

/// Grid-maximized CHSH values at three learning parameters.
pub fn criterion_4(seed: u64) -> Result<CriterionOutcome> {
    let mut checks = Vec::new();
    for (gamma, target) in [(0.55, 2.05), (0.67, 2.30), (0.99, 2.0 * SQRT_2)] {
        let s = chsh_max(seed, gamma, CHSH_PARTICLES)?;
        checks.push(((s - target).abs() <= 0.05, format!("gamma {gamma}: S_max {s:.4} (target {target:.3} +- 0.05)")));
    }
    let mut out = outcome(4, "CHSH values", checks);
    out.detail += &format!("; {CHSH_PARTICLES} particles per setting");
    Ok(out)
}

/// Error and disturbance curves from the sixteen sub-experiments per φ.
pub fn criterion_5(seed: u64) -> Result<CriterionOutcome> {
    let phis = quarter_turn_grid(13);
    let table = sweep_ozawa(&OzawaSweep {
        phis,
        n_particles: 10_000,
        seed,
        common_random_numbers: true,
    })?;
    let points = uncertainty_points(&table)?;
    let (mut de, mut dn, mut dl, mut min_lhs) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    let mut violation = true;
    let mut in_window = 0;
    for p in &points {
        let o = ozawa_curves(p.phi);
        de = de.max((p.epsilon - o.epsilon).abs());
        dn = dn.max((p.eta - o.eta).abs());
        dl = dl.max((p.lhs_ozawa - o.lhs_ozawa).abs());
        min_lhs = min_lhs.min(p.lhs_ozawa);
        if (1.0..=1.4).contains(&p.phi) {
            in_window += 1;
            violation &= p.lhs_heisenberg < 1.0;
        }
    }
    Ok(outcome(
        5,
        "Ozawa curves",
        vec![
            (de <= 0.05, format!("max |eps - 2|sin(phi/2)|| = {de:.4}")),
            (dn <= 0.05, format!("max |eta - sqrt2|cos phi|| = {dn:.4}")),
            (min_lhs >= 0.97, format!("min lhs_ozawa = {min_lhs:.4} (need >= 0.97)")),
            (dl <= 0.08, format!("max |lhs_ozawa - closed form| = {dl:.4}")),
            (
                violation && in_window > 0,
                format!("eps*eta < 1 at all {in_window} points with phi in [1.0, 1.4]"),
            ),
        ],
    ))
}

fn dlm_convergence() -> (bool, String) {
    let mut worst = 0.0f64;
    for (gamma, v0) in [(0.5, 0.1), (0.9, 0.3), (0.99, 0.0), (0.3, 0.77)] {
        let regs = [Message::spin_up(), Message::spin_down()];
        let mut bs = BeamSplitter::with_state(gamma, 0.2, v0, regs).expect("valid state");
        for k in 1..=200 {
            bs.update_internal(Port::Zero, Message::spin_up());
            let expect = gamma.powi(k) * (1.0 - v0);
            worst = worst.max(((1.0 - bs.v().0) - expect).abs());
        }
    }
    (worst <= 1e-12, format!("|v0 - 1| = gamma^k |v0(0) - 1| to {worst:.1e}"))
}

fn dlm_constraints() -> (bool, String) {
    let mut rng = RngStream::new(ACCEPTANCE_SEED, 600);
    let mut bs = BeamSplitter::new(0.9, 0.3, &mut rng).expect("valid parameters");
    let mut worst = 0.0f64;
    let mut in_range = true;
    for _ in 0..1_000_000 {
        let port = if rng.next_uniform() < 0.5 { Port::Zero } else { Port::One };
        let msg = random_message(&mut rng);
        let out = bs.process(port, msg, &mut rng);
        let (v0, v1) = bs.v();
        in_range &= (0.0..=1.0).contains(&v0) && (0.0..=1.0).contains(&v1);
        worst = worst
            .max((v0 + v1 - 1.0).abs())
            .max((bs.register(Port::Zero).norm_sqr() - 1.0).abs())
            .max((bs.register(Port::One).norm_sqr() - 1.0).abs())
            .max((out.message.norm_sqr() - 1.0).abs());
    }
    (
        in_range && worst <= 1e-12,
        format!("v >= 0, v0 + v1 = 1 and unit registers after 1e6 events (max defect {worst:.1e})"),
    )
}

fn norm_preservation() -> (bool, String) {
    let mut rng = RngStream::new(ACCEPTANCE_SEED, 601);
    let mut worst = 0.0f64;
    let mut check = |m: &Message| worst = worst.max((m.norm_sqr().sqrt() - 1.0).abs());
    for _ in 0..10_000 {
        let m = random_message(&mut rng);
        let a = TAU * rng.next_uniform();
        let axis = UnitVector::normalized(rng.next_uniform() - 0.5, rng.next_uniform() - 0.5, rng.next_uniform() - 0.5)
            .unwrap_or(UnitVector::Z);
        check(&m.precess(&axis, a));
        check(&phase_shift(&m, a));
        check(&mu_metal(&m, Beam::O, MuMetalAxis::Y));
        check(&mu_metal(&m, Beam::H, MuMetalAxis::X));
        check(&spin_rotate_x(&m, a));
        check(&spin_flip(&m));
        check(&guide_precession(&m, a));
        if let Some(out) = analyzer_pass(&m, &mut rng) {
            check(&out);
        }
        if let Some(out) = analyzer_along(&m, &axis, if a < PI { 1 } else { -1 }, &mut rng) {
            check(&out);
        }
    }
    (worst <= 1e-9, format!("message norm preserved by every device to {worst:.1e}"))
}

fn analyzer_rates() -> (bool, String) {
    let mut rng = RngStream::new(ACCEPTANCE_SEED, 602);
    let n = 20_000u64;
    let mut ok = 0;
    for k in 0..20u64 {
        let m = random_message(&mut rng);
        let axis = loop {
            let v = [rng.next_uniform() - 0.5, rng.next_uniform() - 0.5, rng.next_uniform() - 0.5];
            if let Ok(u) = UnitVector::normalized(v[0], v[1], v[2]) {
                break u;
            }
        };
        let p = 0.5 * (1.0 + m.moment().dot(&axis));
        let mut trial = RngStream::new(ACCEPTANCE_SEED, 700 + k);
        let passed = (0..n).filter(|_| analyzer_along(&m, &axis, 1, &mut trial).is_some()).count();
        let sigma = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
        if (passed as f64 / n as f64 - p).abs() <= 3.0 * sigma {
            ok += 1;
        }
    }
    (ok == 20, format!("analyzer pass rate (1 + m.a)/2 within 3 sigma for {ok}/20 configurations"))
}

fn oracle_consistency() -> (bool, String) {
    let mut rng = RngStream::new(ACCEPTANCE_SEED, 603);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r = rng.next_uniform();
        let chi = TAU * rng.next_uniform();
        worst = worst
            .max(TransferMatrix::beam_splitter(r).unitarity_defect())
            .max(TransferMatrix::phase(chi, -chi).unitarity_defect());
        let p = mzi_probabilities(r, chi);
        worst = worst.max((p.o + p.h + p.loss - 1.0).abs());
    }
    (worst <= 1e-12, format!("oracle unitarity and probability sum to {worst:.1e}"))
}

fn replay_identity() -> Result<(bool, String)> {
    let manifests = [
        "experiment = \"interferometer\"\nseed = 5\nchi_points = 8\nn_particles = 5000\n",
        "experiment = \"bell\"\nseed = 5\nalpha_points = 3\nchi_points = 3\nn_particles = 3000\n",
        "experiment = \"ozawa\"\nseed = 5\nphi_points = 4\nn_particles = 2000\n",
    ];
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).max(2);
    let mut identical = true;
    for text in manifests {
        let mut m = parse_config(text)?;
        m.parallelism = 1;
        let first = render_results(&m)?;
        let again = render_results(&m)?;
        m.parallelism = threads;
        let parallel = render_results(&m)?;
        identical &= first == again && first == parallel;
    }
    Ok((identical, format!("CSV output of all three experiments identical on replay and at 1 vs {threads} threads")))
}

/// Properties of the building blocks.
pub fn criterion_6() -> Result<CriterionOutcome> {
    let checks = vec![
        dlm_convergence(),
        dlm_constraints(),
        norm_preservation(),
        analyzer_rates(),
        oracle_consistency(),
        replay_identity()?,
    ];
    Ok(outcome(6, "property suite", checks))
}

/// Every criterion in order.
pub fn run_all(seed: u64) -> Result<Vec<CriterionOutcome>> {
    Ok(vec![
        criterion_1(seed)?,
        criterion_2(seed)?,
        criterion_3(seed)?,
        criterion_4(seed)?,
        criterion_5(seed)?,
        criterion_6()?,
    ])
}
