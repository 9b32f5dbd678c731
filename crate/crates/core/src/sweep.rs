//! Parameter sweeps. Grid points run in parallel; each owns its devices and
//! a random stream whose id is derived from its grid index only, so results
//! do not depend on the number of worker threads or on scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::devices::MuMetalAxis;
use crate::error::{Error, Result};
use crate::network::{
    run_bell, run_interferometer, run_ozawa, BellConfig, BellRun, Conserved, CountRow, CountTable,
    InitialState, InterferometerConfig, InterferometerCounts, OzawaConfig, OzawaCounts,
};
use crate::stats::{epsilon_eta, expectation_from_counts, CorrelationGrid, UncertaintyPoint};

/// Runs `f` on a pool of `threads` workers (`0` picks the machine default).
pub fn with_parallelism<T, F>(threads: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn at_point<T>(index: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::GridPoint { index, source: Box::new(e) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSweep {
    pub gamma: f64,
    pub reflectivity: f64,
    pub chis: Vec<f64>,
    pub n_particles: u64,
    pub warmup: u64,
    pub seed: u64,
}

/// Point `j` of the χ grid runs on stream `j`.
pub fn sweep_interferometer(s: &InterferometerSweep) -> Result<CountTable<f64, InterferometerCounts>> {
    let rows = s
        .chis
        .par_iter()
        .enumerate()
        .map(|(j, &chi)| {
            let mut cfg = InterferometerConfig::new(s.gamma, s.reflectivity, chi, s.n_particles, s.seed);
            cfg.stream = j as u64;
            cfg.warmup = s.warmup;
            let counts = at_point(j, run_interferometer(&cfg))?;
            Ok(CountRow { setting: chi, stream_id: cfg.stream, counts })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CountTable { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellSweep {
    pub gamma: f64,
    pub reflectivity: f64,
    pub alphas: Vec<f64>,
    pub chis: Vec<f64>,
    pub mu_metal_axis: MuMetalAxis,
    pub n_particles: u64,
    pub warmup: u64,
    pub seed: u64,
}

impl Conserved for BellRun {
    fn emitted(&self) -> u64 {
        self.counts.iter().map(|c| c.emitted).sum()
    }

    fn accounted(&self) -> u64 {
        self.counts.iter().map(Conserved::accounted).sum()
    }
}

/// Cell `(i, j)` of the `(α, χ)` grid runs on stream `i·n_χ + j`; its four
/// settings use forks of that stream.
pub fn sweep_bell(s: &BellSweep) -> Result<CountTable<(f64, f64), BellRun>> {
    let n_chi = s.chis.len();
    let cells: Vec<(usize, usize)> = (0..s.alphas.len())
        .flat_map(|i| (0..n_chi).map(move |j| (i, j)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, j)| {
            let index = i * n_chi + j;
            let (alpha, chi) = (s.alphas[i], s.chis[j]);
            let mut cfg = BellConfig::new(s.gamma, s.reflectivity, alpha, chi, s.n_particles, s.seed);
            cfg.stream = index as u64;
            cfg.warmup = s.warmup;
            cfg.mu_metal_axis = s.mu_metal_axis;
            let counts = at_point(index, run_bell(&cfg))?;
            Ok(CountRow { setting: (alpha, chi), stream_id: cfg.stream, counts })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CountTable { rows })
}

/// Measured correlations of a Bell sweep table.
pub fn correlation_grid(
    alphas: &[f64],
    chis: &[f64],
    table: &CountTable<(f64, f64), BellRun>,
) -> Result<CorrelationGrid> {
    let n_chi = chis.len();
    CorrelationGrid::from_counts(alphas.to_vec(), chis.to_vec(), |i, j| table.rows[i * n_chi + j].counts.n())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OzawaSweep {
    pub phis: Vec<f64>,
    pub n_particles: u64,
    pub seed: u64,
    pub common_random_numbers: bool,
}

/// One sub-experiment of the Ozawa sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OzawaSetting {
    pub phi: f64,
    pub state: InitialState,
    pub s1: i8,
    pub s2: i8,
}

/// Analyzer settings in table order: `++`, `+−`, `−+`, `−−`.
pub const ANALYZER_SETTINGS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Sixteen sub-experiments per `φ`, ordered by `φ`, state and analyzer
/// settings. All sub-experiments at `φ` index `p` run on stream `p`; the
/// states (and, without common random numbers, the settings) use forks.
pub fn sweep_ozawa(s: &OzawaSweep) -> Result<CountTable<OzawaSetting, OzawaCounts>> {
    let mut jobs = Vec::with_capacity(16 * s.phis.len());
    for (p, &phi) in s.phis.iter().enumerate() {
        for state in InitialState::ALL {
            for (s1, s2) in ANALYZER_SETTINGS {
                jobs.push((p, OzawaSetting { phi, state, s1, s2 }));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(p, setting)| {
            let mut cfg = OzawaConfig::new(setting.phi, setting.state, setting.s1, setting.s2, s.n_particles, s.seed);
            cfg.stream = p as u64;
            cfg.common_random_numbers = s.common_random_numbers;
            let counts = at_point(p, run_ozawa(&cfg))?;
            Ok(CountRow { setting, stream_id: cfg.stream, counts })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CountTable { rows })
}

/// `ε`, `η` and the relation sides per `φ` of an Ozawa sweep table.
pub fn uncertainty_points(table: &CountTable<OzawaSetting, OzawaCounts>) -> Result<Vec<UncertaintyPoint>> {
    let mut points = Vec::new();
    for block in table.rows.chunks(16) {
        let phi = block[0].setting.phi;
        let mut expectations = BTreeMap::new();
        for state_rows in block.chunks(4) {
            let n = |k: usize| state_rows[k].counts.detected;
            let e = expectation_from_counts(n(0), n(1), n(2), n(3))?;
            expectations.insert(state_rows[0].setting.state, e);
        }
        points.push(epsilon_eta(&expectations, phi)?);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::periodic_grid;

    #[test]
    fn interferometer_sweep_is_thread_count_independent() {
        let s = InterferometerSweep {
            gamma: 0.9,
            reflectivity: 0.2,
            chis: periodic_grid(6),
            n_particles: 3_000,
            warmup: 0,
            seed: 5,
        };
        let one = with_parallelism(1, || sweep_interferometer(&s)).unwrap().unwrap();
        let many = with_parallelism(0, || sweep_interferometer(&s)).unwrap().unwrap();
        assert_eq!(one, many);
        assert!(one.is_conserved());
        assert_eq!(one.rows.iter().map(|r| r.stream_id).collect::<Vec<_>>(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn bell_sweep_is_thread_count_independent() {
        let s = BellSweep {
            gamma: 0.9,
            reflectivity: 0.2,
            alphas: periodic_grid(3),
            chis: periodic_grid(2),
            mu_metal_axis: MuMetalAxis::Y,
            n_particles: 2_000,
            warmup: 0,
            seed: 5,
        };
        let one = with_parallelism(1, || sweep_bell(&s)).unwrap().unwrap();
        let many = with_parallelism(4, || sweep_bell(&s)).unwrap().unwrap();
        assert_eq!(one, many);
        assert_eq!(one.rows[5].stream_id, 5);
        assert_eq!(one.rows[5].setting, (s.alphas[2], s.chis[1]));
        let grid = correlation_grid(&s.alphas, &s.chis, &one).unwrap();
        assert_eq!(grid.e(2, 1), one.rows[5].counts.correlation().unwrap());
    }

    #[test]
    fn ozawa_sweep_orders_and_reduces() {
        let s = OzawaSweep {
            phis: vec![0.0, 0.7],
            n_particles: 2_000,
            seed: 11,
            common_random_numbers: true,
        };
        let one = with_parallelism(1, || sweep_ozawa(&s)).unwrap().unwrap();
        let many = with_parallelism(0, || sweep_ozawa(&s)).unwrap().unwrap();
        assert_eq!(one, many);
        assert_eq!(one.len(), 32);
        assert!(one.is_conserved());
        assert_eq!(one.rows[17].setting.state, InitialState::PlusZ);
        assert_eq!((one.rows[17].setting.s1, one.rows[17].setting.s2), (1, -1));
        let pts = uncertainty_points(&one).unwrap();
        assert_eq!(pts.len(), 2);
        // φ = 0 with shared random numbers: σ^x on ±z is exactly balanced.
        assert_eq!(pts[0].epsilon, 0.0);
    }

    #[test]
    fn errors_name_the_grid_point() {
        let s = InterferometerSweep {
            gamma: 1.5,
            reflectivity: 0.2,
            chis: vec![0.0],
            n_particles: 10,
            warmup: 0,
            seed: 1,
        };
        match sweep_interferometer(&s) {
            Err(Error::GridPoint { index: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
