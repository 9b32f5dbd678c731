//! Run manifests and CSV output.
//!
//! A manifest is a flat TOML table:
//!
//! ```toml
//! experiment = "bell"          # interferometer | bell | ozawa (required)
//! seed = 7                     # required
//! gamma = 0.99                 # default 0.99
//! reflectivity = 0.2           # default 0.2
//! n_particles = 10000          # per grid point / setting, default 10000
//! alpha_points = 8             # or alpha_values = [..]
//! chi_points = 8               # or chi_values = [..]
//! mu_metal_axis = "y"          # y | x
//! output = "bell.csv"          # relative to the output directory
//! parallelism = 0              # worker threads, 0 = all cores
//! ```
//!
//! `chi_points` and `alpha_points` sample `[0, 2π)` evenly, `phi_points`
//! samples `[0, π/2]` including both ends. Other keys: `warmup`
//! (uncounted neutrons per run, default 0) and `common_random_numbers`
//! (Ozawa only, default true).

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::devices::MuMetalAxis;
use crate::error::{Error, Result};
use crate::network::InitialState;
use crate::oracle::{bell_e_ideal, mzi_probabilities, mzi_visibilities, ozawa_curves};
use crate::stats::{
    expectation_from_counts, fringe_stats, periodic_grid, CHSH_OPTIMAL_SETTINGS, CHSH_PRINTED_SETTINGS,
};
use crate::sweep::{
    correlation_grid, sweep_bell, sweep_interferometer, sweep_ozawa, uncertainty_points, with_parallelism,
    BellSweep, InterferometerSweep, OzawaSweep,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NEUTRON_EVENTS_OUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Interferometer,
    Bell,
    Ozawa,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Interferometer => "interferometer",
            Experiment::Bell => "bell",
            Experiment::Ozawa => "ozawa",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    experiment: Option<Experiment>,
    seed: Option<u64>,
    gamma: Option<f64>,
    reflectivity: Option<f64>,
    n_particles: Option<u64>,
    warmup: Option<u64>,
    chi_points: Option<usize>,
    chi_values: Option<Vec<f64>>,
    alpha_points: Option<usize>,
    alpha_values: Option<Vec<f64>>,
    phi_points: Option<usize>,
    phi_values: Option<Vec<f64>>,
    mu_metal_axis: Option<MuMetalAxis>,
    common_random_numbers: Option<bool>,
    output: Option<PathBuf>,
    parallelism: Option<usize>,
}

/// A validated run description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub seed: u64,
    pub gamma: f64,
    pub reflectivity: f64,
    pub n_particles: u64,
    pub warmup: u64,
    /// χ grid (interferometer and Bell).
    pub chis: Vec<f64>,
    /// α grid (Bell).
    pub alphas: Vec<f64>,
    /// φ grid (Ozawa).
    pub phis: Vec<f64>,
    pub mu_metal_axis: MuMetalAxis,
    pub common_random_numbers: bool,
    #[serde(skip)]
    pub output: PathBuf,
    #[serde(skip)]
    pub parallelism: usize,
}

/// `n` points on `[0, π/2]` including both ends.
pub fn quarter_turn_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| FRAC_PI_2 * k as f64 / (n - 1) as f64).collect(),
    }
}

/// 1-based line on which `key` is assigned, for diagnostics.
fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn field_error(text: &str, key: &str, reason: impl Into<String>) -> Error {
    let reason = reason.into();
    match line_of(text, key) {
        Some(line) => Error::field(key, format!("line {line}: {reason}")),
        None => Error::field(key, reason),
    }
}

fn grid(
    text: &str,
    points_key: &str,
    values_key: &str,
    points: Option<usize>,
    values: Option<Vec<f64>>,
    default_points: usize,
    make: fn(usize) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let g = match (points, values) {
        (Some(_), Some(_)) => {
            return Err(field_error(text, values_key, format!("give either `{points_key}` or `{values_key}`, not both")))
        }
        (None, Some(v)) => {
            if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                return Err(field_error(text, values_key, format!("non-finite angle {bad}")));
            }
            v
        }
        (Some(n), None) => make(n),
        (None, None) => make(default_points),
    };
    if g.is_empty() {
        let key = if points.is_some() { points_key } else { values_key };
        return Err(field_error(text, key, "grid must not be empty"));
    }
    Ok(g)
}

/// Parses and validates a manifest.
pub fn parse_config(text: &str) -> Result<RunManifest> {
    let raw: RawManifest = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    let experiment = raw
        .experiment
        .ok_or_else(|| Error::field("experiment", "missing; expected interferometer, bell or ozawa"))?;
    let seed = raw
        .seed
        .ok_or_else(|| Error::field("seed", "missing; every run needs an explicit seed"))?;

    let gamma = raw.gamma.unwrap_or(0.99);
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(field_error(text, "gamma", format!("must lie in (0, 1), got {gamma}")));
    }
    let reflectivity = raw.reflectivity.unwrap_or(0.2);
    if !(0.0..=1.0).contains(&reflectivity) {
        return Err(field_error(text, "reflectivity", format!("must lie in [0, 1], got {reflectivity}")));
    }
    let n_particles = raw.n_particles.unwrap_or(10_000);
    if n_particles == 0 {
        return Err(field_error(text, "n_particles", "must be positive"));
    }

    let default_chi = if experiment == Experiment::Bell { 8 } else { 16 };
    let chis = grid(text, "chi_points", "chi_values", raw.chi_points, raw.chi_values, default_chi, periodic_grid)?;
    let alphas = grid(text, "alpha_points", "alpha_values", raw.alpha_points, raw.alpha_values, 8, periodic_grid)?;
    let phis = grid(text, "phi_points", "phi_values", raw.phi_points, raw.phi_values, 13, quarter_turn_grid)?;

    Ok(RunManifest {
        experiment,
        seed,
        gamma,
        reflectivity,
        n_particles,
        warmup: raw.warmup.unwrap_or(0),
        chis,
        alphas,
        phis,
        mu_metal_axis: raw.mu_metal_axis.unwrap_or_default(),
        common_random_numbers: raw.common_random_numbers.unwrap_or(true),
        output: raw.output.unwrap_or_else(|| PathBuf::from(format!("{}.csv", experiment.name()))),
        parallelism: raw.parallelism.unwrap_or(0),
    })
}

pub fn load_config(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

impl RunManifest {
    /// SHA-256 of the settings that determine the results (output path and
    /// thread count excluded).
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    fn header(&self, kind: &str) -> String {
        let mut h = String::new();
        writeln!(h, "# neutron-events {} {kind}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(h, "# experiment: {}", self.experiment.name()).unwrap();
        writeln!(h, "# seed: {}", self.seed).unwrap();
        writeln!(h, "# config_sha256: {}", self.config_hash()).unwrap();
        if self.experiment != Experiment::Ozawa {
            writeln!(h, "# gamma: {}", num(self.gamma)).unwrap();
            writeln!(h, "# reflectivity: {}", num(self.reflectivity)).unwrap();
        }
        writeln!(h, "# n_particles: {}", self.n_particles).unwrap();
        h
    }
}

/// Decimal with 12 significant digits, trailing zeros removed.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x.is_infinite() { format!("{x}") } else { "0".into() };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (11 - mag).clamp(0, 40) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

struct Table {
    text: String,
}

impl Table {
    fn new(header: String, columns: &[&str]) -> Self {
        let mut text = header;
        text.push_str(&columns.join(","));
        text.push('\n');
        Table { text }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

fn interferometer_csv(m: &RunManifest) -> Result<String> {
    let sweep = InterferometerSweep {
        gamma: m.gamma,
        reflectivity: m.reflectivity,
        chis: m.chis.clone(),
        n_particles: m.n_particles,
        warmup: m.warmup,
        seed: m.seed,
    };
    let table = with_parallelism(m.parallelism, || sweep_interferometer(&sweep))??;
    let mut header = m.header("interferometer counts");
    let o: Vec<f64> = table.iter().map(|r| r.counts.o_beam as f64).collect();
    let h: Vec<f64> = table.iter().map(|r| r.counts.h_beam as f64).collect();
    if let (Ok(fo), Ok(fh)) = (fringe_stats(&m.chis, &o), fringe_stats(&m.chis, &h)) {
        let (vo, vh) = mzi_visibilities(m.reflectivity);
        writeln!(header, "# fit o_beam: visibility={} phase={} oracle_visibility={}", num(fo.visibility), num(fo.phase), num(vo)).unwrap();
        writeln!(header, "# fit h_beam: visibility={} phase={} oracle_visibility={}", num(fh.visibility), num(fh.phase), num(vh)).unwrap();
    }
    let mut t = Table::new(
        header,
        &[
            "chi", "stream_id", "emitted", "o_beam", "h_beam", "lost", "o_fraction", "h_fraction", "lost_fraction",
            "oracle_p_o", "oracle_p_h", "oracle_p_loss", "swapped", "raw_register",
        ],
    );
    for r in table.iter() {
        let c = &r.counts;
        let p = mzi_probabilities(m.reflectivity, r.setting);
        t.row(vec![
            num(r.setting),
            r.stream_id.to_string(),
            c.emitted.to_string(),
            c.o_beam.to_string(),
            c.h_beam.to_string(),
            c.lost.to_string(),
            num(ratio(c.o_beam, c.emitted)),
            num(ratio(c.h_beam, c.emitted)),
            num(ratio(c.lost, c.emitted)),
            num(p.o),
            num(p.h),
            num(p.loss),
            c.diagnostics.swapped.to_string(),
            c.diagnostics.raw_register.to_string(),
        ]);
    }
    Ok(t.text)
}

fn bell_csv(m: &RunManifest) -> Result<String> {
    let sweep = BellSweep {
        gamma: m.gamma,
        reflectivity: m.reflectivity,
        alphas: m.alphas.clone(),
        chis: m.chis.clone(),
        mu_metal_axis: m.mu_metal_axis,
        n_particles: m.n_particles,
        warmup: m.warmup,
        seed: m.seed,
    };
    let table = with_parallelism(m.parallelism, || sweep_bell(&sweep))??;
    let grid = correlation_grid(&m.alphas, &m.chis, &table)?;
    let best = grid.max_abs_chsh();
    let mut header = m.header("bell counts");
    writeln!(header, "# mu_metal_axis: {}", if m.mu_metal_axis == MuMetalAxis::Y { "y" } else { "x" }).unwrap();
    let [a, c, ap, cp] = best.indices;
    writeln!(
        header,
        "# s_max: {} at alpha={} chi={} alpha'={} chi'={}",
        num(best.s.abs()),
        num(m.alphas[a]),
        num(m.chis[c]),
        num(m.alphas[ap]),
        num(m.chis[cp])
    )
    .unwrap();
    for (label, settings) in [("printed", CHSH_PRINTED_SETTINGS), ("optimal", CHSH_OPTIMAL_SETTINGS)] {
        if let Ok(s) = grid.chsh_at(settings) {
            writeln!(header, "# s_{label}_settings: {}", num(s)).unwrap();
        }
    }
    let mut t = Table::new(
        header,
        &[
            "alpha", "chi", "stream_id", "emitted_per_setting", "n_1", "n_2", "n_3", "n_4", "o_absorbed", "h_beam",
            "lost", "e", "oracle_e", "s_max_at_cell",
        ],
    );
    let n_chi = m.chis.len();
    for (k, r) in table.iter().enumerate() {
        let (alpha, chi) = r.setting;
        let n = r.counts.n();
        let sum = |f: fn(&crate::network::BellCounts) -> u64| r.counts.counts.iter().map(f).sum::<u64>();
        t.row(vec![
            num(alpha),
            num(chi),
            r.stream_id.to_string(),
            r.counts.counts[0].emitted.to_string(),
            n[0].to_string(),
            n[1].to_string(),
            n[2].to_string(),
            n[3].to_string(),
            sum(|c| c.o_absorbed).to_string(),
            sum(|c| c.h_beam).to_string(),
            sum(|c| c.lost).to_string(),
            num(grid.e(k / n_chi, k % n_chi)),
            num(bell_e_ideal(alpha, chi, m.mu_metal_axis)),
            num(grid.max_abs_chsh_at(k / n_chi, k % n_chi).s.abs()),
        ]);
    }
    Ok(t.text)
}

fn state_tag(s: InitialState) -> &'static str {
    match s {
        InitialState::PlusZ => "pz",
        InitialState::MinusZ => "mz",
        InitialState::PlusX => "px",
        InitialState::PlusY => "py",
    }
}

fn ozawa_csv(m: &RunManifest) -> Result<String> {
    let sweep = OzawaSweep {
        phis: m.phis.clone(),
        n_particles: m.n_particles,
        seed: m.seed,
        common_random_numbers: m.common_random_numbers,
    };
    let table = with_parallelism(m.parallelism, || sweep_ozawa(&sweep))??;
    let points = uncertainty_points(&table)?;
    let mut header = m.header("ozawa counts");
    writeln!(header, "# common_random_numbers: {}", m.common_random_numbers).unwrap();

    let mut columns: Vec<String> = vec!["phi".into(), "stream_id".into()];
    for s in InitialState::ALL {
        for tag in ["pp", "pm", "mp", "mm"] {
            columns.push(format!("n_{}_{tag}", state_tag(s)));
        }
    }
    for s in InitialState::ALL {
        columns.push(format!("oa_{}", state_tag(s)));
        columns.push(format!("ob_{}", state_tag(s)));
    }
    for c in [
        "epsilon", "eta", "lhs_ozawa", "lhs_heisenberg", "epsilon_sq", "eta_sq", "clamped", "oracle_epsilon",
        "oracle_eta", "oracle_lhs_ozawa", "oracle_lhs_heisenberg", "rhs",
    ] {
        columns.push(c.into());
    }
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut t = Table::new(header, &cols);
    for (block, p) in table.rows.chunks(16).zip(&points) {
        let mut cells = vec![num(p.phi), block[0].stream_id.to_string()];
        cells.extend(block.iter().map(|r| r.counts.detected.to_string()));
        for state_rows in block.chunks(4) {
            let n = |k: usize| state_rows[k].counts.detected;
            let e = expectation_from_counts(n(0), n(1), n(2), n(3))?;
            cells.push(num(e.o_a));
            cells.push(num(e.o_b));
        }
        let o = ozawa_curves(p.phi);
        cells.extend([
            num(p.epsilon),
            num(p.eta),
            num(p.lhs_ozawa),
            num(p.lhs_heisenberg),
            num(p.epsilon_sq),
            num(p.eta_sq),
            p.clamped.to_string(),
            num(o.epsilon),
            num(o.eta),
            num(o.lhs_ozawa),
            num(o.lhs_heisenberg),
            num(o.rhs),
        ]);
        t.row(cells);
    }
    Ok(t.text)
}

/// Runs the manifest and returns the CSV text.
pub fn render_results(m: &RunManifest) -> Result<String> {
    match m.experiment {
        Experiment::Interferometer => interferometer_csv(m),
        Experiment::Bell => bell_csv(m),
        Experiment::Ozawa => ozawa_csv(m),
    }
}

/// Oracle values on the manifest's grid, without running the simulation.
pub fn render_oracle(m: &RunManifest) -> String {
    let header = m.header("oracle");
    match m.experiment {
        Experiment::Interferometer => {
            let mut t = Table::new(header, &["chi", "oracle_p_o", "oracle_p_h", "oracle_p_loss"]);
            for &chi in &m.chis {
                let p = mzi_probabilities(m.reflectivity, chi);
                t.row(vec![num(chi), num(p.o), num(p.h), num(p.loss)]);
            }
            t.text
        }
        Experiment::Bell => {
            let mut t = Table::new(header, &["alpha", "chi", "oracle_e"]);
            for &alpha in &m.alphas {
                for &chi in &m.chis {
                    t.row(vec![num(alpha), num(chi), num(bell_e_ideal(alpha, chi, m.mu_metal_axis))]);
                }
            }
            t.text
        }
        Experiment::Ozawa => {
            let mut t = Table::new(
                header,
                &["phi", "oracle_epsilon", "oracle_eta", "oracle_lhs_ozawa", "oracle_lhs_heisenberg", "rhs"],
            );
            for &phi in &m.phis {
                let o = ozawa_curves(phi);
                t.row(vec![num(phi), num(o.epsilon), num(o.eta), num(o.lhs_ozawa), num(o.lhs_heisenberg), num(o.rhs)]);
            }
            t.text
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let io = |source| Error::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

/// Output path of a manifest under `out_dir`.
pub fn output_path(m: &RunManifest, out_dir: &Path) -> PathBuf {
    out_dir.join(&m.output)
}

/// Runs the manifest and writes its CSV under `out_dir`.
pub fn run_manifest(m: &RunManifest, out_dir: &Path) -> Result<PathBuf> {
    let text = render_results(m)?;
    let path = output_path(m, out_dir);
    write_file(&path, &text)?;
    Ok(path)
}

/// Writes the oracle CSV next to where the results would go, with an
/// `oracle-` prefix on the file name.
pub fn emit_oracle(m: &RunManifest, out_dir: &Path) -> Result<PathBuf> {
    let path = output_path(m, out_dir);
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let path = path.with_file_name(format!("oracle-{name}"));
    write_file(&path, &render_oracle(m))?;
    Ok(path)
}
