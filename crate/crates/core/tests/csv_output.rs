//! End-to-end checks on the CSV written for each experiment.

use neutron_events::devices::MuMetalAxis;
use neutron_events::harness::{num, parse_config, render_results, run_manifest};
use neutron_events::oracle::{bell_e_ideal, mzi_probabilities, ozawa_curves};

struct Csv {
    comments: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Csv {
        let (comments, body): (Vec<&str>, Vec<&str>) = text.lines().partition(|l| l.starts_with('#'));
        let split = |l: &str| l.split(',').map(str::to_owned).collect::<Vec<_>>();
        Csv {
            comments: comments.into_iter().map(str::to_owned).collect(),
            header: split(body[0]),
            rows: body[1..].iter().map(|l| split(l)).collect(),
        }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }

    fn f(&self, row: usize, name: &str) -> f64 {
        self.rows[row][self.col(name)].parse().unwrap()
    }

    fn s(&self, row: usize, name: &str) -> &str {
        &self.rows[row][self.col(name)]
    }
}

/// Settings are written with 12 significant digits, so oracle values
/// recomputed from them agree to about that precision.
fn close(written: f64, recomputed: f64) {
    assert!((written - recomputed).abs() <= 1e-10, "{written} vs {recomputed}");
}

fn render(manifest: &str) -> Csv {
    Csv::parse(&render_results(&parse_config(manifest).unwrap()).unwrap())
}

#[test]
fn interferometer_oracle_columns_follow_from_chi() {
    let csv = render("experiment = \"interferometer\"\nseed = 2\nreflectivity = 0.3\nn_particles = 800\nchi_points = 7\n");
    assert_eq!(csv.rows.len(), 7);
    for i in 0..csv.rows.len() {
        let p = mzi_probabilities(0.3, csv.f(i, "chi"));
        close(csv.f(i, "oracle_p_o"), p.o);
        close(csv.f(i, "oracle_p_h"), p.h);
        close(csv.f(i, "oracle_p_loss"), p.loss);
        let total = csv.f(i, "o_beam") + csv.f(i, "h_beam") + csv.f(i, "lost");
        assert_eq!(total, csv.f(i, "emitted"));
        assert_eq!(csv.s(i, "stream_id"), i.to_string());
    }
}

#[test]
fn bell_oracle_column_follows_from_angles() {
    let csv = render(
        "experiment = \"bell\"\nseed = 3\nn_particles = 400\nalpha_points = 3\nchi_points = 2\nmu_metal_axis = \"x\"\n",
    );
    assert_eq!(csv.rows.len(), 6);
    assert!(csv.comments.iter().any(|c| c.starts_with("# s_max: ")));
    for i in 0..csv.rows.len() {
        let e = bell_e_ideal(csv.f(i, "alpha"), csv.f(i, "chi"), MuMetalAxis::X);
        close(csv.f(i, "oracle_e"), e);
        let n: f64 = ["n_1", "n_2", "n_3", "n_4"].iter().map(|c| csv.f(i, c)).sum();
        let e_sim = (csv.f(i, "n_1") + csv.f(i, "n_2") - csv.f(i, "n_3") - csv.f(i, "n_4")) / n;
        assert_eq!(csv.s(i, "e"), num(e_sim));
    }
}

#[test]
fn ozawa_curves_at_ten_thousand_particles() {
    let csv = render("experiment = \"ozawa\"\nseed = 5\nn_particles = 10000\nphi_points = 7\n");
    assert_eq!(csv.rows.len(), 7);
    for i in 0..csv.rows.len() {
        let o = ozawa_curves(csv.f(i, "phi"));
        close(csv.f(i, "oracle_epsilon"), o.epsilon);
        close(csv.f(i, "oracle_eta"), o.eta);
        assert!((csv.f(i, "epsilon") - o.epsilon).abs() < 0.05, "row {i}");
        assert!((csv.f(i, "eta") - o.eta).abs() < 0.05, "row {i}");
        assert!(csv.f(i, "lhs_ozawa") >= 1.0 - 0.05);
    }
}

#[test]
fn replay_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = \"bell\"\nseed = 8\nn_particles = 300\nalpha_points = 2\nchi_points = 2\n";
    let mut m = parse_config(text).unwrap();
    m.parallelism = 1;
    let a = std::fs::read(run_manifest(&m, &dir.path().join("a")).unwrap()).unwrap();
    m.parallelism = 0;
    let b = std::fs::read(run_manifest(&m, &dir.path().join("b")).unwrap()).unwrap();
    assert_eq!(a, b);
}
