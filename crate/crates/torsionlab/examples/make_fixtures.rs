//! Regenerates the JSON fixtures under `fixtures/`.
//!
//! `cargo run --example make_fixtures [-- OUT_DIR]`

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use torsionlab::cli::input::{CollarDoc, HilbertDoc, Params};
use torsionlab::cli::InputDocument;
use torsionlab::gauge::{pure_gauge_connection, CollarGrid, Wave};
use torsionlab::gluelab::random_split_instance;
use torsionlab::localsys::{circle_holonomy_system, LocalSystem};
use torsionlab::numlin::{c, CMatrix};
use torsionlab::simplicial::generators::{split_circle, split_interval};
use torsionlab::simplicial::{split_input, SimplicialComplex};

fn write(dir: &Path, name: &str, doc: &InputDocument) {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(doc).expect("documents serialize") + "\n";
    std::fs::write(&path, text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn main() {
    let dir: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir).expect("fixture directory");

    let holonomies = [("trivial", 0.0), ("pi", PI), ("half-pi", PI / 2.0), ("two-thirds-pi", 2.0 * PI / 3.0)];
    for n in [3usize, 7, 20] {
        for (pattern, k) in [("arc1", 1), ("balanced", n.div_ceil(2))] {
            for (label, theta) in holonomies {
                let s = split_circle(n, k);
                let sys = circle_holonomy_system(&s.total, theta);
                write(&dir, &format!("circle-{n}-{pattern}-{label}.json"), &InputDocument::from_split(&s, &sys));
            }
        }
    }

    for (n, k) in [(4usize, 2usize), (5, 1)] {
        let s = split_interval(n, k);
        let sys = LocalSystem::trivial(&s.total, 2);
        write(&dir, &format!("interval-{n}-at-{k}.json"), &InputDocument::from_split(&s, &sys));
    }

    // First seed giving a two-dimensional, rank-2 instance.
    let (s, sys) = (0u64..)
        .map(|seed| random_split_instance(seed, 40).expect("random instance"))
        .find(|(s, sys)| s.total.dim() == Some(2) && sys.rank() == 2 && s.interface.total_count() > 1)
        .expect("some seed qualifies");
    write(&dir, "nonmanifold-random.json", &InputDocument::from_split(&s, &sys));

    // Filled triangle whose boundary holonomy is -1: not flat.
    let tri = SimplicialComplex::closure(&[vec![0, 1, 2]]);
    let all: Vec<_> = tri.all_simplices().cloned().collect();
    let p1: Vec<_> = SimplicialComplex::closure(&[vec![0, 1]]).all_simplices().cloned().collect();
    let broken = split_input(tri.clone(), &p1, &all).expect("valid split");
    let mut sys = LocalSystem::trivial(&tri, 1);
    sys.set(0, 2, CMatrix::from_element(1, 1, c(-1.0, 0.0)));
    write(&dir, "broken-nonflat.json", &InputDocument::from_split(&broken, &sys));

    let two_term = HilbertDoc { dims: vec![1, 1], differentials: vec![vec![vec![[2.0, 0.0]]]] };
    write(&dir, "two-term.json", &InputDocument { hilbert_complex: Some(two_term), ..InputDocument::default() });

    let grid = CollarGrid::new(20, 0.01, vec![7], 0.02).expect("grid");
    let gen_a = CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.3, 0.2), c(-0.3, 0.2), c(0.0, -0.5)]);
    let gen_b = CMatrix::from_row_slice(2, 2, &[c(0.0, -0.4), c(0.0, 0.7), c(0.0, 0.7), c(0.0, 0.2)]);
    let factors = [
        (Wave { amplitude: 0.8, wave_numbers: vec![1.3, 0.7], phase: 0.2 }, gen_a),
        (Wave { amplitude: 0.5, wave_numbers: vec![-0.9, 1.1], phase: 1.0 }, gen_b),
    ];
    let conn = pure_gauge_connection(grid, &factors, 1e-12).expect("skew-Hermitian generators");
    let params = Params { curvature_tol: Some(1e-4), temporal_scale: Some(1.0), ..Params::default() };
    write(
        &dir,
        "collar-pure-gauge.json",
        &InputDocument { collar: Some(CollarDoc::from_connection(&conn)), params: Some(params), ..InputDocument::default() },
    );
    println!("fixtures written to {}", dir.display());
}
