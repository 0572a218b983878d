use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use pauli_noise::model_io::{read_model, write_operator};
use pauli_noise::{Complex64, DenseOperator};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pauli-noise"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

fn setup() -> (TempDir, PathBuf) {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().to_path_buf();
    ok(&dir, &["gen", "ez", "--epsilon", "0.1", "-o", "ez.json"]);
    ok(&dir, &["gen", "ez", "--epsilon", "0", "-o", "id.json"]);
    (tmp, dir)
}

#[test]
fn extract_of_target_itself_is_identity_model() {
    let (_tmp, dir) = setup();
    ok(&dir, &["extract", "--unitary", "ez.json", "--target", "ez.json", "-o", "m.json"]);
    let loaded = read_model(&dir.join("m.json")).unwrap();
    assert_eq!(loaded.model.probability(&"I".parse().unwrap()), 1.0);
    assert_eq!(loaded.model.diagnostics().coherent_residual_sq, 0.0);
    let text = std::fs::read_to_string(dir.join("m.json")).unwrap();
    assert_eq!(text.matches("\"label\"").count(), 1);
}

#[test]
fn extract_ez_writes_model_chain_and_coefficients() {
    let (_tmp, dir) = setup();
    ok(
        &dir,
        &[
            "extract", "--unitary", "ez.json", "--target", "id.json", "-o", "m.json", "--stim", "c.stim",
            "--full-coeffs", "w.json",
        ],
    );
    let loaded = read_model(&dir.join("m.json")).unwrap();
    let s = 0.1f64.sin();
    assert!((loaded.model.probability(&"Z".parse().unwrap()) - s * s).abs() < 1e-15);
    let chain = std::fs::read_to_string(dir.join("c.stim")).unwrap();
    assert!(chain.starts_with("CORRELATED_ERROR(") && chain.trim_end().ends_with(" Z0"), "{chain}");
    let coeffs = std::fs::read_to_string(dir.join("w.json")).unwrap();
    assert!(coeffs.contains("coefficient_matrix"));
    assert_eq!(loaded.provenance.sources, ["ez.json", "id.json"]);
    assert_eq!(loaded.provenance.config["subcommand"], "extract");
}

#[test]
fn leakage_swap_through_cli() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let (o, l) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    let swap = DenseOperator::new(DMatrix::from_row_slice(3, 3, &[l, o, o, o, o, l, o, l, o])).unwrap();
    write_operator(&dir.join("swap.json"), &swap, &BTreeMap::new()).unwrap();
    write_operator(&dir.join("id2.json"), &DenseOperator::identity(2).unwrap(), &BTreeMap::new()).unwrap();
    ok(
        dir,
        &["extract", "--unitary", "swap.json", "--target", "id2.json", "--leakage", "0,1", "-o", "m.json"],
    );
    let loaded = read_model(&dir.join("m.json")).unwrap();
    assert_eq!(loaded.model.leakage_weight(), 0.5);
    assert_eq!(loaded.model.probability(&"I".parse().unwrap()), 0.25);
    assert_eq!(loaded.model.probability(&"Z".parse().unwrap()), 0.25);
}

#[test]
fn avg_extract_of_opposite_rotations_is_incoherent() {
    let (_tmp, dir) = setup();
    ok(&dir, &["gen", "ez", "--epsilon", "-0.1", "-o", "ezm.json"]);
    ok(
        &dir,
        &["avg-extract", "--unitary", "ez.json", "--unitary", "ezm.json", "--target", "id.json", "-o", "m.json"],
    );
    let loaded = read_model(&dir.join("m.json")).unwrap();
    assert!(loaded.model.diagnostics().coherent_residual_sq < 1e-24);
    assert_eq!(code(&dir, &["avg-extract", "--unitary", "ez.json", "--weights", "0.5,0.5", "--target", "id.json"]), 2);
}

#[test]
fn distance_and_pauli_channel_generation() {
    let (_tmp, dir) = setup();
    let s = 0.1f64.sin();
    let c = 0.1f64.cos();
    ok(&dir, &["gen", "pauli-channel", "--probs", &format!("I={},Z={}", c * c, s * s), "-o", "pz.json"]);
    let out = ok(&dir, &["distance", "--channel", "ez.json", "--channel", "pz.json"]);
    let d: f64 = out.lines().next().unwrap().split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!((d * d - 2.0 * c * c * s * s).abs() < 1e-14);
    assert_eq!(code(&dir, &["distance", "--channel", "ez.json"]), 2);
}

#[test]
fn triangle_demo_reports_closed_forms() {
    let tmp = TempDir::new().unwrap();
    let out = ok(tmp.path(), &["demo", "triangle", "--epsilon", "0.1"]);
    assert!(out.contains("d(E_Z^Pauli, E_X^Pauli)"));
    assert!(out.contains("2 sin^4 eps"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (_tmp, dir) = setup();
    ok(&dir, &["gen", "random-unitary", "--qubits", "2", "--seed", "7", "-o", "r.json"]);
    ok(&dir, &["gen", "random-unitary", "--qubits", "2", "--seed", "7", "-o", "r2.json"]);
    ok(&dir, &["gen", "ez", "--epsilon", "0", "-o", "id.json"]);
    ok(&dir, &["gen", "random-unitary", "--qubits", "2", "--seed", "8", "-o", "t.json"]);
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap();
    let args = ["extract", "--unitary", "r.json", "--target", "t.json", "-o", "m.json", "--stim", "c.stim"];
    ok(&dir, &args);
    let (model, chain) = (read("m.json"), read("c.stim"));
    ok(&dir, &args);
    assert!(read("r.json") == read("r2.json"));
    assert!(read("m.json") == model);
    assert!(read("c.stim") == chain);
}

#[test]
fn exit_codes() {
    let (_tmp, dir) = setup();
    // Flags are validated before any file is opened.
    assert_eq!(code(&dir, &["extract", "--unitary", "missing.json", "--target", "id.json", "--tol", "0"]), 2);
    assert_eq!(code(&dir, &["extract", "--unitary", "missing.json", "--target", "id.json", "--leakage", "x"]), 2);
    assert_eq!(code(&dir, &["extract", "--unitary", "missing.json", "--target", "id.json"]), 1);
    assert_eq!(code(&dir, &["no-such-command"]), 2);
    std::fs::write(dir.join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(&dir, &["extract", "--unitary", "broken.json", "--target", "id.json"]), 2);
    assert_eq!(code(&dir, &["gen", "random-unitary", "--qubits", "9"]), 2);

    let half = Complex64::new(0.5, 0.0);
    let not_unitary = DenseOperator::new(DMatrix::from_element(2, 2, half)).unwrap();
    write_operator(&dir.join("bad.json"), &not_unitary, &BTreeMap::new()).unwrap();
    assert_eq!(code(&dir, &["extract", "--unitary", "bad.json", "--target", "id.json"]), 3);
}
