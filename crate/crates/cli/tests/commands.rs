use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn peano(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_peano"))
        .args(args)
        .current_dir(dir)
        .env_remove("PEANO_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

/// CSV lines with the comment lines removed.
fn body(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

const SYMMETRIC: &str = r#"
[model]
type = "constant_1d"
gamma = 0.5
psi = [0.0, 0.0]
phi = [2.0, 2.0]
beta = [1.0, 1.0]
regime = "repulsive"

[experiment]
harness = "selection"
seed0 = 7
n_paths = 400
eps = [0.001]
delta = [0.1]

[output]
csv = "out.csv"
"#;

#[test]
fn p_select_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = peano(&["analyze", "p-select", "--gamma", "0.5", "--phi+", "4", "--phi-", "1", "--beta+", "1", "--beta-", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let p = value(&stdout(&o), "p_plus");
    assert!((p - 0.7159).abs() < 5e-5, "{p}");
    assert!((p + value(&stdout(&o), "p_minus") - 1.0).abs() < 1e-12);
}

#[test]
fn long_aliases_and_negative_values() {
    let dir = tempfile::tempdir().unwrap();
    let o = peano(&["analyze", "psi-bar", "--gamma", "0.5", "--phi-plus", "-8", "--phi-minus", "-1", "--psi+", "1", "--psi-", "0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((value(&stdout(&o), "psi_bar") - 0.2).abs() < 1e-12);
}

#[test]
fn pi_mass_symmetric_is_half() {
    let dir = tempfile::tempdir().unwrap();
    let o = peano(&["analyze", "pi-mass", "--gamma", "0.5", "--phi+", "-3", "--phi-", "-3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "mass_plus"), 0.5);
}

#[test]
fn scale_vanishes_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let o = peano(&["analyze", "scale", "--y", "0", "--gamma", "0.5", "--phi+", "4", "--phi-", "1", "--eps", "0.01"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(value(&stdout(&o), "s"), 0.0);
}

#[test]
fn analysis_domain_error_is_status_two() {
    let dir = tempfile::tempdir().unwrap();
    // Repulsive coefficients have no invariant law.
    let o = peano(&["analyze", "pi-mass", "--gamma", "0.5", "--phi+", "2", "--phi-", "2"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = peano(&["analyze", "gamma-asym", "--a", "1", "--eps", "0.001", "--gamma", "1.2", "--delta", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analysis_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["analyze", "gamma-asym", "--a", "4", "--eps", "0.001", "--gamma", "0.5", "--delta", "0.1", "--csv", "g.csv"];
    assert!(peano(&args, dir.path()).status.success());
    assert!(peano(&args, dir.path()).status.success());
    let text = body(&dir.path().join("g.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "analysis,a,eps,gamma,delta,quadrature,asymptotic,relative_gap");
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
}

#[test]
fn exit_bound_reports_limit() {
    let dir = tempfile::tempdir().unwrap();
    let o = peano(&["analyze", "exit-bound", "--gamma", "0.5", "--delta", "0.1", "--eps", "0.001", "--phi-min", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(value(&out, "k2"), 2.0);
    assert!(value(&out, "v") < value(&out, "limit"));
}

#[test]
fn demo_extremals_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let o = peano(&["demo", "--n-paths", "2000"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Y+(1) = 0.25"), "{out}");
    assert!(out.contains("Y-(2) = -1.0"), "{out}");
    let p = value(&out, "estimated p+");
    assert!((p - 0.5).abs() < 1.96 * (0.25f64 / 2000.0).sqrt(), "{p}");
}

#[test]
fn run_writes_provenance_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sym.toml"), SYMMETRIC).unwrap();
    let o = peano(&["run", "sym.toml"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let first = body(&dir.path().join("out.csv"));
    let header = first.lines().next().unwrap();
    assert!(header.starts_with("config_hash,seed0,version,"));
    assert!(header.split(',').any(|c| c == "p_plus_hat"));

    // A second run appends an identical row under the same header.
    assert!(peano(&["run", "sym.toml"], dir.path()).status.success());
    let both = body(&dir.path().join("out.csv"));
    let lines: Vec<&str> = both.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    assert!(fs::read_to_string(dir.path().join("out.csv")).unwrap().starts_with("# "));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sym.toml"), SYMMETRIC).unwrap();
    let run = |workers: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_peano"))
            .args(["run", "sym.toml", "--output", out])
            .current_dir(dir.path())
            .env("PEANO_WORKERS", workers)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        body(&dir.path().join(out))
    };
    assert_eq!(run("1", "a.csv"), run("3", "b.csv"));
}

#[test]
fn gamma_out_of_range_is_status_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), SYMMETRIC.replace("gamma = 0.5", "gamma = 1.5")).unwrap();
    let o = peano(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma = 1.5 must lie in the open interval (0, 1)"), "{}", stderr(&o));
    assert!(!dir.path().join("out.csv").exists());
}

#[test]
fn missing_seed_is_status_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), SYMMETRIC.replace("seed0 = 7\n", "")).unwrap();
    let o = peano(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed0"));
}

#[test]
fn unknown_key_and_missing_file_are_status_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), SYMMETRIC.replace("n_paths = 400", "n_paths = 400\nnpaths = 3")).unwrap();
    assert_eq!(peano(&["run", "bad.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(peano(&["run", "absent.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(peano(&["analyze", "p-select", "--gamma", "x"], dir.path()).status.code(), Some(2));
}

#[test]
fn failed_assumption_check_is_status_two() {
    let dir = tempfile::tempdir().unwrap();
    // Attractive coefficients declared as repulsive.
    fs::write(dir.path().join("bad.toml"), SYMMETRIC.replace("phi = [2.0, 2.0]", "phi = [-2.0, 2.0]")).unwrap();
    let o = peano(&["validate", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("[FAIL] regime-sign"), "{}", stdout(&o));
    assert_eq!(peano(&["run", "bad.toml"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("good.toml"), SYMMETRIC).unwrap();
    assert!(peano(&["validate", "good.toml"], dir.path()).status.success());
}

#[test]
fn divergence_is_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[model]
type = "constant_1d"
gamma = 0.5
psi = [1.0, 0.0]
phi = [-1e200, -1e200]
beta = [1.0, 1.0]
regime = "attractive"

[experiment]
harness = "attraction"
seed0 = 1
n_paths = 4
eps = [0.1]
horizon = 10.0
policy = { base_dt = 1.0, rule = "uniform" }
"#;
    fs::write(dir.path().join("blow.toml"), cfg).unwrap();
    let o = peano(&["run", "blow.toml"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn path_dumps_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SYMMETRIC.replace("csv = \"out.csv\"", "csv = \"out.csv\"\ndump_paths = 2\ndump_dir = \"p\"");
    fs::write(dir.path().join("sym.toml"), cfg).unwrap();
    assert!(peano(&["run", "sym.toml"], dir.path()).status.success());
    for seed in [7, 8] {
        let text = fs::read_to_string(dir.path().join(format!("p/path_{seed}.csv"))).unwrap();
        assert!(text.starts_with("t,x_1,y\n"));
    }
    assert!(!dir.path().join("p/path_9.csv").exists());
}
