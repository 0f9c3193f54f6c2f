use std::path::Path;
use std::process::{Command, Output};

fn garding(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_garding")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "[grid]\nnodes = 9\n[problem]\nsubsolution = \"bump\"\n[sampling]\ncount = 100\n[theta]\nr_grid = [10.0]\n";

#[test]
fn solve_writes_artifacts_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &format!("out = \"res\"\n{SMALL}"));
    let out = garding(&["solve", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["solution.field", "state.json", "monitor.json"] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);
}

#[test]
fn quiet_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.toml", "[sampling]\ncount = 50\n[audit]\nconditions = [\"C3I-20\"]\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = garding(&["audit", "--config", &cfg, "--out", a.to_str().unwrap(), "--quiet", "--seed", "5"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty() && out.stderr.is_empty());
    garding(&["audit", "--config", &cfg, "--out", b.to_str().unwrap(), "--quiet", "--seed", "6"]);
    let ra = std::fs::read_to_string(a.join("audit-C3I-20.json")).unwrap();
    let rb = std::fs::read_to_string(b.join("audit-C3I-20.json")).unwrap();
    assert!(ra.contains("\"seed\": 5") && rb.contains("\"seed\": 6"));
    assert_ne!(ra, rb);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "[operator]\nn = 3\nk = 2\n[sampling]\ncount = 300\n");
    let outs: Vec<String> = ["x", "y"]
        .iter()
        .map(|d| {
            let p = dir.path().join(d);
            assert!(garding(&["verify-theorem", "--config", &cfg, "--out", p.to_str().unwrap()]).status.success());
            std::fs::read_to_string(p.join("theta.json")).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[operator]\nn = 3\nk = 4\n[grid]\nfoo = 1\n");
    let out = garding(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("k ≤ n") && err.contains("unknown key \"foo\""), "{err}");
    let cfg = write(dir.path(), "cmd.toml", "command = \"audit\"\n");
    assert_eq!(garding(&["solve", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn inadmissible_boundary_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut field = String::from("dim 2 extents -1.0 1.0 -1.0 1.0 nodes 9 9\n");
    for i in 0..81 {
        let (x, y) = (-1.0 + 0.25 * (i / 9) as f64, -1.0 + 0.25 * (i % 9) as f64);
        field.push_str(&format!("{:e}\n", -0.5 * (x * x + y * y)));
    }
    write(dir.path(), "phi.field", &field);
    let cfg = write(dir.path(), "c.toml", &format!("{SMALL}\n").replace("subsolution = \"bump\"", "boundary = \"field\"\nboundary_field = \"phi.field\""));
    let out = garding(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn nonconvergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{SMALL}[solver]\nmethod = \"newton\"\nmax_iter = 1\n"));
    let out = garding(&["solve", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_input_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{SMALL}[monitor]\nfield = \"absent.field\"\n"));
    assert_eq!(garding(&["monitor", "--config", &cfg]).status.code(), Some(5));
    let missing = dir.path().join("none.toml");
    assert_eq!(garding(&["solve", "--config", missing.to_str().unwrap()]).status.code(), Some(5));
}
