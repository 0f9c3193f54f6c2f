use garding::config::{parse_config, Command};
use garding::io::{import_field, read_report, ReportBody};
use garding::manufacture::ExactSolution;
use garding::{Run, ScalarField};

fn configured(text: &str, out: &std::path::Path) -> garding::RunConfig {
    let mut c = parse_config(text).unwrap();
    c.out = out.to_path_buf();
    c
}

#[test]
fn manufactured_exponential_radial_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[operator]\nn = 2\n[grid]\nlo = -0.5\nhi = 0.5\nnodes = 33\n[psi]\nfamily = \"manufactured\"\n[manufacture]\nexact = \"exponential-radial\"\n[sampling]\ncount = 100\n[theta]\nr_grid = [10.0]\n";
    let c = configured(text, dir.path());
    Run::new(&c, Command::Manufacture).execute().unwrap();
    Run::new(&c, Command::Solve).execute().unwrap();
    let u = import_field(dir.path().join("solution.field")).unwrap();
    let exact = import_field(dir.path().join("exact.field")).unwrap();
    let analytic = ScalarField::from_fn(u.grid(), |x| ExactSolution::ExponentialRadial.value(x)).unwrap();
    assert_eq!(exact, analytic);
    assert!(u.max_abs_diff(&exact) <= 1e-7, "{}", u.max_abs_diff(&exact));
}

#[test]
fn monitor_report_carries_zero_violation_count() {
    let dir = tempfile::tempdir().unwrap();
    let c = configured("[grid]\nnodes = 9\n[sampling]\ncount = 100\n[theta]\nr_grid = [10.0]\n", dir.path());
    Run::new(&c, Command::Solve).execute().unwrap();
    let text = std::fs::read_to_string(dir.path().join("monitor.json")).unwrap();
    assert!(text.contains("\"violations\": 0"), "{text}");
    let doc = read_report(dir.path().join("monitor.json")).unwrap();
    let ReportBody::Monitor(m) = doc.report else { panic!("not a monitor report") };
    assert_eq!(m.basic1.violations, 0);
    assert_eq!(doc.reproducibility.config, c.source);
}

#[test]
fn monitor_uses_stored_theta_estimate_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[grid]\nnodes = 9\n[sampling]\ncount = 100\n[theta]\nr_grid = [10.0, 100.0, 1000.0]\n";
    let c = configured(base, dir.path());
    Run::new(&c, Command::VerifyTheorem).execute().unwrap();
    Run::new(&c, Command::Solve).execute().unwrap();
    let table = std::fs::read_to_string(dir.path().join("theta.tsv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    let text = format!("{base}[monitor]\ntheta_report = \"theta.json\"\nfield = \"solution.field\"\n");
    let c = configured(&text, dir.path());
    let mut run = Run::new(&c, Command::Monitor);
    run.base = Some(dir.path());
    run.execute().unwrap();
    let doc = read_report(dir.path().join("monitor.json")).unwrap();
    let ReportBody::Monitor(m) = doc.report else { panic!("not a monitor report") };
    let ReportBody::Theta(t) = read_report(dir.path().join("theta.json")).unwrap().report else { panic!() };
    assert_eq!(m.basic1.r_hat, t.r_hat);
}
