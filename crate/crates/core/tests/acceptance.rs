//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use garding::audit::{audit_operator, audit_tensor, ConditionId, GrowthSpec, Verdict};
use garding::cone::{elementary_all, ConeSpec, EigenTuple, OperatorSpec};
use garding::config::{parse_config, Command};
use garding::io::{export_report, import_report, Document, ReportBody, Reproducibility};
use garding::manufacture::{bump_subsolution, manufacture, ExactSolution, PsiMode};
use garding::monitor::{monitor, Basic1Status, MonitorOptions};
use garding::sampling::{gaussian_vector, unit_vector, SamplingPlan};
use garding::solver::{continuation_solve, newton_solve, ContinuationOptions, NewtonOptions, ProblemSpec};
use garding::spectral::{spectral_eval, spectral_eval_grad, sym_eigen, SymMatrix};
use garding::theta::{beta_r, estimate_theta};
use garding::{ATensorSpec, Grid, PsiSpec, Run, ScalarField};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

/// Calls `visit` with every `k`-subset of `0..n`, by bitmask.
fn subsets(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            let s: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            visit(&s);
        }
    }
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn families(n: usize) -> Vec<OperatorSpec> {
    let k = n.div_ceil(2).max(2).min(n);
    vec![
        OperatorSpec::sigma_k_root(n, k).unwrap(),
        OperatorSpec::sigma_ratio(n, n, n - 1).unwrap(),
        OperatorSpec::log_p_k(n, n - 1).unwrap(),
    ]
}

/// Admissible point spread over directions and scales.
fn admissible(cone: &ConeSpec, rng: &mut impl Rng) -> Vec<f64> {
    let n = cone.n;
    loop {
        let s = rng.random_range(0.0..1.2);
        let g = unit_vector(n, rng);
        let r = (rng.random_range(-2.0f64..2.0) * std::f64::consts::LN_10).exp();
        let p: Vec<f64> = g.iter().map(|v| r * (1.0 / (n as f64).sqrt() + s * v)).collect();
        if cone.contains(&EigenTuple::new(p.clone()).unwrap()).unwrap().inside {
            return p;
        }
    }
}

fn sigma_k_oracle() -> Outcome {
    let plan = SamplingPlan::default();
    let mut worst_rel = 0.0f64;
    let mut cases = 0;
    for n in 1..=8 {
        for i in 0..200 {
            let mut rng = plan.stream(&format!("c1/{n}"), i);
            let ints: Vec<i64> = (0..n).map(|_| rng.random_range(-9..=9)).collect();
            let reals: Vec<f64> = gaussian_vector(n, &mut rng).iter().map(|v| 5.0 * v).collect();
            let rec_int = elementary_all(&ints.iter().map(|&v| v as f64).collect::<Vec<_>>(), n);
            let rec_real = elementary_all(&reals, n);
            for k in 0..=n {
                let mut exact = 0i64;
                let mut sum = 0.0;
                let mut scale = 0.0;
                subsets(n, k, |s| {
                    exact += s.iter().map(|&j| ints[j]).product::<i64>();
                    let t: f64 = s.iter().map(|&j| reals[j]).product();
                    sum += t;
                    scale += t.abs();
                });
                if rec_int[k] != exact as f64 {
                    return Err(format!("n = {n}, k = {k}: recurrence {} vs enumeration {exact}", rec_int[k]));
                }
                let rel = (rec_real[k] - sum).abs() / scale.max(f64::MIN_POSITIVE);
                worst_rel = worst_rel.max(rel);
                cases += 1;
            }
        }
    }
    check(
        worst_rel <= 1e-12,
        format!("{cases} (n, k, λ) cases exact in integers; worst float relative error {worst_rel:.2e}"),
    )
}

fn gradient_checks() -> Outcome {
    let plan = SamplingPlan::default();
    let mut worst_f = 0.0f64;
    let mut worst_big_f = 0.0f64;
    let total = 1000;
    for i in 0..total {
        let n = 2 + i % 3;
        let op = families(n)[(i / 3) % 3];
        let cone = op.cone();
        let mut rng = plan.stream("c2", i);
        let lam = admissible(&cone, &mut rng);
        let g = op.grad(&EigenTuple::new(lam.clone()).unwrap()).unwrap();
        let scale = lam.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let gmax = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let h = 1e-6 * scale;
        for j in 0..n {
            let mut p = lam.clone();
            let mut m = lam.clone();
            p[j] += h;
            m[j] -= h;
            let fd = (op.eval(&EigenTuple::new(p).unwrap()).unwrap() - op.eval(&EigenTuple::new(m).unwrap()).unwrap())
                / (2.0 * h);
            worst_f = worst_f.max((fd - g[j]).abs() / gmax);
        }
        // F^{ij} against differences of F(B) along symmetric unit perturbations.
        let entries = gaussian_vector(n * n, &mut rng);
        let q = sym_eigen(&SymMatrix::from_fn(n, |a, b| entries[a.min(b) * n + a.max(b)])).unwrap().frame;
        let b = SymMatrix::from_diagonal(&lam).conjugate(&q);
        let ev = spectral_eval_grad(&op, &b).unwrap();
        let fmax = ev.grad.max_abs().max(gmax);
        for a in 0..n {
            for c in a..n {
                let mut e = SymMatrix::zeros(n);
                e.set(a, c, 1.0);
                let mult = if a == c { 1.0 } else { 2.0 };
                let fd = (spectral_eval(&op, &b.plus(&e.scaled(h))).unwrap() - spectral_eval(&op, &b.minus(&e.scaled(h))).unwrap())
                    / (2.0 * h);
                worst_big_f = worst_big_f.max((fd - mult * ev.grad.get(a, c)).abs() / (mult * fmax));
            }
        }
    }
    check(
        worst_f <= 1e-6 && worst_big_f <= 1e-6,
        format!("{total} points, n in 2..=4, three families: worst f_grad rel {worst_f:.2e}, worst F_grad rel {worst_big_f:.2e}"),
    )
}

fn concavity_suite() -> Outcome {
    let plan = SamplingPlan {
        seed: 11,
        count: 10_000,
        ..SamplingPlan::default()
    };
    let mut details = Vec::new();
    let mut ok = true;
    for op in families(4) {
        let report = audit_operator(&op, ConditionId::Concavity, &plan).unwrap();
        let cone = op.cone();
        let mut worst_tangent = f64::INFINITY;
        for i in 0..plan.count {
            let mut rng = plan.stream("c3/tangent", i);
            let l = EigenTuple::new(admissible(&cone, &mut rng)).unwrap();
            let m = EigenTuple::new(admissible(&cone, &mut rng)).unwrap();
            worst_tangent = worst_tangent.min(op.tangent_gap(&l, &m).unwrap());
        }
        let mid = report.worst_margin.unwrap_or(f64::NEG_INFINITY);
        ok &= report.samples == plan.count && mid >= -1e-10 && worst_tangent >= -1e-10;
        details.push(format!("{:?} midpoint {mid:.2e} tangent {worst_tangent:.2e}", op.family));
    }
    check(ok, format!("10^4 pairs each: {}", details.join("; ")))
}

fn theta_estimate_config(seed: u64) -> String {
    format!(
        "command = \"verify-theorem\"\nseed = {seed}\n[operator]\nn = 3\nk = 2\n[sampling]\ncount = 10000\n[theta]\nk_points = [[1.0, 1.0, 1.0]]\nband = [0.5, 2.0]\nr_grid = [10.0, 100.0, 1000.0]\nbeta_radii = [10.0, 100.0]\nbeta_sigma = {}\n",
        3f64.sqrt()
    )
}

fn theta_verification() -> Outcome {
    let cfg = parse_config(&theta_estimate_config(2024)).unwrap();
    let est = estimate_theta(&cfg.operator, &cfg.theta.k_points, cfg.theta.band, &cfg.theta.r_grid, &cfg.sampling)
        .map_err(|e| e.to_string())?;
    let hats = est.theta_hat();
    let last = hats.last().copied().flatten();
    let control = OperatorSpec::sigma_k_root(3, 1).unwrap();
    let lin = estimate_theta(&control, &cfg.theta.k_points, cfg.theta.band, &cfg.theta.r_grid, &cfg.sampling)
        .map_err(|e| e.to_string())?;
    let lin_max = lin.rows.iter().filter_map(|r| r.max_abs_numerator).fold(0.0, f64::max);
    let lin_all = lin.rows.iter().all(|r| r.max_abs_numerator.is_some());
    check(
        last.is_some_and(|t| t > 0.0) && est.nondecreasing(1e-3) && lin_all && lin_max <= 1e-10,
        format!("theta_hat over R = 10, 100, 1000: {hats:?}; sigma_1 control max |numerator| {lin_max:.2e}"),
    )
}

fn beta_monotone() -> Outcome {
    let op = OperatorSpec::sigma_k_root(3, 2).unwrap();
    let mu = EigenTuple::diagonal(3, 1.0).unwrap();
    let plan = SamplingPlan {
        seed: 2024,
        count: 10_000,
        ..SamplingPlan::default()
    };
    let b10 = beta_r(&op, &mu, 3f64.sqrt(), 10.0, &plan).map_err(|e| e.to_string())?;
    let b100 = beta_r(&op, &mu, 3f64.sqrt(), 100.0, &plan).map_err(|e| e.to_string())?;
    let (x, y) = (b10.beta, b100.beta);
    check(y <= x + 1e-3 && x < 1.0 && y < 1.0, format!("beta_10 = {x:.6}, beta_100 = {y:.6}"))
}

fn quadratic_ma() -> ProblemSpec {
    let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
    let phi = ScalarField::from_fn(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
    let sub = bump_subsolution(&phi, 0.1).unwrap();
    ProblemSpec::new(OperatorSpec::sigma_k_root(2, 2).unwrap(), ATensorSpec::Zero, PsiSpec::Constant(1.0), phi, sub)
        .unwrap()
}

fn quadratic_exactness() -> Outcome {
    let prob = quadratic_ma();
    let state = newton_solve(&prob, &prob.subsolution, &NewtonOptions::default()).map_err(|e| e.to_string())?;
    let err = state.u.max_abs_diff(&prob.boundary);
    let all_admissible = state.history.iter().all(|h| h.admissibility_margin > 0.0);
    check(
        state.converged && err <= 1e-8 && state.iterate <= 8 && all_admissible,
        format!(
            "17^2 from a bump start: {} Newton iterations, max error {err:.2e}, every iterate admissible: {all_admissible}",
            state.iterate
        ),
    )
}

fn exponential_problem(nodes: usize) -> ProblemSpec {
    let g = Grid::cube(2, -0.5, 0.5, nodes).unwrap();
    let op = OperatorSpec::sigma_k_root(2, 2).unwrap();
    let exact = ExactSolution::ExponentialRadial;
    let (u, psi) = manufacture(&g, &op, &ATensorSpec::Zero, &exact, PsiMode::Analytic).unwrap();
    ProblemSpec::new(op, ATensorSpec::Zero, PsiSpec::Table(psi), u.clone(), u).unwrap()
}

fn convergence_order() -> Outcome {
    let mut errors = Vec::new();
    for nodes in [17, 33, 65] {
        let prob = exponential_problem(nodes);
        let state = continuation_solve(&prob, &ContinuationOptions::default()).map_err(|e| e.to_string())?;
        errors.push(state.u.max_abs_diff(&prob.boundary));
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    check(
        ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!(
            "errors {:.3e}, {:.3e}, {:.3e} on 17^2, 33^2, 65^2; ratios {:.3}, {:.3}",
            errors[0], errors[1], errors[2], ratios[0], ratios[1]
        ),
    )
}

fn mtw_problem() -> ProblemSpec {
    let g = Grid::cube(3, -1.0, 1.0, 17).unwrap();
    let phi = ScalarField::from_fn(&g, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>()).unwrap();
    ProblemSpec::new(
        OperatorSpec::sigma_k_root(3, 2).unwrap(),
        ATensorSpec::MtwQuadratic { c: 0.1 },
        PsiSpec::Constant(1.0),
        phi.clone(),
        phi,
    )
    .unwrap()
}

fn mtw_regression() -> Outcome {
    let prob = mtw_problem();
    let state = continuation_solve(&prob, &ContinuationOptions::default()).map_err(|e| e.to_string())?;
    let margin_ok = state.continuation.iter().all(|c| c.admissibility_margin > 0.0)
        && state.history.iter().all(|h| h.admissibility_margin > 0.0)
        && state.admissibility_margin > 0.0;
    let plan = SamplingPlan {
        seed: 8,
        ..SamplingPlan::default()
    };
    let growth = GrowthSpec::default();
    let mut verdicts = Vec::new();
    let mut audits_ok = true;
    let mut c0 = f64::NAN;
    for cond in [ConditionId::PConcavity, ConditionId::Mtw, ConditionId::ZMonotone] {
        let r = audit_tensor(&prob.tensor, &prob.psi, 3, cond, &plan, &growth).map_err(|e| e.to_string())?;
        audits_ok &= r.verdict == Verdict::Holds;
        if cond == ConditionId::Mtw {
            c0 = r.estimate.unwrap_or(f64::NAN);
        }
        verdicts.push(format!("{} {:?}", cond.id(), r.verdict));
    }
    check(
        state.t == 1.0 && state.residual_norm <= 1e-8 && margin_ok && audits_ok && (c0 - 0.1).abs() <= 1e-9,
        format!(
            "17^3: t = {}, residual {:.2e}, {} continuation steps, margin positive throughout: {margin_ok}; {}; c0 = {c0:.12}",
            state.t,
            state.residual_norm,
            state.continuation.len(),
            verdicts.join(", ")
        ),
    )
}

fn monitor_on_manufactured() -> Outcome {
    let prob = exponential_problem(65);
    let state = continuation_solve(&prob, &ContinuationOptions::default()).map_err(|e| e.to_string())?;
    let plan = SamplingPlan {
        seed: 9,
        ..SamplingPlan::default()
    };
    let est = estimate_theta(&prob.operator, &[EigenTuple::diagonal(2, 1.0).unwrap()], [0.5, 2.0], &[10.0, 100.0, 1000.0], &plan)
        .map_err(|e| e.to_string())?;
    let doc = Document::new(ReportBody::Theta(est), Reproducibility::new(plan.seed, Some(plan), ""));
    let imported = match import_report(&export_report(&doc).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?.report {
        ReportBody::Theta(t) => t,
        _ => return Err("theta document did not round-trip".into()),
    };
    let report = monitor(&prob, &state, &imported, &MonitorOptions::default()).map_err(|e| e.to_string())?;
    let b = &report.basic1;
    let json = serde_json::to_string(&report).unwrap();
    let explicit = json.contains("\"violations\":") && json.contains("\"status\":");
    let detail = format!(
        "65^2 solution, theta {:?}, R_hat {:?}: status {:?}, {} nodes tested, {} violations, max |λ(U)| {:.3}",
        b.theta, b.r_hat, b.status, b.nodes_tested, b.violations, b.max_eigen_norm
    );
    let ok = explicit
        && b.violations == 0
        && match b.status {
            Basic1Status::Checked => b.nodes_tested > 0,
            _ => b.nodes_tested == 0,
        };
    check(ok, detail)
}

fn run_to(dir: &Path, text: &str, command: Command) -> Result<(), String> {
    let mut cfg = parse_config(text).map_err(|e| e.to_string())?;
    cfg.out = dir.to_path_buf();
    Run::new(&cfg, command).execute().map(|_| ()).map_err(|e| e.to_string())
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let runs: [(&str, String, Command); 4] = [
        ("theta", theta_estimate_config(2024), Command::VerifyTheorem),
        (
            "quadratic",
            "command = \"solve\"\n[grid]\nnodes = 17\n[problem]\nsubsolution = \"bump\"\n[solver]\nmethod = \"newton\"\n".into(),
            Command::Solve,
        ),
        (
            "mtw-solve",
            "command = \"solve\"\nseed = 8\n[operator]\nn = 3\nk = 2\n[tensor]\nfamily = \"mtw-quadratic\"\nc = 0.1\n[grid]\nnodes = 17\n".into(),
            Command::Solve,
        ),
        (
            "mtw-audit",
            "seed = 8\n[operator]\nn = 3\nk = 2\n[tensor]\nfamily = \"mtw-quadratic\"\nc = 0.1\n[audit]\nconditions = [\"CA2\", \"CA3\", \"CA4\"]\n".into(),
            Command::Audit,
        ),
    ];
    let mut compared = 0;
    for (name, text, command) in &runs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_to(a.path(), text, *command)?;
        run_to(b.path(), text, *command)?;
        let (fa, fb) = (read_dir_bytes(a.path()), read_dir_bytes(b.path()));
        if fa.is_empty() || fa != fb {
            return Err(format!("{name}: outputs differ between identical runs"));
        }
        compared += fa.len();
    }
    Ok(format!("{compared} report and field files byte-identical across repeated runs"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("sigma_k recurrence vs subset enumeration", sigma_k_oracle),
        ("f_grad and F_grad vs central differences", gradient_checks),
        ("midpoint concavity and tangent gap", concavity_suite),
        ("theta estimate positive and nondecreasing, linear control", theta_verification),
        ("beta_R nonincreasing and below 1", beta_monotone),
        ("quadratic Monge-Ampere exactness", quadratic_exactness),
        ("manufactured convergence order", convergence_order),
        ("MTW tensor continuation and audits", mtw_regression),
        ("interior inequality monitor", monitor_on_manufactured),
        ("determinism of repeated runs", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("{label} PASS {name} ({secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("{label} FAIL {name} ({secs:.1}s): {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
