//! Orchestration of one configured run.
//!
//! Artifacts written to the output directory, per command:
//!
//! | command          | files                                                |
//! |------------------|------------------------------------------------------|
//! | `audit`          | `audit-<ID>.json` per condition                      |
//! | `verify-theorem` | `theta.json`, `theta.tsv`, `beta-r<R>.json` per radius |
//! | `solve`          | `solution.field`, `state.json`, `monitor.json`       |
//! | `manufacture`    | `exact.field`, `psi.field`                           |
//! | `monitor`        | `monitor.json`                                       |
//!
//! Output depends only on the configuration and seed, so repeated runs
//! produce identical bytes.

use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::audit::{audit_operator, audit_tensor, check_tangent_compactness, AuditReport, ConditionId, Verdict};
use crate::config::{BoundaryConfig, Command, EulerPolicy, Method, PsiConfig, RunConfig, SubsolutionKind};
use crate::cone::EigenTuple;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::io::{export_field, import_field, read_report, theta_table, write_report, Document, ReportBody, Reproducibility};
use crate::manufacture::{bump_subsolution, manufacture};
use crate::monitor::{monitor, MonitorReport};
use crate::plugins::{PsiBase, PsiSpec};
use crate::solver::{continuation_solve, newton_solve, ProblemSpec, SolverState};
use crate::theta::{beta_r, estimate_theta, BetaEstimate, ThetaEstimate};

fn document(cfg: &RunConfig, body: ReportBody) -> Document {
    Document::new(body, Reproducibility::new(cfg.seed, Some(cfg.sampling), cfg.source.clone()))
}

/// Resolves a configured path against the directory of the configuration.
fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

/// A run: configuration, command and the directory relative input paths are
/// resolved against.
pub struct Run<'a> {
    pub config: &'a RunConfig,
    pub command: Command,
    pub base: Option<&'a Path>,
}

impl<'a> Run<'a> {
    pub fn new(config: &'a RunConfig, command: Command) -> Self {
        Run {
            config,
            command,
            base: None,
        }
    }

    fn input(&self, p: &Path) -> PathBuf {
        resolve(self.base, p)
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    /// Executes the command and returns the paths written.
    pub fn execute(&self) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.config.out).map_err(|e| Error::io(&self.config.out, e))?;
        match self.command {
            Command::Audit => self.audit(),
            Command::VerifyTheorem => self.verify_theorem(),
            Command::Solve => self.solve(),
            Command::Manufacture => self.manufacture(),
            Command::Monitor => self.monitor(),
        }
    }

    fn write(&self, name: &str, body: ReportBody, written: &mut Vec<PathBuf>) -> Result<()> {
        let path = self.out(name);
        write_report(&path, &document(self.config, body))?;
        written.push(path);
        Ok(())
    }

    fn audit_one(&self, cond: ConditionId) -> Result<AuditReport> {
        let cfg = self.config;
        let op = &cfg.operator;
        if cond == ConditionId::TangentCompact {
            let (sigma, lambda) = match &cfg.audit.tangent {
                Some(t) => (t.sigma, EigenTuple::new(t.lambda.clone())?),
                None => {
                    let one = EigenTuple::diagonal(op.n, 1.0)?;
                    (op.eval(&one)?, EigenTuple::diagonal(op.n, 2.0)?)
                }
            };
            return check_tangent_compactness(op, sigma, &lambda, cfg.audit.probe_radius, &cfg.sampling);
        }
        if cond.is_operator() {
            return audit_operator(op, cond, &cfg.sampling);
        }
        let psi = self.psi()?;
        audit_tensor(&cfg.tensor, &psi, op.n, cond, &cfg.sampling, &cfg.audit.growth)
    }

    fn audit(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for &cond in &self.config.audit.conditions {
            let report = self.audit_one(cond)?;
            info!(
                "{}: {:?} over {} samples, worst margin {:?}",
                cond.id(),
                report.verdict,
                report.samples,
                report.worst_margin
            );
            self.write(&format!("audit-{}.json", cond.id()), ReportBody::Audit(report), &mut written)?;
        }
        Ok(written)
    }

    pub fn theta(&self) -> Result<ThetaEstimate> {
        let cfg = self.config;
        if let Some(p) = &cfg.monitor.theta_report {
            if self.command != Command::VerifyTheorem {
                let doc = read_report(self.input(p))?;
                return match doc.report {
                    ReportBody::Theta(t) => Ok(t),
                    _ => Err(Error::Format(format!("{} does not hold a theta estimate", p.display()))),
                };
            }
        }
        let t = &cfg.theta;
        estimate_theta(&cfg.operator, &t.k_points, t.band, &t.r_grid, &cfg.sampling)
    }

    pub fn beta(&self) -> Result<Vec<BetaEstimate>> {
        let cfg = self.config;
        let t = &cfg.theta;
        t.beta_radii
            .iter()
            .map(|&r| beta_r(&cfg.operator, &t.beta_mu, t.beta_sigma, r, &cfg.sampling))
            .collect()
    }

    fn verify_theorem(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let est = self.theta()?;
        for row in &est.rows {
            info!("R = {:e}: theta_hat {:?}", row.radius, row.theta_hat);
        }
        let table = self.out("theta.tsv");
        std::fs::write(&table, theta_table(&est)).map_err(|e| Error::io(&table, e))?;
        self.write("theta.json", ReportBody::Theta(est), &mut written)?;
        written.push(table);
        for b in self.beta()? {
            info!("R = {:e}: beta {:?}", b.radius, b.beta);
            self.write(&format!("beta-r{}.json", b.radius), ReportBody::Beta(b), &mut written)?;
        }
        Ok(written)
    }

    fn load_table(&self, p: &Path) -> Result<ScalarField> {
        let f = import_field(self.input(p))?;
        if f.grid() != &self.config.grid {
            return Err(Error::InvalidInput(format!("{} lives on a different grid", p.display())));
        }
        Ok(f)
    }

    /// `u*` and `ψ` of the configured manufactured problem.
    pub fn manufactured(&self) -> Result<(ScalarField, ScalarField)> {
        let cfg = self.config;
        let exact = cfg.manufacture.solution(cfg.manufacture.exact, cfg.grid.dim());
        manufacture(&cfg.grid, &cfg.operator, &cfg.tensor, &exact, cfg.manufacture.psi_mode)
    }

    pub fn psi(&self) -> Result<PsiSpec> {
        let psi = match &self.config.psi {
            PsiConfig::Constant(v) => PsiSpec::Constant(*v),
            PsiConfig::Table(p) => PsiSpec::Table(self.load_table(p)?),
            PsiConfig::Separable { value, table, m } => PsiSpec::Separable {
                base: match table {
                    Some(p) => PsiBase::Table(self.load_table(p)?),
                    None => PsiBase::Constant(*value),
                },
                m: *m,
            },
            PsiConfig::Manufactured => PsiSpec::Table(self.manufactured()?.1),
        };
        psi.validate()?;
        Ok(psi)
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let cfg = self.config;
        let phi = match &cfg.problem.boundary {
            BoundaryConfig::Exact(kind) => {
                let exact = cfg.manufacture.solution(*kind, cfg.grid.dim());
                ScalarField::from_fn(&cfg.grid, |x| exact.value(x))?
            }
            BoundaryConfig::Field(p) => self.load_table(p)?,
        };
        let sub = match cfg.problem.subsolution {
            SubsolutionKind::Boundary => phi.clone(),
            SubsolutionKind::Bump => bump_subsolution(&phi, cfg.problem.bump)?,
        };
        ProblemSpec::new(cfg.operator, cfg.tensor, self.psi()?, phi, sub)
    }

    fn euler_check(&self) -> Result<()> {
        let report = audit_operator(&self.config.operator, ConditionId::EulerSum, &self.config.sampling)?;
        if report.verdict == Verdict::Violated {
            let msg = format!(
                "operator violates {} (worst margin {:?}); boundary estimates do not apply",
                ConditionId::EulerSum.id(),
                report.worst_margin
            );
            match self.config.solver.euler_policy {
                EulerPolicy::Warn => warn!("{msg}"),
                EulerPolicy::Refuse => return Err(Error::Usage(msg)),
            }
        }
        Ok(())
    }

    /// Solves the configured problem.
    pub fn solve_state(&self) -> Result<(ProblemSpec, SolverState)> {
        let cfg = self.config;
        self.euler_check()?;
        let prob = self.problem()?;
        if cfg.solver.assert_subsolution {
            prob.assert_subsolution()?;
        }
        if !prob.comparison_regime() {
            warn!("psi or tensor is not monotone in u; solutions need not be unique");
        }
        let state = match cfg.solver.method {
            Method::Continuation => continuation_solve(&prob, &cfg.solver.continuation)?,
            Method::Newton => newton_solve(&prob, &prob.subsolution, &cfg.solver.newton)?,
        };
        info!(
            "solved: {} Newton iterations, residual {:e}, margin {:e}",
            state.iterate, state.residual_norm, state.admissibility_margin
        );
        Ok((prob, state))
    }

    fn monitor_report(&self, prob: &ProblemSpec, state: &SolverState) -> Result<MonitorReport> {
        let theta = self.theta()?;
        let report = monitor(prob, state, &theta, &self.config.monitor.options)?;
        info!(
            "monitor: {:?}, {} violations among {} nodes",
            report.basic1.status, report.basic1.violations, report.basic1.nodes_tested
        );
        Ok(report)
    }

    fn solve(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let (prob, state) = self.solve_state()?;
        let field = self.out("solution.field");
        export_field(&field, &state.u)?;
        written.push(field);
        self.write("state.json", ReportBody::Solver(state.summary()), &mut written)?;
        let report = self.monitor_report(&prob, &state)?;
        self.write("monitor.json", ReportBody::Monitor(report), &mut written)?;
        Ok(written)
    }

    fn manufacture(&self) -> Result<Vec<PathBuf>> {
        let (u, psi) = self.manufactured()?;
        let exact = self.out("exact.field");
        let table = self.out("psi.field");
        export_field(&exact, &u)?;
        export_field(&table, &psi)?;
        Ok(vec![exact, table])
    }

    fn monitor(&self) -> Result<Vec<PathBuf>> {
        let cfg = self.config;
        let path = cfg
            .monitor
            .field
            .as_ref()
            .ok_or_else(|| Error::Usage("the monitor command needs monitor.field".into()))?;
        let u = self.load_table(path)?;
        let prob = self.problem()?;
        let state = SolverState::from_field(&prob, u, cfg.monitor.tol)?;
        if !state.converged {
            return Err(Error::Usage(format!(
                "stored field has residual {:e} above monitor.tol = {:e}",
                state.residual_norm, cfg.monitor.tol
            )));
        }
        let mut written = Vec::new();
        let report = self.monitor_report(&prob, &state)?;
        self.write("monitor.json", ReportBody::Monitor(report), &mut written)?;
        Ok(written)
    }
}

/// Runs the configuration's own command.
pub fn run(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let command = config
        .command
        .ok_or_else(|| Error::Usage("configuration names no command".into()))?;
    Run::new(config, command).execute()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::io::{import_field, read_report};

    fn config(text: &str, out: &Path) -> RunConfig {
        let mut c = parse_config(text).unwrap();
        c.out = out.to_path_buf();
        c
    }

    #[test]
    fn verify_theorem_defaults_give_three_radii() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(
            "command = \"verify-theorem\"\n[operator]\nn = 3\nk = 2\n[sampling]\ncount = 200\n",
            dir.path(),
        );
        run(&c).unwrap();
        let tsv = std::fs::read_to_string(dir.path().join("theta.tsv")).unwrap();
        assert_eq!(tsv.lines().count(), 4);
        let doc = read_report(dir.path().join("theta.json")).unwrap();
        assert!(matches!(doc.report, ReportBody::Theta(ref t) if t.rows.len() == 3));
        assert!(dir.path().join("beta-r10.json").exists());
    }

    #[test]
    fn solve_quadratic_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(
            "command = \"solve\"\n[grid]\nnodes = 9\n[problem]\nsubsolution = \"bump\"\n[sampling]\ncount = 100\n[theta]\nr_grid = [10.0]\n",
            dir.path(),
        );
        run(&c).unwrap();
        let u = import_field(dir.path().join("solution.field")).unwrap();
        let exact = ScalarField::from_fn(u.grid(), |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        assert!(u.max_abs_diff(&exact) <= 1e-8);
        let doc = read_report(dir.path().join("monitor.json")).unwrap();
        assert!(matches!(doc.report, ReportBody::Monitor(_)));
    }

    #[test]
    fn manufacture_then_monitor_stored_field() {
        let dir = tempfile::tempdir().unwrap();
        let text = "[grid]\nnodes = 9\n[psi]\nfamily = \"manufactured\"\n[manufacture]\nexact = \"trigonometric\"\npsi_mode = \"discrete\"\n[sampling]\ncount = 100\n[theta]\nr_grid = [10.0]\n[monitor]\nfield = \"exact.field\"\n";
        let c = config(text, dir.path());
        Run::new(&c, Command::Manufacture).execute().unwrap();
        let mut m = Run::new(&c, Command::Monitor);
        m.base = Some(dir.path());
        m.execute().unwrap();
        assert!(dir.path().join("monitor.json").exists());
    }

    #[test]
    fn refuse_policy_accepts_euler_sum_operator() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(
            "command = \"solve\"\n[operator]\nfamily = \"log-p-k\"\nk = 1\n[grid]\nnodes = 7\n[solver]\neuler_policy = \"refuse\"\n[sampling]\ncount = 100\n[theta]\nr_grid = [10.0]\n",
            dir.path(),
        );
        run(&c).unwrap();
    }

    #[test]
    fn missing_command_is_usage_error() {
        let c = parse_config("seed = 1\n").unwrap();
        assert!(matches!(run(&c), Err(Error::Usage(_))));
    }
}
