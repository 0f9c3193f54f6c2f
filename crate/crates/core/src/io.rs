//! Text formats for fields and reports.
//!
//! A field file is one header line
//!
//! ```text
//! dim 2 extents -1 1 -1 1 nodes 17 17
//! ```
//!
//! followed by one value per line in row-major node order, written with 17
//! significant digits so that export, import and export again reproduce the
//! same bytes.
//!
//! Reports are JSON documents carrying a schema tag, the report body and a
//! reproducibility block.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::monitor::MonitorReport;
use crate::sampling::SamplingPlan;
use crate::solver::SolverSummary;
use crate::theta::{BetaEstimate, ThetaEstimate};

pub fn field_to_string(field: &ScalarField) -> String {
    let g = field.grid();
    let mut out = format!("dim {} extents", g.dim());
    for a in 0..g.dim() {
        write!(out, " {:?} {:?}", g.lo()[a], g.hi()[a]).unwrap();
    }
    out.push_str(" nodes");
    for n in g.nodes() {
        write!(out, " {n}").unwrap();
    }
    out.push('\n');
    for v in field.values() {
        writeln!(out, "{v:.16e}").unwrap();
    }
    out
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn parse_header(line: &str) -> Result<Grid> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let bad = || format_err(format!("malformed field header: {line:?}"));
    if tokens.len() < 2 || tokens[0] != "dim" {
        return Err(bad());
    }
    let dim: usize = tokens[1].parse().map_err(|_| bad())?;
    if !(2..=3).contains(&dim) || tokens.len() != 4 + 3 * dim {
        return Err(bad());
    }
    if tokens[2] != "extents" || tokens[3 + 2 * dim] != "nodes" {
        return Err(bad());
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let mut lo = Vec::with_capacity(dim);
    let mut hi = Vec::with_capacity(dim);
    for a in 0..dim {
        lo.push(num(tokens[3 + 2 * a])?);
        hi.push(num(tokens[4 + 2 * a])?);
    }
    let nodes = tokens[4 + 2 * dim..]
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    Grid::new(lo, hi, nodes).map_err(|e| format_err(format!("invalid grid in header: {e}")))
}

pub fn field_from_str(text: &str) -> Result<ScalarField> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err("empty field file"))?;
    let grid = parse_header(header)?;
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| format_err(format!("unparsable value at node {i}: {line:?}")))?;
        if !v.is_finite() {
            return Err(format_err(format!("non-finite value {v} at node {i}")));
        }
        values.push(v);
    }
    if values.len() != grid.len() {
        return Err(format_err(format!(
            "shape mismatch: header expects {} values, found {}",
            grid.len(),
            values.len()
        )));
    }
    ScalarField::new(grid, values)
}

pub fn export_field(path: impl AsRef<Path>, field: &ScalarField) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, field_to_string(field)).map_err(|e| Error::io(path, e))
}

pub fn import_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    field_from_str(&text)
}

pub const SCHEMA: &str = "garding.report/1";

/// Everything needed to rerun the computation that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproducibility {
    pub seed: u64,
    pub plan: Option<SamplingPlan>,
    pub build: String,
    /// Configuration text the run was started from.
    pub config: String,
}

impl Reproducibility {
    pub fn new(seed: u64, plan: Option<SamplingPlan>, config: impl Into<String>) -> Self {
        Reproducibility {
            seed,
            plan,
            build: build_id(),
            config: config.into(),
        }
    }
}

pub fn build_id() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum ReportBody {
    Audit(AuditReport),
    Theta(ThetaEstimate),
    Beta(BetaEstimate),
    Solver(SolverSummary),
    Monitor(MonitorReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub schema: String,
    #[serde(flatten)]
    pub report: ReportBody,
    pub reproducibility: Reproducibility,
}

impl Document {
    pub fn new(report: ReportBody, reproducibility: Reproducibility) -> Self {
        Document {
            schema: SCHEMA.to_string(),
            report,
            reproducibility,
        }
    }
}

pub fn export_report(doc: &Document) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc).map_err(|e| format_err(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn import_report(text: &str) -> Result<Document> {
    let doc: Document = serde_json::from_str(text).map_err(|e| format_err(format!("invalid report: {e}")))?;
    if doc.schema != SCHEMA {
        return Err(format_err(format!(
            "unsupported report schema {:?}, expected {SCHEMA:?}",
            doc.schema
        )));
    }
    Ok(doc)
}

pub fn write_report(path: impl AsRef<Path>, doc: &Document) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, export_report(doc)?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Document> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    import_report(&text)
}

/// Tab-separated per-radius table of a theta estimate.
pub fn theta_table(est: &ThetaEstimate) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6e}"));
    let mut out = String::from("radius\tsamples\ttheta_hat\tmin_tangent_gap\tmax_abs_numerator\n");
    for r in &est.rows {
        writeln!(
            out,
            "{:e}\t{}\t{}\t{}\t{}",
            r.radius,
            r.samples,
            opt(r.theta_hat),
            opt(r.min_tangent_gap),
            opt(r.max_abs_numerator)
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::{audit_operator, ConditionId};
    use crate::cone::OperatorSpec;

    fn field() -> ScalarField {
        let g = Grid::new(vec![-1.0, 0.0], vec![1.0, 0.3], vec![5, 6]).unwrap();
        ScalarField::from_fn(&g, |x| (x[0] * 3.1).sin() + x[1] / 7.0).unwrap()
    }

    #[test]
    fn field_round_trip_is_byte_identical() {
        let f = field();
        let s = field_to_string(&f);
        let back = field_from_str(&s).unwrap();
        assert_eq!(back, f);
        assert_eq!(field_to_string(&back), s);
    }

    #[test]
    fn truncated_field_reports_counts() {
        let s = field_to_string(&field());
        let cut: String = s.lines().take(10).map(|l| format!("{l}\n")).collect();
        let err = field_from_str(&cut).unwrap_err().to_string();
        assert!(err.contains("expects 30") && err.contains("found 9"), "{err}");
    }

    #[test]
    fn nan_is_rejected_with_node() {
        let s = field_to_string(&field());
        let mut lines: Vec<&str> = s.lines().collect();
        lines[4] = "NaN";
        let err = field_from_str(&lines.join("\n")).unwrap_err().to_string();
        assert!(err.contains("node 3"), "{err}");
    }

    #[test]
    fn bad_header_is_format_error() {
        assert!(matches!(field_from_str("dim 2 extents 0 1\n1\n"), Err(Error::Format(_))));
        assert!(matches!(field_from_str(""), Err(Error::Format(_))));
    }

    #[test]
    fn audit_report_round_trip() {
        let op = OperatorSpec::sigma_k_root(3, 2).unwrap();
        let plan = SamplingPlan {
            count: 20,
            ..SamplingPlan::default()
        };
        let r = audit_operator(&op, ConditionId::Ellipticity, &plan).unwrap();
        let doc = Document::new(ReportBody::Audit(r), Reproducibility::new(0, Some(plan), "seed = 0\n"));
        let text = export_report(&doc).unwrap();
        let back = import_report(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(export_report(&back).unwrap(), text);
        assert!(import_report(&text.replace(SCHEMA, "other/9")).is_err());
    }
}
