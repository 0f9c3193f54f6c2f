//! Run configuration.
//!
//! Configurations are TOML documents with flat sections. Every key below is
//! optional; the value after `=` is the default.
//!
//! ```toml
//! command = "solve"          # audit | verify-theorem | solve | manufacture | monitor
//! seed = 0
//! out = "out"
//!
//! [operator]
//! family = "sigma-k-root"    # sigma-k-root | sigma-ratio | log-p-k
//! n = 2                      # grid.dim when given
//! k = 2                      # n
//! l = 1                      # sigma-ratio only
//!
//! [tensor]
//! family = "zero"            # zero | kappa-u-metric | u-metric | mtw-quadratic
//! kappa = 1.0                # kappa-u-metric only
//! c = 0.1                    # mtw-quadratic only
//!
//! [psi]
//! family = "constant"        # constant | table | separable | manufactured
//! value = 1.0                # constant, separable
//! table = "psi.field"        # table; separable when given
//! m = 0.0                    # separable
//!
//! [grid]
//! dim = 2                    # operator.n when given
//! lo = -1.0                  # scalar or one entry per axis
//! hi = 1.0
//! nodes = 17
//!
//! [problem]
//! boundary = "quadratic"     # quadratic | exponential-radial | trigonometric | field
//! boundary_field = "phi.field"
//! subsolution = "boundary"   # boundary | bump
//! bump = 0.1
//!
//! [solver]
//! method = "continuation"    # continuation | newton
//! tol = 1e-10
//! max_iter = 50              # 25 per continuation step
//! initial_step = 0.1
//! min_step = 1e-4
//! assert_subsolution = false
//! euler_policy = "warn"      # warn | refuse
//!
//! [sampling]
//! count = 1000
//! r_min = 1e-2
//! r_max = 1e2
//! scheme = "uniform-on-cone" # uniform-on-cone | diagonal-biased
//!
//! [audit]
//! conditions = [...]         # every condition id
//! gamma1 = 1.0
//! gamma2 = 1.0
//! gamma = 1.0
//! psi_bar1 = 1.0
//! psi_bar2 = 1.0
//! psi_bar = 1.0
//! c1 = 0.5
//! p_magnitudes = [10.0, 100.0, 1000.0]
//! c0 = 1e-9
//! tangent_sigma = ...        # f(1) at lambda = 2 * 1
//! tangent_lambda = [...]
//! probe_radius = 1e3
//!
//! [theta]
//! k_points = [[1.0, ...]]
//! band = [0.5, 2.0]
//! r_grid = [10.0, 100.0, 1000.0]
//! beta_mu = [1.0, ...]
//! beta_sigma = ...           # f(beta_mu)
//! beta_radii = [10.0, 100.0]
//!
//! [monitor]
//! barrier_t = 0.1
//! barrier_n = 10.0
//! barrier_delta = ...        # min(2t/N, 3h)
//! psi_weights = [1.0, 1.0, 1.0]
//! theta_report = "theta.json" # estimated from [theta] when absent
//! field = "solution.field"   # monitor command input
//! tol = 1e-8                 # residual below which a stored field counts as solved
//!
//! [manufacture]
//! exact = "quadratic"        # quadratic | exponential-radial | trigonometric
//! psi_mode = "discrete"      # discrete | analytic
//! seed = 0                   # top-level seed
//! modes = 3
//! ```
//!
//! Parsing reports every problem it finds, each tagged with its line.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use toml::{Table, Value};

use crate::audit::{ConditionId, GrowthSpec};
use crate::cone::{EigenTuple, Family, OperatorSpec};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::manufacture::{ExactSolution, PsiMode};
use crate::monitor::MonitorOptions;
use crate::plugins::ATensorSpec;
use crate::sampling::{DirectionScheme, SamplingPlan};
use crate::solver::{ContinuationOptions, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Audit,
    VerifyTheorem,
    Solve,
    Manufacture,
    Monitor,
}

impl Command {
    pub const ALL: [Command; 5] = [
        Command::Audit,
        Command::VerifyTheorem,
        Command::Solve,
        Command::Manufacture,
        Command::Monitor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Audit => "audit",
            Command::VerifyTheorem => "verify-theorem",
            Command::Solve => "solve",
            Command::Manufacture => "manufacture",
            Command::Monitor => "monitor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsiConfig {
    Constant(f64),
    Table(PathBuf),
    Separable { value: f64, table: Option<PathBuf>, m: f64 },
    /// Computed from `[manufacture]`.
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactKind {
    Quadratic,
    ExponentialRadial,
    Trigonometric,
}

impl ExactKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "quadratic" => Some(ExactKind::Quadratic),
            "exponential-radial" => Some(ExactKind::ExponentialRadial),
            "trigonometric" => Some(ExactKind::Trigonometric),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryConfig {
    Exact(ExactKind),
    Field(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsolutionKind {
    /// `ū` is the boundary data itself, extended over the grid.
    Boundary,
    /// Boundary data minus a bump vanishing on the boundary.
    Bump,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub boundary: BoundaryConfig,
    pub subsolution: SubsolutionKind,
    pub bump: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Continuation,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerPolicy {
    Warn,
    Refuse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub newton: NewtonOptions,
    pub continuation: ContinuationOptions,
    pub assert_subsolution: bool,
    pub euler_policy: EulerPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentConfig {
    pub sigma: f64,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub conditions: Vec<ConditionId>,
    pub growth: GrowthSpec,
    /// Explicit point for the tangent-compactness check.
    pub tangent: Option<TangentConfig>,
    pub probe_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaConfig {
    pub k_points: Vec<EigenTuple>,
    pub band: [f64; 2],
    pub r_grid: Vec<f64>,
    pub beta_mu: EigenTuple,
    pub beta_sigma: f64,
    pub beta_radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub options: MonitorOptions,
    pub theta_report: Option<PathBuf>,
    pub field: Option<PathBuf>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufactureConfig {
    pub exact: ExactKind,
    pub psi_mode: PsiMode,
    pub seed: u64,
    pub modes: usize,
}

impl ManufactureConfig {
    pub fn solution(&self, kind: ExactKind, dim: usize) -> ExactSolution {
        match kind {
            ExactKind::Quadratic => ExactSolution::Quadratic,
            ExactKind::ExponentialRadial => ExactSolution::ExponentialRadial,
            ExactKind::Trigonometric => ExactSolution::trigonometric(dim, self.seed, self.modes),
        }
    }
}

/// A fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub out: PathBuf,
    pub operator: OperatorSpec,
    pub tensor: ATensorSpec,
    pub psi: PsiConfig,
    pub grid: Grid,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub sampling: SamplingPlan,
    pub audit: AuditConfig,
    pub theta: ThetaConfig,
    pub monitor: MonitorConfig,
    pub manufacture: ManufactureConfig,
    /// The text this configuration was parsed from.
    pub source: String,
}

impl RunConfig {
    /// Replaces the seed everywhere it flows.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if self.manufacture.seed == self.seed {
            self.manufacture.seed = seed;
        }
        self.seed = seed;
        self.sampling.seed = seed;
        self
    }
}

const SECTIONS: [&str; 11] = [
    "operator",
    "tensor",
    "psi",
    "grid",
    "problem",
    "solver",
    "sampling",
    "audit",
    "theta",
    "monitor",
    "manufacture",
];
const TOP_LEVEL: [&str; 3] = ["command", "seed", "out"];

/// Line of every `key = ...` in every section, 1-based.
fn key_lines(text: &str) -> BTreeMap<(String, String), usize> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            if let Some(name) = rest.split(']').next() {
                section = name.trim().to_string();
            }
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim().trim_matches('"').to_string();
            if !key.is_empty() && !key.starts_with('#') {
                out.entry((section.clone(), key)).or_insert(i + 1);
            }
        }
    }
    out
}

fn section_lines(text: &str) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        if let Some(rest) = raw.trim().strip_prefix('[') {
            if let Some(name) = rest.split(']').next() {
                out.entry(name.trim().to_string()).or_insert(i + 1);
            }
        }
    }
    out
}

struct Reader<'a> {
    root: &'a Table,
    lines: BTreeMap<(String, String), usize>,
    errors: Vec<(usize, String)>,
    used: HashSet<(String, String)>,
}

fn label(sec: &str, key: &str) -> String {
    if sec.is_empty() {
        key.to_string()
    } else {
        format!("{sec}.{key}")
    }
}

impl<'a> Reader<'a> {
    fn line(&self, sec: &str, key: &str) -> usize {
        self.lines.get(&(sec.to_string(), key.to_string())).copied().unwrap_or(0)
    }

    fn error(&mut self, sec: &str, key: &str, msg: impl std::fmt::Display) {
        let line = self.line(sec, key);
        self.errors.push((line, format!("line {line}: {}: {msg}", label(sec, key))));
    }

    /// Error about a constraint between keys, reported at the first of them
    /// that is present.
    fn constraint(&mut self, keys: &[(&str, &str)], msg: impl std::fmt::Display) {
        let found = keys.iter().find(|(s, k)| self.line(s, k) > 0).copied();
        let (s, k) = found.unwrap_or(keys[0]);
        self.error(s, k, msg);
    }

    fn has(&self, sec: &str, key: &str) -> bool {
        self.raw(sec, key).is_some()
    }

    fn raw(&self, sec: &str, key: &str) -> Option<&'a Value> {
        if sec.is_empty() {
            self.root.get(key)
        } else {
            self.root.get(sec)?.as_table()?.get(key)
        }
    }

    fn get(&mut self, sec: &str, key: &str) -> Option<&'a Value> {
        self.used.insert((sec.to_string(), key.to_string()));
        self.raw(sec, key)
    }

    fn typed<T>(&mut self, sec: &str, key: &str, expected: &str, conv: impl Fn(&'a Value) -> Option<T>) -> Option<T> {
        let v = self.get(sec, key)?;
        match conv(v) {
            Some(t) => Some(t),
            None => {
                self.error(sec, key, format!("expected {expected}, found {}", v.type_str()));
                None
            }
        }
    }

    fn opt_f64(&mut self, sec: &str, key: &str) -> Option<f64> {
        self.typed(sec, key, "a number", as_f64)
    }

    fn f64(&mut self, sec: &str, key: &str, default: f64) -> f64 {
        self.opt_f64(sec, key).unwrap_or(default)
    }

    fn opt_usize(&mut self, sec: &str, key: &str) -> Option<usize> {
        self.typed(sec, key, "a nonnegative integer", |v| {
            v.as_integer().and_then(|i| usize::try_from(i).ok())
        })
    }

    fn usize(&mut self, sec: &str, key: &str, default: usize) -> usize {
        self.opt_usize(sec, key).unwrap_or(default)
    }

    fn opt_u64(&mut self, sec: &str, key: &str) -> Option<u64> {
        self.typed(sec, key, "a nonnegative integer", |v| {
            v.as_integer().and_then(|i| u64::try_from(i).ok())
        })
    }

    fn bool(&mut self, sec: &str, key: &str, default: bool) -> bool {
        self.typed(sec, key, "a boolean", Value::as_bool).unwrap_or(default)
    }

    fn opt_str(&mut self, sec: &str, key: &str) -> Option<&'a str> {
        self.typed(sec, key, "a string", Value::as_str)
    }

    /// String key restricted to `choices`.
    fn choice<T: Copy>(&mut self, sec: &str, key: &str, choices: &[(&str, T)], default: T) -> T {
        let Some(s) = self.opt_str(sec, key) else {
            return default;
        };
        match choices.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
                self.error(sec, key, format!("unknown value {s:?}, expected one of {}", names.join(", ")));
                default
            }
        }
    }

    fn opt_f64_list(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        self.typed(sec, key, "an array of numbers", |v| {
            v.as_array()?.iter().map(as_f64).collect()
        })
    }

    /// Scalar (broadcast to `len` entries) or an array of length `len`.
    fn f64_axes(&mut self, sec: &str, key: &str, len: usize, default: f64) -> Vec<f64> {
        match self.get(sec, key) {
            None => vec![default; len],
            Some(v) => {
                if let Some(x) = as_f64(v) {
                    return vec![x; len];
                }
                match v.as_array().and_then(|a| a.iter().map(as_f64).collect::<Option<Vec<_>>>()) {
                    Some(list) if list.len() == len => list,
                    Some(list) => {
                        self.error(sec, key, format!("expected {len} entries, found {}", list.len()));
                        vec![default; len]
                    }
                    None => {
                        self.error(sec, key, format!("expected a number or an array of numbers, found {}", v.type_str()));
                        vec![default; len]
                    }
                }
            }
        }
    }

    fn usize_axes(&mut self, sec: &str, key: &str, len: usize, default: usize) -> Vec<usize> {
        let as_usize = |v: &Value| v.as_integer().and_then(|i| usize::try_from(i).ok());
        match self.get(sec, key) {
            None => vec![default; len],
            Some(v) => {
                if let Some(x) = as_usize(v) {
                    return vec![x; len];
                }
                match v.as_array().and_then(|a| a.iter().map(as_usize).collect::<Option<Vec<_>>>()) {
                    Some(list) if list.len() == len => list,
                    Some(list) => {
                        self.error(sec, key, format!("expected {len} entries, found {}", list.len()));
                        vec![default; len]
                    }
                    None => {
                        self.error(sec, key, format!("expected an integer or an array of integers, found {}", v.type_str()));
                        vec![default; len]
                    }
                }
            }
        }
    }

    fn opt_matrix(&mut self, sec: &str, key: &str) -> Option<Vec<Vec<f64>>> {
        self.typed(sec, key, "an array of arrays of numbers", |v| {
            v.as_array()?
                .iter()
                .map(|row| row.as_array()?.iter().map(as_f64).collect())
                .collect()
        })
    }

    fn opt_str_list(&mut self, sec: &str, key: &str) -> Option<Vec<&'a str>> {
        self.typed(sec, key, "an array of strings", |v| {
            v.as_array()?.iter().map(Value::as_str).collect()
        })
    }

    fn path(&mut self, sec: &str, key: &str) -> Option<PathBuf> {
        self.opt_str(sec, key).map(PathBuf::from)
    }

    fn unknown_keys(&mut self, section_lines: &BTreeMap<String, usize>) {
        let mut found = Vec::new();
        for (key, value) in self.root {
            if TOP_LEVEL.contains(&key.as_str()) {
                continue;
            }
            if !SECTIONS.contains(&key.as_str()) {
                let line = if value.is_table() {
                    section_lines.get(key).copied().unwrap_or(0)
                } else {
                    self.line("", key)
                };
                let what = if value.is_table() { "section" } else { "key" };
                found.push((line, format!("line {line}: unknown {what} {key:?}")));
                continue;
            }
            let Some(table) = value.as_table() else {
                let line = self.line("", key);
                found.push((line, format!("line {line}: {key}: expected a section, found {}", value.type_str())));
                continue;
            };
            for sub in table.keys() {
                if !self.used.contains(&(key.clone(), sub.clone())) {
                    let line = self.line(key, sub);
                    found.push((line, format!("line {line}: unknown key {:?} in [{key}]", sub)));
                }
            }
        }
        self.errors.extend(found);
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Parses and validates a configuration, reporting every error found.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Config(vec![format!("line {line}: syntax error: {}", e.message().trim())])
    })?;
    let mut r = Reader {
        root: &root,
        lines: key_lines(text),
        errors: Vec::new(),
        used: HashSet::new(),
    };
    let cfg = read(&mut r, text);
    r.unknown_keys(&section_lines(text));
    if r.errors.is_empty() {
        if let Some(cfg) = cfg {
            return Ok(cfg);
        }
    }
    r.errors.sort_by_key(|(line, _)| *line);
    Err(Error::Config(r.errors.into_iter().map(|(_, m)| m).collect()))
}

fn read(r: &mut Reader, text: &str) -> Option<RunConfig> {
    let command = match r.opt_str("", "command") {
        None => None,
        Some(s) => match Command::parse(s) {
            Some(c) => Some(c),
            None => {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                r.error("", "command", format!("unknown command {s:?}, expected one of {}", names.join(", ")));
                None
            }
        },
    };
    let seed = r.opt_u64("", "seed").unwrap_or(0);
    let out = r.path("", "out").unwrap_or_else(|| PathBuf::from("out"));

    // Operator and grid share the dimension.
    let n_given = r.opt_usize("operator", "n");
    let dim_given = r.opt_usize("grid", "dim");
    let n = n_given.or(dim_given).unwrap_or(2);
    let dim = dim_given.unwrap_or(n);
    if n != dim {
        r.constraint(&[("operator", "n"), ("grid", "dim")], format!("operator n = {n} must equal grid dim = {dim}"));
    }
    let dim_ok = (2..=3).contains(&dim);
    if !dim_ok {
        r.constraint(&[("grid", "dim"), ("operator", "n")], format!("grid dimension must be 2 or 3, got {dim}"));
    }
    let operator = read_operator(r, n);
    let tensor = read_tensor(r);
    let psi = read_psi(r);
    let grid = read_grid(r, if dim_ok { dim } else { 2 });
    let manufacture = read_manufacture(r, seed);
    let problem = read_problem(r, &psi, manufacture.exact);
    let solver = read_solver(r);
    let sampling = read_sampling(r, seed);
    let audit = read_audit(r, operator.as_ref());
    let theta = read_theta(r, operator.as_ref(), n);
    let monitor = read_monitor(r);

    Some(RunConfig {
        command,
        seed,
        out,
        operator: operator?,
        tensor: tensor?,
        psi,
        grid: grid?,
        problem,
        solver,
        sampling,
        audit,
        theta: theta?,
        monitor,
        manufacture,
        source: text.to_string(),
    })
}

fn read_operator(r: &mut Reader, n: usize) -> Option<OperatorSpec> {
    #[derive(Clone, Copy)]
    enum Kind {
        Root,
        Ratio,
        LogP,
    }
    let kind = r.choice(
        "operator",
        "family",
        &[("sigma-k-root", Kind::Root), ("sigma-ratio", Kind::Ratio), ("log-p-k", Kind::LogP)],
        Kind::Root,
    );
    let k = r.usize("operator", "k", n);
    let l = r.opt_usize("operator", "l");
    let family = match kind {
        Kind::Root => Family::SigmaKRoot,
        Kind::Ratio => Family::SigmaRatio { l: l.unwrap_or(1) },
        Kind::LogP => Family::LogPK,
    };
    if l.is_some() && !matches!(kind, Kind::Ratio) {
        r.error("operator", "l", "only used by the sigma-ratio family");
    }
    if k == 0 || k > n {
        r.constraint(&[("operator", "k"), ("operator", "n")], format!("constraint violated: 1 ≤ k ≤ n (k = {k}, n = {n})"));
        return None;
    }
    match OperatorSpec::new(family, n, k) {
        Ok(op) => Some(op),
        Err(e) => {
            r.constraint(&[("operator", "l"), ("operator", "k")], e);
            None
        }
    }
}

fn read_tensor(r: &mut Reader) -> Option<ATensorSpec> {
    #[derive(Clone, Copy)]
    enum Kind {
        Zero,
        Kappa,
        Metric,
        Mtw,
    }
    let kind = r.choice(
        "tensor",
        "family",
        &[
            ("zero", Kind::Zero),
            ("kappa-u-metric", Kind::Kappa),
            ("u-metric", Kind::Metric),
            ("mtw-quadratic", Kind::Mtw),
        ],
        Kind::Zero,
    );
    let kappa = r.opt_f64("tensor", "kappa");
    let c = r.opt_f64("tensor", "c");
    if kappa.is_some() && !matches!(kind, Kind::Kappa) {
        r.error("tensor", "kappa", "only used by the kappa-u-metric family");
    }
    if c.is_some() && !matches!(kind, Kind::Mtw) {
        r.error("tensor", "c", "only used by the mtw-quadratic family");
    }
    let spec = match kind {
        Kind::Zero => ATensorSpec::Zero,
        Kind::Kappa => ATensorSpec::KappaUMetric { kappa: kappa.unwrap_or(1.0) },
        Kind::Metric => ATensorSpec::UMetric,
        Kind::Mtw => ATensorSpec::MtwQuadratic { c: c.unwrap_or(0.1) },
    };
    match spec.validate() {
        Ok(()) => Some(spec),
        Err(e) => {
            r.constraint(&[("tensor", "c"), ("tensor", "kappa"), ("tensor", "family")], e);
            None
        }
    }
}

fn read_psi(r: &mut Reader) -> PsiConfig {
    #[derive(Clone, Copy)]
    enum Kind {
        Constant,
        Table,
        Separable,
        Manufactured,
    }
    let kind = r.choice(
        "psi",
        "family",
        &[
            ("constant", Kind::Constant),
            ("table", Kind::Table),
            ("separable", Kind::Separable),
            ("manufactured", Kind::Manufactured),
        ],
        Kind::Constant,
    );
    let value = r.opt_f64("psi", "value");
    let table = r.path("psi", "table");
    let m = r.opt_f64("psi", "m");
    if let Some(v) = value {
        if !positive(v) {
            r.error("psi", "value", format!("psi must be positive, got {v}"));
        }
    }
    if let Some(m) = m {
        if !(m.is_finite() && m >= 0.0) {
            r.error("psi", "m", format!("constraint violated: m ≥ 0 (m = {m})"));
        }
    }
    let unused = |r: &mut Reader, key: &str, used: bool| {
        if !used && r.has("psi", key) {
            r.error("psi", key, "not used by this psi family");
        }
    };
    match kind {
        Kind::Constant => {
            unused(r, "table", false);
            unused(r, "m", false);
            PsiConfig::Constant(value.unwrap_or(1.0))
        }
        Kind::Table => {
            unused(r, "value", false);
            unused(r, "m", false);
            match table {
                Some(p) => PsiConfig::Table(p),
                None => {
                    r.error("psi", "family", "the table family needs psi.table");
                    PsiConfig::Constant(1.0)
                }
            }
        }
        Kind::Separable => {
            if value.is_some() && table.is_some() {
                r.constraint(&[("psi", "value"), ("psi", "table")], "give psi.value or psi.table, not both");
            }
            PsiConfig::Separable {
                value: value.unwrap_or(1.0),
                table,
                m: m.unwrap_or(0.0),
            }
        }
        Kind::Manufactured => {
            unused(r, "value", false);
            unused(r, "table", false);
            unused(r, "m", false);
            PsiConfig::Manufactured
        }
    }
}

fn read_grid(r: &mut Reader, dim: usize) -> Option<Grid> {
    let lo = r.f64_axes("grid", "lo", dim, -1.0);
    let hi = r.f64_axes("grid", "hi", dim, 1.0);
    let nodes = r.usize_axes("grid", "nodes", dim, 17);
    match Grid::new(lo, hi, nodes) {
        Ok(g) => Some(g),
        Err(e) => {
            r.constraint(&[("grid", "nodes"), ("grid", "lo"), ("grid", "hi"), ("grid", "dim")], e);
            None
        }
    }
}

fn read_manufacture(r: &mut Reader, seed: u64) -> ManufactureConfig {
    let exact = r.choice(
        "manufacture",
        "exact",
        &[
            ("quadratic", ExactKind::Quadratic),
            ("exponential-radial", ExactKind::ExponentialRadial),
            ("trigonometric", ExactKind::Trigonometric),
        ],
        ExactKind::Quadratic,
    );
    let psi_mode = r.choice(
        "manufacture",
        "psi_mode",
        &[("discrete", PsiMode::Discrete), ("analytic", PsiMode::Analytic)],
        PsiMode::Discrete,
    );
    let seed = r.opt_u64("manufacture", "seed").unwrap_or(seed);
    let modes = r.usize("manufacture", "modes", 3);
    if modes == 0 {
        r.error("manufacture", "modes", "constraint violated: modes ≥ 1");
    }
    ManufactureConfig {
        exact,
        psi_mode,
        seed,
        modes: modes.max(1),
    }
}

fn read_problem(r: &mut Reader, psi: &PsiConfig, exact: ExactKind) -> ProblemConfig {
    let default_kind = if *psi == PsiConfig::Manufactured {
        exact
    } else {
        ExactKind::Quadratic
    };
    let field = r.path("problem", "boundary_field");
    let boundary = match r.opt_str("problem", "boundary") {
        None => match field {
            Some(p) => BoundaryConfig::Field(p),
            None => BoundaryConfig::Exact(default_kind),
        },
        Some("field") => match field {
            Some(p) => BoundaryConfig::Field(p),
            None => {
                r.error("problem", "boundary", "boundary = \"field\" needs problem.boundary_field");
                BoundaryConfig::Exact(default_kind)
            }
        },
        Some(s) => {
            if field.is_some() {
                r.error("problem", "boundary_field", "only used with boundary = \"field\"");
            }
            match ExactKind::parse(s) {
                Some(k) => BoundaryConfig::Exact(k),
                None => {
                    r.error(
                        "problem",
                        "boundary",
                        format!("unknown value {s:?}, expected one of quadratic, exponential-radial, trigonometric, field"),
                    );
                    BoundaryConfig::Exact(default_kind)
                }
            }
        }
    };
    let subsolution = r.choice(
        "problem",
        "subsolution",
        &[("boundary", SubsolutionKind::Boundary), ("bump", SubsolutionKind::Bump)],
        SubsolutionKind::Boundary,
    );
    let bump = r.f64("problem", "bump", 0.1);
    if !positive(bump) {
        r.error("problem", "bump", format!("constraint violated: bump > 0 (bump = {bump})"));
    }
    ProblemConfig {
        boundary,
        subsolution,
        bump,
    }
}

fn read_solver(r: &mut Reader) -> SolverConfig {
    let method = r.choice(
        "solver",
        "method",
        &[("continuation", Method::Continuation), ("newton", Method::Newton)],
        Method::Continuation,
    );
    let mut newton = NewtonOptions::default();
    let mut continuation = ContinuationOptions::default();
    let tol = r.f64("solver", "tol", newton.tol);
    if !positive(tol) {
        r.error("solver", "tol", format!("constraint violated: tol > 0 (tol = {tol})"));
    }
    newton.tol = tol;
    continuation.newton.tol = tol;
    if let Some(m) = r.opt_usize("solver", "max_iter") {
        if m == 0 {
            r.error("solver", "max_iter", "constraint violated: max_iter ≥ 1");
        }
        newton.max_iter = m;
        continuation.newton.max_iter = m;
    }
    continuation.initial_step = r.f64("solver", "initial_step", continuation.initial_step);
    continuation.min_step = r.f64("solver", "min_step", continuation.min_step);
    let (s0, s1) = (continuation.initial_step, continuation.min_step);
    if !(positive(s1) && s1 <= s0 && s0 <= 1.0) {
        r.constraint(
            &[("solver", "min_step"), ("solver", "initial_step")],
            format!("constraint violated: 0 < min_step ≤ initial_step ≤ 1 (min_step = {s1}, initial_step = {s0})"),
        );
    }
    let assert_subsolution = r.bool("solver", "assert_subsolution", false);
    let euler_policy = r.choice(
        "solver",
        "euler_policy",
        &[("warn", EulerPolicy::Warn), ("refuse", EulerPolicy::Refuse)],
        EulerPolicy::Warn,
    );
    SolverConfig {
        method,
        newton,
        continuation,
        assert_subsolution,
        euler_policy,
    }
}

fn read_sampling(r: &mut Reader, seed: u64) -> SamplingPlan {
    let d = SamplingPlan::default();
    let count = r.usize("sampling", "count", d.count);
    let lo = r.f64("sampling", "r_min", d.radial_range[0]);
    let hi = r.f64("sampling", "r_max", d.radial_range[1]);
    let scheme = r.choice(
        "sampling",
        "scheme",
        &[
            ("uniform-on-cone", DirectionScheme::UniformOnCone),
            ("diagonal-biased", DirectionScheme::DiagonalBiased),
        ],
        d.direction_scheme,
    );
    let plan = SamplingPlan {
        seed,
        count,
        radial_range: [lo, hi],
        direction_scheme: scheme,
    };
    if count == 0 {
        r.error("sampling", "count", "constraint violated: count ≥ 1");
    } else if let Err(e) = plan.validate() {
        r.constraint(&[("sampling", "r_min"), ("sampling", "r_max")], e);
    }
    plan
}

fn read_audit(r: &mut Reader, op: Option<&OperatorSpec>) -> AuditConfig {
    let all: Vec<ConditionId> = ConditionId::OPERATOR.into_iter().chain(ConditionId::TENSOR).collect();
    let conditions = match r.opt_str_list("audit", "conditions") {
        None => all,
        Some(list) => {
            let mut out = Vec::new();
            for s in list {
                match ConditionId::parse(s) {
                    Ok(c) if !out.contains(&c) => out.push(c),
                    Ok(_) => r.error("audit", "conditions", format!("{s} listed twice")),
                    Err(e) => r.error("audit", "conditions", e),
                }
            }
            if out.is_empty() && r.errors.is_empty() {
                r.error("audit", "conditions", "at least one condition is required");
            }
            out
        }
    };
    let d = GrowthSpec::default();
    let mut growth = GrowthSpec {
        gamma1: r.f64("audit", "gamma1", d.gamma1),
        gamma2: r.f64("audit", "gamma2", d.gamma2),
        gamma: r.f64("audit", "gamma", d.gamma),
        psi_bar1: r.f64("audit", "psi_bar1", d.psi_bar1),
        psi_bar2: r.f64("audit", "psi_bar2", d.psi_bar2),
        psi_bar: r.f64("audit", "psi_bar", d.psi_bar),
        c1: r.f64("audit", "c1", d.c1),
        p_magnitudes: d.p_magnitudes,
        c0: r.f64("audit", "c0", d.c0),
    };
    if let Some(p) = r.opt_f64_list("audit", "p_magnitudes") {
        match <[f64; 3]>::try_from(p.as_slice()) {
            Ok(a) => growth.p_magnitudes = a,
            Err(_) => r.error("audit", "p_magnitudes", format!("expected 3 entries, found {}", p.len())),
        }
    }
    if let Err(e) = growth.validate() {
        r.constraint(&[("audit", "gamma1"), ("audit", "c0"), ("audit", "p_magnitudes")], e);
    }
    let sigma = r.opt_f64("audit", "tangent_sigma");
    let lambda = r.opt_f64_list("audit", "tangent_lambda");
    let tangent = match (sigma, lambda) {
        (None, None) => None,
        (Some(sigma), Some(lambda)) => {
            if let Some(op) = op {
                check_point(r, "audit", "tangent_lambda", op, &lambda);
            }
            Some(TangentConfig { sigma, lambda })
        }
        _ => {
            r.constraint(
                &[("audit", "tangent_sigma"), ("audit", "tangent_lambda")],
                "tangent_sigma and tangent_lambda must be given together",
            );
            None
        }
    };
    let probe_radius = r.f64("audit", "probe_radius", crate::audit::DEFAULT_PROBE_RADIUS);
    if !positive(probe_radius) {
        r.error("audit", "probe_radius", format!("constraint violated: probe_radius > 0 (probe_radius = {probe_radius})"));
    }
    AuditConfig {
        conditions,
        growth,
        tangent,
        probe_radius,
    }
}

/// Checks that `point` is an admissible eigenvalue tuple for `op`.
fn check_point(r: &mut Reader, sec: &str, key: &str, op: &OperatorSpec, point: &[f64]) -> Option<EigenTuple> {
    if point.len() != op.n {
        r.error(sec, key, format!("expected {} entries, found {}", op.n, point.len()));
        return None;
    }
    let t = match EigenTuple::new(point.to_vec()) {
        Ok(t) => t,
        Err(e) => {
            r.error(sec, key, e);
            return None;
        }
    };
    match op.eval(&t) {
        Ok(_) => Some(t),
        Err(e) => {
            r.error(sec, key, format!("{point:?} is not admissible: {e}"));
            None
        }
    }
}

fn read_theta(r: &mut Reader, op: Option<&OperatorSpec>, n: usize) -> Option<ThetaConfig> {
    let ones = vec![1.0; n];
    let k_raw = r.opt_matrix("theta", "k_points").unwrap_or_else(|| vec![ones.clone()]);
    let band = r.opt_f64_list("theta", "band").unwrap_or_else(|| vec![0.5, 2.0]);
    let r_grid = r.opt_f64_list("theta", "r_grid").unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
    let mu_raw = r.opt_f64_list("theta", "beta_mu").unwrap_or(ones);
    let beta_sigma = r.opt_f64("theta", "beta_sigma");
    let beta_radii = r.opt_f64_list("theta", "beta_radii").unwrap_or_else(|| vec![10.0, 100.0]);

    let band: Option<[f64; 2]> = match <[f64; 2]>::try_from(band.as_slice()) {
        Ok([a, b]) if a.is_finite() && b.is_finite() && a < b => Some([a, b]),
        Ok([a, b]) => {
            r.error("theta", "band", format!("constraint violated: a < b (a = {a}, b = {b})"));
            None
        }
        Err(_) => {
            r.error("theta", "band", format!("expected 2 entries, found {}", band.len()));
            None
        }
    };
    if k_raw.is_empty() {
        r.error("theta", "k_points", "at least one point is required");
    }
    let increasing = r_grid.windows(2).all(|w| w[0] < w[1]);
    if r_grid.is_empty() || !r_grid.iter().all(|&x| positive(x)) || !increasing {
        r.error("theta", "r_grid", "radii must be positive and strictly increasing");
    }
    if !beta_radii.iter().all(|&x| positive(x)) {
        r.error("theta", "beta_radii", "radii must be positive");
    }
    let op = op?;
    let k_points: Vec<EigenTuple> = k_raw
        .iter()
        .filter_map(|p| check_point(r, "theta", "k_points", op, p))
        .collect();
    let beta_mu = check_point(r, "theta", "beta_mu", op, &mu_raw)?;
    let beta_sigma = match beta_sigma {
        Some(s) => s,
        None => op.eval(&beta_mu).ok()?,
    };
    if !beta_sigma.is_finite() {
        r.error("theta", "beta_sigma", "must be finite");
    }
    Some(ThetaConfig {
        k_points,
        band: band?,
        r_grid,
        beta_mu,
        beta_sigma,
        beta_radii,
    })
}

fn read_monitor(r: &mut Reader) -> MonitorConfig {
    let d = MonitorOptions::default();
    let barrier_t = r.f64("monitor", "barrier_t", d.barrier_t);
    let barrier_n = r.f64("monitor", "barrier_n", d.barrier_n);
    let barrier_delta = r.opt_f64("monitor", "barrier_delta");
    if !positive(barrier_t) {
        r.error("monitor", "barrier_t", "constraint violated: barrier_t > 0");
    }
    if !positive(barrier_n) {
        r.error("monitor", "barrier_n", "constraint violated: barrier_n > 0");
    }
    if let Some(dl) = barrier_delta {
        if !positive(dl) {
            r.error("monitor", "barrier_delta", "constraint violated: barrier_delta > 0");
        }
    }
    let mut psi_weights = d.psi_weights;
    if let Some(w) = r.opt_f64_list("monitor", "psi_weights") {
        match <[f64; 3]>::try_from(w.as_slice()) {
            Ok(a) if a.iter().all(|v| v.is_finite() && *v >= 0.0) => psi_weights = a,
            Ok(_) => r.error("monitor", "psi_weights", "weights must be finite and nonnegative"),
            Err(_) => r.error("monitor", "psi_weights", format!("expected 3 entries, found {}", w.len())),
        }
    }
    let theta_report = r.path("monitor", "theta_report");
    let field = r.path("monitor", "field");
    let tol = r.f64("monitor", "tol", 1e-8);
    if !positive(tol) {
        r.error("monitor", "tol", "constraint violated: tol > 0");
    }
    MonitorConfig {
        options: MonitorOptions {
            barrier_t,
            barrier_n,
            barrier_delta,
            psi_weights,
        },
        theta_report,
        field,
        tol,
    }
}
