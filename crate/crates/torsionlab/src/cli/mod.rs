//! Job running, report emission and the command registry behind the `torsionlab` binary.

mod commands;
pub mod input;

pub use commands::{CircleCm, GaugeCmd, GlueCheck, LesCmd, RefinedSplit, SynthSuite, TorsionCmd};
pub use input::InputDocument;

use crate::detline::DetLineError;
use crate::gauge::GaugeError;
use crate::gluelab::GlueError;
use crate::hilbcx::HilbertError;
use crate::localsys::LocalSystemError;
use crate::numlin::DEFAULT_RANK_TOL;
use crate::simplicial::SimplicialError;
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Failures a job can end in, split by exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    /// Input that cannot be turned into a valid job (exit 2).
    #[error("malformed input: {0}")]
    Malformed(String),
    /// A computation that broke down on valid input (exit 1).
    #[error("computation failed: {0}")]
    Failed(String),
    #[error("i/o failure: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Malformed(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<SimplicialError> for CliError {
    fn from(e: SimplicialError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<LocalSystemError> for CliError {
    fn from(e: LocalSystemError) -> Self {
        CliError::Malformed(e.to_string())
    }
}

impl From<HilbertError> for CliError {
    fn from(e: HilbertError) -> Self {
        match e {
            HilbertError::Shape { .. }
            | HilbertError::NotAComplex { .. }
            | HilbertError::NotSubcomplex(_)
            | HilbertError::InfeasibleProfile(_)
            | HilbertError::UnknownLift(_)
            | HilbertError::LocalSystem(_) => CliError::Malformed(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<DetLineError> for CliError {
    fn from(e: DetLineError) -> Self {
        match e {
            DetLineError::Hilbert(inner) => inner.into(),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<GlueError> for CliError {
    fn from(e: GlueError) -> Self {
        match e {
            GlueError::Hilbert(inner) => inner.into(),
            GlueError::DetLine(inner) => inner.into(),
            GlueError::LocalSystem(inner) => inner.into(),
            GlueError::Simplicial(inner) => inner.into(),
            GlueError::DegenerateHolonomy { .. } => CliError::Malformed(e.to_string()),
        }
    }
}

impl From<GaugeError> for CliError {
    fn from(e: GaugeError) -> Self {
        match e {
            GaugeError::StepTooLarge { .. } => CliError::Failed(e.to_string()),
            _ => CliError::Malformed(e.to_string()),
        }
    }
}

/// One invocation: which command, on what, with which tolerances.
#[derive(Clone, Debug, PartialEq)]
pub struct JobSpec {
    pub command: String,
    pub inputs: Vec<PathBuf>,
    pub seed: u64,
    /// Identity tolerance; `None` picks the command default.
    pub tol: Option<f64>,
    pub rank_tol: f64,
    pub out: PathBuf,
}

impl JobSpec {
    pub fn new(command: impl Into<String>, out: impl Into<PathBuf>) -> Self {
        Self { command: command.into(), inputs: Vec::new(), seed: 0, tol: None, rank_tol: DEFAULT_RANK_TOL, out: out.into() }
    }
}

/// What a command hands to the runner.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub quantities: BTreeMap<String, Value>,
    /// `(identity, value, threshold)`.
    pub residuals: Vec<(String, f64, f64)>,
    /// Checks that are not residuals, e.g. rank defects.
    pub failures: Vec<String>,
    /// Lines for stdout.
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn quantity(&mut self, name: impl Into<String>, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("quantities serialize");
        self.quantities.insert(name.into(), v);
    }

    pub fn residual(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.residuals.push((name.into(), value, threshold));
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

/// Everything a command may read.
#[derive(Clone, Debug)]
pub struct JobContext {
    pub seed: u64,
    pub tol: f64,
    pub rank_tol: f64,
    pub documents: Vec<InputDocument>,
}

impl JobContext {
    pub fn document(&self) -> Result<&InputDocument, CliError> {
        self.documents.first().ok_or_else(|| CliError::Malformed("no input document".into()))
    }

    pub fn params(&self) -> input::Params {
        self.documents.first().map(InputDocument::params).unwrap_or_default()
    }
}

pub trait Command: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn default_tol(&self) -> f64 {
        1e-9
    }
    fn needs_input(&self) -> bool {
        true
    }
    fn run(&self, ctx: &JobContext) -> Result<Outcome, CliError>;
}

pub struct CommandRegistry {
    commands: BTreeMap<&'static str, Box<dyn Command>>,
}

impl CommandRegistry {
    pub fn empty() -> Self {
        Self { commands: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(TorsionCmd));
        r.register(Box::new(GlueCheck));
        r.register(Box::new(LesCmd));
        r.register(Box::new(RefinedSplit));
        r.register(Box::new(GaugeCmd));
        r.register(Box::new(CircleCm));
        r.register(Box::new(SynthSuite));
        r
    }

    pub fn register(&mut self, cmd: Box<dyn Command>) {
        self.commands.insert(cmd.name(), cmd);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Command> {
        self.commands.get(name).map(|b| b.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Command> + '_ {
        self.commands.values().map(|b| b.as_ref())
    }
}

/// The JSON document written for every job.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<String>,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub quantities: BTreeMap<String, Value>,
    pub residuals: BTreeMap<String, f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: &str, job: &JobSpec) -> Self {
        Self {
            command: command.to_string(),
            inputs: job.inputs.iter().map(|p| p.display().to_string()).collect(),
            seed: job.seed,
            tolerances: BTreeMap::new(),
            quantities: BTreeMap::new(),
            residuals: BTreeMap::new(),
            pass: true,
            error: None,
        }
    }
}

/// Pretty JSON with every float written to 17 significant digits.
struct FullPrecision<'a>(serde_json::ser::PrettyFormatter<'a>);

impl serde_json::ser::Formatter for FullPrecision<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn emit_report(report: &Report) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FullPrecision(serde_json::ser::PrettyFormatter::new()));
    report.serialize(&mut ser).expect("reports serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits utf-8")
}

/// Writes through a sibling temp file and a rename, so readers never see a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let name = path.file_name().ok_or_else(|| CliError::Io(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io_err(e)
    })
}

fn load_documents(paths: &[PathBuf]) -> Result<Vec<InputDocument>, CliError> {
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Malformed(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("{}: {e}", p.display())))
        })
        .collect()
}

/// Runs a job without touching the filesystem beyond reading inputs.
pub fn execute(job: &JobSpec, registry: &CommandRegistry) -> (Report, Vec<String>, i32) {
    let mut report = Report::new(&job.command, job);
    let fail = |mut report: Report, e: CliError| {
        report.pass = false;
        report.error = Some(e.to_string());
        let code = e.exit_code();
        (report, Vec::new(), code)
    };
    let Some(cmd) = registry.get(&job.command) else {
        return fail(report, CliError::Malformed(format!("unknown command {:?}", job.command)));
    };
    let tol = job.tol.unwrap_or(cmd.default_tol());
    if !(tol > 0.0 && tol.is_finite()) || !(job.rank_tol > 0.0 && job.rank_tol.is_finite()) {
        return fail(report, CliError::Malformed("tolerances must be positive".into()));
    }
    report.tolerances.insert("identity".into(), tol);
    report.tolerances.insert("rank".into(), job.rank_tol);
    if cmd.needs_input() && job.inputs.is_empty() {
        return fail(report, CliError::Malformed(format!("{} needs --input", cmd.name())));
    }
    let documents = match load_documents(&job.inputs) {
        Ok(d) => d,
        Err(e) => return fail(report, e),
    };
    let ctx = JobContext { seed: job.seed, tol, rank_tol: job.rank_tol, documents };
    let outcome = match cmd.run(&ctx) {
        Ok(o) => o,
        Err(e) => return fail(report, e),
    };

    let mut failures = outcome.failures;
    for (name, value, threshold) in &outcome.residuals {
        if threshold.to_bits() != tol.to_bits() {
            report.tolerances.insert(name.clone(), *threshold);
        }
        // Negated so that a NaN residual fails.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(*value <= *threshold) {
            failures.push(format!("{name} = {value:.3e} exceeds {threshold:.1e}"));
        }
        report.residuals.insert(name.clone(), *value);
    }
    report.quantities = outcome.quantities;
    report.pass = failures.is_empty();
    if !failures.is_empty() {
        report.error = Some(failures.join("; "));
    }
    let code = if report.pass { 0 } else { 1 };
    (report, outcome.summary, code)
}

/// Full job: execute, print, write the report. Returns the exit status.
pub fn run(job: &JobSpec, registry: &CommandRegistry) -> i32 {
    let (report, summary, code) = execute(job, registry);
    for line in &summary {
        println!("{line}");
    }
    if let Some(err) = &report.error {
        eprintln!("torsionlab {}: {err}", job.command);
    }
    match write_atomic(&job.out, &emit_report(&report)) {
        Ok(()) => code,
        Err(e) => {
            eprintln!("torsionlab: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_valid_and_passes() {
        let job = JobSpec::new("torsion", "r.json");
        let text = emit_report(&Report::new("torsion", &job));
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["pass"], Value::Bool(true));
        for key in ["command", "inputs", "seed", "tolerances", "quantities", "residuals"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v.get("error").is_none());
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        let job = JobSpec::new("x", "r.json");
        let mut r = Report::new("x", &job);
        r.residuals.insert("a".into(), 0.1);
        r.quantities.insert("b".into(), serde_json::json!([2.0, 1]));
        let text = emit_report(&r);
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("2.0000000000000000e0"), "{text}");
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["residuals"]["a"].as_f64(), Some(0.1));
        assert_eq!(v["quantities"]["b"][1].as_u64(), Some(1));
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::from(SimplicialError::DuplicateSimplex(vec![0])).exit_code(), 2);
        assert_eq!(CliError::from(LocalSystemError::InvalidSystem("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(HilbertError::ExactnessFailure("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(GaugeError::StepTooLarge { drift: 1.0, limit: 0.1 }).exit_code(), 1);
        assert_eq!(CliError::from(GlueError::DegenerateHolonomy { theta: 0.0 }).exit_code(), 2);
    }

    #[test]
    fn unknown_command_and_bad_tolerance() {
        let reg = CommandRegistry::builtin();
        let (r, _, code) = execute(&JobSpec::new("nope", "r.json"), &reg);
        assert_eq!(code, 2);
        assert!(!r.pass);
        let mut job = JobSpec::new("circle-cm", "r.json");
        job.tol = Some(-1.0);
        assert_eq!(execute(&job, &reg).2, 2);
    }

    #[test]
    fn registry_lists_all_commands() {
        let names: Vec<_> = CommandRegistry::builtin().iter().map(|c| c.name()).collect();
        assert_eq!(names, ["circle-cm", "gauge", "glue-check", "les", "refined-split", "synth-suite", "torsion"]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("torsionlab-atomic-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("r.json");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(&dir).unwrap().count(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
