//! `restore` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use restoration_core::backend::backend_by_name;
use restoration_core::ccg::{ccg_solve, CcgParams};
use restoration_core::{assemble_compact, FirstStageDecision, Instance, InstanceError, ScenarioRealization, SolveError, SolverBackend};

use crate::oracle::{enumerate_oracle, OracleError};
use crate::report::{build_report, series_csv, summary, ScheduleReport};
use crate::validate::validate_schedule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "restore", about = "Post-disaster cyber-physical restoration scheduling")]
struct Cli {
    /// Relative C&CG convergence tolerance.
    #[arg(long, global = true, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long = "max-iter", global = true, default_value_t = 50)]
    max_iter: usize,
    /// Binary-expansion bits per deviation (defaults to the instance value).
    #[arg(long, global = true)]
    bits: Option<u32>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "highs")]
    backend: String,
    /// Directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the robust schedule and write report, trace and series.
    Solve { instance: PathBuf },
    /// Re-simulate a schedule (decision or report file) at a scenario file or `zero`.
    Validate { instance: PathBuf, decision: PathBuf, scenario: String },
    /// Brute-force a desk-scale instance.
    EnumerateOracle { instance: PathBuf },
    /// Write the compact model in LP format.
    ExportModel { instance: PathBuf },
    /// Render plot series and a summary from a report file.
    Report { report: PathBuf },
}

/// Failure carrying its exit code.
struct Failure(i32, String);

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::Infeasible(_) => EXIT_INFEASIBLE,
            SolveError::Backend(_) | SolveError::Assembly(_) => EXIT_BACKEND,
            SolveError::InvalidScenario(_) | SolveError::Parameter(_) => EXIT_USAGE,
        };
        Failure(code, e.to_string())
    }
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        Failure(EXIT_USAGE, format!("invalid instance: {e}"))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let inst = Instance::from_json(&read(path)?)?;
    for w in &inst.warnings {
        log::warn!("{w}");
    }
    Ok(inst)
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(EXIT_USAGE, format!("{what}: {e}")))
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes every artifact or none: files are staged and renamed at the end.
fn write_all(dir: &Path, files: &[(&str, String)]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure(EXIT_USAGE, format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut staged = Vec::new();
    for (name, body) in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(body.as_bytes()).map_err(io)?;
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, target) in staged {
        tmp.persist(&target).map_err(|e| io(e.error))?;
    }
    Ok(())
}

fn backend(name: &str) -> Result<Box<dyn SolverBackend + Send + Sync>, Failure> {
    backend_by_name(name).ok_or_else(|| Failure(EXIT_USAGE, format!("unknown backend `{name}`")))
}

fn params(cli: &Cli) -> Result<CcgParams, Failure> {
    if !(cli.tol > 0.0) {
        return Err(Failure(EXIT_USAGE, "--tol must be positive".into()));
    }
    if cli.max_iter == 0 {
        return Err(Failure(EXIT_USAGE, "--max-iter must be at least 1".into()));
    }
    Ok(CcgParams { tolerance: cli.tol, max_iterations: cli.max_iter, bits: cli.bits, seed: cli.seed, ..CcgParams::default() })
}

/// Solves an instance and assembles the validated report.
pub fn solve_instance(inst: &Instance, params: &CcgParams, backend: &dyn SolverBackend) -> Result<ScheduleReport, SolveError> {
    let cm = assemble_compact(inst)?;
    let solved = ccg_solve(inst, &cm, params, backend)?;
    let d = FirstStageDecision::from_solution(inst, &cm, &solved.x);
    let check = validate_schedule(inst, &d, &solved.worst, backend)?;
    if !check.feasible() {
        log::warn!("returned schedule fails re-simulation: {:?}", check.violations);
    }
    Ok(build_report(inst, &solved, &d, &check))
}

fn solve(cli: &Cli, path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let inst = load_instance(path)?;
    let backend = backend(&cli.backend)?;
    let report = solve_instance(&inst, &params(cli)?, backend.as_ref())?;
    let trace: String = report.trace.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect();
    let files = [
        ("report.json", json(&report)),
        ("trace.jsonl", trace),
        ("series.csv", series_csv(&report)),
        ("decision.json", json(&report.decision)),
        ("worst-scenario.json", json(&report.worst)),
    ];
    if let Some(dir) = &cli.out {
        write_all(dir, &files)?;
    }
    let _ = write!(out, "{}", summary(&report));
    Ok(if report.converged { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn validate(cli: &Cli, inst_path: &Path, decision: &Path, scenario: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let inst = load_instance(inst_path)?;
    let value: serde_json::Value = parse(&read(decision)?, "decision")?;
    let value = value.get("decision").cloned().unwrap_or(value);
    let d: FirstStageDecision = serde_json::from_value(value).map_err(|e| Failure(EXIT_USAGE, format!("decision: {e}")))?;
    let sigma = if matches!(scenario, "zero" | "sigma-zero") {
        ScenarioRealization::for_instance(&inst)
    } else {
        parse(&read(Path::new(scenario))?, "scenario")?
    };
    let backend = backend(&cli.backend)?;
    let check = validate_schedule(&inst, &d, &sigma, backend.as_ref())?;
    for v in &check.violations {
        let slot = v.slot.map_or_else(String::new, |t| format!(" slot {t}"));
        let _ = writeln!(out, "violation [{}] {}{}: {}", v.family, v.entity, slot, v.message);
    }
    match check.objective() {
        Some(obj) if check.feasible() => {
            let _ = writeln!(out, "feasible, objective {obj:.6}");
            Ok(EXIT_OK)
        }
        Some(obj) => {
            let _ = writeln!(out, "infeasible, operation cost {obj:.6}");
            Ok(EXIT_INFEASIBLE)
        }
        None => {
            let _ = writeln!(out, "infeasible");
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn oracle(cli: &Cli, path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let inst = load_instance(path)?;
    let backend = backend(&cli.backend)?;
    let result = match enumerate_oracle(&inst, backend.as_ref()) {
        Ok(r) => r,
        Err(OracleError::Caps(m)) => return Err(Failure(EXIT_USAGE, format!("oracle refused: {m}"))),
        Err(OracleError::Infeasible) => return Err(Failure(EXIT_INFEASIBLE, OracleError::Infeasible.to_string())),
        Err(OracleError::Solve(e)) => return Err(e.into()),
    };
    if let Some(dir) = &cli.out {
        let body = serde_json::json!({
            "objective": result.objective,
            "schedules": result.schedules,
            "decision": result.decision,
            "worst": result.worst,
        });
        write_all(dir, &[("oracle.json", json(&body))])?;
    }
    let _ = writeln!(out, "oracle objective {:.6} over {} schedules", result.objective, result.schedules);
    Ok(EXIT_OK)
}

fn export(cli: &Cli, path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let inst = load_instance(path)?;
    let cm = assemble_compact(&inst)?;
    let lp = cm.builder.to_lp_format();
    match &cli.out {
        Some(dir) => {
            write_all(dir, &[("model.lp", lp)])?;
            let [a, b, c] = cm.family_counts();
            let _ = writeln!(
                out,
                "{} variables, {} rows (schedule {a}, operation {b}, uncertainty {c})",
                cm.builder.vars.len(),
                cm.builder.rows.len()
            );
        }
        None => {
            let _ = out.write_all(lp.as_bytes());
        }
    }
    Ok(EXIT_OK)
}

fn report(cli: &Cli, path: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let report: ScheduleReport = parse(&read(path)?, "report")?;
    let csv = series_csv(&report);
    match &cli.out {
        Some(dir) => {
            write_all(dir, &[("series.csv", csv)])?;
            let _ = write!(out, "{}", summary(&report));
        }
        None => {
            let _ = write!(out, "{}{csv}", summary(&report));
        }
    }
    Ok(EXIT_OK)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let result = match &cli.command {
        Command::Solve { instance } => solve(&cli, instance, out),
        Command::Validate { instance, decision, scenario } => validate(&cli, instance, decision, scenario, out),
        Command::EnumerateOracle { instance } => oracle(&cli, instance, out),
        Command::ExportModel { instance } => export(&cli, instance, out),
        Command::Report { report: path } => report(&cli, path, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}
