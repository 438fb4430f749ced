//! `sirnet` command line.
//!
//! Exit status: 0 when everything holds, 1 when a claim is violated (or a
//! run fails numerically), 2 for usage, input, and validation errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sirnet_core::analysis::{find_global_peak, run_theorem_suite, Verdict};
use sirnet_core::scenario_io::{
    check_seeds, export_run, import_trajectory, load_scenario, run_scenario, GeneratorSpec,
    Scenario, ScenarioError, TrajectoryFormat, TrialSummary, TRAJECTORY_CSV, TRAJECTORY_JSON,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sirnet",
    version,
    about = "Networked SIR simulation and threshold checks"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Override the integration step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Override the horizon.
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Keep the horizon fixed instead of extending it until the outbreak dies out.
    #[arg(long = "no-extend", global = true)]
    no_extend: bool,
    /// Trajectory file format.
    #[arg(long, global = true, default_value = "csv", value_parser = parse_format)]
    format: TrajectoryFormat,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario file and export every artifact.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the checks on a stored run directory; writes analysis.json.
    Analyze { dir: PathBuf },
    /// Generate and check `trials` random scenarios, seeds k..k+trials-1.
    Check {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Parallel batch over a seed range (`a..b` or `a..=b`).
    Sweep {
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedRange,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
struct SeedRange(Vec<u64>);

fn parse_seeds(text: &str) -> Result<SeedRange, String> {
    let (a, b, inclusive) = if let Some((a, b)) = text.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = text.split_once("..") {
        (a, b, false)
    } else {
        return Err(format!("expected a..b or a..=b, got `{text}`"));
    };
    let a: u64 = a.trim().parse().map_err(|e| format!("start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("end: {e}"))?;
    let seeds: Vec<u64> = if inclusive {
        (a..=b).collect()
    } else {
        (a..b).collect()
    };
    if seeds.is_empty() {
        return Err(format!("empty seed range `{text}`"));
    }
    Ok(SeedRange(seeds))
}

fn parse_format(text: &str) -> Result<TrajectoryFormat, String> {
    text.parse()
}

impl Global {
    fn apply(&self, scenario: &mut Scenario) {
        if let Some(dt) = self.dt {
            scenario.settings.dt = dt;
        }
        if let Some(t_end) = self.t_end {
            scenario.settings.t_end = t_end;
        }
        if self.no_extend {
            scenario.settings.extend_until = None;
        }
    }
}

/// Exit code of a failed operation: numerical failures count as violations,
/// everything else as bad input.
fn error_code(err: &ScenarioError) -> i32 {
    match err {
        ScenarioError::Integration(sirnet_core::IntegrationError::InvariantViolation {
            ..
        }) => EXIT_VIOLATION,
        ScenarioError::Spectral(_) | ScenarioError::Analysis(_) => EXIT_VIOLATION,
        _ => EXIT_USAGE,
    }
}

fn fail(err: ScenarioError) -> i32 {
    eprintln!("error: {err}");
    error_code(&err)
}

fn simulate(global: &Global, scenario_path: &Path, out: &Path) -> i32 {
    let mut scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    global.apply(&mut scenario);
    if let Err(e) = scenario.settings.validate() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let run = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Err(e) = export_run(&run, out, global.format) {
        return fail(e);
    }
    let violated: Vec<&str> = run.violated().map(|r| r.claim.as_str()).collect();
    let tau = run.peak.as_ref().and_then(|p| p.tau_p);
    eprintln!(
        "{} samples to t = {}; R(0) = {:.6}; tau_p = {}; wrote {}",
        run.trajectory.len(),
        run.trajectory.times.last().copied().unwrap_or(0.0),
        run.metrics.first().map_or(f64::NAN, |m| m.global_r),
        tau.map_or("none".into(), |t| format!("{t:.6}")),
        out.display()
    );
    if violated.is_empty() {
        EXIT_OK
    } else {
        eprintln!("violated: {}", violated.join(", "));
        EXIT_VIOLATION
    }
}

fn analyze(dir: &Path) -> i32 {
    let scenario = match load_scenario(&dir.join("scenario.json")) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let Some(path) = [TRAJECTORY_CSV, TRAJECTORY_JSON]
        .iter()
        .map(|name| dir.join(name))
        .find(|p| p.is_file())
    else {
        eprintln!(
            "error: {}: no {TRAJECTORY_CSV} or {TRAJECTORY_JSON}",
            dir.display()
        );
        return EXIT_USAGE;
    };
    let trajectory = match import_trajectory(&path) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    if trajectory.is_empty() {
        eprintln!("error: {}: no samples", path.display());
        return EXIT_USAGE;
    }
    let (n, m) = (trajectory.states[0].n(), trajectory.states[0].m());
    if (n, m) != (scenario.params.n(), scenario.params.m()) {
        eprintln!(
            "error: {} has n = {n}, m = {m}; scenario has n = {}, m = {}",
            path.display(),
            scenario.params.n(),
            scenario.params.m()
        );
        return EXIT_USAGE;
    }
    let theorems = run_theorem_suite(&trajectory, &scenario.params);
    let peak = find_global_peak(&trajectory, &scenario.params);
    let peak_value = match &peak {
        Ok(p) => serde_json::to_value(p).expect("peak serializes"),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    };
    let report = serde_json::json!({ "theorems": theorems, "peak": peak_value });
    let out = dir.join("analysis.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    if let Err(e) = std::fs::write(&out, text) {
        eprintln!("error: {}: {e}", out.display());
        return EXIT_USAGE;
    }
    let mut code = EXIT_OK;
    for r in &theorems {
        eprintln!("{:<7} {:?} ({} checks)", r.claim, r.verdict, r.checks);
        if r.verdict == Verdict::Violated {
            code = EXIT_VIOLATION;
        }
    }
    if let Err(e) = peak {
        eprintln!("peak: {e}");
        code = EXIT_VIOLATION;
    }
    code
}

fn batch(global: &Global, seeds: &[u64], jobs: usize, out: Option<&Path>) -> i32 {
    let configure = |s: &mut Scenario| global.apply(s);
    let spec = GeneratorSpec::default();
    let summaries = match check_seeds(
        &spec,
        seeds,
        &configure,
        out.map(|d| (d, global.format)),
        jobs,
    ) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    report_trials(&summaries)
}

fn report_trials(summaries: &[TrialSummary]) -> i32 {
    let mut violations = 0;
    let mut errors = 0;
    for s in summaries {
        if let Some(err) = &s.error {
            errors += 1;
            eprintln!("seed {}: error: {err}", s.seed);
        } else if !s.violations.is_empty() {
            violations += 1;
            eprintln!("seed {}: violated {}", s.seed, s.violations.join(", "));
        } else {
            eprintln!(
                "seed {}: ok (R(0) = {:.6}, tau_p = {})",
                s.seed,
                s.r_initial.unwrap_or(f64::NAN),
                s.tau_p.map_or("none".into(), |t| format!("{t:.6}"))
            );
        }
    }
    eprintln!(
        "{} trials, {} with violations, {} errors",
        summaries.len(),
        violations,
        errors
    );
    if violations > 0 {
        EXIT_VIOLATION
    } else if errors > 0 {
        EXIT_USAGE
    } else {
        EXIT_OK
    }
}

/// Runs the command line; `args` includes the program name.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let g = &cli.global;
    match &cli.command {
        Command::Simulate { scenario, out } => simulate(g, scenario, out),
        Command::Analyze { dir } => analyze(dir),
        Command::Check {
            seed,
            trials,
            out,
            jobs,
        } => {
            let Some(end) = seed.checked_add(*trials) else {
                eprintln!("error: seed range overflows");
                return EXIT_USAGE;
            };
            let seeds: Vec<u64> = (*seed..end).collect();
            batch(g, &seeds, *jobs, out.as_deref())
        }
        Command::Sweep { seeds, jobs, out } => batch(g, &seeds.0, *jobs, out.as_deref()),
    }
}

pub fn exit_code(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}
