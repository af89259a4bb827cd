//! `acdisc`: command-line front end for the disc toolkit.

mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acdisc::constants::Constants;
use acdisc::scene::SceneFile;
use clap::{Parser, ValueEnum};

use crate::run::{execute, Invocation, Report};

const EXIT_PRECONDITION: u8 = 2;
const EXIT_INTERNAL: u8 = 1;
const EXIT_USAGE: u8 = 64;

/// Environment variable naming a constants manifest that replaces the built-in one.
const CONSTANTS_ENV: &str = "ACDISC_CONSTANTS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Validate,
    Levi,
    Lambda0,
    PshBuild,
    Chart,
    SolveDisc,
    Attach,
    Kobayashi,
    Study,
    Constants,
}

impl Command {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "acdisc", version, about = "Pseudo-holomorphic discs, Levi forms and Kobayashi bounds")]
struct Cli {
    #[arg(value_enum, required_unless_present = "check")]
    command: Option<Command>,
    /// Scene file (JSON).
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Directory for reports and tables.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Disc grid resolution N (spacing 1/N).
    #[arg(long)]
    grid: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    anchor: Option<Vec<f64>>,
    /// Direction, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    dir: Option<Vec<f64>>,
    /// Name of the scalar field in the scene.
    #[arg(long)]
    scalar: Option<String>,
    /// Recompute the headline number of a report and compare.
    #[arg(long, conflicts_with = "command")]
    check: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] acdisc::Error),
    #[error("check failed: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_precondition() => EXIT_PRECONDITION,
            _ => EXIT_INTERNAL,
        }
    }
}

fn load_constants(scene: &SceneFile) -> Result<Constants, CliError> {
    let env = std::env::var_os(CONSTANTS_ENV).map(PathBuf::from);
    Ok(scene.constants(env.as_deref())?)
}

fn format_value(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.6e}")
    }
}

fn write_report(out: &Path, report: &Report) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{}.report.json", report.invocation.command));
    std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
    Ok(path)
}

fn run_command(cli: &Cli, command: Command) -> Result<bool, CliError> {
    let scene_path = cli
        .scene
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("{} requires --scene", command.name())))?;
    let scene = SceneFile::load(scene_path)?;
    let constants = load_constants(&scene)?;
    let inv = Invocation {
        command: command.name(),
        scene,
        seed: cli.seed,
        tol: cli.tol,
        grid: cli.grid,
        anchor: cli.anchor.clone(),
        dir: cli.dir.clone(),
        scalar: cli.scalar.clone(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let outcome = execute(&inv, &constants, &cli.out)?;
    let path = write_report(&cli.out, &outcome.report)?;
    let h = &outcome.report.headline;
    let mut line = format!("command={} {}={}", inv.command, h.key, format_value(h.value));
    for (k, v) in &outcome.summary {
        line.push_str(&format!(" {k}={v}"));
    }
    line.push_str(&format!(" passed={} report={}", outcome.report.passed, path.display()));
    println!("{line}");
    Ok(outcome.report.passed)
}

fn run_check(cli: &Cli, path: &Path) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(path)?;
    let recorded: Report = serde_json::from_str(&text)?;
    let constants = load_constants(&recorded.invocation.scene)?;
    if constants.hash() != recorded.constants_sha256 {
        return Err(CliError::Mismatch(format!(
            "constants hash {} differs from the report's {}",
            constants.hash(),
            recorded.constants_sha256
        )));
    }
    let scratch = cli.out.join(".check");
    std::fs::create_dir_all(&scratch)?;
    let outcome = execute(&recorded.invocation, &constants, &scratch);
    let _ = std::fs::remove_dir_all(&scratch);
    let fresh = outcome?.report.headline.value;
    let h = &recorded.headline;
    let ok = h.agrees(fresh);
    println!(
        "command={} check={} {}={} recomputed={} diff={:.3e}",
        recorded.invocation.command,
        if ok { "pass" } else { "fail" },
        h.key,
        format_value(h.value),
        format_value(fresh),
        (h.value - fresh).abs()
    );
    if !ok {
        return Err(CliError::Mismatch(format!("{} changed from {} to {fresh}", h.key, h.value)));
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match (&cli.check, cli.command) {
        (Some(path), _) => run_check(&cli, path),
        (None, Some(cmd)) => run_command(&cli, cmd),
        (None, None) => Err(CliError::Usage("a command or --check is required".into())),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_PRECONDITION),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
