mod error;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use batchstaff::scenarios::{
    apply_overrides, convergence_from_config, curve_table, exceedance_rows, exceedance_table,
    hourly_profile, metro_scenarios, parse_config, parse_metros, profile_table, rows_table,
    run_staff, run_table, scenario_fleet_curve, scenarios_from_config, simulation_from_config,
    staff_table, verify_table, ConfigFile, Manifest, Scenario, SimulationModel, Table,
};
use batchstaff::simkit::{batch_scaling_study, simulate_queue, simulate_storage, SimResult};
use clap::{Args, Parser, Subcommand};

use error::CliError;

const TABLE_CONF: &str = include_str!("../../../configs/table.conf");
const FLEET_CONF: &str = include_str!("../../../configs/fleet.conf");
const PROFILE_CONF: &str = include_str!("../../../configs/profile.conf");
const EXCEEDANCE_CONF: &str = include_str!("../../../configs/exceedance.conf");
const STAFF_CONF: &str = include_str!("../../../configs/staff.conf");
const SIMULATE_CONF: &str = include_str!("../../../configs/simulate.conf");
const CONVERGE_CONF: &str = include_str!("../../../configs/converge.conf");

/// Points in the default CDF grid of `simulate`.
const DEFAULT_GRID_POINTS: usize = 41;

#[derive(Parser, Debug)]
#[command(
    name = "batchstaff",
    version,
    about = "Staffing ratios for service systems that receive large batch arrivals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Io {
    /// Scenario file; the command's bundled example is used when absent
    #[arg(short, long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override `key=value` in every section (repeatable)
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Restrict to the `[scenario.<NAME>]` section
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Result file, `-` for standard output
    #[arg(short, long, value_name = "FILE", default_value = "-")]
    out: PathBuf,
    /// Manifest file [default: <out>.manifest; none when writing to standard output]
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Print diagnostics to standard error
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exceedance probabilities, upper bound and utilization at given ratios
    Exceedance {
        #[command(flatten)]
        io: Io,
        /// Ratios c, comma separated
        #[arg(long = "c", value_name = "C", value_delimiter = ',', required = true)]
        c: Vec<f64>,
    },
    /// Smallest ratio meeting each scenario's criterion
    Staff {
        #[command(flatten)]
        io: Io,
    },
    /// Peak-hour ratios under both criteria for a set of metro areas
    Table {
        #[command(flatten)]
        io: Io,
        /// Metro table (`rank,metro,annual_miles_millions,...`) run with the
        /// settings of the config's first scenario
        #[arg(long, value_name = "FILE")]
        metros: Option<PathBuf>,
    },
    /// Staffing against fleet size
    Curve {
        #[command(flatten)]
        io: Io,
    },
    /// One static solve per hour of a 24-hour demand series
    Profile {
        #[command(flatten)]
        io: Io,
    },
    /// Monte-Carlo replications of a batch queue or storage process
    Simulate {
        #[command(flatten)]
        io: Io,
        /// Also write every replication's sample path
        #[arg(long, value_name = "FILE")]
        paths: Option<PathBuf>,
    },
    /// Kolmogorov-Smirnov distance of scaled queues to their storage limit
    Converge {
        #[command(flatten)]
        io: Io,
    },
    /// Re-parse a result table and recompute its utilization and staff columns
    Verify { file: PathBuf },
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || !k.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_') {
        return Err(format!("invalid key `{k}`"));
    }
    Ok((k.to_string(), v.to_string()))
}

/// Parsed config with overrides applied, plus provenance for the manifest.
struct Loaded {
    file: ConfigFile,
    source: String,
}

fn load(io: &Io, bundled: &str) -> Result<Loaded, CliError> {
    let (text, source) = match &io.config {
        Some(p) => (
            fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("reading {}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (bundled.to_string(), "bundled".to_string()),
    };
    let mut file = parse_config(&text)?;
    apply_overrides(&mut file, &io.overrides);
    Ok(Loaded { file, source })
}

fn scenarios(loaded: &Loaded, only: Option<&str>) -> Result<Vec<Scenario>, CliError> {
    let all = scenarios_from_config(&loaded.file)?;
    match only {
        None => Ok(all),
        Some(name) => {
            let picked: Vec<Scenario> = all.into_iter().filter(|s| s.name == name).collect();
            if picked.is_empty() {
                Err(CliError::config(format!("no [scenario.{name}] section")))
            } else {
                Ok(picked)
            }
        }
    }
}

fn single(loaded: &Loaded, only: Option<&str>) -> Result<Scenario, CliError> {
    let mut list = scenarios(loaded, only)?;
    if list.len() != 1 {
        return Err(CliError::config(
            "several scenarios; choose one with --scenario",
        ));
    }
    Ok(list.remove(0))
}

fn manifest(command: &str, io: &Io, loaded: &Loaded) -> Manifest {
    let mut m = Manifest::new(command);
    m.push("config", &loaded.source);
    for (k, v) in &io.overrides {
        m.push("override", format!("{k}={v}"));
    }
    m
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if path.as_os_str() == "-" {
        let mut out = io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush())
    } else {
        fs::write(path, bytes)
    }
    .map_err(|e| CliError::io(&format!("writing {}", path.display()), e))
}

/// Writes the result and its manifest.
fn emit(io: &Io, result: &[u8], mut m: Manifest) -> Result<(), CliError> {
    write_bytes(&io.out, result)?;
    let to_stdout = io.out.as_os_str() == "-";
    let target = match (&io.manifest, to_stdout) {
        (Some(p), _) => Some(p.clone()),
        (None, false) => {
            let mut name = io.out.clone().into_os_string();
            name.push(".manifest");
            Some(PathBuf::from(name))
        }
        (None, true) => None,
    };
    if let Some(p) = target {
        m.push(
            "result",
            if to_stdout {
                "-".to_string()
            } else {
                file_name(&io.out)
            },
        );
        write_bytes(&p, m.to_text().as_bytes())?;
    }
    Ok(())
}

/// Final path component, so manifests do not depend on the working directory.
fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(
        || p.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    )
}

fn emit_table(io: &Io, table: &Table, mut m: Manifest) -> Result<(), CliError> {
    m.push("rows", table.rows.len());
    emit(io, table.to_csv_string().as_bytes(), m)
}

fn cmd_exceedance(io: &Io, cs: &[f64]) -> Result<(), CliError> {
    let loaded = load(io, EXCEEDANCE_CONF)?;
    let s = single(&loaded, io.scenario.as_deref())?;
    let rows = exceedance_rows(&s, cs)?;
    if io.verbose {
        for r in &rows {
            eprintln!(
                "c = {}: p0 = {:e}, p1 = {:e}, bound = {:e}",
                r.c, r.p0, r.p1, r.upper_bound
            );
        }
    }
    let mut m = manifest("exceedance", io, &loaded);
    m.scenario(&s);
    let list: Vec<String> = cs.iter().map(f64::to_string).collect();
    m.push("c", list.join(","));
    emit_table(io, &exceedance_table(&rows), m)
}

fn cmd_staff(io: &Io) -> Result<(), CliError> {
    let loaded = load(io, STAFF_CONF)?;
    let list = scenarios(&loaded, io.scenario.as_deref())?;
    let rows = run_staff(&list)?;
    if io.verbose {
        for r in &rows {
            eprintln!(
                "{}: c = {} ({}), achieved {:?}",
                r.label,
                r.c,
                r.criterion.name(),
                r.achieved
            );
        }
    }
    let mut m = manifest("staff", io, &loaded);
    list.iter().for_each(|s| m.scenario(s));
    emit_table(io, &staff_table(&rows), m)
}

fn cmd_table(io: &Io, metros: Option<&Path>) -> Result<(), CliError> {
    let loaded = load(io, TABLE_CONF)?;
    let mut m = manifest("table", io, &loaded);
    let list = match metros {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("reading {}: {e}", p.display())))?;
            let metros = parse_metros(&text)?;
            let base = scenarios(&loaded, io.scenario.as_deref())?.remove(0);
            m.push("metros", p.display());
            metro_scenarios(&base, &metros)
        }
        None => scenarios(&loaded, io.scenario.as_deref())?,
    };
    let rows = run_table(&list)?;
    if io.verbose {
        for r in &rows {
            eprintln!(
                "{}: lambda = {}, c_p0 = {}, c_p1 = {}",
                r.label, r.lambda_per_hour, r.c_p0, r.c_p1
            );
        }
    }
    list.iter().for_each(|s| m.scenario(s));
    emit_table(io, &rows_table(&rows), m)
}

fn cmd_curve(io: &Io) -> Result<(), CliError> {
    let loaded = load(io, FLEET_CONF)?;
    let s = single(&loaded, io.scenario.as_deref())?;
    let points = scenario_fleet_curve(&s)?;
    let mut m = manifest("curve", io, &loaded);
    m.scenario(&s);
    emit_table(io, &curve_table(&s, &points), m)
}

fn cmd_profile(io: &Io) -> Result<(), CliError> {
    let loaded = load(io, PROFILE_CONF)?;
    let s = single(&loaded, io.scenario.as_deref())?;
    let hours = hourly_profile(&s)?;
    let mut m = manifest("profile", io, &loaded);
    m.scenario(&s);
    emit_table(io, &profile_table(&s, &hours), m)
}

/// Raw entries of `[system]` and the chosen section, for commands whose
/// inputs are not staffing scenarios.
fn push_sections(m: &mut Manifest, file: &ConfigFile, name: &str) {
    for e in &file.system.entries {
        m.push(format!("system.{}", e.key), &e.value);
    }
    if let Some(sec) = file.scenarios.iter().find(|s| s.name == name) {
        for e in &sec.entries {
            m.push(format!("scenario.{name}.{}", e.key), &e.value);
        }
    }
}

fn default_grid(result: &SimResult) -> Vec<f64> {
    let max = result.terminal.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return vec![0.0];
    }
    (0..DEFAULT_GRID_POINTS)
        .map(|i| max * i as f64 / (DEFAULT_GRID_POINTS - 1) as f64)
        .collect()
}

fn cmd_simulate(io: &Io, paths: Option<&Path>) -> Result<(), CliError> {
    let loaded = load(io, SIMULATE_CONF)?;
    let cfg = simulation_from_config(&loaded.file, io.scenario.as_deref())?;
    let mut opts = cfg.options;
    if paths.is_some() {
        opts = opts.with_paths();
    }
    let result = match &cfg.model {
        SimulationModel::Queue(q) => {
            let r = simulate_queue(q, &opts)?;
            if cfg.scale_by_batch {
                r.scaled(q.batch.index() as f64)
            } else {
                r
            }
        }
        SimulationModel::Storage(s) => simulate_storage(s, &opts)?,
    };
    if io.verbose {
        eprintln!(
            "{}: mean {}, variance {}, busy fraction {:?}",
            cfg.label, result.mean, result.variance, result.busy_fraction
        );
    }
    if result.unstable {
        eprintln!("warning: offered load meets or exceeds capacity");
    }
    let grid = if cfg.cdf_grid.is_empty() {
        default_grid(&result)
    } else {
        cfg.cdf_grid.clone()
    };
    let mut text = Vec::new();
    result
        .write_summary(&mut text, &grid)
        .map_err(|e| CliError::io("formatting summary", e))?;
    let mut m = manifest("simulate", io, &loaded);
    push_sections(&mut m, &loaded.file, &cfg.name);
    m.push("seed", opts.seed);
    m.push("reps", opts.reps);
    if let Some(p) = paths {
        let mut buf = Vec::new();
        result
            .write_paths(&mut buf)
            .map_err(|e| CliError::io("formatting paths", e))?;
        write_bytes(p, &buf)?;
        m.push("paths", file_name(p));
    }
    emit(io, &text, m)
}

fn cmd_converge(io: &Io) -> Result<(), CliError> {
    let loaded = load(io, CONVERGE_CONF)?;
    let (label, study) = convergence_from_config(&loaded.file, io.scenario.as_deref())?;
    let report = batch_scaling_study(&study)?;
    if io.verbose {
        for p in &report.points {
            eprintln!("{label}: n = {}, ks = {}", p.n, p.ks);
        }
    }
    let header = ["n", "ks", "queue_mean", "storage_mean", "limit"]
        .map(String::from)
        .to_vec();
    let rows = report
        .points
        .iter()
        .map(|p| {
            vec![
                p.n.to_string(),
                p.ks.to_string(),
                p.queue_mean.to_string(),
                report.storage_mean.to_string(),
                study.limit.name().to_string(),
            ]
        })
        .collect();
    let name = batchstaff::scenarios::select_section(&loaded.file, io.scenario.as_deref())?
        .name
        .clone();
    let mut m = manifest("converge", io, &loaded);
    push_sections(&mut m, &loaded.file, &name);
    m.push("seed", study.options.seed);
    m.push("reps", study.options.reps);
    m.push("ks_strictly_decreasing", report.ks_strictly_decreasing());
    emit_table(io, &Table { header, rows }, m)
}

fn cmd_verify(file: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(file)
        .map_err(|e| CliError::config(format!("reading {}: {e}", file.display())))?;
    let rows = verify_table(&text)?;
    println!("{}: {rows} rows verified", file.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Exceedance { io, c } => cmd_exceedance(io, c),
        Command::Staff { io } => cmd_staff(io),
        Command::Table { io, metros } => cmd_table(io, metros.as_deref()),
        Command::Curve { io } => cmd_curve(io),
        Command::Profile { io } => cmd_profile(io),
        Command::Simulate { io, paths } => cmd_simulate(io, paths.as_deref()),
        Command::Converge { io } => cmd_converge(io),
        Command::Verify { file } => cmd_verify(file),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                error::EXIT_CONFIG
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
