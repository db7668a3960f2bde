//! Command line front end: spec ingestion, analysis reports, simulation
//! runs, crossing tables and seed sweeps.
//!
//! Exit codes: 0 success, 2 parse/validation or flag errors, 3 integration
//! faults, 4 regime errors (no crossing, mixed gains, non-P community
//! matrix).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use lv_attract::criteria::{analyze, CriteriaError, Prediction, Verdict};
use lv_attract::dynamics::{
    detect_convergence, detect_oscillation, integrate, DynamicsError, Trajectory, DEFAULT_HORIZON,
    DEFAULT_STEP, DEFAULT_TOL, DEFAULT_WINDOW,
};
use lv_attract::equilibria::{spec_equilibrium, EquilibriumError, SaturatedEquilibrium};
use lv_attract::export::{gnuplot_script, thresholds_csv, trajectory_csv, write_text};
use lv_attract::fixtures::{competitive_pair, predator_prey_pair, scalar_memory_control};
use lv_attract::matrix::build_matrices;
use lv_attract::model::{InitialData, SystemSpec};
use lv_attract::schema::{load_spec, spec_hash, to_toml, SchemaError};
use lv_attract::spectral::{build_hopf_fixture, hopf_thresholds, SpectralError};

#[derive(Parser)]
#[command(name = "lv-attract", version, about = "Attractivity analysis and simulation for delayed population systems with feedback controls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a spec: community matrices, certificates, fired criterion.
    Analyze {
        /// TOML spec file.
        spec: PathBuf,
        /// Emit the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Integrate a spec and classify the outcome against a target.
    Simulate {
        /// TOML spec file.
        spec: PathBuf,
        /// Step size.
        #[arg(long, default_value_t = DEFAULT_STEP)]
        h: f64,
        /// Final time.
        #[arg(long = "T", default_value_t = DEFAULT_HORIZON)]
        t_final: f64,
        /// Seed for the random constant initial history.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Explicit constant initial data `x1,..,xn[;u1,..,un]`
        /// (overrides --seed; u defaults to d_i x_i / e_i).
        #[arg(long)]
        init: Option<String>,
        /// `auto` (analysis attractor), `none`, or a point
        /// `x1,..,xn[;u1,..,un]`.
        #[arg(long, default_value = "auto")]
        target: String,
        /// Terminal window for the detectors.
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: f64,
        /// Convergence tolerance.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Write the trajectory CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write a gnuplot script here (requires --csv).
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Append a JSON run record to this file.
        #[arg(long)]
        record: Option<PathBuf>,
    },
    /// Imaginary-axis crossing table tau_0..tau_n as CSV.
    Hopf {
        /// Decay coefficient of the reduced equation.
        #[arg(long)]
        b: f64,
        /// Delayed coefficient; needs c > b^2 for a crossing.
        #[arg(long)]
        c: f64,
        /// Largest index to tabulate.
        #[arg(long, default_value_t = 0)]
        n: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print a built-in fixture spec as TOML.
    Fixture {
        /// One of: example-5.1-uncontrolled, example-5.1-controlled,
        /// example-5.2-uncontrolled, example-5.2-controlled,
        /// example-4.1-scalar, hopf.
        name: String,
        /// Reduced-equation parameters for the hopf fixture.
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 2.0)]
        c: f64,
        /// Interaction delay for the hopf fixture.
        #[arg(long, default_value_t = 1.2)]
        tau: f64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one spec over many seeds in parallel; one CSV per run
    /// plus a shared run-record index.
    Sweep {
        /// TOML spec file.
        spec: PathBuf,
        /// Seeds 1..=N.
        #[arg(long, default_value_t = 8)]
        seeds: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEP)]
        h: f64,
        #[arg(long = "T", default_value_t = DEFAULT_HORIZON)]
        t_final: f64,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: f64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
}

#[derive(Debug)]
enum CliError {
    Schema(SchemaError),
    Dynamics(DynamicsError),
    Spectral(SpectralError),
    Criteria(CriteriaError),
    Equilibrium(EquilibriumError),
    Flag(String),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(e) => write!(f, "{e}"),
            CliError::Dynamics(e) => write!(f, "{e}"),
            CliError::Spectral(e) => write!(f, "{e}"),
            CliError::Criteria(e) => write!(f, "{e}"),
            CliError::Equilibrium(e) => write!(f, "{e}"),
            CliError::Flag(msg) => write!(f, "{msg}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) | CliError::Flag(_) => 2,
            CliError::Dynamics(e) => match e {
                DynamicsError::PositivityViolation { .. } | DynamicsError::NonFiniteState { .. } => 3,
                _ => 2,
            },
            CliError::Spectral(_) | CliError::Criteria(_) | CliError::Equilibrium(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::Schema(e)
    }
}
impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Dynamics(e)
    }
}
impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        CliError::Spectral(e)
    }
}
impl From<CriteriaError> for CliError {
    fn from(e: CriteriaError) -> Self {
        CliError::Criteria(e)
    }
}
impl From<EquilibriumError> for CliError {
    fn from(e: EquilibriumError) -> Self {
        CliError::Equilibrium(e)
    }
}
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze { spec, json } => cmd_analyze(&spec, json),
        Command::Simulate {
            spec,
            h,
            t_final,
            seed,
            init,
            target,
            window,
            tol,
            csv,
            plot,
            record,
        } => cmd_simulate(SimulateArgs {
            spec,
            h,
            t_final,
            seed,
            init,
            target,
            window,
            tol,
            csv,
            plot,
            record,
        }),
        Command::Hopf { b, c, n, csv } => cmd_hopf(b, c, n, csv),
        Command::Fixture { name, b, c, tau, out } => cmd_fixture(&name, b, c, tau, out),
        Command::Sweep {
            spec,
            seeds,
            out,
            h,
            t_final,
            window,
            tol,
        } => cmd_sweep(&spec, seeds, &out, h, t_final, window, tol),
    }
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn fmt_matrix(m: &nalgebra::DMatrix<f64>) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols()).map(|j| format!("{}", m[(i, j)])).collect();
            cells.join(", ")
        })
        .collect();
    format!("[{}]", rows.join("; "))
}

fn fmt_vec(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", cells.join(", "))
}

#[derive(Serialize)]
struct AnalyzeReport {
    spec: String,
    hash: String,
    n: usize,
    controlled: bool,
    alpha: Vec<f64>,
    matrices: MatrixReport,
    equilibrium: SaturatedEquilibrium,
    verdict: Verdict,
}

#[derive(Serialize)]
struct MatrixReport {
    m0: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    m0_hat: Vec<Vec<f64>>,
    m_hat: Vec<Vec<f64>>,
    m0_minus: Vec<Vec<f64>>,
}

fn cmd_analyze(path: &Path, json: bool) -> Result<(), CliError> {
    let spec = load_spec(path)?;
    let verdict = analyze(&spec)?;
    let equilibrium = spec_equilibrium(&spec)?;
    let mats = build_matrices(&spec);

    if json {
        let report = AnalyzeReport {
            spec: path.display().to_string(),
            hash: spec_hash(&spec),
            n: spec.n(),
            controlled: !spec.is_uncontrolled(),
            alpha: (0..spec.n()).map(|i| spec.alpha(i)).collect(),
            matrices: MatrixReport {
                m0: matrix_rows(&mats.m0),
                m: matrix_rows(&mats.m),
                m0_hat: matrix_rows(&mats.m0_hat),
                m_hat: matrix_rows(&mats.m_hat),
                m0_minus: matrix_rows(&mats.m0_minus),
            },
            equilibrium,
            verdict,
        };
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }

    let mut out = String::new();
    writeln!(out, "spec {}  hash {}", path.display(), spec_hash(&spec)).unwrap();
    writeln!(
        out,
        "n = {}, {}",
        spec.n(),
        if spec.is_uncontrolled() {
            "uncontrolled".to_string()
        } else {
            format!(
                "controlled, alpha = {}",
                fmt_vec(&(0..spec.n()).map(|i| spec.alpha(i)).collect::<Vec<_>>())
            )
        }
    )
    .unwrap();
    writeln!(out, "community matrices:").unwrap();
    writeln!(out, "  M0      = {}", fmt_matrix(&mats.m0)).unwrap();
    writeln!(out, "  M       = {}", fmt_matrix(&mats.m)).unwrap();
    writeln!(out, "  M0_hat  = {}", fmt_matrix(&mats.m0_hat)).unwrap();
    writeln!(out, "  M_hat   = {}", fmt_matrix(&mats.m_hat)).unwrap();
    writeln!(out, "  M0_minus= {}", fmt_matrix(&mats.m0_minus)).unwrap();
    writeln!(
        out,
        "saturated equilibrium: x* = {}, u* = {}, support {:?}, gap {:.2e}",
        fmt_vec(&equilibrium.x),
        fmt_vec(&equilibrium.u),
        equilibrium.support.iter().map(|i| i + 1).collect::<Vec<_>>(),
        equilibrium.gap
    )
    .unwrap();
    writeln!(out, "criterion: {}", verdict.criterion.label()).unwrap();
    match &verdict.prediction {
        Prediction::GlobalAttractor { attractor, gas } => writeln!(
            out,
            "prediction: global attractor x* = {}, u* = {}{}",
            fmt_vec(&attractor.x),
            fmt_vec(&attractor.u),
            if *gas { " (asymptotically stable)" } else { "" }
        )
        .unwrap(),
        Prediction::DissipativeOnly { bound } => writeln!(
            out,
            "prediction: dissipative only, eventual bound {}",
            fmt_vec(&bound.x)
        )
        .unwrap(),
        Prediction::Inconclusive => writeln!(out, "prediction: inconclusive").unwrap(),
    }
    if let Some(planar) = &verdict.planar {
        if let Some(case) = &planar.case {
            writeln!(
                out,
                "planar case: {}{}, conditions {}",
                case.case.label(),
                if case.mirrored { " (mirrored)" } else { "" },
                if case.conditions_hold { "hold" } else { "do not all hold" }
            )
            .unwrap();
        }
    }
    if verdict.perturbation_extends {
        writeln!(out, "perturbation: decaying disturbance present, conclusion extends").unwrap();
    }
    writeln!(out, "trail:").unwrap();
    for eval in &verdict.evaluations {
        writeln!(
            out,
            "  {:<28} {} {}",
            eval.tag.label(),
            if eval.fired {
                "fired   "
            } else if eval.applicable {
                "no      "
            } else {
                "skipped "
            },
            eval.note
        )
        .unwrap();
    }
    print!("{out}");
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    spec: PathBuf,
    h: f64,
    t_final: f64,
    seed: u64,
    init: Option<String>,
    target: String,
    window: f64,
    tol: f64,
    csv: Option<PathBuf>,
    plot: Option<PathBuf>,
    record: Option<PathBuf>,
}

/// Parse `x1,..,xn[;u1,..,un]`; missing controls default to `d_i x_i / e_i`.
fn parse_point(text: &str, spec: &SystemSpec) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let n = spec.n();
    let mut parts = text.splitn(2, ';');
    let xs = parts.next().unwrap_or("");
    let parse_list = |s: &str, what: &str| -> Result<Vec<f64>, CliError> {
        let values: Result<Vec<f64>, _> = s.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let values = values.map_err(|_| CliError::Flag(format!("cannot parse {what} '{s}'")))?;
        if values.len() != n {
            return Err(CliError::Flag(format!(
                "{what} needs {n} components, got {}",
                values.len()
            )));
        }
        Ok(values)
    };
    let x = parse_list(xs, "x values")?;
    let u = match parts.next() {
        Some(us) => parse_list(us, "u values")?,
        None => (0..n).map(|i| spec.d[i] * x[i] / spec.e[i]).collect(),
    };
    Ok((x, u))
}

enum Target {
    Auto,
    None,
    Point(Vec<f64>, Vec<f64>),
}

fn classify(
    traj: &Trajectory,
    x_target: &[f64],
    u_target: &[f64],
    window: f64,
    tol: f64,
) -> (String, String) {
    if detect_convergence(traj, x_target, u_target, window, tol) {
        (
            "converged".to_string(),
            format!("converged to {} within {tol:e}", fmt_vec(x_target)),
        )
    } else {
        let (amplitude, sustained) = detect_oscillation(traj, window);
        if sustained {
            (
                "sustained-oscillation".to_string(),
                format!("sustained oscillation, terminal amplitude {amplitude:.4}"),
            )
        } else {
            let deviation = traj.terminal_deviation(x_target, u_target, window);
            (
                "inconclusive".to_string(),
                format!("inconclusive, terminal deviation {deviation:.3e} from {}", fmt_vec(x_target)),
            )
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let started = unix_ms();
    let spec = load_spec(&args.spec)?;
    let n = spec.n();
    if args.window > args.t_final / 2.0 + 1e-9 {
        return Err(CliError::Flag(format!(
            "--window {} exceeds half the horizon {}",
            args.window, args.t_final
        )));
    }
    if args.plot.is_some() && args.csv.is_none() {
        return Err(CliError::Flag("--plot requires --csv".into()));
    }

    let init = match &args.init {
        Some(text) => {
            let (x, u) = parse_point(text, &spec)?;
            InitialData::constant(&x, &u)
        }
        None => InitialData::seeded_constant(args.seed, n, (0.1, 2.0)),
    };

    let target = if args.target == "auto" {
        Target::Auto
    } else if args.target == "none" {
        Target::None
    } else {
        let (x, u) = parse_point(&args.target, &spec)?;
        Target::Point(x, u)
    };

    let traj = integrate(&spec, &init, args.h, args.t_final)?;

    if let Some(csv_path) = &args.csv {
        write_text(csv_path, &trajectory_csv(&traj))?;
    }
    if let Some(plot_path) = &args.plot {
        let csv_name = args
            .csv
            .as_ref()
            .and_then(|p| p.file_name())
            .map(|f| f.to_string_lossy().into_owned())
            .expect("checked above");
        write_text(plot_path, &gnuplot_script(&csv_name, n))?;
    }

    let mut verdict_label = None;
    let (outcome, line) = match target {
        Target::None => {
            let last = traj.len() - 1;
            let x_final: Vec<f64> = (0..n).map(|i| traj.x[i][last]).collect();
            (
                "recorded".to_string(),
                format!("integrated to T = {}, final x = {}", traj.horizon(), fmt_vec(&x_final)),
            )
        }
        Target::Point(x, u) => classify(&traj, &x, &u, args.window, args.tol),
        Target::Auto => {
            let verdict = analyze(&spec)?;
            verdict_label = Some(verdict.criterion.label().to_string());
            // Even a dissipative-only verdict leaves a well-defined
            // saturated equilibrium to measure against.
            let eq = match verdict.attractor() {
                Some(eq) => eq.clone(),
                None => spec_equilibrium(&spec)?,
            };
            classify(&traj, &eq.x, &eq.u, args.window, args.tol)
        }
    };
    println!("{line}");
    if traj.diagnostics.clamped > 0 {
        eprintln!(
            "note: clamped {} grid values (floor {:.2e})",
            traj.diagnostics.clamped, traj.diagnostics.positivity_floor
        );
    }

    if let Some(record_path) = &args.record {
        let record = RunRecord {
            version: env!("CARGO_PKG_VERSION"),
            command: "simulate",
            spec_hash: spec_hash(&spec),
            params: serde_json::json!({
                "spec": args.spec.display().to_string(),
                "h": args.h,
                "T": args.t_final,
                "seed": args.seed,
                "init": args.init,
                "target": args.target,
                "window": args.window,
                "tol": args.tol,
            }),
            verdict: verdict_label,
            outcome: Some(outcome),
            trajectory: args.csv.as_ref().map(|p| p.display().to_string()),
            started_unix_ms: started,
            finished_unix_ms: unix_ms(),
        };
        append_record(record_path, &record)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// hopf, fixture
// ---------------------------------------------------------------------------

fn cmd_hopf(b: f64, c: f64, n: usize, csv: Option<PathBuf>) -> Result<(), CliError> {
    let thresholds = hopf_thresholds(b, c, n)?;
    let table = thresholds_csv(&thresholds);
    match csv {
        Some(path) => write_text(path, &table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_fixture(
    name: &str,
    b: f64,
    c: f64,
    tau: f64,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let spec = match name {
        "example-5.1-uncontrolled" => competitive_pair(0.0),
        "example-5.1-controlled" => competitive_pair(0.25),
        "example-5.2-uncontrolled" => predator_prey_pair(0.0, 0.0),
        "example-5.2-controlled" => predator_prey_pair(0.2, 0.2),
        "example-4.1-scalar" => scalar_memory_control(),
        "hopf" => build_hopf_fixture(b, c, tau)?,
        other => {
            return Err(CliError::Flag(format!(
                "unknown fixture '{other}'; see `lv-attract fixture --help`"
            )))
        }
    };
    let text = to_toml(&spec);
    match out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunRecord {
    version: &'static str,
    command: &'static str,
    spec_hash: String,
    params: serde_json::Value,
    verdict: Option<String>,
    outcome: Option<String>,
    trajectory: Option<String>,
    started_unix_ms: u128,
    finished_unix_ms: u128,
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

static RECORD_LOCK: Mutex<()> = Mutex::new(());

/// Single-write append under an in-process lock; the file is opened in
/// append mode so concurrent sweep jobs interleave whole lines only.
fn append_record(path: &Path, record: &RunRecord) -> Result<(), CliError> {
    use std::io::Write;
    let mut line = serde_json::to_string(record).expect("records serialize");
    line.push('\n');
    let _guard = RECORD_LOCK.lock().expect("record lock");
    let mut file = std::fs::OpenOptions::new().append(true).create(true).open(path)?;
    file.write_all(line.as_bytes())?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    spec_path: &Path,
    seeds: u64,
    out: &Path,
    h: f64,
    t_final: f64,
    window: f64,
    tol: f64,
) -> Result<(), CliError> {
    use rayon::prelude::*;

    let spec = load_spec(spec_path)?;
    let n = spec.n();
    if window > t_final / 2.0 + 1e-9 {
        return Err(CliError::Flag(format!(
            "--window {window} exceeds half the horizon {t_final}"
        )));
    }
    std::fs::create_dir_all(out)?;
    let verdict = analyze(&spec)?;
    let target = match verdict.attractor() {
        Some(eq) => eq.clone(),
        None => spec_equilibrium(&spec)?,
    };
    let hash = spec_hash(&spec);
    let index = out.join("runs.jsonl");

    let threads = std::env::var("LV_ATTRACT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Flag(format!("thread pool: {e}")))?;

    let outcomes: Vec<(u64, String)> = pool.install(|| {
        (1..=seeds)
            .into_par_iter()
            .map(|seed| -> Result<(u64, String), CliError> {
                let started = unix_ms();
                let init = InitialData::seeded_constant(seed, n, (0.1, 2.0));
                let traj = integrate(&spec, &init, h, t_final)?;
                let csv_path = out.join(format!("run_{seed:04}.csv"));
                write_text(&csv_path, &trajectory_csv(&traj))?;
                let (outcome, _) = classify(&traj, &target.x, &target.u, window, tol);
                let record = RunRecord {
                    version: env!("CARGO_PKG_VERSION"),
                    command: "sweep",
                    spec_hash: hash.clone(),
                    params: serde_json::json!({
                        "spec": spec_path.display().to_string(),
                        "h": h, "T": t_final, "seed": seed,
                        "window": window, "tol": tol,
                    }),
                    verdict: Some(verdict.criterion.label().to_string()),
                    outcome: Some(outcome.clone()),
                    trajectory: Some(csv_path.display().to_string()),
                    started_unix_ms: started,
                    finished_unix_ms: unix_ms(),
                };
                append_record(&index, &record)?;
                Ok((seed, outcome))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let converged = outcomes.iter().filter(|(_, o)| o == "converged").count();
    let oscillating = outcomes
        .iter()
        .filter(|(_, o)| o == "sustained-oscillation")
        .count();
    let inconclusive = outcomes.len() - converged - oscillating;
    println!(
        "swept {} seeds against {}: {converged} converged, {oscillating} oscillating, {inconclusive} inconclusive; index {}",
        outcomes.len(),
        verdict.criterion.label(),
        index.display()
    );
    Ok(())
}
