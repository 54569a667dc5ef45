use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dampwave::analysis::FitWindow;
use dampwave::evolve::TrajectoryStatus;
use dampwave::run::{
    execute, exit, exit_code, fit_report, output_root, params_report, params_table, plot, read_trajectory_csv,
    ExperimentKind, ParamsSettings, RunConfig,
};
use dampwave::{Error, Setting};

/// Simulation and verification harness for critical semilinear damped wave equations.
#[derive(Parser)]
#[command(name = "dampwave", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponents and admissibility of gamma (exit 0 admissible, 1 not, 3 outside theorem scope).
    Params(ParamsArgs),
    /// Run a simulation config and fit its decay rates.
    Simulate(RunArgs),
    /// Fit decay rates, from a config or from an existing trajectory CSV.
    DecayFit(DecayFitArgs),
    /// Sweep data sizes in the blow-up regime and fit the lifespan.
    Lifespan(RunArgs),
    /// Quadrature checks of the time integrals in the contraction estimate.
    Oracle(RunArgs),
    /// Picard iterates of the Duhamel fixed-point map and their contraction ratios.
    Picard(RunArgs),
    /// Write a gnuplot script and data files for a finished run directory.
    Plot { run_dir: PathBuf },
}

#[derive(Args)]
#[group(id = "setting", required = true, multiple = false)]
struct SettingArgs {
    /// Euclidean space of dimension N.
    #[arg(long, value_name = "N", group = "setting")]
    euclidean: Option<u32>,
    /// Heisenberg group of index N (homogeneous dimension 2N+2).
    #[arg(long, value_name = "N", group = "setting")]
    heisenberg: Option<u32>,
}

#[derive(Args)]
struct ParamsArgs {
    #[command(flatten)]
    setting: SettingArgs,
    #[arg(long)]
    gamma: f64,
    /// Nonlinearity power; the critical power when omitted.
    #[arg(long)]
    power: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    config: PathBuf,
    /// Output root (overrides the config and DAMPWAVE_OUTPUT_ROOT).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DecayFitArgs {
    /// JSON run configuration.
    #[arg(required_unless_present = "csv", conflicts_with = "csv")]
    config: Option<PathBuf>,
    /// Existing trajectory CSV with columns t,L2,H1dot,Linf,Hneg.
    #[arg(long, requires = "gamma")]
    csv: Option<PathBuf>,
    /// Negative Sobolev order of the data (CSV mode).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, requires = "t_hi")]
    t_lo: Option<f64>,
    #[arg(long, requires = "t_lo")]
    t_hi: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    exit_code(err)
}

fn cmd_params(a: &ParamsArgs) -> i32 {
    let setting = match (a.setting.euclidean, a.setting.heisenberg) {
        (Some(n), None) => Setting::euclidean(n),
        (None, Some(n)) => Setting::heisenberg(n),
        _ => unreachable!("clap enforces exactly one setting"),
    };
    let report = setting.and_then(|setting| params_report(&ParamsSettings { setting, gamma: a.gamma, power: a.power }));
    match report {
        Ok(r) => {
            print!("{}", params_table(&r));
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            r.exit_code
        }
        Err(e) => fail(&e),
    }
}

fn cmd_run(kind: ExperimentKind, config: &Path, out: Option<&Path>) -> i32 {
    let config = match RunConfig::load(config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if config.experiment != kind {
        eprintln!("error: config describes a `{}` run, not `{}`", config.experiment.slug(), kind.slug());
        return exit::INPUT;
    }
    let root = output_root(out, &config);
    match execute(&config, &root) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            println!("run directory: {}", outcome.dir.display());
            println!("status: {:?}", m.status);
            for (k, v) in &m.headline {
                println!("{k}: {v}");
            }
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(e) = &m.error {
                eprintln!("error: {e}");
            }
            if kind == ExperimentKind::DecayFit && m.error.is_none() {
                if let Ok(text) = std::fs::read_to_string(outcome.dir.join("fit.json")) {
                    print!("{text}");
                }
            }
            m.exit_code
        }
        Err(e) => fail(&e),
    }
}

fn cmd_decay_fit(a: &DecayFitArgs) -> i32 {
    if let Some(config) = &a.config {
        return cmd_run(ExperimentKind::DecayFit, config, a.out.as_deref());
    }
    let (Some(csv), Some(gamma)) = (&a.csv, a.gamma) else {
        eprintln!("error: CSV mode needs --csv and --gamma");
        return exit::INPUT;
    };
    let result = read_trajectory_csv(csv).and_then(|samples| {
        let horizon = samples.last().map(|s| s.t).ok_or_else(|| Error::Data("empty trajectory".into()))?;
        let window = match (a.t_lo, a.t_hi) {
            (Some(t_lo), Some(t_hi)) => FitWindow { t_lo, t_hi },
            _ => FitWindow::last_decade(horizon),
        };
        let report = fit_report(&samples, TrajectoryStatus::ReachedHorizon { horizon }, gamma, window)?;
        if report.l2.is_none() || report.h1dot.is_none() {
            return Err(Error::Data(format!("no fit possible in [{}, {}]", window.t_lo, window.t_hi)));
        }
        Ok(report)
    });
    match result {
        Ok(r) => {
            println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            exit::OK
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Params(a) => cmd_params(a),
        Command::Simulate(a) => cmd_run(ExperimentKind::Simulate, &a.config, a.out.as_deref()),
        Command::DecayFit(a) => cmd_decay_fit(a),
        Command::Lifespan(a) => cmd_run(ExperimentKind::Lifespan, &a.config, a.out.as_deref()),
        Command::Oracle(a) => cmd_run(ExperimentKind::Oracle, &a.config, a.out.as_deref()),
        Command::Picard(a) => cmd_run(ExperimentKind::Picard, &a.config, a.out.as_deref()),
        Command::Plot { run_dir } => match plot(run_dir) {
            Ok(files) => {
                println!("{}", files.script.display());
                for d in &files.data {
                    println!("{}", d.display());
                }
                exit::OK
            }
            Err(e) => fail(&e),
        },
    };
    ExitCode::from(code as u8)
}
