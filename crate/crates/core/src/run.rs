//! Run configurations, run directories and manifests.
//!
//! A run is described by one JSON [`RunConfig`]. Its content hash names the
//! run directory, so rerunning a config overwrites the same directory with
//! the same bytes. Only `manifest.json` carries wall-clock times.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    bound_check, fit_decay, geometric_grid, integral_oracle, lifespan_sweep, BoundReport, Branch, Column, DecayFit,
    FitWindow, IntegralCase, LifespanFit,
};
use crate::digest::content_hash;
use crate::error::{Error, Result};
use crate::evolve::{picard_iterate, prepare, simulate, SimulationSetup, Trajectory, TrajectorySample, TrajectoryStatus};
use crate::exponents::{admissible_window, expected_decay_rates, ProblemParams, Setting};
use crate::norms::XNormResult;

pub const OUTPUT_ROOT_ENV: &str = "DAMPWAVE_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

pub mod exit {
    pub const OK: i32 = 0;
    /// `params` only: inside theorem scope but not admissible.
    pub const INADMISSIBLE: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const OUT_OF_SCOPE: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const UNEXPECTED_BLOW_UP: i32 = 5;
}

/// Exit code for an error raised while running.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Numerical(_) => exit::NUMERICAL,
        _ => exit::INPUT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Params,
    Simulate,
    DecayFit,
    Lifespan,
    Oracle,
    Picard,
}

impl ExperimentKind {
    pub fn slug(&self) -> &'static str {
        match self {
            ExperimentKind::Params => "params",
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::DecayFit => "decay-fit",
            ExperimentKind::Lifespan => "lifespan",
            ExperimentKind::Oracle => "oracle",
            ExperimentKind::Picard => "picard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsSettings {
    pub setting: Setting,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    /// Defaults to the last decade `[T/10, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<FitWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanSettings {
    /// Data amplitudes, each half the previous.
    pub ladder: Vec<f64>,
}

/// Cases generated from dimensions, `j` values and positions inside the admissible window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    pub dims: Vec<u32>,
    pub js: Vec<u32>,
    /// `γ = lo + f·(hi − lo)` for each fraction `f` of the window `(lo, hi)`.
    pub gamma_fractions: Vec<f64>,
}

impl OracleGrid {
    /// Near field plus both far-field branches at the critical power, for every grid point.
    pub fn cases(&self) -> Result<Vec<IntegralCase>> {
        let mut out = Vec::new();
        for &n in &self.dims {
            let setting = Setting::euclidean(n)?;
            let (lo, hi) = admissible_window(setting)
                .ok_or_else(|| Error::Config(format!("dimension {n} is outside theorem scope")))?;
            for &f in &self.gamma_fractions {
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::Config(format!("gamma fractions must lie in (0, 1), got {f}")));
                }
                let gamma = lo + f * (hi - lo);
                let p = ProblemParams::critical(setting, gamma)?.p;
                for &j in &self.js {
                    out.push(IntegralCase::NearField { j, gamma });
                    for branch in [Branch::M1, Branch::M2OverP] {
                        out.push(IntegralCase::FarField { n, j, gamma, p, branch });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSettings {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<IntegralCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<OracleGrid>,
    #[serde(default = "default_t_short")]
    pub t_short: f64,
    #[serde(default = "default_t_long")]
    pub t_long: f64,
    #[serde(default = "default_density")]
    pub points_per_decade: usize,
}

fn default_t_short() -> f64 {
    1e3
}
fn default_t_long() -> f64 {
    1e4
}
fn default_density() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    pub iterations: usize,
    pub tau_step: f64,
    /// Repeat at `tau_step/2` and report the change in the last iterate's norm.
    #[serde(default = "yes")]
    pub check_tau_halving: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifespan: Option<LifespanSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardSettings>,
    /// Output root; the run directory is created inside it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of everything except the output location.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        content_hash(&c)
    }

    pub fn run_dir_name(&self) -> String {
        format!("{}-{}", self.experiment.slug(), &self.content_hash()[..12])
    }

    fn simulation(&self) -> Result<&SimulationSetup> {
        self.simulation
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} runs need a `simulation` section", self.experiment.slug())))
    }
}

/// Output root from an explicit flag, the config, the environment, or the default.
pub fn output_root(flag: Option<&Path>, config: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
    UnexpectedBlowUp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub experiment: ExperimentKind,
    pub artifact_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub status: RunStatus,
    pub exit_code: i32,
    /// Produced files, relative to the run directory.
    pub files: Vec<String>,
    pub headline: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    t: f64,
    #[serde(rename = "L2")]
    l2: f64,
    #[serde(rename = "H1dot")]
    h1dot: f64,
    #[serde(rename = "Linf")]
    linf: f64,
    #[serde(rename = "Hneg")]
    hneg: f64,
}

pub fn trajectory_csv(samples: &[TrajectorySample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(CsvRow { t: s.t, l2: s.l2, h1dot: s.h1dot, linf: s.linf, hneg: s.hneg })?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<TrajectorySample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: CsvRow = row?;
        out.push(TrajectorySample { t: row.t, l2: row.l2, h1dot: row.h1dot, linf: row.linf, hneg: row.hneg });
    }
    Ok(out)
}

/// Fit and bound summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub gamma: f64,
    pub window: FitWindow,
    /// Predicted rates `γ/2` and `(γ+1)/2`.
    pub expected_rates: (f64, f64),
    pub l2: Option<DecayFit>,
    pub h1dot: Option<DecayFit>,
    pub bound: Option<BoundReport>,
    pub status: TrajectoryStatus,
    pub under_resolved: bool,
    pub max_tail_fraction: f64,
    pub data_eps: f64,
}

pub fn fit_report(samples: &[TrajectorySample], status: TrajectoryStatus, gamma: f64, window: FitWindow) -> Result<FitReport> {
    let reached = !status.is_blow_up();
    Ok(FitReport {
        gamma,
        window,
        expected_rates: expected_decay_rates(gamma)?,
        l2: if reached { fit_decay(samples, Column::L2, window).ok() } else { None },
        h1dot: if reached { fit_decay(samples, Column::H1dot, window).ok() } else { None },
        bound: if reached { bound_check(samples, &status, gamma).ok() } else { None },
        status,
        under_resolved: false,
        max_tail_fraction: 0.0,
        data_eps: 0.0,
    })
}

fn trajectory_report(traj: &Trajectory, gamma: f64, window: FitWindow) -> Result<FitReport> {
    let mut r = fit_report(&traj.samples, traj.status, gamma, window)?;
    r.under_resolved = traj.under_resolved;
    r.max_tail_fraction = traj.max_tail_fraction;
    r.data_eps = traj.data_eps;
    Ok(r)
}

/// Parameter report printed by the `params` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsReport {
    pub params: ProblemParams,
    pub critical_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_rates: Option<(f64, f64)>,
    pub exit_code: i32,
}

pub fn params_report(settings: &ParamsSettings) -> Result<ParamsReport> {
    let params = match settings.power {
        Some(p) => ProblemParams::with_power(settings.setting, settings.gamma, p)?,
        None => ProblemParams::critical(settings.setting, settings.gamma)?,
    };
    let exit_code = if params.verdict.is_out_of_scope() {
        exit::OUT_OF_SCOPE
    } else if params.verdict.admissible {
        exit::OK
    } else {
        exit::INADMISSIBLE
    };
    Ok(ParamsReport {
        critical_p: params.critical_p(),
        decay_rates: expected_decay_rates(params.gamma).ok(),
        params,
        exit_code,
    })
}

pub fn params_table(r: &ParamsReport) -> String {
    let p = &r.params;
    let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
    let verdict = if p.verdict.is_out_of_scope() {
        "outside theorem scope".to_string()
    } else if p.verdict.admissible {
        "admissible".to_string()
    } else {
        let conds: Vec<_> = p.verdict.violated_conditions.iter().map(|v| v.condition.clone()).collect();
        format!("inadmissible ({})", conds.join("; "))
    };
    let mut s = String::new();
    s.push_str(&format!("{:<14}{}\n", "setting", p.setting));
    s.push_str(&format!("{:<14}{}\n", "dim_h", p.setting.dim_h()));
    s.push_str(&format!("{:<14}{:.6}\n", "gamma", p.gamma));
    s.push_str(&format!("{:<14}{:.6}\n", "p", p.p));
    s.push_str(&format!("{:<14}{:.6}\n", "p_critical", r.critical_p));
    s.push_str(&format!("{:<14}{}\n", "m", fmt_opt(p.m)));
    s.push_str(&format!("{:<14}{:.6}\n", "gamma_tilde", p.gamma_tilde));
    s.push_str(&format!("{:<14}{}\n", "verdict", verdict));
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub case: IntegralCase,
    pub claimed_rate: f64,
    pub branch_applies: bool,
    pub sup_short: Option<f64>,
    pub sup_long: Option<f64>,
    pub argmax_long: Option<f64>,
    pub drift: Option<f64>,
    pub refused: Option<String>,
}

pub fn oracle_table(settings: &OracleSettings) -> Result<Vec<OracleRow>> {
    let mut cases = settings.cases.clone();
    if let Some(g) = &settings.grid {
        cases.extend(g.cases()?);
    }
    if cases.is_empty() {
        return Err(Error::Config("oracle run without cases".into()));
    }
    let short = geometric_grid(settings.t_short, settings.points_per_decade)?;
    let long = geometric_grid(settings.t_long, settings.points_per_decade)?;
    let mut rows = Vec::new();
    for case in cases {
        let row = match (integral_oracle(case, &short), integral_oracle(case, &long)) {
            (Ok(a), Ok(b)) => OracleRow {
                case,
                claimed_rate: a.claimed_rate,
                branch_applies: a.branch_applies,
                sup_short: Some(a.sup_ratio),
                sup_long: Some(b.sup_ratio),
                argmax_long: Some(b.argmax_t),
                drift: Some((b.sup_ratio - a.sup_ratio).abs() / a.sup_ratio),
                refused: None,
            },
            (Err(Error::Refused(msg)), _) | (_, Err(Error::Refused(msg))) => OracleRow {
                case,
                claimed_rate: case.claimed_rate(),
                branch_applies: case.branch_applies(),
                sup_short: None,
                sup_long: None,
                argmax_long: None,
                drift: None,
                refused: Some(msg),
            },
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}

fn oracle_csv(rows: &[OracleRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "which", "n", "j", "gamma", "p", "branch", "claimed_rate", "branch_applies", "sup_short", "sup_long",
        "argmax_long", "drift", "refused",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let (which, n, p, branch) = match r.case {
            IntegralCase::NearField { .. } => ("near_field", String::new(), String::new(), String::new()),
            IntegralCase::FarField { n, p, branch, .. } => (
                "far_field",
                n.to_string(),
                p.to_string(),
                match branch {
                    Branch::M1 => "m1".to_string(),
                    Branch::M2OverP => "m2_over_p".to_string(),
                },
            ),
        };
        w.write_record([
            which.to_string(),
            n,
            r.case.j().to_string(),
            r.case.gamma().to_string(),
            p,
            branch,
            r.claimed_rate.to_string(),
            r.branch_applies.to_string(),
            opt(r.sup_short),
            opt(r.sup_long),
            opt(r.argmax_long),
            opt(r.drift),
            r.refused.clone().unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardSummary {
    pub x_norms: Vec<XNormResult>,
    pub deltas: Vec<XNormResult>,
    pub ratios: Vec<Option<f64>>,
    pub tau_step: f64,
    pub tau_points: usize,
    /// Relative change of the last iterate's norm when `tau_step` is halved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_halving_change: Option<f64>,
}

pub fn run_picard(setup: &SimulationSetup, settings: &PicardSettings) -> Result<PicardSummary> {
    let (_, params, f, data) = prepare(setup)?;
    let go = |tau: f64| picard_iterate(&data.u0, &data.u1, f, params.gamma, setup.horizon, settings.iterations, tau);
    let report = go(settings.tau_step)?;
    let last = report.iterates.last().map(|i| i.x_norm.value).unwrap_or(0.0);
    let tau_halving_change = if settings.check_tau_halving {
        let fine = go(0.5 * settings.tau_step)?;
        let v = fine.iterates.last().map(|i| i.x_norm.value).unwrap_or(0.0);
        Some((v - last).abs() / v)
    } else {
        None
    };
    Ok(PicardSummary {
        x_norms: report.iterates.iter().map(|i| i.x_norm).collect(),
        deltas: report.deltas.clone(),
        ratios: report.ratios.clone(),
        tau_step: settings.tau_step,
        tau_points: report.tau_points,
        tau_halving_change,
    })
}

fn picard_csv(s: &PicardSummary) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "x_norm", "x_norm_at", "delta", "delta_at", "ratio"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for (k, x) in s.x_norms.iter().enumerate() {
        let d = s.deltas.get(k);
        w.write_record([
            k.to_string(),
            x.value.to_string(),
            x.attained_at.to_string(),
            opt(d.map(|d| d.value)),
            opt(d.map(|d| d.attained_at)),
            opt(s.ratios.get(k).copied().flatten()),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn lifespan_csv(fit: &LifespanFit) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["eps", "t_life", "bracket_lo", "bracket_hi"])?;
    for p in &fit.pairs {
        w.write_record([p.eps.to_string(), p.t_life.to_string(), p.bracket_lo.to_string(), p.bracket_hi.to_string()])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("report serializes");
    b.push(b'\n');
    b
}

/// Collects the files of a run before they are written.
struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    headline: BTreeMap<String, f64>,
    warnings: Vec<String>,
    status: RunStatus,
    exit_code: i32,
}

impl Artifacts {
    fn new() -> Self {
        Artifacts { files: Vec::new(), headline: BTreeMap::new(), warnings: Vec::new(), status: RunStatus::Ok, exit_code: exit::OK }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

fn produce(config: &RunConfig, out: &mut Artifacts) -> Result<()> {
    match config.experiment {
        ExperimentKind::Params => {
            let settings = config.params.as_ref().ok_or_else(|| Error::Config("params runs need a `params` section".into()))?;
            let r = params_report(settings)?;
            out.headline.insert("p".into(), r.params.p);
            out.headline.insert("gamma_tilde".into(), r.params.gamma_tilde);
            out.exit_code = r.exit_code;
            out.add("params.json", json_bytes(&r));
        }
        ExperimentKind::Simulate | ExperimentKind::DecayFit => {
            let setup = config.simulation()?;
            let traj = simulate(setup)?;
            let window = config
                .fit
                .as_ref()
                .and_then(|f| f.window)
                .unwrap_or_else(|| FitWindow::last_decade(setup.horizon));
            let report = trajectory_report(&traj, setup.problem.gamma, window)?;
            out.warnings.extend(traj.warnings.iter().cloned());
            out.add("trajectory.csv", trajectory_csv(&traj.samples)?);
            out.add("fit.json", json_bytes(&report));
            if let Some(f) = report.l2 {
                out.headline.insert("l2_slope".into(), f.slope);
            }
            if let Some(f) = report.h1dot {
                out.headline.insert("h1dot_slope".into(), f.slope);
            }
            if let Some(b) = report.bound {
                out.headline.insert("sup_l2".into(), b.sup_l2);
                out.headline.insert("sup_grad".into(), b.sup_grad);
            }
            if let TrajectoryStatus::BlowUp { t_life, .. } = traj.status {
                out.headline.insert("t_life".into(), t_life);
                if setup.problem.expects_global_existence()? {
                    out.status = RunStatus::UnexpectedBlowUp;
                    out.exit_code = exit::UNEXPECTED_BLOW_UP;
                }
            }
        }
        ExperimentKind::Lifespan => {
            let setup = config.simulation()?;
            let ladder = config.lifespan.as_ref().ok_or_else(|| Error::Config("lifespan runs need a `lifespan` section".into()))?;
            let fit = lifespan_sweep(setup, &ladder.ladder)?;
            if let Some(s) = fit.slope {
                out.headline.insert("lifespan_slope".into(), s);
            }
            if !fit.global.is_empty() {
                out.warnings.push(format!("ladder values reaching the horizon: {:?}", fit.global));
            }
            out.add("lifespan.csv", lifespan_csv(&fit)?);
            out.add("lifespan.json", json_bytes(&fit));
        }
        ExperimentKind::Oracle => {
            let settings = config.oracle.as_ref().ok_or_else(|| Error::Config("oracle runs need an `oracle` section".into()))?;
            let rows = oracle_table(settings)?;
            let max_drift = rows.iter().filter_map(|r| r.drift).fold(0.0, f64::max);
            out.headline.insert("max_drift".into(), max_drift);
            out.headline.insert("refused".into(), rows.iter().filter(|r| r.refused.is_some()).count() as f64);
            out.add("oracle.csv", oracle_csv(&rows)?);
            out.add("oracle.json", json_bytes(&rows));
        }
        ExperimentKind::Picard => {
            let setup = config.simulation()?;
            let settings = config.picard.as_ref().ok_or_else(|| Error::Config("picard runs need a `picard` section".into()))?;
            let s = run_picard(setup, settings)?;
            let max_ratio = s.ratios.iter().flatten().fold(0.0, |a: f64, b| a.max(*b));
            out.headline.insert("max_ratio".into(), max_ratio);
            if let Some(c) = s.tau_halving_change {
                out.headline.insert("tau_halving_change".into(), c);
                if c >= 0.01 {
                    out.warnings.push(format!("halving tau_step changes the last iterate's norm by {:.3}%", 100.0 * c));
                }
            }
            out.add("picard.csv", picard_csv(&s)?);
            out.add("picard.json", json_bytes(&s));
        }
    }
    Ok(())
}

/// Runs `config` into `<root>/<experiment>-<hash>` and writes its manifest.
///
/// Failures while running still produce a manifest with status `failed`;
/// only failures to create the directory itself are returned as errors.
pub fn execute(config: &RunConfig, root: &Path) -> Result<RunOutcome> {
    let started = now_unix();
    let dir = root.join(config.run_dir_name());
    fs::create_dir_all(&dir)?;
    let mut art = Artifacts::new();
    art.add("config.json", config.to_json().into_bytes());
    let result = produce(config, &mut art);
    let mut files = Vec::new();
    let mut write_err = None;
    for (name, bytes) in &art.files {
        match write_atomic(&dir.join(name), bytes) {
            Ok(()) => files.push(name.clone()),
            Err(e) => {
                write_err = Some(e);
                break;
            }
        }
    }
    let err = result.err().or(write_err);
    let (status, code, error) = match &err {
        Some(e) => (RunStatus::Failed, exit_code(e), Some(e.to_string())),
        None => (art.status, art.exit_code, None),
    };
    let manifest = RunManifest {
        config_hash: config.content_hash(),
        experiment: config.experiment,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: now_unix(),
        status,
        exit_code: code,
        files,
        headline: art.headline,
        warnings: art.warnings,
        error,
    };
    write_atomic(&dir.join("manifest.json"), &json_bytes(&manifest))?;
    Ok(RunOutcome { dir, manifest })
}

/// Files written by [`plot`].
#[derive(Debug, Clone)]
pub struct PlotFiles {
    pub script: PathBuf,
    pub data: Vec<PathBuf>,
}

fn dat(rows: impl Iterator<Item = (f64, f64)>) -> Vec<u8> {
    let mut s = String::new();
    for (x, y) in rows {
        s.push_str(&format!("{x} {y}\n"));
    }
    s.into_bytes()
}

/// Writes a gnuplot script and its data files for a finished run directory.
///
/// Decay runs get `decay.gp` with `decay_l2.dat` and `decay_h1dot.dat`,
/// lifespan runs get `lifespan.gp` with `lifespan.dat`. The scripts render
/// to PNG next to themselves.
pub fn plot(dir: &Path) -> Result<PlotFiles> {
    let traj = dir.join("trajectory.csv");
    let life = dir.join("lifespan.json");
    if traj.is_file() {
        let config = RunConfig::load(&dir.join("config.json"))?;
        let gamma = config.simulation()?.problem.gamma;
        let samples = read_trajectory_csv(&traj)?;
        let (r0, r1) = expected_decay_rates(gamma)?;
        let l2 = dir.join("decay_l2.dat");
        let h1 = dir.join("decay_h1dot.dat");
        write_atomic(&l2, &dat(samples.iter().map(|s| (1.0 + s.t, s.l2))))?;
        write_atomic(&h1, &dat(samples.iter().map(|s| (1.0 + s.t, s.h1dot))))?;
        let anchor = samples.first().ok_or_else(|| Error::Data("empty trajectory".into()))?;
        let script = format!(
            "# norm decay against 1+t with reference slopes\n\
             set terminal pngcairo size 900,600\n\
             set output 'decay.png'\n\
             set logscale xy\n\
             set xlabel '1+t'\n\
             set ylabel 'norm'\n\
             set key bottom left\n\
             plot 'decay_l2.dat' using 1:2 with linespoints title 'L2', \\\n\
             \x20    'decay_h1dot.dat' using 1:2 with linespoints title 'H1dot', \\\n\
             \x20    {a} * x**(-{r0}) dashtype 2 title 'slope -{r0}', \\\n\
             \x20    {b} * x**(-{r1}) dashtype 2 title 'slope -{r1}'\n",
            a = anchor.l2,
            b = anchor.h1dot,
        );
        let gp = dir.join("decay.gp");
        write_atomic(&gp, script.as_bytes())?;
        return Ok(PlotFiles { script: gp, data: vec![l2, h1] });
    }
    if life.is_file() {
        let fit: LifespanFit = serde_json::from_str(&fs::read_to_string(&life)?)?;
        let data = dir.join("lifespan.dat");
        write_atomic(&data, &dat(fit.pairs.iter().map(|p| (p.eps, p.t_life))))?;
        let (label, line) = match (fit.slope, fit.intercept) {
            (Some(s), Some(c)) => (
                format!("set label 1 sprintf('fitted slope %.3f', {s}) at graph 0.55, graph 0.9\n"),
                format!(", \\\n     exp({c}) * x**({s}) title 'fit'"),
            ),
            _ => (String::new(), String::new()),
        };
        let script = format!(
            "# lifespan against data size\n\
             set terminal pngcairo size 900,600\n\
             set output 'lifespan.png'\n\
             set logscale xy\n\
             set xlabel 'eps'\n\
             set ylabel 'T_life'\n\
             {label}\
             plot 'lifespan.dat' using 1:2 with points pt 7 title 'T_life'{line}\n"
        );
        let gp = dir.join("lifespan.gp");
        write_atomic(&gp, script.as_bytes())?;
        return Ok(PlotFiles { script: gp, data: vec![data] });
    }
    Err(Error::Config(format!("{} holds no trajectory or lifespan results", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{NonlinearityKind, ProblemSpec, Sampling, StepController};
    use crate::initdata::{DataSpec, Placement, Profile};
    use crate::spectral::GridSpec;

    pub(crate) fn linear_config() -> RunConfig {
        RunConfig {
            experiment: ExperimentKind::Simulate,
            params: None,
            simulation: Some(SimulationSetup {
                problem: ProblemSpec {
                    dimension: 1,
                    gamma: 0.25,
                    nonlinearity: NonlinearityKind::Zero,
                    power: None,
                    allow_inadmissible: false,
                },
                grid: GridSpec { dim: 1, points: 256, half_width: 64.0 },
                data: DataSpec {
                    profile: Profile::GaussianBump { width: 1.0, center: vec![] },
                    amplitude: 1.0,
                    target_eps: None,
                    placement: Placement::Displacement,
                },
                controller: StepController::default(),
                horizon: 40.0,
                sampling: Sampling::default(),
            }),
            fit: None,
            lifespan: None,
            oracle: None,
            picard: None,
            output_dir: None,
        }
    }

    #[test]
    fn config_round_trip() {
        let c = linear_config();
        let back = RunConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.content_hash(), back.content_hash());
        let mut moved = c.clone();
        moved.output_dir = Some("/elsewhere".into());
        assert_eq!(moved.content_hash(), c.content_hash());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = vec![
            TrajectorySample { t: 0.0, l2: 1.0 / 3.0, h1dot: 2f64.sqrt(), linf: 1e-300, hneg: 7.25 },
            TrajectorySample { t: 0.1, l2: 0.1 + 0.2, h1dot: 1e10, linf: 5e-324, hneg: 3.0 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, trajectory_csv(&s).unwrap()).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,L2,H1dot,Linf,Hneg\n"));
        assert_eq!(read_trajectory_csv(&p).unwrap(), s);
    }

    #[test]
    fn params_exit_codes() {
        let r = params_report(&ParamsSettings { setting: Setting::Euclidean(3), gamma: 0.8, power: None }).unwrap();
        assert_eq!(r.exit_code, exit::OK);
        assert!((r.params.p - (1.0 + 4.0 / 4.6)).abs() < 1e-12);
        assert!((r.params.m.unwrap() - 1.0 / (0.5 + 0.8 / 3.0)).abs() < 1e-12);
        let h = params_report(&ParamsSettings { setting: Setting::Heisenberg(2), gamma: 0.9, power: None }).unwrap();
        assert_eq!(h.exit_code, exit::INADMISSIBLE);
        assert!(params_table(&h).contains("gamma >= 1"));
        let o = params_report(&ParamsSettings { setting: Setting::Euclidean(7), gamma: 0.5, power: None }).unwrap();
        assert_eq!(o.exit_code, exit::OUT_OF_SCOPE);
        assert!(params_table(&o).contains("outside theorem scope"));
    }

    #[test]
    fn execute_writes_listed_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = execute(&linear_config(), dir.path()).unwrap();
        assert_eq!(out.manifest.status, RunStatus::Ok);
        assert_eq!(out.manifest.files, vec!["config.json", "trajectory.csv", "fit.json"]);
        for f in &out.manifest.files {
            assert!(out.dir.join(f).is_file());
        }
        assert!(out.manifest.headline.contains_key("l2_slope"));
        let first = fs::read(out.dir.join("trajectory.csv")).unwrap();
        let again = execute(&linear_config(), dir.path()).unwrap();
        assert_eq!(again.dir, out.dir);
        assert_eq!(fs::read(again.dir.join("trajectory.csv")).unwrap(), first);
        let plots = plot(&out.dir).unwrap();
        assert_eq!(plots.data.len(), 2);
        assert!(fs::read_to_string(plots.script).unwrap().contains("logscale"));
    }

    #[test]
    fn failures_leave_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = linear_config();
        c.simulation.as_mut().unwrap().problem.gamma = 0.7;
        let out = execute(&c, dir.path()).unwrap();
        assert_eq!(out.manifest.status, RunStatus::Failed);
        assert_eq!(out.manifest.exit_code, exit::INPUT);
        assert!(out.manifest.error.as_deref().unwrap().contains("not admissible"));
        assert!(out.dir.join("manifest.json").is_file());
    }

    #[test]
    fn plot_refuses_empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(plot(dir.path()).is_err());
    }

    #[test]
    fn oracle_grid_covers_both_branches() {
        let g = OracleGrid { dims: vec![1, 2, 3], js: vec![0, 1], gamma_fractions: vec![0.5] };
        let cases = g.cases().unwrap();
        assert_eq!(cases.len(), 3 * 2 * 3);
        assert!(cases.iter().any(|c| matches!(c, IntegralCase::FarField { branch: Branch::M1, .. })));
        assert!(cases.iter().any(|c| matches!(c, IntegralCase::FarField { branch: Branch::M2OverP, .. })));
    }
}
