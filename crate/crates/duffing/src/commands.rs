//! Command implementations behind the `duffing` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use duffing_core::analysis::{
    collect_search, find_invariant_curve, rotation_number, scan_seed, solve_seed, CurveOptions,
    DiophantineParams, InvariantCurveFit, PeriodicOptions,
};
use duffing_core::flow::simulate;
use duffing_core::poincare::{twist_profile, unforced_advance};
use duffing_core::{ActionAngle, PhaseState, PoincareMap, SpecialFunctions, SystemConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cache::load_or_compute;
use crate::config::{config_hash, load_config};
use crate::export::{self, write_json, write_rows, Finding, Params};
use crate::grid::SeedGrid;
use crate::manifest::{RunManifest, RunStatus};
use crate::{AppError, ExitStatus};

/// Tolerance used for the special-function grid.
pub const SPECIAL_TOL: f64 = 1e-10;

/// Options shared by every command.
#[derive(Debug, Clone)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed_grid: SeedGrid,
    /// Worker threads; `None` uses every logical processor.
    pub jobs: Option<usize>,
    /// Overrides the integrator's absolute and relative tolerance.
    pub tol: Option<f64>,
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Simulate { t_end: f64 },
    Twist { lambda_min: f64, lambda_max: f64, points: usize, angles: usize },
    Rotation { iterates: usize },
    Curve { modes: usize, iterates: usize, diophantine: DiophantineParams, threshold_factor: f64, gap_factor: f64 },
    Bounded { horizon: usize, bracket: Option<(f64, f64)> },
    Periodic { period: usize, winding: i64 },
    Special { n: Option<u32> },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Twist { .. } => "twist",
            Command::Rotation { .. } => "analyze rotation",
            Command::Curve { .. } => "analyze curve",
            Command::Bounded { .. } => "analyze bounded",
            Command::Periodic { .. } => "analyze periodic",
            Command::Special { .. } => "special",
        }
    }

    fn parameters(&self) -> Params {
        let v = match self {
            Command::Simulate { t_end } => json!({ "t_end": t_end }),
            Command::Twist { lambda_min, lambda_max, points, angles } => {
                json!({ "lambda_min": lambda_min, "lambda_max": lambda_max, "points": points, "angles": angles })
            }
            Command::Rotation { iterates } => json!({ "iterates": iterates, "method": "weighted_birkhoff" }),
            Command::Curve { modes, iterates, diophantine, threshold_factor, gap_factor } => json!({
                "modes": modes,
                "iterates": iterates,
                "diophantine_c": diophantine.c,
                "diophantine_beta": diophantine.beta_exponent,
                "diophantine_q_max": diophantine.q_max,
                "threshold_factor": threshold_factor,
                "gap_factor": gap_factor,
            }),
            Command::Bounded { horizon, bracket } => json!({ "horizon": horizon, "bracket": bracket }),
            Command::Periodic { period, winding } => json!({ "period": period, "winding": winding }),
            Command::Special { n } => json!({ "n": n }),
        };
        match v {
            Value::Object(m) => m.into_iter().collect(),
            _ => Params::new(),
        }
    }
}

/// Successful run: what was found and whether it counts as a finding.
struct Report {
    findings: usize,
    failure: Option<String>,
}

struct Run {
    out: PathBuf,
    outputs: Vec<String>,
    params: Params,
    hash: Option<String>,
}

impl Run {
    fn path(&mut self, name: String) -> PathBuf {
        let p = self.out.join(&name);
        self.outputs.push(name);
        p
    }
}

/// Run a command, write its manifest and return the process exit status.
/// Errors are reported on stderr.
pub fn run(common: &Common, cmd: &Command) -> ExitStatus {
    let start = Instant::now();
    let mut run = Run { out: common.out.clone(), outputs: Vec::new(), params: cmd.parameters(), hash: None };
    let result = execute(common, cmd, &mut run);
    let (status, failure) = match &result {
        Ok(Report { findings, failure }) if *findings > 0 && failure.is_none() => (ExitStatus::Ok, None),
        Ok(Report { failure, .. }) => {
            (ExitStatus::Numerical, Some(failure.clone().unwrap_or_else(|| "no findings".to_string())))
        }
        Err(e) => (e.exit_status(), Some(e.to_string())),
    };
    if let Some(msg) = &failure {
        eprintln!("duffing {}: {msg}", cmd.name());
    }
    if std::fs::create_dir_all(&common.out).is_err() {
        return ExitStatus::Io;
    }
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: run.hash,
        parameters: run.params,
        outputs: run.outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        status: if status == ExitStatus::Ok { RunStatus::Ok } else { RunStatus::Failed },
        failure,
        exit_code: status as i32,
    };
    if let Err(e) = manifest.write(&common.out) {
        eprintln!("duffing {}: {e}", cmd.name());
        return ExitStatus::Io;
    }
    status
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, AppError> {
    if jobs == Some(0) {
        return Err(AppError::Validation("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| AppError::Io(e.to_string()))
}

fn load(common: &Common, run: &mut Run) -> Result<(SystemConfig, SpecialFunctions), AppError> {
    let path = common.config.as_ref().ok_or_else(|| AppError::Validation("--config is required".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(tol) = common.tol {
        cfg = cfg.with_tolerance(tol)?;
    }
    run.hash = Some(config_hash(&cfg));
    run.params.insert("special_tol".into(), json!(SPECIAL_TOL));
    let sf = load_or_compute(common.cache.as_deref(), cfg.n, SPECIAL_TOL)?;
    std::fs::create_dir_all(&common.out)?;
    Ok((cfg, sf))
}

fn execute(common: &Common, cmd: &Command, run: &mut Run) -> Result<Report, AppError> {
    let workers = pool(common.jobs)?;
    if let Command::Special { n } = cmd {
        return special(common, *n, run);
    }
    let (cfg, sf) = load(common, run)?;
    let seeds = common.seed_grid.seeds();
    run.params.insert("seeds".into(), json!(seeds.iter().map(|s| [s.lambda, s.theta]).collect::<Vec<_>>()));
    let map = PoincareMap::new(&cfg, &sf)?;
    workers.install(|| match cmd {
        Command::Simulate { t_end } => cmd_simulate(&cfg, &sf, &seeds, *t_end, run),
        Command::Twist { lambda_min, lambda_max, points, angles } => {
            cmd_twist(&map, *lambda_min, *lambda_max, *points, *angles, run)
        }
        Command::Rotation { iterates } => cmd_rotation(&map, &seeds, *iterates, run),
        Command::Curve { modes, iterates, diophantine, threshold_factor, gap_factor } => {
            let mut opts = CurveOptions::new(*modes, *iterates);
            opts.diophantine = *diophantine;
            opts.threshold_factor = *threshold_factor;
            opts.gap_factor = *gap_factor;
            cmd_curve(&map, &seeds, &opts, run)
        }
        Command::Bounded { horizon, bracket } => cmd_bounded(&map, &seeds, *horizon, *bracket, run),
        Command::Periodic { period, winding } => cmd_periodic(&map, &seeds, *period, *winding, run),
        Command::Special { .. } => unreachable!(),
    })
}

fn findings<T: Serialize>(run: &mut Run, name: &str, items: Vec<(usize, T)>) -> Result<(), AppError> {
    let hash = run.hash.clone().unwrap_or_default();
    let records: Vec<_> = items
        .into_iter()
        .map(|(seed_index, body)| Finding { config_hash: &hash, parameters: &run.params, seed_index, body })
        .collect();
    let path = run.out.join(name);
    write_json(&path, &records)?;
    run.outputs.push(name.to_string());
    Ok(())
}

#[derive(Serialize)]
struct SimulateRow {
    seed_index: usize,
    lambda: f64,
    theta: f64,
    x0: f64,
    y0: f64,
    t_end: f64,
    samples: usize,
    impulses: usize,
    escaped: bool,
    error: String,
}

fn cmd_simulate(
    cfg: &SystemConfig,
    sf: &SpecialFunctions,
    seeds: &[ActionAngle],
    t_end: f64,
    run: &mut Run,
) -> Result<Report, AppError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(AppError::Validation("t_end > 0 violated".into()));
    }
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let (x, y) = sf.to_phase(seed);
            (seed, x, y, simulate(cfg, PhaseState::new(0.0, x, y), t_end))
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (k, (seed, x0, y0, (traj, end))) in results.iter().enumerate() {
        let tp = run.path(format!("trajectory_{k:03}.csv"));
        export::write_trajectory(&tp, traj)?;
        let ip = run.path(format!("impulses_{k:03}.csv"));
        export::write_impulses(&ip, traj)?;
        let error = end.as_ref().err().map(|e| e.to_string()).unwrap_or_default();
        if !error.is_empty() {
            failures.push(format!("seed {k}: {error}"));
        }
        rows.push(SimulateRow {
            seed_index: k,
            lambda: seed.lambda,
            theta: seed.theta,
            x0: *x0,
            y0: *y0,
            t_end,
            samples: traj.samples.len(),
            impulses: traj.impulses.len(),
            escaped: traj.escaped,
            error,
        });
    }
    let p = run.path("simulate.csv".into());
    write_rows(&p, &[], &rows)?;
    Ok(Report { findings: rows.len(), failure: (!failures.is_empty()).then(|| failures.join("; ")) })
}

fn cmd_twist(
    map: &PoincareMap<'_>,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
    angles: usize,
    run: &mut Run,
) -> Result<Report, AppError> {
    if !(lambda_min > 0.0 && lambda_max > lambda_min && points >= 2) {
        return Err(AppError::Validation("twist needs 0 < lambda_min < lambda_max and points >= 2".into()));
    }
    let grid: Vec<f64> =
        (0..points).map(|k| lambda_min * (lambda_max / lambda_min).powf(k as f64 / (points - 1) as f64)).collect();
    let profile = twist_profile(map, &grid, angles)?;
    let p = run.path("twist.csv".into());
    export::write_twist(&p, &profile)?;
    let top = grid[points - 1] / 10.0;
    let top_min = profile
        .samples
        .iter()
        .filter(|s| s.lambda >= top)
        .map(|s| s.scaled_twist.abs())
        .fold(f64::INFINITY, f64::min);
    let verdict = json!({
        "config_hash": run.hash,
        "parameters": run.params,
        "sign_ok": profile.sign_all_ok,
        "degenerate": profile.degenerate,
        "twist_factor": profile.twist_factor,
        "lambda0": profile.lambda0,
        "twist_bound": profile.twist_bound,
        "top_decade_min_scaled_twist": top_min,
        "bound_ok": profile.bound_ok,
        "non_monotone": profile.non_monotone,
        "gamma": profile.gamma,
    });
    let p = run.path("twist_verdict.json".into());
    write_json(&p, &verdict)?;
    Ok(Report { findings: profile.samples.len(), failure: None })
}

#[derive(Serialize)]
struct RotationRow {
    seed_index: usize,
    lambda: f64,
    theta: f64,
    rotation: Option<f64>,
    error_bound: Option<f64>,
    iterates_used: Option<usize>,
    usable: bool,
    unforced_reference: Option<f64>,
    error: String,
}

fn cmd_rotation(map: &PoincareMap<'_>, seeds: &[ActionAngle], n: usize, run: &mut Run) -> Result<Report, AppError> {
    if n < 2 {
        return Err(AppError::Validation("--iterates must be at least 2".into()));
    }
    let cfg = map.config();
    let results: Vec<_> = seeds.par_iter().map(|&s| rotation_number(map, s, n)).collect();
    let mut rows = Vec::new();
    let mut found = Vec::new();
    for (k, (seed, r)) in seeds.iter().zip(&results).enumerate() {
        let reference = cfg.is_unforced().then(|| unforced_advance(map.special(), &cfg.schedule, seed.lambda));
        let est = r.as_ref().ok();
        rows.push(RotationRow {
            seed_index: k,
            lambda: seed.lambda,
            theta: seed.theta,
            rotation: est.map(|e| e.value),
            error_bound: est.map(|e| e.error_bound),
            iterates_used: est.map(|e| e.iterates_used),
            usable: est.is_some_and(|e| e.usable),
            unforced_reference: reference,
            error: r.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
        });
        if let Some(e) = est.filter(|e| e.usable) {
            found.push((k, json!({ "seed": seed, "estimate": e, "unforced_reference": reference })));
        }
    }
    let count = found.len();
    findings(run, "rotation.json", found)?;
    let p = run.path("rotation.csv".into());
    write_rows(&p, &[], &rows)?;
    Ok(Report { findings: count, failure: None })
}

#[derive(Serialize)]
struct CurveRow {
    seed_index: usize,
    lambda: f64,
    theta: f64,
    accepted: bool,
    rho: Option<f64>,
    residual: Option<f64>,
    threshold: Option<f64>,
    median_lambda: Option<f64>,
    diophantine_pass: Option<bool>,
    error: String,
}

#[derive(Serialize)]
struct CurvePointRow {
    xi: f64,
    lambda: f64,
    theta: f64,
}

/// Points written per accepted curve.
const CURVE_SAMPLES: usize = 256;

fn cmd_curve(map: &PoincareMap<'_>, seeds: &[ActionAngle], opts: &CurveOptions, run: &mut Run) -> Result<Report, AppError> {
    let results: Vec<_> = seeds.par_iter().map(|&s| find_invariant_curve(map, s, opts)).collect();
    let mut rows = Vec::new();
    let mut found = Vec::new();
    for (k, (seed, r)) in seeds.iter().zip(&results).enumerate() {
        let fit = r.as_ref().ok();
        rows.push(CurveRow {
            seed_index: k,
            lambda: seed.lambda,
            theta: seed.theta,
            accepted: fit.is_some_and(|f| f.accepted),
            rho: fit.map(|f| f.rho),
            residual: fit.map(|f| f.residual),
            threshold: fit.map(|f| f.threshold),
            median_lambda: fit.map(|f| f.median_lambda),
            diophantine_pass: fit.map(|f| f.diophantine.pass),
            error: r.as_ref().err().map(|e| e.to_string()).unwrap_or_default(),
        });
        if let Some(f) = fit.filter(|f| f.accepted) {
            let pts: Vec<_> = (0..CURVE_SAMPLES)
                .map(|j| {
                    let xi = j as f64 / CURVE_SAMPLES as f64;
                    let p = f.point(xi);
                    CurvePointRow { xi, lambda: p.lambda, theta: p.theta }
                })
                .collect();
            let p = run.path(format!("curve_{k:03}.csv"));
            write_rows(&p, &[], &pts)?;
            found.push((k, json!({ "seed": seed, "fit": f })));
        }
    }
    let count = found.len();
    findings(run, "curves.json", found)?;
    let p = run.path("curves.csv".into());
    write_rows(&p, &[], &rows)?;
    Ok(Report { findings: count, failure: None })
}

fn bracket_curves(
    map: &PoincareMap<'_>,
    bracket: (f64, f64),
) -> Result<(InvariantCurveFit, InvariantCurveFit), AppError> {
    let opts = CurveOptions::new(24, 2000);
    let fit = |lambda: f64| -> Result<InvariantCurveFit, AppError> {
        let f = find_invariant_curve(map, ActionAngle::new(lambda, 0.0), &opts)?;
        if !f.accepted {
            return Err(AppError::Numerical(format!(
                "bracketing curve at lambda = {lambda} not accepted (residual {:e})",
                f.residual
            )));
        }
        Ok(f)
    };
    Ok((fit(bracket.0)?, fit(bracket.1)?))
}

fn cmd_bounded(
    map: &PoincareMap<'_>,
    seeds: &[ActionAngle],
    horizon: usize,
    bracket: Option<(f64, f64)>,
    run: &mut Run,
) -> Result<Report, AppError> {
    if horizon == 0 {
        return Err(AppError::Validation("--horizon must be at least 1".into()));
    }
    let curves = bracket.map(|b| bracket_curves(map, b)).transpose()?;
    let pair = curves.as_ref().map(|(a, b)| (a, b));
    let records: Vec<_> = seeds.par_iter().enumerate().map(|(k, &s)| scan_seed(map, k, s, horizon, pair)).collect();
    let p = run.path("bounded.csv".into());
    let rows: Vec<_> = records
        .iter()
        .map(|r| {
            json!({
                "seed_index": r.seed_index,
                "lambda": r.seed.lambda,
                "theta": r.seed.theta,
                "iterations": r.iterations,
                "max_abs_sum": r.max_abs_sum,
                "first_window_max": r.first_window_max,
                "monotone_growth": r.monotone_growth,
                "stayed_between": r.stayed_between,
                "escaped": r.escaped,
                "degenerate": r.degenerate,
            })
        })
        .collect();
    let header = [
        "seed_index",
        "lambda",
        "theta",
        "iterations",
        "max_abs_sum",
        "first_window_max",
        "monotone_growth",
        "stayed_between",
        "escaped",
        "degenerate",
    ];
    write_table(&p, &header, &rows)?;
    let count = records.len();
    findings(run, "bounded.json", records.into_iter().map(|r| (r.seed_index, r)).collect())?;
    Ok(Report { findings: count, failure: None })
}

/// Rows given as JSON objects, written in `header` order.
fn write_table(path: &Path, header: &[&str], rows: &[Value]) -> Result<(), AppError> {
    let mut w = export::csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        let fields: Vec<String> = header
            .iter()
            .map(|h| match &r[*h] {
                Value::Null => String::new(),
                Value::String(s) => s.clone(),
                v => v.to_string(),
            })
            .collect();
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PeriodicRow {
    orbit_index: usize,
    seed_index: usize,
    lambda: f64,
    theta: f64,
    period: usize,
    winding: i64,
    residual: f64,
    minimal: bool,
}

fn cmd_periodic(
    map: &PoincareMap<'_>,
    seeds: &[ActionAngle],
    m: usize,
    p: i64,
    run: &mut Run,
) -> Result<Report, AppError> {
    if m == 0 {
        return Err(AppError::Validation("--period must be at least 1".into()));
    }
    let opts = PeriodicOptions::default();
    let outcomes: Vec<_> = seeds.par_iter().enumerate().map(|(k, &s)| solve_seed(map, k, s, m, p, &opts)).collect();
    let search = collect_search(outcomes, &opts);
    run.params.insert("singular_seeds".into(), json!(search.singular_seeds));
    run.params.insert("failed_seeds".into(), json!(search.failed_seeds));
    let rows: Vec<_> = search
        .orbits
        .iter()
        .enumerate()
        .map(|(i, o)| PeriodicRow {
            orbit_index: i,
            seed_index: o.seed_index,
            lambda: o.point.lambda,
            theta: o.point.theta,
            period: o.period,
            winding: o.winding,
            residual: o.residual,
            minimal: o.minimal,
        })
        .collect();
    let count = rows.len();
    findings(run, "periodic.json", search.orbits.iter().map(|o| (o.seed_index, o)).collect())?;
    let header = ["orbit_index", "seed_index", "lambda", "theta", "period", "winding", "residual", "minimal"];
    let path = run.path("periodic.csv".into());
    write_rows(&path, &header, &rows)?;
    let failure = (count == 0).then(|| format!("no orbit converged; best residual {:e}", search.best_residual));
    Ok(Report { findings: count, failure })
}

fn special(common: &Common, n: Option<u32>, run: &mut Run) -> Result<Report, AppError> {
    let n = match (n, &common.config) {
        (Some(n), _) => n,
        (None, Some(path)) => {
            let cfg = load_config(path)?;
            run.hash = Some(config_hash(&cfg));
            cfg.n
        }
        (None, None) => return Err(AppError::Validation("special needs --n or --config".into())),
    };
    run.params.insert("n".into(), json!(n));
    run.params.insert("special_tol".into(), json!(SPECIAL_TOL));
    let sf = load_or_compute(common.cache.as_deref(), n, SPECIAL_TOL)?;
    std::fs::create_dir_all(&common.out)?;
    let p = run.path("special.csv".into());
    export::write_special(&p, &sf)?;
    let r = sf.residuals();
    let summary = json!({
        "n": n,
        "period": sf.period(),
        "alpha": sf.alpha(),
        "beta": sf.beta(),
        "c": sf.c(),
        "d": sf.d(),
        "grid_intervals": sf.node_values().len() - 1,
        "residuals": { "energy": r.energy, "derivative": r.derivative, "symmetry": r.symmetry },
    });
    let p = run.path("special.json".into());
    write_json(&p, &summary)?;
    Ok(Report { findings: 1, failure: None })
}
