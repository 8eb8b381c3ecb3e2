use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use stabkit::alpha::{self, CertifyOptions, DelaySystem};
use stabkit::autonomous::{self, EQUILIBRIUM_TOL};
use stabkit::discrete;
use stabkit::floquet::{self, PeriodicSystem};
use stabkit::linalg;
use stabkit::lyapunov::{self, AttractionConfig, QuadraticFormTV, SylvesterScan};
use stabkit::odeint::{self, MatrixFn};
use stabkit::{CandidateV, CertificateRoute, Expr, HistoryFn, Matrix, ScanConfig, SystemDef};

use crate::file::{input_error, parse_matrix_arg, parse_vector_arg, Entry, Model, SystemFile};
use crate::report::{tolerances, Report};

#[derive(Debug, Parser)]
#[command(
    name = "stabkit",
    version,
    about = "Stability analysis of linear, nonlinear, delay, periodic and discrete systems"
)]
pub struct Cli {
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalue verdict for a constant linear system.
    Classify(ClassifyArgs),
    /// Find equilibria of an autonomous system and classify their linearizations.
    Linearize(LinearizeArgs),
    /// Lyapunov equation, candidate-function checks and the time-varying Sylvester test.
    Lyapunov(LyapunovArgs),
    /// Estimate a region of attraction from a quadratic Lyapunov function.
    Attraction(AttractionArgs),
    /// Certify an exponential decay rate for a linear delay system.
    Alpha(AlphaArgs),
    /// Monodromy matrix, characteristic multipliers and periodic verdict.
    Floquet(FloquetArgs),
    /// Discrete-time orbits and difference-based Lyapunov checks.
    Discrete(DiscreteArgs),
    /// Integrate a continuous system and optionally fit an exponential envelope.
    Simulate(SimulateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::Linearize(_) => "linearize",
            Command::Lyapunov(_) => "lyapunov",
            Command::Attraction(_) => "attraction",
            Command::Alpha(_) => "alpha",
            Command::Floquet(_) => "floquet",
            Command::Discrete(_) => "discrete",
            Command::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Relative band inside which a real part counts as zero.
    #[arg(long, default_value_t = linalg::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct LinearizeArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Linearize at this point only, e.g. `3.14159,0`.
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
    /// Newton seeds separated by `;`, e.g. `0,0;2,0.5`.
    #[arg(long, allow_hyphen_values = true)]
    pub seeds: Option<String>,
    /// Seed grid `lo:hi:step` used in every coordinate when no seeds are given.
    #[arg(long, default_value = "-3:3:1", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value_t = linalg::DEFAULT_TOL)]
    pub tol: f64,
    /// Newton residual target.
    #[arg(long, default_value_t = 1e-12)]
    pub newton_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    /// Radius of the sampled ball.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Number of sampled states.
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    /// Start of the time window.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    /// Length of the time window.
    #[arg(long, default_value_t = 50.0)]
    pub t_span: f64,
    /// Number of sampled times for time-varying problems.
    #[arg(long, default_value_t = 256)]
    pub time_samples: usize,
    /// How many extreme samples are polished by pattern search.
    #[arg(long, default_value_t = 8)]
    pub refine: usize,
}

impl ScanArgs {
    fn config(&self) -> ScanConfig {
        ScanConfig {
            radius: self.radius,
            space_samples: self.samples,
            t0: self.t0,
            t_span: self.t_span,
            time_samples: self.time_samples,
            refine: self.refine,
        }
    }
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: Option<PathBuf>,
    /// Candidate function V(x, t).
    #[arg(long)]
    pub v: Option<String>,
    /// Treat the candidate as an instability function W.
    #[arg(long, requires = "v")]
    pub instability: bool,
    /// Weight Q for the matrix equation AᵀP + PA = -Q, as JSON (default identity).
    #[arg(long)]
    pub q: Option<String>,
    /// Coefficient matrix of a time-varying quadratic form (JSON file).
    #[arg(long, conflicts_with_all = ["v", "q"])]
    pub form: Option<PathBuf>,
    /// States range over Σ xj² < mu in the Sylvester test.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Lower bounds for the leading minors, comma separated (default 1e-6 each).
    #[arg(long)]
    pub deltas: Option<String>,
    #[command(flatten)]
    pub scan: ScanArgs,
}

#[derive(Debug, Args)]
pub struct AttractionArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Weight P of V = xᵀPx as JSON (default identity).
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub cmax: f64,
    #[arg(long, default_value_t = 1000)]
    pub levels: usize,
    #[arg(long, default_value_t = 1024)]
    pub directions: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Route {
    Riccati,
    AlgebraicRiccati,
    DelayLyapunov,
}

impl From<Route> for CertificateRoute {
    fn from(r: Route) -> Self {
        match r {
            Route::Riccati => CertificateRoute::Riccati,
            Route::AlgebraicRiccati => CertificateRoute::AlgebraicRiccati,
            Route::DelayLyapunov => CertificateRoute::DelayLyapunov,
        }
    }
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Decay rate to certify.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Route::DelayLyapunov)]
    pub route: Route,
    /// P or P(t) as JSON; entries may be expressions in t.
    #[arg(long)]
    pub p: Option<String>,
    /// End of the grid used for residuals and sups.
    #[arg(long, default_value_t = 5.0)]
    pub grid_t1: f64,
    #[arg(long, default_value_t = 501)]
    pub grid_samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub residual_tol: f64,
    /// Simulation horizon for the trajectory cross-check (0 skips it).
    #[arg(long, default_value_t = 20.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Constant initial function, comma separated (default all ones).
    #[arg(long, allow_hyphen_values = true)]
    pub history: Option<String>,
}

#[derive(Debug, Args)]
pub struct FloquetArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Period; overrides the file.
    #[arg(long)]
    pub period: Option<f64>,
    /// RK4 step for the monodromy matrix.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Band around |ρ| = 1.
    #[arg(long, default_value_t = floquet::UNIT_BAND)]
    pub unit_band: f64,
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Discretize a continuous system by forward Euler with this sampling period.
    #[arg(long)]
    pub euler: Option<f64>,
    /// Candidate function V(x, k).
    #[arg(long)]
    pub v: Option<String>,
    #[arg(long, default_value_t = discrete::DEFAULT_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = 4096)]
    pub samples: usize,
    /// Initial state for an orbit, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Write the orbit as CSV (columns k,x1..xn).
    #[arg(long, requires = "x0")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// System definition file (JSON).
    #[arg(long)]
    pub system: PathBuf,
    /// Initial state (or constant initial function for delay systems).
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    #[arg(long)]
    pub t1: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Write the trajectory as CSV (columns t,x1..xn).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Fit ‖x(t)‖ ≤ c·e^{-λ(t - t_lo)} on the trajectory.
    #[arg(long)]
    pub fit_envelope: bool,
    /// Start of the fitting window (default: 10% into the run).
    #[arg(long, allow_hyphen_values = true)]
    pub window_start: Option<f64>,
}

/// Runs one command and returns the report.
pub fn execute(cli: &Cli, args: Vec<String>) -> Result<Report> {
    let mut report = Report::new(cli.command.name(), args);
    let start = std::time::Instant::now();
    match &cli.command {
        Command::Classify(a) => classify(a, &mut report)?,
        Command::Linearize(a) => linearize(a, &mut report)?,
        Command::Lyapunov(a) => lyapunov_cmd(a, &mut report)?,
        Command::Attraction(a) => attraction(a, &mut report)?,
        Command::Alpha(a) => alpha_cmd(a, &mut report)?,
        Command::Floquet(a) => floquet_cmd(a, &mut report)?,
        Command::Discrete(a) => discrete_cmd(a, &mut report)?,
        Command::Simulate(a) => simulate(a, &mut report)?,
    }
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

fn load(path: &Path, report: &mut Report) -> Result<(SystemFile, Model)> {
    let file = SystemFile::load(path)?;
    let model = file
        .build()
        .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    report.system = Some(file.name.clone());
    Ok((file, model))
}

fn continuous(model: Model, what: &str) -> Result<SystemDef> {
    match model {
        Model::Continuous(s) => Ok(s),
        Model::Periodic(p) => Ok(p.system().clone()),
        Model::Discrete(_) => Err(input_error(format!("{what} needs a continuous-time system"))),
    }
}

fn check_len(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(input_error(format!(
            "--{what} has {} entries, the system has dimension {n}",
            v.len()
        )));
    }
    Ok(())
}

fn constant_matrix(f: &MatrixFn, what: &str) -> Result<Matrix> {
    match f {
        MatrixFn::Constant(m) => Ok(m.clone()),
        MatrixFn::TimeVarying(_) => Err(input_error(format!("--{what} must be numeric"))),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).context("serializing the report")
}

fn classify(a: &ClassifyArgs, report: &mut Report) -> Result<()> {
    let (file, model) = load(&a.system, report)?;
    let sys = continuous(model, "classify")?;
    if !sys.is_linear() || !sys.is_autonomous() || !sys.delays.is_empty() {
        return Err(input_error(format!(
            "classify needs a constant linear system; `{}` is {:?}",
            file.name, file.kind
        )));
    }
    let m = sys.linear_matrix_at(0.0)?;
    let verdict = autonomous::classify_linear(&m, a.tol)?;
    let critical_point = if sys.dim == 2 {
        match autonomous::classify_critical_point_2d(&m, a.tol) {
            Ok(k) => json!(k),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        Value::Null
    };
    let equilibrium = match &sys.rhs {
        stabkit::odeint::Rhs::LinearConstant { input: Some(inp), .. } => {
            match autonomous::equilibrium_affine(&m, &inp.b, &inp.u) {
                Ok(x) => json!(x),
                Err(e) => json!({ "error": e.to_string() }),
            }
        }
        _ => json!(vec![0.0; sys.dim]),
    };
    report.tolerances = tolerances([("eigen_tol", a.tol), ("band", verdict.band)]);
    report.result = json!({
        "matrix": m,
        "kind": verdict.kind,
        "eigenvalues": verdict.eigenvalues,
        "bibo": verdict.bibo,
        "critical_point": critical_point,
        "equilibrium": equilibrium,
    });
    Ok(())
}

fn parse_grid(text: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<f64> = parts.iter().filter_map(|p| p.trim().parse().ok()).collect();
    if parts.len() != 3 || nums.len() != 3 || !(nums[2] > 0.0) || nums[1] < nums[0] {
        return Err(input_error(format!("--grid: expected lo:hi:step, got `{text}`")));
    }
    Ok((nums[0], nums[1], nums[2]))
}

fn grid_seeds(dim: usize, lo: f64, hi: f64, step: f64) -> Result<Vec<Vec<f64>>> {
    let count = ((hi - lo) / step).round() as usize + 1;
    let total = count.checked_pow(dim as u32).filter(|&c| c <= 100_000);
    let total = total.ok_or_else(|| input_error("--grid would produce more than 100000 seeds; pass --seeds"))?;
    Ok((0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let v = lo + step * (idx % count) as f64;
                    idx /= count;
                    v
                })
                .collect()
        })
        .collect())
}

fn linearize(a: &LinearizeArgs, report: &mut Report) -> Result<()> {
    let (_, model) = load(&a.system, report)?;
    let sys = continuous(model, "linearize")?;
    if !sys.is_autonomous() || !sys.delays.is_empty() {
        return Err(input_error("linearize needs an autonomous system without delays"));
    }
    report.tolerances = tolerances([
        ("eigen_tol", a.tol),
        ("newton_tol", a.newton_tol),
        ("equilibrium_tol", EQUILIBRIUM_TOL),
        ("jacobian_step", autonomous::JACOBIAN_STEP),
    ]);
    let (points, notes) = if let Some(at) = &a.at {
        let x = parse_vector_arg(at, "at")?;
        check_len(&x, sys.dim, "at")?;
        (vec![x], Vec::new())
    } else {
        let seeds = match &a.seeds {
            Some(s) => s
                .split(';')
                .map(|p| {
                    let x = parse_vector_arg(p, "seeds")?;
                    check_len(&x, sys.dim, "seeds")?;
                    Ok(x)
                })
                .collect::<Result<Vec<_>>>()?,
            None => {
                let (lo, hi, step) = parse_grid(&a.grid)?;
                grid_seeds(sys.dim, lo, hi, step)?
            }
        };
        let found = autonomous::find_equilibria(&sys, &seeds, a.newton_tol)?;
        let dropped = found.notes.len();
        let notes = if dropped > 0 {
            vec![format!("{dropped} of {} seeds did not converge", seeds.len())]
        } else {
            Vec::new()
        };
        (found.equilibria.into_iter().map(|e| e.point).collect(), notes)
    };
    let mut out = Vec::new();
    for x in points {
        let entry = match autonomous::local_stability(&sys, &x, a.tol) {
            Ok(ls) => to_value(&ls)?,
            Err(e) => json!({ "point": x, "error": e.to_string() }),
        };
        out.push(entry);
    }
    report.result = json!({ "equilibria": out, "notes": notes });
    Ok(())
}

fn candidate(file: &SystemFile, text: &str) -> Result<CandidateV> {
    let e: Expr = file.expr(text).map_err(|e| input_error(format!("--v: {e}")))?;
    Ok(CandidateV::new(e))
}

fn scan_tolerances(cfg: &ScanConfig, report: &mut Report) {
    report.tolerances = tolerances([
        ("radius", json!(cfg.radius)),
        ("space_samples", json!(cfg.space_samples)),
        ("t0", json!(cfg.t0)),
        ("t_span", json!(cfg.t_span)),
        ("time_samples", json!(cfg.time_samples)),
        ("refine", json!(cfg.refine)),
        ("ratio_band", json!(stabkit::scan::RATIO_BAND)),
        ("origin_tol", json!(lyapunov::ORIGIN_TOL)),
        ("gradient_step", json!(CandidateV::new(Expr::Number(0.0)).step)),
    ]);
}

fn lyapunov_cmd(a: &LyapunovArgs, report: &mut Report) -> Result<()> {
    if let Some(form) = &a.form {
        return sylvester(a, form, report);
    }
    let path = a
        .system
        .as_ref()
        .ok_or_else(|| input_error("lyapunov needs --system unless --form is given"))?;
    let (file, model) = load(path, report)?;
    let sys = continuous(model, "lyapunov")?;
    if let Some(v) = &a.v {
        let v = candidate(&file, v)?;
        let cfg = a.scan.config();
        scan_tolerances(&cfg, report);
        report.result = if a.instability {
            json!({ "mode": "instability", "report": lyapunov::check_instability(&sys, &v, &cfg)? })
        } else {
            json!({ "mode": "candidate", "report": lyapunov::check_candidate(&sys, &v, &cfg)? })
        };
        return Ok(());
    }
    if !sys.is_linear() || !sys.is_autonomous() || !sys.delays.is_empty() {
        return Err(input_error(
            "without --v, lyapunov solves AᵀP + PA = -Q and needs a constant linear system",
        ));
    }
    let am = sys.linear_matrix_at(0.0)?;
    let q = match &a.q {
        Some(text) => constant_matrix(&file.matrix_arg(&parse_matrix_arg(text, "q")?, "q")?, "q")?,
        None => Matrix::identity(sys.dim),
    };
    if (&q - &q.transpose()).max_abs() > 0.0 {
        return Err(input_error("--q must be symmetric"));
    }
    let p = lyapunov::solve_lyapunov(&am, &q)?;
    let residual = lyapunov::lyapunov_residual(&am, &p, &q);
    let d = linalg::definiteness(&p, linalg::DEFAULT_TOL)?;
    report.tolerances = tolerances([("definiteness_tol", linalg::DEFAULT_TOL)]);
    report.result = json!({
        "mode": "matrix_equation",
        "a": am,
        "q": q,
        "p": p,
        "residual": residual,
        "relative_residual": residual / q.frobenius_norm().max(linalg::NORM_FLOOR),
        "definiteness": d,
    });
    Ok(())
}

fn sylvester(a: &LyapunovArgs, form: &Path, report: &mut Report) -> Result<()> {
    let text =
        std::fs::read_to_string(form).map_err(|e| input_error(format!("cannot read {}: {e}", form.display())))?;
    let rows: Vec<Vec<Entry>> = serde_json::from_str(&text)
        .map_err(|e| input_error(format!("{}: expected a JSON matrix: {e}", form.display())))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(input_error(format!("{}: form must be square", form.display())));
    }
    let strings: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|e| match e {
                    Entry::Number(v) => format!("{v}"),
                    Entry::Expr(s) => s.clone(),
                })
                .collect()
        })
        .collect();
    let q = QuadraticFormTV::parse(&strings, &stabkit::ParseOptions::new())
        .map_err(|e| input_error(format!("{}: {e}", form.display())))?;
    let deltas = a.deltas.as_deref().map(|d| parse_vector_arg(d, "deltas")).transpose()?;
    if let Some(d) = &deltas {
        check_len(d, n, "deltas")?;
    }
    let cfg = SylvesterScan {
        t0: a.scan.t0,
        t_span: a.scan.t_span,
        mu: a.mu,
        deltas,
        space_samples: a.scan.samples,
        time_samples: a.scan.time_samples,
    };
    let v = lyapunov::sylvester_tv(&q, &cfg)?;
    report.system = form.file_stem().map(|s| s.to_string_lossy().into_owned());
    report.tolerances = tolerances([
        ("mu", json!(cfg.mu)),
        ("t0", json!(cfg.t0)),
        ("t_span", json!(cfg.t_span)),
        ("space_samples", json!(cfg.space_samples)),
        ("time_samples", json!(cfg.time_samples)),
        ("deltas", json!(v.deltas)),
    ]);
    report.result = json!({ "mode": "sylvester", "report": v });
    Ok(())
}

fn attraction(a: &AttractionArgs, report: &mut Report) -> Result<()> {
    let (file, model) = load(&a.system, report)?;
    let sys = continuous(model, "attraction")?;
    let p = match &a.p {
        Some(text) => constant_matrix(&file.matrix_arg(&parse_matrix_arg(text, "p")?, "p")?, "p")?,
        None => Matrix::identity(sys.dim),
    };
    let cfg = AttractionConfig {
        cmax: a.cmax,
        levels: a.levels,
        directions: a.directions,
    };
    if !(cfg.cmax > 0.0) || cfg.levels == 0 || cfg.directions == 0 {
        return Err(input_error("--cmax, --levels and --directions must be positive"));
    }
    let r = lyapunov::attraction_region(&sys, &p, &cfg)?;
    report.tolerances = tolerances([
        ("cmax", json!(cfg.cmax)),
        ("levels", json!(cfg.levels)),
        ("directions", json!(cfg.directions)),
        ("bisection_steps", json!(40)),
    ]);
    report.result = json!({ "p": p, "region": r });
    Ok(())
}

fn alpha_cmd(a: &AlphaArgs, report: &mut Report) -> Result<()> {
    let (file, model) = load(&a.system, report)?;
    let sys = continuous(model, "alpha")?;
    let dim = sys.dim;
    let ds = DelaySystem::new(sys).map_err(|e| input_error(format!("alpha: {e}")))?;
    let p = match &a.p {
        Some(text) => Some(file.matrix_arg(&parse_matrix_arg(text, "p")?, "p")?),
        None => None,
    };
    let history = match &a.history {
        Some(h) => {
            let v = parse_vector_arg(h, "history")?;
            check_len(&v, dim, "history")?;
            Some(HistoryFn::constant(v, ds.h()))
        }
        None => None,
    };
    let opts = CertifyOptions {
        grid_t1: a.grid_t1,
        grid_samples: a.grid_samples,
        residual_tol: a.residual_tol,
        horizon: a.horizon,
        step: a.step,
        history,
    };
    let cert = alpha::certify(&ds, a.alpha, a.route.into(), p.as_ref(), &opts)?;
    report.tolerances = tolerances([
        ("residual_tol", json!(opts.residual_tol)),
        ("grid_t1", json!(opts.grid_t1)),
        ("grid_samples", json!(opts.grid_samples)),
        ("horizon", json!(opts.horizon)),
        ("step", json!(opts.step)),
    ]);
    report.result = to_value(&cert)?;
    Ok(())
}

fn floquet_cmd(a: &FloquetArgs, report: &mut Report) -> Result<()> {
    let (_, model) = load(&a.system, report)?;
    let sys = match (model, a.period) {
        (Model::Periodic(p), None) => p,
        (m, Some(period)) => {
            let s = continuous(m, "floquet")?;
            let s = s.with_period(period).map_err(|e| input_error(e.to_string()))?;
            PeriodicSystem::from_system(s).map_err(|e| input_error(e.to_string()))?
        }
        (_, None) => return Err(input_error("floquet needs a periodic system or --period")),
    };
    let r = floquet::analyze(&sys, a.step, a.unit_band)?;
    report.tolerances = tolerances([
        ("step", json!(a.step)),
        ("unit_band", json!(a.unit_band)),
        ("simpson_panels", json!(floquet::SIMPSON_PANELS)),
    ]);
    report.result = to_value(&r)?;
    Ok(())
}

fn discrete_cmd(a: &DiscreteArgs, report: &mut Report) -> Result<()> {
    let (file, model) = load(&a.system, report)?;
    let map = match (model, a.euler) {
        (Model::Discrete(d), None) => d,
        (Model::Discrete(_), Some(_)) => return Err(input_error("--euler applies to continuous systems")),
        (m, Some(t)) => {
            if !(t > 0.0) {
                return Err(input_error("--euler must be positive"));
            }
            discrete::euler_discretize(&continuous(m, "discrete")?, t)?
        }
        (_, None) => return Err(input_error("discrete needs a discrete system or --euler")),
    };
    if a.v.is_none() && a.x0.is_none() {
        return Err(input_error("discrete needs --v, --x0 or both"));
    }
    let mut result = serde_json::Map::new();
    let mut tol = vec![("fixed_point_tol", json!(discrete::FIXED_POINT_TOL))];
    if let Some(t) = a.euler {
        tol.push(("euler_period", json!(t)));
    }
    if let Some(v) = &a.v {
        let v = candidate(&file, v)?;
        let r = discrete::classify_discrete(&map, &v, a.radius, a.samples)?;
        tol.push(("radius", json!(a.radius)));
        tol.push(("samples", json!(a.samples)));
        tol.push(("ratio_band", json!(stabkit::scan::RATIO_BAND)));
        result.insert("classification".into(), to_value(&r)?);
    }
    if let Some(x0) = &a.x0 {
        let x0 = parse_vector_arg(x0, "x0")?;
        check_len(&x0, map.dim, "x0")?;
        let orbit = discrete::iterate(&map, &x0, a.steps)?;
        if let Some(path) = &a.csv {
            std::fs::write(path, orbit.to_csv())
                .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
        }
        tol.push(("steps", json!(a.steps)));
        result.insert(
            "orbit".into(),
            json!({
                "steps": orbit.len() - 1,
                "escaped": orbit.escaped,
                "final_state": orbit.last_state(),
                "final_norm": linalg::vec_norm(orbit.last_state()),
            }),
        );
    }
    report.tolerances = tolerances(tol);
    report.result = Value::Object(result);
    Ok(())
}

fn simulate(a: &SimulateArgs, report: &mut Report) -> Result<()> {
    let (_, model) = load(&a.system, report)?;
    let sys = continuous(model, "simulate")?;
    let x0 = parse_vector_arg(&a.x0, "x0")?;
    check_len(&x0, sys.dim, "x0")?;
    if !(a.t1 > a.t0) {
        return Err(input_error("--t1 must exceed --t0"));
    }
    let traj = if sys.delays.is_empty() {
        odeint::integrate(&sys, &x0, a.t0, a.t1, a.step)?
    } else {
        if a.t0 != 0.0 {
            return Err(input_error("delay systems start at t = 0"));
        }
        odeint::integrate_dde(&sys, &HistoryFn::constant(x0.clone(), sys.max_lag()), a.t1, a.step)?
    };
    if let Some(path) = &a.csv {
        std::fs::write(path, traj.to_csv())
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    }
    let norms = traj.norms();
    let mut result = json!({
        "samples": traj.len(),
        "t_final": traj.times.last(),
        "final_state": traj.last_state(),
        "max_norm": norms.iter().cloned().fold(0.0, f64::max),
        "final_norm": norms.last(),
    });
    let mut tol = vec![
        ("step", json!(a.step)),
        ("escape_threshold", json!(odeint::ESCAPE_THRESHOLD)),
    ];
    if a.fit_envelope {
        let lo = a.window_start.unwrap_or_else(|| alpha::default_window_start(&traj));
        tol.push(("window_start", json!(lo)));
        result["envelope"] = to_value(&alpha::fit_envelope(&traj, lo)?)?;
    }
    report.tolerances = tolerances(tol);
    report.result = result;
    Ok(())
}
