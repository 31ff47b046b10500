//! Execution of a resolved [`RunConfig`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use kirchhoff::adaptivity::{
    adaptive_loop, solve_and_estimate, uniform_loop, AdaptiveConfig, Discretization, LevelResult, Method,
};
use kirchhoff::benchmarks::{alpha_sweep, BenchmarkCase};
use kirchhoff::estimator::ErrorReport;
use kirchhoff::mesh::Mesh;

use crate::config::{Command, RunConfig};
use crate::output::{loglog_svg, report_series, Table};

/// Penalty factors used by `sweep` when none are given.
pub const DEFAULT_SWEEP: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

#[derive(Debug)]
pub enum Failure {
    /// Unknown case or method, or otherwise unusable settings.
    Usage(String),
    /// `--check` found violated properties; artifacts were written.
    Check(Vec<String>),
    /// Solver, estimator or I/O failure.
    Solver(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Check(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Check(v) => write!(f, "check failed:\n  {}", v.join("\n  ")),
            Failure::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<kirchhoff::Error> for Failure {
    fn from(e: kirchhoff::Error) -> Self {
        match e {
            kirchhoff::Error::InvalidArgument(m) => Failure::Usage(m),
            e => Failure::Solver(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Solver(format!("{}: {e}", path.display()))
}

/// Files written by a run.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

/// Properties every report must satisfy; returns the violations.
pub fn check_report(label: &str, r: &ErrorReport) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(eff) = r.eff() {
        if !(eff >= 1.0) {
            out.push(format!("{label}: eff = {eff:.4} < 1"));
        }
    }
    if r.eta_mean > r.eta_nonconf + 0.5 * r.eta_eq + 1e-12 {
        out.push(format!("{label}: eta_mean exceeds eta_nonconf + eta_eq / 2"));
    }
    if r.improved_bound() > r.basic_bound() * (1.0 + 1e-14) {
        out.push(format!("{label}: improved bound exceeds basic bound"));
    }
    let comps = [r.eta_eq, r.eta_nonconf, r.eta_mean, r.eta_jump, r.eta_osc];
    if comps.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        out.push(format!("{label}: estimator component is negative or not finite"));
    }
    out
}

struct Setup {
    case: BenchmarkCase,
    method: Method,
    mesh: Mesh,
}

fn setup(cfg: &RunConfig) -> Result<Setup, Failure> {
    let case = BenchmarkCase::by_name(&cfg.case).ok_or_else(|| {
        Failure::Usage(format!(
            "unknown case '{}' (expected lshape, smooth or timoshenko)",
            cfg.case
        ))
    })?;
    let method: Method = cfg
        .method
        .parse()
        .map_err(|_| Failure::Usage(format!("unknown method '{}' (expected ipdg or hhj)", cfg.method)))?;
    if cfg.k < 2 {
        return Err(Failure::Usage(format!("k must be at least 2, got {}", cfg.k)));
    }
    let mesh = match &cfg.mesh {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Mesh::from_text(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => {
            if cfg.n == 0 {
                return Err(Failure::Usage("n must be positive".into()));
            }
            case.mesh(cfg.n)?
        }
    };
    Ok(Setup { case, method, mesh })
}

fn alpha(cfg: &RunConfig, case: &BenchmarkCase) -> f64 {
    match cfg.alpha0.first() {
        Some(a0) => a0 * ((cfg.k + 1) * (cfg.k + 1)) as f64,
        None => case.alpha(cfg.k),
    }
}

struct Writer {
    dir: PathBuf,
    artifacts: Artifacts,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Artifacts::default(),
        })
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<(), Failure> {
        let p = self.dir.join(name);
        t.write(&p).map_err(|e| io_failure(&p, e))?;
        self.artifacts.files.push(p);
        Ok(())
    }

    fn text(&mut self, name: &str, s: &str) -> Result<(), Failure> {
        let p = self.dir.join(name);
        std::fs::write(&p, s).map_err(|e| io_failure(&p, e))?;
        self.artifacts.files.push(p);
        Ok(())
    }

    fn levels(&mut self, cfg: &RunConfig, levels: &[LevelResult]) -> Result<(), Failure> {
        let mut report = Table::for_reports(None);
        if let Some(last) = levels.last() {
            report.push_report(None, &last.report);
        }
        self.table("report.csv", &report)?;
        if levels.len() > 1 || matches!(cfg.command, Command::Adapt | Command::Convergence) {
            let mut hist = Table::for_reports(Some("level"));
            for (l, r) in levels.iter().enumerate() {
                hist.push_report(Some(l.to_string()), &r.report);
            }
            self.table("history.csv", &hist)?;
            let reports: Vec<&ErrorReport> = levels.iter().map(|l| &l.report).collect();
            let x: Vec<f64> = reports.iter().map(|r| r.dofs as f64).collect();
            let title = format!("{} {} k={} ({})", cfg.case, cfg.method, cfg.k, cfg.command.name());
            self.text("convergence.svg", &loglog_svg(&title, "dofs", &x, &report_series(&reports)))?;
        }
        for (l, r) in levels.iter().enumerate() {
            self.text(&format!("mesh_L{l}.txt"), &r.mesh.to_text())?;
        }
        Ok(())
    }
}

fn indicator_table(r: &ErrorReport) -> Table {
    let mut t = Table::new(&["element", "eta_eq", "eta_nonconf", "eta_mean", "eta_jump", "osc"]);
    let e = &r.elements;
    let f = |x: f64| format!("{:.10e}", x.sqrt());
    for i in 0..e.eq.len() {
        t.rows.push(vec![
            i.to_string(),
            f(e.eq[i]),
            f(e.nonconf[i]),
            f(e.mean[i]),
            f(e.jump[i]),
            f(e.osc[i]),
        ]);
    }
    t
}

/// Runs `cfg`, writing its artifacts into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let Setup { case, method, mesh } = setup(cfg)?;
    let disc = Discretization {
        method,
        k: cfg.k,
        alpha: alpha(cfg, &case),
    };
    let exact = case.exact();
    let mut w = Writer::new(&cfg.out)?;
    let mut checked: Vec<(String, ErrorReport)> = Vec::new();
    match cfg.command {
        Command::Solve | Command::Estimate => {
            let r = solve_and_estimate(Arc::new(mesh), &disc, &case.load, exact)?;
            w.levels(cfg, std::slice::from_ref(&r))?;
            if cfg.command == Command::Estimate {
                w.table("indicators.csv", &indicator_table(&r.report))?;
            }
            checked.push(("level 0".into(), r.report));
        }
        Command::Adapt => {
            let ac = AdaptiveConfig {
                theta: cfg.theta,
                max_levels: cfg.levels,
                max_dofs: cfg.budget,
                ..Default::default()
            };
            let levels = adaptive_loop(mesh, &disc, &case.load, exact, &ac)?;
            w.levels(cfg, &levels)?;
            checked.extend(levels.into_iter().enumerate().map(|(l, r)| (format!("level {l}"), r.report)));
        }
        Command::Convergence => {
            if cfg.levels == 0 {
                return Err(Failure::Usage("at least one level is required".into()));
            }
            let levels = uniform_loop(mesh, &disc, &case.load, exact, cfg.levels)?;
            w.levels(cfg, &levels)?;
            checked.extend(levels.into_iter().enumerate().map(|(l, r)| (format!("level {l}"), r.report)));
        }
        Command::Sweep => {
            let alphas: Vec<f64> = if cfg.alpha0.is_empty() {
                DEFAULT_SWEEP.to_vec()
            } else {
                cfg.alpha0.clone()
            };
            if alphas.iter().any(|a| !(*a > 0.0)) {
                return Err(Failure::Usage("penalty factors must be positive".into()));
            }
            let rows = alpha_sweep(&case, &mesh, cfg.k, method, &alphas)?;
            let mut t = Table::for_reports(Some("alpha0"));
            for (a0, r) in &rows {
                t.push_report(Some(a0.to_string()), r);
            }
            w.table("sweep.csv", &t)?;
            let reports: Vec<&ErrorReport> = rows.iter().map(|(_, r)| r).collect();
            let title = format!("{} {} k={} penalty sweep", cfg.case, cfg.method, cfg.k);
            w.text("convergence.svg", &loglog_svg(&title, "alpha0", &alphas, &report_series(&reports)))?;
            w.text("mesh_L0.txt", &mesh.to_text())?;
            checked.extend(rows.into_iter().map(|(a0, r)| (format!("alpha0 {a0}"), r)));
        }
    }
    w.text("run.cfg", &cfg.to_text())?;
    if cfg.check {
        let failures: Vec<String> = checked.iter().flat_map(|(l, r)| check_report(l, r)).collect();
        if !failures.is_empty() {
            return Err(Failure::Check(failures));
        }
    }
    Ok(w.artifacts)
}
