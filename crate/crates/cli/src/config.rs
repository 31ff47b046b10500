//! Run configuration from command-line flags and `key=value` files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Solve,
    Estimate,
    Adapt,
    Sweep,
    Convergence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Estimate => "estimate",
            Command::Adapt => "adapt",
            Command::Sweep => "sweep",
            Command::Convergence => "convergence",
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        <Command as ValueEnum>::from_str(s, false).map_err(|_| ConfigError(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Plate bending solver with guaranteed a posteriori error bounds.
#[derive(Debug, Parser)]
#[command(name = "kirchhoff", version)]
pub struct Cli {
    /// What to run.
    #[arg(value_enum)]
    pub command: Command,
    /// Benchmark case: lshape, smooth or timoshenko.
    #[arg(long)]
    pub case: Option<String>,
    /// Discretization: ipdg or hhj.
    #[arg(long)]
    pub method: Option<String>,
    /// Polynomial degree of the deflection.
    #[arg(long)]
    pub k: Option<usize>,
    /// Penalty factors α₀ (α = α₀ (k+1)²), comma separated.
    #[arg(long)]
    pub alpha0: Option<String>,
    /// Cells per unit length of the initial structured mesh.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of mesh levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Largest number of deflection unknowns.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Marking threshold.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Verify the guaranteed-bound properties and exit with status 2 on
    /// failure.
    #[arg(long)]
    pub check: bool,
    /// `key=value` file with any of the settings above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed recorded with the run.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub case: String,
    pub method: String,
    pub k: usize,
    /// Empty: the case's own penalty factor.
    pub alpha0: Vec<f64>,
    pub n: usize,
    /// Mesh file replacing the structured mesh.
    pub mesh: Option<PathBuf>,
    pub levels: usize,
    pub budget: usize,
    pub theta: f64,
    pub out: PathBuf,
    pub check: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            case: "smooth".into(),
            method: "ipdg".into(),
            k: 2,
            alpha0: Vec::new(),
            n: 4,
            mesh: None,
            levels: match command {
                Command::Adapt => 6,
                Command::Convergence => 3,
                _ => 1,
            },
            budget: 50_000,
            theta: 0.25,
            out: PathBuf::from("."),
            check: false,
            seed: 0,
        }
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
            v.parse()
                .map_err(|_| ConfigError(format!("invalid value '{v}' for '{key}'")))
        }
        match key {
            "command" => self.command = value.parse()?,
            "case" => self.case = value.to_string(),
            "method" => self.method = value.to_string(),
            "k" => self.k = parse(key, value)?,
            "alpha0" => self.alpha0 = parse_list(value)?,
            "n" => self.n = parse(key, value)?,
            "mesh" => self.mesh = (!value.is_empty()).then(|| PathBuf::from(value)),
            "levels" => self.levels = parse(key, value)?,
            "budget" => self.budget = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "check" => self.check = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(ConfigError(format!("unknown setting '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key=value", no + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| ConfigError(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    /// Textual form accepted by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let alpha: Vec<String> = self.alpha0.iter().map(|a| a.to_string()).collect();
        let mesh = self.mesh.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        format!(
            "command={}\ncase={}\nmethod={}\nk={}\nalpha0={}\nn={}\nmesh={}\nlevels={}\nbudget={}\ntheta={}\nout={}\ncheck={}\nseed={}\n",
            self.command.name(),
            self.case,
            self.method,
            self.k,
            alpha.join(","),
            self.n,
            mesh,
            self.levels,
            self.budget,
            self.theta,
            self.out.display(),
            self.check,
            self.seed
        )
    }

    /// Resolves flags over an optional config file over the defaults.
    pub fn from_cli(cli: &Cli) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::new(cli.command);
        if let Some(path) = &cli.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
            // The command given on the command line wins.
            cfg.command = cli.command;
        }
        if let Some(v) = &cli.case {
            cfg.case = v.clone();
        }
        if let Some(v) = &cli.method {
            cfg.method = v.clone();
        }
        if let Some(v) = cli.k {
            cfg.k = v;
        }
        if let Some(v) = &cli.alpha0 {
            cfg.alpha0 = parse_list(v)?;
        }
        if let Some(v) = cli.n {
            cfg.n = v;
        }
        if let Some(v) = cli.levels {
            cfg.levels = v;
        }
        if let Some(v) = cli.budget {
            cfg.budget = v;
        }
        if let Some(v) = cli.theta {
            cfg.theta = v;
        }
        if let Some(v) = &cli.out {
            cfg.out = v.clone();
        }
        if cli.check {
            cfg.check = true;
        }
        if let Some(v) = cli.seed {
            cfg.seed = v;
        }
        Ok(cfg)
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, ConfigError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| ConfigError(format!("invalid number '{p}' in list")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::new(Command::Sweep);
        c.case = "timoshenko".into();
        c.alpha0 = vec![0.25, 0.5, 1.0, 8.0];
        c.mesh = Some(PathBuf::from("a/b.txt"));
        c.theta = 0.3;
        c.check = true;
        c.seed = 42;
        let mut d = RunConfig::new(Command::Solve);
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn bad_lines_are_reported() {
        let mut c = RunConfig::new(Command::Solve);
        assert!(c.apply_text("k=2\nfoo").unwrap_err().0.starts_with("line 2"));
        assert!(c.apply_text("k=two").is_err());
        assert!(c.apply_text("colour=red").is_err());
        c.apply_text("# comment\nk = 3 # trailing\n").unwrap();
        assert_eq!(c.k, 3);
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("kirchhoff-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "case=lshape\nk=3\nn=2\n").unwrap();
        let cli = Cli::parse_from(["kirchhoff", "adapt", "--config", path.to_str().unwrap(), "--k", "2"]);
        let c = RunConfig::from_cli(&cli).unwrap();
        assert_eq!((c.case.as_str(), c.k, c.n, c.levels), ("lshape", 2, 2, 6));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
