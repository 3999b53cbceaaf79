//! Resolved run configuration and its `key=value` text form.
//!
//! Sources are applied in order: built-in defaults, each `--params` value (a file
//! path or inline pairs), explicit flags, then command-specific defaults for
//! anything still unset. The echoed `config.txt` lists every key and can be passed
//! back through `--params` to repeat a run.

use std::fmt::Write as _;
use std::path::Path;

use rvehom_core::params::parse_fraction;
use rvehom_core::solver::DEFAULT_MAX_ITER;
use rvehom_core::EnsembleParams;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Field,
    Solve,
    Sweep,
    Refine,
    Dos,
    Bench,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Field => "field",
            CommandKind::Solve => "solve",
            CommandKind::Sweep => "sweep",
            CommandKind::Refine => "refine",
            CommandKind::Dos => "dos",
            CommandKind::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(rename = "L")]
    pub l: usize,
    pub m0: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub tol: f64,
    pub seed: u64,
    pub n_realizations: usize,
    pub first_index: u64,
    #[serde(rename = "L_list")]
    pub l_list: Vec<usize>,
    pub grid_list: Vec<usize>,
    pub delta: f64,
    pub max_iter: usize,
    pub eta: Option<f64>,
    pub workers: Option<usize>,
    pub serial: bool,
    pub strict: bool,
    pub dump_matrix: bool,
}

/// Values not yet resolved; `None` means "use the default".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub l: Option<usize>,
    pub m0: Option<usize>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub n_realizations: Option<usize>,
    pub first_index: Option<u64>,
    pub l_list: Option<Vec<usize>>,
    pub grid_list: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub max_iter: Option<usize>,
    pub eta: Option<Option<f64>>,
    pub workers: Option<Option<usize>>,
    pub serial: Option<bool>,
    pub strict: Option<bool>,
    pub dump_matrix: Option<bool>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| bad(format!("{key}: cannot parse {v:?}")))
}

fn real(key: &str, v: &str) -> Result<f64, CliError> {
    parse_fraction(v).ok_or_else(|| bad(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool, CliError> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(bad(format!("{key}: expected true/false, got {v:?}"))),
    }
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<usize>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn auto<T>(key: &str, v: &str, parse: impl Fn(&str, &str) -> Result<T, CliError>) -> Result<Option<T>, CliError> {
    if v.trim() == "auto" {
        Ok(None)
    } else {
        parse(key, v).map(Some)
    }
}

impl Overrides {
    /// Applies one `key=value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value;
        match key.trim() {
            // echoed for reference; the command itself comes from the command line
            "command" => {}
            "L" | "l" => self.l = Some(num(key, v)?),
            "m0" => self.m0 = Some(num(key, v)?),
            "alpha" => self.alpha = Some(real(key, v)?),
            "lambda" => self.lambda = Some(real(key, v)?),
            "tol" => self.tol = Some(real(key, v)?),
            "seed" => self.seed = Some(num(key, v)?),
            "n_realizations" | "N" => self.n_realizations = Some(num(key, v)?),
            "first_index" | "index" => self.first_index = Some(num(key, v)?),
            "L_list" | "l_list" => self.l_list = Some(parse_list(key, v)?),
            "grid_list" => self.grid_list = Some(parse_list(key, v)?),
            "delta" => self.delta = Some(real(key, v)?),
            "max_iter" => self.max_iter = Some(num(key, v)?),
            "eta" => self.eta = Some(auto(key, v, real)?),
            "workers" => self.workers = Some(auto(key, v, num)?),
            "serial" => self.serial = Some(flag(key, v)?),
            "strict" => self.strict = Some(flag(key, v)?),
            "dump_matrix" => self.dump_matrix = Some(flag(key, v)?),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` pairs, one per line or separated by whitespace or `;`.
    /// `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for pair in line.split(|c: char| c.is_whitespace() || c == ';').filter(|s| !s.is_empty()) {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got {pair:?}")))?;
                self.set(k, v)?;
            }
        }
        Ok(())
    }

    /// A `--params` value: an existing file, or inline pairs.
    pub fn apply_source(&mut self, source: &str) -> Result<(), CliError> {
        let path = Path::new(source);
        if !source.contains('=') || path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| bad(format!("cannot read parameter file {source:?}: {e}")))?;
            self.apply_text(&text)
        } else {
            self.apply_text(source)
        }
    }

    /// Later values win.
    pub fn overlay(&mut self, other: Overrides) {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f; })*};
        }
        take!(
            l, m0, alpha, lambda, tol, seed, n_realizations, first_index, l_list, grid_list, delta, max_iter,
            eta, workers, serial, strict, dump_matrix
        );
    }

    pub fn resolve(self, command: CommandKind) -> Result<RunConfig, CliError> {
        let l = self.l.unwrap_or(4);
        let m0 = self.m0.unwrap_or(4);
        let default_n = match command {
            CommandKind::Sweep => 500,
            CommandKind::Dos => 20,
            _ => 1,
        };
        let default_l_list = match command {
            CommandKind::Bench => vec![16, 32, 64, 128],
            _ => vec![2, 4, 8, 16],
        };
        let n = m0 * l;
        let cfg = RunConfig {
            command,
            l,
            m0,
            alpha: self.alpha.unwrap_or(0.25),
            lambda: self.lambda.unwrap_or(0.4),
            tol: self.tol.unwrap_or(rvehom_core::DEFAULT_TOL),
            seed: self.seed.unwrap_or(0),
            n_realizations: self.n_realizations.unwrap_or(default_n),
            first_index: self.first_index.unwrap_or(1),
            l_list: self.l_list.unwrap_or(default_l_list),
            grid_list: self.grid_list.unwrap_or_else(|| (0..5).map(|p| n << p).collect()),
            delta: self.delta.unwrap_or(0.0),
            max_iter: self.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            eta: self.eta.flatten(),
            workers: self.workers.flatten(),
            serial: self.serial.unwrap_or(false),
            strict: self.strict.unwrap_or(false),
            dump_matrix: self.dump_matrix.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<EnsembleParams, CliError> {
        Ok(EnsembleParams::new(self.l, self.m0, self.alpha, self.lambda, self.tol)?)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        if self.first_index < 1 {
            return Err(bad("first_index must be >= 1"));
        }
        let min_n = if self.command == CommandKind::Sweep { 2 } else { 1 };
        if self.n_realizations < min_n {
            return Err(bad(format!("n_realizations must be >= {min_n}")));
        }
        if self.delta < 0.0 {
            return Err(bad("delta must be >= 0"));
        }
        if self.max_iter == 0 {
            return Err(bad("max_iter must be >= 1"));
        }
        if self.eta.is_some_and(|e| !(e > 0.0)) {
            return Err(bad("eta must be positive"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers must be >= 1"));
        }
        if matches!(self.command, CommandKind::Sweep | CommandKind::Bench) {
            rvehom_core::ensemble::validate_l_list(&self.l_list)?;
        }
        Ok(())
    }

    pub fn solve_options(&self) -> rvehom_core::SolveOptions {
        rvehom_core::SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            delta: self.delta,
        }
    }

    /// Every key, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("command", self.command.name().into());
        put("L", self.l.to_string());
        put("m0", self.m0.to_string());
        put("alpha", self.alpha.to_string());
        put("lambda", self.lambda.to_string());
        put("tol", format!("{:e}", self.tol));
        put("seed", self.seed.to_string());
        put("n_realizations", self.n_realizations.to_string());
        put("first_index", self.first_index.to_string());
        put("L_list", list(&self.l_list));
        put("grid_list", list(&self.grid_list));
        put("delta", self.delta.to_string());
        put("max_iter", self.max_iter.to_string());
        put("eta", self.eta.map_or("auto".into(), |e| e.to_string()));
        put("workers", self.workers.map_or("auto".into(), |w| w.to_string()));
        put("serial", self.serial.to_string());
        put("strict", self.strict.to_string());
        put("dump_matrix", self.dump_matrix.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut o = Overrides::default();
        o.apply_text("L=8 m0=4 alpha=1/4\nlambda=0.3 # contrast\nL_list=2,4,8;eta=0.5").unwrap();
        let cfg = o.resolve(CommandKind::Sweep).unwrap();
        assert_eq!(cfg.l, 8);
        assert_eq!(cfg.alpha, 0.25);
        assert_eq!(cfg.eta, Some(0.5));
        let mut back = Overrides::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back.resolve(CommandKind::Sweep).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut o = Overrides::default();
        assert!(matches!(o.apply_text("bogus=1"), Err(CliError::Config(_))));
        assert!(matches!(o.apply_text("L"), Err(CliError::Config(_))));
        o.apply_text("alpha=0.3").unwrap();
        assert!(matches!(o.resolve(CommandKind::Solve), Err(CliError::Config(_))));
        let mut o = Overrides::default();
        o.apply_text("L_list=2,6").unwrap();
        assert!(o.clone().resolve(CommandKind::Solve).is_ok());
        assert!(matches!(o.resolve(CommandKind::Sweep), Err(CliError::Config(_))));
    }

    #[test]
    fn later_sources_win() {
        let mut a = Overrides::default();
        a.apply_text("L=2 seed=5").unwrap();
        let mut b = Overrides::default();
        b.apply_text("L=8").unwrap();
        a.overlay(b);
        let cfg = a.resolve(CommandKind::Field).unwrap();
        assert_eq!((cfg.l, cfg.seed), (8, 5));
        assert_eq!(cfg.grid_list, vec![32, 64, 128, 256, 512]);
    }
}
