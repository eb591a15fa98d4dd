//! Line-based `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use membrane_core::{BoundaryData, Grid2D, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    State,
    Optimize,
    Verify,
    SweepEps,
    MakeTarget,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::State => "state",
            Command::Optimize => "optimize",
            Command::Verify => "verify",
            Command::SweepEps => "sweep-eps",
            Command::MakeTarget => "make-target",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Command::State,
            Command::Optimize,
            Command::Verify,
            Command::SweepEps,
            Command::MakeTarget,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    TwoPhase,
    OnePhase,
}

/// Parse or validation failure; `line` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

fn key_error(key: &str, line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        key: Some(key.to_string()),
        message: message.into(),
    }
}

/// Scalar function of `(x, y)` given as text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expression {
    text: String,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self, String> {
        let expr: meval::Expr = text.parse().map_err(|e| format!("{e}"))?;
        expr.bind2("x", "y").map(drop).map_err(|e| format!("{e}"))?;
        Ok(Self { text: text.to_string() })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn function(&self) -> impl Fn(f64, f64) -> f64 {
        let expr: meval::Expr = self.text.parse().expect("validated on construction");
        expr.bind2("x", "y").expect("validated on construction")
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.function())(x, y)
    }

    /// Samples every node; non-finite values are reported with the node index.
    pub fn field(&self, grid: &Grid2D) -> membrane_core::Result<ScalarField> {
        ScalarField::from_fn(*grid, self.function())
    }

    pub fn boundary(&self, grid: &Grid2D) -> membrane_core::Result<BoundaryData> {
        BoundaryData::from_fn(*grid, self.function())
    }
}

/// Field given inline or as a field CSV file.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    Expr(Expression),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub ax: f64,
    pub bx: f64,
    pub ay: f64,
    pub by: f64,
}

impl GridSpec {
    pub fn build(&self) -> membrane_core::Result<Grid2D> {
        Grid2D::new(self.nx, self.ny, self.ax, self.bx, self.ay, self.by)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub grid: GridSpec,
    pub model: Model,
    pub f_plus: Option<Expression>,
    pub f_minus: Option<Expression>,
    pub g: Option<Expression>,
    pub phi: FieldSource,
    pub z: Option<FieldSource>,
    pub phi_target: Option<Expression>,
    pub eps: f64,
    pub tol: f64,
    pub max_newton: usize,
    pub lambda: Option<f64>,
    pub step0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub max_iters: usize,
    pub stat_tol: f64,
    pub max_backtracks: usize,
    pub spectral_steps: bool,
    pub eps_list: Vec<f64>,
    pub utol: f64,
    pub gtol: f64,
    pub seed: u64,
    pub pairs: usize,
    pub directions: usize,
    pub gradient_instances: usize,
    pub fd_eps: f64,
    pub check_tol: f64,
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "command",
    "nx",
    "ny",
    "ax",
    "bx",
    "ay",
    "by",
    "model",
    "f_plus",
    "f_minus",
    "g",
    "phi",
    "phi_file",
    "z",
    "z_file",
    "phi_target",
    "eps",
    "tol",
    "max_newton",
    "lambda",
    "step0",
    "armijo_c",
    "shrink",
    "max_iters",
    "stat_tol",
    "max_backtracks",
    "spectral_steps",
    "eps_list",
    "utol",
    "gtol",
    "seed",
    "pairs",
    "directions",
    "gradient_instances",
    "fd_eps",
    "check_tol",
    "out",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|e| key_error(key, Some(line), format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.parsed(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(key_error(key, self.raw(key).map(|r| r.0), format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn expression(&self, key: &str) -> Result<Option<Expression>, ConfigError> {
        self.raw(key)
            .map(|(line, v)| Expression::parse(v).map_err(|e| key_error(key, Some(line), e)))
            .transpose()
    }

    fn source(&self, expr_key: &str, file_key: &str) -> Result<Option<FieldSource>, ConfigError> {
        match (self.expression(expr_key)?, self.raw(file_key)) {
            (Some(_), Some((line, _))) => Err(key_error(
                file_key,
                Some(line),
                format!("conflicts with `{expr_key}`; give only one"),
            )),
            (Some(e), None) => Ok(Some(FieldSource::Expr(e))),
            (None, Some((_, path))) => Ok(Some(FieldSource::File(PathBuf::from(path)))),
            (None, None) => Ok(None),
        }
    }
}

fn split_lines(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError {
            line: Some(line),
            key: None,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(key_error(key, Some(line), "unknown key"));
        }
        if value.is_empty() {
            return Err(key_error(key, Some(line), "empty value"));
        }
        if let Some((first, _)) = map.insert(key.to_string(), (line, value.to_string())) {
            return Err(key_error(key, Some(line), format!("duplicate; first given on line {first}")));
        }
    }
    Ok(Entries { map })
}

fn require<T>(v: Option<T>, key: &str, command: Command) -> Result<T, ConfigError> {
    v.ok_or_else(|| key_error(key, None, format!("required for `{}`", command.as_str())))
}

/// Parses `text` for `command`. A `command` entry in the text, if present, must agree.
pub fn parse_config(text: &str, command: Command) -> Result<RunConfig, ConfigError> {
    let e = split_lines(text)?;
    if let Some((line, v)) = e.raw("command") {
        match Command::parse(v) {
            Some(c) if c == command => {}
            Some(c) => {
                return Err(key_error(
                    "command",
                    Some(line),
                    format!("config is for `{}`, invoked as `{}`", c.as_str(), command.as_str()),
                ))
            }
            None => return Err(key_error("command", Some(line), format!("unknown command `{v}`"))),
        }
    }

    let grid = GridSpec {
        nx: e.parsed("nx", 33)?,
        ny: e.parsed("ny", 33)?,
        ax: e.parsed("ax", 0.0)?,
        bx: e.parsed("bx", 1.0)?,
        ay: e.parsed("ay", 0.0)?,
        by: e.parsed("by", 1.0)?,
    };
    if grid.nx < 3 || grid.ny < 3 {
        return Err(key_error(if grid.nx < 3 { "nx" } else { "ny" }, None, "needs at least 3 nodes"));
    }
    if !(grid.bx > grid.ax) || !(grid.by > grid.ay) {
        return Err(key_error(if grid.bx > grid.ax { "by" } else { "bx" }, None, "domain is empty"));
    }

    let model = match e.raw("model") {
        None | Some((_, "two-phase")) => Model::TwoPhase,
        Some((_, "one-phase")) => Model::OnePhase,
        Some((line, v)) => {
            return Err(key_error(
                "model",
                Some(line),
                format!("expected `two-phase` or `one-phase`, got `{v}`"),
            ))
        }
    };

    let eps_list = match e.raw("eps_list") {
        None => Vec::new(),
        Some((line, v)) => {
            let list = v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|err| key_error("eps_list", Some(line), format!("{err}")))?;
            if list.iter().any(|&x| !(x > 0.0)) || list.windows(2).any(|w| w[1] >= w[0]) {
                return Err(key_error("eps_list", Some(line), "must be positive and strictly decreasing"));
            }
            list
        }
    };

    let lambda = match e.raw("lambda") {
        None => None,
        Some(_) => Some(e.positive("lambda", 1.0)?),
    };
    let armijo_c: f64 = e.parsed("armijo_c", 1e-4)?;
    let shrink: f64 = e.parsed("shrink", 0.5)?;
    for (key, v) in [("armijo_c", armijo_c), ("shrink", shrink)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(key_error(key, e.raw(key).map(|r| r.0), format!("must lie in (0, 1), got {v}")));
        }
    }

    let cfg = RunConfig {
        command,
        grid,
        model,
        f_plus: e.expression("f_plus")?,
        f_minus: e.expression("f_minus")?,
        g: e.expression("g")?,
        phi: e
            .source("phi", "phi_file")?
            .unwrap_or_else(|| FieldSource::Expr(Expression::parse("0").expect("constant"))),
        z: e.source("z", "z_file")?,
        phi_target: e.expression("phi_target")?,
        eps: e.positive("eps", 0.01)?,
        tol: e.positive("tol", 1e-10)?,
        max_newton: e.parsed("max_newton", membrane_core::DEFAULT_MAX_NEWTON)?,
        lambda,
        step0: e.positive("step0", 1.0)?,
        armijo_c,
        shrink,
        max_iters: e.parsed("max_iters", 5000)?,
        stat_tol: e.positive("stat_tol", 1e-6)?,
        max_backtracks: e.parsed("max_backtracks", 60)?,
        spectral_steps: e.parsed("spectral_steps", true)?,
        eps_list,
        utol: e.positive("utol", 1e-8)?,
        gtol: e.positive("gtol", 1e-3)?,
        seed: e.parsed("seed", 2024)?,
        pairs: e.parsed("pairs", 100)?,
        directions: e.parsed("directions", 6)?,
        gradient_instances: e.parsed("gradient_instances", 3)?,
        fd_eps: e.positive("fd_eps", 0.1)?,
        check_tol: e.positive("check_tol", 1e-7)?,
        out: e.raw("out").map(|(_, v)| PathBuf::from(v)),
    };

    let needs_data = command != Command::Verify;
    if needs_data {
        require(cfg.f_plus.as_ref(), "f_plus", command)?;
        require(cfg.f_minus.as_ref(), "f_minus", command)?;
        require(cfg.g.as_ref(), "g", command)?;
    }
    match command {
        Command::Optimize | Command::SweepEps => {
            require(cfg.z.as_ref(), "z", command)?;
            require(cfg.lambda, "lambda", command)?;
            if command == Command::SweepEps && cfg.eps_list.is_empty() {
                return Err(key_error("eps_list", None, "required for `sweep-eps`"));
            }
        }
        Command::MakeTarget => {
            require(cfg.phi_target.as_ref(), "phi_target", command)?;
        }
        Command::State | Command::Verify => {}
    }
    if cfg.max_iters == 0 {
        return Err(key_error("max_iters", None, "must be at least 1"));
    }
    Ok(cfg)
}

/// Resolves relative file references against the directory of the config file.
pub fn resolve_paths(cfg: &mut RunConfig, base: &Path) {
    for src in [Some(&mut cfg.phi), cfg.z.as_mut()].into_iter().flatten() {
        if let FieldSource::File(p) = src {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STATE: &str = "# harmonic\nf_plus = 0\nf_minus = 0\ng = x - 0.5\n";

    #[test]
    fn defaults_fill_in() {
        let c = parse_config(STATE, Command::State).unwrap();
        assert_eq!(c.grid.nx, 33);
        assert_eq!(c.eps, 0.01);
        assert_eq!(c.model, Model::TwoPhase);
        assert!(matches!(c.phi, FieldSource::Expr(_)));
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse_config("f_plus = 1\nbogus = 2\n", Command::State).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert_eq!(err.key.as_deref(), Some("bogus"));
    }

    #[test]
    fn missing_lambda_is_named() {
        let err = parse_config(&format!("{STATE}z = 0\n"), Command::Optimize).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("lambda"));
        assert!(err.to_string().contains("optimize"));
    }

    #[test]
    fn bad_expression_is_rejected() {
        let err = parse_config("f_plus = 1 +\n", Command::State).unwrap_err();
        assert_eq!((err.line, err.key.as_deref()), (Some(1), Some("f_plus")));
        let err = parse_config("g = x + t\n", Command::State).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("g"));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn expression_matches_hand_values() {
        let e = Expression::parse("1 + 0.5*sin(3.14159*x)").unwrap();
        for x in [0.0, 0.25, 0.5] {
            assert!((e.eval(x, 0.3) - (1.0 + 0.5 * (3.14159 * x).sin())).abs() < 1e-15);
        }
        let e = Expression::parse("max(x, y)^2 - abs(min(x, -y)) / exp(0)").unwrap();
        assert_eq!(e.eval(0.5, -2.0), 0.25 - 0.5);
    }

    #[test]
    fn command_entry_must_agree() {
        assert!(parse_config(&format!("command = state\n{STATE}"), Command::State).is_ok());
        let err = parse_config(&format!("command = verify\n{STATE}"), Command::State).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("command"));
    }

    #[test]
    fn duplicate_and_conflicting_keys() {
        assert_eq!(parse_config("eps = 1\neps = 2\n", Command::Verify).unwrap_err().line, Some(2));
        let err = parse_config(&format!("{STATE}z = 0\nz_file = z.csv\nlambda = 1\n"), Command::Optimize).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("z_file"));
    }

    #[test]
    fn eps_list_must_decrease() {
        let base = format!("{STATE}z = 0\nlambda = 1\n");
        let c = parse_config(&format!("{base}eps_list = 0.2, 0.1,0.05\n"), Command::SweepEps).unwrap();
        assert_eq!(c.eps_list, vec![0.2, 0.1, 0.05]);
        assert!(parse_config(&format!("{base}eps_list = 0.1, 0.2\n"), Command::SweepEps).is_err());
    }

    #[test]
    fn non_positive_numbers_are_rejected() {
        for text in ["eps = 0", "tol = -1", "lambda = 0", "shrink = 1"] {
            assert!(parse_config(text, Command::Verify).is_err(), "{text}");
        }
    }
}
