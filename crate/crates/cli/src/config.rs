//! Experiment configuration: JSON schema, defaults and load-time validation.
//!
//! Every validation error carries the line and column of the offending key
//! in the original file.

use std::fmt;
use std::path::{Path, PathBuf};

use insider_core::{
    BrownianPath, Coefficient, Kernel, MarketModel, Perturbation, Strategy, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "T0")]
    pub insider_horizon: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub r: Coefficient,
    pub b: Coefficient,
    pub sigma: Coefficient,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Ramp,
    Array {
        values: Vec<f64>,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Drift,
    Nodes {
        values: Vec<f64>,
    },
}

impl ShapeSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ShapeSpec::Constant { .. } => "constant",
            ShapeSpec::Drift => "drift",
            ShapeSpec::Nodes { .. } => "nodes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Merton,
    InsiderOptimal,
    InsiderCorollary,
    Constant {
        value: f64,
    },
    Table {
        values: Vec<f64>,
    },
    Perturbed {
        base: Box<StrategySpec>,
        shape: ShapeSpec,
        eps: f64,
    },
}

impl StrategySpec {
    pub fn label(&self) -> &'static str {
        match self {
            StrategySpec::Merton => "merton",
            StrategySpec::InsiderOptimal | StrategySpec::InsiderCorollary => "insider",
            StrategySpec::Constant { .. } => "constant",
            StrategySpec::Table { .. } => "table",
            StrategySpec::Perturbed { .. } => "perturbed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// `φ(t) = B(t)`.
    Brownian,
    /// `φ(t) = B(T0)`.
    TerminalBrownian,
    /// `φ = π* σ` for the configured kernel.
    Insider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Exponential,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSpec {
    #[default]
    Information,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub first: StrategySpec,
    pub second: StrategySpec,
}

impl Default for CompareSpec {
    fn default() -> Self {
        Self {
            first: StrategySpec::Merton,
            second: StrategySpec::InsiderOptimal,
        }
    }
}

fn default_shapes() -> Vec<ShapeSpec> {
    vec![ShapeSpec::Constant { value: 1.0 }, ShapeSpec::Drift]
}

fn default_eps() -> Vec<f64> {
    vec![-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default = "default_shapes")]
    pub shapes: Vec<ShapeSpec>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            shapes: default_shapes(),
            eps: default_eps(),
        }
    }
}

/// The file as written. Sections not used by a command are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrand: Option<Integrand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    pub n_reps: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub n_reps: Option<usize>,
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}",
            self.file.display(),
            self.line,
            self.column,
            self.message
        )
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line and column of the key reached by following `keys` through
/// the text, each key searched after the previous one. Falls back to the
/// deepest key found, then to the start of the file.
pub fn locate(text: &str, keys: &[&str]) -> (usize, usize) {
    let mut from = 0;
    let mut found = None;
    for key in keys {
        match find_key(text, from, key) {
            Some(pos) => {
                found = Some(pos);
                from = pos + key.len() + 2;
            }
            None => break,
        }
    }
    position(text, found.unwrap_or(0))
}

fn find_key(text: &str, from: usize, key: &str) -> Option<usize> {
    let pattern = format!("\"{key}\"");
    let mut start = from;
    while let Some(i) = text[start..].find(&pattern) {
        let pos = start + i;
        let rest = text[pos + pattern.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(pos);
        }
        start = pos + pattern.len();
    }
    None
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// A validated configuration with its library objects built.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// Config after overrides and defaults, without the output path.
    pub resolved: ExperimentConfig,
    pub output: Option<PathBuf>,
    pub grid: TimeGrid,
    pub market: Option<MarketModel>,
    pub kernel: Kernel,
}

struct Validator<'a> {
    file: &'a Path,
    text: &'a str,
}

impl Validator<'_> {
    fn error(&self, keys: &[&str], message: impl Into<String>) -> ConfigError {
        let (line, column) = locate(self.text, keys);
        ConfigError {
            file: self.file.to_path_buf(),
            line,
            column,
            message: format!("{}: {}", keys.join("."), message.into()),
        }
    }
}

pub fn load(
    file: &Path,
    command: Command,
    overrides: Overrides,
) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(file).map_err(|e| ConfigError {
        file: file.to_path_buf(),
        line: 0,
        column: 0,
        message: format!("cannot read config: {e}"),
    })?;
    parse(file, &text, command, overrides)
}

pub fn parse(
    file: &Path,
    text: &str,
    command: Command,
    overrides: Overrides,
) -> Result<Experiment, ConfigError> {
    let mut config: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError {
        file: file.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let v = Validator { file, text };

    if let Some(n) = overrides.n_reps {
        config.n_reps = n;
    }
    if let Some(s) = overrides.master_seed {
        config.master_seed = s;
    }
    if config.n_reps < 2 {
        let source = if overrides.n_reps.is_some() {
            " (from --reps)"
        } else {
            ""
        };
        return Err(v.error(
            &["n_reps"],
            format!("must be at least 2, got {}{source}", config.n_reps),
        ));
    }

    let g = &config.grid;
    if !(g.horizon.is_finite() && g.horizon > 0.0) {
        return Err(v.error(
            &["grid", "T"],
            format!("must be positive, got {}", g.horizon),
        ));
    }
    if !(g.insider_horizon.is_finite() && g.insider_horizon > g.horizon) {
        return Err(v.error(
            &["grid", "T0"],
            format!("must exceed T = {}, got {}", g.horizon, g.insider_horizon),
        ));
    }
    let grid = TimeGrid::new(g.horizon, g.insider_horizon, g.n_steps)
        .map_err(|e| v.error(&["grid", "n_steps"], e.to_string()))?;

    let market = match &config.market {
        Some(m) => Some(
            MarketModel::new(&grid, m.r.clone(), m.b.clone(), m.sigma.clone()).map_err(|e| {
                let msg = e.to_string();
                let detail = msg.trim_start_matches("invalid market: ");
                let key = ["sigma", "r", "b"]
                    .into_iter()
                    .find(|k| detail.starts_with(&format!("{k} ")))
                    .unwrap_or("market");
                v.error(&["market", key], detail)
            })?,
        ),
        None => None,
    };

    let kernel_spec = config
        .kernel
        .get_or_insert_with(KernelSpec::default)
        .clone();
    let kernel =
        build_kernel(&grid, &kernel_spec).map_err(|e| v.error(&["kernel"], e.to_string()))?;

    let need_market = |what: &str| v.error(&["grid"], format!("{what} needs a \"market\" section"));
    match command {
        Command::Simulate => {
            let market = market.as_ref().ok_or_else(|| need_market("simulate"))?;
            let spec = config
                .strategy
                .as_ref()
                .ok_or_else(|| v.error(&["grid"], "simulate needs a \"strategy\" section"))?;
            check_strategy(&v, &["strategy"], spec, market, &kernel)?;
            config.scheme.get_or_insert_with(Scheme::default);
        }
        Command::Compare => {
            let market = market.as_ref().ok_or_else(|| need_market("compare"))?;
            let cmp = config.compare.get_or_insert_with(CompareSpec::default);
            check_strategy(&v, &["compare", "first"], &cmp.first, market, &kernel)?;
            check_strategy(&v, &["compare", "second"], &cmp.second, market, &kernel)?;
        }
        Command::VerifyDuality => {
            let integrand = config.integrand.ok_or_else(|| {
                v.error(
                    &["grid"],
                    "verify-duality needs \"integrand\": brownian, terminal_brownian or insider",
                )
            })?;
            if integrand == Integrand::Insider && market.is_none() {
                return Err(v.error(
                    &["integrand"],
                    "the insider integrand needs a \"market\" section",
                ));
            }
        }
        Command::VerifyDecomposition => {
            config.drift.get_or_insert_with(DriftSpec::default);
        }
        Command::Scan => {
            let market = market.as_ref().ok_or_else(|| need_market("scan"))?;
            let base = config
                .strategy
                .get_or_insert(StrategySpec::InsiderOptimal)
                .clone();
            check_strategy(&v, &["strategy"], &base, market, &kernel)?;
            let scan = config.scan.get_or_insert_with(ScanSpec::default);
            if scan.shapes.is_empty() {
                return Err(v.error(&["scan", "shapes"], "needs at least one shape"));
            }
            for shape in &scan.shapes {
                let s = build_strategy(
                    &StrategySpec::Perturbed {
                        base: Box::new(base.clone()),
                        shape: shape.clone(),
                        eps: 1.0,
                    },
                    market,
                    &kernel,
                );
                dry_run(&s, market).map_err(|e| v.error(&["scan", "shapes"], e))?;
            }
            if scan.eps.iter().any(|e| !e.is_finite()) {
                return Err(v.error(&["scan", "eps"], "values must be finite"));
            }
            if !scan.eps.contains(&0.0) {
                return Err(v.error(&["scan", "eps"], "must contain 0"));
            }
            if !scan.eps.iter().any(|e| *e > 0.0 && scan.eps.contains(&-*e)) {
                return Err(v.error(&["scan", "eps"], "needs a symmetric pair ±h"));
            }
        }
    }

    let output = config.output.take();
    Ok(Experiment {
        resolved: config,
        output,
        grid,
        market,
        kernel,
    })
}

pub fn build_kernel(grid: &TimeGrid, spec: &KernelSpec) -> insider_core::Result<Kernel> {
    match spec {
        KernelSpec::Constant { value } => Kernel::constant(grid, *value),
        KernelSpec::Ramp => Kernel::ramp(grid),
        KernelSpec::Array { values } => Kernel::from_values(grid, values.clone()),
    }
}

pub fn build_shape(spec: &ShapeSpec, kernel: &Kernel) -> Perturbation {
    match spec {
        ShapeSpec::Constant { value } => Perturbation::Constant(*value),
        ShapeSpec::Drift => Perturbation::DriftDirection(kernel.clone()),
        ShapeSpec::Nodes { values } => Perturbation::Nodes(values.clone()),
    }
}

pub fn build_strategy(spec: &StrategySpec, market: &MarketModel, kernel: &Kernel) -> Strategy {
    match spec {
        StrategySpec::Merton => Strategy::Merton,
        StrategySpec::InsiderOptimal => Strategy::InsiderOptimal(kernel.clone()),
        StrategySpec::InsiderCorollary => Strategy::InsiderCorollary,
        StrategySpec::Constant { value } => Strategy::constant(market, *value),
        StrategySpec::Table { values } => Strategy::Table(values.clone()),
        StrategySpec::Perturbed { base, shape, eps } => Strategy::perturb(
            build_strategy(base, market, kernel),
            build_shape(shape, kernel),
            *eps,
        ),
    }
}

/// Evaluates the strategy on the zero path to catch shape errors early.
fn dry_run(strategy: &Strategy, market: &MarketModel) -> Result<(), String> {
    let grid = market.grid();
    let zero = BrownianPath::from_values(grid, vec![0.0; grid.n_steps() + 1])
        .map_err(|e| e.to_string())?;
    let pi = strategy.sample(market, &zero).map_err(|e| e.to_string())?;
    match pi.samples().iter().position(|p| !p.is_finite()) {
        Some(k) => Err(format!("fraction is not finite at node {k}")),
        None => Ok(()),
    }
}

fn check_strategy(
    v: &Validator<'_>,
    keys: &[&str],
    spec: &StrategySpec,
    market: &MarketModel,
    kernel: &Kernel,
) -> Result<(), ConfigError> {
    if let StrategySpec::Perturbed { eps, .. } = spec {
        if !eps.is_finite() {
            let mut k = keys.to_vec();
            k.push("eps");
            return Err(v.error(&k, "must be finite"));
        }
    }
    let strategy = build_strategy(spec, market, kernel);
    dry_run(&strategy, market).map_err(|e| {
        let mut k = keys.to_vec();
        if matches!(spec, StrategySpec::Table { .. }) {
            k.push("values");
        }
        v.error(&k, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
  "grid": {"T": 1.0, "T0": 2.0, "n_steps": 64},
  "market": {"r": 0.03, "b": 0.07, "sigma": 0.2},
  "strategy": {"kind": "merton"},
  "n_reps": 10,
  "master_seed": 1
}"#;

    fn parse_str(text: &str, command: Command) -> Result<Experiment, ConfigError> {
        parse(Path::new("c.json"), text, command, Overrides::default())
    }

    #[test]
    fn locate_follows_nesting() {
        let text = "{\n  \"a\": {\"T\": 1},\n  \"grid\": {\n    \"T\": 3\n  }\n}";
        assert_eq!(locate(text, &["grid", "T"]), (4, 5));
        assert_eq!(locate(text, &["grid"]), (3, 3));
        assert_eq!(locate(text, &["missing"]), (1, 1));
    }

    #[test]
    fn key_inside_string_value_is_skipped() {
        let text = "{\"kind\": \"T\",\n \"T\": 2}";
        assert_eq!(locate(text, &["T"]), (2, 2));
    }

    #[test]
    fn valid_config_resolves_defaults() {
        let e = parse_str(BASE, Command::Simulate).unwrap();
        assert_eq!(e.resolved.scheme, Some(Scheme::Exponential));
        assert_eq!(e.resolved.kernel, Some(KernelSpec::Constant { value: 1.0 }));
        assert_eq!(e.grid.n_steps(), 64);
    }

    #[test]
    fn bad_horizon_points_at_key() {
        let text = BASE.replace("\"T0\": 2.0", "\"T0\": 0.5");
        let err = parse_str(&text, Command::Simulate).unwrap_err();
        assert_eq!((err.line, err.column), (2, 22));
        assert!(err.message.starts_with("grid.T0"), "{}", err.message);
    }

    #[test]
    fn bad_sigma_points_at_key() {
        let text = BASE.replace("\"sigma\": 0.2", "\"sigma\": 0.0");
        let err = parse_str(&text, Command::Compare).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.starts_with("market.sigma"), "{}", err.message);
    }

    #[test]
    fn syntax_and_unknown_fields_report_position() {
        let text = BASE.replace("\"n_reps\"", "\"n_rep\"");
        let err = parse_str(&text, Command::Simulate).unwrap_err();
        assert_eq!(err.line, 5);
        let err = parse_str("{\n  \"grid\": {,}\n}", Command::Simulate).unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn table_length_checked() {
        let text = BASE.replace(
            r#"{"kind": "merton"}"#,
            r#"{"kind": "table", "values": [0.5, 0.5]}"#,
        );
        let err = parse_str(&text, Command::Simulate).unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("strategy.values"));
    }

    #[test]
    fn scan_eps_needs_pair() {
        let text = BASE.replace(
            "\"n_reps\"",
            "\"scan\": {\"eps\": [0.0, 0.1]},\n  \"n_reps\"",
        );
        let err = parse_str(&text, Command::Scan).unwrap_err();
        assert_eq!(err.line, 5);
        assert!(err.message.contains("symmetric"));
    }

    #[test]
    fn overrides_apply() {
        let e = parse(
            Path::new("c.json"),
            BASE,
            Command::Simulate,
            Overrides {
                n_reps: Some(7),
                master_seed: Some(99),
            },
        )
        .unwrap();
        assert_eq!((e.resolved.n_reps, e.resolved.master_seed), (7, 99));
        let err = parse(
            Path::new("c.json"),
            BASE,
            Command::Simulate,
            Overrides {
                n_reps: Some(1),
                master_seed: None,
            },
        )
        .unwrap_err();
        assert!(err.message.contains("--reps"));
    }

    #[test]
    fn missing_sections_are_reported() {
        let text = BASE.replace("  \"strategy\": {\"kind\": \"merton\"},\n", "");
        assert!(parse_str(&text, Command::Simulate).is_err());
        assert!(parse_str(&text, Command::Compare).is_ok());
        assert!(parse_str(&text, Command::VerifyDuality).is_err());
    }
}
