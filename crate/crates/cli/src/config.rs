//! Experiment configuration: TOML schema, defaults, and validation.
//!
//! Validation is structural (no graph is built): every out-of-range value
//! is reported with the offending field's name so a config can be fixed in
//! one pass.

use std::path::PathBuf;

use leadsel_core::graph::GraphSpec;
use leadsel_core::noise_corrupted::IpmOptions;
use leadsel_core::noise_free::AdmmOptions;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// The config format this binary reads.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    NoiseCorrupted,
    NoiseFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    Swap,
    CrLower,
    Degree,
    Exhaustive,
    MonteCarlo,
}

impl Method {
    /// Methods that produce a concrete leader set (and hence an upper
    /// bound / a selection the Monte Carlo check can simulate).
    pub fn yields_selection(self) -> bool {
        matches!(self, Method::Greedy | Method::Swap | Method::Degree | Method::Exhaustive)
    }
}

/// Feedback-gain specification (noise-corrupted formulation only).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaSpec {
    Uniform { uniform: f64 },
    PerNode { per_node: Vec<f64> },
}

impl KappaSpec {
    pub fn resolve(&self, n: usize) -> Vec<f64> {
        match self {
            KappaSpec::Uniform { uniform } => vec![*uniform; n],
            KappaSpec::PerNode { per_node } => per_node.clone(),
        }
    }
}

/// Partial `[ipm]` table: unset fields keep the solver defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpmOverrides {
    pub tau0: Option<f64>,
    pub tau_growth: Option<f64>,
    pub gap_tol: Option<f64>,
    pub newton_tol: Option<f64>,
    pub max_newton: Option<usize>,
    pub armijo_alpha: Option<f64>,
    pub backtrack_beta: Option<f64>,
}

impl IpmOverrides {
    pub fn apply(&self) -> IpmOptions {
        let mut o = IpmOptions::default();
        if let Some(v) = self.tau0 {
            o.tau0 = v;
        }
        if let Some(v) = self.tau_growth {
            o.tau_growth = v;
        }
        if let Some(v) = self.gap_tol {
            o.gap_tol = v;
        }
        if let Some(v) = self.newton_tol {
            o.newton_tol = v;
        }
        if let Some(v) = self.max_newton {
            o.max_newton = v;
        }
        if let Some(v) = self.armijo_alpha {
            o.armijo_alpha = v;
        }
        if let Some(v) = self.backtrack_beta {
            o.backtrack_beta = v;
        }
        o
    }
}

/// Partial `[admm]` table: unset fields keep the solver defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmOverrides {
    pub outer_eps_per_node: Option<f64>,
    pub inner_eps: Option<f64>,
    pub kkt_eps: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub rho0: Option<f64>,
    pub armijo_alpha: Option<f64>,
    pub backtrack_beta: Option<f64>,
}

impl AdmmOverrides {
    pub fn apply(&self) -> AdmmOptions {
        let mut o = AdmmOptions::default();
        if let Some(v) = self.outer_eps_per_node {
            o.outer_eps_per_node = v;
        }
        if let Some(v) = self.inner_eps {
            o.inner_eps = v;
        }
        if let Some(v) = self.kkt_eps {
            o.kkt_eps = v;
        }
        if let Some(v) = self.max_outer {
            o.max_outer = v;
        }
        if let Some(v) = self.max_inner {
            o.max_inner = v;
        }
        if let Some(v) = self.rho0 {
            o.rho0 = v;
        }
        if let Some(v) = self.armijo_alpha {
            o.armijo_alpha = v;
        }
        if let Some(v) = self.backtrack_beta {
            o.backtrack_beta = v;
        }
        o
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig { horizon: 400.0, dt: 0.01, paths: 64, seed: 0 }
    }
}

fn default_format() -> String {
    "csv".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// CSV path, relative to `--out`. The JSON sidecar lands next to it
    /// with the extension swapped to `.json`.
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub format_version: u32,
    pub graph: GraphSpec,
    pub formulation: Formulation,
    #[serde(default)]
    pub kappa: Option<KappaSpec>,
    pub nl_values: Vec<usize>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub ipm: IpmOverrides,
    #[serde(default)]
    pub admm: AdmmOverrides,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Node count implied by the graph spec, without building the graph.
    pub fn node_count(&self) -> usize {
        match self.graph {
            GraphSpec::Lattice { rows, cols } => rows * cols,
            GraphSpec::RandomGeometric { n, .. }
            | GraphSpec::CShape { n, .. }
            | GraphSpec::Explicit { n, .. } => n,
        }
    }

    /// Structural validation; collects every problem, naming the field.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errors: Vec<String> = Vec::new();

        if self.format_version != FORMAT_VERSION {
            errors.push(format!(
                "format_version: expected {FORMAT_VERSION}, got {}",
                self.format_version
            ));
        }

        match self.graph {
            GraphSpec::Lattice { rows, cols } => {
                if rows * cols < 2 {
                    errors.push(format!(
                        "graph.rows/graph.cols: lattice needs at least 2 nodes, got {rows}x{cols}"
                    ));
                }
            }
            GraphSpec::RandomGeometric { n, radius, .. }
            | GraphSpec::CShape { n, radius, .. } => {
                if n < 2 {
                    errors.push(format!("graph.n: need at least 2 nodes, got {n}"));
                }
                if !(radius > 0.0) {
                    errors.push(format!("graph.radius: must be positive, got {radius}"));
                }
            }
            GraphSpec::Explicit { n, ref edges } => {
                if n < 2 {
                    errors.push(format!("graph.n: need at least 2 nodes, got {n}"));
                }
                if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= n || v >= n) {
                    errors.push(format!("graph.edges: endpoint ({u},{v}) out of range for n={n}"));
                }
            }
        }

        let n = self.node_count();
        if self.nl_values.is_empty() {
            errors.push("nl_values: must be nonempty".into());
        }
        for (i, &nl) in self.nl_values.iter().enumerate() {
            if nl == 0 || nl >= n.max(1) {
                errors.push(format!(
                    "nl_values[{i}]: {nl} outside [1, {}] for n={n}",
                    n.saturating_sub(1)
                ));
            }
        }

        match (&self.kappa, self.formulation) {
            (Some(_), Formulation::NoiseFree) => {
                errors.push(
                    "kappa: gains are undefined in the noise-free formulation (leaders are pinned exactly); remove the [kappa] table"
                        .into(),
                );
            }
            (Some(KappaSpec::Uniform { uniform }), _) => {
                if !(*uniform > 0.0) {
                    errors.push(format!("kappa.uniform: must be positive, got {uniform}"));
                }
            }
            (Some(KappaSpec::PerNode { per_node }), _) => {
                if per_node.len() != n {
                    errors.push(format!(
                        "kappa.per_node: length {} does not match n={n}",
                        per_node.len()
                    ));
                }
                for (i, &k) in per_node.iter().enumerate() {
                    if !(k > 0.0) {
                        errors.push(format!("kappa.per_node[{i}]: must be positive, got {k}"));
                    }
                }
            }
            (None, _) => {}
        }

        if self.methods.is_empty() {
            errors.push("methods: must be nonempty".into());
        }
        if self.methods.contains(&Method::MonteCarlo) {
            if self.formulation == Formulation::NoiseFree {
                errors.push(
                    "methods: monte_carlo simulates the noisy-leader dynamics and requires formulation = \"noise_corrupted\""
                        .into(),
                );
            }
            if !self.methods.iter().any(|m| m.yields_selection()) {
                errors.push(
                    "methods: monte_carlo needs a selection to simulate; add greedy, swap, degree, or exhaustive"
                        .into(),
                );
            }
        }

        for (name, v) in [
            ("ipm.tau0", self.ipm.tau0),
            ("ipm.tau_growth", self.ipm.tau_growth),
            ("ipm.gap_tol", self.ipm.gap_tol),
            ("ipm.newton_tol", self.ipm.newton_tol),
            ("admm.outer_eps_per_node", self.admm.outer_eps_per_node),
            ("admm.inner_eps", self.admm.inner_eps),
            ("admm.kkt_eps", self.admm.kkt_eps),
            ("admm.rho0", self.admm.rho0),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    errors.push(format!("{name}: must be positive, got {v}"));
                }
            }
        }
        if self.ipm.tau_growth.is_some_and(|v| v <= 1.0) {
            errors.push("ipm.tau_growth: must exceed 1".into());
        }
        for (name, v) in [
            ("ipm.max_newton", self.ipm.max_newton),
            ("admm.max_outer", self.admm.max_outer),
            ("admm.max_inner", self.admm.max_inner),
        ] {
            if v == Some(0) {
                errors.push(format!("{name}: must be at least 1"));
            }
        }
        for (name, v) in [
            ("ipm.armijo_alpha", self.ipm.armijo_alpha),
            ("admm.armijo_alpha", self.admm.armijo_alpha),
        ] {
            if v.is_some_and(|v| !(v > 0.0 && v < 0.5)) {
                errors.push(format!("{name}: must lie in (0, 0.5)"));
            }
        }
        for (name, v) in [
            ("ipm.backtrack_beta", self.ipm.backtrack_beta),
            ("admm.backtrack_beta", self.admm.backtrack_beta),
        ] {
            if v.is_some_and(|v| !(v > 0.0 && v < 1.0)) {
                errors.push(format!("{name}: must lie in (0, 1)"));
            }
        }

        if self.methods.contains(&Method::MonteCarlo) {
            if !(self.monte_carlo.horizon > 0.0) {
                errors.push(format!(
                    "monte_carlo.horizon: must be positive, got {}",
                    self.monte_carlo.horizon
                ));
            }
            if !(self.monte_carlo.dt > 0.0) {
                errors.push(format!(
                    "monte_carlo.dt: must be positive, got {}",
                    self.monte_carlo.dt
                ));
            }
            if self.monte_carlo.paths == 0 {
                errors.push("monte_carlo.paths: must be at least 1".into());
            }
        }

        if self.output.format != "csv" {
            errors.push(format!(
                "output.format: only \"csv\" is supported, got \"{}\"",
                self.output.format
            ));
        }
        if self.output.path.as_os_str().is_empty() {
            errors.push("output.path: must not be empty".into());
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errors.join("\n")))
        }
    }

    /// Gains for the noise-corrupted run (default: uniform 1).
    pub fn resolve_kappa(&self, n: usize) -> Vec<f64> {
        match &self.kappa {
            Some(spec) => spec.resolve(n),
            None => vec![1.0; n],
        }
    }

    /// N_l sweep in execution order: ascending, duplicates dropped.
    pub fn nl_sweep(&self) -> Vec<usize> {
        let mut v = self.nl_values.clone();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
format_version = 1
formulation = "noise_corrupted"
nl_values = [2, 1]
methods = ["greedy", "swap", "cr_lower"]

[graph]
family = "lattice"
rows = 3
cols = 3

[kappa]
uniform = 1.0

[output]
path = "bounds.csv"
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.node_count(), 9);
        assert_eq!(cfg.nl_sweep(), vec![1, 2]);
        assert_eq!(cfg.resolve_kappa(9), vec![1.0; 9]);
        assert_eq!(cfg.output.format, "csv");
    }

    #[test]
    fn partial_solver_tables_overlay_defaults() {
        let text = GOOD.replace("[kappa]\nuniform = 1.0", "[ipm]\ngap_tol = 1e-8");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        cfg.validate().unwrap();
        let opts = cfg.ipm.apply();
        assert_eq!(opts.gap_tol, 1e-8);
        assert_eq!(opts.tau0, IpmOptions::default().tau0);
    }

    #[test]
    fn rejects_named_fields() {
        let cases: Vec<(String, &str)> = vec![
            (GOOD.replace("format_version = 1", "format_version = 3"), "format_version"),
            (GOOD.replace("nl_values = [2, 1]", "nl_values = [0]"), "nl_values[0]"),
            (GOOD.replace("nl_values = [2, 1]", "nl_values = [9]"), "nl_values[0]"),
            (GOOD.replace("nl_values = [2, 1]", "nl_values = []"), "nl_values"),
            (GOOD.replace("uniform = 1.0", "uniform = -2.0"), "kappa.uniform"),
            (
                GOOD.replace("uniform = 1.0", "per_node = [1.0, 2.0]"),
                "kappa.per_node",
            ),
            (GOOD.replace("rows = 3", "rows = 0").replace("cols = 3", "cols = 1"), "graph.rows"),
            (
                GOOD.replace("methods = [\"greedy\", \"swap\", \"cr_lower\"]", "methods = []"),
                "methods",
            ),
            (GOOD.replace("path = \"bounds.csv\"", "path = \"b.csv\"\nformat = \"xml\""), "output.format"),
        ];
        for (text, needle) in cases {
            let cfg = ExperimentConfig::parse(&text).unwrap();
            let err = cfg.validate().unwrap_err().to_string();
            assert!(err.contains(needle), "error {err:?} should name {needle}");
        }
    }

    #[test]
    fn kappa_with_noise_free_is_rejected() {
        let text = GOOD.replace("noise_corrupted", "noise_free");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("kappa"));
    }

    #[test]
    fn monte_carlo_constraints() {
        let nf = GOOD
            .replace("noise_corrupted", "noise_free")
            .replace("[kappa]\nuniform = 1.0", "")
            .replace(
                "methods = [\"greedy\", \"swap\", \"cr_lower\"]",
                "methods = [\"greedy\", \"monte_carlo\"]",
            );
        let err = ExperimentConfig::parse(&nf).unwrap().validate().unwrap_err().to_string();
        assert!(err.contains("monte_carlo"));

        let lonely = GOOD.replace(
            "methods = [\"greedy\", \"swap\", \"cr_lower\"]",
            "methods = [\"monte_carlo\"]",
        );
        let err = ExperimentConfig::parse(&lonely).unwrap().validate().unwrap_err().to_string();
        assert!(err.contains("selection"));
    }

    #[test]
    fn unknown_keys_and_methods_fail_parse() {
        assert!(ExperimentConfig::parse(&format!("{GOOD}\nbogus_key = 1")).is_err());
        let bad = GOOD.replace("\"greedy\"", "\"anneal\"");
        let msg = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("anneal") || msg.contains("unknown variant"), "{msg}");
    }

    #[test]
    fn explicit_graph_edge_range_checked() {
        let text = GOOD.replace(
            "family = \"lattice\"\nrows = 3\ncols = 3",
            "family = \"explicit\"\nn = 3\nedges = [[0, 5]]",
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("graph.edges"));
    }
}
