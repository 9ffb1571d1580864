//! Experiment configuration.
//!
//! Values are resolved in three layers: built-in defaults, then a JSON or
//! TOML file (`--config`), then command-line flags. Every section and field
//! is optional in the file.
//!
//! | key                        | default          |
//! |----------------------------|------------------|
//! | `model.lambda`             | 6                |
//! | `model.offspring`          | [0.5, 0, 0.5]    |
//! | `grid.length`              | 40               |
//! | `grid.dx`                  | 0.02             |
//! | `sim.dt`                   | 0.001            |
//! | `sim.horizon`              | 200              |
//! | `sim.n_reps`               | 10000            |
//! | `sim.max_particles`        | 1000000          |
//! | `sim.max_events`           | 100000000        |
//! | `sim.bridge_correction`    | true             |
//! | `sim.seed`                 | 0                |
//! | `sim.threads`              | all cores        |
//! | `pde.scheme`               | "crank-nicolson" |
//! | `pde.dt`                   | 0.01             |
//! | `pde.steady_tol`           | 1e-8             |
//! | `pde.t_max`                | 3000             |
//! | `pde.times`                | [] (steady state)|
//! | `ode.tol`                  | 1e-4             |
//! | `ode.target`               | 1                |
//! | `compare.mc_sigmas`        | 3                |
//! | `compare.pde_tol`          | 5e-3             |
//! | `compare.ode_tol`          | 1e-3             |
//! | `query_points`             | [0.5, 1, 2, 4]   |
//! | `format`                   | "csv"            |

use std::path::{Path, PathBuf};

use bbmlab::bbm::{DEFAULT_MAX_EVENTS, DEFAULT_MAX_PARTICLES};
use bbmlab::pde::{Grid1D, Scheme};
use bbmlab::OffspringPolynomial;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub lambda: f64,
    pub offspring: Vec<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            lambda: 6.0,
            offspring: vec![0.5, 0.0, 0.5],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub length: f64,
    pub dx: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            length: 40.0,
            dx: 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: Option<f64>,
    pub n_reps: usize,
    pub max_particles: usize,
    pub max_events: u64,
    pub bridge_correction: bool,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: Some(200.0),
            n_reps: 10_000,
            max_particles: DEFAULT_MAX_PARTICLES,
            max_events: DEFAULT_MAX_EVENTS,
            bridge_correction: true,
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Explicit,
    CrankNicolson,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::Explicit => Scheme::ExplicitEuler,
            SchemeName::CrankNicolson => Scheme::SemiImplicitCN,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    pub scheme: SchemeName,
    pub dt: f64,
    pub steady_tol: f64,
    pub t_max: f64,
    pub times: Vec<f64>,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            scheme: SchemeName::CrankNicolson,
            dt: 0.01,
            steady_tol: 1e-8,
            t_max: 3000.0,
            times: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSection {
    pub tol: f64,
    pub target: f64,
}

impl Default for OdeSection {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            target: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Monte Carlo agreement in standard errors.
    pub mc_sigmas: f64,
    /// PDE against the closed form, and r-type against s-type.
    pub pde_tol: f64,
    /// Shooting profile against the PDE steady state.
    pub ode_tol: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            mc_sigmas: 3.0,
            pde_tol: 5e-3,
            ode_tol: 1e-3,
        }
    }
}

/// A query location, optionally with a time. Accepts `1.0`, `[1.0, 50.0]`
/// or `{ x = 1.0, t = 50.0 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "QueryPointRepr")]
pub struct QueryPoint {
    pub x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum QueryPointRepr {
    X(f64),
    Pair(f64, f64),
    Table { x: f64, t: Option<f64> },
}

impl From<QueryPointRepr> for QueryPoint {
    fn from(r: QueryPointRepr) -> Self {
        match r {
            QueryPointRepr::X(x) => QueryPoint { x, t: None },
            QueryPointRepr::Pair(x, t) => QueryPoint { x, t: Some(t) },
            QueryPointRepr::Table { x, t } => QueryPoint { x, t },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub sim: SimSection,
    pub pde: PdeSection,
    pub ode: OdeSection,
    pub compare: CompareSection,
    pub query_points: Vec<QueryPoint>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSection::default(),
            grid: GridSection::default(),
            sim: SimSection::default(),
            pde: PdeSection::default(),
            ode: OdeSection::default(),
            compare: CompareSection::default(),
            query_points: [0.5, 1.0, 2.0, 4.0]
                .map(|x| QueryPoint { x, t: None })
                .to_vec(),
            output_path: None,
            format: Format::Csv,
        }
    }
}

impl ExperimentConfig {
    /// Reads a config file; `.toml` files are parsed as TOML, anything else
    /// as JSON.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
        }
    }

    pub fn offspring(&self) -> Result<OffspringPolynomial, CliError> {
        OffspringPolynomial::new(self.model.offspring.clone())
            .map_err(|e| CliError::Input(format!("invalid offspring law: {e}")))
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        let l = self.model.lambda;
        if l > 0.0 && l.is_finite() {
            Ok(l)
        } else {
            Err(CliError::Input(format!("model.lambda = {l} must be > 0")))
        }
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Grid1D::with_spacing(self.grid.length, self.grid.dx)
            .map_err(|e| CliError::Input(e.to_string()))
    }

    /// Query points must lie in `[0, L]`.
    pub fn check_query_points(&self) -> Result<(), CliError> {
        for q in &self.query_points {
            if !(0.0..=self.grid.length).contains(&q.x) {
                return Err(CliError::Input(format!(
                    "query point x = {} lies outside [0, {}]",
                    q.x, self.grid.length
                )));
            }
            if let Some(t) = q.t {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(CliError::Input(format!("query time t = {t} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over every field that can change the numbers. Thread count and
    /// output destination are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.sim.threads = None;
        c.output_path = None;
        c.format = Format::Csv;
        let canonical = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Whether the offspring law is the binary one with a closed-form answer.
    pub fn is_binary(&self) -> bool {
        let c = &self.model.offspring;
        let at = |i: usize| c.get(i).copied().unwrap_or(0.0);
        (at(0) - 0.5).abs() < 1e-12
            && at(1).abs() < 1e-12
            && (at(2) - 0.5).abs() < 1e-12
            && c.iter().skip(3).all(|&a| a == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_fill_from_defaults() {
        let c: ExperimentConfig = toml::from_str(
            "query_points = [1.0, [2.0, 50.0], { x = 3.0 }]\n[model]\nlambda = 2.0\n",
        )
        .unwrap();
        assert_eq!(c.model.lambda, 2.0);
        assert_eq!(c.model.offspring, vec![0.5, 0.0, 0.5]);
        assert_eq!(c.grid.length, 40.0);
        assert_eq!(
            c.query_points,
            vec![
                QueryPoint { x: 1.0, t: None },
                QueryPoint {
                    x: 2.0,
                    t: Some(50.0)
                },
                QueryPoint { x: 3.0, t: None },
            ]
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"modle": {}}"#).is_err());
    }

    #[test]
    fn hash_ignores_threads_and_destination() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.sim.threads = Some(3);
        b.output_path = Some("x.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.sim.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn binary_detection_tolerates_padding() {
        let mut c = ExperimentConfig::default();
        assert!(c.is_binary());
        c.model.offspring = vec![0.5, 0.0, 0.5, 0.0];
        assert!(c.is_binary());
        c.model.offspring = vec![0.25, 0.0, 0.75];
        assert!(!c.is_binary());
    }
}
