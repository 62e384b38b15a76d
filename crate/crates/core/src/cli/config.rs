//! Experiment configuration: JSON in, validated and hashed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::concentration::{HSearch, SweepConfig};
use crate::error::{Error, Result};
use crate::model::{GridSpec, ProblemParams, ScopeFamily, ScopeFunction};
use crate::solver::SolverConfig;

/// Version of the JSON report and CSV layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "RFL_LAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    Limit,
    Sweep,
    Concentration,
    Sobolev,
    LambdaScan,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Limit => "limit",
            Experiment::Sweep => "sweep",
            Experiment::Concentration => "concentration",
            Experiment::Sobolev => "sobolev",
            Experiment::LambdaScan => "lambda-scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevConfig {
    /// Width of the starting extremal.
    pub theta: f64,
    /// Descent iterations on the quotient; 0 keeps the extremal value.
    pub iters: usize,
}

impl Default for SobolevConfig {
    fn default() -> Self {
        SobolevConfig { theta: 1.0, iters: 200 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: ProblemParams,
    pub scope: ScopeFamily,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub concentration: HSearch,
    pub sobolev: SobolevConfig,
    /// Increasing `λ` values for `lambda-scan`.
    pub lambdas: Vec<f64>,
    /// Seed of the jitter applied to solver starting functions.
    pub seed: u64,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::Solve,
            params: ProblemParams::desk_default(),
            scope: ScopeFamily::well(1.0, 2.0, 1.0),
            grid: GridSpec::default(),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            concentration: HSearch::default(),
            sobolev: SobolevConfig::default(),
            lambdas: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0],
            seed: 0,
            output: OutputConfig::default(),
        }
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Validation { field, message } if !field.contains('.') => Error::Validation {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    }
}

impl ExperimentConfig {
    pub fn scope_function(&self) -> ScopeFunction {
        ScopeFunction::from(self.scope.clone())
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| prefixed("params", e))?;
        self.grid.validate()?;
        if self.grid.dim != self.params.n {
            return Err(Error::validation(
                "grid.dim",
                format!("{} differs from params.n = {}", self.grid.dim, self.params.n),
            ));
        }
        self.scope.validate().map_err(|e| prefixed("scope", e))?;
        self.solver.validate()?;
        match self.experiment {
            Experiment::Sweep => self.sweep.validate(&self.scope_function(), &self.grid)?,
            Experiment::Concentration => self.concentration.validate()?,
            Experiment::LambdaScan => {
                if self.lambdas.is_empty() {
                    return Err(Error::validation("lambdas", "empty list"));
                }
                if self.lambdas.windows(2).any(|w| !(w[0] < w[1])) || !(self.lambdas[0] > 0.0) {
                    return Err(Error::validation("lambdas", "must be positive and strictly increasing"));
                }
            }
            _ => {}
        }
        if !(self.sobolev.theta > 0.0) {
            return Err(Error::validation("sobolev.theta", "must be positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |e: serde_json::Error| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        // echoed files carry the hash and schema header; drop them before the strict parse
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        let echoed = match value.as_object_mut() {
            Some(obj) => obj.remove("config_hash").is_some() | obj.remove("schema_version").is_some(),
            None => false,
        };
        let config: ExperimentConfig = if echoed {
            serde_json::from_value(value).map_err(parse_err)?
        } else {
            serde_json::from_str(text).map_err(parse_err)?
        };
        config.validate()?;
        Ok(config)
    }

    /// Effective configuration with every default filled in.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serialises")
    }

    /// SHA-256 of the compact JSON form, without the output location.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        let bytes = serde_json::to_vec(&canonical).expect("configuration serialises");
        hex::encode(Sha256::digest(&bytes))
    }

    /// `--out` beats the config file, which beats the environment.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output.dir {
            return p.clone();
        }
        match std::env::var_os(OUT_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => PathBuf::from("out"),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_json(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_json(text, Path::new("test.json"))
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse(r#"{"experiment": "solve"}"#).unwrap();
        assert_eq!(c.params.n, 1);
        assert_eq!(c.params.alpha, 0.4);
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn partial_params_keep_other_defaults() {
        let c = parse(r#"{"params": {"lambda": 3.5}}"#).unwrap();
        assert_eq!(c.params.lambda, 3.5);
        assert_eq!(c.params.q, 3.0);
    }

    #[test]
    fn bad_q_names_the_field() {
        match parse(r#"{"params": {"q": 12.0}}"#) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "params.q"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_position() {
        match parse("{\n  \"experiment\": \"solve\",\n  \"seed\": x\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse(r#"{"experiment": "nope"}"#), Err(Error::Parse { .. })));
        assert!(matches!(parse(r#"{"unknown": 1}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn echo_round_trip_keeps_hash() {
        let c = parse(r#"{"experiment": "sweep", "params": {"lambda": 0.1}, "seed": 9}"#).unwrap();
        let again = parse(&c.echo()).unwrap();
        assert_eq!(c.hash(), again.hash());
        assert_eq!(c, again);
        assert_ne!(c.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn output_precedence() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.output_dir(Some(Path::new("flag"))), PathBuf::from("flag"));
        c.output.dir = Some(PathBuf::from("cfg"));
        assert_eq!(c.output_dir(None), PathBuf::from("cfg"));
        assert_eq!(c.output_dir(Some(Path::new("flag"))), PathBuf::from("flag"));
        let h = c.hash();
        c.output.dir = None;
        assert_eq!(c.hash(), h);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(parse(r#"{"params": {"n": 2, "alpha": 0.5, "q": 2.0}}"#).is_err());
    }
}
