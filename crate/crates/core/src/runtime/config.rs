//! Experiment configuration as a TOML document.
//!
//! Matrices are arrays of rows. A named example supplies defaults for every
//! plant, cost and initial-state field; anything given inline replaces it,
//! and `plant.overrides` then patches individual entries.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::examples::{self, ExamplePlant};
use crate::excitation::{SignalKind, SignalSpec};
use crate::policy::IterationConfig;
use crate::system::{lifted_dim, BilinearSystem, CostSpec};

pub const DEFAULT_HORIZON: usize = 2000;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "BILQ_OUT_DIR";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    ModelFree,
    ModelBased,
    Both,
}

/// Replaces one entry of `a`, `b` or `d1 … dn` (zero-based row and column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryOverride {
    pub matrix: String,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<EntryOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    pub lambda: Vec<Vec<f64>>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostConfig>,
    #[serde(default)]
    pub signal: SignalSpec,
    #[serde(default)]
    pub iteration: IterationConfig,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default)]
    pub mode: Mode,
    /// Overrides `signal.seed` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Keep adding closed-loop samples to the data matrices after the
    /// exploration phase, refactorizing at every step.
    #[serde(default)]
    pub continue_accumulation: bool,
    /// Apply the last iterate instead of aborting when the frozen solve hits
    /// `max_iterations`.
    #[serde(default)]
    pub best_effort_on_nonconvergence: bool,
    /// Write the frozen data matrices next to the run log.
    #[serde(default)]
    pub dump_data: bool,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

/// Everything the learner is allowed to see.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSettings {
    pub cost: CostSpec,
    pub signal: SignalSpec,
    pub iteration: IterationConfig,
    pub horizon: usize,
    pub initial_state: DVector<f64>,
    pub continue_accumulation: bool,
    pub best_effort_on_nonconvergence: bool,
}

impl LearnerSettings {
    pub fn n(&self) -> usize {
        self.cost.n()
    }

    pub fn m(&self) -> usize {
        self.cost.m()
    }

    /// Exploration length `N = n + m + nm`.
    pub fn exploration_steps(&self) -> usize {
        lifted_dim(self.n(), self.m())
    }
}

/// A validated configuration: the plant (for simulation and the model-based
/// baseline only) and the learner settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub system: BilinearSystem,
    pub settings: LearnerSettings,
    pub mode: Mode,
    pub output_dir: Option<PathBuf>,
    pub dump_data: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Validates and builds the plant and learner settings.
    pub fn resolve(&self) -> Result<Experiment> {
        self.resolve_inner().map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::Config(msg),
            Error::DimensionMismatch {
                context,
                expected,
                actual,
            } => Error::Config(format!("{context}: expected {expected}, got {actual}")),
            other => other,
        })
    }

    fn resolve_inner(&self) -> Result<Experiment> {
        let example = match &self.plant.example {
            Some(name) => Some(examples::by_name(name).ok_or_else(|| unknown_example(name))?),
            None => None,
        };
        let system = self.build_system(example.as_ref())?;
        let (n, m) = (system.n(), system.m());
        let big_n = system.lifted_dim();

        let cost = match (&self.cost, &example) {
            (Some(c), _) => CostSpec::new(matrix_from_rows("cost.lambda", &c.lambda)?, c.gamma, n)?,
            (None, Some(ex)) => ex.cost.clone(),
            (None, None) => return Err(Error::Config("missing [cost] for an inline plant".into())),
        };
        if cost.dim() != n + m {
            return Err(Error::dims(
                "cost.lambda",
                format!("{0}x{0}", n + m),
                format!("{0}x{0}", cost.dim()),
            ));
        }

        let initial_state = match (&self.initial_state, &example) {
            (Some(x), _) => DVector::from_column_slice(x),
            (None, Some(ex)) => ex.initial_state.clone(),
            (None, None) => {
                return Err(Error::Config(
                    "missing initial_state for an inline plant".into(),
                ))
            }
        };
        if initial_state.len() != n {
            return Err(Error::dims("initial_state", n, initial_state.len()));
        }
        if !initial_state.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("initial_state must be finite".into()));
        }

        if self.horizon <= big_n {
            return Err(Error::Config(format!(
                "horizon {} must exceed the exploration length N = {big_n}",
                self.horizon
            )));
        }
        self.iteration.validate()?;

        let mut signal = self.signal.clone();
        if signal.channels == 0 {
            signal.channels = m;
        } else if signal.channels != m {
            return Err(Error::dims("signal.channels", m, signal.channels));
        }
        if let Some(seed) = self.seed {
            signal.seed = seed;
        }
        if signal.kind == SignalKind::SumOfSinusoids && signal.sinusoids.is_empty() {
            signal.sinusoids = SignalSpec::default_sinusoids(big_n, signal.seed);
        }
        signal.validate_for_order(big_n)?;

        Ok(Experiment {
            system,
            settings: LearnerSettings {
                cost,
                signal,
                iteration: self.iteration,
                horizon: self.horizon,
                initial_state,
                continue_accumulation: self.continue_accumulation,
                best_effort_on_nonconvergence: self.best_effort_on_nonconvergence,
            },
            mode: self.mode,
            output_dir: self.output_dir.clone(),
            dump_data: self.dump_data,
        })
    }

    fn build_system(&self, example: Option<&ExamplePlant>) -> Result<BilinearSystem> {
        let base = example.map(|ex| &ex.system);
        let mut a = match (&self.plant.a, base) {
            (Some(rows), _) => matrix_from_rows("plant.a", rows)?,
            (None, Some(sys)) => sys.a().clone(),
            (None, None) => {
                return Err(Error::Config("plant needs `example` or inline `a`".into()))
            }
        };
        let mut b = match (&self.plant.b, base) {
            (Some(rows), _) => matrix_from_rows("plant.b", rows)?,
            (None, Some(sys)) => sys.b().clone(),
            (None, None) => return Err(Error::Config("inline plant needs `b`".into())),
        };
        let mut d = match (&self.plant.d, base) {
            (Some(mats), _) => mats
                .iter()
                .enumerate()
                .map(|(j, rows)| matrix_from_rows(&format!("plant.d[{j}]"), rows))
                .collect::<Result<Vec<_>>>()?,
            (None, Some(sys)) => sys.d().to_vec(),
            (None, None) => vec![DMatrix::zeros(b.nrows(), b.ncols()); a.nrows()],
        };
        for ov in &self.plant.overrides {
            let target = match ov.matrix.as_str() {
                "a" => &mut a,
                "b" => &mut b,
                name => {
                    let j = name
                        .strip_prefix('d')
                        .and_then(|idx| idx.parse::<usize>().ok())
                        .filter(|&j| j >= 1 && j <= d.len())
                        .ok_or_else(|| {
                            Error::Config(format!("override names unknown matrix `{name}`"))
                        })?;
                    &mut d[j - 1]
                }
            };
            if ov.row >= target.nrows() || ov.col >= target.ncols() {
                return Err(Error::Config(format!(
                    "override ({}, {}) is outside {} of shape {:?}",
                    ov.row,
                    ov.col,
                    ov.matrix,
                    target.shape()
                )));
            }
            target[(ov.row, ov.col)] = ov.value;
        }
        BilinearSystem::new(a, b, d)
    }
}

fn unknown_example(name: &str) -> Error {
    Error::Config(format!(
        "unknown example `{name}` (available: {})",
        examples::NAMES.join(", ")
    ))
}

fn matrix_from_rows(context: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!(
            "{context} must be a non-empty rectangular array of rows"
        )));
    }
    Ok(DMatrix::from_row_iterator(
        r,
        c,
        rows.iter().flatten().copied(),
    ))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|row| row.iter().copied().collect())
        .collect()
}

/// The built-in plant together with a fully explicit configuration for it.
pub fn example_registry(name: &str) -> Result<(BilinearSystem, ExperimentConfig)> {
    let ex = examples::by_name(name).ok_or_else(|| unknown_example(name))?;
    let config = ExperimentConfig {
        plant: PlantSpec {
            example: Some(ex.name.to_string()),
            ..PlantSpec::default()
        },
        cost: Some(CostConfig {
            lambda: rows_of(ex.cost.lambda()),
            gamma: ex.cost.gamma(),
        }),
        signal: SignalSpec::prbs(1.0, ex.system.m(), 0),
        iteration: IterationConfig::default(),
        horizon: DEFAULT_HORIZON,
        initial_state: Some(ex.initial_state.iter().copied().collect()),
        mode: Mode::Both,
        seed: None,
        output_dir: None,
        continue_accumulation: false,
        best_effort_on_nonconvergence: false,
        dump_data: false,
    };
    Ok((ex.system, config))
}
