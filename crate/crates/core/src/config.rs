//! Experiment configuration files and the `--dict` vocabulary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::dataset::TransitionDataset;
use crate::dictionary::{Dictionary, MlpWeights, WidthRule};
use crate::dynamics::{DatasetSpec, PendulumParams};
use crate::edmd::DEFAULT_RCOND;
use crate::error::{Error, Result};
use crate::model::Method;

/// Which dictionary to fit with, as written on the command line:
/// `state`, `rbf:5x5`, or `mlp:weights.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DictionarySpec {
    State,
    Rbf(Vec<usize>),
    Mlp(PathBuf),
}

/// Parses `5x5` (or `5,5`) into a grid shape.
pub fn parse_shape(s: &str) -> Result<Vec<usize>> {
    let shape = s
        .split(['x', 'X', ','])
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Spec(format!("cannot parse grid shape `{s}`")))?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Spec(format!("grid shape `{s}` needs positive entries")));
    }
    Ok(shape)
}

impl FromStr for DictionarySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "state" => Ok(DictionarySpec::State),
            Some(("rbf", shape)) => Ok(DictionarySpec::Rbf(parse_shape(shape)?)),
            Some(("mlp", path)) if !path.is_empty() => Ok(DictionarySpec::Mlp(path.into())),
            _ => Err(Error::Spec(format!(
                "unknown dictionary `{s}` (expected state, rbf:<shape>, or mlp:<weights.json>)"
            ))),
        }
    }
}

impl fmt::Display for DictionarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DictionarySpec::State => f.write_str("state"),
            DictionarySpec::Rbf(shape) => {
                let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
                write!(f, "rbf:{}", dims.join("x"))
            }
            DictionarySpec::Mlp(path) => write!(f, "mlp:{}", path.display()),
        }
    }
}

impl TryFrom<String> for DictionarySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DictionarySpec> for String {
    fn from(d: DictionarySpec) -> String {
        d.to_string()
    }
}

impl DictionarySpec {
    /// Builds the dictionary for `data`. RBF centers span the per-axis range of
    /// the states; relative MLP paths are taken from `base`.
    pub fn build(&self, data: &TransitionDataset, width: WidthRule, base: &Path) -> Result<Dictionary> {
        match self {
            DictionarySpec::State => Dictionary::state_only(data.dim()),
            DictionarySpec::Rbf(shape) => {
                let b = Bounds::enclosing(data.states().iter().map(Vec::as_slice)).ok_or(Error::EmptyDataset)?;
                Dictionary::rbf_grid(shape, &b, width)
            }
            DictionarySpec::Mlp(path) => {
                let (w, include_state) = MlpWeights::from_json_file(base.join(path))?;
                Dictionary::from_mlp(w, include_state)
            }
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Edmd, Method::Dde]
}

fn default_width() -> f64 {
    1.0
}

fn default_rcond() -> f64 {
    DEFAULT_RCOND
}

fn default_grid() -> Vec<usize> {
    vec![100, 100]
}

/// One generate → fit → evaluate run. The dataset seed lives in `dataset.seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub params: PendulumParams,
    pub dictionary: DictionarySpec,
    /// RBF width as a multiple of the center spacing.
    #[serde(default = "default_width")]
    pub width_factor: f64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default = "default_rcond")]
    pub rcond: f64,
    #[serde(default = "default_grid")]
    pub eval_grid: Vec<usize>,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSpec, dictionary: DictionarySpec, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            dataset,
            params: PendulumParams::default(),
            dictionary,
            width_factor: default_width(),
            methods: default_methods(),
            ridge: 0.0,
            rcond: DEFAULT_RCOND,
            eval_grid: default_grid(),
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.params.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Spec("at least one method is required".into()));
        }
        if !(self.width_factor > 0.0 && self.width_factor.is_finite()) {
            return Err(Error::Spec(format!("width_factor must be positive, got {}", self.width_factor)));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) || !(self.rcond >= 0.0) {
            return Err(Error::Spec("ridge and rcond must be nonnegative".into()));
        }
        if self.eval_grid.len() != self.dataset.bounds.dim() || self.eval_grid.contains(&0) {
            return Err(Error::Spec(format!("eval_grid {:?} does not fit the state dimension", self.eval_grid)));
        }
        Ok(())
    }

    pub fn width(&self) -> WidthRule {
        WidthRule::SpacingScaled(self.width_factor)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; a relative `out_dir` stays relative to the working directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
