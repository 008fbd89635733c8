use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Provenance;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dde,
    Edmd,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Dde => "DDE",
            Method::Edmd => "EDMD",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dde" => Ok(Method::Dde),
            "edmd" => Ok(Method::Edmd),
            other => Err(Error::Spec(format!("unknown method `{other}`"))),
        }
    }
}

/// Weighted Gram matrices `R̂ = Σ w z(x) z(x)ᵀ` and `Q̂ = Σ w z(f(x)) z(x)ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramPair {
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Ratio of extreme eigenvalue magnitudes of `R̂`.
    pub condition_estimate: f64,
    pub node_count: usize,
    pub hull_volume: f64,
}

/// Fit diagnostics carried alongside the transition matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged_duplicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hull_volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets_outside_hull: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped_slivers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rcond: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub condition_estimate: f64,
    pub relative_residual: f64,
    #[serde(default)]
    pub dataset: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_at_unix: Option<u64>,
}

/// Finite-order Koopman model: `z_{t+1} ≈ A z_t` over a fixed dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub method: Method,
    pub dict: Dictionary,
    pub a: DMatrix<f64>,
    pub grams: Option<GramPair>,
    pub meta: FitMeta,
}

/// How multi-step predictions advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rollout {
    /// Propagate the lifted vector, `z ← A z`, without touching the dictionary again.
    #[default]
    Lifted,
    /// Read the state out after every step and lift it afresh.
    Relift,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    method: Method,
    dict: Dictionary,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    meta: FitMeta,
}

impl KoopmanModel {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `A z(x)`.
    pub fn step_lifted(&self, z: &[f64]) -> Vec<f64> {
        let m = self.order();
        let mut out = vec![0.0; m];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = (0..m).map(|j| self.a[(i, j)] * z[j]).sum();
        }
        out
    }

    /// One-step state prediction `readout(A z(x))`.
    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let range = self.dict.state_block().ok_or(Error::NotStateInclusive)?;
        let z = self.dict.lift(x)?;
        let next = self.step_lifted(&z);
        Ok(next[range].to_vec())
    }

    /// Predicted states after each of `steps` applications of the model.
    pub fn predict(&self, x: &[f64], steps: usize, rollout: Rollout) -> Result<Vec<Vec<f64>>> {
        let range = self.dict.state_block().ok_or(Error::NotStateInclusive)?;
        if steps == 0 {
            return Err(Error::Spec("steps must be at least 1".into()));
        }
        let mut z = self.dict.lift(x)?;
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            z = self.step_lifted(&z);
            let state = z[range.clone()].to_vec();
            if rollout == Rollout::Relift {
                if state.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteInput);
                }
                z = self.dict.lift(&state)?;
            }
            out.push(state);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            method: self.method,
            dict: self.dict.clone(),
            a: (0..self.a.nrows())
                .map(|i| self.a.row(i).iter().copied().collect())
                .collect(),
            meta: self.meta.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let m = file.dict.output_dim();
        if file.a.len() != m || file.a.iter().any(|r| r.len() != m) {
            return Err(Error::Schema(format!("A must be {m}x{m} to match the dictionary")));
        }
        if file.a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("A has non-finite entries".into()));
        }
        let a = DMatrix::from_fn(m, m, |i, j| file.a[i][j]);
        Ok(KoopmanModel {
            method: file.method,
            dict: file.dict,
            a,
            grams: None,
            meta: file.meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `‖A G − H‖_F / ‖H‖_F`, or the absolute norm when `H` vanishes.
pub(crate) fn relative_residual(a: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let res = (a * g - h).norm();
    let scale = h.norm();
    if scale > 0.0 {
        res / scale
    } else {
        res
    }
}

pub(crate) fn lifted_matrix(dict: &Dictionary, points: &[Vec<f64>]) -> DMatrix<f64> {
    let m = dict.output_dim();
    let mut z = DMatrix::zeros(m, points.len());
    let mut buf = vec![0.0; m];
    for (c, x) in points.iter().enumerate() {
        dict.lift_into(x, &mut buf);
        z.set_column(c, &DVector::from_column_slice(&buf));
    }
    z
}
