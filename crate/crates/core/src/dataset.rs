use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::PointCloud;

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Free-form generator settings (dataset spec, integrator parameters, ...).
    #[serde(default)]
    pub details: serde_json::Value,
}

/// Paired samples `(x_t, x_{t+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    dim: usize,
    states: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl TransitionDataset {
    pub fn new(states: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if states.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: states.len(),
                got: targets.len(),
            });
        }
        let dim = states[0].len();
        if dim == 0 {
            return Err(Error::Spec("states must have at least one component".into()));
        }
        for v in states.iter().chain(&targets) {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        Ok(TransitionDataset {
            dim,
            states,
            targets,
            provenance: Provenance::default(),
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.states
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| (x.as_slice(), y.as_slice()))
    }

    pub fn state_cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.dim, self.states.clone())
    }

    /// Merges samples whose states coincide (within the point-cloud
    /// tolerance), averaging their targets. Returns the merged dataset and
    /// the number of samples that were folded into another one.
    pub fn deduplicated(&self) -> Result<(TransitionDataset, usize)> {
        let dedup = self.state_cloud()?.dedup();
        let merged = self.len() - dedup.groups.len();
        let targets = dedup
            .groups
            .iter()
            .map(|g| {
                let mut mean = vec![0.0; self.dim];
                for &i in g {
                    for (m, v) in mean.iter_mut().zip(&self.targets[i]) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= g.len() as f64);
                mean
            })
            .collect();
        let states = dedup.cloud.points().to_vec();
        Ok((
            TransitionDataset {
                dim: self.dim,
                states,
                targets,
                provenance: self.provenance.clone(),
            },
            merged,
        ))
    }

    /// Concatenates two datasets of equal dimension.
    pub fn concat(&self, other: &TransitionDataset) -> Result<TransitionDataset> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut out = self.clone();
        out.states.extend(other.states.iter().cloned());
        out.targets.extend(other.targets.iter().cloned());
        Ok(out)
    }

    /// Reorders samples by `perm` (a permutation of `0..len`).
    pub fn permuted(&self, perm: &[usize]) -> TransitionDataset {
        TransitionDataset {
            dim: self.dim,
            states: perm.iter().map(|&i| self.states[i].clone()).collect(),
            targets: perm.iter().map(|&i| self.targets[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Sidecar path for the provenance record of a dataset CSV.
    pub fn provenance_path(csv_path: &Path) -> PathBuf {
        let mut name = csv_path
            .file_stem()
            .map(|s| s.to_os_string())
            .unwrap_or_default();
        name.push(".provenance.json");
        csv_path.with_file_name(name)
    }

    /// Writes `x1..xn,y1..yn` rows plus the provenance sidecar.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        let header: Vec<String> = (1..=self.dim)
            .map(|i| format!("x{i}"))
            .chain((1..=self.dim).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header)?;
        for (x, y) in self.pairs() {
            w.write_record(x.iter().chain(y).map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let side = Self::provenance_path(path);
        let text = serde_json::to_string_pretty(&self.provenance)?;
        std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
    }

    /// Reads a dataset CSV; the provenance sidecar is loaded when present.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols == 0 || cols % 2 != 0 {
            return Err(Error::Schema(format!(
                "dataset header must have 2n columns, found {cols}"
            )));
        }
        let n = cols / 2;
        for (i, name) in header.iter().enumerate() {
            let expected = if i < n {
                format!("x{}", i + 1)
            } else {
                format!("y{}", i - n + 1)
            };
            if name.trim() != expected {
                return Err(Error::Schema(format!(
                    "column {i} should be `{expected}`, found `{name}`"
                )));
            }
        }
        let mut states = Vec::new();
        let mut targets = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Schema(format!("row {}: {e}", row + 1)))?;
            if vals.len() != cols {
                return Err(Error::Schema(format!("row {} has {} fields", row + 1, vals.len())));
            }
            states.push(vals[..n].to_vec());
            targets.push(vals[n..].to_vec());
        }
        let mut ds = TransitionDataset::new(states, targets)?;
        let side = Self::provenance_path(path);
        if side.exists() {
            let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            ds.provenance = serde_json::from_str(&text)?;
        }
        Ok(ds)
    }
}
