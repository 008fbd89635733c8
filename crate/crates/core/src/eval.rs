//! One-step prediction error over the dynamic range, and the Gram-entry
//! convergence traces.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::dataset::TransitionDataset;
use crate::dictionary::{Dictionary, WidthRule};
use crate::dynamics::{generate, DatasetSpec, PendulumParams};
use crate::edmd::{fit_edmd, DEFAULT_RCOND};
use crate::encoder::{compute_grams, fit_dde};
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, SimplicialMesh};
use crate::model::{KoopmanModel, Method};

/// Region over which errors are accumulated.
pub enum Domain {
    /// Every grid point of the box counts.
    Box(Bounds),
    /// Grid over the hull's bounding box; only points inside the hull count.
    Hull(SimplicialMesh),
}

impl Domain {
    /// The convex hull of a dataset's states.
    pub fn of_dataset(data: &TransitionDataset) -> Result<Self> {
        Ok(Domain::Hull(build_mesh(&data.state_cloud()?)?))
    }

    fn bounds(&self) -> Bounds {
        match self {
            Domain::Box(b) => b.clone(),
            Domain::Hull(mesh) => Bounds::enclosing(mesh.nodes().points().iter().map(Vec::as_slice))
                .expect("mesh has nodes"),
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Domain::Box(b) => b.contains(x),
            Domain::Hull(mesh) => mesh.hull_contains(x, mesh.hull_tolerance()),
        }
    }
}

/// Per-cell one-step squared error with its masked totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub grid_shape: Vec<usize>,
    pub method: Option<Method>,
    pub dictionary: String,
    pub points: Vec<Vec<f64>>,
    pub sse: Vec<f64>,
    pub inside: Vec<bool>,
    pub total_sse: f64,
    /// Population variance of the per-cell error over the masked cells.
    pub sse_variance: f64,
    pub cells_inside: usize,
}

impl EvalReport {
    pub fn mean_sse(&self) -> f64 {
        if self.cells_inside == 0 {
            0.0
        } else {
            self.total_sse / self.cells_inside as f64
        }
    }

    /// Long-format grid: `x1..xn,sse,inside`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let n = self.points.first().map_or(0, Vec::len);
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.push("sse".into());
        header.push("inside".into());
        w.write_record(&header)?;
        for ((x, e), m) in self.points.iter().zip(&self.sse).zip(&self.inside) {
            let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
            rec.push(e.to_string());
            rec.push(u8::from(*m).to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid_shape": self.grid_shape,
            "method": self.method,
            "dictionary": self.dictionary,
            "total_sse": self.total_sse,
            "sse_variance": self.sse_variance,
            "mean_sse": self.mean_sse(),
            "cells_inside": self.cells_inside,
        })
    }
}

/// One-step squared state error of `model` against `truth`, sampled at the
/// centers of a uniform grid of cells over the domain's bounding box.
pub fn sse_grid<F>(
    model: &KoopmanModel,
    truth: F,
    domain: &Domain,
    resolution: &[usize],
) -> Result<EvalReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let range = model.dict.state_block().ok_or(Error::NotStateInclusive)?;
    let bounds = domain.bounds();
    if resolution.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            got: resolution.len(),
        });
    }
    if resolution.contains(&0) {
        return Err(Error::Spec("grid resolution entries must be positive".into()));
    }
    let points = bounds.cell_centers(resolution);
    let evaluated: Vec<(f64, bool)> = points
        .par_iter()
        .map(|x| {
            if !domain.contains(x) {
                return Ok((0.0, false));
            }
            let z = model.dict.lift(x)?;
            let next = model.step_lifted(&z);
            let y = truth(x)?;
            let err = next[range.clone()]
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok((err, true))
        })
        .collect::<Result<_>>()?;
    let (sse, inside): (Vec<f64>, Vec<bool>) = evaluated.into_iter().unzip();
    let masked: Vec<f64> = sse
        .iter()
        .zip(&inside)
        .filter(|(_, &m)| m)
        .map(|(e, _)| *e)
        .collect();
    let cells_inside = masked.len();
    let total_sse: f64 = masked.iter().sum();
    let sse_variance = if cells_inside == 0 {
        0.0
    } else {
        let mean = total_sse / cells_inside as f64;
        masked.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / cells_inside as f64
    };
    Ok(EvalReport {
        grid_shape: resolution.to_vec(),
        method: Some(model.method),
        dictionary: model.dict.describe(),
        points,
        sse,
        inside,
        total_sse,
        sse_variance,
        cells_inside,
    })
}

/// [`sse_grid`] against the pendulum map.
pub fn sse_grid_pendulum(
    model: &KoopmanModel,
    params: &PendulumParams,
    domain: &Domain,
    resolution: &[usize],
) -> Result<EvalReport> {
    sse_grid(model, |x| params.step_slice(x), domain, resolution)
}

/// Settings shared by the comparison experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub rbf_shape: Vec<usize>,
    pub width: WidthRule,
    pub ridge: f64,
    pub rcond: f64,
    pub resolution: Vec<usize>,
    pub params: PendulumParams,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            rbf_shape: vec![5, 5],
            width: WidthRule::default(),
            ridge: 0.0,
            rcond: DEFAULT_RCOND,
            resolution: vec![100, 100],
            params: PendulumParams::default(),
        }
    }
}

/// DDE and EDMD fitted on the same data and dictionary, scored on the same grid.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub dde: EvalReport,
    pub edmd: EvalReport,
    pub observables: usize,
}

/// RBF dictionary spanning the per-axis range of the dataset's states.
pub fn dataset_dictionary(data: &TransitionDataset, shape: &[usize], width: WidthRule) -> Result<Dictionary> {
    let b = Bounds::enclosing(data.states().iter().map(Vec::as_slice)).ok_or(Error::EmptyDataset)?;
    Dictionary::rbf_grid(shape, &b, width)
}

pub fn compare_methods(data: &TransitionDataset, opts: &EvalOptions) -> Result<Comparison> {
    let dict = dataset_dictionary(data, &opts.rbf_shape, opts.width)?;
    let domain = Domain::of_dataset(data)?;
    let dde = fit_dde(data, &dict, opts.ridge)?;
    let edmd = fit_edmd(data, &dict, opts.rcond)?;
    Ok(Comparison {
        dde: sse_grid_pendulum(&dde, &opts.params, &domain, &opts.resolution)?,
        edmd: sse_grid_pendulum(&edmd, &opts.params, &domain, &opts.resolution)?,
        observables: dict.output_dim(),
    })
}

/// Averages over repeated Gaussian datasets at one size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRow {
    pub size: usize,
    pub repeats: usize,
    pub edmd_total: f64,
    pub dde_total: f64,
    /// Spread of the totals across repeats (population std).
    pub edmd_std: f64,
    pub dde_std: f64,
    pub edmd_variance: f64,
    pub dde_variance: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

/// Fits and scores both methods on `repeats` Gaussian datasets per size
/// (seeds `base_seed`, `base_seed + 1`, …) and averages the totals.
pub fn gaussian_protocol(
    center: [f64; 2],
    sizes: &[usize],
    repeats: usize,
    base_seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<ProtocolRow>> {
    if repeats == 0 {
        return Err(Error::Spec("repeats must be at least 1".into()));
    }
    sizes
        .iter()
        .map(|&size| {
            let runs: Vec<Comparison> = (0..repeats as u64)
                .into_par_iter()
                .map(|r| {
                    let spec = DatasetSpec::gaussian(size, center, base_seed + r);
                    let data = generate(&spec, &opts.params)?;
                    compare_methods(&data, opts)
                })
                .collect::<Result<_>>()?;
            let col = |f: &dyn Fn(&Comparison) -> f64| runs.iter().map(f).collect::<Vec<_>>();
            let (edmd_total, edmd_std) = mean_std(&col(&|c| c.edmd.total_sse));
            let (dde_total, dde_std) = mean_std(&col(&|c| c.dde.total_sse));
            Ok(ProtocolRow {
                size,
                repeats,
                edmd_total,
                dde_total,
                edmd_std,
                dde_std,
                edmd_variance: mean_std(&col(&|c| c.edmd.sse_variance)).0,
                dde_variance: mean_std(&col(&|c| c.dde.sse_variance)).0,
            })
        })
        .collect()
}

/// Which Gram entry to track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramEntry {
    Q(usize, usize),
    R(usize, usize),
}

impl std::fmt::Display for GramEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GramEntry::Q(i, j) => write!(f, "Q[{i},{j}]"),
            GramEntry::R(i, j) => write!(f, "R[{i},{j}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub sizes: Vec<usize>,
    pub entries: Vec<GramEntry>,
    /// `values[s][e]` is entry `e` at size `sizes[s]`.
    pub values: Vec<Vec<f64>>,
}

impl ConvergenceTrace {
    pub fn series(&self, entry: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[entry]).collect()
    }

    /// `|v_last − v_prev| / |v_last|` per entry.
    pub fn last_relative_change(&self) -> Vec<f64> {
        let k = self.values.len();
        (0..self.entries.len())
            .map(|e| {
                let (a, b) = (self.values[k - 2][e], self.values[k - 1][e]);
                (b - a).abs() / b.abs()
            })
            .collect()
    }

    /// `N,entry_id,value` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["N", "entry_id", "value"])?;
        for (size, row) in self.sizes.iter().zip(&self.values) {
            for (entry, v) in self.entries.iter().zip(row) {
                w.write_record([size.to_string(), entry.to_string(), v.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `Q[0,0]` plus the first, middle and last RBF diagonal of a state-first dictionary.
pub fn default_entries(dict: &Dictionary) -> Vec<GramEntry> {
    let m = dict.output_dim();
    let start = dict.state_block().map_or(0, |r| r.end.min(m - 1));
    let mut idx = vec![0, start, start + (m - 1 - start) / 2, m - 1];
    idx.dedup();
    idx.into_iter().map(|i| GramEntry::Q(i, i)).collect()
}

/// Tracks selected Gram entries as the dataset grows. `template.size` is
/// replaced by each entry of `sizes`; everything else, including the seed,
/// stays fixed.
pub fn q_convergence(
    sizes: &[usize],
    template: &DatasetSpec,
    params: &PendulumParams,
    dict: &Dictionary,
    entries: &[GramEntry],
) -> Result<ConvergenceTrace> {
    if sizes.len() < 2 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Spec("sizes must be strictly increasing with at least two entries".into()));
    }
    let m = dict.output_dim();
    if entries.iter().any(|e| match *e {
        GramEntry::Q(i, j) | GramEntry::R(i, j) => i >= m || j >= m,
    }) {
        return Err(Error::Spec(format!("entry index out of range for {m} observables")));
    }
    let values = sizes
        .par_iter()
        .map(|&size| {
            let spec = DatasetSpec {
                size,
                ..template.clone()
            };
            let data = generate(&spec, params)?;
            let (nodes, _) = data.deduplicated()?;
            let mesh = build_mesh(&nodes.state_cloud()?)?;
            let g = compute_grams(&nodes, dict, &mesh)?;
            Ok(entries
                .iter()
                .map(|e| match *e {
                    GramEntry::Q(i, j) => g.q[(i, j)],
                    GramEntry::R(i, j) => g.r[(i, j)],
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ConvergenceTrace {
        sizes: sizes.to_vec(),
        entries: entries.to_vec(),
        values,
    })
}
