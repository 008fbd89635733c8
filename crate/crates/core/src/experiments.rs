//! End-to-end runs: a single configured experiment, and the comparison tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dataset::TransitionDataset;
use crate::dynamics::{generate, DatasetSpec};
use crate::edmd::fit_edmd;
use crate::encoder::fit_dde;
use crate::error::{Error, Result};
use crate::eval::{compare_methods, gaussian_protocol, sse_grid_pendulum, Domain, EvalOptions};
use crate::model::{KoopmanModel, Method};

pub const UNIFORM_SIZES: [usize; 4] = [900, 2500, 10000, 22500];
pub const TRAJECTORY_SIZES: [usize; 5] = [1000, 2500, 5000, 10000, 25000];
pub const GAUSSIAN_CENTERS: [[f64; 2]; 3] = [[0.0, 0.0], [0.8, 0.0], [0.0, 2.0]];
pub const GAUSSIAN_SIZES: [usize; 5] = [1000, 2500, 5000, 10000, 25000];
pub const GAUSSIAN_REPEATS: usize = 8;
pub const ORDER_SHAPES: [[usize; 2]; 3] = [[5, 5], [7, 7], [9, 9]];
pub const ORDER_DATASET_SIZE: usize = 5000;

pub fn fit(method: Method, data: &TransitionDataset, dict: &crate::Dictionary, ridge: f64, rcond: f64) -> Result<KoopmanModel> {
    match method {
        Method::Dde => fit_dde(data, dict, ridge),
        Method::Edmd => fit_edmd(data, dict, rcond),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub model_path: PathBuf,
    pub total_sse: f64,
    pub sse_variance: f64,
    pub condition_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: usize,
    pub observables: usize,
    pub dictionary: String,
    pub outcomes: Vec<MethodOutcome>,
}

/// Generates the dataset, fits every configured method, and scores each on
/// the evaluation grid. Everything is written under `cfg.out_dir`; relative
/// MLP weight paths resolve against `base`.
pub fn run_experiment(cfg: &ExperimentConfig, base: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    cfg.save(out.join("config.json"))?;

    let data = generate(&cfg.dataset, &cfg.params)?;
    data.write_csv(out.join("data.csv"))?;
    let dict = cfg.dictionary.build(&data, cfg.width(), base)?;
    let domain = Domain::of_dataset(&data)?;

    let mut outcomes = Vec::new();
    for &method in &cfg.methods {
        let model = fit(method, &data, &dict, cfg.ridge, cfg.rcond)?;
        let name = method.label().to_ascii_lowercase();
        let model_path = out.join(format!("model_{name}.json"));
        model.save(&model_path)?;
        let report = sse_grid_pendulum(&model, &cfg.params, &domain, &cfg.eval_grid)?;
        report.write_csv(out.join(format!("eval_{name}.csv")))?;
        let summary_path = out.join(format!("eval_{name}.json"));
        let text = serde_json::to_string_pretty(&report.summary_json())?;
        std::fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;
        outcomes.push(MethodOutcome {
            method,
            model_path,
            total_sse: report.total_sse,
            sse_variance: report.sse_variance,
            condition_estimate: model.meta.condition_estimate,
        });
    }
    let summary = RunSummary {
        samples: data.len(),
        observables: dict.output_dim(),
        dictionary: dict.describe(),
        outcomes,
    };
    let path = out.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    /// Uniform and trajectory datasets across sizes.
    DatasetSize,
    /// Gaussian clouds with shifted centers.
    GaussianCenters,
    /// Dictionary order on a fixed trajectory dataset.
    Order,
}

impl FromStr for Table {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(Table::DatasetSize),
            "II" | "2" => Ok(Table::GaussianCenters),
            "III" | "3" => Ok(Table::Order),
            other => Err(Error::Spec(format!("unknown table `{other}` (expected I, II, or III)"))),
        }
    }
}

/// One row of a size or order sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dataset: String,
    pub size: usize,
    pub observables: usize,
    pub edmd_total: f64,
    pub dde_total: f64,
    pub edmd_variance: f64,
    pub dde_variance: f64,
}

fn sweep_row(label: &str, data: &TransitionDataset, opts: &EvalOptions) -> Result<SweepRow> {
    let c = compare_methods(data, opts)?;
    Ok(SweepRow {
        dataset: label.to_string(),
        size: data.len(),
        observables: c.observables,
        edmd_total: c.edmd.total_sse,
        dde_total: c.dde.total_sse,
        edmd_variance: c.edmd.sse_variance,
        dde_variance: c.dde.sse_variance,
    })
}

/// Both methods on uniform grids and trajectory sets of the given sizes.
pub fn dataset_size_sweep(
    uniform_sizes: &[usize],
    trajectory_sizes: &[usize],
    seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>> {
    let specs: Vec<(&str, DatasetSpec)> = uniform_sizes
        .iter()
        .map(|&n| ("uniform", DatasetSpec::uniform(n)))
        .chain(trajectory_sizes.iter().map(|&n| ("trajectories", DatasetSpec::trajectories(n, seed))))
        .collect();
    specs
        .par_iter()
        .map(|(label, spec)| sweep_row(label, &generate(spec, &opts.params)?, opts))
        .collect()
}

/// Both methods on one trajectory dataset with RBF grids of each shape.
pub fn order_sweep(size: usize, shapes: &[Vec<usize>], seed: u64, opts: &EvalOptions) -> Result<Vec<SweepRow>> {
    let data = generate(&DatasetSpec::trajectories(size, seed), &opts.params)?;
    shapes
        .par_iter()
        .map(|shape| {
            let o = EvalOptions {
                rbf_shape: shape.clone(),
                ..opts.clone()
            };
            sweep_row("trajectories", &data, &o)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterRow {
    pub center: [f64; 2],
    pub rows: Vec<crate::eval::ProtocolRow>,
}

pub fn gaussian_sweep(
    centers: &[[f64; 2]],
    sizes: &[usize],
    repeats: usize,
    base_seed: u64,
    opts: &EvalOptions,
) -> Result<Vec<CenterRow>> {
    centers
        .iter()
        .map(|&center| {
            Ok(CenterRow {
                center,
                rows: gaussian_protocol(center, sizes, repeats, base_seed, opts)?,
            })
        })
        .collect()
}

pub fn sweep_markdown(rows: &[SweepRow]) -> String {
    let mut s = String::from(
        "| Dataset | Size | Observables | EDMD total SSE | DDE total SSE | EDMD SSE variance | DDE SSE variance |\n\
         |---|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.4} | {:.4} | {:.4e} | {:.4e} |",
            r.dataset, r.size, r.observables, r.edmd_total, r.dde_total, r.edmd_variance, r.dde_variance
        );
    }
    s
}

pub fn gaussian_markdown(table: &[CenterRow]) -> String {
    let mut s = String::from("| Size |");
    for c in table {
        let _ = write!(s, " EDMD [{}, {}] | DDE [{}, {}] |", c.center[0], c.center[1], c.center[0], c.center[1]);
    }
    s.push_str("\n|---:|");
    s.push_str(&"---:|---:|".repeat(table.len()));
    s.push('\n');
    let n_rows = table.first().map_or(0, |c| c.rows.len());
    for i in 0..n_rows {
        let _ = write!(s, "| {} |", table[0].rows[i].size);
        for c in table {
            let r = &c.rows[i];
            let _ = write!(s, " {:.4} ± {:.3} | {:.4} ± {:.3} |", r.edmd_total, r.edmd_std, r.dde_total, r.dde_std);
        }
        s.push('\n');
    }
    s
}

/// Sizes and repeats for [`reproduce`]; `None` picks the published grid.
#[derive(Debug, Clone, Default)]
pub struct ReproduceOptions {
    pub sizes: Option<Vec<usize>>,
    pub repeats: Option<usize>,
    pub seed: u64,
    pub eval: EvalOptions,
}

/// Runs one comparison table and renders it as Markdown.
pub fn reproduce(table: Table, opts: &ReproduceOptions) -> Result<String> {
    let e = &opts.eval;
    Ok(match table {
        Table::DatasetSize => {
            let (u, t) = match &opts.sizes {
                Some(s) => (s.clone(), s.clone()),
                None => (UNIFORM_SIZES.to_vec(), TRAJECTORY_SIZES.to_vec()),
            };
            sweep_markdown(&dataset_size_sweep(&u, &t, opts.seed, e)?)
        }
        Table::GaussianCenters => {
            let sizes = opts.sizes.clone().unwrap_or_else(|| GAUSSIAN_SIZES.to_vec());
            let repeats = opts.repeats.unwrap_or(GAUSSIAN_REPEATS);
            gaussian_markdown(&gaussian_sweep(&GAUSSIAN_CENTERS, &sizes, repeats, opts.seed, e)?)
        }
        Table::Order => {
            let size = opts
                .sizes
                .as_ref()
                .and_then(|s| s.first().copied())
                .unwrap_or(ORDER_DATASET_SIZE);
            let shapes: Vec<Vec<usize>> = ORDER_SHAPES.iter().map(|s| s.to_vec()).collect();
            sweep_markdown(&order_sweep(size, &shapes, opts.seed, e)?)
        }
    })
}
