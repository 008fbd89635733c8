use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use kdde::config::{parse_shape, DictionarySpec, ExperimentConfig};
use kdde::dynamics::{generate, DatasetKind, DatasetSpec, PendulumParams};
use kdde::edmd::DEFAULT_RCOND;
use kdde::eval::{dataset_dictionary, default_entries, q_convergence, sse_grid_pendulum, Domain, EvalOptions};
use kdde::experiments::{fit, reproduce, run_experiment, ReproduceOptions, Table, TRAJECTORY_SIZES};
use kdde::{Bounds, Error, KoopmanModel, Method, TransitionDataset, WidthRule};

#[derive(Parser)]
#[command(name = "kdde", version, about = "Koopman models from sampled transitions: mesh-weighted DDE and EDMD")]
struct Cli {
    /// Worker threads for parallel sizes, repeats and grid cells (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a pendulum transition dataset
    GenData {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        /// Gaussian peak, e.g. `0.8,0`
        #[arg(long, allow_hyphen_values = true)]
        center: Option<String>,
        /// Gaussian per-axis std, e.g. `0.4,1`
        #[arg(long)]
        std: Option<String>,
        #[arg(long, env = "KDDE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a Koopman matrix to a dataset
    Fit {
        #[arg(long)]
        method: String,
        /// `state`, `rbf:5x5`, or `mlp:weights.json`
        #[arg(long, default_value = "rbf:5x5")]
        dict: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
        #[arg(long, default_value_t = DEFAULT_RCOND)]
        rcond: f64,
        /// RBF width as a multiple of the center spacing
        #[arg(long, default_value_t = 1.0)]
        width: f64,
    },
    /// One-step error of a model over the dynamic range
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Restrict scoring to the convex hull of this dataset's states
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "100x100")]
        grid: String,
        /// Writes `<prefix>.csv` and `<prefix>.json`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Track Gram diagonal entries as the trajectory dataset grows
    Convergence {
        #[arg(long, value_delimiter = ',', default_values_t = TRAJECTORY_SIZES)]
        sizes: Vec<usize>,
        #[arg(long, default_value = "rbf:5x5")]
        dict: String,
        #[arg(long, env = "KDDE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate one of the comparison tables as Markdown
    Reproduce {
        #[arg(long)]
        table: String,
        /// Override the dataset sizes
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long, env = "KDDE_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a JSON experiment config end to end
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_vec(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("`{p}` is not a number")))
        .collect()
}

fn parse_pair(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    match parse_vec(s) {
        Ok(v) if v.len() == 2 => Ok(v),
        _ => Err(Error::Spec(format!("{what} must be two comma-separated numbers, got `{s}`"))),
    }
}

fn gen_data(kind: &str, n: usize, center: Option<&str>, std: Option<&str>, seed: u64, out: &Path) -> anyhow::Result<()> {
    let kind: DatasetKind = kind.parse()?;
    let mut spec = DatasetSpec::new(kind, n, seed);
    spec.center = center.map(|c| parse_pair(c, "--center")).transpose()?;
    spec.std = std.map(|s| parse_pair(s, "--std")).transpose()?;
    let data = generate(&spec, &PendulumParams::default())?;
    data.write_csv(out)?;
    println!("wrote {} transitions to {}", data.len(), out.display());
    Ok(())
}

fn fit_cmd(
    method: &str,
    dict: &str,
    data: &Path,
    out: &Path,
    ridge: f64,
    rcond: f64,
    width: f64,
) -> anyhow::Result<()> {
    let method: Method = method.parse()?;
    let spec: DictionarySpec = dict.parse()?;
    let data = TransitionDataset::read_csv(data)?;
    let dict = spec.build(&data, WidthRule::SpacingScaled(width), Path::new("."))?;
    let mut model = fit(method, &data, &dict, ridge, rcond)?;
    model.meta.fitted_at_unix = SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs());
    model.save(out)?;
    println!("method: {}", method.label());
    println!("observables: {}", model.order());
    println!("condition_estimate: {:.6e}", model.meta.condition_estimate);
    if let Some(v) = model.meta.hull_volume {
        println!("hull_volume: {v:.6}");
    }
    if let Some(k) = model.meta.targets_outside_hull {
        println!("targets_outside_hull: {k}");
    }
    if let Some(r) = model.meta.rank {
        println!("rank: {r}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn eval_cmd(model: &Path, data: Option<&Path>, grid: &str, out: Option<&Path>) -> anyhow::Result<()> {
    let model = KoopmanModel::load(model)?;
    let domain = match data {
        Some(p) => Domain::of_dataset(&TransitionDataset::read_csv(p)?)?,
        None => Domain::Box(Bounds::pendulum_default()),
    };
    let report = sse_grid_pendulum(&model, &PendulumParams::default(), &domain, &parse_shape(grid)?)?;
    println!("total_sse: {:.6}", report.total_sse);
    println!("sse_variance: {:.6e}", report.sse_variance);
    println!("cells_inside: {}", report.cells_inside);
    if let Some(prefix) = out {
        let csv = prefix.with_extension("csv");
        let json = prefix.with_extension("json");
        report.write_csv(&csv)?;
        std::fs::write(&json, serde_json::to_string_pretty(&report.summary_json())?)
            .map_err(|e| Error::Io { path: json.clone(), source: e })?;
        println!("wrote {} and {}", csv.display(), json.display());
    }
    Ok(())
}

fn convergence_cmd(sizes: &[usize], dict: &str, seed: u64, out: &Path) -> anyhow::Result<()> {
    let DictionarySpec::Rbf(shape) = dict.parse()? else {
        bail!(Error::Spec("convergence tracks an rbf:<shape> dictionary".into()));
    };
    let params = PendulumParams::default();
    let largest = *sizes.iter().max().context("no sizes given")?;
    let template = DatasetSpec::trajectories(largest, seed);
    // one dictionary for every size, spanning the largest dataset
    let reference = generate(&template, &params)?;
    let opts = EvalOptions { rbf_shape: shape, ..EvalOptions::default() };
    let dict = dataset_dictionary(&reference, &opts.rbf_shape, opts.width)?;
    let entries = default_entries(&dict);
    let trace = q_convergence(sizes, &template, &params, &dict, &entries)?;
    trace.write_csv(out)?;
    for (k, change) in trace.last_relative_change().into_iter().enumerate() {
        println!("{}: {:?} (last relative change {change:.3e})", entries[k], trace.series(k));
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenData { kind, n, center, std, seed, out } => {
            gen_data(&kind, n, center.as_deref(), std.as_deref(), seed, &out)
        }
        Command::Fit { method, dict, data, out, ridge, rcond, width } => {
            fit_cmd(&method, &dict, &data, &out, ridge, rcond, width)
        }
        Command::Eval { model, data, grid, out } => eval_cmd(&model, data.as_deref(), &grid, out.as_deref()),
        Command::Convergence { sizes, dict, seed, out } => convergence_cmd(&sizes, &dict, seed, &out),
        Command::Reproduce { table, sizes, repeats, seed, out } => {
            let table: Table = table.parse()?;
            let opts = ReproduceOptions { sizes, repeats, seed, eval: EvalOptions::default() };
            let md = reproduce(table, &opts)?;
            match out {
                Some(p) => {
                    std::fs::write(&p, &md).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    println!("wrote {}", p.display());
                }
                None => print!("{md}"),
            }
            Ok(())
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let summary = run_experiment(&cfg, base)?;
            for o in &summary.outcomes {
                println!(
                    "{}: total_sse {:.6} sse_variance {:.6e} condition {:.3e}",
                    o.method.label(),
                    o.total_sse,
                    o.sse_variance,
                    o.condition_estimate
                );
            }
            println!("wrote results to {}", cfg.out_dir.display());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return 1;
    };
    match e {
        _ if e.is_numerical() => 4,
        Error::Spec(_) | Error::DegenerateBounds { .. } => 2,
        Error::Io { .. } | Error::Json(_) | Error::Csv(_) | Error::Schema(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
