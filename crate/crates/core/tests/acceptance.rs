//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! `cargo test -p kdde-core --test acceptance`

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kdde::dynamics::{generate, DatasetSpec, PendulumParams};
use kdde::edmd::{fit_edmd, DEFAULT_RCOND};
use kdde::encoder::fit_dde;
use kdde::eval::{compare_methods, dataset_dictionary, default_entries, q_convergence, EvalOptions};
use kdde::experiments::{
    gaussian_sweep, order_sweep, GAUSSIAN_CENTERS, GAUSSIAN_REPEATS, ORDER_DATASET_SIZE, ORDER_SHAPES, TRAJECTORY_SIZES,
    UNIFORM_SIZES,
};
use kdde::{build_mesh, Bounds, Dictionary, PointCloud, TransitionDataset};
use nalgebra::DMatrix;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn quadrature() -> Outcome {
    // ∫₀¹∫₀¹ x₁²x₂ + 1 = 7/6
    let exact = 7.0 / 6.0;
    let start = Instant::now();
    let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, tol) in [(100usize, 0.05), (1000, 0.01), (10000, 0.005)] {
        let side = (n as f64).sqrt().floor() as usize;
        let mesh = build_mesh(&PointCloud::new(2, b.grid(&[side, side])).unwrap()).unwrap();
        let got = mesh.integrate(|x| x[0] * x[0] * x[1] + 1.0);
        let err = (got - exact).abs() / exact;
        pass &= err < tol;
        parts.push(format!("N={} rel.err {err:.2e} (< {tol})", side * side));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(10);
    parts.push(format!("{:.2}s", elapsed.as_secs_f64()));
    outcome(pass, parts.join(", "))
}

fn linear_system() -> Outcome {
    let pts = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap().grid(&[50, 50]);
    let targets = pts.iter().map(|x| vec![0.9 * x[0], 0.8 * x[1]]).collect();
    let data = TransitionDataset::new(pts, targets).unwrap();
    let dict = Dictionary::state_only(2).unwrap();
    let lambda = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.8]);
    let dde = fit_dde(&data, &dict, 0.0).unwrap().a;
    let edmd = fit_edmd(&data, &dict, DEFAULT_RCOND).unwrap().a;
    let (e_dde, e_edmd, gap) = ((&dde - &lambda).amax(), (&edmd - &lambda).amax(), (&dde - &edmd).amax());
    outcome(
        e_dde < 1e-3 && e_edmd < 1e-3 && gap <= 1e-8,
        format!("|A_dde-Λ| {e_dde:.1e}, |A_edmd-Λ| {e_edmd:.1e}, |A_dde-A_edmd| {gap:.1e}"),
    )
}

fn uniform_parity(opts: &EvalOptions, p: &PendulumParams) -> Outcome {
    let mut pass = true;
    let mut dde_wins = 0;
    let mut parts = Vec::new();
    for n in UNIFORM_SIZES {
        let start = Instant::now();
        let c = compare_methods(&generate(&DatasetSpec::uniform(n), p).unwrap(), opts).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let rel = (c.dde.total_sse - c.edmd.total_sse).abs() / c.edmd.total_sse;
        pass &= rel < 0.15 && secs < 120.0;
        if c.dde.total_sse <= c.edmd.total_sse {
            dde_wins += 1;
        }
        parts.push(format!(
            "N={n}: EDMD {:.4} DDE {:.4} gap {:.1}% {secs:.1}s",
            c.edmd.total_sse,
            c.dde.total_sse,
            100.0 * rel
        ));
    }
    pass &= dde_wins >= 3;
    parts.push(format!("DDE <= EDMD in {dde_wins}/4"));
    outcome(pass, parts.join("; "))
}

struct GaussianResults {
    table: Vec<kdde::experiments::CenterRow>,
}

fn gaussian_robustness(g: &GaussianResults) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &g.table {
        for r in &c.rows {
            if c.center != [0.0, 0.0] {
                pass &= r.dde_total < r.edmd_total;
            }
            parts.push(format!(
                "{:?} N={}: EDMD {:.4} DDE {:.4}",
                c.center, r.size, r.edmd_total, r.dde_total
            ));
        }
    }
    let shifted = g.table.iter().find(|c| c.center == [0.8, 0.0]).unwrap();
    let gaps: Vec<f64> = shifted.rows.iter().map(|r| r.edmd_total - r.dde_total).collect();
    let widens = gaps[1] > gaps[0];
    pass &= widens;
    parts.push(format!("[0.8, 0] EDMD-DDE gap {:.4} -> {:.4}", gaps[0], gaps[1]));
    outcome(pass, parts.join("; "))
}

fn error_distribution(g: &GaussianResults, opts: &EvalOptions, p: &PendulumParams) -> Outcome {
    let top = g.table.iter().find(|c| c.center == [0.0, 2.0]).unwrap();
    let last = top.rows.last().unwrap();
    let mut pass = last.edmd_variance > last.dde_variance;
    let mut parts = vec![format!(
        "gaussian [0,2] N={}: var EDMD {:.3e} DDE {:.3e}",
        last.size, last.edmd_variance, last.dde_variance
    )];
    for n in TRAJECTORY_SIZES.into_iter().filter(|&n| n >= 2500) {
        let c = compare_methods(&generate(&DatasetSpec::trajectories(n, 0), p).unwrap(), opts).unwrap();
        pass &= c.dde.sse_variance < c.edmd.sse_variance;
        parts.push(format!(
            "traj N={n}: var EDMD {:.3e} DDE {:.3e}",
            c.edmd.sse_variance, c.dde.sse_variance
        ));
    }
    outcome(pass, parts.join("; "))
}

fn q_diagonal_convergence(opts: &EvalOptions, p: &PendulumParams) -> Outcome {
    let largest = *TRAJECTORY_SIZES.last().unwrap();
    let template = DatasetSpec::trajectories(largest, 0);
    let dict = dataset_dictionary(&generate(&template, p).unwrap(), &opts.rbf_shape, opts.width).unwrap();
    let entries = default_entries(&dict);
    let trace = q_convergence(&TRAJECTORY_SIZES, &template, p, &dict, &entries).unwrap();
    let changes = trace.last_relative_change();
    let pass = changes.iter().all(|&c| c < 0.01);
    let parts: Vec<String> = entries
        .iter()
        .zip(&changes)
        .map(|(e, c)| format!("{e} {:.2e}", c))
        .collect();
    outcome(pass, format!("relative change N=10000->25000: {}", parts.join(", ")))
}

fn order_trend(opts: &EvalOptions) -> Outcome {
    let shapes: Vec<Vec<usize>> = ORDER_SHAPES.iter().map(|s| s.to_vec()).collect();
    let rows = order_sweep(ORDER_DATASET_SIZE, &shapes, 0, opts).unwrap();
    let mut pass = rows.iter().all(|r| r.dde_total < r.edmd_total);
    pass &= rows.windows(2).all(|w| w[1].dde_total < w[0].dde_total);
    let parts: Vec<String> = rows
        .iter()
        .map(|r| format!("m={}: EDMD {:.4} DDE {:.4}", r.observables, r.edmd_total, r.dde_total))
        .collect();
    outcome(pass, parts.join("; "))
}

fn mesh_invariants() -> Outcome {
    match common::mesh_invariant_suite(2024, 50) {
        Ok(()) => outcome(true, "50 clouds: volume conservation, empty circumcircles, permutation invariance".into()),
        Err(e) => outcome(false, e),
    }
}

fn main() -> ExitCode {
    let opts = EvalOptions::default();
    let p = opts.params;
    let mut failed = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    };

    report("quadrature convergence", quadrature());
    report("linear-system exactness", linear_system());
    report("uniform-data parity", uniform_parity(&opts, &p));
    let gaussian = GaussianResults {
        table: gaussian_sweep(&GAUSSIAN_CENTERS, &[1000, 25000], GAUSSIAN_REPEATS, 0, &opts).unwrap(),
    };
    report("gaussian-center robustness", gaussian_robustness(&gaussian));
    report("error distribution", error_distribution(&gaussian, &opts, &p));
    report("Q diagonal convergence", q_diagonal_convergence(&opts, &p));
    report("dictionary order trend", order_trend(&opts));
    report("mesh invariant suite", mesh_invariants());

    if failed == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
