//! Mesh-weighted Gram matrices and the `A = Q R⁻¹` Koopman matrix.
//!
//! Each sample `x_k` carries the quadrature weight `Δv_k` from the mesh of the
//! sampled states, so
//!
//! ```text
//! R̂ = Σ_k Δv_k z(x_k) z(x_k)ᵀ        Q̂ = Σ_k Δv_k z(f(x_k)) z(x_k)ᵀ
//! ```
//!
//! approximate the inner products `⟨g_i, g_j⟩` and `⟨g_i ∘ f, g_j⟩` over the
//! convex hull of the data.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataset::TransitionDataset;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::mesh::{build_mesh, SimplicialMesh};
use crate::model::{lifted_matrix, relative_residual, FitMeta, GramPair, KoopmanModel, Method};

/// Condition number above which an unregularized `R̂` is reported singular.
pub const SINGULAR_CONDITION: f64 = 1.0 / (f64::EPSILON * 1e3);

/// Result of solving `A (R̂ + ridge I) = Q̂`.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub a: DMatrix<f64>,
    pub relative_residual: f64,
    pub condition_estimate: f64,
}

/// Gram matrices with explicit per-sample weights.
pub fn weighted_grams(
    dict: &Dictionary,
    states: &[Vec<f64>],
    targets: &[Vec<f64>],
    weights: &[f64],
) -> Result<GramPair> {
    if states.len() != weights.len() || targets.len() != weights.len() {
        return Err(Error::MeshDataMismatch {
            mesh_nodes: weights.len(),
            data_points: states.len(),
        });
    }
    for x in states.iter().chain(targets) {
        dict.check_input(x)?;
    }
    let z = lifted_matrix(dict, states);
    let zf = lifted_matrix(dict, targets);
    let mut zw = z.clone();
    for (mut col, &w) in zw.column_iter_mut().zip(weights) {
        col *= w;
    }
    let r = &zw * z.transpose();
    let r = (&r + r.transpose()) * 0.5;
    let q = &zf * zw.transpose();
    let condition_estimate = condition(&r);
    Ok(GramPair {
        r,
        q,
        condition_estimate,
        node_count: weights.len(),
        hull_volume: weights.iter().sum(),
    })
}

/// `R̂` and `Q̂` using the node volumes of `mesh`, whose node `k` must be sample `k`.
pub fn compute_grams(
    data: &TransitionDataset,
    dict: &Dictionary,
    mesh: &SimplicialMesh,
) -> Result<GramPair> {
    if mesh.node_count() != data.len() {
        return Err(Error::MeshDataMismatch {
            mesh_nodes: mesh.node_count(),
            data_points: data.len(),
        });
    }
    let mut g = weighted_grams(dict, data.states(), data.targets(), mesh.node_volumes())?;
    g.hull_volume = mesh.hull_volume();
    Ok(g)
}

fn condition(r: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(r.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l.abs());
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `A = Q̂ (R̂ + ridge I)⁻¹` by factoring the symmetric system once.
pub fn assemble(grams: &GramPair, ridge: f64) -> Result<Assembled> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::Spec(format!("ridge must be a nonnegative number, got {ridge}")));
    }
    let m = grams.r.nrows();
    if grams.r.ncols() != m || grams.q.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: grams.r.ncols(),
        });
    }
    let mut lhs = grams.r.clone();
    for i in 0..m {
        lhs[(i, i)] += ridge;
    }
    let condition_estimate = if ridge == 0.0 {
        grams.condition_estimate
    } else {
        condition(&lhs)
    };
    if ridge == 0.0 && !(condition_estimate <= SINGULAR_CONDITION) {
        return Err(Error::SingularGram {
            condition: condition_estimate,
        });
    }
    // (R + λI) Aᵀ = Qᵀ since R is symmetric
    let rhs = grams.q.transpose();
    let at = match lhs.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => lhs
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularGram {
                condition: condition_estimate,
            })?,
    };
    let a = at.transpose();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularGram {
            condition: condition_estimate,
        });
    }
    let relative_residual = relative_residual(&a, &lhs, &grams.q);
    Ok(Assembled {
        a,
        relative_residual,
        condition_estimate,
    })
}

/// Mesh → node volumes → weighted Grams → `A`.
pub fn fit_dde(data: &TransitionDataset, dict: &Dictionary, ridge: f64) -> Result<KoopmanModel> {
    if data.dim() != dict.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.input_dim(),
            got: data.dim(),
        });
    }
    let (nodes, merged) = data.deduplicated()?;
    let mesh = build_mesh(&nodes.state_cloud()?)?;
    let grams = compute_grams(&nodes, dict, &mesh)?;
    let solved = assemble(&grams, ridge)?;

    let tol = mesh.hull_tolerance();
    let outside = data
        .targets()
        .iter()
        .filter(|y| !mesh.hull_contains(y, tol))
        .count();
    if outside > 0 {
        log::debug!("{outside} of {} transition targets fall outside the hull", data.len());
    }

    let meta = FitMeta {
        samples: data.len(),
        nodes: Some(mesh.node_count()),
        merged_duplicates: Some(merged),
        hull_volume: Some(mesh.hull_volume()),
        targets_outside_hull: Some(outside),
        dropped_slivers: Some(mesh.dropped_slivers()),
        ridge: Some(ridge),
        condition_estimate: solved.condition_estimate,
        relative_residual: solved.relative_residual,
        dataset: data.provenance.clone(),
        ..FitMeta::default()
    };
    Ok(KoopmanModel {
        method: Method::Dde,
        dict: dict.clone(),
        a: solved.a,
        grams: Some(grams),
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::Bounds;
    use crate::dictionary::Block;
    use crate::mesh::PointCloud;
    use crate::model::Rollout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_dataset<F: Fn(&[f64]) -> Vec<f64>>(bounds: &Bounds, side: usize, f: F) -> TransitionDataset {
        let states = bounds.grid(&[side, side]);
        let targets = states.iter().map(|x| f(x)).collect();
        TransitionDataset::new(states, targets).unwrap()
    }

    fn linear_map(x: &[f64]) -> Vec<f64> {
        vec![0.9 * x[0], 0.8 * x[1]]
    }

    #[test]
    fn constant_observable_integrates_volume() {
        let b = Bounds::new(vec![0.0, 0.0], vec![2.0, 3.0]).unwrap();
        let data = grid_dataset(&b, 7, |x| vec![x[1], -x[0]]);
        let dict = Dictionary::composite(2, vec![Block::Constant]).unwrap();
        let mesh = build_mesh(&data.state_cloud().unwrap()).unwrap();
        let g = compute_grams(&data, &dict, &mesh).unwrap();
        assert!((g.r[(0, 0)] - 6.0).abs() < 1e-12);
        assert!((g.q[(0, 0)] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn identity_dynamics_give_q_equal_r_and_identity_a() {
        let b = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let data = grid_dataset(&b, 12, |x| x.to_vec());
        let dict = Dictionary::rbf_grid(&[3, 3], &b, Default::default()).unwrap();
        let mesh = build_mesh(&data.state_cloud().unwrap()).unwrap();
        let g = compute_grams(&data, &dict, &mesh).unwrap();
        // R̂ is symmetrized, so equality holds to rounding
        assert!((&g.q - &g.r).amax() <= 1e-14 * g.r.amax());
        let a = assemble(&g, 0.0).unwrap().a;
        let err = (&a - DMatrix::<f64>::identity(11, 11)).amax();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn second_moment_matches_analytic_integral() {
        // ∫_[0,1]² x₁² dx = 1/3
        let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let data = grid_dataset(&b, 200, |x| vec![x[0] * x[1], 1.0 - x[0]]);
        let dict = Dictionary::composite(
            2,
            vec![Block::Mlp(crate::dictionary::MlpWeights {
                input_dim: 2,
                layers: vec![crate::dictionary::DenseLayer {
                    w: vec![vec![1.0, 0.0]],
                    b: vec![0.0],
                    act: crate::dictionary::Activation::Linear,
                }],
            })],
        )
        .unwrap();
        let mesh = build_mesh(&data.state_cloud().unwrap()).unwrap();
        let g = compute_grams(&data, &dict, &mesh).unwrap();
        assert!((g.r[(0, 0)] - 1.0 / 3.0).abs() < 1e-3);
    }

    #[test]
    fn linear_map_recovered() {
        let b = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let data = grid_dataset(&b, 50, linear_map);
        let model = fit_dde(&data, &Dictionary::state_only(2).unwrap(), 0.0).unwrap();
        let lambda = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.8]);
        assert!((&model.a - &lambda).amax() < 1e-3);
        let next = model.predict(&[0.5, 0.5], 1, Rollout::Lifted).unwrap();
        assert!((next[0][0] - 0.45).abs() < 1e-3 && (next[0][1] - 0.40).abs() < 1e-3);
        assert!(model.meta.relative_residual <= 1e-8);
    }

    #[test]
    fn duplicated_observable_is_singular() {
        let b = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let data = grid_dataset(&b, 10, linear_map);
        let dict = Dictionary::composite(2, vec![Block::State, Block::State]).unwrap();
        assert!(matches!(
            fit_dde(&data, &dict, 0.0),
            Err(Error::SingularGram { .. })
        ));
        // a ridge makes it solvable
        assert!(fit_dde(&data, &dict, 1e-6).is_ok());
    }

    #[test]
    fn single_simplex_dataset() {
        let data = TransitionDataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.1, 0.0], vec![0.9, 0.1], vec![0.0, 0.8]],
        )
        .unwrap();
        let model = fit_dde(&data, &Dictionary::state_only(2).unwrap(), 0.0).unwrap();
        assert_eq!(model.a.shape(), (2, 2));
        let g = model.grams.as_ref().unwrap();
        assert!((g.hull_volume - 0.5).abs() < 1e-15);
        // rank(R̂) ≤ 3 < m
        let dict = Dictionary::rbf_grid(&[2, 2], &Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(), Default::default()).unwrap();
        assert!(matches!(fit_dde(&data, &dict, 0.0), Err(Error::SingularGram { .. })));
    }

    #[test]
    fn duplicate_rows_do_not_change_the_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let states: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let targets = states.iter().map(|x| vec![x[1].sin(), x[0] * x[1]]).collect();
        let data = TransitionDataset::new(states, targets).unwrap();
        let doubled = data.concat(&data).unwrap();
        let b = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let dict = Dictionary::rbf_grid(&[3, 3], &b, Default::default()).unwrap();
        let a1 = fit_dde(&data, &dict, 0.0).unwrap().a;
        let a2 = fit_dde(&doubled, &dict, 0.0).unwrap().a;
        assert_eq!(a1, a2);
    }

    #[test]
    fn mismatched_mesh_rejected() {
        let b = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let data = grid_dataset(&b, 5, |x| x.to_vec());
        let other = PointCloud::new(2, b.grid(&[4, 4])).unwrap();
        let mesh = build_mesh(&other).unwrap();
        assert!(matches!(
            compute_grams(&data, &Dictionary::state_only(2).unwrap(), &mesh),
            Err(Error::MeshDataMismatch { mesh_nodes: 16, data_points: 25 })
        ));
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let states: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.random_range(-0.8..0.8), rng.random_range(-2.0..2.0)])
            .collect();
        let targets = states.iter().map(|x| vec![x[0] + 0.1 * x[1], x[1] - 0.1 * x[0].sin()]).collect();
        let data = TransitionDataset::new(states, targets).unwrap();
        let dict = Dictionary::rbf_grid(&[5, 5], &Bounds::pendulum_default(), Default::default()).unwrap();
        let model = fit_dde(&data, &dict, 0.0).unwrap();
        let r = &model.grams.as_ref().unwrap().r;
        assert_eq!(r, &r.transpose());
        let eig = SymmetricEigen::new(r.clone()).eigenvalues;
        let max = eig.max();
        assert!(eig.min() >= -1e-10 * max);
    }
}
