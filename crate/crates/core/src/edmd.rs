//! Extended DMD baseline: unweighted least squares over the lifted samples.

use nalgebra::DMatrix;

use crate::dataset::TransitionDataset;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::model::{lifted_matrix, relative_residual, FitMeta, KoopmanModel, Method};

/// Default relative singular-value cutoff for the pseudoinverse.
pub const DEFAULT_RCOND: f64 = 1e-12;

/// Moore–Penrose pseudoinverse via SVD, dropping singular values below
/// `rcond × σ_max`. Returns the inverse and the retained rank.
pub fn pseudo_inverse(g: &DMatrix<f64>, rcond: f64) -> (DMatrix<f64>, usize) {
    let svd = g.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = rcond * smax;
    let mut inv = DMatrix::zeros(g.ncols(), g.nrows());
    let mut rank = 0;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            inv += vt.row(k).transpose() * u.column(k).transpose() * (1.0 / s);
        }
    }
    (inv, rank)
}

/// `A = Z′ Zᵀ (Z Zᵀ)⁺`, the minimum-norm minimizer of `Σ_t ‖z_{t+1} − A z_t‖²`.
pub fn fit_edmd(data: &TransitionDataset, dict: &Dictionary, rcond: f64) -> Result<KoopmanModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.dim() != dict.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.input_dim(),
            got: data.dim(),
        });
    }
    if !(rcond >= 0.0) {
        return Err(Error::Spec(format!("rcond must be nonnegative, got {rcond}")));
    }
    for x in data.states().iter().chain(data.targets()) {
        dict.check_input(x)?;
    }
    let z = lifted_matrix(dict, data.states());
    let zf = lifted_matrix(dict, data.targets());
    let zt = z.transpose();
    let g = &z * &zt;
    let g = (&g + g.transpose()) * 0.5;
    let h = &zf * &zt;
    let (g_pinv, rank) = pseudo_inverse(&g, rcond);
    let a = &h * &g_pinv;

    let sv = g.singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let condition_estimate = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    let meta = FitMeta {
        samples: data.len(),
        rcond: Some(rcond),
        rank: Some(rank),
        condition_estimate,
        relative_residual: relative_residual(&a, &g, &h),
        dataset: data.provenance.clone(),
        ..FitMeta::default()
    };
    Ok(KoopmanModel {
        method: Method::Edmd,
        dict: dict.clone(),
        a,
        grams: None,
        meta,
    })
}

/// `Σ_t w_t ‖z(y_t) − A z(x_t)‖²`.
pub fn weighted_objective(
    a: &DMatrix<f64>,
    dict: &Dictionary,
    data: &TransitionDataset,
    weights: Option<&[f64]>,
) -> f64 {
    let z = lifted_matrix(dict, data.states());
    let zf = lifted_matrix(dict, data.targets());
    let res = zf - a * z;
    res.column_iter()
        .enumerate()
        .map(|(t, c)| weights.map_or(1.0, |w| w[t]) * c.norm_squared())
        .sum()
}
