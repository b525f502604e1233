use ndarray::{Array1, ArrayView1};

use super::{Family, Smoothing};
use crate::data::Dataset;
use crate::error::{FairError, Result};
use crate::scalar::{sigmoid, softplus, Scalar};

/// Probability clip applied inside the logistic loss.
const PROB_CLIP: f64 = 1e-12;

/// Negative log-likelihood of one row as a function of its margin `y * lp`,
/// returned with its derivative with respect to `lp`.
fn logistic_loss<T: Scalar>(y: T, lp: T) -> (T, T) {
    let eps = T::lit(PROB_CLIP);
    let z_hi = (T::one() - eps).ln() - eps.ln();
    let z = y * lp;
    if z < -z_hi {
        (-eps.ln(), T::zero())
    } else if z > z_hi {
        (-(-eps).ln_1p(), T::zero())
    } else {
        (softplus(-z), -y * sigmoid(-z))
    }
}

/// Shared evaluator: objective value and gradient over `(beta, g)`.
pub(crate) fn evaluate<T: Scalar>(
    family: Family,
    mu: T,
    lambda: T,
    beta: ArrayView1<'_, T>,
    g: Option<ArrayView1<'_, T>>,
    d: &Dataset<T>,
    smoothing: Smoothing<T>,
) -> Result<(T, Array1<T>)> {
    let y = d.require_labels()?;
    let width = d.width();
    if beta.len() != width {
        return Err(FairError::WidthMismatch { expected: width, got: beta.len() });
    }
    let group_ids = match (family.is_mixed(), g) {
        (true, Some(g)) => {
            let groups = d.require_groups()?;
            if groups.n_groups() != g.len() {
                return Err(FairError::LengthMismatch { expected: groups.n_groups(), got: g.len() });
            }
            Some(groups.ids())
        }
        (true, None) => return Err(FairError::MissingGroups),
        (false, _) => None,
    };
    let k = g.map_or(0, |g| g.len());
    let mut grad = Array1::<T>::zeros(width + k);
    let mut value = T::zero();
    let x = d.features();

    for (i, row) in x.rows().into_iter().enumerate() {
        let yi = if y[i] == 1 { T::one() } else { -T::one() };
        let mut lp = row.dot(&beta);
        if let (Some(ids), Some(g)) = (group_ids, g) {
            lp += g[ids[i]];
        }
        let (loss, dlp) = if family.is_logistic() {
            logistic_loss(yi, lp)
        } else {
            let (h, dh) = smoothing.hinge(T::one() - yi * lp);
            (mu * h, -mu * yi * dh)
        };
        value += loss;
        if dlp != T::zero() {
            grad.slice_mut(ndarray::s![..width]).scaled_add(dlp, &row);
            if let Some(ids) = group_ids {
                grad[width + ids[i]] += dlp;
            }
        }
    }

    if !family.is_logistic() {
        value += T::lit(0.5) * beta.dot(&beta);
        grad.slice_mut(ndarray::s![..width]).scaled_add(T::one(), &beta);
    }
    if let Some(g) = g {
        value += lambda * g.dot(&g);
        grad.slice_mut(ndarray::s![width..]).scaled_add(T::lit(2.0) * lambda, &g);
    }
    Ok((value, grad))
}

/// Logistic negative log-likelihood and gradient.
pub fn lr_objective<T: Scalar>(beta: ArrayView1<'_, T>, d: &Dataset<T>) -> Result<(T, Array1<T>)> {
    evaluate(Family::Lr, T::one(), T::one(), beta, None, d, Smoothing::Exact)
}

/// `½‖β‖² + μ Σ max(0, 1 − y·βᵀx)`, slack variables eliminated. With
/// [`Smoothing::Exact`] the returned gradient is a subgradient.
pub fn svm_objective<T: Scalar>(
    beta: ArrayView1<'_, T>,
    d: &Dataset<T>,
    mu: T,
    smoothing: Smoothing<T>,
) -> Result<(T, Array1<T>)> {
    evaluate(Family::Svm, mu, T::one(), beta, None, d, smoothing)
}

/// Logistic loss with a random intercept per group plus `λ Σ g²`.
/// The gradient covers `(β, g)` concatenated.
pub fn melr_objective<T: Scalar>(
    beta: ArrayView1<'_, T>,
    g: ArrayView1<'_, T>,
    d: &Dataset<T>,
    lambda: T,
) -> Result<(T, Array1<T>)> {
    evaluate(Family::Melr, T::one(), lambda, beta, Some(g), d, Smoothing::Exact)
}

/// Hinge loss with random intercepts; `‖β‖²` excludes `g`.
pub fn mesvm_objective<T: Scalar>(
    beta: ArrayView1<'_, T>,
    g: ArrayView1<'_, T>,
    d: &Dataset<T>,
    mu: T,
    lambda: T,
    smoothing: Smoothing<T>,
) -> Result<(T, Array1<T>)> {
    evaluate(Family::Mesvm, mu, lambda, beta, Some(g), d, smoothing)
}
