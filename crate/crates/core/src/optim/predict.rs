use std::collections::HashMap;

use ndarray::{Array1, ArrayView1};

use super::{Coefficients, Family};
use crate::data::Dataset;
use crate::error::{FairError, Result};
use crate::scalar::{sigmoid, Scalar};

/// `βᵀx` per row, plus the row's group effect when `coeffs.g` is set.
/// Rows whose group was not seen in training get an effect of 0.
pub fn linear_predictor<T: Scalar>(coeffs: &Coefficients<T>, d: &Dataset<T>) -> Result<Array1<T>> {
    if coeffs.beta.len() != d.width() {
        return Err(FairError::WidthMismatch { expected: coeffs.beta.len(), got: d.width() });
    }
    let beta = ArrayView1::from(coeffs.beta.as_slice());
    let mut lp = d.features().dot(&beta);
    if let Some(g) = &coeffs.g {
        let groups = d.require_groups()?;
        let names = coeffs.groups.as_ref().ok_or(FairError::MissingGroups)?;
        if names.len() != g.len() {
            return Err(FairError::LengthMismatch { expected: g.len(), got: names.len() });
        }
        let index: HashMap<&str, usize> = names.iter().enumerate().map(|(k, n)| (n.as_str(), k)).collect();
        let effect: Vec<T> =
            groups.names().iter().map(|name| index.get(name.as_str()).map_or(T::zero(), |&k| g[k])).collect();
        for (v, &id) in lp.iter_mut().zip(groups.ids()) {
            *v += effect[id];
        }
    }
    Ok(lp)
}

/// Probabilities for every row: the logistic function of the linear
/// predictor. The SVM families use the same link on their margin.
pub fn predict_proba<T: Scalar>(coeffs: &Coefficients<T>, d: &Dataset<T>, family: Family) -> Result<Vec<T>> {
    if family.is_mixed() && coeffs.g.is_none() {
        return Err(FairError::InvalidParameter(format!("{} coefficients lack group effects", family.name())));
    }
    let fixed_only;
    let coeffs = if family.is_mixed() {
        coeffs
    } else {
        fixed_only = Coefficients::fixed(coeffs.beta.clone());
        &fixed_only
    };
    Ok(linear_predictor(coeffs, d)?.iter().map(|&z| sigmoid(z)).collect())
}
