//! Synthetic datasets with a planted dependence on one binary sensitive
//! feature, for regular and grouped populations.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Groups, INTERCEPT};
use crate::error::{FairError, Result};
use crate::optim::Family;
use crate::scalar::{sigmoid, Scalar};

/// Name of the generated sensitive column.
pub const SENSITIVE: &str = "s";

/// Coefficients of the regular-population experiments.
pub const REGULAR_BETA: [f64; 5] = [-2.0, 0.4, 0.8, 0.5, 2.0];
/// Coefficients of the grouped-population experiments.
pub const MIXED_BETA: [f64; 5] = [-4.0, 0.4, 0.8, 0.5, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    /// Intercept first, the sensitive coefficient last, covariates between.
    pub beta_true: Vec<f64>,
    /// Label mechanism; mixed families use their fixed counterpart plus the group effect.
    pub family: Family,
    /// Number of groups; `None` for a regular population.
    pub k: Option<usize>,
    /// Standard deviation of the group effects.
    pub sigma_g: f64,
    /// Probability that `s = 1`.
    pub sf_prob: f64,
    pub seed: u64,
    /// Fraction of rows in the training split.
    pub split_frac: f64,
    /// Logistic labels by `p ≥ 0.5` instead of a Bernoulli draw.
    pub threshold_labels: bool,
}

impl SynthSpec {
    pub fn regular(family: Family, n: usize, seed: u64) -> Self {
        Self {
            n,
            beta_true: REGULAR_BETA.to_vec(),
            family,
            k: None,
            sigma_g: 0.0,
            sf_prob: 0.5,
            seed,
            split_frac: 0.01,
            threshold_labels: false,
        }
    }

    pub fn mixed(family: Family, n: usize, seed: u64) -> Self {
        Self { beta_true: MIXED_BETA.to_vec(), k: Some(100), sigma_g: 3.0, ..Self::regular(family, n, seed) }
    }

    fn n_train(&self) -> usize {
        (self.n as f64 * self.split_frac).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FairError::InvalidParameter(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.beta_true.len() < 2 {
            return bad("beta_true needs an intercept and a sensitive coefficient".into());
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return bad("beta_true must be finite".into());
        }
        if !(self.sigma_g >= 0.0 && self.sigma_g.is_finite()) {
            return bad(format!("sigma_g must be >= 0, got {}", self.sigma_g));
        }
        if !(0.0..=1.0).contains(&self.sf_prob) {
            return bad(format!("sf_prob must lie in [0, 1], got {}", self.sf_prob));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return bad(format!("split fraction must lie in (0, 1), got {}", self.split_frac));
        }
        let n_train = self.n_train();
        if n_train == 0 || n_train == self.n {
            return bad(format!("split of {} rows at {} leaves an empty side", self.n, self.split_frac));
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.n {
                return bad(format!("K must lie in [1, n], got {k}"));
            }
            if n_train < k {
                return bad(format!("training split of {n_train} rows cannot cover {k} groups"));
            }
        }
        Ok(())
    }
}

/// Train/test split of a generated population.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    /// Group label of every training row (grouped populations only).
    pub groups_train: Option<Vec<String>>,
    pub groups_test: Option<Vec<String>>,
    /// The drawn group effects, indexed like the group names `g1..gK`.
    pub effects: Option<Vec<f64>>,
}

fn group_name(k: usize) -> String {
    format!("g{}", k + 1)
}

/// Regular population: N(0,1) covariates, `s ~ Bernoulli(sf_prob)`, labels
/// from the family's prediction rule.
pub fn gen_regular<T: Scalar>(spec: &SynthSpec) -> Result<Generated<T>> {
    if spec.k.is_some() {
        return Err(FairError::InvalidParameter("gen_regular takes no group count; use gen_mixed".into()));
    }
    generate(spec)
}

/// Grouped population: as [`gen_regular`] plus a random intercept
/// `g ~ N(0, sigma_g²)` per group. Groups are assigned round-robin over a
/// seeded shuffle, so sizes differ by at most one and every group appears in
/// the training split.
pub fn gen_mixed<T: Scalar>(spec: &SynthSpec) -> Result<Generated<T>> {
    if spec.k.is_none() {
        return Err(FairError::InvalidParameter("gen_mixed needs a group count".into()));
    }
    generate(spec)
}

fn generate<T: Scalar>(spec: &SynthSpec) -> Result<Generated<T>> {
    spec.validate()?;
    let n = spec.n;
    let q = spec.beta_true.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut x = Array2::<f64>::ones((n, q));
    for i in 0..n {
        for j in 1..q - 1 {
            x[[i, j]] = rng.sample(StandardNormal);
        }
    }
    let s: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(spec.sf_prob))).collect();
    for (i, &si) in s.iter().enumerate() {
        x[[i, q - 1]] = f64::from(si);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    // Group effects come from their own stream so that sigma_g = 0 reproduces
    // the regular population exactly.
    let (group_of, effects) = match spec.k {
        Some(k) => {
            let mut g_rng = ChaCha8Rng::seed_from_u64(spec.seed);
            g_rng.set_stream(1);
            let effects: Vec<f64> = (0..k).map(|_| spec.sigma_g * g_rng.sample::<f64, _>(StandardNormal)).collect();
            let mut group_of = vec![0; n];
            for (pos, &row) in order.iter().enumerate() {
                group_of[row] = pos % k;
            }
            (Some(group_of), Some(effects))
        }
        None => (None, None),
    };

    let beta = ndarray::Array1::from(spec.beta_true.clone());
    let mut lp = x.dot(&beta);
    if let (Some(group_of), Some(effects)) = (&group_of, &effects) {
        for (v, &g) in lp.iter_mut().zip(group_of) {
            *v += effects[g];
        }
    }
    let labels: Vec<i8> = lp
        .iter()
        .map(|&z| {
            let positive = if spec.family.is_logistic() {
                let p = sigmoid(z);
                if spec.threshold_labels {
                    p >= 0.5
                } else {
                    rng.random::<f64>() < p
                }
            } else {
                z >= 0.0
            };
            if positive {
                1
            } else {
                -1
            }
        })
        .collect();

    let mut names = vec![INTERCEPT.to_string()];
    names.extend((1..q - 1).map(|j| format!("x{j}")));
    names.push(SENSITIVE.to_string());

    let n_train = spec.n_train();
    let build = |rows: &[usize]| -> Result<(Dataset<T>, Option<Vec<String>>)> {
        let features = x.select(ndarray::Axis(0), rows).mapv(T::lit);
        let y = rows.iter().map(|&i| labels[i]).collect();
        let sens = BTreeMap::from([(SENSITIVE.to_string(), rows.iter().map(|&i| s[i]).collect())]);
        let group_labels: Option<Vec<String>> =
            group_of.as_ref().map(|g| rows.iter().map(|&i| group_name(g[i])).collect());
        let groups = group_labels.as_deref().map(Groups::from_labels).transpose()?;
        Ok((Dataset::new(features, names.clone(), Some(y), sens, groups)?, group_labels))
    };
    let (train, groups_train) = build(&order[..n_train])?;
    let (test, groups_test) = build(&order[n_train..])?;
    Ok(Generated { train, test, groups_train, groups_test, effects })
}
