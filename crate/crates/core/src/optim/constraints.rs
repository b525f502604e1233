use ndarray::{Array1, ArrayView1};

use super::{Coefficients, Smoothing};
use crate::data::{partition, Dataset, Octet};
use crate::error::Result;
use crate::optim::linear_predictor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// Covariance between the sensitive feature and the linear predictor.
    Di,
    /// Weighted `min(0, lp)` sums over positives.
    Fnr,
    /// Weighted `min(0, -lp)` sums over negatives.
    Fpr,
}

/// One constraint function `Σ_i w_i φ(σ·lp_i)` over selected rows, where
/// `φ` is the identity for [`ConstraintKind::Di`] and `min(0, ·)` otherwise.
#[derive(Debug, Clone)]
pub(crate) struct ConstraintTerm<T> {
    pub kind: ConstraintKind,
    rows: Vec<usize>,
    weights: Vec<T>,
    /// Sum of positive weights and of |negative weights|.
    positive_mass: T,
    negative_mass: T,
}

impl<T: Scalar> ConstraintTerm<T> {
    /// Builds the term from the data. With `grouped`, rows are collected from
    /// the per-group octets; the category weights `|S0|/n`, `|S1|/n` are global.
    pub fn build(kind: ConstraintKind, d: &Dataset<T>, sf: &str, grouped: bool) -> Result<Self> {
        let n = T::from_count(d.n_rows());
        let mut rows = Vec::new();
        let mut weights = Vec::new();
        match kind {
            ConstraintKind::Di => {
                let s = d.sensitive(sf)?;
                let mean = T::from_count(s.iter().filter(|&&v| v == 1).count()) / n;
                for (i, &si) in s.iter().enumerate() {
                    rows.push(i);
                    weights.push((T::from_count(usize::from(si)) - mean) / n);
                }
            }
            ConstraintKind::Fnr | ConstraintKind::Fpr => {
                let part = partition(d, sf, grouped)?;
                let w1 = T::from_count(part.global.s0.len()) / n;
                let w0 = -T::from_count(part.global.s1.len()) / n;
                let octets: Vec<&Octet> = match &part.per_group {
                    Some(per) => per.iter().collect(),
                    None => vec![&part.global],
                };
                for o in octets {
                    let (one, zero) = if kind == ConstraintKind::Fnr { (&o.dp1, &o.dp0) } else { (&o.dn1, &o.dn0) };
                    for &i in one {
                        rows.push(i);
                        weights.push(w1);
                    }
                    for &i in zero {
                        rows.push(i);
                        weights.push(w0);
                    }
                }
            }
        }
        let positive_mass = weights.iter().filter(|w| **w > T::zero()).fold(T::zero(), |a, &w| a + w);
        let negative_mass = weights.iter().filter(|w| **w < T::zero()).fold(T::zero(), |a, &w| a - w);
        Ok(Self { kind, rows, weights, positive_mass, negative_mass })
    }

    fn sign(&self) -> T {
        if self.kind == ConstraintKind::Fpr {
            -T::one()
        } else {
            T::one()
        }
    }

    /// Value and derivative with respect to every row's linear predictor.
    pub fn eval(&self, lp: &Array1<T>, smoothing: Smoothing<T>) -> (T, Array1<T>) {
        let sign = self.sign();
        let mut value = T::zero();
        let mut dlp = Array1::zeros(lp.len());
        for (&i, &w) in self.rows.iter().zip(&self.weights) {
            let (phi, dphi) = match self.kind {
                ConstraintKind::Di => (lp[i], T::one()),
                _ => smoothing.min0(sign * lp[i]),
            };
            value += w * phi;
            dlp[i] += w * dphi * sign;
        }
        (value, dlp)
    }

    pub fn value(&self, lp: &Array1<T>) -> T {
        self.eval(lp, Smoothing::Exact).0
    }

    /// Bounds on how far the smoothed value can sit from the exact one:
    /// `exact ≤ smoothed + upper` and `exact ≥ smoothed − lower`.
    pub fn smoothing_slack(&self, smoothing: Smoothing<T>) -> (T, T) {
        if self.kind == ConstraintKind::Di {
            return (T::zero(), T::zero());
        }
        let gap = smoothing.min0_gap();
        (gap * self.positive_mass, gap * self.negative_mass)
    }
}

fn exact_value<T: Scalar>(
    kind: ConstraintKind,
    beta: ArrayView1<'_, T>,
    g: Option<ArrayView1<'_, T>>,
    d: &Dataset<T>,
    sf: &str,
) -> Result<T> {
    let coeffs = Coefficients {
        beta: beta.to_vec(),
        g: g.map(|g| g.to_vec()),
        groups: g.and_then(|_| d.groups().map(|gr| gr.names().to_vec())),
    };
    let lp = linear_predictor(&coeffs, d)?;
    let term = ConstraintTerm::build(kind, d, sf, g.is_some())?;
    Ok(term.value(&lp))
}

/// `(1/n) Σ (s − s̄)·lp`. Pass `g` for the mixed form.
pub fn di_constraint_value<T: Scalar>(
    beta: ArrayView1<'_, T>,
    g: Option<ArrayView1<'_, T>>,
    d: &Dataset<T>,
    sf: &str,
) -> Result<T> {
    exact_value(ConstraintKind::Di, beta, g, d, sf)
}

/// `(|S0|/n) Σ_{DP1} min(0, lp) − (|S1|/n) Σ_{DP0} min(0, lp)`.
pub fn fnr_constraint_value<T: Scalar>(
    beta: ArrayView1<'_, T>,
    g: Option<ArrayView1<'_, T>>,
    d: &Dataset<T>,
    sf: &str,
) -> Result<T> {
    exact_value(ConstraintKind::Fnr, beta, g, d, sf)
}

/// `(|S0|/n) Σ_{DN1} min(0, −lp) − (|S1|/n) Σ_{DN0} min(0, −lp)`.
pub fn fpr_constraint_value<T: Scalar>(
    beta: ArrayView1<'_, T>,
    g: Option<ArrayView1<'_, T>>,
    d: &Dataset<T>,
    sf: &str,
) -> Result<T> {
    exact_value(ConstraintKind::Fpr, beta, g, d, sf)
}
