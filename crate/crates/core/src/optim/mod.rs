//! Fairness-constrained classification problems.
//!
//! Four model families share one parameter layout: the fixed coefficients
//! `beta` (one per feature column, intercept first) followed, for the mixed
//! families, by one random intercept per training group.

mod constraints;
mod objective;
mod predict;
mod problem;

pub use constraints::{di_constraint_value, fnr_constraint_value, fpr_constraint_value, ConstraintKind};
pub use objective::{lr_objective, melr_objective, mesvm_objective, svm_objective};
pub use predict::{linear_predictor, predict_proba};
pub use problem::{assemble_problem, ConstraintDescriptor, Direction, Problem};

use serde::{Deserialize, Serialize};

use crate::error::{FairError, Result};
use crate::scalar::{sigmoid, softplus, Scalar};

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lr,
    Svm,
    Melr,
    Mesvm,
}

impl Family {
    pub fn is_mixed(self) -> bool {
        matches!(self, Family::Melr | Family::Mesvm)
    }

    pub fn is_logistic(self) -> bool {
        matches!(self, Family::Lr | Family::Melr)
    }

    /// The fixed-effects family with the same loss.
    pub fn fixed(self) -> Family {
        if self.is_logistic() {
            Family::Lr
        } else {
            Family::Svm
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Lr => "lr",
            Family::Svm => "svm",
            Family::Melr => "melr",
            Family::Mesvm => "mesvm",
        }
    }
}

/// Which fairness constraints are attached to the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintSet {
    None,
    Di,
    Fnr,
    Fpr,
    /// FNR and FPR pairs together.
    Dm,
}

impl ConstraintSet {
    /// Constraint count per sensitive feature.
    pub fn count_per_feature(self) -> usize {
        match self {
            ConstraintSet::None => 0,
            ConstraintSet::Di | ConstraintSet::Fnr | ConstraintSet::Fpr => 2,
            ConstraintSet::Dm => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConstraintSet::None => "none",
            ConstraintSet::Di => "di",
            ConstraintSet::Fnr => "fnr",
            ConstraintSet::Fpr => "fpr",
            ConstraintSet::Dm => "dm",
        }
    }
}

/// Family, constraints and hyperparameters of one in-processing fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec<T> {
    pub family: Family,
    pub constraint: ConstraintSet,
    /// Constraints are replicated independently for each listed feature.
    pub sf_names: Vec<String>,
    /// Fairness threshold.
    pub c: T,
    /// Hinge weight for the SVM families.
    pub mu: T,
    /// Ridge weight on the random intercepts.
    pub lambda: T,
}

impl<T: Scalar> ModelSpec<T> {
    pub fn new(family: Family, constraint: ConstraintSet, sf_names: &[&str]) -> Self {
        Self {
            family,
            constraint,
            sf_names: sf_names.iter().map(|s| s.to_string()).collect(),
            c: T::lit(0.1),
            mu: T::one(),
            lambda: T::one(),
        }
    }

    pub fn with_c(mut self, c: T) -> Self {
        self.c = c;
        self
    }

    pub fn with_mu(mut self, mu: T) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_nan() || self.c < T::zero() {
            return Err(FairError::InvalidParameter(format!("c must be >= 0, got {}", self.c)));
        }
        if self.mu.is_nan() || self.mu <= T::zero() {
            return Err(FairError::InvalidParameter(format!("mu must be > 0, got {}", self.mu)));
        }
        if self.lambda.is_nan() || self.lambda <= T::zero() {
            return Err(FairError::InvalidParameter(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.constraint != ConstraintSet::None && self.sf_names.is_empty() {
            return Err(FairError::InvalidParameter("fairness constraints need a sensitive feature".into()));
        }
        Ok(())
    }
}

/// Fitted coefficients. `g` and `groups` are present exactly for mixed families;
/// `groups[k]` names the training group whose random intercept is `g[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients<T> {
    pub beta: Vec<T>,
    pub g: Option<Vec<T>>,
    pub groups: Option<Vec<String>>,
}

impl<T: Scalar> Coefficients<T> {
    pub fn fixed(beta: Vec<T>) -> Self {
        Self { beta, g: None, groups: None }
    }
}

/// How the nonsmooth `min(0, ·)` and hinge terms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing<T> {
    Exact,
    /// Softplus approximation with sharpness `tau`.
    Softplus(T),
}

impl<T: Scalar> Smoothing<T> {
    /// `min(0, u)` and its (sub)derivative.
    pub fn min0(self, u: T) -> (T, T) {
        match self {
            Smoothing::Exact => {
                if u < T::zero() {
                    (u, T::one())
                } else {
                    (T::zero(), T::zero())
                }
            }
            Smoothing::Softplus(tau) => (-tau * softplus(-u / tau), sigmoid(-u / tau)),
        }
    }

    /// `max(0, z)` and its (sub)derivative.
    pub fn hinge(self, z: T) -> (T, T) {
        match self {
            Smoothing::Exact => {
                if z > T::zero() {
                    (z, T::one())
                } else {
                    (T::zero(), T::zero())
                }
            }
            Smoothing::Softplus(tau) => (tau * softplus(z / tau), sigmoid(z / tau)),
        }
    }

    /// Worst-case gap between the smoothed and exact `min(0, ·)` per term.
    pub fn min0_gap(self) -> T {
        match self {
            Smoothing::Exact => T::zero(),
            Smoothing::Softplus(tau) => tau * T::lit(std::f64::consts::LN_2),
        }
    }
}
