use ndarray::{s, Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::constraints::{ConstraintKind, ConstraintTerm};
use super::objective::evaluate;
use super::{Coefficients, ConstraintSet, ModelSpec, Smoothing};
use crate::data::{partition, Dataset, Partition};
use crate::error::{FairError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `value ≤ bound`
    AtMost,
    /// `value ≥ bound`
    AtLeast,
}

/// One scalar inequality of a [`Problem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDescriptor<T> {
    pub kind: ConstraintKind,
    pub sf: String,
    pub direction: Direction,
    pub bound: T,
    /// Index of the underlying constraint function; the two sides of a pair share it.
    pub term: usize,
}

impl<T: Scalar> ConstraintDescriptor<T> {
    /// Violation `value − bound` (upper) or `bound − value` (lower); ≤ 0 when satisfied.
    pub fn residual(&self, value: T) -> T {
        match self.direction {
            Direction::AtMost => value - self.bound,
            Direction::AtLeast => self.bound - value,
        }
    }
}

/// An assembled in-processing problem over `θ = (β, g)`.
#[derive(Debug, Clone)]
pub struct Problem<'a, T> {
    spec: ModelSpec<T>,
    data: &'a Dataset<T>,
    partitions: Vec<(String, Partition)>,
    terms: Vec<ConstraintTerm<T>>,
    constraints: Vec<ConstraintDescriptor<T>>,
}

/// Builds the objective and the `±c` constraint pairs for `spec` on `d`.
pub fn assemble_problem<'a, T: Scalar>(spec: &ModelSpec<T>, d: &'a Dataset<T>) -> Result<Problem<'a, T>> {
    spec.validate()?;
    d.require_labels()?;
    let mixed = spec.family.is_mixed();
    if mixed {
        d.require_groups()?;
    }
    let kinds: &[ConstraintKind] = match spec.constraint {
        ConstraintSet::None => &[],
        ConstraintSet::Di => &[ConstraintKind::Di],
        ConstraintSet::Fnr => &[ConstraintKind::Fnr],
        ConstraintSet::Fpr => &[ConstraintKind::Fpr],
        ConstraintSet::Dm => &[ConstraintKind::Fnr, ConstraintKind::Fpr],
    };
    let mut partitions = Vec::new();
    let mut terms = Vec::new();
    let mut constraints = Vec::new();
    for sf in &spec.sf_names {
        d.sensitive(sf)?;
        if kinds.is_empty() {
            continue;
        }
        partitions.push((sf.clone(), partition(d, sf, mixed)?));
        for &kind in kinds {
            let term = terms.len();
            terms.push(ConstraintTerm::build(kind, d, sf, mixed)?);
            for (direction, bound) in [(Direction::AtMost, spec.c), (Direction::AtLeast, -spec.c)] {
                constraints.push(ConstraintDescriptor { kind, sf: sf.clone(), direction, bound, term });
            }
        }
    }
    Ok(Problem { spec: spec.clone(), data: d, partitions, terms, constraints })
}

impl<'a, T: Scalar> Problem<'a, T> {
    pub fn spec(&self) -> &ModelSpec<T> {
        &self.spec
    }

    pub fn data(&self) -> &'a Dataset<T> {
        self.data
    }

    pub fn constraints(&self) -> &[ConstraintDescriptor<T>] {
        &self.constraints
    }

    pub fn partitions(&self) -> &[(String, Partition)] {
        &self.partitions
    }

    pub fn n_groups(&self) -> usize {
        if self.spec.family.is_mixed() {
            self.data.groups().map_or(0, |g| g.n_groups())
        } else {
            0
        }
    }

    /// Length of `θ`.
    pub fn n_params(&self) -> usize {
        self.data.width() + self.n_groups()
    }

    fn split<'t>(&self, theta: &'t Array1<T>) -> (ArrayView1<'t, T>, Option<ArrayView1<'t, T>>) {
        let w = self.data.width();
        let beta = theta.slice(s![..w]);
        let g = self.spec.family.is_mixed().then(|| theta.slice(s![w..]));
        (beta, g)
    }

    pub fn coefficients(&self, theta: &Array1<T>) -> Coefficients<T> {
        let (beta, g) = self.split(theta);
        Coefficients {
            beta: beta.to_vec(),
            g: g.map(|g| g.to_vec()),
            groups: g.and_then(|_| self.data.groups().map(|gr| gr.names().to_vec())),
        }
    }

    pub fn linear_predictor(&self, theta: &Array1<T>) -> Array1<T> {
        let (beta, g) = self.split(theta);
        let mut lp = self.data.features().dot(&beta);
        if let (Some(g), Some(groups)) = (g, self.data.groups()) {
            for (v, &id) in lp.iter_mut().zip(groups.ids()) {
                *v += g[id];
            }
        }
        lp
    }

    /// Chain rule from per-row derivatives to `θ`.
    fn lp_grad_to_theta(&self, dlp: &Array1<T>) -> Array1<T> {
        let w = self.data.width();
        let mut out = Array1::zeros(self.n_params());
        out.slice_mut(s![..w]).assign(&self.data.features().t().dot(dlp));
        if self.spec.family.is_mixed() {
            if let Some(groups) = self.data.groups() {
                for (&d, &id) in dlp.iter().zip(groups.ids()) {
                    out[w + id] += d;
                }
            }
        }
        out
    }

    /// Objective value and gradient at `θ`.
    pub fn objective(&self, theta: &Array1<T>, smoothing: Smoothing<T>) -> (T, Array1<T>) {
        let (beta, g) = self.split(theta);
        evaluate(self.spec.family, self.spec.mu, self.spec.lambda, beta, g, self.data, smoothing)
            .expect("problem validated at assembly")
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Each constraint function's value and gradient at `θ`.
    pub fn term_values(&self, theta: &Array1<T>, smoothing: Smoothing<T>) -> Vec<(T, Array1<T>)> {
        if self.terms.is_empty() {
            return Vec::new();
        }
        let lp = self.linear_predictor(theta);
        self.terms
            .iter()
            .map(|t| {
                let (v, dlp) = t.eval(&lp, smoothing);
                (v, self.lp_grad_to_theta(&dlp))
            })
            .collect()
    }

    /// Exact value of the constraint function behind each descriptor.
    pub fn constraint_values(&self, theta: &Array1<T>) -> Vec<T> {
        let lp = self.linear_predictor(theta);
        let values: Vec<T> = self.terms.iter().map(|t| t.value(&lp)).collect();
        self.constraints.iter().map(|c| values[c.term]).collect()
    }

    /// Extra tightening each descriptor needs so that satisfying its smoothed
    /// form implies the exact form.
    pub(crate) fn smoothing_slack(&self, smoothing: Smoothing<T>) -> Vec<T> {
        self.constraints
            .iter()
            .map(|c| {
                let (upper, lower) = self.terms[c.term].smoothing_slack(smoothing);
                match c.direction {
                    Direction::AtMost => upper,
                    Direction::AtLeast => lower,
                }
            })
            .collect()
    }
}

impl<T: Scalar> Problem<'_, T> {
    /// Checks a candidate `θ` has the right length.
    pub fn check_theta(&self, theta: &Array1<T>) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(FairError::LengthMismatch { expected: self.n_params(), got: theta.len() });
        }
        Ok(())
    }
}
