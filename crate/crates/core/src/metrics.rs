//! Classification and fairness metrics.
//!
//! Every fairness metric lies in `[0, 1]` with 0 meaning fair. Rates whose
//! denominator set is empty are reported as `None` rather than 0.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{FairError, Result};
use crate::scalar::Scalar;

/// Four-way tally of a labelled prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Tally {
    fn add(&mut self, truth: i8, pred: i8) {
        match (truth == 1, pred == 1) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy<T: Scalar>(&self) -> Option<T> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn fpr<T: Scalar>(&self) -> Option<T> {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn fnr<T: Scalar>(&self) -> Option<T> {
        ratio(self.fn_, self.fn_ + self.tp)
    }

    pub fn tpr<T: Scalar>(&self) -> Option<T> {
        ratio(self.tp, self.fn_ + self.tp)
    }

    pub fn tnr<T: Scalar>(&self) -> Option<T> {
        ratio(self.tn, self.fp + self.tn)
    }
}

fn ratio<T: Scalar>(num: usize, den: usize) -> Option<T> {
    (den > 0).then(|| T::from_count(num) / T::from_count(den))
}

/// Overall tally plus, when a sensitive vector was supplied, one per category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub total: Tally,
    pub by_category: Option<[Tally; 2]>,
}

fn check_lengths(expected: usize, others: &[usize]) -> Result<()> {
    if expected == 0 {
        return Err(FairError::Empty);
    }
    match others.iter().find(|&&n| n != expected) {
        Some(&got) => Err(FairError::LengthMismatch { expected, got }),
        None => Ok(()),
    }
}

pub fn confusion_counts(y_true: &[i8], y_pred: &[i8], s: Option<&[u8]>) -> Result<ConfusionCounts> {
    check_lengths(y_true.len(), &[y_pred.len(), s.map_or(y_true.len(), <[u8]>::len)])?;
    let mut total = Tally::default();
    let mut cats = [Tally::default(); 2];
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        total.add(t, p);
        if let Some(s) = s {
            cats[usize::from(s[i] == 1)].add(t, p);
        }
    }
    Ok(ConfusionCounts { total, by_category: s.map(|_| cats) })
}

/// The accuracy/rate bundle with raw counts. Serializes flat:
/// `accuracy, fpr, fnr, tpr, tnr, recall, tp, fp, tn, fn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle<T> {
    pub accuracy: T,
    pub fpr: Option<T>,
    pub fnr: Option<T>,
    pub tpr: Option<T>,
    pub tnr: Option<T>,
    pub recall: Option<T>,
    #[serde(flatten)]
    pub counts: Tally,
}

pub fn final_metrics<T: Scalar>(y_true: &[i8], y_pred: &[i8]) -> Result<MetricsBundle<T>> {
    let c = confusion_counts(y_true, y_pred, None)?.total;
    Ok(MetricsBundle {
        accuracy: c.accuracy().expect("nonempty input"),
        fpr: c.fpr(),
        fnr: c.fnr(),
        tpr: c.tpr(),
        tnr: c.tnr(),
        recall: c.tpr(),
        counts: c,
    })
}

/// `1 - min(di, 1/di)` from the positive-prediction rates of the two categories.
pub fn disparate_impact_from<T: Scalar>(s: &[u8], y_pred: &[i8]) -> Result<T> {
    check_lengths(s.len(), &[y_pred.len()])?;
    let mut size = [0usize; 2];
    let mut positive = [0usize; 2];
    for (&si, &p) in s.iter().zip(y_pred) {
        let k = usize::from(si == 1);
        size[k] += 1;
        positive[k] += usize::from(p == 1);
    }
    if size[0] == 0 {
        return Err(FairError::EmptySubset("S0"));
    }
    if size[1] == 0 {
        return Err(FairError::EmptySubset("S1"));
    }
    let r0 = T::from_count(positive[0]) / T::from_count(size[0]);
    let r1 = T::from_count(positive[1]) / T::from_count(size[1]);
    let hi = r0.max(r1);
    if hi == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::one() - r0.min(r1) / hi)
}

pub fn disparate_impact<T: Scalar>(d: &Dataset<T>, y_pred: &[i8], sf: &str) -> Result<T> {
    disparate_impact_from(d.sensitive(sf)?, y_pred)
}

/// Per-category rate compared by [`rate_gap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Fpr,
    Fnr,
    Tpr,
    Tnr,
}

impl RateKind {
    fn of<T: Scalar>(self, t: &Tally) -> Option<T> {
        match self {
            RateKind::Fpr => t.fpr(),
            RateKind::Fnr => t.fnr(),
            RateKind::Tpr => t.tpr(),
            RateKind::Tnr => t.tnr(),
        }
    }

    fn defining_set(self, category: usize) -> &'static str {
        match (self, category) {
            (RateKind::Fpr | RateKind::Tnr, 0) => "DN0",
            (RateKind::Fpr | RateKind::Tnr, _) => "DN1",
            (_, 0) => "DP0",
            _ => "DP1",
        }
    }
}

pub fn rate_gap_from<T: Scalar>(s: &[u8], y_true: &[i8], y_pred: &[i8], kind: RateKind) -> Result<T> {
    let cats = confusion_counts(y_true, y_pred, Some(s))?.by_category.expect("split requested");
    let r0 = kind.of::<T>(&cats[0]).ok_or(FairError::EmptySubset(kind.defining_set(0)))?;
    let r1 = kind.of::<T>(&cats[1]).ok_or(FairError::EmptySubset(kind.defining_set(1)))?;
    Ok((r0 - r1).abs())
}

pub fn rate_gap<T: Scalar>(d: &Dataset<T>, y_true: &[i8], y_pred: &[i8], sf: &str, kind: RateKind) -> Result<T> {
    rate_gap_from(d.sensitive(sf)?, y_true, y_pred, kind)
}

pub fn disparate_mistreatment_from<T: Scalar>(s: &[u8], y_true: &[i8], y_pred: &[i8]) -> Result<T> {
    let fpr = rate_gap_from::<T>(s, y_true, y_pred, RateKind::Fpr)?;
    let fnr = rate_gap_from::<T>(s, y_true, y_pred, RateKind::Fnr)?;
    Ok((fpr + fnr) / T::lit(2.0))
}

pub fn disparate_mistreatment<T: Scalar>(d: &Dataset<T>, y_true: &[i8], y_pred: &[i8], sf: &str) -> Result<T> {
    disparate_mistreatment_from(d.sensitive(sf)?, y_true, y_pred)
}

/// Fairness criterion that post-processing and resample selection minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessMetric {
    Di,
    Fpr,
    Fnr,
    Dm,
}

impl FairnessMetric {
    pub fn evaluate<T: Scalar>(self, s: &[u8], y_true: &[i8], y_pred: &[i8]) -> Result<T> {
        match self {
            FairnessMetric::Di => disparate_impact_from(s, y_pred),
            FairnessMetric::Fpr => rate_gap_from(s, y_true, y_pred, RateKind::Fpr),
            FairnessMetric::Fnr => rate_gap_from(s, y_true, y_pred, RateKind::Fnr),
            FairnessMetric::Dm => disparate_mistreatment_from(s, y_true, y_pred),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FairnessMetric::Di => "di",
            FairnessMetric::Fpr => "fpr",
            FairnessMetric::Fnr => "fnr",
            FairnessMetric::Dm => "dm",
        }
    }
}

/// All fairness metrics for one sensitive feature; `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport<T> {
    pub di: Option<T>,
    pub dm: Option<T>,
    pub fpr_gap: Option<T>,
    pub fnr_gap: Option<T>,
    pub tpr_gap: Option<T>,
    pub tnr_gap: Option<T>,
}

pub fn fairness_report<T: Scalar>(s: &[u8], y_true: &[i8], y_pred: &[i8]) -> FairnessReport<T> {
    let gap = |k| rate_gap_from(s, y_true, y_pred, k).ok();
    FairnessReport {
        di: disparate_impact_from(s, y_pred).ok(),
        dm: disparate_mistreatment_from(s, y_true, y_pred).ok(),
        fpr_gap: gap(RateKind::Fpr),
        fnr_gap: gap(RateKind::Fnr),
        tpr_gap: gap(RateKind::Tpr),
        tnr_gap: gap(RateKind::Tnr),
    }
}
