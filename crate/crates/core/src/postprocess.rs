//! Post-processing: choose a single classification cut-off on the training
//! probabilities that trades a bounded accuracy loss for fairness.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{FairError, Result};
use crate::metrics::{confusion_counts, FairnessMetric};
use crate::scalar::Scalar;

/// Default allowed relative accuracy loss against the 0.5 cut-off.
pub const DEFAULT_GUARD: f64 = 0.05;

/// Classifies at the default cut-off: `+1` iff `p ≥ 0.5`.
pub fn id_post<T: Scalar>(probs: &[T]) -> Vec<i8> {
    classify(probs, T::lit(0.5))
}

fn classify<T: Scalar>(probs: &[T], cutoff: T) -> Vec<i8> {
    probs.iter().map(|&p| if p >= cutoff { 1 } else { -1 }).collect()
}

/// Sweep grid point `k / 100`.
fn grid_value<T: Scalar>(k: usize) -> T {
    T::lit(k as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffRecord<T> {
    pub v: T,
    pub accuracy: T,
    /// `None` where the metric is undefined at this cut-off.
    pub fm: Option<T>,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffChoice<T> {
    #[serde(rename = "B")]
    pub b: T,
    /// Training accuracy at the 0.5 cut-off.
    pub baseline_ac: T,
    pub trace: Vec<CutoffRecord<T>>,
}

impl<T: Scalar> CutoffChoice<T> {
    /// The choice that always classifies at 0.5.
    pub fn default_cutoff() -> Self {
        Self { b: T::lit(0.5), baseline_ac: T::nan(), trace: Vec::new() }
    }

    /// Writes the sweep as CSV: `v,accuracy,fm,admissible`.
    pub fn write_trace_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["v", "accuracy", "fm", "admissible"])?;
        for r in &self.trace {
            let fm = r.fm.map_or(String::new(), |f| f.to_string());
            wtr.write_record([r.v.to_string(), r.accuracy.to_string(), fm, r.admissible.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// [`cutoff_sweep_from`] with the sensitive column taken from `d`.
pub fn cutoff_sweep<T: Scalar>(
    probs: &[T],
    y: &[i8],
    d: &Dataset<T>,
    sf: &str,
    metric: FairnessMetric,
    guard: T,
) -> Result<CutoffChoice<T>> {
    cutoff_sweep_from(probs, y, d.sensitive(sf)?, metric, guard)
}

/// Evaluates `v = 0.01, 0.02, …, 0.99` on training data and picks
/// `B = argmax (AC_v − fm_v)` over cut-offs whose accuracy is at least
/// `(1 − guard) · AC_0.5`. Ties go to the `v` nearest 0.5, then the smaller.
pub fn cutoff_sweep_from<T: Scalar>(
    probs: &[T],
    y: &[i8],
    s: &[u8],
    metric: FairnessMetric,
    guard: T,
) -> Result<CutoffChoice<T>> {
    if probs.len() != y.len() {
        return Err(FairError::LengthMismatch { expected: y.len(), got: probs.len() });
    }
    if !(guard >= T::zero() && guard < T::one()) {
        return Err(FairError::InvalidParameter(format!("guard must lie in [0, 1), got {guard}")));
    }
    let accuracy = |v: T| -> Result<T> {
        confusion_counts(y, &classify(probs, v), None)?.total.accuracy().ok_or(FairError::Empty)
    };
    let baseline_ac = accuracy(T::lit(0.5))?;
    let floor = (T::one() - guard) * baseline_ac;
    let half = T::lit(0.5);

    let mut trace = Vec::with_capacity(99);
    let mut best: Option<(T, T)> = None;
    for k in 1..=99 {
        let v = grid_value::<T>(k);
        let pred = classify(probs, v);
        let ac = accuracy(v)?;
        let fm = metric.evaluate::<T>(s, y, &pred).ok();
        let admissible = fm.is_some() && ac >= floor;
        if let (true, Some(fm)) = (admissible, fm) {
            let score = ac - fm;
            let better = match best {
                None => true,
                Some((bv, bs)) => score > bs || (score == bs && (v - half).abs() < (bv - half).abs()),
            };
            if better {
                best = Some((v, score));
            }
        }
        trace.push(CutoffRecord { v, accuracy: ac, fm, admissible });
    }
    let (b, _) = best.ok_or_else(|| {
        FairError::UndefinedMetric(format!("{} is undefined at every admissible cut-off", metric.name()))
    })?;
    Ok(CutoffChoice { b, baseline_ac, trace })
}

/// Classifies at the chosen cut-off: `+1` iff `p ≥ B`.
pub fn apply_cutoff<T: Scalar>(probs: &[T], choice: &CutoffChoice<T>) -> Vec<i8> {
    classify(probs, choice.b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn choice(b: f64) -> CutoffChoice<f64> {
        CutoffChoice { b, ..CutoffChoice::default_cutoff() }
    }

    #[test]
    fn identity_boundaries() {
        assert_eq!(id_post(&[0.4, 0.6]), vec![-1, 1]);
        assert_eq!(id_post(&[0.5]), vec![1]);
        assert_eq!(id_post(&[0.0; 3]), vec![-1; 3]);
    }

    #[test]
    fn apply_cutoff_boundaries() {
        assert_eq!(apply_cutoff(&[0.29, 0.30, 0.31], &choice(0.3)), vec![-1, 1, 1]);
        let p = [0.1, 0.5, 0.49999, 0.9];
        assert_eq!(apply_cutoff(&p, &choice(0.5)), id_post(&p));
    }

    #[test]
    fn raising_cutoff_never_adds_positives() {
        let p: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).fract()).collect();
        for k in 1..99 {
            let lo = apply_cutoff(&p, &choice(k as f64 / 100.0));
            let hi = apply_cutoff(&p, &choice((k + 1) as f64 / 100.0));
            assert!(lo.iter().zip(&hi).all(|(a, b)| !(*a == -1 && *b == 1)));
        }
    }

    #[test]
    fn separable_probabilities_pick_one_half() {
        let y = [1, 1, -1, -1, 1, -1];
        let s = [0, 1, 0, 1, 1, 0];
        let p: Vec<f64> = y.iter().map(|&v| if v == 1 { 0.9 } else { 0.1 }).collect();
        let c = cutoff_sweep_from(&p, &y, &s, FairnessMetric::Dm, 0.05).unwrap();
        assert_eq!(c.b, 0.5);
        for r in &c.trace {
            let perfect = r.v > 0.1 && r.v <= 0.9;
            assert_eq!(r.accuracy == 1.0, perfect, "v={}", r.v);
        }
    }

    #[test]
    fn zero_fm_maximizes_accuracy_nearest_half() {
        // Both categories get identical predictions, so DI is 0 at every v.
        let p = [0.2, 0.2, 0.7, 0.7, 0.45, 0.45];
        let y = [-1, -1, 1, 1, 1, 1];
        let s = [0, 1, 0, 1, 0, 1];
        let c = cutoff_sweep_from(&p, &y, &s, FairnessMetric::Di, 0.05).unwrap();
        assert!(c.trace.iter().filter(|r| r.admissible).all(|r| r.fm == Some(0.0)));
        // Accuracy 1 for v in (0.2, 0.45]; nearest to 0.5 is 0.45.
        assert_eq!(c.b, 0.45);
    }

    #[test]
    fn singleton_admissible_set() {
        // Perfect at v ∈ (0.49, 0.5] only with a zero guard.
        let p = [0.49, 0.5, 0.49, 0.5];
        let y = [-1, 1, -1, 1];
        let s = [0, 0, 1, 1];
        let c = cutoff_sweep_from(&p, &y, &s, FairnessMetric::Di, 0.0).unwrap();
        assert_eq!(c.trace.iter().filter(|r| r.admissible).count(), 1);
        assert_eq!(c.b, 0.5);
    }

    #[test]
    fn undefined_metric_excludes_cutoffs() {
        // No s=0 negatives, so FPR is undefined everywhere.
        let p = [0.3, 0.6, 0.8];
        let y = [1, -1, 1];
        let s = [0, 1, 1];
        assert!(matches!(cutoff_sweep_from(&p, &y, &s, FairnessMetric::Fpr, 0.05), Err(FairError::UndefinedMetric(_))));
    }

    #[test]
    fn trace_csv_has_header_and_99_rows() {
        let c = cutoff_sweep_from(&[0.2, 0.8], &[-1, 1], &[0, 1], FairnessMetric::Di, 0.05).unwrap();
        let mut buf = Vec::new();
        c.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 100);
        assert!(text.starts_with("v,accuracy,fm,admissible\n0.01,"));
    }
}
