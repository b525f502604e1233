//! Pre-processing: the four-subset undersampling resampler and the
//! best-of-R selection loop built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{partition, Dataset};
use crate::error::{FairError, Result};
use crate::metrics::FairnessMetric;
use crate::postprocess::id_post;
use crate::scalar::Scalar;

/// Identity pre-processor.
pub fn id_pre<T: Clone>(d: &Dataset<T>) -> Dataset<T> {
    d.clone()
}

/// One application of [`di_resample`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleRun<T> {
    pub resampled: Dataset<T>,
    pub rng_seed: u64,
    /// Common size of the four label × category subsets.
    pub j: usize,
    /// Source row of every output row, subsets in the order DN0, DN1, DP0, DP1.
    pub rows: Vec<usize>,
}

/// Draws exactly `J` rows with replacement from each of the four subsets,
/// where `J` is the size of the smallest one.
pub fn di_resample<T: Scalar>(d: &Dataset<T>, sf: &str, seed: u64) -> Result<ResampleRun<T>> {
    let o = partition(d, sf, false)?.global;
    let subsets = [("DN0", &o.dn0), ("DN1", &o.dn1), ("DP0", &o.dp0), ("DP1", &o.dp1)];
    if let Some((name, _)) = subsets.iter().find(|(_, rows)| rows.is_empty()) {
        return Err(FairError::EmptySubset(name));
    }
    let j = subsets.iter().map(|(_, rows)| rows.len()).min().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(4 * j);
    for (_, subset) in subsets {
        rows.extend((0..j).map(|_| subset[rng.random_range(0..subset.len())]));
    }
    Ok(ResampleRun { resampled: d.select_rows(&rows), rng_seed: seed, j, rows })
}

/// Outcome of one iteration of [`resample_select`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<T> {
    /// 1-based run index.
    pub run: usize,
    pub seed: u64,
    /// Fairness metric on the full training set; `None` if the run failed.
    pub metric: Option<T>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Selection<M, T> {
    pub model: M,
    /// Winning run, 1-based.
    pub run: usize,
    pub metric: T,
    pub resample: ResampleRun<T>,
    pub runs: Vec<RunRecord<T>>,
}

/// Seed of run `r` (1-based) under base seed `seed`.
pub fn run_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// Repeats resample + fit `r` times and keeps the model whose cut-off-0.5
/// classifications of the full training set `d` score lowest on `metric`.
/// Ties keep the earliest run. A failing run is skipped with a warning;
/// if every run fails the last error is returned.
pub fn resample_select<T, M, F, P>(
    d: &Dataset<T>,
    sf: &str,
    metric: FairnessMetric,
    r: usize,
    seed: u64,
    mut fit: F,
    mut predict_proba: P,
) -> Result<Selection<M, T>>
where
    T: Scalar,
    F: FnMut(&Dataset<T>) -> Result<M>,
    P: FnMut(&M, &Dataset<T>) -> Result<Vec<T>>,
{
    if r == 0 {
        return Err(FairError::InvalidParameter("R must be at least 1".into()));
    }
    let y = d.require_labels()?;
    let s = d.sensitive(sf)?;
    let mut best: Option<(M, usize, T, ResampleRun<T>)> = None;
    let mut runs = Vec::with_capacity(r);
    let mut last_err = None;
    for run in 1..=r {
        let run_seed = run_seed(seed, run);
        let resample = di_resample(d, sf, run_seed)?;
        let scored = fit(&resample.resampled).and_then(|model| {
            let probs = predict_proba(&model, d)?;
            let value = metric.evaluate::<T>(s, y, &id_post(&probs))?;
            Ok((model, value))
        });
        match scored {
            Ok((model, value)) => {
                runs.push(RunRecord { run, seed: run_seed, metric: Some(value), error: None });
                if best.as_ref().is_none_or(|(_, _, b, _)| value < *b) {
                    best = Some((model, run, value, resample));
                }
            }
            Err(e) => {
                log::warn!("resampling run {run} (seed {run_seed}) failed: {e}");
                runs.push(RunRecord { run, seed: run_seed, metric: None, error: Some(e.to_string()) });
                last_err = Some(e);
            }
        }
    }
    match best {
        Some((model, run, metric, resample)) => Ok(Selection { model, run, metric, resample, runs }),
        None => Err(last_err.expect("at least one run executed")),
    }
}
