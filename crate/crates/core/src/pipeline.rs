//! The three-phase pipeline: optional resampling, a (possibly constrained)
//! fit, and optional cut-off selection.

use std::fmt;
use std::sync::Arc;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{FairError, Result};
use crate::metrics::FairnessMetric;
use crate::optim::{assemble_problem, predict_proba, ConstraintSet, Family, ModelSpec};
use crate::postprocess::{apply_cutoff, cutoff_sweep, CutoffChoice, DEFAULT_GUARD};
use crate::preprocess::{resample_select, RunRecord};
use crate::scalar::Scalar;
use crate::solver::{solve, Solution, SolverOptions};

/// A fitted external classifier.
pub trait PluginModel<T>: Send + Sync {
    /// One probability in `[0, 1]` per row of `x`.
    fn predict_proba(&self, x: ArrayView2<'_, T>) -> Result<Vec<T>>;
}

/// An external classifier usable in place of the built-in fits. It receives
/// the feature matrix (intercept column included) and `±1` labels; no
/// fairness constraints apply to it.
pub trait PluginClassifier<T>: Send + Sync {
    fn fit(&self, x: ArrayView2<'_, T>, y: &[i8]) -> Result<Box<dyn PluginModel<T>>>;

    fn name(&self) -> &str {
        "plugin"
    }
}

#[derive(Clone)]
pub enum InProcess<T> {
    /// Built-in family. `c` and the sensitive features are taken from the
    /// [`PipelineConfig`], overriding the ones stored in the spec.
    Builtin {
        spec: ModelSpec<T>,
        solver: SolverOptions<T>,
    },
    Plugin(Arc<dyn PluginClassifier<T>>),
}

impl<T: fmt::Debug> fmt::Debug for InProcess<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InProcess::Builtin { spec, solver } => {
                f.debug_struct("Builtin").field("spec", spec).field("solver", solver).finish()
            }
            InProcess::Plugin(p) => f.debug_tuple("Plugin").field(&p.name()).finish(),
        }
    }
}

impl<T: Scalar> InProcess<T> {
    pub fn builtin(family: Family, constraint: ConstraintSet) -> Self {
        InProcess::Builtin { spec: ModelSpec::new(family, constraint, &[]), solver: SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreProcess {
    #[default]
    Id,
    Di,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostProcess {
    #[default]
    None,
    Di,
    Dm,
    Fpr,
    Fnr,
}

impl PostProcess {
    pub fn metric(self) -> Option<FairnessMetric> {
        match self {
            PostProcess::None => None,
            PostProcess::Di => Some(FairnessMetric::Di),
            PostProcess::Dm => Some(FairnessMetric::Dm),
            PostProcess::Fpr => Some(FairnessMetric::Fpr),
            PostProcess::Fnr => Some(FairnessMetric::Fnr),
        }
    }

    pub fn name(self) -> &'static str {
        self.metric().map_or("none", FairnessMetric::name)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig<T> {
    pub inprocess: InProcess<T>,
    pub preprocess: PreProcess,
    pub postprocess: PostProcess,
    /// Sensitive features constrained during the fit.
    pub sf: Vec<String>,
    /// Feature used by the resampler; defaults to `sf[0]`.
    pub sf_pre: Option<String>,
    /// Feature used by the cut-off sweep; defaults to `sf[0]`.
    pub sf_post: Option<String>,
    pub c: T,
    /// Number of resampling repetitions.
    pub r: usize,
    pub seed: u64,
    /// Allowed relative accuracy loss in the cut-off sweep.
    pub guard: T,
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn new(inprocess: InProcess<T>, sf: &[&str]) -> Self {
        Self {
            inprocess,
            preprocess: PreProcess::Id,
            postprocess: PostProcess::None,
            sf: sf.iter().map(|s| s.to_string()).collect(),
            sf_pre: None,
            sf_post: None,
            c: T::lit(0.1),
            r: 1,
            seed: 42,
            guard: T::lit(DEFAULT_GUARD),
        }
    }

    fn phase_sf<'s>(&'s self, explicit: &'s Option<String>, phase: &str) -> Result<&'s str> {
        explicit
            .as_deref()
            .or(self.sf.first().map(String::as_str))
            .ok_or_else(|| FairError::InvalidParameter(format!("{phase} needs a sensitive feature")))
    }

    /// The built-in spec with this config's `c` and sensitive features applied.
    fn effective_spec(&self) -> Option<(ModelSpec<T>, &SolverOptions<T>)> {
        match &self.inprocess {
            InProcess::Builtin { spec, solver } => {
                let mut spec = spec.clone();
                spec.c = self.c;
                spec.sf_names = self.sf.clone();
                Some((spec, solver))
            }
            InProcess::Plugin(_) => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some((spec, solver)) = self.effective_spec() {
            spec.validate()?;
            solver.validate()?;
            if spec.constraint != ConstraintSet::None && spec.sf_names.is_empty() {
                return Err(FairError::InvalidParameter(
                    "fairness constraints need at least one sensitive feature".into(),
                ));
            }
        }
        if self.r == 0 {
            return Err(FairError::InvalidParameter("R must be at least 1".into()));
        }
        Ok(())
    }
}

/// A model produced by the in-processing phase.
pub enum FittedModel<T> {
    Builtin { family: Family, solution: Solution<T> },
    Plugin(Box<dyn PluginModel<T>>),
}

impl<T: fmt::Debug> fmt::Debug for FittedModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FittedModel::Builtin { family, solution } => {
                f.debug_struct("Builtin").field("family", family).field("solution", solution).finish()
            }
            FittedModel::Plugin(_) => f.write_str("Plugin"),
        }
    }
}

impl<T: Scalar> FittedModel<T> {
    pub fn predict_proba(&self, d: &Dataset<T>) -> Result<Vec<T>> {
        match self {
            FittedModel::Builtin { family, solution } => predict_proba(&solution.coeffs, d, *family),
            FittedModel::Plugin(m) => {
                let p = m.predict_proba(d.features())?;
                if p.len() != d.n_rows() {
                    return Err(FairError::LengthMismatch { expected: d.n_rows(), got: p.len() });
                }
                if p.iter().any(|v| !(*v >= T::zero() && *v <= T::one())) {
                    return Err(FairError::Fit("plugin returned a probability outside [0, 1]".into()));
                }
                Ok(p)
            }
        }
    }

    pub fn solution(&self) -> Option<&Solution<T>> {
        match self {
            FittedModel::Builtin { solution, .. } => Some(solution),
            FittedModel::Plugin(_) => None,
        }
    }
}

/// Fits the in-processing phase of `cfg` on labelled data.
pub fn fit_inprocess<T: Scalar>(cfg: &PipelineConfig<T>, d: &Dataset<T>) -> Result<FittedModel<T>> {
    match cfg.effective_spec() {
        Some((spec, solver)) => {
            let problem = assemble_problem(&spec, d)?;
            let solution = solve(&problem, solver)?;
            Ok(FittedModel::Builtin { family: spec.family, solution })
        }
        None => {
            let InProcess::Plugin(p) = &cfg.inprocess else { unreachable!() };
            Ok(FittedModel::Plugin(p.fit(d.features(), d.require_labels()?)?))
        }
    }
}

#[derive(Debug)]
pub struct PipelineOutput<T> {
    /// `±1` classification of every new row.
    pub classifications: Vec<i8>,
    pub probs_train: Vec<T>,
    pub probs_new: Vec<T>,
    pub cutoff: CutoffChoice<T>,
    pub model: FittedModel<T>,
    /// Winning resampling run (1-based) when pre-processing ran.
    pub selected_run: Option<usize>,
    pub runs: Vec<RunRecord<T>>,
    /// The training data the model was fitted on, after any resampling.
    pub fitted_on: Dataset<T>,
}

/// Runs the pipeline on `xtrain` with labels `ytrain` and classifies `newdata`.
pub fn fair_pred<T: Scalar>(
    xtrain: &Dataset<T>,
    ytrain: &[i8],
    newdata: &Dataset<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineOutput<T>> {
    cfg.validate()?;
    if let Some((spec, _)) = cfg.effective_spec() {
        if spec.family.is_mixed() {
            return Err(FairError::InvalidParameter("mixed families run through fair_pred_mixed".into()));
        }
    }
    let train = xtrain.clone().without_groups().with_labels(ytrain)?;
    let newdata = newdata.clone().without_groups();
    run(&train, &newdata, cfg)
}

/// Mixed-model pipeline. Pre-processing is not available here: resampling
/// would discard most rows of small groups.
pub fn fair_pred_mixed<T: Scalar, S: AsRef<str>, U: AsRef<str>>(
    xtrain: &Dataset<T>,
    ytrain: &[i8],
    newdata: &Dataset<T>,
    cfg: &PipelineConfig<T>,
    group_id_train: &[S],
    group_id_newdata: &[U],
) -> Result<PipelineOutput<T>> {
    cfg.validate()?;
    if cfg.preprocess != PreProcess::Id {
        return Err(FairError::InvalidParameter(
            "the mixed-model pipeline has no pre-processing phase; use the identity pre-processor".into(),
        ));
    }
    match cfg.effective_spec() {
        Some((spec, _)) if spec.family.is_mixed() => {}
        _ => return Err(FairError::InvalidParameter("fair_pred_mixed needs a mixed family (melr or mesvm)".into())),
    }
    let train = xtrain.clone().with_labels(ytrain)?.with_groups(group_id_train)?;
    let newdata = newdata.clone().with_groups(group_id_newdata)?;
    run(&train, &newdata, cfg)
}

fn run<T: Scalar>(train: &Dataset<T>, newdata: &Dataset<T>, cfg: &PipelineConfig<T>) -> Result<PipelineOutput<T>> {
    if train.width() != newdata.width() {
        return Err(FairError::WidthMismatch { expected: train.width(), got: newdata.width() });
    }
    let (model, selected_run, runs, fitted_on) = match cfg.preprocess {
        PreProcess::Id => (fit_inprocess(cfg, train)?, None, Vec::new(), train.clone()),
        PreProcess::Di => {
            let sf = cfg.phase_sf(&cfg.sf_pre, "pre-processing")?;
            let metric = cfg.postprocess.metric().unwrap_or(FairnessMetric::Di);
            let sel = resample_select(
                train,
                sf,
                metric,
                cfg.r,
                cfg.seed,
                |d| fit_inprocess(cfg, d),
                |m, d| m.predict_proba(d),
            )?;
            (sel.model, Some(sel.run), sel.runs, sel.resample.resampled)
        }
    };
    let probs_train = model.predict_proba(train)?;
    let probs_new = model.predict_proba(newdata)?;
    let cutoff = match cfg.postprocess.metric() {
        None => CutoffChoice::default_cutoff(),
        Some(metric) => {
            let sf = cfg.phase_sf(&cfg.sf_post, "post-processing")?;
            match cutoff_sweep(&probs_train, train.require_labels()?, train, sf, metric, cfg.guard) {
                Ok(c) => c,
                Err(FairError::UndefinedMetric(msg)) => {
                    log::warn!("cut-off sweep skipped, keeping 0.5: {msg}");
                    CutoffChoice::default_cutoff()
                }
                Err(e) => return Err(e),
            }
        }
    };
    let classifications = apply_cutoff(&probs_new, &cutoff);
    Ok(PipelineOutput { classifications, probs_train, probs_new, cutoff, model, selected_run, runs, fitted_on })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_dataset, Column, IngestOptions, Table};
    use crate::postprocess::id_post;
    use crate::preprocess::{di_resample, run_seed};

    fn data(n: usize, offset: usize) -> Dataset<f64> {
        let idx: Vec<usize> = (offset..offset + n).collect();
        let x: Vec<f64> = idx.iter().map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let s: Vec<f64> = idx.iter().map(|i| f64::from(i % 3 == 0)).collect();
        let y: Vec<f64> = idx
            .iter()
            .zip(x.iter().zip(&s))
            .map(
                |(i, (x, s))| {
                    if x + 1.2 * s - 0.3 + 0.6 * ((i * 13 % 7) as f64 - 3.0) / 3.0 > 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                },
            )
            .collect();
        let g: Vec<String> = idx.iter().map(|i| format!("g{}", i % 4)).collect();
        let t = Table::new()
            .with("x", Column::Numeric(x))
            .unwrap()
            .with("s", Column::Numeric(s))
            .unwrap()
            .with("y", Column::Numeric(y))
            .unwrap()
            .with("grp", Column::Text(g))
            .unwrap();
        let o = IngestOptions { label_col: Some("y"), sensitive: &["s"], group_col: Some("grp"), ..Default::default() };
        ingest_dataset(&t, &o).unwrap()
    }

    struct Constant(f64);

    impl PluginModel<f64> for Constant {
        fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
            Ok(vec![self.0; x.nrows()])
        }
    }

    struct ConstantClassifier(f64);

    impl PluginClassifier<f64> for ConstantClassifier {
        fn fit(&self, _: ArrayView2<'_, f64>, _: &[i8]) -> Result<Box<dyn PluginModel<f64>>> {
            Ok(Box::new(Constant(self.0)))
        }
    }

    #[test]
    fn identity_phases_are_plain_prediction() {
        let (train, test) = (data(80, 0), data(40, 80));
        let cfg = PipelineConfig::new(InProcess::builtin(Family::Lr, ConstraintSet::None), &["s"]);
        let out = fair_pred(&train, train.labels().unwrap(), &test, &cfg).unwrap();
        let FittedModel::Builtin { solution, .. } = &out.model else { panic!() };
        let direct = predict_proba(&solution.coeffs, &test, Family::Lr).unwrap();
        assert_eq!(out.classifications, id_post(&direct));
        assert_eq!(out.cutoff.b, 0.5);
    }

    #[test]
    fn preprocessing_composes_with_selection() {
        let (train, test) = (data(90, 0), data(30, 90));
        let mut cfg = PipelineConfig::new(InProcess::builtin(Family::Lr, ConstraintSet::None), &["s"]);
        cfg.preprocess = PreProcess::Di;
        cfg.r = 5;
        let out = fair_pred(&train, train.labels().unwrap(), &test, &cfg).unwrap();
        let run = out.selected_run.unwrap();
        let winner = di_resample(&train.clone().without_groups(), "s", run_seed(42, run)).unwrap();
        let refit = fit_inprocess(&cfg, &winner.resampled).unwrap();
        assert_eq!(out.classifications, id_post(&refit.predict_proba(&test.clone().without_groups()).unwrap()));
        assert_eq!(out.runs.len(), 5);
    }

    #[test]
    fn constant_plugin_predicts_all_positive() {
        let (train, test) = (data(30, 0), data(10, 30));
        let cfg = PipelineConfig::new(InProcess::Plugin(Arc::new(ConstantClassifier(0.7))), &["s"]);
        let out = fair_pred(&train, train.labels().unwrap(), &test, &cfg).unwrap();
        assert_eq!(out.classifications, vec![1; 10]);
    }

    #[test]
    fn plugin_and_builtin_share_postprocessing() {
        let train = data(60, 0);
        let mut cfg = PipelineConfig::new(InProcess::builtin(Family::Lr, ConstraintSet::None), &["s"]);
        cfg.postprocess = PostProcess::Di;
        let out = fair_pred(&train, train.labels().unwrap(), &train, &cfg).unwrap();
        let direct =
            cutoff_sweep(&out.probs_train, train.labels().unwrap(), &train, "s", FairnessMetric::Di, 0.05).unwrap();
        assert_eq!(out.cutoff, direct);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let train = data(30, 0);
        let narrow =
            Dataset::new(ndarray::Array2::ones((3, 1)), vec!["intercept".into()], None, Default::default(), None)
                .unwrap();
        let cfg = PipelineConfig::new(InProcess::builtin(Family::Lr, ConstraintSet::None), &["s"]);
        assert!(matches!(
            fair_pred(&train, train.labels().unwrap(), &narrow, &cfg),
            Err(FairError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn mixed_pipeline_rejects_preprocessing() {
        let train = data(40, 0);
        let groups: Vec<String> = (0..40).map(|i| format!("g{}", i % 4)).collect();
        let mut cfg = PipelineConfig::new(InProcess::builtin(Family::Melr, ConstraintSet::Di), &["s"]);
        cfg.preprocess = PreProcess::Di;
        let err = fair_pred_mixed(&train, train.labels().unwrap(), &train, &cfg, &groups, &groups).unwrap_err();
        assert!(matches!(err, FairError::InvalidParameter(m) if m.contains("pre-processing")));
    }

    #[test]
    fn single_group_mixed_matches_fixed() {
        let (train, test) = (data(80, 0), data(40, 80));
        let one_tr = vec!["all"; 80];
        let one_te = vec!["all"; 40];
        let InProcess::Builtin { spec, solver } = InProcess::<f64>::builtin(Family::Melr, ConstraintSet::Di) else {
            unreachable!()
        };
        let mixed_cfg = PipelineConfig::new(InProcess::Builtin { spec: spec.with_lambda(1e-10), solver }, &["s"]);
        let fixed_cfg = PipelineConfig::new(InProcess::builtin(Family::Lr, ConstraintSet::Di), &["s"]);
        let mixed = fair_pred_mixed(&train, train.labels().unwrap(), &test, &mixed_cfg, &one_tr, &one_te).unwrap();
        let fixed = fair_pred(&train, train.labels().unwrap(), &test, &fixed_cfg).unwrap();
        assert_eq!(mixed.classifications, fixed.classifications);
    }

    #[test]
    fn unseen_group_scores_with_zero_effect() {
        let (train, test) = (data(40, 0), data(4, 40));
        let tr: Vec<String> = (0..40).map(|i| format!("g{}", i % 4)).collect();
        let te = vec!["new"; 4];
        let cfg = PipelineConfig::new(InProcess::builtin(Family::Melr, ConstraintSet::None), &["s"]);
        let out = fair_pred_mixed(&train, train.labels().unwrap(), &test, &cfg, &tr, &te).unwrap();
        let FittedModel::Builtin { solution, .. } = &out.model else { panic!() };
        let fixed =
            predict_proba(&crate::optim::Coefficients::fixed(solution.coeffs.beta.clone()), &test, Family::Lr).unwrap();
        assert_eq!(out.probs_new, fixed);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let (train, test) = (data(90, 0), data(30, 90));
        let mut cfg = PipelineConfig::new(InProcess::builtin(Family::Svm, ConstraintSet::Dm), &["s"]);
        cfg.preprocess = PreProcess::Di;
        cfg.postprocess = PostProcess::Dm;
        cfg.r = 3;
        let a = fair_pred(&train, train.labels().unwrap(), &test, &cfg).unwrap();
        let b = fair_pred(&train, train.labels().unwrap(), &test, &cfg).unwrap();
        assert_eq!(a.classifications, b.classifications);
        assert_eq!(a.probs_new, b.probs_new);
    }
}
