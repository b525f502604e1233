use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use fairclass::data::{ingest_dataset, Dataset, IngestOptions, Table};
use fairclass::metrics::{fairness_report, final_metrics, FairnessReport, MetricsBundle};
use fairclass::optim::{Coefficients, ConstraintSet, Family, ModelSpec};
use fairclass::pipeline::{
    fair_pred, fair_pred_mixed, InProcess, PipelineConfig, PipelineOutput, PostProcess, PreProcess,
};
use fairclass::postprocess::DEFAULT_GUARD;
use fairclass::solver::{write_trace_csv, FeasibilityEntry, SolverOptions};
use fairclass::synth::{gen_mixed, gen_regular, SynthSpec, SENSITIVE};

use crate::cli::{EvaluateArgs, FitArgs, FitOptions, GenerateArgs};
use crate::UsageError;

pub const LABEL_COL: &str = "y";
pub const GROUP_COL: &str = "group";

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, d: &Dataset<f64>) -> Result<()> {
    d.to_table(LABEL_COL, GROUP_COL).write_csv(create(path)?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    spec: &'a SynthSpec,
    train: String,
    test: String,
    n_train: usize,
    n_test: usize,
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let family: Family = args.family.into();
    let mut spec = if family.is_mixed() {
        SynthSpec::mixed(family.fixed(), args.n, args.seed)
    } else {
        SynthSpec::regular(family, args.n, args.seed)
    };
    if args.groups.is_some() {
        spec.k = args.groups;
    }
    if spec.k.is_some() {
        spec.sigma_g = args.sigma_g;
    }
    spec.family = family.fixed();
    spec.split_frac = args.split;
    spec.sf_prob = args.sf_prob;
    spec.threshold_labels = args.threshold_labels;
    if let Some(beta) = &args.beta {
        spec.beta_true = beta.clone();
    }
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    let generated = if spec.k.is_some() { gen_mixed::<f64>(&spec)? } else { gen_regular::<f64>(&spec)? };

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    write_dataset(&args.out.join("train.csv"), &generated.train)?;
    write_dataset(&args.out.join("test.csv"), &generated.test)?;
    write_json(
        &args.out.join("manifest.json"),
        &Manifest {
            spec: &spec,
            train: "train.csv".into(),
            test: "test.csv".into(),
            n_train: generated.train.n_rows(),
            n_test: generated.test.n_rows(),
        },
    )?;
    log::info!(
        "wrote {} training and {} test rows to {}",
        generated.train.n_rows(),
        generated.test.n_rows(),
        args.out.display()
    );
    Ok(())
}

/// Fully resolved `fit-predict` settings, echoed into the result.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub family: Family,
    pub constraint: ConstraintSet,
    pub c: f64,
    pub mu: f64,
    pub lambda: f64,
    pub pre: PreProcess,
    #[serde(rename = "R")]
    pub r: usize,
    pub post: PostProcess,
    pub sf: Vec<String>,
    pub sfpre: Option<String>,
    pub sfpost: Option<String>,
    pub seed: u64,
    pub time_limit: f64,
    pub guard: f64,
    pub label_col: String,
    pub group_col: Option<String>,
    pub trace: bool,
}

impl Resolved {
    pub fn from_options(o: FitOptions) -> Result<Self> {
        let family: Family = o.family.map_or(Family::Lr, Into::into);
        let group_col = o.group_col.or_else(|| family.is_mixed().then(|| GROUP_COL.to_string()));
        let r = Self {
            family,
            constraint: o.constraint.map_or(ConstraintSet::None, Into::into),
            c: o.c.unwrap_or(0.1),
            mu: o.mu.unwrap_or(1.0),
            lambda: o.lambda.unwrap_or(1.0),
            pre: o.pre.map_or(PreProcess::Id, Into::into),
            r: o.r.unwrap_or(1),
            post: o.post.map_or(PostProcess::None, Into::into),
            sf: o.sf.unwrap_or_else(|| vec![SENSITIVE.to_string()]),
            sfpre: o.sfpre,
            sfpost: o.sfpost,
            seed: o.seed.unwrap_or(42),
            time_limit: o.time_limit.unwrap_or(60.0),
            guard: o.guard.unwrap_or(DEFAULT_GUARD),
            label_col: o.label_col.unwrap_or_else(|| LABEL_COL.to_string()),
            group_col,
            trace: o.trace.unwrap_or(false),
        };
        if r.family.is_mixed() && r.pre != PreProcess::Id {
            return Err(UsageError("mixed families take no pre-processing (--pre id)".into()).into());
        }
        Ok(r)
    }

    pub fn pipeline_config(&self) -> PipelineConfig<f64> {
        let spec = ModelSpec::new(self.family, self.constraint, &[]).with_mu(self.mu).with_lambda(self.lambda);
        let solver = SolverOptions { trace: self.trace, ..SolverOptions::default() }.with_time_limit(self.time_limit);
        let sf: Vec<&str> = self.sf.iter().map(String::as_str).collect();
        let mut cfg = PipelineConfig::new(InProcess::Builtin { spec, solver }, &sf);
        cfg.preprocess = self.pre;
        cfg.postprocess = self.post;
        cfg.sf_pre = self.sfpre.clone();
        cfg.sf_post = self.sfpost.clone();
        cfg.c = self.c;
        cfg.r = self.r;
        cfg.seed = self.seed;
        cfg.guard = self.guard;
        cfg
    }

    /// Sensitive features any phase refers to.
    fn all_sf(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.sf.iter().map(String::as_str).collect();
        for extra in [&self.sfpre, &self.sfpost].into_iter().flatten() {
            if !names.contains(&extra.as_str()) {
                names.push(extra);
            }
        }
        names
    }
}

fn read_table(path: &Path, group_col: Option<&str>) -> Result<Table> {
    let categorical: Vec<&str> = group_col.into_iter().collect();
    Table::read_csv(path, &categorical).with_context(|| format!("cannot read {}", path.display()))
}

/// Loads a CSV as a dataset; the label column is optional unless `require_labels`.
pub fn load_dataset(path: &Path, r: &Resolved, require_labels: bool) -> Result<Dataset<f64>> {
    let group_col = r.group_col.as_deref();
    let table = read_table(path, group_col)?;
    let has_labels = table.column(&r.label_col).is_some();
    if require_labels && !has_labels {
        bail!(UsageError(format!("{} has no label column '{}'", path.display(), r.label_col)));
    }
    let sf = r.all_sf();
    let opts = IngestOptions {
        label_col: has_labels.then_some(r.label_col.as_str()),
        sensitive: &sf,
        group_col: group_col.filter(|g| table.column(g).is_some()),
        ..Default::default()
    };
    Ok(ingest_dataset(&table, &opts)?)
}

#[derive(Debug, Serialize)]
pub struct PhaseMetrics {
    #[serde(flatten)]
    pub bundle: MetricsBundle<f64>,
    pub fairness: BTreeMap<String, FairnessReport<f64>>,
}

pub fn phase_metrics(d: &Dataset<f64>, pred: &[i8], sf: &[&str]) -> Result<Option<PhaseMetrics>> {
    let Some(y) = d.labels() else { return Ok(None) };
    let mut fairness = BTreeMap::new();
    for name in sf {
        fairness.insert(name.to_string(), fairness_report(d.sensitive(name)?, y, pred));
    }
    Ok(Some(PhaseMetrics { bundle: final_metrics(y, pred)?, fairness }))
}

#[derive(Debug, Serialize)]
struct SolverSummary<'a> {
    status: &'static str,
    objective: f64,
    iterations: usize,
    wall_seconds: f64,
    max_residual: f64,
    feasibility: &'a [FeasibilityEntry<f64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<String>,
}

#[derive(Debug, Serialize)]
struct FitResult<'a> {
    config: &'a Resolved,
    classifications: &'a [i8],
    cutoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cutoff_trace: Option<String>,
    solver: Option<SolverSummary<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected_run: Option<usize>,
    coefficients: Option<&'a Coefficients<f64>>,
    metrics: BTreeMap<&'static str, PhaseMetrics>,
}

/// Runs the pipeline described by `r` on the two files.
pub fn run_pipeline(
    train_path: &Path,
    test_path: &Path,
    r: &Resolved,
) -> Result<(Dataset<f64>, Dataset<f64>, PipelineOutput<f64>)> {
    let train = load_dataset(train_path, r, true)?;
    let test = load_dataset(test_path, r, false)?;
    let cfg = r.pipeline_config();
    let y = train.require_labels()?.to_vec();
    let out = if r.family.is_mixed() {
        let labels = |d: &Dataset<f64>| -> Result<Vec<String>> {
            let g = d.require_groups()?;
            Ok((0..d.n_rows()).map(|i| g.label_of(i).to_string()).collect())
        };
        fair_pred_mixed(&train, &y, &test, &cfg, &labels(&train)?, &labels(&test)?)?
    } else {
        fair_pred(&train, &y, &test, &cfg)?
    };
    Ok((train, test, out))
}

pub fn write_classifications(path: &Path, pred: &[i8]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["row", "prediction"])?;
    for (i, p) in pred.iter().enumerate() {
        w.write_record([i.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_classifications(path: &Path) -> Result<Vec<i8>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "prediction")
        .ok_or_else(|| UsageError(format!("{} has no 'prediction' column", path.display())))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: i8 = rec[col].trim().parse().map_err(|_| UsageError(format!("bad prediction '{}'", &rec[col])))?;
        if v != 1 && v != -1 {
            bail!(UsageError(format!("prediction must be -1 or 1, got {v}")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn fit_predict(args: &FitArgs) -> Result<()> {
    let from_file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            toml::from_str::<FitOptions>(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))?
        }
        None => FitOptions::default(),
    };
    let resolved = Resolved::from_options(args.options.clone().or(from_file))?;
    let (train, test, out) = run_pipeline(&args.train, &args.test, &resolved)?;

    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    write_classifications(&args.out.join("classifications.csv"), &out.classifications)?;
    let cutoff_trace = if out.cutoff.trace.is_empty() {
        None
    } else {
        out.cutoff.write_trace_csv(create(&args.out.join("cutoff_trace.csv"))?)?;
        Some("cutoff_trace.csv".to_string())
    };
    let solution = out.model.solution();
    let solver_trace = match solution {
        Some(sol) if resolved.trace => {
            write_trace_csv(&sol.trace, create(&args.out.join("solver_trace.csv"))?)?;
            Some("solver_trace.csv".to_string())
        }
        _ => None,
    };
    let sf = resolved.all_sf();
    let train_pred = fairclass::postprocess::apply_cutoff(&out.probs_train, &out.cutoff);
    let mut metrics = BTreeMap::new();
    if let Some(m) = phase_metrics(&train, &train_pred, &sf)? {
        metrics.insert("train", m);
    }
    if let Some(m) = phase_metrics(&test, &out.classifications, &sf)? {
        metrics.insert("test", m);
    }
    let result = FitResult {
        config: &resolved,
        classifications: &out.classifications,
        cutoff: out.cutoff.b,
        cutoff_trace,
        solver: solution.map(|s| SolverSummary {
            status: s.status.name(),
            objective: s.objective,
            iterations: s.iterations,
            wall_seconds: s.wall_seconds,
            max_residual: s.max_residual(),
            feasibility: &s.feasibility,
            trace: solver_trace,
        }),
        selected_run: out.selected_run,
        coefficients: solution.map(|s| &s.coeffs),
        metrics,
    };
    write_json(&args.out.join("result.json"), &result)?;
    if let Some(sol) = solution {
        log::info!("solver status {} after {} iterations", sol.status.name(), sol.iterations);
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let resolved = Resolved::from_options(FitOptions {
        label_col: Some(args.label_col.clone()),
        sf: Some(args.sf.clone()),
        ..FitOptions::default()
    })?;
    let d = load_dataset(&args.data, &resolved, true)?;
    let pred = read_classifications(&args.pred)?;
    if pred.len() != d.n_rows() {
        bail!(UsageError(format!("{} predictions for {} rows", pred.len(), d.n_rows())));
    }
    let sf: Vec<&str> = args.sf.iter().map(String::as_str).collect();
    let m = phase_metrics(&d, &pred, &sf)?.expect("labels required above");
    match &args.out {
        Some(path) => write_json(path, &m)?,
        None => writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(&m)?)?,
    }
    Ok(())
}
