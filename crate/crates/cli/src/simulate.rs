use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use fairclass::data::Dataset;
use fairclass::metrics::{fairness_report, final_metrics};
use fairclass::optim::{ConstraintSet, Family, ModelSpec};
use fairclass::pipeline::{fair_pred, fair_pred_mixed, InProcess, PipelineConfig, PostProcess, PreProcess};
use fairclass::solver::SolverOptions;
use fairclass::synth::{gen_mixed, gen_regular, Generated, SynthSpec, SENSITIVE};

use crate::cli::SimulateArgs;
use crate::commands::write_classifications;
use crate::UsageError;

/// Metric rows written per successful job, in order.
pub const METRICS: [&str; 7] = ["accuracy", "di", "dm", "fpr_gap", "fnr_gap", "tpr_gap", "tnr_gap"];

pub const HEADER: [&str; 10] =
    ["scenario_id", "mixed", "preprocess", "inprocess", "postprocess", "run", "seed", "status", "metric", "value"];

const CONSTRAINTS: [ConstraintSet; 5] =
    [ConstraintSet::None, ConstraintSet::Di, ConstraintSet::Fnr, ConstraintSet::Fpr, ConstraintSet::Dm];
const POSTS: [PostProcess; 3] = [PostProcess::None, PostProcess::Di, PostProcess::Dm];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub id: usize,
    pub mixed: bool,
    pub pre: PreProcess,
    /// Resampling repetitions; 0 without pre-processing.
    pub r: usize,
    pub family: Family,
    pub constraint: ConstraintSet,
    pub post: PostProcess,
}

impl Scenario {
    pub fn pre_label(&self) -> String {
        match self.pre {
            PreProcess::Id => "id".to_string(),
            PreProcess::Di => format!("di_r{}", self.r),
        }
    }

    pub fn in_label(&self) -> String {
        format!("{}_{}", self.family.name(), self.constraint.name())
    }
}

/// The full grid, ids from 1: pre-processing outermost, post-processing innermost.
pub fn scenarios(mixed: bool) -> Vec<Scenario> {
    let pres: &[(PreProcess, usize)] =
        if mixed { &[(PreProcess::Id, 0)] } else { &[(PreProcess::Id, 0), (PreProcess::Di, 1), (PreProcess::Di, 5)] };
    let families: &[Family] = if mixed { &[Family::Melr, Family::Mesvm] } else { &[Family::Lr, Family::Svm] };
    let mut out = Vec::new();
    for &(pre, r) in pres {
        for &family in families {
            for constraint in CONSTRAINTS {
                for post in POSTS {
                    out.push(Scenario { id: out.len() + 1, mixed, pre, r, family, constraint, post });
                }
            }
        }
    }
    out
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` of scenario `scenario`.
pub fn job_seed(base: u64, scenario: usize, run: usize) -> u64 {
    splitmix(splitmix(splitmix(base) ^ scenario as u64) ^ run as u64)
}

/// Settings stored in the audit manifest; enough to regenerate every input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mixed: bool,
    pub runs: usize,
    pub n: usize,
    pub split: f64,
    pub seed: u64,
    pub c: f64,
    pub time_limit: f64,
    pub scenarios: Vec<usize>,
}

impl SimConfig {
    pub fn from_args(args: &SimulateArgs) -> Result<Self> {
        let all = scenarios(args.mixed).len();
        let ids = args.scenarios.clone().unwrap_or_else(|| (1..=all).collect());
        if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > all) {
            bail!(UsageError(format!("scenario id {bad} outside 1..={all}")));
        }
        if args.runs == 0 {
            bail!(UsageError("--runs must be positive".into()));
        }
        Ok(Self {
            mixed: args.mixed,
            runs: args.runs,
            n: args.n,
            split: args.split,
            seed: args.seed,
            c: args.c,
            time_limit: args.time_limit,
            scenarios: ids,
        })
    }

    pub fn synth_spec(&self, family: Family, seed: u64) -> SynthSpec {
        let mut spec = if self.mixed {
            SynthSpec::mixed(family.fixed(), self.n, seed)
        } else {
            SynthSpec::regular(family, self.n, seed)
        };
        spec.split_frac = self.split;
        spec
    }

    pub fn generate(&self, family: Family, seed: u64) -> Result<Generated<f64>> {
        let spec = self.synth_spec(family, seed);
        Ok(if self.mixed { gen_mixed(&spec)? } else { gen_regular(&spec)? })
    }
}

#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub scenario: Scenario,
    pub run: usize,
    pub seed: u64,
    pub status: String,
    /// `(metric, value)` pairs; `None` where undefined.
    pub metrics: Vec<(String, Option<f64>)>,
    pub classifications: Vec<i8>,
}

/// The seven test-set metrics in [`METRICS`] order.
pub fn test_metrics(test: &Dataset<f64>, pred: &[i8]) -> Result<Vec<Option<f64>>> {
    let y = test.require_labels()?;
    let acc = final_metrics::<f64>(y, pred)?.accuracy;
    let f = fairness_report::<f64>(test.sensitive(SENSITIVE)?, y, pred);
    Ok(vec![Some(acc), f.di, f.dm, f.fpr_gap, f.fnr_gap, f.tpr_gap, f.tnr_gap])
}

fn run_job(cfg: &SimConfig, sc: &Scenario, run: usize) -> Result<(String, Vec<i8>, Vec<Option<f64>>)> {
    let seed = job_seed(cfg.seed, sc.id, run);
    let data = cfg.generate(sc.family, seed)?;
    let spec = ModelSpec::new(sc.family, sc.constraint, &[]);
    let solver = SolverOptions::default().with_time_limit(cfg.time_limit);
    let mut pc = PipelineConfig::new(InProcess::Builtin { spec, solver }, &[SENSITIVE]);
    pc.preprocess = sc.pre;
    pc.postprocess = sc.post;
    pc.r = sc.r.max(1);
    pc.c = cfg.c;
    pc.seed = seed;
    let y = data.train.require_labels()?.to_vec();
    let out = match (&data.groups_train, &data.groups_test) {
        (Some(gt), Some(gn)) => fair_pred_mixed(&data.train, &y, &data.test, &pc, gt, gn)?,
        _ => fair_pred(&data.train, &y, &data.test, &pc)?,
    };
    let status = out.model.solution().map_or("ok", |s| s.status.name()).to_string();
    let metrics = test_metrics(&data.test, &out.classifications)?;
    Ok((status, out.classifications, metrics))
}

/// Runs every selected scenario `cfg.runs` times; output is ordered by
/// scenario then run regardless of scheduling.
pub fn run_simulation(cfg: &SimConfig, workers: usize) -> Result<Vec<JobOutcome>> {
    let grid = scenarios(cfg.mixed);
    let jobs: Vec<(Scenario, usize)> = cfg
        .scenarios
        .iter()
        .flat_map(|&id| (1..=cfg.runs).map(move |r| (id, r)))
        .map(|(id, r)| (grid[id - 1], r))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let outcomes = pool.install(|| {
        jobs.par_iter()
            .map(|&(scenario, run)| {
                let seed = job_seed(cfg.seed, scenario.id, run);
                match run_job(cfg, &scenario, run) {
                    Ok((status, classifications, values)) => JobOutcome {
                        scenario,
                        run,
                        seed,
                        status,
                        metrics: METRICS.iter().map(|m| m.to_string()).zip(values).collect(),
                        classifications,
                    },
                    Err(e) => {
                        log::warn!("scenario {} run {run} failed: {e:#}", scenario.id);
                        JobOutcome {
                            scenario,
                            run,
                            seed,
                            status: "failed".into(),
                            metrics: vec![("error".into(), None)],
                            classifications: Vec::new(),
                        }
                    }
                }
            })
            .collect()
    });
    Ok(outcomes)
}

pub fn audit_file(scenario: usize, run: usize) -> String {
    format!("s{scenario:03}_r{run:03}.csv")
}

pub fn write_results(path: &Path, outcomes: &[JobOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(HEADER)?;
    for o in outcomes {
        let sc = &o.scenario;
        for (metric, value) in &o.metrics {
            w.write_record([
                sc.id.to_string(),
                sc.mixed.to_string(),
                sc.pre_label(),
                sc.in_label(),
                sc.post.name().to_string(),
                o.run.to_string(),
                o.seed.to_string(),
                o.status.clone(),
                metric.clone(),
                value.map_or(String::new(), |v| v.to_string()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = SimConfig::from_args(args)?;
    let outcomes = run_simulation(&cfg, args.workers)?;
    write_results(&args.out, &outcomes)?;
    if let Some(dir) = &args.audit {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let manifest = serde_json::to_string_pretty(&cfg)?;
        fs::write(dir.join("manifest.json"), manifest + "\n")?;
        for o in outcomes.iter().filter(|o| o.status != "failed") {
            write_classifications(&dir.join(audit_file(o.scenario.id, o.run)), &o.classifications)?;
        }
    }
    let failed = outcomes.iter().filter(|o| o.status == "failed").count();
    log::info!("{} jobs, {failed} failed", outcomes.len());
    Ok(())
}
