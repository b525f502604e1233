use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};

use crate::cli::ReplayArgs;
use crate::commands::read_classifications;
use crate::simulate::{audit_file, job_seed, scenarios, test_metrics, SimConfig, HEADER, METRICS};

#[derive(Debug, Default)]
pub struct ReplaySummary {
    pub jobs: usize,
    pub values: usize,
    pub skipped: usize,
    pub mismatches: Vec<String>,
}

fn same(stored: Option<f64>, recomputed: Option<f64>, tol: f64) -> bool {
    match (stored, recomputed) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        _ => false,
    }
}

/// Rebuilds each job's test set from the manifest, scores the stored
/// classifications and compares against the results file.
pub fn replay_check(args: &ReplayArgs) -> Result<ReplaySummary> {
    let manifest = args.audit.join("manifest.json");
    let text = fs::read_to_string(&manifest).with_context(|| format!("cannot read {}", manifest.display()))?;
    let cfg: SimConfig = serde_json::from_str(&text).with_context(|| format!("bad manifest {}", manifest.display()))?;

    let mut rdr =
        csv::Reader::from_path(&args.results).with_context(|| format!("cannot read {}", args.results.display()))?;
    if rdr.headers()?.iter().ne(HEADER) {
        bail!("{} is not a simulation results file", args.results.display());
    }
    // (scenario, run) -> (seed, status, metric -> value)
    type Job = (u64, String, BTreeMap<String, Option<f64>>);
    let mut jobs: BTreeMap<(usize, usize), Job> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id: usize = rec[0].parse()?;
        let run: usize = rec[5].parse()?;
        let seed: u64 = rec[6].parse()?;
        let value = if rec[9].is_empty() { None } else { Some(rec[9].parse::<f64>()?) };
        let job = jobs.entry((id, run)).or_insert_with(|| (seed, rec[7].to_string(), BTreeMap::new()));
        job.1 = rec[7].to_string();
        job.2.insert(rec[8].to_string(), value);
    }

    let grid = scenarios(cfg.mixed);
    let mut summary = ReplaySummary::default();
    for ((id, run), (seed, status, stored)) in &jobs {
        summary.jobs += 1;
        if status == "failed" {
            summary.skipped += 1;
            continue;
        }
        let Some(sc) = grid.get(id.wrapping_sub(1)) else {
            summary.mismatches.push(format!("scenario {id} is not in the grid"));
            continue;
        };
        if *seed != job_seed(cfg.seed, *id, *run) {
            summary.mismatches.push(format!("scenario {id} run {run}: seed {seed} does not match the manifest"));
            continue;
        }
        let data = cfg.generate(sc.family, *seed)?;
        let pred = read_classifications(&args.audit.join(audit_file(*id, *run)))?;
        if pred.len() != data.test.n_rows() {
            summary.mismatches.push(format!(
                "scenario {id} run {run}: {} classifications for {} test rows",
                pred.len(),
                data.test.n_rows()
            ));
            continue;
        }
        let recomputed = test_metrics(&data.test, &pred)?;
        for (name, value) in METRICS.iter().zip(recomputed) {
            summary.values += 1;
            match stored.get(*name) {
                Some(&s) if same(s, value, args.tol) => {}
                Some(&s) => summary
                    .mismatches
                    .push(format!("scenario {id} run {run} {name}: stored {s:?}, recomputed {value:?}")),
                None => summary.mismatches.push(format!("scenario {id} run {run}: {name} missing")),
            }
        }
    }
    Ok(summary)
}

pub fn replay(args: &ReplayArgs) -> Result<()> {
    let summary = replay_check(args)?;
    for m in &summary.mismatches {
        eprintln!("mismatch: {m}");
    }
    println!(
        "replayed {} jobs ({} failed jobs skipped), {} values, {} mismatches",
        summary.jobs,
        summary.skipped,
        summary.values,
        summary.mismatches.len()
    );
    if !summary.mismatches.is_empty() {
        bail!(crate::ReplayMismatch(summary.mismatches.len()));
    }
    Ok(())
}
