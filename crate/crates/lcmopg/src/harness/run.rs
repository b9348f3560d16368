//! Run-directory orchestration: executes experiment specs, streaming
//! per-iteration metrics to CSV and leaving behind a self-describing
//! directory (config copy, checkpoints, final Pareto-front export) for
//! every seed.

use crate::checkpoint::Checkpoint;
use crate::csvio;
use crate::error::{Error, Result};
use crate::harness::spec::ExperimentSpec;
use crate::trainer::{IterationStats, Trainer, Variant};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable naming the root directory for run output.
pub const OUT_ROOT_ENV: &str = "LCMOPG_RUNS";

/// Output root: `$LCMOPG_RUNS` if set, else `./runs`.
pub fn default_out_root() -> PathBuf {
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from("runs"),
    }
}

/// Directory label for a spec: environment id plus variant.
pub fn run_label(spec: &ExperimentSpec) -> String {
    let variant = match spec.train.variant {
        Variant::Pg => "pg",
        Variant::PgV => "pg-v",
    };
    format!("{}-{}", spec.env.id(), variant)
}

/// Outcome of one seeded run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub seed: u64,
    /// Iterations that completed (equals the configured count unless the
    /// divergence guard fired).
    pub iterations_run: usize,
    /// Iteration whose monitoring evaluation scored best (0 if none ran).
    pub best_iteration: usize,
    /// Best monitoring hypervolume (NaN if no evaluation ran).
    pub best_hv: f64,
    /// Hypervolume of the best policy under the full test population.
    pub final_hv: f64,
    /// Nondominated points in the final test archive.
    pub final_archive_len: usize,
    pub wall_secs: f64,
    /// Diagnostic detail when the divergence guard aborted the run.
    pub diverged: Option<String>,
}

/// Outcome of a batch of runs over consecutive seeds.
#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub dir: PathBuf,
    pub runs: Vec<RunSummary>,
    pub mean_best_hv: f64,
    pub std_best_hv: f64,
    pub mean_final_hv: f64,
    pub std_final_hv: f64,
}

const METRIC_COLUMNS: [&str; 10] = [
    "iteration",
    "policy_loss",
    "mean_abs_weight",
    "mean_ep_len",
    "max_ep_len",
    "test_hv",
    "archive_len",
    "q_loss",
    "v_loss",
    "wall_secs",
];

fn metric_row(s: &IterationStats) -> Vec<f64> {
    let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
    vec![
        s.iteration as f64,
        s.policy_loss,
        s.mean_abs_weight,
        s.mean_ep_len,
        s.max_ep_len as f64,
        opt(s.test_hv),
        opt(s.archive_len.map(|n| n as f64)),
        opt(s.q_loss),
        opt(s.v_loss),
        s.wall_secs,
    ]
}

fn pf_header(objectives: usize, d_lat: usize) -> Vec<String> {
    let mut header: Vec<String> = (0..objectives).map(|j| format!("return{j}")).collect();
    header.extend((0..d_lat).map(|j| format!("latent{j}")));
    header
}

/// Write a Pareto archive as CSV: `objectives` return columns followed by
/// `d_lat` latent columns, one row per archive point.
pub fn export_pf_csv(
    path: &Path,
    archive: &crate::objective_space::ParetoArchive,
    objectives: usize,
    d_lat: usize,
) -> Result<()> {
    let rows: Vec<Vec<f64>> = archive
        .points()
        .iter()
        .zip(archive.latents())
        .map(|(point, latent)| {
            let mut row = point.clone();
            row.extend_from_slice(latent);
            row
        })
        .collect();
    csvio::write_csv(path, &pf_header(objectives, d_lat), &rows)
}

/// Train one seed of `spec` into `dir`.
///
/// The directory receives `config.txt` (a spec that reproduces exactly this
/// run), `metrics.csv` (one row per completed iteration), `final.ckpt`
/// (end-of-training policy), `best.ckpt` (best monitored policy), and
/// `pf.csv` (test-population Pareto front of the best policy: one row per
/// nondominated point, return columns then latent columns).
///
/// A run aborted by the divergence guard is reported, not propagated: the
/// summary carries the diagnostic, a `DIVERGED.txt` marker is written, and
/// the checkpoints hold the last finite parameters.
pub fn execute_run(spec: &ExperimentSpec, seed: u64, dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    std::fs::create_dir_all(dir)?;

    let mut run_spec = spec.clone();
    run_spec.seed = seed;
    run_spec.runs = 1;
    std::fs::write(dir.join("config.txt"), run_spec.to_text())?;

    let env = spec.make_env()?;
    let mut trainer = Trainer::new(env.as_ref(), spec.train.clone(), seed)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(spec.train.iterations);
    let outcome = trainer.run_with(|stats| rows.push(metric_row(stats)));

    debug_assert!(
        rows.windows(2).all(|w| w[0][0] < w[1][0]),
        "iteration indices must increase strictly"
    );
    csvio::write_csv(&dir.join("metrics.csv"), &metric_header(), &rows)?;

    let (diverged, best_iteration, best_hv, best_params) = match outcome {
        Ok(report) => (
            None,
            report.best_iteration,
            report.best_test_hv,
            report.best_params,
        ),
        Err(Error::Divergence { iteration, detail }) => {
            let text = format!("iteration {iteration}: {detail}");
            std::fs::write(dir.join("DIVERGED.txt"), format!("{text}\n"))?;
            // Fall back on the last finite parameters (already restored
            // into the policy) when no evaluation ever completed.
            let (bi, bh, bp) = match trainer.best_snapshot() {
                Some((t, hv, params)) => (t, hv, params.to_vec()),
                None => (0, f64::NAN, trainer.policy().params().to_vec()),
            };
            (Some(text), bi, bh, bp)
        }
        Err(e) => return Err(e),
    };
    let iterations_run = rows.len();

    Checkpoint {
        seed,
        iteration: iterations_run as u64,
        buffers: vec![("policy".into(), trainer.policy().params().to_vec())],
    }
    .save(&dir.join("final.ckpt"))?;
    Checkpoint {
        seed,
        iteration: best_iteration as u64,
        buffers: vec![("policy".into(), best_params.clone())],
    }
    .save(&dir.join("best.ckpt"))?;

    // Export the Pareto front of the best policy under the full test
    // latent population.
    trainer.policy_mut().set_params(best_params)?;
    let eval = trainer.final_evaluation()?;
    let archive = &eval.archive;
    export_pf_csv(
        &dir.join("pf.csv"),
        archive,
        env.objectives(),
        spec.train.d_lat,
    )?;

    Ok(RunSummary {
        dir: dir.to_path_buf(),
        seed,
        iterations_run,
        best_iteration,
        best_hv,
        final_hv: eval.hypervolume,
        final_archive_len: archive.points().len(),
        wall_secs: started.elapsed().as_secs_f64(),
        diverged,
    })
}

fn metric_header() -> Vec<String> {
    METRIC_COLUMNS.iter().map(|c| c.to_string()).collect()
}

/// Execute all `spec.runs` seeds (`spec.seed .. spec.seed + runs`) under
/// `out_root/<env>-<variant>/seed-<n>/` and aggregate their scores.
///
/// The batch directory receives the original spec as `config.txt` and a
/// `batch.csv` with one row per run.
pub fn execute_batch(spec: &ExperimentSpec, out_root: &Path) -> Result<BatchSummary> {
    if spec.runs == 0 {
        return Err(Error::contract("a batch needs at least one run"));
    }
    let dir = out_root.join(run_label(spec));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.txt"), spec.to_text())?;

    let mut runs = Vec::with_capacity(spec.runs);
    for r in 0..spec.runs {
        let seed = spec.seed + r as u64;
        let run_dir = dir.join(format!("seed-{seed}"));
        runs.push(execute_run(spec, seed, &run_dir)?);
    }

    let batch_rows: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| {
            vec![
                r.seed as f64,
                r.iterations_run as f64,
                r.best_iteration as f64,
                r.best_hv,
                r.final_hv,
                r.final_archive_len as f64,
                r.wall_secs,
                if r.diverged.is_some() { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    let batch_header: Vec<String> = [
        "seed",
        "iterations_run",
        "best_iteration",
        "best_hv",
        "final_hv",
        "final_archive_len",
        "wall_secs",
        "diverged",
    ]
    .iter()
    .map(|c| c.to_string())
    .collect();
    csvio::write_csv(&dir.join("batch.csv"), &batch_header, &batch_rows)?;

    let (mean_best_hv, std_best_hv) = mean_std(runs.iter().map(|r| r.best_hv));
    let (mean_final_hv, std_final_hv) = mean_std(runs.iter().map(|r| r.final_hv));
    Ok(BatchSummary {
        dir,
        runs,
        mean_best_hv,
        std_best_hv,
        mean_final_hv,
        std_final_hv,
    })
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
