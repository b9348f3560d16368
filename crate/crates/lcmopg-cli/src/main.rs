//! `lcmopg` — train latent-conditioned multi-objective policies, evaluate
//! checkpoints, and generate reference Pareto fronts.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lcmopg::checkpoint::Checkpoint;
use lcmopg::csvio;
use lcmopg::envs::dst_exact_pf;
use lcmopg::harness::{
    default_out_root, execute_batch, export_pf_csv, paper_spec, run_label, EnvKind,
    ExperimentSpec,
};
use lcmopg::lqg_oracle::{oracle_pf, simplex_grid};
use lcmopg::objective_space::ParetoArchive;
use lcmopg::trainer::Trainer;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "lcmopg",
    version,
    about = "Latent-conditioned multi-objective policy gradient toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one or more seeds of an experiment and report hypervolumes.
    Train(TrainArgs),
    /// Evaluate a policy checkpoint and export its Pareto front.
    Evaluate(EvaluateArgs),
    /// Generate the scalarization-oracle Pareto front of an LQG benchmark.
    Oracle(OracleArgs),
    /// Emit the analytic Pareto front of a Deep Sea Treasure variant.
    ExactPf(ExactPfArgs),
    /// Compute the hypervolume of a CSV point set against a reference point.
    Hv(HvArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Benchmark id: dst-convex | dst-original | ftn5 | ftn6 | ftn7 |
    /// lqg2d | lqg3d | minecart
    #[arg(long, conflicts_with = "config")]
    env: Option<String>,
    /// Read the experiment spec from a file instead of a preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset name (currently `paper`).
    #[arg(long, default_value = "paper")]
    preset: String,
    /// Master seed of the first run.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs (consecutive seeds).
    #[arg(long)]
    runs: Option<usize>,
    /// Algorithm variant: pg | pg-v
    #[arg(long)]
    variant: Option<String>,
    /// Diversity-bonus coefficient (ablation shortcut).
    #[arg(long)]
    beta: Option<f64>,
    /// Output root (defaults to $LCMOPG_RUNS, then ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra spec overrides, e.g. --override iterations=100
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment spec describing the environment and policy (for example
    /// the `config.txt` of a run directory).
    #[arg(long)]
    config: PathBuf,
    /// Policy checkpoint to evaluate (for example `best.ckpt`).
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test latent population size (defaults to the spec's n_lat_test).
    #[arg(long)]
    n_latents: Option<usize>,
    /// Episodes averaged per latent (defaults to the spec's eval_episodes).
    #[arg(long)]
    episodes: Option<usize>,
    /// Seed for the evaluation streams (defaults to the checkpoint's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Pareto-front CSV destination.
    #[arg(long, default_value = "pf.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// LQG benchmark id: lqg2d | lqg3d
    #[arg(long)]
    env: String,
    /// Process-noise level sigma.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Discount factor.
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    /// Simplex-grid divisions for the scalarization weights (100 matches
    /// the published oracle protocol: 99 weights in 2D, 4851 in 3D).
    #[arg(long, default_value_t = 100)]
    divisions: usize,
    /// Episodes averaged per weight (noisy environments only).
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report hv / normalizer^m alongside the raw hypervolume.
    #[arg(long)]
    normalize: Option<f64>,
    /// Pareto-front CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactPfArgs {
    /// DST variant: dst-convex | dst-original
    #[arg(long)]
    env: String,
    /// Discount factor (defaults to the variant's benchmark value).
    #[arg(long)]
    gamma: Option<f64>,
    /// Pareto-front CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HvArgs {
    /// Reference point, comma-separated (e.g. `0,-19`). Rows of the CSV
    /// must carry the return coordinates in their first columns.
    #[arg(long = "ref")]
    ref_point: String,
    /// CSV file of points (extra columns beyond the reference dimension
    /// are ignored).
    csv: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Train(args) => train(args),
        Cmd::Evaluate(args) => evaluate(args),
        Cmd::Oracle(args) => oracle(args),
        Cmd::ExactPf(args) => exact_pf(args),
        Cmd::Hv(args) => hv(args),
    }
}

fn build_spec(args: &TrainArgs) -> Result<ExperimentSpec> {
    let mut spec = match (&args.config, &args.env) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            ExperimentSpec::parse(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(env)) => {
            if args.preset != "paper" {
                bail!("unknown preset {:?} (known: paper)", args.preset);
            }
            paper_spec(EnvKind::parse(env)?)
        }
        (None, None) => bail!("pass --env <id> or --config <file>"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(runs) = args.runs {
        spec.runs = runs;
    }
    if let Some(variant) = &args.variant {
        spec.apply_override("variant", variant)?;
    }
    if let Some(beta) = args.beta {
        spec.apply_override("beta", &beta.to_string())?;
    }
    for pair in &args.overrides {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("override {pair:?} is not KEY=VALUE"))?;
        spec.apply_override(key.trim(), value.trim())
            .with_context(|| format!("applying override {pair:?}"))?;
    }
    Ok(spec)
}

fn train(args: TrainArgs) -> Result<()> {
    let spec = build_spec(&args)?;
    let out_root = args.out.unwrap_or_else(default_out_root);
    println!(
        "training {} ({} run{}, seeds {}..={})",
        run_label(&spec),
        spec.runs,
        if spec.runs == 1 { "" } else { "s" },
        spec.seed,
        spec.seed + spec.runs.saturating_sub(1) as u64,
    );
    let batch = execute_batch(&spec, &out_root)?;
    for run in &batch.runs {
        let diverged = match &run.diverged {
            Some(detail) => format!("  DIVERGED ({detail})"),
            None => String::new(),
        };
        println!(
            "  seed {}: best HV {:.4} @ iter {}, final HV {:.4} ({} points, {:.1}s){}",
            run.seed,
            run.best_hv,
            run.best_iteration,
            run.final_hv,
            run.final_archive_len,
            run.wall_secs,
            diverged,
        );
    }
    println!(
        "best HV over {} runs: {:.4} +/- {:.4}",
        batch.runs.len(),
        batch.mean_best_hv,
        batch.std_best_hv,
    );
    println!(
        "final HV over {} runs: {:.4} +/- {:.4}",
        batch.runs.len(),
        batch.mean_final_hv,
        batch.std_final_hv,
    );
    println!("artifacts: {}", batch.dir.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut spec =
        ExperimentSpec::parse(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(n) = args.n_latents {
        spec.apply_override("n_lat_test", &n.to_string())?;
    }
    if let Some(eps) = args.episodes {
        spec.apply_override("eval_episodes", &eps.to_string())?;
    }
    let ckpt = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let params = ckpt
        .buffer("policy")
        .context("checkpoint has no `policy` buffer")?;
    let seed = args.seed.unwrap_or(ckpt.seed);

    let env = spec.make_env()?;
    let mut trainer = Trainer::new(env.as_ref(), spec.train.clone(), seed)?;
    trainer
        .policy_mut()
        .set_params(params.to_vec())
        .context("checkpoint does not fit this policy architecture")?;
    let eval = trainer.final_evaluation()?;

    export_pf_csv(&args.out, &eval.archive, env.objectives(), spec.train.d_lat)?;
    println!(
        "hv = {} ({} nondominated points, {} latents)",
        eval.hypervolume,
        eval.archive.points().len(),
        spec.train.n_lat_test,
    );
    println!("pareto front: {}", args.out.display());
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let kind = EnvKind::parse(&args.env)?;
    let m = match kind {
        EnvKind::Lqg2 => 2,
        EnvKind::Lqg3 => 3,
        _ => bail!("oracle supports lqg2d and lqg3d, got {}", args.env),
    };
    let env = lcmopg::envs::LqgEnv::new(m, args.sigma)?;
    let ref_point = paper_spec(kind).train.ref_point;
    let weights = simplex_grid(m, args.divisions);
    let (archive, hv) = oracle_pf(
        &env,
        args.gamma,
        &weights,
        args.episodes,
        &ref_point,
        args.seed,
    )?;
    println!(
        "hv = {hv} ({} nondominated points, {} weights)",
        archive.points().len(),
        weights.len(),
    );
    if let Some(normalizer) = args.normalize {
        println!("hv / {normalizer}^{m} = {}", hv / normalizer.powi(m as i32));
    }
    if let Some(out) = &args.out {
        let mut header: Vec<String> = (0..m).map(|j| format!("return{j}")).collect();
        header.extend((0..m).map(|j| format!("weight{j}")));
        let rows: Vec<Vec<f64>> = archive
            .points()
            .iter()
            .zip(archive.latents())
            .map(|(p, w)| p.iter().chain(w).copied().collect())
            .collect();
        csvio::write_csv(out, &header, &rows)?;
        println!("pareto front: {}", out.display());
    }
    Ok(())
}

fn exact_pf(args: ExactPfArgs) -> Result<()> {
    let kind = EnvKind::parse(&args.env)?;
    let (env, default_gamma) = match kind {
        EnvKind::DstConvex => (lcmopg::envs::DstEnv::convex(), 0.99),
        EnvKind::DstOriginal => (lcmopg::envs::DstEnv::original(), 1.0),
        _ => bail!("exact-pf supports dst-convex and dst-original, got {}", args.env),
    };
    let gamma = args.gamma.unwrap_or(default_gamma);
    let points = dst_exact_pf(&env, gamma)?;
    let ref_point = paper_spec(kind).train.ref_point;
    let mut archive = ParetoArchive::new();
    for p in &points {
        archive.push(p.clone(), vec![]);
    }
    let hv = archive.hypervolume(&ref_point)?;
    println!(
        "hv = {hv} vs ref ({}) at gamma = {gamma} ({} points)",
        join(&ref_point),
        points.len(),
    );
    if let Some(out) = &args.out {
        let header = vec!["return0".to_string(), "return1".to_string()];
        csvio::write_csv(out, &header, &points)?;
        println!("pareto front: {}", out.display());
    }
    Ok(())
}

fn hv(args: HvArgs) -> Result<()> {
    let ref_point: Vec<f64> = args
        .ref_point
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("reference coordinate {s:?}"))
        })
        .collect::<Result<_>>()?;
    let table = csvio::read_csv(&args.csv)?;
    if table.header.len() < ref_point.len() {
        bail!(
            "{} has {} columns but the reference point has {} coordinates",
            args.csv.display(),
            table.header.len(),
            ref_point.len(),
        );
    }
    let mut archive = ParetoArchive::new();
    for row in &table.rows {
        archive.push(row[..ref_point.len()].to_vec(), vec![]);
    }
    let hv = archive.hypervolume(&ref_point)?;
    println!(
        "hv = {hv} ({} points, {} nondominated)",
        table.rows.len(),
        archive.nondominated().points().len(),
    );
    Ok(())
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
