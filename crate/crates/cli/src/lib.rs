//! Commands behind the `dwcl` binary: `synth`, `train`, `ablate`, `bench`
//! and `eval`. Each is a plain function so tests can drive it directly.

pub mod ablate;
pub mod bench;
pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use dwcl::data::{generate_synthetic, save_dataset, MultiViewDataset, SyntheticSpec};
use dwcl::eval::report::read_report;
use dwcl::eval::{emit_report, score_run, RunReport, Scores};
use dwcl::net::checkpoint::{read_checkpoint, write_checkpoint};
use dwcl::trainer::{cluster_embeddings, run, TrainConfig, TrainOutcome};

pub use ablate::{cmd_ablate, ArmSummary};
pub use bench::{cmd_bench, BenchConfig, BenchResult};
pub use config::{DataSource, Overrides, RunConfig};

pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";

/// Generates a synthetic dataset from a JSON spec and writes it to `out`.
pub fn cmd_synth(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<MultiViewDataset> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading spec {}", spec_path.display()))?;
    let mut spec: SyntheticSpec = serde_json::from_str(&text).context("parsing synthetic spec")?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let ds = generate_synthetic(&spec)?;
    save_dataset(&ds, out)?;
    Ok(ds)
}

/// Sample mean and standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One finished training run and where its files went.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub dir: PathBuf,
    pub report: RunReport,
    pub predicted: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub acc: Vec<f64>,
    pub nmi: Vec<f64>,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
}

/// Writes checkpoints, the final model and the report files of one run.
pub fn finish_run(ds: &MultiViewDataset, config: &TrainConfig, outcome: TrainOutcome, dir: &Path) -> Result<TrainRun> {
    let meta = serde_json::json!({
        "phase": "final",
        "best_view": outcome.state.best_view(),
        "config": config,
    });
    write_checkpoint(&dir.join(CHECKPOINT_DIR).join(FINAL_CHECKPOINT), &outcome.state.models, meta)?;
    let report = RunReport::from_outcome(ds, config, &outcome)?;
    emit_report(&report, &outcome.state.history, &outcome.predicted, dir)?;
    Ok(TrainRun {
        dir: dir.to_path_buf(),
        report,
        predicted: outcome.predicted,
    })
}

pub fn train_one(ds: &MultiViewDataset, config: &TrainConfig, dir: &Path) -> Result<TrainRun> {
    let ckpt = dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt)?;
    info!("training {} (seed {}) into {}", ds.name, config.seed, dir.display());
    let outcome = run(ds, config, Some(&ckpt))?;
    finish_run(ds, config, outcome, dir)
}

/// Runs `repeats` seeds (`seed`, `seed + 1`, ...). A single run writes into
/// `out`; repeats write into `out/seed_<s>` plus `out/summary.json`.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<TrainRun>> {
    cfg.validate()?;
    let ds = cfg.dataset()?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let mut runs = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let config = TrainConfig {
            seed: cfg.train.seed + r as u64,
            ..cfg.train.clone()
        };
        let dir = if cfg.repeats == 1 {
            cfg.out.clone()
        } else {
            cfg.out.join(format!("seed_{}", config.seed))
        };
        runs.push(train_one(&ds, &config, &dir)?);
    }
    if cfg.repeats > 1 {
        let acc: Vec<f64> = runs.iter().filter_map(|r| r.report.acc).collect();
        let nmi: Vec<f64> = runs.iter().filter_map(|r| r.report.nmi).collect();
        let (acc_mean, acc_std) = mean_std(&acc);
        let (nmi_mean, nmi_std) = mean_std(&nmi);
        let summary = RepeatSummary {
            seeds: runs.iter().map(|r| r.report.config.seed).collect(),
            acc,
            nmi,
            acc_mean,
            acc_std,
            nmi_mean,
            nmi_std,
        };
        fs::write(cfg.out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub checkpoint: PathBuf,
    pub best_view: Option<usize>,
    #[serde(flatten)]
    pub scores: Scores,
    pub predicted: Vec<usize>,
}

/// Recomputes the final clustering and metrics from a saved model. The
/// checkpoint defaults to `out/checkpoints/final.ckpt`; results go to
/// `out/eval.json`.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<EvalResult> {
    let path = checkpoint.map_or_else(|| cfg.out.join(CHECKPOINT_DIR).join(FINAL_CHECKPOINT), Path::to_path_buf);
    let ck = read_checkpoint(&path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let config: TrainConfig = match ck.meta.get("config") {
        Some(c) => serde_json::from_value(c.clone()).context("checkpoint config")?,
        None => cfg.train.clone(),
    };
    let best_view = ck.meta.get("best_view").and_then(|b| b.as_u64()).map(|b| b as usize);
    let ds = cfg.dataset()?;
    if ck.models.len() != ds.n_views() {
        anyhow::bail!("checkpoint has {} views, dataset has {}", ck.models.len(), ds.n_views());
    }
    let embeddings = ck
        .models
        .iter()
        .zip(&ds.views)
        .map(|(m, x)| m.embed(x))
        .collect::<dwcl::Result<Vec<_>>>()?;
    let predicted = cluster_embeddings(&embeddings, ds.k, &config, best_view)?;
    let scores = score_run(&ds, &config, &embeddings, &predicted)?;
    let result = EvalResult {
        checkpoint: path,
        best_view,
        scores,
        predicted,
    };
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("eval.json"), serde_json::to_string_pretty(&result)?)?;
    Ok(result)
}

/// `report.json` with the timing block removed, for reproducibility diffs.
pub fn report_without_timings(path: &Path) -> Result<String> {
    let r = read_report(path)?;
    Ok(serde_json::to_string_pretty(&r.without_timings())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_sample_convention() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.7]), (0.7, 0.0));
    }
}
