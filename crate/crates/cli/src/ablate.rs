//! Mechanism × weight-mode ablation grid.
//!
//! For every seed the autoencoders are pretrained once and each arm continues
//! from a copy of that state, so arms differ only in fine-tuning. Arms of one
//! seed run on a pool of `jobs` threads; a failing arm is reported and the
//! others carry on.

use std::fs;
use std::path::Path;

use anyhow::Result;
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

use dwcl::data::MultiViewDataset;
use dwcl::trainer::{pretrain, run_from_pretrained, RunMode, TrainConfig, TrainOutcome, TrainState};
use dwcl::weights::{Mechanism, WeightMode};

use crate::{finish_run, mean_std, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Arm {
    pub mechanism: Mechanism,
    pub weight_mode: WeightMode,
}

impl Arm {
    /// Row label in the style of the published ablation table.
    pub fn label(&self) -> String {
        let m = match self.mechanism {
            Mechanism::BestOther => "B-O",
            Mechanism::Pairwise => "Pairwise",
        };
        let w = match self.weight_mode {
            WeightMode::None => "w/o W",
            WeightMode::CmiOnly => "w/ W_CMI",
            WeightMode::SiOnly => "w/ W_SIL",
            WeightMode::Dual => "w/ W_CMI + W_SIL",
        };
        format!("{m} {w}")
    }

    pub fn dir_name(&self) -> String {
        format!("{}_{}", self.mechanism.name(), self.weight_mode.name())
    }
}

/// What an arm runner receives.
pub struct ArmRun<'a> {
    pub arm: Arm,
    pub dataset: &'a MultiViewDataset,
    pub config: &'a TrainConfig,
    pub pretrained: &'a TrainState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub seeds: Vec<u64>,
    pub acc: Vec<f64>,
    pub nmi: Vec<f64>,
    /// First error message if any seed failed.
    pub failure: Option<String>,
}

impl ArmSummary {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

pub fn default_runner(run: &ArmRun<'_>) -> dwcl::Result<TrainOutcome> {
    run_from_pretrained(run.dataset, run.config, run.pretrained.clone(), None)
}

pub fn arms(cfg: &RunConfig) -> Vec<Arm> {
    cfg.mechanisms
        .iter()
        .flat_map(|&mechanism| cfg.weight_modes.iter().map(move |&weight_mode| Arm { mechanism, weight_mode }))
        .collect()
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<ArmSummary>> {
    ablate_with(cfg, &default_runner)
}

/// [`cmd_ablate`] with a custom per-arm runner.
pub fn ablate_with(
    cfg: &RunConfig,
    runner: &(dyn Fn(&ArmRun<'_>) -> dwcl::Result<TrainOutcome> + Sync),
) -> Result<Vec<ArmSummary>> {
    cfg.validate()?;
    let ds = cfg.dataset()?;
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    let arms = arms(cfg);
    let mut summaries: Vec<ArmSummary> = arms
        .iter()
        .map(|&arm| ArmSummary {
            arm,
            seeds: Vec::new(),
            acc: Vec::new(),
            nmi: Vec::new(),
            failure: None,
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;

    for r in 0..cfg.repeats {
        let seed = cfg.train.seed + r as u64;
        let base = TrainConfig {
            seed,
            mode: RunMode::Dwcl,
            ..cfg.train.clone()
        };
        let pretrained = match pretrain(&ds, &base) {
            Ok(st) => st,
            Err(e) => {
                let msg = format!("seed {seed}: {}", e.in_phase("pretrain"));
                error!("{msg}");
                for s in summaries.iter_mut().filter(|s| s.failure.is_none()) {
                    s.failure = Some(msg.clone());
                }
                continue;
            }
        };
        let results: Vec<Result<(f64, f64)>> = pool.install(|| {
            arms.par_iter()
                .map(|&arm| {
                    let config = TrainConfig {
                        mechanism: arm.mechanism,
                        weight_mode: arm.weight_mode,
                        ..base.clone()
                    };
                    let outcome = runner(&ArmRun {
                        arm,
                        dataset: &ds,
                        config: &config,
                        pretrained: &pretrained,
                    })?;
                    let dir = cfg.out.join(arm.dir_name()).join(format!("seed_{seed}"));
                    let done = finish_run(&ds, &config, outcome, &dir)?;
                    Ok((done.report.acc.unwrap_or(f64::NAN), done.report.nmi.unwrap_or(f64::NAN)))
                })
                .collect()
        });
        for (s, res) in summaries.iter_mut().zip(results) {
            match res {
                Ok((acc, nmi)) => {
                    info!("{} seed {seed}: ACC {acc:.4} NMI {nmi:.4}", s.arm.label());
                    s.seeds.push(seed);
                    s.acc.push(acc);
                    s.nmi.push(nmi);
                }
                Err(e) => {
                    error!("{} seed {seed} failed: {e:#}", s.arm.label());
                    s.failure.get_or_insert_with(|| format!("seed {seed}: {e:#}"));
                }
            }
        }
    }
    write_summary(&summaries, &cfg.out.join("summary.csv"))?;
    Ok(summaries)
}

/// One row per arm: means and sample standard deviations over seeds, or
/// `failed` with empty metric cells.
pub fn write_summary(summaries: &[ArmSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mechanism", "weights", "arm", "runs", "acc_mean", "acc_std", "nmi_mean", "nmi_std", "acc_pct", "nmi_pct",
        "status",
    ])?;
    for s in summaries {
        let mut row = vec![
            s.arm.mechanism.name().to_string(),
            s.arm.weight_mode.name().to_string(),
            s.arm.label(),
            s.acc.len().to_string(),
        ];
        if s.failed() {
            row.extend(std::iter::repeat(String::new()).take(6));
            row.push("failed".into());
        } else {
            let (am, asd) = mean_std(&s.acc);
            let (nm, nsd) = mean_std(&s.nmi);
            row.extend([
                format!("{am:.6}"),
                format!("{asd:.6}"),
                format!("{nm:.6}"),
                format!("{nsd:.6}"),
                format!("{:.2}±{:.2}", 100.0 * am, 100.0 * asd),
                format!("{:.2}±{:.2}", 100.0 * nm, 100.0 * nsd),
                "ok".into(),
            ]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_table_layout() {
        let a = Arm {
            mechanism: Mechanism::BestOther,
            weight_mode: WeightMode::Dual,
        };
        assert_eq!(a.label(), "B-O w/ W_CMI + W_SIL");
        let a = Arm {
            mechanism: Mechanism::Pairwise,
            weight_mode: WeightMode::None,
        };
        assert_eq!(a.label(), "Pairwise w/o W");
    }
}
