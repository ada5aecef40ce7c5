//! Wall-time of one epoch of the contrastive objective as the view count
//! grows, for both cross-view mechanisms.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use dwcl::linalg::RandomSource;
use dwcl::loss::LossConfig;
use dwcl::par::Execution;
use dwcl::trainer::contrastive_objective;
use dwcl::weights::{enumerate_pairs, CrossViewPlan, Mechanism, PairWeight, WeightMode};
use dwcl::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub views: Vec<usize>,
    pub batch: usize,
    /// Width of each view's projected embedding.
    pub dim: usize,
    /// Batches per timed epoch.
    pub batches: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            views: vec![4, 8, 16, 32],
            batch: 64,
            dim: 64,
            batches: 4,
            repeats: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mechanism: Mechanism,
    pub views: usize,
    pub pairs: usize,
    /// Seconds per epoch, median over repeats.
    pub median: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub rows: Vec<BenchRow>,
    /// Slope of log(median time) against log(V).
    pub bestother_exponent: f64,
    pub pairwise_exponent: f64,
}

impl BenchResult {
    pub fn row(&self, mechanism: Mechanism, views: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.mechanism == mechanism && r.views == views)
    }
}

fn unit_plan(mechanism: Mechanism, v: usize) -> Result<CrossViewPlan> {
    let best = (mechanism == Mechanism::BestOther).then_some(0);
    let pairs = enumerate_pairs(mechanism, v, best)?
        .into_iter()
        .map(|(a, b)| PairWeight {
            view_a: a,
            view_b: b,
            si_weight: 1.0,
            cmi: 1.0,
            cmi_weight: 1.0,
            dual_weight: 1.0,
            loss_weight: 1.0,
        })
        .collect();
    Ok(CrossViewPlan {
        mechanism,
        weight_mode: WeightMode::None,
        best_view: best,
        pairs,
    })
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    if cfg.views.len() < 2 || cfg.views.iter().any(|&v| v < 2) {
        bail!("bench needs at least two view counts, each >= 2");
    }
    if cfg.batch < 2 || cfg.dim == 0 || cfg.batches == 0 || cfg.repeats == 0 {
        bail!("bench needs batch >= 2 and positive dim, batches and repeats");
    }
    let loss = LossConfig::default();
    let mut rng = RandomSource::new(cfg.seed);
    let vmax = *cfg.views.iter().max().unwrap();
    let epoch: Vec<Vec<Matrix>> = (0..cfg.batches)
        .map(|_| (0..vmax).map(|_| rng.normal_matrix(cfg.batch, cfg.dim, 1.0)).collect())
        .collect();

    let mut rows = Vec::new();
    for mechanism in [Mechanism::BestOther, Mechanism::Pairwise] {
        for &v in &cfg.views {
            let plan = unit_plan(mechanism, v)?;
            let mut times = Vec::with_capacity(cfg.repeats);
            for _ in 0..cfg.repeats {
                let start = Instant::now();
                for batch in &epoch {
                    let hs: Vec<&Matrix> = batch[..v].iter().collect();
                    let obj = contrastive_objective(&hs, &plan, &loss, Execution::Sequential)?;
                    std::hint::black_box(obj);
                }
                times.push(start.elapsed().as_secs_f64());
            }
            let min = times.iter().copied().fold(f64::INFINITY, f64::min);
            rows.push(BenchRow {
                mechanism,
                views: v,
                pairs: plan.pairs.len(),
                median: median(&mut times),
                min,
            });
        }
    }
    let slope = |m: Mechanism| {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.mechanism == m).map(|r| (r.views as f64, r.median)).unzip();
        loglog_slope(&xs, &ys)
    };
    Ok(BenchResult {
        bestother_exponent: slope(Mechanism::BestOther),
        pairwise_exponent: slope(Mechanism::Pairwise),
        config: cfg.clone(),
        rows,
    })
}

/// Runs the bench and writes `bench.csv` and `bench.json` into `out`.
pub fn cmd_bench(cfg: &BenchConfig, out: &Path) -> Result<BenchResult> {
    let result = run_bench(cfg)?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("bench.csv"))?;
    w.write_record(["mechanism", "views", "pairs", "median_s", "min_s"])?;
    for r in &result.rows {
        w.write_record([
            r.mechanism.name().to_string(),
            r.views.to_string(),
            r.pairs.to_string(),
            format!("{:.9}", r.median),
            format!("{:.9}", r.min),
        ])?;
    }
    w.flush()?;
    fs::write(out.join("bench.json"), serde_json::to_string_pretty(&result)?)?;
    Ok(result)
}
