//! Run report: `report.json`, `losses.csv`, `loss_curve.svg` and
//! `predictions.csv` in one output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{accuracy, nmi};
use crate::cluster::{kmeans, KMeansConfig};
use crate::data::MultiViewDataset;
use crate::trainer::{LossRecord, Phase, RunMode, TrainConfig, TrainOutcome};
use crate::weights::ViewDiagnostics;
use crate::linalg::Matrix;
use crate::Result;

/// Wall-clock seconds per phase. Not covered by determinism.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub pretrain: f64,
    pub initialize: f64,
    pub finetune: f64,
    pub final_cluster: f64,
    pub evaluate: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.pretrain + self.initialize + self.finetune + self.final_cluster + self.evaluate
    }
}

/// Mean losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub phase: Phase,
    pub iteration: usize,
    pub epoch: usize,
    pub total: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub contrastive: Option<f64>,
    pub reconstruction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    pub dataset: String,
    pub n: usize,
    pub k: usize,
    /// `None` when the dataset has no ground truth.
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub per_view_acc: Vec<f64>,
    pub per_view_nmi: Vec<f64>,
    pub best_view_timeline: Vec<usize>,
    pub weights_timeline: Vec<ViewDiagnostics>,
    pub loss_curve: Vec<EpochLoss>,
    pub kmeans_repairs: usize,
    pub timings: Timings,
    pub config: TrainConfig,
}

impl RunReport {
    /// Scores a finished run against the dataset labels, if any. Per-view
    /// metrics come from k-means on each view's `Ĥ`.
    pub fn from_outcome(ds: &MultiViewDataset, config: &TrainConfig, outcome: &TrainOutcome) -> Result<Self> {
        let t = std::time::Instant::now();
        let scores = score_run(ds, config, &outcome.state.embed(ds)?, &outcome.predicted)?;
        let mut timings = outcome.timings;
        timings.evaluate = t.elapsed().as_secs_f64();
        Ok(RunReport {
            mode: config.mode,
            dataset: ds.name.clone(),
            n: ds.n(),
            k: ds.k,
            acc: scores.acc,
            nmi: scores.nmi,
            per_view_acc: scores.per_view_acc,
            per_view_nmi: scores.per_view_nmi,
            best_view_timeline: outcome.state.timeline.iter().map(|d| d.best_view).collect(),
            weights_timeline: outcome.state.timeline.clone(),
            loss_curve: epoch_losses(&outcome.state.history, config.mode),
            kmeans_repairs: outcome.state.repairs,
            timings,
            config: config.clone(),
        })
    }

    /// Copy with every timing zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        RunReport {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

/// Overall and per-view metrics; empty when the dataset has no labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub per_view_acc: Vec<f64>,
    pub per_view_nmi: Vec<f64>,
}

/// Scores `predicted` against the dataset labels. Per-view metrics come from
/// k-means on each view's `Ĥ`.
pub fn score_run(
    ds: &MultiViewDataset,
    config: &TrainConfig,
    embeddings: &[(Matrix, Matrix)],
    predicted: &[usize],
) -> Result<Scores> {
    let Some(truth) = &ds.labels else {
        return Ok(Scores::default());
    };
    let mut scores = Scores {
        acc: Some(accuracy(predicted, truth, ds.k)?),
        nmi: Some(nmi(predicted, truth)?),
        ..Scores::default()
    };
    for (v, (_, hhat)) in embeddings.iter().enumerate() {
        let cfg = KMeansConfig::new(ds.k, config.seed.wrapping_add(1000 + v as u64)).with_options(config.kmeans);
        let labels = kmeans(hhat, &cfg)?.labels;
        scores.per_view_acc.push(accuracy(&labels, truth, ds.k)?);
        scores.per_view_nmi.push(nmi(&labels, truth)?);
    }
    Ok(scores)
}

pub fn epoch_losses(history: &[LossRecord], mode: RunMode) -> Vec<EpochLoss> {
    let mut out: Vec<EpochLoss> = Vec::new();
    let mut count = 0usize;
    for r in history {
        let same = out
            .last()
            .is_some_and(|e| e.phase == r.phase && e.iteration == r.iteration && e.epoch == r.epoch);
        if !same {
            finish(&mut out, count);
            count = 0;
            out.push(EpochLoss {
                phase: r.phase,
                iteration: r.iteration,
                epoch: r.epoch,
                total: 0.0,
                contrastive: (mode == RunMode::Dwcl).then_some(0.0),
                reconstruction: 0.0,
            });
        }
        let e = out.last_mut().expect("pushed above");
        e.total += r.total;
        e.reconstruction += r.reconstruction;
        if let Some(c) = e.contrastive.as_mut() {
            *c += r.contrastive;
        }
        count += 1;
    }
    finish(&mut out, count);
    out
}

fn finish(out: &mut [EpochLoss], count: usize) {
    if let Some(e) = out.last_mut() {
        let n = count.max(1) as f64;
        e.total /= n;
        e.reconstruction /= n;
        if let Some(c) = e.contrastive.as_mut() {
            *c /= n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub report: PathBuf,
    pub losses: PathBuf,
    pub curve: PathBuf,
    pub predictions: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        ReportFiles {
            report: dir.join("report.json"),
            losses: dir.join("losses.csv"),
            curve: dir.join("loss_curve.svg"),
            predictions: dir.join("predictions.csv"),
        }
    }
}

pub fn emit_report(report: &RunReport, history: &[LossRecord], predicted: &[usize], dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir)?;
    let files = ReportFiles::in_dir(dir);
    fs::write(&files.report, serde_json::to_string_pretty(report)?)?;

    let mut w = csv::Writer::from_path(&files.losses)?;
    w.write_record(["iteration", "epoch", "batch", "total", "contrastive", "reconstruction"])?;
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            r.epoch.to_string(),
            r.batch.to_string(),
            r.total.to_string(),
            r.contrastive.to_string(),
            r.reconstruction.to_string(),
        ])?;
    }
    w.flush()?;

    fs::write(&files.curve, loss_curve_svg(&report.loss_curve))?;

    let mut w = csv::Writer::from_path(&files.predictions)?;
    w.write_record(["index", "cluster"])?;
    for (i, p) in predicted.iter().enumerate() {
        w.write_record([i.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(files)
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;

/// Epoch-mean losses against epoch index, one polyline per component.
pub fn loss_curve_svg(curve: &[EpochLoss]) -> String {
    let mut series: Vec<(&str, &str, Vec<f64>)> = vec![
        ("total", "#1f77b4", curve.iter().map(|e| e.total).collect()),
        ("reconstruction", "#2ca02c", curve.iter().map(|e| e.reconstruction).collect()),
    ];
    if curve.iter().any(|e| e.contrastive.is_some()) {
        series.push(("contrastive", "#d62728", curve.iter().map(|e| e.contrastive.unwrap_or(0.0)).collect()));
    }
    let ymax = series
        .iter()
        .flat_map(|s| s.2.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let xs = (curve.len().max(2) - 1) as f64;
    let px = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / xs;
    let py = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v / ymax);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11">{:.4}</text>"#, 2.0, MARGIN - 4.0, ymax);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11">epoch</text>"#, WIDTH / 2.0, HEIGHT - 10.0);
    if let Some(first_ft) = curve.iter().position(|e| e.phase == Phase::Finetune) {
        let x = px(first_ft);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{MARGIN}" x2="{x:.2}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
            HEIGHT - MARGIN
        );
    }
    for (k, (name, color, ys)) in series.iter().enumerate() {
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="{name}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" font-size="11" fill="{color}">{name}</text>"#,
            WIDTH - MARGIN - 90.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
