//! Clustering metrics and run reports.

mod hungarian;
pub mod report;

pub use hungarian::hungarian_match;
pub use report::{emit_report, score_run, ReportFiles, RunReport, Scores, Timings};

use crate::cluster::{kmeans, KMeansConfig};
use crate::linalg::Matrix;
use crate::weights::label_information;
use crate::{Error, Result};

/// Cluster-by-class count table, zero-padded to `max(k, clusters)` square.
pub fn confusion(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<Vec<u64>>> {
    if pred.len() != truth.len() {
        return Err(Error::shape("confusion", truth.len(), pred.len()));
    }
    if let Some(&bad) = truth.iter().find(|&&t| t >= k) {
        return Err(Error::invalid(format!("true label {bad} outside [0, {k})")));
    }
    let size = pred.iter().map(|&p| p + 1).max().unwrap_or(0).max(k);
    let mut table = vec![vec![0u64; size]; size];
    for (&p, &t) in pred.iter().zip(truth) {
        table[p][t] += 1;
    }
    Ok(table)
}

/// Clustering accuracy under the best one-to-one cluster-to-class matching.
pub fn accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::invalid("accuracy of an empty labeling"));
    }
    let table = confusion(pred, truth, k)?;
    let perm = hungarian_match(&table)?;
    let matched: u64 = perm.iter().enumerate().map(|(r, &c)| table[r][c]).sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// Normalized mutual information, `2I / (H_pred + H_truth)`.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(label_information(pred, truth)?.normalized())
}

/// ACC/NMI of k-means run separately on each view's features.
pub fn per_view_metrics(
    features: &[Matrix],
    truth: &[usize],
    config: &KMeansConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut accs = Vec::with_capacity(features.len());
    let mut nmis = Vec::with_capacity(features.len());
    for (v, f) in features.iter().enumerate() {
        let cfg = KMeansConfig {
            seed: config.seed.wrapping_add(v as u64),
            ..*config
        };
        let labels = kmeans(f, &cfg)?.labels;
        accs.push(accuracy(&labels, truth, config.k)?);
        nmis.push(nmi(&labels, truth)?);
    }
    Ok((accs, nmis))
}
