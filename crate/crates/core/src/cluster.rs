//! k-means labelling, silhouette scoring and best-view selection.

use serde::{Deserialize, Serialize};

use crate::linalg::{squared_euclidean, Matrix, RandomSource};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Restart/iteration budget shared by every k-means call of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansOptions {
    pub n_init: usize,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl KMeansOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 || self.max_iters == 0 {
            return Err(Error::invalid("k-means needs n_init >= 1 and max_iters >= 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("k-means tol must be >= 0"));
        }
        Ok(())
    }
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            n_init: 10,
            max_iters: 300,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub options: KMeansOptions,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansConfig {
            k,
            seed,
            options: KMeansOptions::default(),
        }
    }

    pub fn with_options(mut self, options: KMeansOptions) -> Self {
        self.options = options;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Number of empty-cluster repairs performed by the winning restart.
    pub repairs: usize,
}

/// Best-inertia k-means over `n_init` k-means++ restarts.
///
/// Restart `r` draws from stream `r` of the configured seed, so the result
/// does not depend on how restarts are scheduled.
pub fn kmeans(x: &Matrix, config: &KMeansConfig) -> Result<KMeansResult> {
    kmeans_with(x, config, Execution::default())
}

pub fn kmeans_with(x: &Matrix, config: &KMeansConfig, exec: Execution) -> Result<KMeansResult> {
    let n = x.rows();
    let k = config.k;
    if k < 1 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k-means with k = {k} > N = {n}")));
    }
    if x.cols() == 0 {
        return Err(Error::invalid("k-means on zero-width data"));
    }
    config.options.validate()?;
    x.ensure_finite("k-means input")?;
    let restarts = config.options.n_init;
    let runs = par::map_range(exec, restarts, |r| {
        let mut rng = RandomSource::with_stream(config.seed, r as u64);
        lloyd(x, k, &config.options, &mut rng)
    });
    let mut best: Option<KMeansResult> = None;
    for run in runs {
        if best.as_ref().map_or(true, |b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus_seed(x: &Matrix, k: usize, rng: &mut RandomSource) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![rng.below(n)];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_euclidean(x.row(i), x.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target just past the running sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive mass"))
        } else {
            // every point coincides with a chosen centroid
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.below(free.len())]
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(squared_euclidean(x.row(i), x.row(next)));
        }
    }
    x.select_rows(&chosen)
}

/// Index and squared distance of the nearest centroid (lowest index on ties).
#[inline]
fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_euclidean(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(x: &Matrix, centroids: &Matrix, labels: &mut [usize], dists: &mut [f64]) {
    for i in 0..x.rows() {
        let (c, d) = nearest(x.row(i), centroids);
        labels[i] = c;
        dists[i] = d;
    }
}

fn lloyd(x: &Matrix, k: usize, opts: &KMeansOptions, rng: &mut RandomSource) -> KMeansResult {
    let (n, d) = x.shape();
    let mut centroids = plus_plus_seed(x, k, rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut repairs = 0;
    for _ in 0..opts.max_iters {
        assign(x, &centroids, &mut labels, &mut dists);
        let mut sums = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        // empty clusters take over the point currently farthest from its centroid
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    let old = labels[i];
                    counts[old] -= 1;
                    for (s, v) in sums.row_mut(old).iter_mut().zip(x.row(i)) {
                        *s -= v;
                    }
                    labels[i] = c;
                    dists[i] = 0.0;
                    counts[c] = 1;
                    sums.row_mut(c).copy_from_slice(x.row(i));
                    repairs += 1;
                }
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let mut moved = 0.0;
            for (cv, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                let new = s * inv;
                moved += (new - *cv) * (new - *cv);
                *cv = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift <= opts.tol {
            break;
        }
    }
    assign(x, &centroids, &mut labels, &mut dists);
    KMeansResult {
        labels,
        centroids,
        inertia: dists.iter().sum(),
        repairs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_instance: Vec<f64>,
    pub mean: f64,
    /// Rows the scores refer to when the input was subsampled.
    pub subsample_indices: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SilhouetteOptions {
    /// Inputs with more rows than this are subsampled.
    pub max_full: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for SilhouetteOptions {
    fn default() -> Self {
        SilhouetteOptions {
            max_full: 4096,
            sample_size: 2048,
            seed: 0,
        }
    }
}

/// Mean silhouette coefficient of `labels` over the rows of `x`, Euclidean.
pub fn silhouette(x: &Matrix, labels: &[usize]) -> Result<SilhouetteReport> {
    silhouette_with(x, labels, &SilhouetteOptions::default(), Execution::default())
}

pub fn silhouette_with(
    x: &Matrix,
    labels: &[usize],
    opts: &SilhouetteOptions,
    exec: Execution,
) -> Result<SilhouetteReport> {
    if labels.len() != x.rows() {
        return Err(Error::shape("silhouette labels", x.rows(), labels.len()));
    }
    x.ensure_finite("silhouette input")?;
    if x.rows() > opts.max_full {
        let mut idx: Vec<usize> = (0..x.rows()).collect();
        RandomSource::new(opts.seed).shuffle(&mut idx);
        idx.truncate(opts.sample_size.min(x.rows()));
        idx.sort_unstable();
        let sub = x.select_rows(&idx);
        let sub_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        let (per_instance, mean) = silhouette_scores(&sub, &sub_labels, exec)?;
        return Ok(SilhouetteReport {
            per_instance,
            mean,
            subsample_indices: Some(idx),
        });
    }
    let (per_instance, mean) = silhouette_scores(x, labels, exec)?;
    Ok(SilhouetteReport {
        per_instance,
        mean,
        subsample_indices: None,
    })
}

fn silhouette_scores(x: &Matrix, labels: &[usize], exec: Execution) -> Result<(Vec<f64>, f64)> {
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::invalid("silhouette needs at least two non-empty clusters"));
    }
    let scores = par::map_range(exec, x.rows(), |i| {
        let own = labels[i];
        if sizes[own] == 1 {
            return 0.0;
        }
        let mut sums = vec![0.0; k];
        let xi = x.row(i);
        for (j, &l) in labels.iter().enumerate() {
            if j != i {
                sums[l] += squared_euclidean(xi, x.row(j)).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            (b - a) / denom
        } else {
            0.0
        }
    });
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((scores, mean))
}

/// Index of the highest mean silhouette; ties go to the lowest index.
pub fn select_best_view(si_means: &[f64]) -> Result<usize> {
    if si_means.is_empty() {
        return Err(Error::invalid("best-view selection over zero views"));
    }
    let mut best = 0;
    for (v, &s) in si_means.iter().enumerate().skip(1) {
        if s > si_means[best] {
            best = v;
        }
    }
    Ok(best)
}
