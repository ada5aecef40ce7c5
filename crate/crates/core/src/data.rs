//! Multi-view datasets: directory IO, normalization, batching and a
//! synthetic generator with per-view control over quality.
//!
//! On disk a dataset is a directory holding
//!
//! ```text
//! manifest.json       {name, n, k, views: [{name, file, dim}], labels_file?}
//! view_<name>.csv     headerless, one row per instance
//! labels.csv          one integer per line
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, Matrix, RandomSource};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    pub views: Vec<Matrix>,
    pub view_names: Vec<String>,
    pub labels: Option<Vec<usize>>,
    /// Number of classes.
    pub k: usize,
}

impl MultiViewDataset {
    pub fn new(
        name: impl Into<String>,
        views: Vec<Matrix>,
        labels: Option<Vec<usize>>,
        k: usize,
    ) -> Result<Self> {
        let view_names = (0..views.len()).map(|v| format!("v{}", v + 1)).collect();
        let ds = MultiViewDataset {
            name: name.into(),
            views,
            view_names,
            labels,
            k,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.views.first().map_or(0, Matrix::rows)
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::Dataset("no views".into()));
        }
        if self.view_names.len() != self.views.len() {
            return Err(Error::Dataset("one name per view required".into()));
        }
        let n = self.n();
        if n == 0 {
            return Err(Error::Dataset("no instances".into()));
        }
        for (v, m) in self.views.iter().enumerate() {
            if m.rows() != n {
                return Err(Error::Dataset(format!(
                    "view {} has {} rows, expected {n}",
                    self.view_names[v],
                    m.rows()
                )));
            }
            if m.cols() == 0 {
                return Err(Error::Dataset(format!("view {} has no features", self.view_names[v])));
            }
            m.ensure_finite(&format!("view {}", self.view_names[v]))?;
        }
        if self.k == 0 {
            return Err(Error::Dataset("k must be >= 1".into()));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Dataset(format!("{} labels for {n} instances", labels.len())));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= self.k) {
                return Err(Error::Dataset(format!("label {bad} outside [0, {})", self.k)));
            }
        }
        Ok(())
    }

    /// Dataset restricted to the given view indices.
    pub fn select_views(&self, views: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        out.views = views.iter().map(|&v| self.views[v].clone()).collect();
        out.view_names = views.iter().map(|&v| self.view_names[v].clone()).collect();
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    name: String,
    n: usize,
    k: usize,
    views: Vec<ManifestView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels_file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestView {
    name: String,
    file: String,
    dim: usize,
}

pub fn save_dataset(ds: &MultiViewDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir)?;
    let mut views = Vec::with_capacity(ds.n_views());
    for (m, name) in ds.views.iter().zip(&ds.view_names) {
        let file = format!("view_{name}.csv");
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(dir.join(&file))?;
        for row in m.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        views.push(ManifestView {
            name: name.clone(),
            file,
            dim: m.cols(),
        });
    }
    let labels_file = match &ds.labels {
        Some(labels) => {
            let body: String = labels.iter().map(|l| format!("{l}\n")).collect();
            fs::write(dir.join("labels.csv"), body)?;
            Some("labels.csv".to_string())
        }
        None => None,
    };
    let manifest = Manifest {
        name: ds.name.clone(),
        n: ds.n(),
        k: ds.k,
        views,
        labels_file,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut views = Vec::with_capacity(manifest.views.len());
    for mv in &manifest.views {
        let path = dir.join(&mv.file);
        if !path.is_file() {
            return Err(Error::MissingView(path));
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(&path)?;
        let mut data = Vec::with_capacity(manifest.n * mv.dim);
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != mv.dim {
                return Err(Error::Dataset(format!(
                    "{}: row {rows} has {} values, manifest says {}",
                    mv.file,
                    rec.len(),
                    mv.dim
                )));
            }
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Dataset(format!("{}: row {rows}: bad number '{field}'", mv.file))
                })?;
                data.push(v);
            }
            rows += 1;
        }
        if rows != manifest.n {
            return Err(Error::Dataset(format!(
                "{} has {rows} rows, manifest says {}",
                mv.file, manifest.n
            )));
        }
        views.push(Matrix::from_vec(rows, mv.dim, data)?);
    }
    let labels = match &manifest.labels_file {
        Some(f) => {
            let text = fs::read_to_string(dir.join(f))?;
            let labels = text
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    l.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Dataset(format!("{f}: bad label '{l}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(labels)
        }
        None => None,
    };
    let ds = MultiViewDataset {
        name: manifest.name,
        views,
        view_names: manifest.views.into_iter().map(|v| v.name).collect(),
        labels,
        k: manifest.k,
    };
    ds.validate()?;
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    Minmax,
    Zscore,
    None,
}

/// Per-feature, per-view rescaling. Constant features map to 0.
pub fn normalize(ds: &MultiViewDataset, method: Normalization) -> MultiViewDataset {
    let mut out = ds.clone();
    if method == Normalization::None {
        return out;
    }
    for m in &mut out.views {
        let (n, d) = m.shape();
        for j in 0..d {
            let col = m.column(j);
            let (a, scale) = match method {
                Normalization::Minmax => {
                    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
                Normalization::Zscore => {
                    let mean = col.iter().sum::<f64>() / n as f64;
                    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                    (mean, var.sqrt())
                }
                Normalization::None => unreachable!(),
            };
            for i in 0..n {
                m[(i, j)] = if scale > 0.0 { (m[(i, j)] - a) / scale } else { 0.0 };
            }
        }
    }
    out
}

/// One epoch of shuffled index blocks of size `batch_size`; a trailing
/// block is kept only if it has at least two rows.
pub fn batches(n: usize, batch_size: usize, rng: &mut RandomSource) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(Error::invalid("batch size must be >= 2"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    Ok(idx
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticView {
    pub dim: usize,
    pub noise_sigma: f64,
    /// Weak (non-informative) views are pure noise, independent of the latent clusters.
    #[serde(default = "yes")]
    pub informative: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: usize,
    pub k: usize,
    pub latent_dim: usize,
    pub views: Vec<SyntheticView>,
    pub cluster_separation: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "synthetic".into()
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("synthetic spec needs k >= 2, got {}", self.k)));
        }
        if self.n < self.k {
            return Err(Error::invalid("synthetic spec needs n >= k"));
        }
        if self.latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be >= 1"));
        }
        if self.views.is_empty() || !self.views.iter().any(|v| v.informative) {
            return Err(Error::invalid("synthetic spec needs at least one informative view"));
        }
        if self.views.iter().any(|v| v.dim == 0 || !(v.noise_sigma >= 0.0)) {
            return Err(Error::invalid("view dims must be >= 1 and noise_sigma >= 0"));
        }
        if !(self.cluster_separation >= 0.0) {
            return Err(Error::invalid("cluster_separation must be >= 0"));
        }
        Ok(())
    }
}

/// Gaussian-mixture latent clusters observed through per-view random
/// orthonormal maps plus isotropic noise.
///
/// Cluster `c` has latent mean `(sep/√2)·e_c` (pairwise distance `sep`) when
/// `latent_dim ≥ k`, otherwise a seeded random direction of norm `sep/√2`.
/// Instances are spread with unit latent variance, and labels are balanced
/// (`i mod k`) then shuffled. A weak view draws `N(0, s²)` entries with
/// `s = noise_sigma`, or `s = 1` when `noise_sigma` is zero.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<MultiViewDataset> {
    spec.validate()?;
    let mut rng = RandomSource::new(spec.seed);
    let (n, k, l) = (spec.n, spec.k, spec.latent_dim);
    let radius = spec.cluster_separation / std::f64::consts::SQRT_2;
    let means = if l >= k {
        Matrix::from_fn(k, l, |c, j| if c == j { radius } else { 0.0 })
    } else {
        let mut m = rng.normal_matrix(k, l, 1.0);
        for c in 0..k {
            let norm = dot(m.row(c), m.row(c)).sqrt().max(f64::MIN_POSITIVE);
            m.row_mut(c).iter_mut().for_each(|v| *v *= radius / norm);
        }
        m
    };
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    rng.shuffle(&mut labels);
    let mut latent = rng.normal_matrix(n, l, 1.0);
    for (i, &c) in labels.iter().enumerate() {
        for (z, mu) in latent.row_mut(i).iter_mut().zip(means.row(c)) {
            *z += mu;
        }
    }

    let mut views = Vec::with_capacity(spec.views.len());
    let mut view_names = Vec::with_capacity(spec.views.len());
    for (v, sv) in spec.views.iter().enumerate() {
        let x = if sv.informative {
            let map = orthonormal_map(sv.dim, l, &mut rng);
            let mut x = latent.matmul_nt(&map)?;
            for e in x.data_mut() {
                *e += sv.noise_sigma * rng.normal();
            }
            x
        } else {
            let s = if sv.noise_sigma > 0.0 { sv.noise_sigma } else { 1.0 };
            rng.normal_matrix(n, sv.dim, s)
        };
        views.push(x);
        view_names.push(format!("v{}{}", v + 1, if sv.informative { "" } else { "_weak" }));
    }
    let ds = MultiViewDataset {
        name: spec.name.clone(),
        views,
        view_names,
        labels: Some(labels),
        k,
    };
    ds.validate()?;
    Ok(ds)
}

/// `rows × cols` matrix with orthonormal columns (rows ≥ cols) or
/// orthonormal rows (rows < cols), by Gram-Schmidt on Gaussian draws.
fn orthonormal_map(rows: usize, cols: usize, rng: &mut RandomSource) -> Matrix {
    let tall = rows >= cols;
    let (long, count) = if tall { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..long).map(|_| rng.normal()).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    if tall {
        Matrix::from_fn(rows, cols, |i, j| basis[j][i])
    } else {
        Matrix::from_fn(rows, cols, |i, j| basis[i][j])
    }
}
