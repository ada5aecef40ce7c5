//! The training procedure end to end.
//!
//! 1. [`pretrain`]: every view's autoencoder minimizes reconstruction only.
//! 2. [`initialize_diagnostics`]: k-means + silhouette on each view's `H`,
//!    best view, weights and the first cross-view plan.
//! 3. [`finetune`]: `I` iterations of `T` epochs on
//!    `γ Σ W·InfoNCE + λ Σ L_R`; after each iteration the labels, best view and
//!    weights are recomputed on `Ĥ` and the plan is rebuilt.
//! 4. [`final_cluster`]: k-means on the concatenation of every view's `Ĥ`.
//!
//! Plan weights are constant inside an iteration. With [`RunMode::Bsv`] step 3
//! is skipped and step 4 clusters the best view alone.

use std::path::Path;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use crate::cluster::{
    kmeans, select_best_view, silhouette_with, KMeansConfig, KMeansOptions, SilhouetteOptions,
};
use crate::data::{batches, MultiViewDataset};
use crate::eval::Timings;
use crate::linalg::{Matrix, RandomSource};
use crate::loss::{assemble_total, info_nce, reconstruction_loss, LossBreakdown, LossConfig};
use crate::net::checkpoint::write_checkpoint;
use crate::net::{AdamConfig, ForwardPass, NetworkShape, ViewModel};
use crate::par::{self, Execution};
use crate::weights::{build_plan, CrossViewPlan, FeatureSpace, Mechanism, ViewDiagnostics, WeightMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Full contrastive fine-tuning.
    #[default]
    Dwcl,
    /// Pretraining only, k-means on the best single view.
    Bsv,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Dwcl => "dwcl",
            RunMode::Bsv => "bsv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    /// Fine-tuning iterations `I`.
    pub cl_iterations: usize,
    /// Epochs per iteration `T`.
    pub cl_epochs: usize,
    pub seed: u64,
    pub mechanism: Mechanism,
    pub weight_mode: WeightMode,
    pub mode: RunMode,
    pub loss: LossConfig,
    pub adam: AdamConfig,
    pub kmeans: KMeansOptions,
    pub silhouette: SilhouetteOptions,
    pub network: NetworkShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            pretrain_epochs: 100,
            cl_iterations: 3,
            cl_epochs: 50,
            seed: 0,
            mechanism: Mechanism::BestOther,
            weight_mode: WeightMode::Dual,
            mode: RunMode::Dwcl,
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            kmeans: KMeansOptions::default(),
            silhouette: SilhouetteOptions::default(),
            network: NetworkShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be >= 2"));
        }
        if self.mode == RunMode::Dwcl && (self.cl_iterations < 1 || self.cl_epochs < 1) {
            return Err(Error::invalid("cl_iterations and cl_epochs must be >= 1"));
        }
        self.loss.validate()?;
        self.adam.validate()?;
        self.kmeans.validate()?;
        self.network.validate()
    }

    /// Training schedule and head sizes published for a benchmark dataset.
    pub fn preset(name: &str) -> Option<Self> {
        let p = PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))?;
        Some(TrainConfig {
            pretrain_epochs: p.pretrain_epochs,
            cl_iterations: p.cl_iterations,
            cl_epochs: p.cl_epochs,
            network: NetworkShape {
                h_dim: p.h_dim,
                hhat_dim: p.hhat_dim,
                ..NetworkShape::default()
            },
            ..TrainConfig::default()
        })
    }

    fn kmeans_config(&self, k: usize, purpose: u64) -> KMeansConfig {
        KMeansConfig::new(k, self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(purpose))
            .with_options(self.kmeans)
    }
}

pub struct Preset {
    pub name: &'static str,
    pub view_dims: &'static [usize],
    pub h_dim: usize,
    pub hhat_dim: usize,
    pub pretrain_epochs: usize,
    pub cl_iterations: usize,
    pub cl_epochs: usize,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "Caltech5V7", view_dims: &[40, 254, 1984, 512, 928], h_dim: 512, hhat_dim: 128, pretrain_epochs: 100, cl_iterations: 3, cl_epochs: 50 },
    Preset { name: "Caltech6V7", view_dims: &[48, 40, 254, 1984, 512, 928], h_dim: 512, hhat_dim: 128, pretrain_epochs: 100, cl_iterations: 3, cl_epochs: 50 },
    Preset { name: "Caltech6V20", view_dims: &[48, 40, 254, 1984, 512, 928], h_dim: 512, hhat_dim: 128, pretrain_epochs: 100, cl_iterations: 4, cl_epochs: 25 },
    Preset { name: "DHA", view_dims: &[110, 6144], h_dim: 512, hhat_dim: 512, pretrain_epochs: 100, cl_iterations: 1, cl_epochs: 50 },
    Preset { name: "NUSWIDE", view_dims: &[64, 225, 144, 73, 128], h_dim: 512, hhat_dim: 96, pretrain_epochs: 100, cl_iterations: 5, cl_epochs: 20 },
    Preset { name: "Scene", view_dims: &[20, 59, 40], h_dim: 512, hhat_dim: 128, pretrain_epochs: 100, cl_iterations: 4, cl_epochs: 100 },
    Preset { name: "Fashion", view_dims: &[784, 784, 784], h_dim: 512, hhat_dim: 128, pretrain_epochs: 100, cl_iterations: 6, cl_epochs: 50 },
    Preset { name: "CIFAR10", view_dims: &[3072, 5376, 512, 5376, 5376, 1239, 5376], h_dim: 512, hhat_dim: 128, pretrain_epochs: 50, cl_iterations: 3, cl_epochs: 10 },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Finetune,
}

/// One optimizer step's losses. `contrastive` is `γ Σ W·L_CL` and
/// `reconstruction` is `λ Σ L_R`, so `total = contrastive + reconstruction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub phase: Phase,
    /// 0 during pretraining.
    pub iteration: usize,
    pub epoch: usize,
    pub batch: usize,
    pub total: f64,
    pub contrastive: f64,
    pub reconstruction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub models: Vec<ViewModel>,
    pub diagnostics: Option<ViewDiagnostics>,
    pub plan: Option<CrossViewPlan>,
    /// Per-view k-means labels from the latest diagnostics pass.
    pub view_labels: Vec<Vec<usize>>,
    pub history: Vec<LossRecord>,
    pub timeline: Vec<ViewDiagnostics>,
    /// Empty-cluster repairs performed by k-means so far.
    pub repairs: usize,
    pub rng: RandomSource,
    pub exec: Execution,
}

impl TrainState {
    /// `(H, Ĥ)` for every view over the full dataset.
    pub fn embed(&self, ds: &MultiViewDataset) -> Result<Vec<(Matrix, Matrix)>> {
        let out = par::map_range(self.exec, self.models.len(), |v| self.models[v].embed(&ds.views[v]));
        out.into_iter().collect()
    }

    pub fn best_view(&self) -> Option<usize> {
        self.diagnostics.as_ref().map(|d| d.best_view)
    }
}

fn check_dataset(ds: &MultiViewDataset, config: &TrainConfig) -> Result<()> {
    ds.validate()?;
    if ds.k < 2 {
        return Err(Error::invalid("clustering needs k >= 2"));
    }
    if ds.n() < config.batch_size.min(2).max(ds.k) {
        return Err(Error::invalid("dataset smaller than k"));
    }
    Ok(())
}

/// Reconstruction-only training of freshly initialized view models.
pub fn pretrain(ds: &MultiViewDataset, config: &TrainConfig) -> Result<TrainState> {
    pretrain_with(ds, config, Execution::default())
}

pub fn pretrain_with(ds: &MultiViewDataset, config: &TrainConfig, exec: Execution) -> Result<TrainState> {
    config.validate()?;
    check_dataset(ds, config)?;
    let mut rng = RandomSource::new(config.seed);
    let models = ds
        .views
        .iter()
        .map(|x| ViewModel::new(x.cols(), &config.network, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let mut state = TrainState {
        models,
        diagnostics: None,
        plan: None,
        view_labels: Vec::new(),
        history: Vec::new(),
        timeline: Vec::new(),
        repairs: 0,
        rng,
        exec,
    };
    let lambda = config.loss.lambda;
    for epoch in 1..=config.pretrain_epochs {
        for (b, idx) in batches(ds.n(), config.batch_size, &mut state.rng)?.into_iter().enumerate() {
            let losses = par::map_mut(exec, &mut state.models, |v, model| -> Result<f64> {
                let x = ds.views[v].select_rows(&idx);
                let fp = model.forward(&x)?;
                let (loss, mut grad) = reconstruction_loss(&x, &fp.xrec)?;
                grad.scale(lambda);
                let zero = Matrix::zeros(fp.hhat.rows(), fp.hhat.cols());
                let grads = model.backward(&fp.tape, &zero, &grad)?;
                model.adam_step(&grads, &config.adam)?;
                Ok(loss)
            });
            let rec: f64 = losses
                .into_iter()
                .collect::<Result<Vec<_>>>()
                .map_err(|e| diverged("pretrain", e))?
                .iter()
                .sum::<f64>()
                * lambda;
            if !rec.is_finite() {
                return Err(Error::Diverged {
                    phase: "pretrain",
                    detail: format!("reconstruction loss {rec} at epoch {epoch} batch {b}"),
                });
            }
            state.history.push(LossRecord {
                phase: Phase::Pretrain,
                iteration: 0,
                epoch,
                batch: b,
                total: rec,
                contrastive: 0.0,
                reconstruction: rec,
            });
        }
        debug!("pretrain epoch {epoch}: loss {:.6}", epoch_mean(&state.history, Phase::Pretrain, 0, epoch));
    }
    Ok(state)
}

fn diverged(phase: &'static str, e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged { phase, detail: what },
        other => other,
    }
}

fn epoch_mean(history: &[LossRecord], phase: Phase, iteration: usize, epoch: usize) -> f64 {
    let sel: Vec<f64> = history
        .iter()
        .rev()
        .take_while(|r| r.phase == phase && r.iteration == iteration && r.epoch == epoch)
        .map(|r| r.total)
        .collect();
    sel.iter().sum::<f64>() / sel.len().max(1) as f64
}

/// Recomputes per-view labels, silhouettes, best view and the plan from the
/// current models, on `H` or `Ĥ`.
fn refresh_diagnostics(
    state: &mut TrainState,
    ds: &MultiViewDataset,
    config: &TrainConfig,
    iteration: usize,
    features: FeatureSpace,
) -> Result<()> {
    let embeddings = state.embed(ds)?;
    let per_view = par::map_range(state.exec, embeddings.len(), |v| -> Result<(Vec<usize>, f64, usize)> {
        let f = match features {
            FeatureSpace::H => &embeddings[v].0,
            FeatureSpace::Hhat => &embeddings[v].1,
        };
        let km = kmeans(f, &config.kmeans_config(ds.k, (iteration as u64) << 16 | v as u64))?;
        let opts = SilhouetteOptions {
            seed: config.silhouette.seed.wrapping_add(v as u64),
            ..config.silhouette
        };
        let si = match silhouette_with(f, &km.labels, &opts, Execution::Sequential) {
            Ok(r) => r.mean,
            // all points coincide: no separation to score
            Err(Error::InvalidArgument(_)) => 0.0,
            Err(e) => return Err(e),
        };
        Ok((km.labels, si, km.repairs))
    });
    let mut labels = Vec::with_capacity(per_view.len());
    let mut si_means = Vec::with_capacity(per_view.len());
    for r in per_view {
        let (l, si, repairs) = r?;
        if repairs > 0 {
            warn!("k-means repaired {repairs} empty cluster(s) at iteration {iteration}");
        }
        state.repairs += repairs;
        labels.push(l);
        si_means.push(si);
    }
    let best = select_best_view(&si_means)?;
    if ds.n_views() >= 2 {
        let plan = build_plan(config.mechanism, config.weight_mode, Some(best), &si_means, &labels, ds.k)?;
        let diag = ViewDiagnostics::new(iteration, features, si_means, best, &plan);
        state.plan = Some(plan);
        state.timeline.push(diag.clone());
        state.diagnostics = Some(diag);
    } else {
        let diag = ViewDiagnostics {
            iteration,
            si_weights: si_means.iter().map(|s| s.exp()).collect(),
            si_means,
            best_view: best,
            pairs: Vec::new(),
            features,
        };
        state.plan = None;
        state.timeline.push(diag.clone());
        state.diagnostics = Some(diag);
    }
    state.view_labels = labels;
    info!(
        "iteration {iteration}: best view {best}, SI {:?}",
        state.diagnostics.as_ref().map(|d| &d.si_means)
    );
    Ok(())
}

/// Initial best view, weights and plan from the pretrained encoders' `H`.
pub fn initialize_diagnostics(state: &mut TrainState, ds: &MultiViewDataset, config: &TrainConfig) -> Result<()> {
    refresh_diagnostics(state, ds, config, 0, FeatureSpace::H)
}

/// Losses and per-view output gradients for one batch under `plan`.
pub struct BatchObjective {
    pub breakdown: LossBreakdown,
    /// Unweighted InfoNCE per plan pair (0 for pairs whose coefficient is 0).
    pub pair_losses: Vec<f64>,
    pub grad_hhat: Vec<Matrix>,
    pub grad_xrec: Vec<Matrix>,
}

pub struct ContrastiveObjective {
    /// Unweighted InfoNCE per plan pair (0 where the coefficient is 0).
    pub pair_losses: Vec<f64>,
    /// Gradient of `γ Σ W·InfoNCE` with respect to each view's `Ĥ`.
    pub grad_hhat: Vec<Matrix>,
}

/// The contrastive half of the objective: one InfoNCE per plan pair, with
/// pairs whose coefficient `γ·W` is zero skipped.
pub fn contrastive_objective(
    hhats: &[&Matrix],
    plan: &CrossViewPlan,
    config: &LossConfig,
    exec: Execution,
) -> Result<ContrastiveObjective> {
    if let Some(p) = plan.pairs.iter().find(|p| p.view_a.max(p.view_b) >= hhats.len()) {
        return Err(Error::invalid(format!(
            "plan pair ({}, {}) outside {} views",
            p.view_a,
            p.view_b,
            hhats.len()
        )));
    }
    let pair_out = par::map_range(exec, plan.pairs.len(), |p| {
        let pair = &plan.pairs[p];
        if config.gamma * pair.loss_weight == 0.0 {
            return Ok(None);
        }
        info_nce(hhats[pair.view_a], hhats[pair.view_b], config.temperature).map(Some)
    });
    let mut grad_hhat: Vec<Matrix> = hhats.iter().map(|h| Matrix::zeros(h.rows(), h.cols())).collect();
    let mut pair_losses = Vec::with_capacity(plan.pairs.len());
    for (pair, out) in plan.pairs.iter().zip(pair_out) {
        match out? {
            Some(o) => {
                let coef = config.gamma * pair.loss_weight;
                grad_hhat[pair.view_a].add_scaled(&o.grad_a, coef)?;
                grad_hhat[pair.view_b].add_scaled(&o.grad_b, coef)?;
                pair_losses.push(o.loss);
            }
            None => pair_losses.push(0.0),
        }
    }
    Ok(ContrastiveObjective {
        pair_losses,
        grad_hhat,
    })
}

/// Evaluates `γ Σ_pairs W·InfoNCE(Ĥ_a, Ĥ_b) + λ Σ_v L_R(X_v, X̂_v)` on a batch
/// and its gradients with respect to every view's `Ĥ` and `X̂`.
pub fn batch_objective(
    xs: &[Matrix],
    passes: &[ForwardPass],
    plan: &CrossViewPlan,
    config: &LossConfig,
    exec: Execution,
) -> Result<BatchObjective> {
    let hhats: Vec<&Matrix> = passes.iter().map(|fp| &fp.hhat).collect();
    let ContrastiveObjective {
        pair_losses,
        grad_hhat,
    } = contrastive_objective(&hhats, plan, config, exec)?;
    let mut rec_losses = Vec::with_capacity(xs.len());
    let mut grad_xrec = Vec::with_capacity(xs.len());
    for (x, fp) in xs.iter().zip(passes) {
        let (l, mut g) = reconstruction_loss(x, &fp.xrec)?;
        g.scale(config.lambda);
        rec_losses.push(l);
        grad_xrec.push(g);
    }
    let breakdown = assemble_total(plan, &pair_losses, &rec_losses, config)?;
    Ok(BatchObjective {
        breakdown,
        pair_losses,
        grad_hhat,
        grad_xrec,
    })
}

/// One optimizer step of every view model on the batch `idx`.
fn finetune_step(
    state: &mut TrainState,
    ds: &MultiViewDataset,
    config: &TrainConfig,
    plan: &CrossViewPlan,
    idx: &[usize],
) -> Result<LossBreakdown> {
    let exec = state.exec;
    let xs: Vec<Matrix> = ds.views.iter().map(|x| x.select_rows(idx)).collect();
    let passes = par::map_range(exec, xs.len(), |v| state.models[v].forward(&xs[v]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let obj = batch_objective(&xs, &passes, plan, &config.loss, exec)?;
    let results = par::map_mut(exec, &mut state.models, |v, model| -> Result<()> {
        let grads = model.backward(&passes[v].tape, &obj.grad_hhat[v], &obj.grad_xrec[v])?;
        model.adam_step(&grads, &config.adam)
    });
    for r in results {
        r?;
    }
    Ok(obj.breakdown)
}

/// Runs `I` iterations of `T` contrastive epochs, refreshing weights after each.
pub fn finetune(state: &mut TrainState, ds: &MultiViewDataset, config: &TrainConfig) -> Result<()> {
    finetune_with_hook(state, ds, config, |_, _| Ok(()))
}

/// [`finetune`] with a callback after every completed iteration.
pub fn finetune_with_hook(
    state: &mut TrainState,
    ds: &MultiViewDataset,
    config: &TrainConfig,
    mut after_iteration: impl FnMut(usize, &TrainState) -> Result<()>,
) -> Result<()> {
    config.validate()?;
    if ds.n_views() < 2 {
        return Err(Error::invalid("contrastive fine-tuning needs at least two views"));
    }
    if state.plan.is_none() {
        initialize_diagnostics(state, ds, config)?;
    }
    for iteration in 1..=config.cl_iterations {
        let plan = state.plan.clone().expect("plan initialized");
        for epoch in 1..=config.cl_epochs {
            let blocks = batches(ds.n(), config.batch_size, &mut state.rng)?;
            for (b, idx) in blocks.iter().enumerate() {
                let br = finetune_step(state, ds, config, &plan, idx).map_err(|e| diverged("finetune", e))?;
                if !br.total.is_finite() {
                    return Err(Error::Diverged {
                        phase: "finetune",
                        detail: format!("loss {} at iteration {iteration} epoch {epoch} batch {b}", br.total),
                    });
                }
                let contrastive = config.loss.gamma * br.contrastive_sum();
                state.history.push(LossRecord {
                    phase: Phase::Finetune,
                    iteration,
                    epoch,
                    batch: b,
                    total: br.total,
                    contrastive,
                    reconstruction: br.total - contrastive,
                });
            }
            debug!(
                "iteration {iteration} epoch {epoch}: loss {:.6}",
                epoch_mean(&state.history, Phase::Finetune, iteration, epoch)
            );
        }
        refresh_diagnostics(state, ds, config, iteration, FeatureSpace::Hhat)?;
        after_iteration(iteration, state)?;
    }
    Ok(())
}

/// Final labels: k-means on the concatenated `Ĥ` of all views, or on the best
/// view's `Ĥ` alone in BSV mode.
pub fn final_cluster(state: &TrainState, ds: &MultiViewDataset, config: &TrainConfig) -> Result<Vec<usize>> {
    cluster_embeddings(&state.embed(ds)?, ds.k, config, state.best_view())
}

/// Final k-means over per-view `(H, Ĥ)`: concatenated `Ĥ` in DWCL mode, the
/// best view's `Ĥ` (view 0 if unknown) in BSV mode.
pub fn cluster_embeddings(
    embeddings: &[(Matrix, Matrix)],
    k: usize,
    config: &TrainConfig,
    best_view: Option<usize>,
) -> Result<Vec<usize>> {
    if embeddings.is_empty() {
        return Err(Error::invalid("no embeddings to cluster"));
    }
    let km = config.kmeans_config(k, u64::MAX);
    let features = match config.mode {
        RunMode::Bsv => {
            let best = best_view.unwrap_or(0);
            embeddings
                .get(best)
                .ok_or_else(|| Error::invalid(format!("best view {best} out of range")))?
                .1
                .clone()
        }
        RunMode::Dwcl => {
            let parts: Vec<&Matrix> = embeddings.iter().map(|e| &e.1).collect();
            Matrix::hstack(&parts)?
        }
    };
    Ok(kmeans(&features, &km)?.labels)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub predicted: Vec<usize>,
    pub timings: Timings,
}

/// Full pipeline. Checkpoints go to `checkpoint_dir` when given:
/// `pretrain.ckpt` and `iter_<i>.ckpt`. Errors carry the phase they came from.
pub fn run(ds: &MultiViewDataset, config: &TrainConfig, checkpoint_dir: Option<&Path>) -> Result<TrainOutcome> {
    let t = Instant::now();
    let state = pretrain(ds, config).map_err(|e| e.in_phase("pretrain"))?;
    let pretrain_secs = t.elapsed().as_secs_f64();
    if let Some(dir) = checkpoint_dir {
        write_checkpoint(&dir.join("pretrain.ckpt"), &state.models, checkpoint_meta(config, "pretrain", &state))
            .map_err(|e| e.in_phase("pretrain"))?;
    }
    let mut out = run_from_pretrained(ds, config, state, checkpoint_dir)?;
    out.timings.pretrain = pretrain_secs;
    Ok(out)
}

fn checkpoint_meta(config: &TrainConfig, phase: &str, state: &TrainState) -> serde_json::Value {
    serde_json::json!({
        "phase": phase,
        "best_view": state.best_view(),
        "config": config,
    })
}

/// Everything after pretraining. `state` must come from [`pretrain`] on the
/// same dataset; its pretraining history is kept.
pub fn run_from_pretrained(
    ds: &MultiViewDataset,
    config: &TrainConfig,
    mut state: TrainState,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut timings = Timings::default();
    let t = Instant::now();
    initialize_diagnostics(&mut state, ds, config).map_err(|e| e.in_phase("initialize"))?;
    timings.initialize = t.elapsed().as_secs_f64();

    if config.mode == RunMode::Dwcl && ds.n_views() >= 2 {
        let t = Instant::now();
        finetune_with_hook(&mut state, ds, config, |i, st| {
            if let Some(dir) = checkpoint_dir {
                let meta = checkpoint_meta(config, &format!("iteration {i}"), st);
                write_checkpoint(&dir.join(format!("iter_{i}.ckpt")), &st.models, meta)?;
            }
            Ok(())
        })
        .map_err(|e| e.in_phase("finetune"))?;
        timings.finetune = t.elapsed().as_secs_f64();
    }

    let t = Instant::now();
    let predicted = if ds.n_views() < 2 {
        let single = TrainConfig {
            mode: RunMode::Bsv,
            ..config.clone()
        };
        final_cluster(&state, ds, &single)
    } else {
        final_cluster(&state, ds, config)
    }
    .map_err(|e| e.in_phase("final_cluster"))?;
    timings.final_cluster = t.elapsed().as_secs_f64();
    Ok(TrainOutcome {
        state,
        predicted,
        timings,
    })
}
