mod common;

use common::rows;
use dwcl::cluster::{kmeans, silhouette, KMeansConfig, KMeansOptions};
use dwcl::data::{batches, generate_synthetic, MultiViewDataset, SyntheticSpec, SyntheticView};
use dwcl::eval::{accuracy, RunReport};
use dwcl::loss::LossConfig;
use dwcl::net::{AdamConfig, NetworkShape};
use dwcl::par::Execution;
use dwcl::trainer::{
    batch_objective, finetune, initialize_diagnostics, pretrain, run, Phase, TrainConfig,
};
use dwcl::weights::{Mechanism, WeightMode};
use dwcl::Matrix;

fn view(dim: usize, sigma: f64, informative: bool) -> SyntheticView {
    SyntheticView { dim, noise_sigma: sigma, informative }
}

fn spec(n: usize, k: usize, views: Vec<SyntheticView>, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        name: "toy".into(),
        n,
        k,
        latent_dim: k,
        views,
        cluster_separation: 8.0,
        seed,
    }
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 32,
        pretrain_epochs: 5,
        cl_iterations: 2,
        cl_epochs: 2,
        seed,
        network: NetworkShape::new(vec![16, 16], 8, 6),
        adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() },
        kmeans: KMeansOptions { n_init: 3, ..KMeansOptions::default() },
        ..TrainConfig::default()
    }
}

#[test]
fn constant_view_is_reconstructed_exactly() {
    let mut ds = generate_synthetic(&spec(64, 2, vec![view(4, 0.1, true)], 3)).unwrap();
    ds.views.push(Matrix::from_fn(64, 3, |_, j| 0.25 + 0.25 * j as f64));
    ds.view_names.push("flat".into());
    let cfg = TrainConfig {
        pretrain_epochs: 50,
        batch_size: 16,
        adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() },
        ..small_config(1)
    };
    let st = pretrain(&ds, &cfg).unwrap();
    let fp = st.models[1].forward(&ds.views[1]).unwrap();
    let loss = dwcl_oracles::mse(&rows(&ds.views[1]), &rows(&fp.xrec));
    assert!(loss < 1e-3, "constant view reconstruction loss {loss}");
    let first = st.history.first().unwrap().total;
    let last = st.history.last().unwrap().total;
    assert!(last < first);
}

#[test]
fn noise_view_is_never_best() {
    for seed in 0..3 {
        let ds = generate_synthetic(&spec(120, 3, vec![view(6, 1.0, false), view(6, 0.1, true)], seed)).unwrap();
        let cfg = small_config(seed);
        let mut st = pretrain(&ds, &cfg).unwrap();
        initialize_diagnostics(&mut st, &ds, &cfg).unwrap();
        assert_eq!(st.best_view(), Some(1), "seed {seed}");
    }
}

#[test]
fn recorded_losses_match_hand_assembled_objective() {
    // 2 batches of 8 over 3 views, one fine-tuning epoch
    let ds = generate_synthetic(&spec(16, 2, vec![view(4, 0.2, true), view(3, 0.2, true), view(5, 0.2, true)], 9)).unwrap();
    let cfg = TrainConfig {
        batch_size: 8,
        pretrain_epochs: 1,
        cl_iterations: 1,
        cl_epochs: 1,
        loss: LossConfig { gamma: 0.7, lambda: 1.3, temperature: 0.4 },
        ..small_config(4)
    };
    let mut st = pretrain(&ds, &cfg).unwrap();
    initialize_diagnostics(&mut st, &ds, &cfg).unwrap();
    let plan = st.plan.clone().unwrap();
    let best = st.best_view().unwrap();
    assert!(plan.pairs.iter().all(|p| p.view_b == best));

    let mut models = st.models.clone();
    let mut rng = st.rng.clone();
    let blocks = batches(ds.n(), cfg.batch_size, &mut rng).unwrap();
    assert_eq!(blocks.len(), 2);
    let mut expected = Vec::new();
    for idx in &blocks {
        let xs: Vec<Matrix> = ds.views.iter().map(|x| x.select_rows(idx)).collect();
        let outs: Vec<_> = models.iter().zip(&xs).map(|(m, x)| common::oracle_forward(m, &rows(x))).collect();
        let mut contrastive = 0.0;
        for p in &plan.pairs {
            let w = p.cmi_weight * p.si_weight;
            contrastive += cfg.loss.gamma * w * dwcl_oracles::info_nce(&outs[p.view_a].0, &outs[p.view_b].0, cfg.loss.temperature);
        }
        let rec: f64 = xs.iter().zip(&outs).map(|(x, o)| dwcl_oracles::mse(&rows(x), &o.1)).sum::<f64>() * cfg.loss.lambda;
        expected.push((contrastive + rec, contrastive));

        let passes: Vec<_> = models.iter().zip(&xs).map(|(m, x)| m.forward(x).unwrap()).collect();
        let obj = batch_objective(&xs, &passes, &plan, &cfg.loss, Execution::Sequential).unwrap();
        for (v, m) in models.iter_mut().enumerate() {
            let g = m.backward(&passes[v].tape, &obj.grad_hhat[v], &obj.grad_xrec[v]).unwrap();
            m.adam_step(&g, &cfg.adam).unwrap();
        }
    }

    finetune(&mut st, &ds, &cfg).unwrap();
    let ft: Vec<_> = st.history.iter().filter(|r| r.phase == Phase::Finetune).collect();
    assert_eq!(ft.len(), 2);
    for (r, (total, contrastive)) in ft.iter().zip(&expected) {
        assert!((r.total - total).abs() < 1e-9, "{} vs {}", r.total, total);
        assert!((r.contrastive - contrastive).abs() < 1e-9);
    }
    assert_eq!(st.models, models);
}

#[test]
fn plans_respect_mechanism_and_mode() {
    let ds = generate_synthetic(&spec(90, 3, vec![view(5, 0.3, true); 4], 2)).unwrap();
    let cfg = TrainConfig { mechanism: Mechanism::Pairwise, weight_mode: WeightMode::None, ..small_config(2) };
    let out = run(&ds, &cfg, None).unwrap();
    for d in &out.state.timeline {
        assert_eq!(d.pairs.len(), 6);
        assert!(d.pairs.iter().all(|p| p.loss_weight == 1.0));
    }
    let cfg = small_config(2);
    let out = run(&ds, &cfg, None).unwrap();
    for d in &out.state.timeline {
        assert_eq!(d.pairs.len(), 3);
        assert!(d.pairs.iter().all(|p| p.view_b == d.best_view && p.loss_weight == p.dual_weight));
    }
}

#[test]
fn full_run_is_reproducible() {
    let ds = generate_synthetic(&spec(80, 3, vec![view(5, 0.3, true), view(4, 0.5, true), view(4, 1.0, false)], 5)).unwrap();
    let cfg = small_config(11);
    let a = run(&ds, &cfg, None).unwrap();
    let b = run(&ds, &cfg, None).unwrap();
    assert_eq!(a.predicted, b.predicted);
    let ra = RunReport::from_outcome(&ds, &cfg, &a).unwrap().without_timings();
    let rb = RunReport::from_outcome(&ds, &cfg, &b).unwrap().without_timings();
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
}

#[test]
fn weak_view_alone_clusters_at_chance() {
    let k = 5;
    let mut accs = Vec::new();
    for seed in 0..5 {
        let ds = generate_synthetic(&spec(500, k, vec![view(8, 0.1, true), view(8, 1.0, false)], seed)).unwrap();
        let l = kmeans(&ds.views[1], &KMeansConfig::new(k, seed)).unwrap().labels;
        accs.push(accuracy(&l, ds.labels.as_ref().unwrap(), k).unwrap());
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 1.0 / k as f64).abs() <= 0.1, "weak view ACC {mean}");
}

fn true_partition_silhouette(ds: &MultiViewDataset) -> f64 {
    silhouette(&ds.views[0], ds.labels.as_ref().unwrap()).unwrap().mean
}

#[test]
fn silhouette_of_truth_rises_as_noise_vanishes() {
    let mut prev = f64::NEG_INFINITY;
    for sigma in [2.0, 0.5, 0.0] {
        let mut s = spec(150, 3, vec![view(6, sigma, true)], 1);
        s.cluster_separation = 60.0;
        let si = true_partition_silhouette(&generate_synthetic(&s).unwrap());
        assert!(si > prev);
        prev = si;
    }
    assert!(prev > 0.95, "{prev}");
}

#[test]
fn sequential_and_parallel_training_agree() {
    let ds = generate_synthetic(&spec(48, 2, vec![view(4, 0.2, true), view(4, 0.2, true)], 6)).unwrap();
    let cfg = small_config(3);
    let a = dwcl::trainer::pretrain_with(&ds, &cfg, Execution::Sequential).unwrap();
    let b = dwcl::trainer::pretrain_with(&ds, &cfg, Execution::Parallel).unwrap();
    assert_eq!(a.models, b.models);
}
