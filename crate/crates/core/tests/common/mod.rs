#![allow(dead_code)]

use dwcl::net::{Activation, Mlp, NetworkShape, ViewModel};
use dwcl::{Matrix, RandomSource};
use dwcl_oracles::{Layer, Rows};

pub fn rows(m: &Matrix) -> Rows {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn random_matrix(rng: &mut RandomSource, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.normal())
}

pub fn oracle_layers(mlp: &Mlp) -> Vec<Layer> {
    mlp.layers
        .iter()
        .map(|l| Layer {
            weight: rows(&l.weight),
            bias: l.bias.clone(),
            relu: l.spec.activation == Activation::Relu,
        })
        .collect()
}

/// `(Ĥ, X̂)` of every row computed by the scalar-loop evaluator.
pub fn oracle_forward(model: &ViewModel, x: &Rows) -> (Rows, Rows) {
    let enc = oracle_layers(&model.encoder);
    let proj = oracle_layers(&model.projection);
    let dec = oracle_layers(&model.decoder);
    let h: Rows = x.iter().map(|r| dwcl_oracles::mlp(&enc, r)).collect();
    (
        h.iter().map(|r| dwcl_oracles::mlp(&proj, r)).collect(),
        h.iter().map(|r| dwcl_oracles::mlp(&dec, r)).collect(),
    )
}

pub fn tiny_shape(rng: &mut RandomSource) -> NetworkShape {
    let w = |rng: &mut RandomSource| 2 + rng.below(7);
    let hidden = vec![w(rng), w(rng)];
    NetworkShape::new(hidden, w(rng), w(rng))
}

/// Random labels in `[0, k)` that use every label at least once.
pub fn covering_labels(rng: &mut RandomSource, n: usize, k: usize) -> Vec<usize> {
    let mut l: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.below(k) }).collect();
    rng.shuffle(&mut l);
    l
}

/// A view model whose every parameter, biases included, is perturbed so no
/// layer output is identically zero.
pub fn jittered_model(d: usize, shape: &NetworkShape, rng: &mut RandomSource) -> ViewModel {
    let mut m = ViewModel::new(d, shape, rng).unwrap();
    let p: Vec<f64> = m.flat_parameters().iter().map(|v| v + 0.05 * rng.normal()).collect();
    m.set_flat_parameters(&p).unwrap();
    m
}
