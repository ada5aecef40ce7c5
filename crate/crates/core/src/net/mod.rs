//! Per-view autoencoder with a projection head.
//!
//! A [`ViewModel`] owns three fully connected stacks:
//!
//! ```text
//! X ──encoder──▶ H ──projection──▶ Ĥ
//!                └──decoder─────▶ X̂
//! ```
//!
//! The encoder is `D → 500 → 500 → 2000 → h` with ReLU after every hidden
//! layer and identity into `H`; the decoder mirrors it back to `D`; the
//! projection is a single affine map `h → ĥ`. Gradients are computed by
//! explicit reverse-mode passes over a recorded [`Tape`].

mod adam;
pub mod checkpoint;

use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, AdamState};

use crate::linalg::{Matrix, RandomSource};
use crate::{Error, Result};

/// Hidden widths of the encoder (the decoder uses them reversed).
pub const DEFAULT_HIDDEN: [usize; 3] = [500, 500, 2000];

const EMBED_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Fully connected layer `y = act(x·W + b)` with `W: in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub spec: LayerSpec,
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    fn he_init(spec: LayerSpec, rng: &mut RandomSource) -> Self {
        let std = (2.0 / spec.in_dim as f64).sqrt();
        Dense {
            spec,
            weight: rng.normal_matrix(spec.in_dim, spec.out_dim, std),
            bias: vec![0.0; spec.out_dim],
        }
    }

    fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul(&self.weight)?;
        y.add_row_vector(&self.bias);
        if self.spec.activation == Activation::Relu {
            y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(y)
    }
}

/// Gradient of one [`Dense`] layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseGrad {
    fn zeros(spec: &LayerSpec) -> Self {
        DenseGrad {
            weight: Matrix::zeros(spec.in_dim, spec.out_dim),
            bias: vec![0.0; spec.out_dim],
        }
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Intermediates of one [`Mlp`] forward pass: the input to every layer and
/// the layer's (post-activation) output.
#[derive(Debug, Clone)]
pub struct MlpTape {
    inputs: Vec<Matrix>,
    outputs: Vec<Matrix>,
}

impl Mlp {
    fn from_specs(specs: &[LayerSpec], rng: &mut RandomSource) -> Self {
        Mlp {
            layers: specs.iter().map(|&s| Dense::he_init(s, rng)).collect(),
        }
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut cur = self.layers[0].forward(x)?;
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    fn forward_tape(&self, x: &Matrix) -> Result<MlpTape> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let out = layer.forward(&cur)?;
            inputs.push(cur);
            cur = out.clone();
            outputs.push(out);
        }
        Ok(MlpTape { inputs, outputs })
    }

    /// Reverse pass. Returns per-layer gradients and, if requested, the
    /// gradient with respect to the stack's input.
    fn backward(
        &self,
        tape: &MlpTape,
        grad_out: &Matrix,
        want_input_grad: bool,
    ) -> Result<(Vec<DenseGrad>, Option<Matrix>)> {
        let last = tape.outputs.len() - 1;
        if grad_out.shape() != tape.outputs[last].shape() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("{:?}", tape.outputs[last].shape()),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.spec.activation == Activation::Relu {
                for (d, &o) in delta.data_mut().iter_mut().zip(tape.outputs[l].data()) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let weight = tape.inputs[l].matmul_tn(&delta)?;
            let bias = delta.column_sums();
            grads.push(DenseGrad { weight, bias });
            if l > 0 || want_input_grad {
                delta = delta.matmul_nt(&layer.weight)?;
            }
        }
        grads.reverse();
        Ok((grads, want_input_grad.then_some(delta)))
    }

    fn zero_grads(&self) -> Vec<DenseGrad> {
        self.layers.iter().map(|l| DenseGrad::zeros(&l.spec)).collect()
    }
}

/// Layer widths for one view's networks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkShape {
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden: Vec<usize>,
    pub h_dim: usize,
    pub hhat_dim: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            hidden: DEFAULT_HIDDEN.to_vec(),
            h_dim: 512,
            hhat_dim: 128,
        }
    }
}

impl NetworkShape {
    pub fn new(hidden: Vec<usize>, h_dim: usize, hhat_dim: usize) -> Self {
        NetworkShape {
            hidden,
            h_dim,
            hhat_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_dim == 0 || self.hhat_dim == 0 || self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::invalid("network dimensions must be >= 1"));
        }
        Ok(())
    }

    fn encoder_specs(&self, input_dim: usize) -> Vec<LayerSpec> {
        chain(input_dim, &self.hidden, self.h_dim)
    }

    fn decoder_specs(&self, input_dim: usize) -> Vec<LayerSpec> {
        let rev: Vec<usize> = self.hidden.iter().rev().copied().collect();
        chain(self.h_dim, &rev, input_dim)
    }
}

fn chain(input: usize, hidden: &[usize], output: usize) -> Vec<LayerSpec> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    let n = dims.len() - 1;
    (0..n)
        .map(|i| LayerSpec {
            in_dim: dims[i],
            out_dim: dims[i + 1],
            activation: if i + 1 < n {
                Activation::Relu
            } else {
                Activation::Identity
            },
        })
        .collect()
}

/// Encoder, projection head and decoder of one view, plus optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewModel {
    pub encoder: Mlp,
    pub projection: Mlp,
    pub decoder: Mlp,
    pub adam: AdamState,
}

/// Everything [`ViewModel::backward`] needs from the forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    encoder: MlpTape,
    projection: MlpTape,
    decoder: MlpTape,
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub h: Matrix,
    pub hhat: Matrix,
    pub xrec: Matrix,
    pub tape: Tape,
}

/// Gradients aligned with every parameter of a [`ViewModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder: Vec<DenseGrad>,
    pub projection: Vec<DenseGrad>,
    pub decoder: Vec<DenseGrad>,
}

impl Gradients {
    /// Parameter-ordered slices: per layer weight then bias; encoder,
    /// projection, decoder.
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.encoder
            .iter()
            .chain(&self.projection)
            .chain(&self.decoder)
            .flat_map(|g| [g.weight.data(), g.bias.as_slice()])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, s: f64) {
        for g in self
            .encoder
            .iter_mut()
            .chain(&mut self.projection)
            .chain(&mut self.decoder)
        {
            g.weight.scale(s);
            g.bias.iter_mut().for_each(|b| *b *= s);
        }
    }
}

/// Builds a view model with the default widths (`500, 500, 2000`).
pub fn init_view_model(
    input_dim: usize,
    h_dim: usize,
    hhat_dim: usize,
    rng: &mut RandomSource,
) -> Result<ViewModel> {
    ViewModel::new(input_dim, &NetworkShape::new(DEFAULT_HIDDEN.to_vec(), h_dim, hhat_dim), rng)
}

impl ViewModel {
    pub fn new(input_dim: usize, shape: &NetworkShape, rng: &mut RandomSource) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("view input dimension must be >= 1"));
        }
        shape.validate()?;
        let encoder = Mlp::from_specs(&shape.encoder_specs(input_dim), rng);
        let projection = Mlp::from_specs(
            &[LayerSpec {
                in_dim: shape.h_dim,
                out_dim: shape.hhat_dim,
                activation: Activation::Identity,
            }],
            rng,
        );
        let decoder = Mlp::from_specs(&shape.decoder_specs(input_dim), rng);
        let mut model = ViewModel {
            encoder,
            projection,
            decoder,
            adam: AdamState::default(),
        };
        model.adam = AdamState::for_sizes(model.parameter_sizes());
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.in_dim()
    }

    pub fn h_dim(&self) -> usize {
        self.encoder.out_dim()
    }

    pub fn hhat_dim(&self) -> usize {
        self.projection.out_dim()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape("ViewModel input", self.input_dim(), x.cols()));
        }
        Ok(())
    }

    /// Training forward pass; keeps the tape for [`ViewModel::backward`].
    pub fn forward(&self, x: &Matrix) -> Result<ForwardPass> {
        self.check_input(x)?;
        let encoder = self.encoder.forward_tape(x)?;
        let h = encoder.outputs.last().cloned().expect("non-empty encoder");
        let projection = self.projection.forward_tape(&h)?;
        let decoder = self.decoder.forward_tape(&h)?;
        let hhat = projection.outputs.last().cloned().expect("non-empty projection");
        let xrec = decoder.outputs.last().cloned().expect("non-empty decoder");
        for (m, what) in [(&h, "H"), (&hhat, "Ĥ"), (&xrec, "X̂")] {
            m.ensure_finite(&format!("forward activations ({what})"))?;
        }
        Ok(ForwardPass {
            h,
            hhat,
            xrec,
            tape: Tape {
                encoder,
                projection,
                decoder,
            },
        })
    }

    /// Reverse pass given the loss gradients with respect to `Ĥ` and `X̂`.
    ///
    /// An all-zero output gradient short-circuits its branch, so e.g. a
    /// reconstruction-only loss yields exactly zero projection gradients.
    pub fn backward(&self, tape: &Tape, grad_hhat: &Matrix, grad_xrec: &Matrix) -> Result<Gradients> {
        let hhat_shape = tape.projection.outputs[0].shape();
        let xrec_shape = tape.decoder.outputs.last().expect("decoder").shape();
        if grad_hhat.shape() != hhat_shape {
            return Err(Error::shape(
                "backward grad_hhat",
                format!("{hhat_shape:?}"),
                format!("{:?}", grad_hhat.shape()),
            ));
        }
        if grad_xrec.shape() != xrec_shape {
            return Err(Error::shape(
                "backward grad_xrec",
                format!("{xrec_shape:?}"),
                format!("{:?}", grad_xrec.shape()),
            ));
        }

        let batch = hhat_shape.0;
        let mut grad_h = Matrix::zeros(batch, self.h_dim());
        let projection = if grad_hhat.is_zero() {
            self.projection.zero_grads()
        } else {
            let (g, dh) = self.projection.backward(&tape.projection, grad_hhat, true)?;
            grad_h.add_scaled(&dh.expect("input grad"), 1.0)?;
            g
        };
        let decoder = if grad_xrec.is_zero() {
            self.decoder.zero_grads()
        } else {
            let (g, dh) = self.decoder.backward(&tape.decoder, grad_xrec, true)?;
            grad_h.add_scaled(&dh.expect("input grad"), 1.0)?;
            g
        };
        let encoder = if grad_h.is_zero() {
            self.encoder.zero_grads()
        } else {
            self.encoder.backward(&tape.encoder, &grad_h, false)?.0
        };
        Ok(Gradients {
            encoder,
            projection,
            decoder,
        })
    }

    /// `H` for every row of `x`, evaluated in chunks without a tape.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        self.chunked(x, |c| self.encoder.forward(c))
    }

    /// `(H, Ĥ)` for every row of `x`.
    pub fn embed(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let h = self.encode(x)?;
        let hhat = self.chunked(&h, |c| self.projection.forward(c))?;
        h.ensure_finite("H")?;
        hhat.ensure_finite("Ĥ")?;
        Ok((h, hhat))
    }

    fn chunked(&self, x: &Matrix, f: impl Fn(&Matrix) -> Result<Matrix>) -> Result<Matrix> {
        if x.rows() <= EMBED_CHUNK {
            return f(x);
        }
        let mut data = Vec::new();
        let mut cols = 0;
        for start in (0..x.rows()).step_by(EMBED_CHUNK) {
            let idx: Vec<usize> = (start..(start + EMBED_CHUNK).min(x.rows())).collect();
            let part = f(&x.select_rows(&idx))?;
            cols = part.cols();
            data.extend_from_slice(part.data());
        }
        Matrix::from_vec(x.rows(), cols, data)
    }

    fn layers(&self) -> impl Iterator<Item = &Dense> + '_ {
        self.encoder
            .layers
            .iter()
            .chain(&self.projection.layers)
            .chain(&self.decoder.layers)
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> + '_ {
        self.encoder
            .layers
            .iter_mut()
            .chain(&mut self.projection.layers)
            .chain(&mut self.decoder.layers)
    }

    /// Parameter slices in the same order as [`Gradients::slices`].
    pub fn parameter_slices(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.layers().flat_map(|l| [l.weight.data(), l.bias.as_slice()])
    }

    pub fn parameter_sizes(&self) -> Vec<usize> {
        self.parameter_slices().map(<[f64]>::len).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_sizes().iter().sum()
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        self.parameter_slices().flatten().copied().collect()
    }

    pub fn set_flat_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::shape("set_flat_parameters", self.parameter_count(), flat.len()));
        }
        let mut offset = 0;
        for layer in self.layers_mut() {
            let w = layer.weight.data_mut();
            w.copy_from_slice(&flat[offset..offset + w.len()]);
            offset += w.len();
            let b = &mut layer.bias;
            let n = b.len();
            b.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.parameter_slices().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &Gradients, config: &AdamConfig) -> Result<()> {
        config.validate()?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients".into()));
        }
        let sizes: Vec<usize> = grads.slices().map(<[f64]>::len).collect();
        if sizes != self.parameter_sizes() {
            return Err(Error::shape(
                "adam_step",
                "gradients aligned with parameters",
                "misaligned gradients",
            ));
        }
        let mut adam = std::mem::take(&mut self.adam);
        adam.begin_step();
        let mut slot = 0;
        let mut grad_iter = grads.slices();
        for layer in self.layers_mut() {
            for params in [layer.weight.data_mut(), layer.bias.as_mut_slice()] {
                let g = grad_iter.next().expect("aligned");
                adam.update(slot, params, g, config);
                slot += 1;
            }
        }
        self.adam = adam;
        Ok(())
    }
}
