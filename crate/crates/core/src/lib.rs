//! Multi-view contrastive clustering with dual-weighted Best-Other cross-views.
//!
//! Each view gets its own autoencoder plus a projection head. After a
//! reconstruction-only pretraining stage the view whose projected features
//! cluster best (mean silhouette under k-means) becomes the *best view*, and
//! fine-tuning contrasts every other view against it with an InfoNCE loss
//! scaled by two weights: a view-quality weight `e^SI` and a discrepancy
//! weight `e^CMI - 1` computed from the agreement of k-means labelings.
//!
//! Module map:
//!
//! * [`linalg`] dense matrices, distance kernels, seeded randomness
//! * [`net`] per-view encoder/projection/decoder MLPs, backprop and Adam
//! * [`cluster`] k-means, silhouette, best-view selection
//! * [`weights`] quality/discrepancy weights and cross-view plans
//! * [`loss`] InfoNCE, reconstruction and total-loss assembly
//! * [`trainer`] pretraining, diagnostics, fine-tuning, final clustering
//! * [`eval`] ACC via Hungarian matching, NMI, run reports
//! * [`data`] dataset IO, normalization, batching, synthetic generator
//!
//! Hot loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and plain iteration otherwise.

pub mod cluster;
pub mod data;
mod error;
pub mod eval;
pub mod linalg;
pub mod loss;
pub mod net;
pub mod par;
pub mod trainer;
pub mod weights;

pub use error::{Error, Result};
pub use linalg::{Matrix, RandomSource};
