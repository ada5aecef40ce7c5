//! Contrastive and reconstruction losses with their output-side gradients.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, normalize_rows, Matrix};
use crate::weights::CrossViewPlan;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the contrastive sum.
    pub gamma: f64,
    /// Weight of the reconstruction sum.
    pub lambda: f64,
    pub temperature: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            gamma: 1.0,
            lambda: 1.0,
            temperature: 0.5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.lambda >= 0.0) || !(self.temperature > 0.0) {
            return Err(Error::invalid(format!("bad loss config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoNceOutput {
    pub loss: f64,
    pub grad_a: Matrix,
    pub grad_b: Matrix,
}

/// Symmetric two-view InfoNCE on cosine similarities.
///
/// For anchor `a_i` the positive is `b_i`; negatives are the other rows of
/// the anchor's own view plus every other row of the opposite view:
///
/// ```text
/// ℓ(i; a→b) = −log  exp(s(a_i,b_i)/τ) / (Σ_{j≠i} exp(s(a_i,a_j)/τ) + Σ_j exp(s(a_i,b_j)/τ))
/// L = (1/2b) Σ_i [ℓ(i; a→b) + ℓ(i; b→a)]
/// ```
pub fn info_nce(a: &Matrix, b: &Matrix, tau: f64) -> Result<InfoNceOutput> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "info_nce",
            format!("{:?}", a.shape()),
            format!("{:?}", b.shape()),
        ));
    }
    let n = a.rows();
    if n < 2 {
        return Err(Error::invalid("InfoNCE needs a batch of at least 2"));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    a.ensure_finite("info_nce lhs")?;
    b.ensure_finite("info_nce rhs")?;
    let u = normalize_rows(a, 0)?;
    let w = normalize_rows(b, n)?;
    let s_aa = u.matmul_nt(&u)?;
    let s_ab = u.matmul_nt(&w)?;
    let s_bb = w.matmul_nt(&w)?;

    // gradients of L with respect to the similarity entries
    let mut g_aa = Matrix::zeros(n, n);
    let mut g_ab = Matrix::zeros(n, n);
    let mut g_bb = Matrix::zeros(n, n);
    let scale = 1.0 / (2.0 * n as f64 * tau);
    let mut total = 0.0;
    let mut logits = vec![0.0; 2 * n];
    for i in 0..n {
        for dir in 0..2 {
            // dir 0: anchor a_i, within = s_aa row i, cross = s_ab row i
            // dir 1: anchor b_i, within = s_bb row i, cross = s_ab column i
            for j in 0..n {
                let within = if dir == 0 { s_aa[(i, j)] } else { s_bb[(i, j)] };
                let cross = if dir == 0 { s_ab[(i, j)] } else { s_ab[(j, i)] };
                logits[j] = if j == i { f64::NEG_INFINITY } else { within / tau };
                logits[n + j] = cross / tau;
            }
            let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            let lse = m + z.ln();
            total += lse - s_ab[(i, i)] / tau;
            for j in 0..n {
                let p_within = (logits[j] - lse).exp();
                let p_cross = (logits[n + j] - lse).exp();
                if dir == 0 {
                    g_aa[(i, j)] += p_within * scale;
                    g_ab[(i, j)] += p_cross * scale;
                } else {
                    g_bb[(i, j)] += p_within * scale;
                    g_ab[(j, i)] += p_cross * scale;
                }
            }
            g_ab[(i, i)] -= scale;
        }
    }
    let loss = total / (2.0 * n as f64);

    let sym = |g: &Matrix| {
        let mut s = g.clone();
        s.add_scaled(&g.transpose(), 1.0).expect("square");
        s
    };
    let mut d_u = sym(&g_aa).matmul(&u)?;
    d_u.add_scaled(&g_ab.matmul(&w)?, 1.0)?;
    let mut d_w = sym(&g_bb).matmul(&w)?;
    d_w.add_scaled(&g_ab.matmul_tn(&u)?, 1.0)?;

    Ok(InfoNceOutput {
        loss,
        grad_a: through_normalization(a, &u, &d_u),
        grad_b: through_normalization(b, &w, &d_w),
    })
}

/// Chain rule through `u = x/‖x‖`: `∂L/∂x = (g − u (u·g)) / ‖x‖`.
fn through_normalization(x: &Matrix, u: &Matrix, g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let norm = dot(x.row(i), x.row(i)).sqrt();
        let ui = u.row(i);
        let gi = g.row(i);
        let proj = dot(ui, gi);
        for ((o, &uv), &gv) in out.row_mut(i).iter_mut().zip(ui).zip(gi) {
            *o = (gv - uv * proj) / norm;
        }
    }
    out
}

/// Mean squared reconstruction error `(1/b) Σ_i ‖x_i − x̂_i‖²` and its
/// gradient `(2/b)(X̂ − X)` with respect to `X̂`.
pub fn reconstruction_loss(x: &Matrix, xrec: &Matrix) -> Result<(f64, Matrix)> {
    if x.shape() != xrec.shape() {
        return Err(Error::shape(
            "reconstruction_loss",
            format!("{:?}", x.shape()),
            format!("{:?}", xrec.shape()),
        ));
    }
    let b = x.rows().max(1) as f64;
    let mut grad = xrec.clone();
    grad.add_scaled(x, -1.0)?;
    let loss = grad.squared_norm() / b;
    grad.scale(2.0 / b);
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// `W · L_CL` per plan pair.
    pub weighted_contrastive: Vec<f64>,
    /// `L_R` per view.
    pub reconstruction: Vec<f64>,
}

impl LossBreakdown {
    pub fn contrastive_sum(&self) -> f64 {
        self.weighted_contrastive.iter().sum()
    }

    pub fn reconstruction_sum(&self) -> f64 {
        self.reconstruction.iter().sum()
    }
}

/// `γ Σ_pairs W·L_CL + λ Σ_views L_R`
pub fn assemble_total(
    plan: &CrossViewPlan,
    pair_losses: &[f64],
    rec_losses: &[f64],
    config: &LossConfig,
) -> Result<LossBreakdown> {
    if pair_losses.len() != plan.pairs.len() {
        return Err(Error::shape(
            "assemble_total pair losses",
            plan.pairs.len(),
            pair_losses.len(),
        ));
    }
    let views_needed = plan
        .pairs
        .iter()
        .map(|p| p.view_a.max(p.view_b) + 1)
        .max()
        .unwrap_or(1);
    if rec_losses.len() < views_needed {
        return Err(Error::shape(
            "assemble_total reconstruction losses",
            format!(">= {views_needed}"),
            rec_losses.len(),
        ));
    }
    let weighted_contrastive: Vec<f64> = plan
        .pairs
        .iter()
        .zip(pair_losses)
        .map(|(p, l)| p.loss_weight * l)
        .collect();
    let breakdown = LossBreakdown {
        total: 0.0,
        weighted_contrastive,
        reconstruction: rec_losses.to_vec(),
    };
    Ok(LossBreakdown {
        total: config.gamma * breakdown.contrastive_sum()
            + config.lambda * breakdown.reconstruction_sum(),
        ..breakdown
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::RandomSource;
    use crate::weights::{Mechanism, PairWeight, WeightMode};

    fn plan_with(weights: &[f64]) -> CrossViewPlan {
        CrossViewPlan {
            mechanism: Mechanism::Pairwise,
            weight_mode: WeightMode::Dual,
            best_view: None,
            pairs: weights
                .iter()
                .enumerate()
                .map(|(i, &w)| PairWeight {
                    view_a: i,
                    view_b: i + 1,
                    si_weight: 1.0,
                    cmi: 0.0,
                    cmi_weight: w,
                    dual_weight: w,
                    loss_weight: w,
                })
                .collect(),
        }
    }

    #[test]
    fn orthogonal_pair_hand_value() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let out = info_nce(&a, &a, 1.0).unwrap();
        let e = std::f64::consts::E;
        let expected = -(e / (e + 2.0)).ln();
        assert!((out.loss - expected).abs() < 1e-14);
        assert!((out.loss - 0.551_444_713_932_051).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_its_arguments() {
        let mut rng = RandomSource::new(3);
        let a = rng.normal_matrix(5, 4, 1.0);
        let b = rng.normal_matrix(5, 4, 1.0);
        let ab = info_nce(&a, &b, 0.5).unwrap();
        let ba = info_nce(&b, &a, 0.5).unwrap();
        assert!((ab.loss - ba.loss).abs() < 1e-13);
        assert!(ab.grad_a.max_abs_diff(&ba.grad_b) < 1e-13);
    }

    #[test]
    fn scale_invariant() {
        let mut rng = RandomSource::new(4);
        let a = rng.normal_matrix(6, 3, 1.0);
        let b = rng.normal_matrix(6, 3, 1.0);
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        a2.scale(3.5);
        b2.scale(0.2);
        let l1 = info_nce(&a, &b, 0.5).unwrap().loss;
        let l2 = info_nce(&a2, &b2, 0.5).unwrap().loss;
        assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn needs_negatives_and_nonzero_rows() {
        let one = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(info_nce(&one, &one, 0.5).is_err());
        let z = Matrix::from_rows(&[[1.0, 2.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(info_nce(&z, &z, 0.5), Err(Error::DegenerateRow { row: 1 })));
    }

    #[test]
    fn reconstruction_cases() {
        let x = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let (l, g) = reconstruction_loss(&x, &x).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.is_zero());
        let (l, g) = reconstruction_loss(&x, &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g.data(), &[-2.0, 0.0]);
        assert!(reconstruction_loss(&x, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn reconstruction_matches_scalar_loop() {
        let mut rng = RandomSource::new(9);
        let x = rng.normal_matrix(4, 3, 1.0);
        let y = rng.normal_matrix(4, 3, 1.0);
        let (l, g) = reconstruction_loss(&x, &y).unwrap();
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                acc += (x[(i, j)] - y[(i, j)]).powi(2);
                assert!((g[(i, j)] - 0.5 * (y[(i, j)] - x[(i, j)])).abs() < 1e-15);
            }
        }
        assert!((l - acc / 4.0).abs() < 1e-12);
    }

    #[test]
    fn assemble_examples() {
        let plan = plan_with(&[1.5, 0.5]);
        let cfg = LossConfig::default();
        let b = assemble_total(&plan, &[2.0, 4.0], &[1.0, 1.5, 0.5], &cfg).unwrap();
        assert_eq!(b.total, 8.0);
        assert_eq!(b.weighted_contrastive, vec![3.0, 2.0]);

        let no_contrast = LossConfig { gamma: 0.0, ..cfg };
        let b = assemble_total(&plan, &[2.0, 4.0], &[1.0, 1.5, 0.5], &no_contrast).unwrap();
        assert_eq!(b.total, 3.0);

        let zero = plan_with(&[0.0, 0.0]);
        let b = assemble_total(&zero, &[2.0, 4.0], &[1.0, 1.5, 0.5], &cfg).unwrap();
        assert_eq!(b.contrastive_sum(), 0.0);

        assert!(assemble_total(&plan, &[2.0], &[1.0, 1.5, 0.5], &cfg).is_err());
        assert!(assemble_total(&plan, &[2.0, 4.0], &[1.0], &cfg).is_err());
    }
}
