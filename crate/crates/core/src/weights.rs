//! View-quality and view-discrepancy weights, and the cross-view plan that
//! decides which view pairs are contrasted and how strongly.
//!
//! * quality: `W_SI^v = e^{SI_v}`, and `W_SI^{a,b} = W_SI^a · W_SI^b` for a pair
//! * discrepancy: `W_CMI^{a,b} = e^{CMI(ŷ^a, ŷ^b)} − 1` where CMI is the
//!   arithmetic-mean normalized mutual information of the two views' k-means
//!   labelings (natural log)
//! * dual: `W_Dual = W_CMI · W_SI`
//!
//! Weights are plain numbers: they are recomputed between fine-tuning
//! iterations and never differentiated through.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which view pairs enter the contrastive loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    /// Every other view paired with the best view: `V − 1` pairs.
    BestOther,
    /// All unordered pairs of distinct views: `V(V − 1)/2` pairs.
    Pairwise,
}

/// Which weights scale each pair's loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    None,
    CmiOnly,
    SiOnly,
    Dual,
}

impl Mechanism {
    pub const ALL: [Mechanism; 2] = [Mechanism::Pairwise, Mechanism::BestOther];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::BestOther => "bestother",
            Mechanism::Pairwise => "pairwise",
        }
    }
}

impl WeightMode {
    pub const ALL: [WeightMode; 4] = [
        WeightMode::None,
        WeightMode::CmiOnly,
        WeightMode::SiOnly,
        WeightMode::Dual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightMode::None => "none",
            WeightMode::CmiOnly => "cmi_only",
            WeightMode::SiOnly => "si_only",
            WeightMode::Dual => "dual",
        }
    }

    fn apply(self, si_weight: f64, cmi_weight: f64) -> f64 {
        match self {
            WeightMode::None => 1.0,
            WeightMode::CmiOnly => cmi_weight,
            WeightMode::SiOnly => si_weight,
            WeightMode::Dual => cmi_weight * si_weight,
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for WeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bestother" | "bo" => Ok(Mechanism::BestOther),
            "pairwise" => Ok(Mechanism::Pairwise),
            _ => Err(Error::invalid(format!("unknown mechanism '{s}'"))),
        }
    }
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "none" => Ok(WeightMode::None),
            "cmi_only" | "cmi" => Ok(WeightMode::CmiOnly),
            "si_only" | "si" => Ok(WeightMode::SiOnly),
            "dual" => Ok(WeightMode::Dual),
            _ => Err(Error::invalid(format!("unknown weight mode '{s}'"))),
        }
    }
}

/// `e^{SI}`
pub fn view_quality_weight(si_mean: f64) -> f64 {
    si_mean.exp()
}

/// `e^{SI_a} · e^{SI_b}`
pub fn cross_view_quality_weight(si_a: f64, si_b: f64) -> f64 {
    view_quality_weight(si_a) * view_quality_weight(si_b)
}

/// Mutual information and marginal entropies (nats) of two labelings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LabelInformation {
    pub mutual: f64,
    pub entropy_a: f64,
    pub entropy_b: f64,
}

impl LabelInformation {
    /// `2I / (H_a + H_b)`; 1 when both labelings are constant, 0 when only one is.
    pub fn normalized(&self) -> f64 {
        match (self.entropy_a > 0.0, self.entropy_b > 0.0) {
            (false, false) => 1.0,
            (true, true) => {
                (2.0 * self.mutual / (self.entropy_a + self.entropy_b)).clamp(0.0, 1.0)
            }
            _ => 0.0,
        }
    }
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    let mut h = 0.0;
    for c in counts.filter(|&c| c > 0) {
        let p = c as f64 / n;
        h -= p * p.ln();
    }
    h
}

/// Computes `I = H_a + H_b − H_ab` from the joint counts.
pub(crate) fn label_information(a: &[usize], b: &[usize]) -> Result<LabelInformation> {
    if a.len() != b.len() {
        return Err(Error::shape("label pair", a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::invalid("empty labelings"));
    }
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut joint = vec![0usize; ka * kb];
    let mut ca = vec![0usize; ka];
    let mut cb = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * kb + y] += 1;
        ca[x] += 1;
        cb[y] += 1;
    }
    let n = a.len() as f64;
    let entropy_a = entropy(ca.into_iter(), n);
    let entropy_b = entropy(cb.into_iter(), n);
    let entropy_ab = entropy(joint.into_iter(), n);
    Ok(LabelInformation {
        mutual: (entropy_a + entropy_b - entropy_ab).max(0.0),
        entropy_a,
        entropy_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmiWeight {
    pub cmi: f64,
    pub weight: f64,
}

/// View-discrepancy weight `e^{CMI} − 1` of two labelings over `k` clusters.
pub fn cmi_weight(labels_a: &[usize], labels_b: &[usize], k: usize) -> Result<CmiWeight> {
    if let Some(&bad) = labels_a.iter().chain(labels_b).find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} outside [0, {k})")));
    }
    let cmi = label_information(labels_a, labels_b)?.normalized();
    Ok(CmiWeight {
        cmi,
        weight: cmi.exp() - 1.0,
    })
}

/// One contrasted view pair and its weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWeight {
    pub view_a: usize,
    pub view_b: usize,
    /// `W_SI^{a,b}`
    pub si_weight: f64,
    pub cmi: f64,
    /// `W_CMI^{a,b}`
    pub cmi_weight: f64,
    /// `W_CMI · W_SI`
    pub dual_weight: f64,
    /// Coefficient applied to this pair's InfoNCE term under the plan's weight mode.
    pub loss_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossViewPlan {
    pub mechanism: Mechanism,
    pub weight_mode: WeightMode,
    pub best_view: Option<usize>,
    pub pairs: Vec<PairWeight>,
}

impl CrossViewPlan {
    /// The (view_a, view_b) pairs without weights.
    pub fn view_pairs(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.view_a, p.view_b)).collect()
    }

    pub fn loss_weights(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.loss_weight).collect()
    }

    pub fn dual_weights(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.dual_weight).collect()
    }

    /// Loss coefficient for an unordered pair; 0 for pairs outside the plan.
    pub fn weight_for(&self, a: usize, b: usize) -> f64 {
        self.pairs
            .iter()
            .find(|p| (p.view_a, p.view_b) == (a, b) || (p.view_a, p.view_b) == (b, a))
            .map_or(0.0, |p| p.loss_weight)
    }
}

/// Enumerates the contrasted pairs for `mechanism` over `v` views.
///
/// Best-other pairs are `(u, B)` for every `u ≠ B` in ascending `u`;
/// pairwise pairs are `(i, j)` with `i < j` in lexicographic order.
pub fn enumerate_pairs(mechanism: Mechanism, v: usize, best_view: Option<usize>) -> Result<Vec<(usize, usize)>> {
    if v < 2 {
        return Err(Error::invalid("cross-view plans need at least two views"));
    }
    match mechanism {
        Mechanism::BestOther => {
            let b = best_view.ok_or_else(|| Error::invalid("best-other plan without a best view"))?;
            if b >= v {
                return Err(Error::invalid(format!("best view {b} out of range for {v} views")));
            }
            Ok((0..v).filter(|&u| u != b).map(|u| (u, b)).collect())
        }
        Mechanism::Pairwise => Ok((0..v)
            .flat_map(|i| ((i + 1)..v).map(move |j| (i, j)))
            .collect()),
    }
}

/// Builds the weighted plan from per-view silhouette means and k-means labels.
pub fn build_plan(
    mechanism: Mechanism,
    weight_mode: WeightMode,
    best_view: Option<usize>,
    si_means: &[f64],
    labels: &[Vec<usize>],
    k: usize,
) -> Result<CrossViewPlan> {
    let v = si_means.len();
    if labels.len() != v {
        return Err(Error::shape("build_plan labels", v, labels.len()));
    }
    let pairs = enumerate_pairs(mechanism, v, best_view)?
        .into_iter()
        .map(|(a, b)| {
            let si_weight = cross_view_quality_weight(si_means[a], si_means[b]);
            let CmiWeight { cmi, weight } = cmi_weight(&labels[a], &labels[b], k)?;
            Ok(PairWeight {
                view_a: a,
                view_b: b,
                si_weight,
                cmi,
                cmi_weight: weight,
                dual_weight: weight * si_weight,
                loss_weight: weight_mode.apply(si_weight, weight),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossViewPlan {
        mechanism,
        weight_mode,
        best_view,
        pairs,
    })
}

/// Snapshot of the view statistics behind one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDiagnostics {
    /// 0 for the post-pretraining initialization, then 1..=I.
    pub iteration: usize,
    pub si_means: Vec<f64>,
    pub si_weights: Vec<f64>,
    pub best_view: usize,
    pub pairs: Vec<PairWeight>,
    /// Whether the statistics came from `H` (initialization) or `Ĥ`.
    pub features: FeatureSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSpace {
    H,
    Hhat,
}

impl ViewDiagnostics {
    pub fn new(iteration: usize, features: FeatureSpace, si_means: Vec<f64>, best_view: usize, plan: &CrossViewPlan) -> Self {
        ViewDiagnostics {
            iteration,
            si_weights: si_means.iter().map(|&s| view_quality_weight(s)).collect(),
            si_means,
            best_view,
            pairs: plan.pairs.clone(),
            features,
        }
    }
}
