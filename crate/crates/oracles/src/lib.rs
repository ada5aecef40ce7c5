//! Straight-line reference implementations on nested `Vec`s. Nothing here
//! shares code with `dwcl`; tests compare the two.

pub type Rows = Vec<Vec<f64>>;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

pub fn distances(x: &Rows) -> Rows {
    let n = x.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = euclidean(&x[i], &x[j]);
        }
    }
    d
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

/// Per-instance silhouette. Mean distance to the other members of one's own
/// cluster against the smallest mean distance to another cluster. Singletons
/// and `a = b = 0` score 0.
pub fn silhouette(x: &Rows, labels: &[usize]) -> Vec<f64> {
    let n = x.len();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for j in 0..n {
            if j == i {
                continue;
            }
            sum[labels[j]] += euclidean(&x[i], &x[j]);
            cnt[labels[j]] += 1;
        }
        let own = labels[i];
        if cnt[own] == 0 {
            continue;
        }
        let a = sum[own] / cnt[own] as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && cnt[c] > 0 {
                b = b.min(sum[c] / cnt[c] as f64);
            }
        }
        let m = a.max(b);
        out[i] = if m == 0.0 { 0.0 } else { (b - a) / m };
    }
    out
}

/// Mutual information and both marginal entropies (natural log) from the
/// joint contingency table.
pub fn contingency(a: &[usize], b: &[usize]) -> (f64, f64, f64) {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut t = vec![vec![0.0; kb]; ka];
    for i in 0..a.len() {
        t[a[i]][b[i]] += 1.0;
    }
    let pa: Vec<f64> = t.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let pb: Vec<f64> = (0..kb).map(|j| t.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let p = t[i][j] / n;
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).ln();
            }
        }
    }
    let h = |p: &[f64]| -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    (mi, h(&pa), h(&pb))
}

/// `2I / (H_a + H_b)` with 1 when both entropies vanish and 0 when one does.
pub fn normalized_mi(a: &[usize], b: &[usize]) -> f64 {
    let (mi, ha, hb) = contingency(a, b);
    match (ha == 0.0, hb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => 2.0 * mi / (ha + hb),
    }
}

/// Best total over all `K!` row-to-column permutations.
pub fn best_matching(table: &[Vec<u64>]) -> u64 {
    fn go(t: &[Vec<u64>], row: usize, used: &mut Vec<bool>) -> u64 {
        if row == t.len() {
            return 0;
        }
        let mut best = 0;
        for c in 0..t.len() {
            if !used[c] {
                used[c] = true;
                best = best.max(t[row][c] + go(t, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(table, 0, &mut vec![false; table.len()])
}

pub fn permutation_score(table: &[Vec<u64>], perm: &[usize]) -> u64 {
    (0..perm.len()).map(|r| table[r][perm[r]]).sum()
}

/// Sum of squared distances from each point to its cluster mean.
pub fn inertia(x: &Rows, labels: &[usize], k: usize) -> f64 {
    let d = x[0].len();
    let mut mean = vec![vec![0.0; d]; k];
    let mut cnt = vec![0.0; k];
    for i in 0..x.len() {
        cnt[labels[i]] += 1.0;
        for j in 0..d {
            mean[labels[i]][j] += x[i][j];
        }
    }
    for c in 0..k {
        for j in 0..d {
            if cnt[c] > 0.0 {
                mean[c][j] /= cnt[c];
            }
        }
    }
    let mut s = 0.0;
    for i in 0..x.len() {
        let e = euclidean(&x[i], &mean[labels[i]]);
        s += e * e;
    }
    s
}

/// Dense layer given as `weight[in][out]`, `bias[out]`, ReLU flag.
pub struct Layer {
    pub weight: Rows,
    pub bias: Vec<f64>,
    pub relu: bool,
}

pub fn mlp(layers: &[Layer], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for l in layers {
        let mut next = l.bias.clone();
        for o in 0..next.len() {
            for i in 0..cur.len() {
                next[o] += cur[i] * l.weight[i][o];
            }
            if l.relu && next[o] < 0.0 {
                next[o] = 0.0;
            }
        }
        cur = next;
    }
    cur
}

/// Symmetric InfoNCE over cosine similarity. For anchor `i` of one view the
/// positive is row `i` of the other view; negatives are the other rows of
/// both views. Averaged over both directions and all anchors.
pub fn info_nce(a: &Rows, b: &Rows, tau: f64) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for (x, y) in [(a, b), (b, a)] {
        for i in 0..n {
            let pos = (cosine(&x[i], &y[i]) / tau).exp();
            let mut denom = 0.0;
            for j in 0..n {
                denom += (cosine(&x[i], &y[j]) / tau).exp();
                if j != i {
                    denom += (cosine(&x[i], &x[j]) / tau).exp();
                }
            }
            total -= (pos / denom).ln();
        }
    }
    total / (2 * n) as f64
}

/// `(1/b) Σ_i ‖x_i − y_i‖²`
pub fn mse(x: &Rows, y: &Rows) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        s += euclidean(&x[i], &y[i]).powi(2);
    }
    s / x.len() as f64
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..lx.len() {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    num / den
}

/// Central differences of `f` at `x` with step `h`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let keep = p[i];
        p[i] = keep + h;
        let up = f(&p);
        p[i] = keep - h;
        let down = f(&p);
        p[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over paired entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..analytic.len() {
        let scale = analytic[i].abs().max(numeric[i].abs()).max(floor);
        worst = worst.max((analytic[i] - numeric[i]).abs() / scale);
    }
    worst
}
