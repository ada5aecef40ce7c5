use crate::{Error, Result};

/// Row-to-column permutation maximizing `Σ_r table[r][perm[r]]`.
///
/// Kuhn-Munkres with row/column potentials on the cost `max − table`,
/// `O(K³)`, exact in integer arithmetic.
pub fn hungarian_match(table: &[Vec<u64>]) -> Result<Vec<usize>> {
    let n = table.len();
    if table.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("hungarian_match needs a square table"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let max = table.iter().flatten().copied().max().unwrap_or(0) as i128;
    let cost = |r: usize, c: usize| max - table[r][c] as i128;

    // 1-based arrays; column 0 is the virtual start
    let mut u = vec![0i128; n + 1];
    let mut v = vec![0i128; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![i128::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = i128::MAX;
            let mut col1 = 0;
            for c in 1..=n {
                if used[c] {
                    continue;
                }
                let cur = cost(r0 - 1, c - 1) - u[r0] - v[c];
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = col0;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    col1 = c;
                }
            }
            for c in 0..=n {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for c in 1..=n {
        perm[owner[c] - 1] = c - 1;
    }
    Ok(perm)
}
