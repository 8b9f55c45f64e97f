//! Globally optimal weighted K-Means on the real line.
//!
//! Optimal 1-D clusters are contiguous runs of the sorted values, so the
//! problem is a shortest path over split positions. Interval costs come in
//! O(1) from prefix sums of `w`, `w*v` and `w*v^2`; each DP layer is filled by
//! divide and conquer over the (monotone) optimal split position, giving
//! O(K n log n) overall.
//!
//! The DP runs over suffixes so that the optimal partition can be read off
//! front to back, always taking the smallest optimal next boundary. This
//! yields the lexicographically smallest boundary sequence among all optimal
//! partitions.

use crate::error::{Error, Result};

/// Result of a 1-D clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering1D {
    /// Start position (in sorted input order) of every cluster but the first.
    pub boundaries: Vec<usize>,
    /// Weighted mean of each cluster, strictly increasing.
    pub centers: Vec<f64>,
    /// Total weight of each cluster.
    pub cluster_weights: Vec<f64>,
    /// `sum_j w_j (v_j - center(a_j))^2`, recomputed directly from the centers.
    pub cost: f64,
    /// Cluster index of each input, in input order.
    pub assignment: Vec<usize>,
}

impl Clustering1D {
    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

/// Prefix sums over distinct sorted values, centred on their weighted mean.
struct IntervalCost {
    w: Vec<f64>,
    wv: Vec<f64>,
    wv2: Vec<f64>,
}

impl IntervalCost {
    fn new(values: &[f64], weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let shift = values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total;
        let n = values.len();
        let (mut w, mut wv, mut wv2) = (
            Vec::with_capacity(n + 1),
            Vec::with_capacity(n + 1),
            Vec::with_capacity(n + 1),
        );
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        w.push(a);
        wv.push(b);
        wv2.push(c);
        for (&v, &wt) in values.iter().zip(weights) {
            let v = v - shift;
            a += wt;
            b += wt * v;
            c += wt * v * v;
            w.push(a);
            wv.push(b);
            wv2.push(c);
        }
        IntervalCost { w, wv, wv2 }
    }

    /// Within-cluster weighted squared deviation of values `lo..hi`.
    #[inline]
    fn cost(&self, lo: usize, hi: usize) -> f64 {
        let w = self.w[hi] - self.w[lo];
        let s = self.wv[hi] - self.wv[lo];
        let s2 = self.wv2[hi] - self.wv2[lo];
        (s2 - s * s / w).max(0.0)
    }
}

fn validate(values: &[f64], weights: &[f64], k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::invalid_argument("number of clusters must be at least 1"));
    }
    if values.is_empty() {
        return Err(Error::invalid_argument("cannot cluster an empty set of values"));
    }
    Error::check_dim("weights vs values", values.len(), weights.len())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_argument("values must be finite"));
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::invalid_argument("weights must be positive and finite"));
    }
    Ok(())
}

/// Exact weighted 1-D K-Means into `min(k, #distinct values)` clusters.
pub fn kmeans1d_weighted(values: &[f64], weights: &[f64], k: usize) -> Result<Clustering1D> {
    validate(values, weights, k)?;

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    // Collapse equal values: they always share a cluster.
    let mut uniq: Vec<f64> = Vec::new();
    let mut uniq_w: Vec<f64> = Vec::new();
    let mut uniq_start: Vec<usize> = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        let v = values[j];
        if uniq.last() == Some(&v) {
            *uniq_w.last_mut().unwrap() += weights[j];
        } else {
            uniq.push(v);
            uniq_w.push(weights[j]);
            uniq_start.push(pos);
        }
    }

    let m = uniq.len();
    let k = k.min(m);
    let starts = optimal_starts(&uniq, &uniq_w, k);

    // Map cluster starts over distinct values back onto the sorted input.
    let mut cluster_of_uniq = vec![0usize; m];
    for (c, &s) in starts.iter().enumerate() {
        let e = starts.get(c + 1).copied().unwrap_or(m);
        cluster_of_uniq[s..e].fill(c);
    }
    let boundaries: Vec<usize> = starts[1..].iter().map(|&u| uniq_start[u]).collect();

    let mut sum_w = vec![0.0; k];
    let mut sum_wv = vec![0.0; k];
    for (u, (&v, &w)) in uniq.iter().zip(&uniq_w).enumerate() {
        sum_w[cluster_of_uniq[u]] += w;
        sum_wv[cluster_of_uniq[u]] += w * v;
    }
    let centers: Vec<f64> = sum_wv.iter().zip(&sum_w).map(|(s, w)| s / w).collect();

    let mut assignment = vec![0usize; values.len()];
    let mut u = 0;
    for (pos, &j) in order.iter().enumerate() {
        while u + 1 < m && uniq_start[u + 1] <= pos {
            u += 1;
        }
        assignment[j] = cluster_of_uniq[u];
    }
    let cost = values
        .iter()
        .zip(weights)
        .zip(&assignment)
        .map(|((v, w), &a)| w * (v - centers[a]).powi(2))
        .sum();

    Ok(Clustering1D {
        boundaries,
        centers,
        cluster_weights: sum_w,
        cost,
        assignment,
    })
}

/// Start index (over distinct sorted values) of each of the `k` optimal
/// clusters; `k <= values.len()`.
fn optimal_starts(values: &[f64], weights: &[f64], k: usize) -> Vec<usize> {
    let m = values.len();
    if k == 1 {
        return vec![0];
    }
    if k == m {
        return (0..m).collect();
    }
    let ic = IntervalCost::new(values, weights);

    // suffix[i]: best cost of values i..m split into the current layer's count.
    let mut suffix: Vec<f64> = (0..=m).map(|i| if i < m { ic.cost(i, m) } else { f64::INFINITY }).collect();
    // splits[layer][i]: smallest optimal end of the first cluster of i..m
    // when `layer + 2` clusters remain.
    let mut splits: Vec<Vec<u32>> = Vec::with_capacity(k - 1);
    let mut next = vec![f64::INFINITY; m + 1];

    for clusters in 2..k {
        // Suffix i needs `clusters` distinct values; only suffixes reachable
        // after `k - clusters` leading clusters matter.
        let lo = k - clusters;
        let hi = m - clusters;
        let mut arg = vec![0u32; m];
        next.iter_mut().for_each(|v| *v = f64::INFINITY);
        fill_layer(&ic, &suffix, &mut next, &mut arg, lo, hi, lo + 1, m - clusters + 1, m);
        std::mem::swap(&mut suffix, &mut next);
        splits.push(arg);
    }

    // Top layer: only the full range matters.
    let mut best = f64::INFINITY;
    let mut best_t = 1;
    for t in 1..=m - (k - 1) {
        let c = ic.cost(0, t) + suffix[t];
        if c < best {
            best = c;
            best_t = t;
        }
    }

    let mut starts = Vec::with_capacity(k);
    starts.push(0);
    let mut i = best_t;
    for layer in (0..k - 2).rev() {
        starts.push(i);
        i = splits[layer][i] as usize;
    }
    starts.push(i);
    starts
}

/// Fills `out[i]` for `i` in `ilo..=ihi` with `min_t cost(i, t) + prev[t]`,
/// searching `t` in `tlo..=thi` and relying on the smallest optimal `t` being
/// non-decreasing in `i`.
#[allow(clippy::too_many_arguments)]
fn fill_layer(
    ic: &IntervalCost,
    prev: &[f64],
    out: &mut [f64],
    arg: &mut [u32],
    ilo: usize,
    ihi: usize,
    tlo: usize,
    thi: usize,
    m: usize,
) {
    if ilo > ihi {
        return;
    }
    let mid = ilo + (ihi - ilo) / 2;
    let start = tlo.max(mid + 1);
    let end = thi.min(m);
    let mut best = f64::INFINITY;
    let mut best_t = start;
    for t in start..=end {
        let c = ic.cost(mid, t) + prev[t];
        if c < best {
            best = c;
            best_t = t;
        }
    }
    out[mid] = best;
    arg[mid] = best_t as u32;
    if mid > ilo {
        fill_layer(ic, prev, out, arg, ilo, mid - 1, tlo, best_t, m);
    }
    fill_layer(ic, prev, out, arg, mid + 1, ihi, best_t, thi, m);
}
