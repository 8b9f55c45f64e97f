//! Brute-force references shared by the integration tests.

#![allow(dead_code)]

use distq::{DistributedQuantizer, FeaturePartition, LinearModel, SensorCodebook};
use rand::Rng;

/// `sum w (v - mean)^2` of one group, members taken in the given order.
pub fn group_cost(members: &[(f64, f64)]) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let w: f64 = members.iter().map(|m| m.1).sum();
    let mean = members.iter().map(|m| m.0 * m.1).sum::<f64>() / w;
    members.iter().map(|&(v, wt)| wt * (v - mean) * (v - mean)).sum()
}

/// `sum w v^2`, the scale against which a zero cost is judged.
pub fn cost_scale(values: &[f64], weights: &[f64]) -> f64 {
    values.iter().zip(weights).map(|(v, w)| w * v * v).sum()
}

/// Minimum cost over all partitions of the sorted values into at most `k`
/// runs of consecutive values.
pub fn contiguous_bruteforce(values: &[f64], weights: &[f64], k: usize) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    let mut best = f64::INFINITY;
    // Bit g of `mask` set means a cut after sorted position g.
    for mask in 0u32..(1 << (n - 1)) {
        if mask.count_ones() as usize > k - 1 {
            continue;
        }
        let mut cost = 0.0;
        let mut start = 0;
        for g in 0..n {
            if g == n - 1 || mask & (1 << g) != 0 {
                cost += group_cost(&pairs[start..=g]);
                start = g + 1;
            }
        }
        best = best.min(cost);
    }
    best
}

/// Minimum cost over every partition of the points into at most `k` groups,
/// contiguous or not.
pub fn partition_bruteforce(values: &[f64], weights: &[f64], k: usize) -> f64 {
    let n = values.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    // Restricted growth strings enumerate each set partition once.
    fn rec(i: usize, used: usize, k: usize, labels: &mut Vec<usize>, values: &[f64], weights: &[f64], best: &mut f64) {
        if i == labels.len() {
            let cost: f64 = (0..used)
                .map(|g| {
                    let members: Vec<(f64, f64)> = (0..labels.len())
                        .filter(|&j| labels[j] == g)
                        .map(|j| (values[j], weights[j]))
                        .collect();
                    group_cost(&members)
                })
                .sum();
            *best = best.min(cost);
            return;
        }
        for g in 0..(used + 1).min(k) {
            labels[i] = g;
            rec(i + 1, used.max(g + 1), k, labels, values, weights, best);
        }
    }
    rec(0, 0, k, &mut labels, values, weights, &mut best);
    best
}

/// `|a - b| <= tol * max(|a|, |b|)`, where costs below `1e-15 * scale` count
/// as zero (a one-point cluster can have a cost of a few ulps squared).
pub fn close_rel(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    let floor = 1e-15 * scale;
    if a.abs() <= floor && b.abs() <= floor {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// `sum_k n_k min_g (h_k - h'_g)^2`: the weighted distortion of representing
/// the projected values `h` with the reduced set `reduced`.
pub fn reduction_distortion(h: &[f64], n: &[u64], reduced: &[f64]) -> f64 {
    h.iter()
        .zip(n)
        .map(|(&v, &w)| {
            let d = reduced.iter().map(|&r| (v - r) * (v - r)).fold(f64::INFINITY, f64::min);
            w as f64 * d
        })
        .sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A random consistent codebook of `k` codewords in `dim` dimensions.
pub fn random_codebook<R: Rng>(rng: &mut R, sensor_id: usize, bits: u32, k: usize, beta: &[f64]) -> SensorCodebook {
    let dim = beta.len();
    let mut cells: Vec<(f64, Vec<f64>)> = (0..k)
        .map(|_| {
            let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
            (dot(&c, beta), c)
        })
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    cells.dedup_by(|a, b| a.0 == b.0);
    let weights = (0..cells.len()).map(|_| rng.gen_range(1..50u64)).collect();
    let (h, cws): (Vec<f64>, Vec<Vec<f64>>) = cells.into_iter().unzip();
    SensorCodebook::new(sensor_id, bits, cws, h, weights).unwrap()
}

/// A quantizer with `m` random sensors of `per` features and `bits` each.
pub fn random_quantizer<R: Rng>(rng: &mut R, m: usize, per: usize, bits: u32) -> DistributedQuantizer {
    let beta: Vec<f64> = (0..m * per).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let model = LinearModel::new(beta.clone()).unwrap();
    let partition = FeaturePartition::contiguous(m, per).unwrap();
    let k = 1usize << bits;
    let cbs = (0..m)
        .map(|i| random_codebook(rng, i, bits, k, &beta[i * per..(i + 1) * per]))
        .collect();
    DistributedQuantizer::new(model, partition, cbs).unwrap()
}
