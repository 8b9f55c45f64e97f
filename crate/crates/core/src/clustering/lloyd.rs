//! Weighted Lloyd iteration in arbitrary dimension, seeded by weighted
//! K-Means++.
//!
//! Assignment steps keep distance bounds per point (an upper bound to the
//! assigned center and a lower bound per group of centers, as in Yinyang
//! K-Means) so that points which cannot have changed cluster skip the scan.
//! The iterates are those of plain Lloyd: a point is only left alone when its
//! assigned center is strictly closer than every other center.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 8;

/// Outcome of one Lloyd run, or the best of several.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    /// `k` centers of dimension `dim`, row-major.
    pub centers: Vec<f64>,
    pub dim: usize,
    /// Cluster index of each point.
    pub assignment: Vec<usize>,
    /// Weighted sum of squared distances to assigned centers.
    pub cost: f64,
    /// Cost after every assignment step of the returned run.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of clusters that was asked for.
    pub requested_k: usize,
    /// Restart that produced this result.
    pub restart: usize,
}

impl LloydResult {
    pub fn k(&self) -> usize {
        self.centers.len() / self.dim
    }

    /// True when fewer clusters than requested were produced because the data
    /// has fewer distinct points.
    pub fn clamped(&self) -> bool {
        self.k() < self.requested_k
    }

    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    /// Total weight assigned to each cluster.
    pub fn cluster_weights(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        for (&a, &w) in self.assignment.iter().zip(weights) {
            out[a] += w;
        }
        out
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn validate(points: &[f64], dim: usize, weights: &[f64], k: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::invalid_argument("points must have positive dimension"));
    }
    if points.is_empty() || !points.len().is_multiple_of(dim) {
        return Err(Error::invalid_argument("points must be a non-empty list of equal-length vectors"));
    }
    let n = points.len() / dim;
    Error::check_dim("weights vs points", n, weights.len())?;
    if k < 1 {
        return Err(Error::invalid_argument("number of clusters must be at least 1"));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid_argument("points must be finite"));
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::invalid_argument("weights must be positive and finite"));
    }
    Ok(n)
}

/// Best of `restarts` K-Means++-seeded weighted Lloyd runs. Each restart draws
/// from its own stream of a generator keyed by `seed`, so the result depends
/// only on `(seed, restarts)`; ties in cost go to the lower restart index.
///
/// `k` larger than the number of distinct points is clamped; see
/// [`LloydResult::clamped`].
pub fn weighted_lloyd(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<LloydResult> {
    let n = validate(points, dim, weights, k)?;
    if restarts < 1 {
        return Err(Error::invalid_argument("restarts must be at least 1"));
    }
    let requested_k = k;
    let k = k.min(n);
    let runs: Vec<LloydResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let init = kmeans_pp(points, dim, weights, k, &mut rng);
            let mut run = lloyd_from_unchecked(points, dim, weights, init, DEFAULT_MAX_ITERS);
            run.restart = r;
            run
        })
        .collect();
    let mut best = runs
        .into_iter()
        .reduce(|best, r| if r.cost < best.cost { r } else { best })
        .expect("at least one restart");
    best.requested_k = requested_k;
    Ok(best)
}

/// Weighted Lloyd from explicit initial centers (row-major, `dim` columns).
pub fn lloyd_from(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    init_centers: Vec<f64>,
    max_iters: usize,
) -> Result<LloydResult> {
    let n = validate(points, dim, weights, 1)?;
    if init_centers.is_empty() || !init_centers.len().is_multiple_of(dim) {
        return Err(Error::invalid_argument("initial centers must be non-empty vectors of the point dimension"));
    }
    if init_centers.len() / dim > n {
        return Err(Error::invalid_argument("more initial centers than points"));
    }
    Ok(lloyd_from_unchecked(points, dim, weights, init_centers, max_iters))
}

/// Weighted K-Means++ seeding: each new center is a data point drawn with
/// probability proportional to `w_j * D_j^2`. Stops early once every point
/// coincides with a chosen center.
fn kmeans_pp(points: &[f64], dim: usize, weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = weights.len();
    let pick = |scores: &mut dyn Iterator<Item = f64>, total: f64, rng: &mut ChaCha8Rng| -> usize {
        let target = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (j, s) in scores.enumerate() {
            if s > 0.0 {
                acc += s;
                last_positive = j;
                if acc > target {
                    return j;
                }
            }
        }
        last_positive
    };

    let total_w: f64 = weights.iter().sum();
    let first = pick(&mut weights.iter().copied(), total_w, rng);
    let mut centers = points[first * dim..(first + 1) * dim].to_vec();
    let mut d2: Vec<f64> = points
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &centers[..dim]))
        .collect();
    // Nearest chosen center of each point. A new center `c` cannot be closer
    // to a point than its nearest center `a` when |c - a| >= 2 |x - a|.
    let mut nearest = vec![0usize; n];
    let mut to_new = Vec::with_capacity(k);

    while centers.len() / dim < k {
        let total: f64 = d2.iter().zip(weights).map(|(d, w)| d * w).sum();
        if total <= 0.0 {
            break;
        }
        let j = pick(&mut d2.iter().zip(weights).map(|(d, w)| d * w), total, rng);
        let c = points[j * dim..(j + 1) * dim].to_vec();
        let id = centers.len() / dim;
        to_new.clear();
        to_new.extend(centers.chunks_exact(dim).map(|x| sq_dist(x, &c)));
        for (i, p) in points.chunks_exact(dim).enumerate() {
            if to_new[nearest[i]] > 4.0 * d2[i] * (1.0 + 1e-9) {
                continue;
            }
            let d = sq_dist(p, &c);
            if d < d2[i] {
                d2[i] = d;
                nearest[i] = id;
            }
        }
        centers.extend_from_slice(&c);
    }
    centers
}

/// Centers are split into groups of about ten nearby centers; every point
/// keeps an upper bound on the distance to its center and, per group, a lower
/// bound on the distance to the other centers of that group.
const GROUP_SIZE: usize = 10;

struct State<'a> {
    points: &'a [f64],
    weights: &'a [f64],
    dim: usize,
    k: usize,
    centers: Vec<f64>,
    assignment: Vec<usize>,
    upper: Vec<f64>,
    /// `n x groups.len()`, row-major.
    lower: Vec<f64>,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

/// Per-group nearest and second-nearest squared distances seen in a scan.
#[derive(Clone, Copy)]
struct GroupScan {
    d1: f64,
    arg: usize,
    d2: f64,
}

impl GroupScan {
    const EMPTY: GroupScan = GroupScan {
        d1: f64::INFINITY,
        arg: usize::MAX,
        d2: f64::INFINITY,
    };

    fn push(&mut self, c: usize, d: f64) {
        if d < self.d1 || (d == self.d1 && c < self.arg) {
            self.d2 = self.d1;
            self.d1 = d;
            self.arg = c;
        } else if d < self.d2 {
            self.d2 = d;
        }
    }
}

/// Groups centers by a few Lloyd steps on the centers themselves, started
/// from the first `k / GROUP_SIZE` of them. Only affects speed.
fn group_centers(centers: &[f64], dim: usize, k: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    let g = k.div_ceil(GROUP_SIZE);
    let mut group_of = vec![0; k];
    if g > 1 {
        let mut means = centers[..g * dim].to_vec();
        for _ in 0..5 {
            for (c, x) in centers.chunks_exact(dim).enumerate() {
                let mut best = (f64::INFINITY, 0);
                for (h, m) in means.chunks_exact(dim).enumerate() {
                    let d = sq_dist(x, m);
                    if d < best.0 {
                        best = (d, h);
                    }
                }
                group_of[c] = best.1;
            }
            let mut sums = vec![0.0; g * dim];
            let mut counts = vec![0usize; g];
            for (c, x) in centers.chunks_exact(dim).enumerate() {
                counts[group_of[c]] += 1;
                for (s, &v) in sums[group_of[c] * dim..].iter_mut().zip(x) {
                    *s += v;
                }
            }
            for h in 0..g {
                if counts[h] > 0 {
                    for (m, s) in means[h * dim..(h + 1) * dim].iter_mut().zip(&sums[h * dim..]) {
                        *m = s / counts[h] as f64;
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); g];
    for (c, &h) in group_of.iter().enumerate() {
        groups[h].push(c);
    }
    groups.retain(|m| !m.is_empty());
    for (h, members) in groups.iter().enumerate() {
        for &c in members {
            group_of[c] = h;
        }
    }
    (groups, group_of)
}

impl State<'_> {
    fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    /// Exact nearest center of every point (ties to the lower index), with
    /// fresh bounds.
    fn full_assign(&mut self) -> usize {
        let ng = self.groups.len();
        let mut scans = vec![GroupScan::EMPTY; ng];
        let mut changed = 0;
        for j in 0..self.weights.len() {
            let mut best = GroupScan::EMPTY;
            for (g, members) in self.groups.iter().enumerate() {
                let mut gs = GroupScan::EMPTY;
                for &c in members {
                    gs.push(c, sq_dist(self.point(j), self.center(c)));
                }
                best.push(gs.arg, gs.d1);
                scans[g] = gs;
            }
            let c = best.arg;
            if c != self.assignment[j] {
                changed += 1;
            }
            self.assignment[j] = c;
            self.upper[j] = best.d1.sqrt();
            let home = self.group_of[c];
            for (g, gs) in scans.iter().enumerate() {
                self.lower[j * ng + g] = if g == home { gs.d2 } else { gs.d1 }.sqrt();
            }
        }
        changed
    }

    /// Bounded assignment step; `moves[c]` is how far center `c` moved since
    /// the bounds were last valid. A group is only scanned when its lower
    /// bound does not exceed the best distance found so far, so the result is
    /// the exact nearest center.
    fn bounded_assign(&mut self, moves: &[f64]) -> usize {
        let ng = self.groups.len();
        let drift: Vec<f64> = self
            .groups
            .iter()
            .map(|members| members.iter().map(|&c| moves[c]).fold(0.0, f64::max))
            .collect();
        let mut scanned: Vec<(usize, GroupScan)> = Vec::with_capacity(ng);
        let mut changed = 0;
        for j in 0..self.weights.len() {
            let a = self.assignment[j];
            let lower = &mut self.lower[j * ng..(j + 1) * ng];
            let mut min_lower = f64::INFINITY;
            for (l, &dr) in lower.iter_mut().zip(&drift) {
                *l -= dr;
                min_lower = min_lower.min(*l);
            }
            let u = self.upper[j] + moves[a];
            if u < min_lower {
                self.upper[j] = u;
                continue;
            }
            let p = &self.points[j * self.dim..(j + 1) * self.dim];
            let da = sq_dist(p, &self.centers[a * self.dim..(a + 1) * self.dim]);
            let u = da.sqrt();
            self.upper[j] = u;
            if u < min_lower {
                continue;
            }

            let mut best = GroupScan::EMPTY;
            best.push(a, da);
            scanned.clear();
            for g in 0..ng {
                if lower[g] > best.d1.sqrt() {
                    continue;
                }
                let mut gs = GroupScan::EMPTY;
                for &c in &self.groups[g] {
                    let d = if c == a {
                        da
                    } else {
                        sq_dist(p, &self.centers[c * self.dim..(c + 1) * self.dim])
                    };
                    gs.push(c, d);
                }
                best.push(gs.arg, gs.d1);
                scanned.push((g, gs));
            }
            let c = best.arg;
            let home = self.group_of[c];
            for &(g, gs) in &scanned {
                lower[g] = if g == home { gs.d2 } else { gs.d1 }.sqrt();
            }
            if c != a {
                changed += 1;
                let ga = self.group_of[a];
                if !scanned.iter().any(|&(g, _)| g == ga) {
                    lower[ga] = lower[ga].min(u);
                }
                self.assignment[j] = c;
                self.upper[j] = best.d1.sqrt();
            }
        }
        changed
    }

    fn cost(&self) -> f64 {
        (0..self.weights.len())
            .map(|j| self.weights[j] * sq_dist(self.point(j), self.center(self.assignment[j])))
            .sum()
    }

    /// Moves one point into every empty cluster, taking the point with the
    /// largest weighted distance to its center from a cluster that can spare
    /// it. Returns whether anything moved.
    fn repair_empty(&mut self) -> bool {
        let mut counts = vec![0usize; self.k];
        for &a in &self.assignment {
            counts[a] += 1;
        }
        let mut repaired = false;
        for e in 0..self.k {
            if counts[e] > 0 {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.weights.len() {
                let a = self.assignment[j];
                if counts[a] < 2 {
                    continue;
                }
                let s = self.weights[j] * sq_dist(self.point(j), self.center(a));
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
            let Some((j, _)) = best else { break };
            counts[self.assignment[j]] -= 1;
            counts[e] += 1;
            self.assignment[j] = e;
            let p = self.point(j).to_vec();
            self.centers[e * self.dim..(e + 1) * self.dim].copy_from_slice(&p);
            repaired = true;
        }
        repaired
    }

    /// Replaces every center by the weighted mean of its points; returns how
    /// far each center moved.
    fn update_centers(&mut self) -> Vec<f64> {
        let dim = self.dim;
        let mut sums = vec![0.0; self.k * dim];
        let mut mass = vec![0.0; self.k];
        for j in 0..self.weights.len() {
            let a = self.assignment[j];
            let w = self.weights[j];
            mass[a] += w;
            for (s, &x) in sums[a * dim..(a + 1) * dim].iter_mut().zip(self.point(j)) {
                *s += w * x;
            }
        }
        let mut moves = vec![0.0; self.k];
        for c in 0..self.k {
            if mass[c] == 0.0 {
                continue;
            }
            let new: Vec<f64> = sums[c * dim..(c + 1) * dim].iter().map(|s| s / mass[c]).collect();
            moves[c] = sq_dist(&new, self.center(c)).sqrt();
            self.centers[c * dim..(c + 1) * dim].copy_from_slice(&new);
        }
        moves
    }
}

fn lloyd_from_unchecked(
    points: &[f64],
    dim: usize,
    weights: &[f64],
    init_centers: Vec<f64>,
    max_iters: usize,
) -> LloydResult {
    let n = weights.len();
    let k = init_centers.len() / dim;
    let mut st = State {
        points,
        weights,
        dim,
        k,
        centers: init_centers,
        assignment: vec![0; n],
        upper: vec![0.0; n],
        lower: Vec::new(),
        groups: Vec::new(),
        group_of: Vec::new(),
    };
    (st.groups, st.group_of) = group_centers(&st.centers, dim, k);
    st.lower = vec![0.0; n * st.groups.len()];
    st.full_assign();
    let mut history = vec![st.cost()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let repaired = st.repair_empty();
        let moves = st.update_centers();
        let changed = if repaired { st.full_assign() } else { st.bounded_assign(&moves) };
        history.push(st.cost());
        if changed == 0 && !repaired {
            converged = true;
            break;
        }
    }
    if !converged {
        // Leave centers as centroids of the final assignment.
        st.repair_empty();
        st.update_centers();
        *history.last_mut().unwrap() = st.cost();
    }

    LloydResult {
        cost: *history.last().unwrap(),
        centers: st.centers,
        dim,
        assignment: st.assignment,
        cost_history: history,
        iterations,
        converged,
        requested_k: k,
        restart: 0,
    }
}
