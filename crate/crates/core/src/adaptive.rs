//! Rate adaptation: shrinking a trained codebook to a smaller bit budget by
//! clustering its codewords, weighted by how many calibration points each one
//! represents.
//!
//! Reductions always start from the stored full-rate quantizer, never from an
//! earlier reduction, and involve no randomness. A sensor and the fusion
//! center that both hold the full-rate codebooks therefore derive identical
//! reduced codebooks from nothing more than the new budget.

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans1d_weighted, weighted_lloyd};
use crate::codebook::{check_bits, DistributedQuantizer, SensorCodebook};
use crate::error::{Error, Result};

/// Shrinks `cb` to at most `2^new_bits` codewords.
///
/// Codewords are grouped by exact weighted 1-D K-Means on their projected
/// values; for a linear model that is all the objective sees. Each group
/// becomes one codeword: the weight-weighted mean of its members, carrying
/// their summed weight. When the budget already covers every codeword, `cb`
/// is returned unchanged.
pub fn reduce_codebook(cb: &SensorCodebook, new_bits: u32, beta_slice: &[f64]) -> Result<SensorCodebook> {
    check_bits(new_bits)?;
    let target = 1usize << new_bits;
    if target >= cb.len() {
        return Ok(cb.clone());
    }
    let w: Vec<f64> = cb.weights().iter().map(|&n| n as f64).collect();
    let grouping = kmeans1d_weighted(cb.projected(), &w, target)?;
    let (codewords, weights) = merge_groups(cb.codewords(), cb.weights(), &grouping.assignment, grouping.k());

    let mut projected = vec![0.0; grouping.k()];
    for ((&g, &h), &n) in grouping.assignment.iter().zip(cb.projected()).zip(cb.weights()) {
        projected[g] += n as f64 * h;
    }
    for (h, &total) in projected.iter_mut().zip(&weights) {
        *h /= total as f64;
    }

    let reduced = SensorCodebook::new(cb.sensor_id(), new_bits, codewords, projected, weights)?;
    reduced.check_consistency(beta_slice)?;
    Ok(reduced)
}

/// `c'_g = sum n_k c_k / sum n_k` over the members of each group.
fn merge_groups(
    codewords: &[Vec<f64>],
    weights: &[u64],
    groups: &[usize],
    k: usize,
) -> (Vec<Vec<f64>>, Vec<u64>) {
    let dim = codewords[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut totals = vec![0u64; k];
    for ((c, &n), &g) in codewords.iter().zip(weights).zip(groups) {
        totals[g] += n;
        for (s, v) in sums[g].iter_mut().zip(c) {
            *s += n as f64 * v;
        }
    }
    let merged = sums
        .into_iter()
        .zip(&totals)
        .map(|(s, &t)| s.into_iter().map(|v| v / t as f64).collect())
        .collect();
    (merged, totals)
}

/// Weighted K-Means reduction of arbitrary codewords, for codebooks whose
/// downstream objective is not a 1-D projection. Uses seeded Lloyd restarts,
/// so both endpoints must agree on `seed` and `restarts`.
pub fn reduce_codewords(
    codewords: &[Vec<f64>],
    weights: &[u64],
    new_k: usize,
    seed: u64,
    restarts: usize,
) -> Result<(Vec<Vec<f64>>, Vec<u64>)> {
    if codewords.is_empty() {
        return Err(Error::invalid_codebook("codebook has no codewords"));
    }
    Error::check_dim("weights vs codewords", codewords.len(), weights.len())?;
    if new_k >= codewords.len() {
        return Ok((codewords.to_vec(), weights.to_vec()));
    }
    let dim = codewords[0].len();
    let flat: Vec<f64> = codewords.iter().flatten().copied().collect();
    let w: Vec<f64> = weights.iter().map(|&n| n as f64).collect();
    let lloyd = weighted_lloyd(&flat, dim, &w, new_k, seed, restarts)?;
    Ok(merge_groups(codewords, weights, &lloyd.assignment, lloyd.k()))
}

/// A requested budget that exceeded what the full-rate codebook was trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClampNote {
    pub sensor: usize,
    pub requested: u32,
    pub applied: u32,
}

/// Caps each requested budget at the full-rate codebook's budget.
pub fn clamp_bits(full_rate: &DistributedQuantizer, bits: &[u32]) -> Result<(Vec<u32>, Vec<ClampNote>)> {
    if bits.len() != full_rate.num_sensors() {
        return Err(Error::invalid_argument(format!(
            "{} bit budgets given for {} sensors",
            bits.len(),
            full_rate.num_sensors()
        )));
    }
    let mut notes = Vec::new();
    let applied = bits
        .iter()
        .zip(full_rate.codebooks())
        .enumerate()
        .map(|(i, (&b, cb))| {
            check_bits(b)?;
            if b > cb.bits() {
                notes.push(ClampNote {
                    sensor: i,
                    requested: b,
                    applied: cb.bits(),
                });
                Ok(cb.bits())
            } else {
                Ok(b)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((applied, notes))
}

/// Quantizer for the budgets `bits`, derived from the full-rate quantizer.
/// Budgets above the full rate are capped, with a warning.
pub fn adapt(full_rate: &DistributedQuantizer, bits: &[u32]) -> Result<DistributedQuantizer> {
    adapt_noting(full_rate, bits).map(|(q, _)| q)
}

/// [`adapt`], also returning which budgets were capped.
pub fn adapt_noting(full_rate: &DistributedQuantizer, bits: &[u32]) -> Result<(DistributedQuantizer, Vec<ClampNote>)> {
    let (applied, notes) = clamp_bits(full_rate, bits)?;
    for n in &notes {
        log::warn!(
            "sensor {}: {} bits requested, clamped to the trained maximum of {}",
            n.sensor,
            n.requested,
            n.applied
        );
    }
    let codebooks = full_rate
        .codebooks()
        .iter()
        .zip(&applied)
        .enumerate()
        .map(|(i, (cb, &b))| reduce_codebook(cb, b, full_rate.beta_slice(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok((full_rate.with_codebooks(codebooks)?, notes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEvent {
    pub t: u64,
    pub bits: Vec<u32>,
}

/// Time-indexed per-sensor bit budgets. The first event is at step 0 and
/// steps strictly increase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct RateSchedule {
    events: Vec<RateEvent>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    events: Vec<RateEvent>,
}

impl TryFrom<RawSchedule> for RateSchedule {
    type Error = Error;

    fn try_from(r: RawSchedule) -> Result<Self> {
        RateSchedule::new(r.events)
    }
}

impl From<RateSchedule> for RawSchedule {
    fn from(s: RateSchedule) -> Self {
        RawSchedule { events: s.events }
    }
}

impl RateSchedule {
    pub fn new(events: Vec<RateEvent>) -> Result<Self> {
        let first = events
            .first()
            .ok_or_else(|| Error::invalid_input("rate schedule has no events"))?;
        if first.t != 0 {
            return Err(Error::invalid_input("rate schedule must start at step 0"));
        }
        if events.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(Error::invalid_input("rate schedule steps must strictly increase"));
        }
        let m = first.bits.len();
        for e in &events {
            if e.bits.len() != m {
                return Err(Error::invalid_input(format!(
                    "event at step {} lists {} budgets, expected {m}",
                    e.t,
                    e.bits.len()
                )));
            }
            if e.bits.iter().any(|&b| b < 1) {
                return Err(Error::invalid_input(format!("event at step {} has a zero budget", e.t)));
            }
        }
        Ok(RateSchedule { events })
    }

    /// A single budget for the whole session.
    pub fn constant(bits: Vec<u32>) -> Result<Self> {
        RateSchedule::new(vec![RateEvent { t: 0, bits }])
    }

    pub fn events(&self) -> &[RateEvent] {
        &self.events
    }

    pub fn num_sensors(&self) -> usize {
        self.events[0].bits.len()
    }

    /// The event that takes effect exactly at step `t`, if any.
    pub fn event_at(&self, t: u64) -> Option<&RateEvent> {
        self.events
            .binary_search_by_key(&t, |e| e.t)
            .ok()
            .map(|i| &self.events[i])
    }

    /// Budgets in force at step `t`.
    pub fn bits_at(&self, t: u64) -> &[u32] {
        let i = self.events.partition_point(|e| e.t <= t);
        &self.events[i - 1].bits
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeaturePartition, LinearModel};

    fn scalar(bits: u32, h: &[f64], w: &[u64]) -> SensorCodebook {
        SensorCodebook::new(0, bits, h.iter().map(|&v| vec![v]).collect(), h.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn reduce_three_to_two() {
        let cb = scalar(2, &[0.0, 2.0, 10.0], &[1, 1, 2]);
        let r = reduce_codebook(&cb, 1, &[1.0]).unwrap();
        assert_eq!(r.projected(), &[1.0, 10.0]);
        assert_eq!(r.weights(), &[2, 2]);
        assert_eq!(r.codewords(), &[vec![1.0], vec![10.0]]);
        assert_eq!(r.bits(), 1);
    }

    #[test]
    fn identity_when_budget_covers_codebook() {
        let cb = scalar(3, &[0.0, 1.0, 2.0, 3.0], &[4, 1, 1, 2]);
        assert_eq!(reduce_codebook(&cb, 2, &[1.0]).unwrap(), cb);
        assert_eq!(reduce_codebook(&cb, 3, &[1.0]).unwrap(), cb);
        let single = scalar(5, &[7.0], &[9]);
        for b in 1..=5 {
            assert_eq!(reduce_codebook(&single, b, &[1.0]).unwrap(), single);
        }
    }

    #[test]
    fn reduce_rejects_zero_bits() {
        let cb = scalar(2, &[0.0, 1.0], &[1, 1]);
        assert!(reduce_codebook(&cb, 0, &[1.0]).is_err());
    }

    #[test]
    fn multi_dimensional_codewords_merge_linearly() {
        let beta = [1.0, -2.0];
        let cws = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, -3.0], vec![2.0, -3.0]];
        let h: Vec<f64> = cws.iter().map(|c| c[0] * beta[0] + c[1] * beta[1]).collect();
        let cb = SensorCodebook::new(0, 2, cws, h, vec![3, 1, 2, 2]).unwrap();
        let r = reduce_codebook(&cb, 1, &beta).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r.total_weight(), 8);
        assert_eq!(r.codeword(0), &[0.25, 0.0]);
    }

    #[test]
    fn general_reduction_weighted_means() {
        let cws = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![10.0, 0.0], vec![10.0, 3.0]];
        let (c, w) = reduce_codewords(&cws, &[1, 3, 2, 2], 2, 0, 4).unwrap();
        let mut pairs: Vec<_> = c.into_iter().zip(w).collect();
        pairs.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
        assert_eq!(pairs[0], (vec![0.0, 0.75], 4));
        assert_eq!(pairs[1], (vec![10.0, 1.5], 4));
    }

    #[test]
    fn adapt_caps_budgets() {
        let model = LinearModel::new(vec![1.0]).unwrap();
        let part = FeaturePartition::contiguous(1, 1).unwrap();
        let q = DistributedQuantizer::new(model, part, vec![scalar(2, &[0.0, 1.0, 5.0], &[1, 1, 1])]).unwrap();
        let (a, notes) = adapt_noting(&q, &[4]).unwrap();
        assert_eq!(a, q);
        assert_eq!(notes, vec![ClampNote { sensor: 0, requested: 4, applied: 2 }]);
        assert!(adapt(&q, &[1, 1]).is_err());
        assert_eq!(adapt(&q, &[1]).unwrap().codebook(0).len(), 2);
    }

    #[test]
    fn schedule_validation_and_lookup() {
        let s: RateSchedule = serde_json::from_str(
            r#"{"events": [{"t": 0, "bits": [4, 4]}, {"t": 10, "bits": [1, 2]}]}"#,
        )
        .unwrap();
        assert_eq!(s.bits_at(0), &[4, 4]);
        assert_eq!(s.bits_at(9), &[4, 4]);
        assert_eq!(s.bits_at(10), &[1, 2]);
        assert_eq!(s.bits_at(1000), &[1, 2]);
        assert!(s.event_at(10).is_some());
        assert!(s.event_at(5).is_none());

        let bad = [
            r#"{"events": []}"#,
            r#"{"events": [{"t": 1, "bits": [4]}]}"#,
            r#"{"events": [{"t": 0, "bits": [4]}, {"t": 0, "bits": [3]}]}"#,
            r#"{"events": [{"t": 0, "bits": [4]}, {"t": 3, "bits": [3, 3]}]}"#,
            r#"{"events": [{"t": 0, "bits": [0]}]}"#,
        ];
        for b in bad {
            assert!(serde_json::from_str::<RateSchedule>(b).is_err(), "{b}");
        }
    }
}
