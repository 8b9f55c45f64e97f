//! Quantizer trainers.
//!
//! [`train_distributed`] clusters each sensor's projected calibration data
//! exactly in one dimension and takes codewords as the means of the raw
//! slices in each cluster. [`train_agnostic`] is the model-blind baseline: it
//! clusters the raw slices with Lloyd's algorithm and only afterwards
//! attaches projected values so the fusion center can use the codebook.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans1d_weighted, weighted_lloyd, DEFAULT_RESTARTS};
use crate::codebook::{check_bits, DistributedQuantizer, SensorCodebook};
use crate::error::{Error, Result};
use crate::model::{dot, CalibrationSet, FeaturePartition, LinearModel};

/// Codewords whose projected values differ by no more than this are merged.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub bits_per_sensor: Vec<u32>,
    #[serde(default)]
    pub baseline_seed: u64,
    #[serde(default = "default_restarts")]
    pub baseline_restarts: usize,
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

impl TrainConfig {
    pub fn new(bits_per_sensor: Vec<u32>) -> Self {
        TrainConfig {
            bits_per_sensor,
            baseline_seed: 0,
            baseline_restarts: DEFAULT_RESTARTS,
        }
    }

    /// Same budget for each of `m` sensors.
    pub fn uniform(m: usize, bits: u32) -> Self {
        TrainConfig::new(vec![bits; m])
    }

    pub fn with_baseline(mut self, seed: u64, restarts: usize) -> Self {
        self.baseline_seed = seed;
        self.baseline_restarts = restarts;
        self
    }

    fn validate(&self, partition: &FeaturePartition) -> Result<()> {
        if self.bits_per_sensor.len() != partition.num_sensors() {
            return Err(Error::invalid_argument(format!(
                "{} bit budgets given for {} sensors",
                self.bits_per_sensor.len(),
                partition.num_sensors()
            )));
        }
        self.bits_per_sensor.iter().try_for_each(|&b| check_bits(b))?;
        if self.baseline_restarts < 1 {
            return Err(Error::invalid_argument("baseline restarts must be at least 1"));
        }
        Ok(())
    }
}

fn check_inputs(cal: &CalibrationSet, model: &LinearModel, partition: &FeaturePartition) -> Result<()> {
    model.check_partition(partition)?;
    cal.check_cols("calibration columns vs model dim", model.dim())
}

/// One cluster before it becomes a codeword: its mean slice and its size.
pub(crate) struct Cell {
    pub codeword: Vec<f64>,
    pub weight: u64,
}

/// Sorts cells by projected value, merges cells whose projections coincide,
/// and packages the result as a codebook.
pub(crate) fn build_codebook(
    sensor_id: usize,
    bits: u32,
    mut cells: Vec<Cell>,
    beta_slice: &[f64],
) -> Result<SensorCodebook> {
    let mut keyed: Vec<(f64, Cell)> = cells.drain(..).map(|c| (dot(&c.codeword, beta_slice), c)).collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut merged: Vec<(f64, Cell)> = Vec::with_capacity(keyed.len());
    for (h, cell) in keyed {
        match merged.last_mut() {
            Some((last_h, last)) if h - *last_h <= MERGE_TOL => {
                let total = last.weight + cell.weight;
                let (wa, wb) = (last.weight as f64, cell.weight as f64);
                for (a, b) in last.codeword.iter_mut().zip(&cell.codeword) {
                    *a = (wa * *a + wb * b) / (wa + wb);
                }
                last.weight = total;
                *last_h = dot(&last.codeword, beta_slice);
            }
            _ => merged.push((h, cell)),
        }
    }
    let mut codewords = Vec::with_capacity(merged.len());
    let mut projected = Vec::with_capacity(merged.len());
    let mut weights = Vec::with_capacity(merged.len());
    for (h, cell) in merged {
        codewords.push(cell.codeword);
        projected.push(h);
        weights.push(cell.weight);
    }
    SensorCodebook::new(sensor_id, bits, codewords, projected, weights)
}

/// Mean slice of every cluster, given cluster labels for the rows of a
/// row-major `slices` matrix with `dim` columns.
fn cluster_means(slices: &[f64], dim: usize, labels: &[usize], k: usize) -> Vec<Cell> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0u64; k];
    for (row, &a) in slices.chunks_exact(dim).zip(labels) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(row) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .filter(|(_, c)| *c > 0)
        .map(|(s, c)| Cell {
            codeword: s.into_iter().map(|v| v / c as f64).collect(),
            weight: c,
        })
        .collect()
}

/// Trains one sensor's codebook from its projected calibration data.
pub fn train_sensor(
    sensor_id: usize,
    bits: u32,
    slices: &[f64],
    dim: usize,
    beta_slice: &[f64],
) -> Result<SensorCodebook> {
    check_bits(bits)?;
    let projections: Vec<f64> = slices.chunks_exact(dim).map(|r| dot(r, beta_slice)).collect();
    let ones = vec![1.0; projections.len()];
    let clustering = kmeans1d_weighted(&projections, &ones, 1usize << bits)?;
    let cells = cluster_means(slices, dim, &clustering.assignment, clustering.k());
    build_codebook(sensor_id, bits, cells, beta_slice)
}

/// Distributed quantizer design for a linear model: every sensor clusters the
/// projection of its calibration slices onto its coefficient slice with exact
/// 1-D K-Means, and uses the mean slice of each cluster as a codeword.
/// Sensors are trained independently.
pub fn train_distributed(
    cal: &CalibrationSet,
    model: &LinearModel,
    partition: &FeaturePartition,
    cfg: &TrainConfig,
) -> Result<DistributedQuantizer> {
    check_inputs(cal, model, partition)?;
    cfg.validate(partition)?;
    let codebooks = (0..partition.num_sensors())
        .into_par_iter()
        .map(|i| {
            let slices = cal.sensor_slices(partition, i);
            let beta = model.slice_for(partition, i);
            train_sensor(i, cfg.bits_per_sensor[i], &slices, partition.sensor_dim(i), &beta)
        })
        .collect::<Result<Vec<_>>>()?;
    DistributedQuantizer::new(model.clone(), partition.clone(), codebooks)
}

/// Per-sensor seed for the baseline's Lloyd restarts.
fn sensor_seed(seed: u64, sensor: usize) -> u64 {
    seed ^ (sensor as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Model-agnostic baseline: K-Means on the raw sensor slices, ignoring the
/// model. Projected values are attached afterwards.
pub fn train_agnostic(
    cal: &CalibrationSet,
    partition: &FeaturePartition,
    model: &LinearModel,
    cfg: &TrainConfig,
) -> Result<DistributedQuantizer> {
    check_inputs(cal, model, partition)?;
    cfg.validate(partition)?;
    let codebooks = (0..partition.num_sensors())
        .into_par_iter()
        .map(|i| {
            let dim = partition.sensor_dim(i);
            let slices = cal.sensor_slices(partition, i);
            let bits = cfg.bits_per_sensor[i];
            let ones = vec![1.0; cal.rows()];
            let lloyd = weighted_lloyd(
                &slices,
                dim,
                &ones,
                1usize << bits,
                sensor_seed(cfg.baseline_seed, i),
                cfg.baseline_restarts,
            )?;
            if lloyd.clamped() {
                log::debug!(
                    "sensor {i}: {} clusters requested, data supports {}",
                    lloyd.requested_k,
                    lloyd.k()
                );
            }
            let cells = cluster_means(&slices, dim, &lloyd.assignment, lloyd.k());
            build_codebook(i, bits, cells, &model.slice_for(partition, i))
        })
        .collect::<Result<Vec<_>>>()?;
    DistributedQuantizer::new(model.clone(), partition.clone(), codebooks)
}
