//! Per-sensor codebooks and the fusion-center view of all of them.
//!
//! A sensor codebook keeps its codewords sorted by projected value
//! `h_k = <c_k, beta_i>`. Decision regions are never materialised: an
//! observation is mapped to the codeword whose projected value is nearest to
//! the observation's own projection, so in projected space the regions are
//! intervals bounded by the midpoints `(h_k + h_{k+1}) / 2`. An observation
//! exactly on a midpoint goes to the lower index; trainer, sensor and fusion
//! center all use this same rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, project, CalibrationSet, FeaturePartition, LinearModel};

/// Largest supported per-sensor bit budget.
pub const MAX_BITS: u32 = 30;

/// Relative tolerance for `projected[k] == <codewords[k], beta_i>`.
pub const PROJECTION_CONSISTENCY_TOL: f64 = 1e-9;

/// One sensor's quantizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCodebook", into = "RawCodebook")]
pub struct SensorCodebook {
    sensor_id: usize,
    bits: u32,
    codewords: Vec<Vec<f64>>,
    projected: Vec<f64>,
    weights: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCodebook {
    sensor_id: usize,
    bits: u32,
    codewords: Vec<Vec<f64>>,
    projected: Vec<f64>,
    weights: Vec<u64>,
}

impl TryFrom<RawCodebook> for SensorCodebook {
    type Error = Error;

    fn try_from(r: RawCodebook) -> Result<Self> {
        SensorCodebook::new(r.sensor_id, r.bits, r.codewords, r.projected, r.weights)
    }
}

impl From<SensorCodebook> for RawCodebook {
    fn from(c: SensorCodebook) -> Self {
        RawCodebook {
            sensor_id: c.sensor_id,
            bits: c.bits,
            codewords: c.codewords,
            projected: c.projected,
            weights: c.weights,
        }
    }
}

impl SensorCodebook {
    /// Builds a codebook, checking every structural invariant that does not
    /// need the model coefficients.
    pub fn new(
        sensor_id: usize,
        bits: u32,
        codewords: Vec<Vec<f64>>,
        projected: Vec<f64>,
        weights: Vec<u64>,
    ) -> Result<Self> {
        check_bits(bits)?;
        let k = codewords.len();
        if k == 0 {
            return Err(Error::invalid_codebook("codebook has no codewords"));
        }
        if k as u64 > 1u64 << bits {
            return Err(Error::invalid_codebook(format!(
                "{k} codewords do not fit in {bits} bits"
            )));
        }
        if projected.len() != k || weights.len() != k {
            return Err(Error::invalid_codebook(
                "codewords, projected values and weights differ in length",
            ));
        }
        let dim = codewords[0].len();
        if dim == 0 || codewords.iter().any(|c| c.len() != dim) {
            return Err(Error::invalid_codebook("codewords must share a positive dimension"));
        }
        if codewords.iter().flatten().chain(&projected).any(|v| !v.is_finite()) {
            return Err(Error::invalid_codebook("codebook values must be finite"));
        }
        if projected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid_codebook(
                "projected values must be strictly increasing",
            ));
        }
        if weights.contains(&0) {
            return Err(Error::invalid_codebook("codeword weights must be positive"));
        }
        Ok(SensorCodebook {
            sensor_id,
            bits,
            codewords,
            projected,
            weights,
        })
    }

    pub fn sensor_id(&self) -> usize {
        self.sensor_id
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of codewords actually in use (at most `2^bits`).
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.codewords[0].len()
    }

    pub fn codewords(&self) -> &[Vec<f64>] {
        &self.codewords
    }

    pub fn codeword(&self, k: usize) -> &[f64] {
        &self.codewords[k]
    }

    pub fn projected(&self) -> &[f64] {
        &self.projected
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.iter().sum()
    }

    pub(crate) fn with_sensor_id(mut self, sensor_id: usize) -> Self {
        self.sensor_id = sensor_id;
        self
    }

    /// Index of the codeword whose projected value is nearest to `p`, lower
    /// index on ties.
    pub fn nearest_projected(&self, p: f64) -> usize {
        let h = &self.projected;
        let hi = h.partition_point(|&v| v < p);
        if hi == 0 {
            0
        } else if hi == h.len() {
            h.len() - 1
        } else if p - h[hi - 1] <= h[hi] - p {
            hi - 1
        } else {
            hi
        }
    }

    /// Checks `projected[k] == <codewords[k], beta_slice>` to relative tolerance.
    pub fn check_consistency(&self, beta_slice: &[f64]) -> Result<()> {
        Error::check_dim("codebook dimension vs coefficient slice", beta_slice.len(), self.dim())?;
        for (k, (c, &h)) in self.codewords.iter().zip(&self.projected).enumerate() {
            let direct = dot(c, beta_slice);
            let scale = c
                .iter()
                .zip(beta_slice)
                .map(|(a, b)| (a * b).abs())
                .sum::<f64>()
                .max(h.abs())
                .max(1.0);
            if (direct - h).abs() > PROJECTION_CONSISTENCY_TOL * scale {
                return Err(Error::invalid_codebook(format!(
                    "sensor {} codeword {k}: stored projection {h} but <c, beta> = {direct}",
                    self.sensor_id
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        Err(Error::invalid_argument(format!(
            "bit budget {bits} outside supported range 1..={MAX_BITS}"
        )))
    } else {
        Ok(())
    }
}

/// Maps a sensor observation to its codeword.
pub fn quantize<'a>(
    codebook: &'a SensorCodebook,
    beta_slice: &[f64],
    x_slice: &[f64],
) -> Result<(usize, &'a [f64])> {
    if codebook.is_empty() {
        return Err(Error::invalid_codebook("codebook has no codewords"));
    }
    Error::check_dim("observation vs codeword dimension", codebook.dim(), x_slice.len())?;
    let p = project(x_slice, beta_slice)?;
    let k = codebook.nearest_projected(p);
    Ok((k, codebook.codeword(k)))
}

/// All sensor codebooks bound to one model and feature partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuantizer", into = "RawQuantizer")]
pub struct DistributedQuantizer {
    model: LinearModel,
    partition: FeaturePartition,
    codebooks: Vec<SensorCodebook>,
    beta_slices: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuantizer {
    model: LinearModel,
    partition: FeaturePartition,
    codebooks: Vec<SensorCodebook>,
}

impl TryFrom<RawQuantizer> for DistributedQuantizer {
    type Error = Error;

    fn try_from(r: RawQuantizer) -> Result<Self> {
        DistributedQuantizer::new(r.model, r.partition, r.codebooks)
    }
}

impl From<DistributedQuantizer> for RawQuantizer {
    fn from(q: DistributedQuantizer) -> Self {
        RawQuantizer {
            model: q.model,
            partition: q.partition,
            codebooks: q.codebooks,
        }
    }
}

impl DistributedQuantizer {
    pub fn new(
        model: LinearModel,
        partition: FeaturePartition,
        codebooks: Vec<SensorCodebook>,
    ) -> Result<Self> {
        model.check_partition(&partition)?;
        Error::check_dim("codebooks per sensor", partition.num_sensors(), codebooks.len())?;
        let beta_slices: Vec<Vec<f64>> = (0..partition.num_sensors())
            .map(|i| model.slice_for(&partition, i))
            .collect();
        for (i, cb) in codebooks.iter().enumerate() {
            if cb.sensor_id() != i {
                return Err(Error::invalid_codebook(format!(
                    "codebook at position {i} is labelled sensor {}",
                    cb.sensor_id()
                )));
            }
            Error::check_dim("codeword dimension vs sensor feature count", partition.sensor_dim(i), cb.dim())?;
            cb.check_consistency(&beta_slices[i])?;
        }
        Ok(DistributedQuantizer {
            model,
            partition,
            codebooks,
            beta_slices,
        })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn partition(&self) -> &FeaturePartition {
        &self.partition
    }

    pub fn codebooks(&self) -> &[SensorCodebook] {
        &self.codebooks
    }

    pub fn codebook(&self, i: usize) -> &SensorCodebook {
        &self.codebooks[i]
    }

    pub fn num_sensors(&self) -> usize {
        self.codebooks.len()
    }

    pub fn beta_slice(&self, i: usize) -> &[f64] {
        &self.beta_slices[i]
    }

    /// Per-sensor bit budgets the codebooks were designed for.
    pub fn bits(&self) -> Vec<u32> {
        self.codebooks.iter().map(SensorCodebook::bits).collect()
    }

    /// Replaces the codebooks, keeping model and partition.
    pub fn with_codebooks(&self, codebooks: Vec<SensorCodebook>) -> Result<Self> {
        DistributedQuantizer::new(self.model.clone(), self.partition.clone(), codebooks)
    }

    /// Projection of sensor `i`'s slice of the full vector `x`.
    pub(crate) fn sensor_projection(&self, x: &[f64], i: usize) -> f64 {
        self.partition
            .sensor_set(i)
            .iter()
            .zip(&self.beta_slices[i])
            .map(|(&r, b)| x[r] * b)
            .sum()
    }

    /// Index chosen by sensor `i` for the full input vector `x`.
    pub fn sensor_index(&self, x: &[f64], i: usize) -> usize {
        self.codebooks[i].nearest_projected(self.sensor_projection(x, i))
    }

    /// Fusion-center response for the quantized version of `x`, along with the
    /// index each sensor chose.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, Vec<usize>)> {
        Error::check_dim("input vector", self.model.dim(), x.len())?;
        let indices: Vec<usize> = (0..self.num_sensors()).map(|i| self.sensor_index(x, i)).collect();
        Ok((self.fuse(&indices), indices))
    }

    /// Response reconstructed from per-sensor indices alone.
    pub fn fuse(&self, indices: &[usize]) -> f64 {
        self.codebooks
            .iter()
            .zip(indices)
            .map(|(cb, &k)| cb.projected()[k])
            .sum()
    }

    /// The quantized observation `x~` of sensor `i`.
    pub fn reconstruct_slice(&self, x: &[f64], i: usize) -> &[f64] {
        self.codebooks[i].codeword(self.sensor_index(x, i))
    }

    /// Per-sensor projected distortion `sum_j (h_{q(x_j)} - yhat_j)^2` on `data`.
    pub fn projected_distortion(&self, data: &CalibrationSet) -> Result<Vec<f64>> {
        data.check_cols("dataset columns vs model dim", self.model.dim())?;
        Ok((0..self.num_sensors())
            .map(|i| {
                let cb = &self.codebooks[i];
                data.projections(&self.partition, i, &self.beta_slices[i])
                    .into_iter()
                    .map(|p| {
                        let e = cb.projected()[cb.nearest_projected(p)] - p;
                        e * e
                    })
                    .sum()
            })
            .collect())
    }

    /// Same quantizer with its sensors reordered; sensor `k` of the result is
    /// sensor `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let partition = self.partition.permuted(order)?;
        let codebooks = order
            .iter()
            .enumerate()
            .map(|(k, &i)| self.codebooks[i].clone().with_sensor_id(k))
            .collect();
        DistributedQuantizer::new(self.model.clone(), partition, codebooks)
    }
}
