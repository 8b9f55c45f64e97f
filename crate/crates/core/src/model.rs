//! Problem data: the pretrained linear model, the split of its features across
//! sensors, and row-major sample matrices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which feature indices each sensor observes.
///
/// Sensor sets are non-empty, pairwise disjoint, and index into `0..total_dim`.
/// Features not covered by any sensor are allowed; they never reach the
/// fusion center and so contribute nothing to either prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct FeaturePartition {
    total_dim: usize,
    sensor_sets: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPartition {
    total_dim: usize,
    sensors: Vec<Vec<usize>>,
}

impl TryFrom<RawPartition> for FeaturePartition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        FeaturePartition::new(raw.total_dim, raw.sensors)
    }
}

impl From<FeaturePartition> for RawPartition {
    fn from(p: FeaturePartition) -> Self {
        RawPartition {
            total_dim: p.total_dim,
            sensors: p.sensor_sets,
        }
    }
}

impl FeaturePartition {
    pub fn new(total_dim: usize, sensor_sets: Vec<Vec<usize>>) -> Result<Self> {
        if total_dim == 0 {
            return Err(Error::invalid_input("partition total_dim must be positive"));
        }
        if sensor_sets.is_empty() {
            return Err(Error::invalid_input("partition must contain at least one sensor"));
        }
        let mut seen = BTreeSet::new();
        for (i, set) in sensor_sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::invalid_input(format!("sensor {i} observes no features")));
            }
            for &r in set {
                if r >= total_dim {
                    return Err(Error::invalid_input(format!(
                        "sensor {i} feature index {r} out of range 0..{total_dim}"
                    )));
                }
                if !seen.insert(r) {
                    return Err(Error::invalid_input(format!(
                        "feature index {r} is observed by more than one sensor"
                    )));
                }
            }
        }
        Ok(FeaturePartition {
            total_dim,
            sensor_sets,
        })
    }

    /// Consecutive blocks of `per_sensor` features for `m` sensors.
    pub fn contiguous(m: usize, per_sensor: usize) -> Result<Self> {
        let sets = (0..m)
            .map(|i| (i * per_sensor..(i + 1) * per_sensor).collect())
            .collect();
        FeaturePartition::new(m * per_sensor, sets)
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn num_sensors(&self) -> usize {
        self.sensor_sets.len()
    }

    pub fn sensor_set(&self, i: usize) -> &[usize] {
        &self.sensor_sets[i]
    }

    pub fn sensor_sets(&self) -> &[Vec<usize>] {
        &self.sensor_sets
    }

    pub fn sensor_dim(&self, i: usize) -> usize {
        self.sensor_sets[i].len()
    }

    /// Gathers the features observed by sensor `i` from a full-length vector.
    pub fn slice(&self, x: &[f64], i: usize) -> Vec<f64> {
        self.sensor_sets[i].iter().map(|&r| x[r]).collect()
    }

    /// Reorders sensors: sensor `k` of the result is sensor `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.num_sensors() {
            return Err(Error::invalid_argument("permutation length differs from sensor count"));
        }
        let sets = order
            .iter()
            .map(|&i| {
                self.sensor_sets
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::invalid_argument("permutation index out of range"))
            })
            .collect::<Result<Vec<_>>>()?;
        FeaturePartition::new(self.total_dim, sets)
    }
}

/// The pretrained coefficient vector held by the fusion center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct LinearModel {
    beta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    dim: usize,
    beta: Vec<f64>,
}

impl TryFrom<RawModel> for LinearModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        Error::check_dim("model beta", raw.dim, raw.beta.len())?;
        LinearModel::new(raw.beta)
    }
}

impl From<LinearModel> for RawModel {
    fn from(m: LinearModel) -> Self {
        RawModel {
            dim: m.beta.len(),
            beta: m.beta,
        }
    }
}

impl LinearModel {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::invalid_input("model dimension must be positive"));
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid_input("model coefficients must be finite"));
        }
        Ok(LinearModel { beta })
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Unquantized response `<x, beta>`.
    pub fn respond(&self, x: &[f64]) -> Result<f64> {
        project(x, &self.beta)
    }

    /// The coefficients seen by sensor `i` of `partition`.
    pub fn slice_for(&self, partition: &FeaturePartition, i: usize) -> Vec<f64> {
        partition.slice(&self.beta, i)
    }

    pub(crate) fn check_partition(&self, partition: &FeaturePartition) -> Result<()> {
        Error::check_dim("partition total_dim vs model dim", self.dim(), partition.total_dim())
    }
}

/// Inner product of a sensor observation with its coefficient slice; the
/// sensor's additive contribution to the model response.
pub fn project(x_slice: &[f64], beta_slice: &[f64]) -> Result<f64> {
    Error::check_dim("projection", beta_slice.len(), x_slice.len())?;
    Ok(dot(x_slice, beta_slice))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense row-major sample matrix. Used for calibration data as well as test
/// and session streams.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    cols: usize,
    data: Vec<f64>,
}

pub type CalibrationSet = Dataset;

impl Dataset {
    pub fn new(cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::invalid_input("dataset must have at least one column"));
        }
        if data.is_empty() {
            return Err(Error::invalid_input("dataset must have at least one row"));
        }
        if !data.len().is_multiple_of(cols) {
            return Err(Error::invalid_input(format!(
                "{} values do not form rows of width {cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("dataset entries must be finite"));
        }
        Ok(Dataset { cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (j, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid_input(format!(
                    "row {j} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Dataset::new(cols, data)
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.cols..(j + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The sub-matrix of columns observed by sensor `i`, row-major.
    pub fn sensor_slices(&self, partition: &FeaturePartition, i: usize) -> Vec<f64> {
        let set = partition.sensor_set(i);
        let mut out = Vec::with_capacity(self.rows() * set.len());
        for row in self.iter_rows() {
            out.extend(set.iter().map(|&r| row[r]));
        }
        out
    }

    /// Projections of every row's sensor-`i` slice onto `beta_slice`.
    pub fn projections(&self, partition: &FeaturePartition, i: usize, beta_slice: &[f64]) -> Vec<f64> {
        let set = partition.sensor_set(i);
        self.iter_rows()
            .map(|row| set.iter().zip(beta_slice).map(|(&r, b)| row[r] * b).sum())
            .collect()
    }

    pub(crate) fn check_cols(&self, context: &'static str, d: usize) -> Result<()> {
        Error::check_dim(context, d, self.cols)
    }
}
