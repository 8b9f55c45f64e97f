use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clustering::DEFAULT_RESTARTS;
use crate::codebook::check_bits;
use crate::error::{Error, Result};
use crate::model::{CalibrationSet, Dataset, FeaturePartition, LinearModel};

/// Ridge added to the random covariance so it is well conditioned.
pub const COVARIANCE_RIDGE: f64 = 0.1;

/// Parameters of a synthetic Gaussian instance and the bit budgets to sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_cal: usize,
    pub n_test: usize,
    pub d: usize,
    pub m: usize,
    pub features_per_sensor: usize,
    pub bit_range: Vec<u32>,
    #[serde(default = "default_restarts")]
    pub baseline_restarts: usize,
}

fn default_restarts() -> usize {
    DEFAULT_RESTARTS
}

impl SyntheticSpec {
    /// 10,000 calibration points in 100 dimensions observed by 10 sensors of
    /// 10 features each, 100,000 test points, budgets 1 through 10 bits.
    pub fn reference(seed: u64) -> Self {
        SyntheticSpec {
            seed,
            n_cal: 10_000,
            n_test: 100_000,
            d: 100,
            m: 10,
            features_per_sensor: 10,
            bit_range: (1..=10).collect(),
            baseline_restarts: DEFAULT_RESTARTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.features_per_sensor == 0 {
            return Err(Error::invalid_argument("m and features_per_sensor must be positive"));
        }
        if self.m.checked_mul(self.features_per_sensor) != Some(self.d) {
            return Err(Error::invalid_argument(format!(
                "m x features_per_sensor must equal d ({} x {} != {})",
                self.m, self.features_per_sensor, self.d
            )));
        }
        if self.n_cal == 0 || self.n_test == 0 {
            return Err(Error::invalid_argument("n_cal and n_test must be at least 1"));
        }
        if self.bit_range.is_empty() {
            return Err(Error::invalid_argument("bit_range must list at least one budget"));
        }
        self.bit_range.iter().try_for_each(|&b| check_bits(b))?;
        if self.baseline_restarts == 0 {
            return Err(Error::invalid_argument("baseline_restarts must be at least 1"));
        }
        Ok(())
    }
}

/// A generated instance: data, model, sensor layout, and the Gaussian that
/// produced the data.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub calibration: CalibrationSet,
    pub test: Dataset,
    pub model: LinearModel,
    pub partition: FeaturePartition,
    pub mean: Vec<f64>,
    /// Row-major `d x d`.
    pub covariance: Vec<f64>,
}

// Independent streams of the seeded generator.
const STREAM_MEAN: u64 = 0;
const STREAM_FACTOR: u64 = 1;
const STREAM_BETA: u64 = 2;
const STREAM_CAL: u64 = 3;
const STREAM_TEST: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normals(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Draws a fixed random Gaussian `N(mu, A A^T / d + 0.1 I)` with standard
/// normal `mu` and `A`, a standard normal coefficient vector, and calibration
/// and test samples from it. Sensors get consecutive blocks of features.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let d = spec.d;
    let mean = normals(&mut stream(spec.seed, STREAM_MEAN), d);
    let a = DMatrix::from_row_slice(d, d, &normals(&mut stream(spec.seed, STREAM_FACTOR), d * d));
    let cov = (&a * a.transpose()) / d as f64 + DMatrix::identity(d, d) * COVARIANCE_RIDGE;
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid_input("generated covariance is not positive definite"))?;
    let l = chol.l();
    // Packed lower triangle, row by row.
    let lower: Vec<f64> = (0..d).flat_map(|r| (0..=r).map(move |c| (r, c))).map(|(r, c)| l[(r, c)]).collect();

    let sample = |n: usize, id: u64| -> Result<Dataset> {
        let mut rng = stream(spec.seed, id);
        let mut data = Vec::with_capacity(n * d);
        let mut z = vec![0.0; d];
        for _ in 0..n {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let mut off = 0;
            for r in 0..d {
                let row = &lower[off..off + r + 1];
                data.push(mean[r] + row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>());
                off += r + 1;
            }
        }
        Dataset::new(d, data)
    };

    let model = LinearModel::new(normals(&mut stream(spec.seed, STREAM_BETA), d))?;
    let calibration = sample(spec.n_cal, STREAM_CAL)?;
    let test = sample(spec.n_test, STREAM_TEST)?;
    let partition = FeaturePartition::contiguous(spec.m, spec.features_per_sensor)?;
    let covariance = (0..d).flat_map(|r| (0..d).map(move |c| (r, c))).map(|(r, c)| cov[(r, c)]).collect();

    Ok(SyntheticData {
        calibration,
        test,
        model,
        partition,
        mean,
        covariance,
    })
}
