//! Synthetic Gaussian instances and the strategy comparison sweep.

mod figure2;
mod synthetic;

pub use figure2::{run_figure2, Figure2Row, Figure2Table};
pub use synthetic::{gen_synthetic, SyntheticData, SyntheticSpec, COVARIANCE_RIDGE};
