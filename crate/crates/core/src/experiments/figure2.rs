use std::io::Write;

use serde::Serialize;

use crate::adaptive::adapt;
use crate::error::{Error, Result};
use crate::eval::evaluate_mse;
use crate::scheme::{train_agnostic, train_distributed, TrainConfig};

use super::synthetic::{gen_synthetic, SyntheticSpec};

/// MSE of the three strategies at one per-sensor budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure2Row {
    pub bits: u32,
    pub mse_nonadaptive: f64,
    pub mse_adaptive: f64,
    pub mse_agnostic: f64,
    pub stderr_nonadaptive: f64,
    pub stderr_adaptive: f64,
    pub stderr_agnostic: f64,
    /// Projected distortion of the non-adaptive quantizer on its own
    /// calibration data, summed over sensors.
    pub cal_distortion_nonadaptive: f64,
    /// The same for the model-agnostic baseline.
    pub cal_distortion_agnostic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure2Table {
    pub rows: Vec<Figure2Row>,
}

impl Figure2Table {
    /// CSV with header
    /// `bits,mse_nonadaptive,mse_adaptive,mse_agnostic,stderr_nonadaptive,stderr_adaptive,stderr_agnostic`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv {
            path: "results".into(),
            message: e.to_string(),
        };
        w.write_record([
            "bits",
            "mse_nonadaptive",
            "mse_adaptive",
            "mse_agnostic",
            "stderr_nonadaptive",
            "stderr_adaptive",
            "stderr_agnostic",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.bits.to_string(),
                r.mse_nonadaptive.to_string(),
                r.mse_adaptive.to_string(),
                r.mse_agnostic.to_string(),
                r.stderr_nonadaptive.to_string(),
                r.stderr_adaptive.to_string(),
                r.stderr_agnostic.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "results".into(),
            source: e,
        })
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }
}

/// For every budget in `spec.bit_range`: trains the non-adaptive quantizer at that
/// budget, adapts the quantizer trained at the largest budget down to it,
/// trains the model-agnostic baseline, and evaluates all three on the test
/// set. Rows come out in ascending budget order.
pub fn run_figure2(spec: &SyntheticSpec) -> Result<Figure2Table> {
    let data = gen_synthetic(spec)?;
    let m = spec.m;
    let mut budgets = spec.bit_range.clone();
    budgets.sort_unstable();
    budgets.dedup();
    let max_bits = *budgets.last().expect("validated non-empty");

    log::info!("training full-rate quantizer at {max_bits} bits");
    let full = train_distributed(&data.calibration, &data.model, &data.partition, &TrainConfig::uniform(m, max_bits))?;

    let mut rows = Vec::with_capacity(budgets.len());
    for &b in &budgets {
        let cfg = TrainConfig::uniform(m, b).with_baseline(spec.seed, spec.baseline_restarts);
        let nonadaptive = if b == max_bits {
            full.clone()
        } else {
            train_distributed(&data.calibration, &data.model, &data.partition, &cfg)?
        };
        let adaptive = adapt(&full, &vec![b; m])?;
        let agnostic = train_agnostic(&data.calibration, &data.partition, &data.model, &cfg)?;

        let na = evaluate_mse(&nonadaptive, &data.test)?;
        let ad = evaluate_mse(&adaptive, &data.test)?;
        let ag = evaluate_mse(&agnostic, &data.test)?;
        log::info!(
            "{b} bits: non-adaptive {:.4e}, adaptive {:.4e}, agnostic {:.4e}",
            na.mse,
            ad.mse,
            ag.mse
        );
        rows.push(Figure2Row {
            bits: b,
            mse_nonadaptive: na.mse,
            mse_adaptive: ad.mse,
            mse_agnostic: ag.mse,
            stderr_nonadaptive: na.stderr,
            stderr_adaptive: ad.stderr,
            stderr_agnostic: ag.stderr,
            cal_distortion_nonadaptive: nonadaptive.projected_distortion(&data.calibration)?.iter().sum(),
            cal_distortion_agnostic: agnostic.projected_distortion(&data.calibration)?.iter().sum(),
        });
    }
    Ok(Figure2Table { rows })
}
