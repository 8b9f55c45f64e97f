use std::io::Write;

use serde::Serialize;

use crate::adaptive::{adapt_noting, clamp_bits, reduce_codebook, ClampNote, RateSchedule};
use crate::codebook::{DistributedQuantizer, SensorCodebook};
use crate::error::{Error, Result};
use crate::model::Dataset;

use super::codec::MessageFrame;

/// A sensor endpoint: its slice of the model, its stored full-rate codebook,
/// and the codebook in use at the current budget.
struct SensorNode {
    id: usize,
    features: Vec<usize>,
    beta: Vec<f64>,
    full: SensorCodebook,
    active: SensorCodebook,
    bits: u32,
}

impl SensorNode {
    fn set_budget(&mut self, bits: u32) -> Result<()> {
        self.active = reduce_codebook(&self.full, bits, &self.beta)?;
        self.bits = bits;
        Ok(())
    }

    fn transmit(&self, x: &[f64], step: u32) -> Result<Vec<u8>> {
        let p: f64 = self.features.iter().zip(&self.beta).map(|(&r, b)| x[r] * b).sum();
        let index = self.active.nearest_projected(p);
        MessageFrame {
            sensor_id: self.id as u16,
            time_step: step,
            bits: self.bits as u8,
            index: index as u32,
        }
        .encode()
    }
}

/// The fusion center: full-rate quantizer plus the one derived for the
/// current budgets.
struct FusionCenter {
    full: DistributedQuantizer,
    active: DistributedQuantizer,
    bits: Vec<u32>,
}

impl FusionCenter {
    fn set_budgets(&mut self, bits: &[u32]) -> Result<Vec<ClampNote>> {
        let (active, notes) = adapt_noting(&self.full, bits)?;
        self.active = active;
        self.bits = clamp_bits(&self.full, bits)?.0;
        Ok(notes)
    }

    fn receive(&self, frames: &[Vec<u8>], step: u32) -> Result<(f64, Vec<usize>)> {
        let mut indices = Vec::with_capacity(frames.len());
        for (i, bytes) in frames.iter().enumerate() {
            let f = MessageFrame::decode(bytes)?;
            if usize::from(f.sensor_id) != i || f.time_step != step || u32::from(f.bits) != self.bits[i] {
                return Err(Error::MalformedFrame(format!(
                    "unexpected frame header {:?} for sensor {i} at step {step}",
                    f
                )));
            }
            let k = f.index as usize;
            if k >= self.active.codebook(i).len() {
                return Err(Error::MalformedFrame(format!(
                    "sensor {i} sent index {k} but its codebook has {} entries",
                    self.active.codebook(i).len()
                )));
            }
            indices.push(k);
        }
        Ok((self.active.fuse(&indices), indices))
    }
}

/// A budget change as applied by both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedEvent {
    pub step: u64,
    pub requested: Vec<u32>,
    pub applied: Vec<u32>,
    pub clamped: Vec<ClampNote>,
    /// Codebook size per sensor after the change.
    pub codebook_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub y_hat: f64,
    pub y_tilde: f64,
    pub sq_err: f64,
    pub indices: Vec<usize>,
    pub bits: Vec<u32>,
    /// Payload bits sent by all sensors this step.
    pub step_bits: u64,
    pub cumulative_bits: u64,
}

/// Everything that happened during a simulated session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionTranscript {
    pub steps: Vec<StepRecord>,
    pub events: Vec<AppliedEvent>,
}

impl SessionTranscript {
    pub fn mse(&self) -> f64 {
        self.steps.iter().map(|s| s.sq_err).sum::<f64>() / self.steps.len() as f64
    }

    pub fn total_bits(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.cumulative_bits)
    }

    pub fn warnings(&self) -> impl Iterator<Item = (u64, &ClampNote)> {
        self.events.iter().flat_map(|e| e.clamped.iter().map(move |c| (e.step, c)))
    }

    /// CSV with header `step,sensor_bits_total,y_hat,y_tilde,sq_err`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv {
            path: "transcript".into(),
            message: e.to_string(),
        };
        w.write_record(["step", "sensor_bits_total", "y_hat", "y_tilde", "sq_err"])
            .map_err(csv_err)?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.step_bits.to_string(),
                s.y_hat.to_string(),
                s.y_tilde.to_string(),
                s.sq_err.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "transcript".into(),
            source: e,
        })
    }
}

/// Streams every row of `stream` through sensors and fusion center, applying
/// budget changes from `schedule` at their exact steps. Both endpoints derive
/// reduced codebooks on their own from the stored full-rate codebooks; no
/// codebook data crosses the simulated channel, and the two copies are
/// checked for bit-identity after every change. The channel is lossless and
/// has no delay.
pub fn run_session(q_full: &DistributedQuantizer, schedule: &RateSchedule, stream: &Dataset) -> Result<SessionTranscript> {
    let m = q_full.num_sensors();
    Error::check_dim("schedule sensors", m, schedule.num_sensors())?;
    stream.check_cols("stream columns vs model dim", q_full.model().dim())?;
    if stream.rows() > u32::MAX as usize {
        return Err(Error::invalid_input("stream too long for 32-bit time steps"));
    }
    if m > usize::from(u16::MAX) + 1 {
        return Err(Error::invalid_input("too many sensors for 16-bit sensor ids"));
    }

    let mut sensors: Vec<SensorNode> = q_full
        .codebooks()
        .iter()
        .enumerate()
        .map(|(i, cb)| SensorNode {
            id: i,
            features: q_full.partition().sensor_set(i).to_vec(),
            beta: q_full.beta_slice(i).to_vec(),
            full: cb.clone(),
            active: cb.clone(),
            bits: cb.bits(),
        })
        .collect();
    let mut center = FusionCenter {
        full: q_full.clone(),
        active: q_full.clone(),
        bits: q_full.bits(),
    };

    let beta = q_full.model().beta();
    let mut steps = Vec::with_capacity(stream.rows());
    let mut events = Vec::new();
    let mut cumulative = 0u64;

    for (j, x) in stream.iter_rows().enumerate() {
        let step = j as u64;
        if let Some(ev) = schedule.event_at(step) {
            let clamped = center.set_budgets(&ev.bits)?;
            for (node, &b) in sensors.iter_mut().zip(&center.bits) {
                node.set_budget(b)?;
            }
            check_synchronized(&sensors, &center)?;
            events.push(AppliedEvent {
                step,
                requested: ev.bits.clone(),
                applied: center.bits.clone(),
                clamped,
                codebook_sizes: center.active.codebooks().iter().map(SensorCodebook::len).collect(),
            });
        }

        let frames = sensors
            .iter()
            .map(|s| s.transmit(x, j as u32))
            .collect::<Result<Vec<_>>>()?;
        let (y_tilde, indices) = center.receive(&frames, j as u32)?;
        let y_hat: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
        let step_bits: u64 = center.bits.iter().map(|&b| u64::from(b)).sum();
        cumulative += step_bits;
        steps.push(StepRecord {
            step,
            y_hat,
            y_tilde,
            sq_err: (y_tilde - y_hat).powi(2),
            indices,
            bits: center.bits.clone(),
            step_bits,
            cumulative_bits: cumulative,
        });
    }
    Ok(SessionTranscript { steps, events })
}

fn check_synchronized(sensors: &[SensorNode], center: &FusionCenter) -> Result<()> {
    for s in sensors {
        let here = serde_json::to_vec(&s.active).expect("codebook serializes");
        let there = serde_json::to_vec(center.active.codebook(s.id)).expect("codebook serializes");
        if here != there {
            return Err(Error::invalid_codebook(format!(
                "sensor {} and fusion center disagree on the reduced codebook",
                s.id
            )));
        }
    }
    Ok(())
}
