use distq::adaptive::{adapt, RateEvent, RateSchedule};
use distq::experiments::{gen_synthetic, SyntheticSpec};
use distq::scheme::{train_distributed, TrainConfig};
use distq::simnet::{decode_index, encode_index, run_session, MessageFrame};
use distq::{evaluate_mse, Dataset, DistributedQuantizer};
use proptest::prelude::*;

fn instance(max_bits: u32, n_test: usize) -> (DistributedQuantizer, Dataset) {
    let spec = SyntheticSpec {
        seed: 11,
        n_cal: 3000,
        n_test,
        d: 12,
        m: 4,
        features_per_sensor: 3,
        bit_range: vec![max_bits],
        baseline_restarts: 1,
    };
    let data = gen_synthetic(&spec).unwrap();
    let q = train_distributed(&data.calibration, &data.model, &data.partition, &TrainConfig::uniform(4, max_bits)).unwrap();
    (q, data.test)
}

fn schedule(events: &[(u64, u32)]) -> RateSchedule {
    RateSchedule::new(events.iter().map(|&(t, b)| RateEvent { t, bits: vec![b; 4] }).collect()).unwrap()
}

fn rows(data: &Dataset, range: std::ops::Range<usize>) -> Dataset {
    Dataset::new(data.cols(), data.as_slice()[range.start * data.cols()..range.end * data.cols()].to_vec()).unwrap()
}

#[test]
fn codec_round_trip_is_exhaustive_to_ten_bits() {
    for bits in 1..=10u32 {
        for index in 0..(1u32 << bits) {
            let bytes = encode_index(index, bits).unwrap();
            assert_eq!(bytes.len(), bits.div_ceil(8) as usize);
            assert_eq!(decode_index(&bytes, bits).unwrap(), index);
        }
    }
}

proptest! {
    #[test]
    fn codec_round_trip_to_sixteen_bits(bits in 1..=16u32, raw in any::<u32>()) {
        let index = raw & ((1 << bits) - 1);
        prop_assert_eq!(decode_index(&encode_index(index, bits).unwrap(), bits).unwrap(), index);
    }

    #[test]
    fn frame_round_trip(sensor_id in any::<u16>(), time_step in any::<u32>(), bits in 1..=30u8, raw in any::<u32>()) {
        let f = MessageFrame { sensor_id, time_step, bits, index: raw & ((1u32 << bits) - 1) };
        let bytes = f.encode().unwrap();
        prop_assert_eq!(MessageFrame::decode(&bytes).unwrap(), f);
    }
}

#[test]
fn constant_full_rate_session_matches_offline_mse() {
    let (q, test) = instance(6, 500);
    let t = run_session(&q, &RateSchedule::constant(q.bits()).unwrap(), &test).unwrap();
    let offline = evaluate_mse(&q, &test).unwrap().mse;
    assert!((t.mse() - offline).abs() <= 1e-12 * offline);
    assert_eq!(t.events.len(), 1);
    assert!(t.events[0].clamped.is_empty());
}

#[test]
fn dropping_to_one_bit_drops_the_bit_count() {
    let (q, test) = instance(6, 200);
    let t = run_session(&q, &schedule(&[(0, 6), (120, 1)]), &test).unwrap();
    for s in &t.steps {
        let expect = if s.step < 120 { 24 } else { 4 };
        assert_eq!(s.step_bits, expect, "step {}", s.step);
    }
    assert_eq!(t.total_bits(), 120 * 24 + 80 * 4);
    let mut running = 0;
    for s in &t.steps {
        running += s.step_bits;
        assert_eq!(s.cumulative_bits, running);
        assert_eq!(s.bits.iter().map(|&b| u64::from(b)).sum::<u64>(), s.step_bits);
    }
}

#[test]
fn rate_round_trip_restores_full_codebooks() {
    let (q, test) = instance(10, 90);
    let t = run_session(&q, &schedule(&[(0, 10), (30, 5), (60, 10)]), &test).unwrap();
    assert_eq!(t.events.len(), 3);
    // Steps served at full rate before and after the dip pick identical indices.
    let again = run_session(&q, &RateSchedule::constant(q.bits()).unwrap(), &test).unwrap();
    for j in (0..30).chain(60..90) {
        assert_eq!(t.steps[j].indices, again.steps[j].indices);
        assert_eq!(t.steps[j].y_tilde.to_bits(), again.steps[j].y_tilde.to_bits());
    }
    let restored = adapt(&adapt(&q, &[5; 4]).unwrap(), &[10; 4]).unwrap();
    let via_full = adapt(&q, &[10; 4]).unwrap();
    assert_eq!(serde_json::to_vec(&via_full).unwrap(), serde_json::to_vec(&q).unwrap());
    // Raising the rate of an already reduced quantizer cannot add codewords back;
    // only the stored full-rate codebooks can.
    assert!(restored.codebooks().iter().all(|c| c.len() <= 32));
    assert_eq!(t.events[2].codebook_sizes, q.codebooks().iter().map(|c| c.len()).collect::<Vec<_>>());
}

#[test]
fn transcript_is_consistent_with_offline_evaluation() {
    let (q, test) = instance(8, 300);
    let plan = [(0u64, 8u32), (50, 3), (140, 1), (200, 6)];
    let t = run_session(&q, &schedule(&plan), &test).unwrap();
    let beta = q.model().beta();
    let mut weighted = 0.0;
    for (e, &(start, bits)) in plan.iter().enumerate() {
        let end = plan.get(e + 1).map_or(test.rows() as u64, |p| p.0);
        let active = adapt(&q, &[bits; 4]).unwrap();
        for s in &t.steps[start as usize..end as usize] {
            let x = test.row(s.step as usize);
            let y_hat: f64 = x.iter().zip(beta).map(|(a, b)| a * b).sum();
            assert_eq!(s.y_hat.to_bits(), y_hat.to_bits());
            assert_eq!(s.y_tilde.to_bits(), active.fuse(&s.indices).to_bits());
            assert_eq!(s.sq_err.to_bits(), (active.fuse(&s.indices) - y_hat).powi(2).to_bits());
            assert_eq!(s.indices, active.predict(x).unwrap().1);
        }
        let seg = evaluate_mse(&active, &rows(&test, start as usize..end as usize)).unwrap();
        weighted += seg.mse * (end - start) as f64;
    }
    let offline = weighted / test.rows() as f64;
    assert!((t.mse() - offline).abs() <= 1e-12 * offline);
}

#[test]
fn per_sensor_budgets_and_clamping() {
    let (q, test) = instance(4, 20);
    let sched = RateSchedule::new(vec![
        RateEvent { t: 0, bits: vec![4, 3, 2, 1] },
        RateEvent { t: 10, bits: vec![9, 4, 4, 4] },
    ])
    .unwrap();
    let t = run_session(&q, &sched, &test).unwrap();
    assert_eq!(t.steps[0].bits, vec![4, 3, 2, 1]);
    assert_eq!(t.steps[0].step_bits, 10);
    assert_eq!(t.steps[10].bits, vec![4, 4, 4, 4]);
    let warnings: Vec<_> = t.warnings().collect();
    assert_eq!(warnings.len(), 1);
    assert_eq!((warnings[0].0, warnings[0].1.sensor, warnings[0].1.requested, warnings[0].1.applied), (10, 0, 9, 4));
}

#[test]
fn transcript_csv_layout() {
    let (q, test) = instance(3, 5);
    let t = run_session(&q, &RateSchedule::constant(q.bits()).unwrap(), &test).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,sensor_bits_total,y_hat,y_tilde,sq_err");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0,12,"));
}

#[test]
fn session_rejects_mismatched_inputs() {
    let (q, test) = instance(3, 5);
    let three = RateSchedule::new(vec![RateEvent { t: 0, bits: vec![2; 3] }]).unwrap();
    assert!(run_session(&q, &three, &test).is_err());
    let narrow = Dataset::new(3, vec![0.0; 6]).unwrap();
    assert!(run_session(&q, &RateSchedule::constant(q.bits()).unwrap(), &narrow).is_err());
}
