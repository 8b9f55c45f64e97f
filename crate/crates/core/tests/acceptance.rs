//! Release checks. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use distq::adaptive::{adapt, reduce_codebook, RateEvent, RateSchedule};
use distq::clustering::kmeans1d_weighted;
use distq::experiments::{gen_synthetic, run_figure2, SyntheticSpec};
use distq::scheme::{train_agnostic, train_distributed, TrainConfig};
use distq::simnet::{decode_index, encode_index, run_session};
use distq::{evaluate_mse, CalibrationSet, FeaturePartition, LinearModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIG2_SEEDS: [u64; 3] = [1, 2, 3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, took: Duration) -> bool {
    took < limit
}

fn figure2_shape() -> Vec<(String, Outcome)> {
    let start = Instant::now();
    let mut ratio_ok = Vec::new();
    let mut adaptive_ok = Vec::new();
    let mut monotone_ok = Vec::new();
    let mut notes = Vec::new();
    for seed in FIG2_SEEDS {
        let t = Instant::now();
        let table = match run_figure2(&SyntheticSpec::reference(seed)) {
            Ok(t) => t,
            Err(e) => {
                let fail = || outcome(false, format!("seed {seed}: {e}"));
                return vec![
                    ("1a agnostic/non-adaptive >= 10 for some B in 4..=7".into(), fail()),
                    ("1b adaptive <= 1.25 x non-adaptive for every B".into(), fail()),
                    ("1c calibration distortion non-increasing in B".into(), fail()),
                    ("1d three seeds in under 10 minutes".into(), fail()),
                ];
            }
        };
        let best = table
            .rows
            .iter()
            .filter(|r| (4..=7).contains(&r.bits))
            .map(|r| r.mse_agnostic / r.mse_nonadaptive)
            .fold(0.0, f64::max);
        ratio_ok.push(best >= 10.0);
        let worst = table
            .rows
            .iter()
            .map(|r| r.mse_adaptive / r.mse_nonadaptive)
            .fold(0.0, f64::max);
        adaptive_ok.push(worst <= 1.25);
        monotone_ok.push(
            table
                .rows
                .windows(2)
                .all(|w| w[1].cal_distortion_nonadaptive <= w[0].cal_distortion_nonadaptive),
        );
        notes.push(format!(
            "seed {seed}: best ratio {best:.1}, worst adaptive ratio {worst:.4}, {:.0}s",
            t.elapsed().as_secs_f64()
        ));
    }
    let took = start.elapsed();
    let notes = notes.join("; ");
    vec![
        (
            "1a agnostic/non-adaptive >= 10 for some B in 4..=7".into(),
            outcome(ratio_ok.iter().all(|&b| b), notes.clone()),
        ),
        (
            "1b adaptive <= 1.25 x non-adaptive for every B".into(),
            outcome(adaptive_ok.iter().all(|&b| b), notes.clone()),
        ),
        (
            "1c calibration distortion non-increasing in B".into(),
            outcome(monotone_ok.iter().all(|&b| b), format!("seeds {FIG2_SEEDS:?}")),
        ),
        (
            "1d three seeds in under 10 minutes".into(),
            outcome(within(Duration::from_secs(600), took), format!("{:.0}s", took.as_secs_f64())),
        ),
    ]
}

fn kmeans_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut contiguous, mut full, mut failures) = (0, 0, Vec::new());
    for case in 0..500 {
        let n = rng.gen_range(1..=12);
        let k = rng.gen_range(1..=4);
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..10.0)).collect();
        let dp = match kmeans1d_weighted(&v, &w, k) {
            Ok(c) => c.cost,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let scale = cost_scale(&v, &w);
        contiguous += 1;
        if !close_rel(dp, contiguous_bruteforce(&v, &w, k), 1e-9, scale) {
            failures.push(format!("case {case}: contiguous"));
        }
        if n <= 8 {
            full += 1;
            if !close_rel(dp, partition_bruteforce(&v, &w, k), 1e-9, scale) {
                failures.push(format!("case {case}: set partition"));
            }
        }
    }
    let took = start.elapsed();
    outcome(
        failures.is_empty() && within(Duration::from_secs(10), took),
        format!(
            "{contiguous} contiguous, {full} set-partition comparisons, {} mismatches, {:.2}s",
            failures.len(),
            took.as_secs_f64()
        ),
    )
}

fn reduction_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = 0;
    for _ in 0..200 {
        let dim = rng.gen_range(1..=4);
        let beta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let k = rng.gen_range(1..=8);
        let cb = random_codebook(&mut rng, 0, 3, k, &beta);
        let new_bits = rng.gen_range(1..=2);
        let Ok(reduced) = reduce_codebook(&cb, new_bits, &beta) else {
            failures += 1;
            continue;
        };
        let w: Vec<f64> = cb.weights().iter().map(|&n| n as f64).collect();
        let got = reduction_distortion(cb.projected(), cb.weights(), reduced.projected());
        let brute = contiguous_bruteforce(cb.projected(), &w, 1 << new_bits);
        if !close_rel(got, brute, 1e-9, cost_scale(cb.projected(), &w)) {
            failures += 1;
        }
    }
    let took = start.elapsed();
    outcome(
        failures == 0 && within(Duration::from_secs(10), took),
        format!("200 codebooks, {failures} mismatches, {:.2}s", took.as_secs_f64()),
    )
}

fn identity_contracts() -> Outcome {
    let mut problems = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let dim = rng.gen_range(1..=3);
        let bits = rng.gen_range(1..=4);
        let beta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cb = random_codebook(&mut rng, 0, bits, 1 << bits, &beta);
        let same = reduce_codebook(&cb, bits, &beta).unwrap();
        if same != cb || serde_json::to_vec(&same).unwrap() != serde_json::to_vec(&cb).unwrap() {
            problems.push("reduce at K' = K_eff changed the codebook");
            break;
        }
    }

    let spec = SyntheticSpec {
        n_test: 200,
        ..SyntheticSpec::reference(4)
    };
    let data = gen_synthetic(&spec).unwrap();
    let full = train_distributed(&data.calibration, &data.model, &data.partition, &TrainConfig::uniform(10, 10)).unwrap();
    let bytes = |q: &distq::DistributedQuantizer| serde_json::to_vec(q).unwrap();
    let half = adapt(&full, &[5; 10]).unwrap();
    if half.codebooks().iter().any(|c| c.len() > 32) {
        problems.push("10 -> 5 left more than 32 codewords");
    }
    if bytes(&adapt(&full, &[10; 10]).unwrap()) != bytes(&full) {
        problems.push("10 -> 5 -> 10 did not restore the full-rate codebooks");
    }
    let sched = RateSchedule::new(vec![
        RateEvent { t: 0, bits: vec![10; 10] },
        RateEvent { t: 50, bits: vec![5; 10] },
        RateEvent { t: 100, bits: vec![10; 10] },
    ])
    .unwrap();
    let session = run_session(&full, &sched, &data.test).unwrap();
    let steady = run_session(&full, &RateSchedule::constant(vec![10; 10]).unwrap(), &data.test).unwrap();
    if (100..200).any(|j| session.steps[j].y_tilde.to_bits() != steady.steps[j].y_tilde.to_bits()) {
        problems.push("session output after 10 -> 5 -> 10 differs from full rate");
    }

    let mut codec = 0u64;
    for bits in 1..=10u32 {
        for index in 0..(1u32 << bits) {
            codec += 1;
            let ok = encode_index(index, bits).and_then(|b| decode_index(&b, bits)).ok() == Some(index);
            if !ok {
                problems.push("codec round trip failed");
                break;
            }
        }
    }

    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("identity reduce, 10->5->10 round trip, {codec} codec round trips")
        } else {
            problems.join("; ")
        },
    )
}

fn dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..50 {
        let m = rng.gen_range(1..=3);
        let per = rng.gen_range(1..=3);
        let d = m * per;
        let n = rng.gen_range(2..=200);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let cal = CalibrationSet::from_rows(&rows).unwrap();
        let model = LinearModel::new((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let part = FeaturePartition::contiguous(m, per).unwrap();
        let cfg = TrainConfig::new((0..m).map(|_| rng.gen_range(1..=5)).collect()).with_baseline(rng.gen(), 8);
        let ours = train_distributed(&cal, &model, &part, &cfg).unwrap().projected_distortion(&cal).unwrap();
        let base = train_agnostic(&cal, &part, &model, &cfg).unwrap().projected_distortion(&cal).unwrap();
        for (a, b) in ours.iter().zip(&base) {
            if *a > b + 1e-9 * b.abs().max(1.0) {
                failures += 1;
            }
            worst = worst.max(a - b);
        }
    }
    outcome(
        failures == 0,
        format!("50 instances, {failures} violations, largest (ours - baseline) {worst:.3e}"),
    )
}

fn lossless_limit() -> Outcome {
    let spec = SyntheticSpec {
        seed: 6,
        n_cal: 1000,
        n_test: 10,
        d: 100,
        m: 10,
        features_per_sensor: 10,
        bit_range: vec![10],
        baseline_restarts: 1,
    };
    let data = gen_synthetic(&spec).unwrap();
    let q = train_distributed(&data.calibration, &data.model, &data.partition, &TrainConfig::uniform(10, 10)).unwrap();
    let mse = evaluate_mse(&q, &data.calibration).unwrap().mse;
    outcome(mse <= 1e-18, format!("calibration MSE {mse:e} with 1024 levels for 1000 points"))
}

fn cli_reproducible() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    let body = serde_json::json!({
        "seed": 9, "n_cal": 2000, "n_test": 5000, "d": 20, "m": 4,
        "features_per_sensor": 5, "bit_range": [1, 2, 3, 4, 5, 6]
    });
    std::fs::write(&spec, body.to_string()).unwrap();
    let run = |name: &str| -> Option<Vec<u8>> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_distq"))
            .args(["reproduce-fig2", "--spec"])
            .arg(&spec)
            .arg("--out")
            .arg(&out)
            .status()
            .ok()?;
        status.success().then(|| std::fs::read(&out).ok()).flatten()
    };
    match (run("a.csv"), run("b.csv")) {
        (Some(a), Some(b)) => outcome(a == b, format!("{} bytes each", a.len())),
        _ => outcome(false, "reproduce-fig2 did not run"),
    }
}

fn main() {
    let mut results: Vec<(String, Outcome)> = vec![
        ("2 1-D K-Means matches brute force (500 instances, < 10s)".into(), kmeans_oracle()),
        ("3 reduction matches weighted brute force (200 codebooks, < 10s)".into(), reduction_oracle()),
        ("4 identity and round-trip contracts".into(), identity_contracts()),
        ("5 distributed distortion <= baseline per sensor".into(), dominance()),
        ("6 lossless limit calibration MSE <= 1e-18".into(), lossless_limit()),
        ("7 reproduce-fig2 CSV byte-identical across runs".into(), cli_reproducible()),
    ];
    results.extend(figure2_shape());
    results.sort_by(|a, b| a.0.cmp(&b.0));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
