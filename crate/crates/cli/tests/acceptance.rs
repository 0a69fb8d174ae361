//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fail.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode, Output};
use std::time::Instant;

use loadcnn::data::{
    build_series, build_windows, encode_customer_id, gen_synthetic, parse_readings_str,
    serialize_readings, series_to_readings, split, SampleBuilder, SeriesOptions, SplitSpec,
    SynthConfig, Window,
};
use loadcnn::gradsuite::{run_gradient_suite, SUITE_TOLERANCE, SUITE_TRIALS};
use loadcnn::metrics::NrmseRange;
use loadcnn::model::{default_config, kernel_elements, Sample};
use loadcnn::nn::{conv2d_forward, maxpool_forward, ConvLayerSpec, Padding, PoolSpec};
use loadcnn::pipeline::{default_epoch, evaluate_model};
use loadcnn::training::{train, TrainConfig};
use loadcnn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

type Check = Result<String, String>;

fn ensure(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn loadcnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loadcnn"))
        .args(args)
        .output()
        .expect("run loadcnn")
}

fn run_ok(args: &[&str]) -> Result<String, String> {
    let o = loadcnn(args);
    if o.status.success() {
        Ok(String::from_utf8_lossy(&o.stdout).into_owned())
    } else {
        Err(format!("loadcnn {args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn field(text: &str, key: &str) -> Result<f64, String> {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("no numeric {key} in output"))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn cost_goldens() -> Check {
    let a = run_ok(&["cost", "--power", "80.2228", "--hours", "2.85"])?;
    let b = run_ok(&["cost", "--power", "66.1656", "--hours", "164.42"])?;
    let (ec_a, co2_a) = (field(&a, "ec_kwh")?, field(&a, "co2e_lbs")?);
    let (ec_b, co2_b) = (field(&b, "ec_kwh")?, field(&b, "co2e_lbs")?);
    let ok = (ec_a - 361.2433).abs() <= 5e-4
        && (co2_a - 344.6261).abs() <= 5e-4
        && (ec_b - 17188.7378).abs() <= 0.01
        && (co2_b - 16398.0559).abs() <= 0.01;
    ensure(
        ok,
        format!("EC={ec_a:.4} kWh CO2e={co2_a:.4} lbs; EC={ec_b:.4} kWh CO2e={co2_b:.4} lbs"),
    )
}

fn kernel_arithmetic() -> Check {
    let spec = |kh, kw| ConvLayerSpec {
        kernel_height: kh,
        kernel_width: kw,
        in_channels: 1,
        out_channels: 1,
        padding: Padding::Same,
    };
    let split_pair = kernel_elements(&spec(1, 7)) + kernel_elements(&spec(4, 1));
    let square = kernel_elements(&spec(4, 7));
    ensure(split_pair == 11 && square == 28, format!("1x7 + 4x1 = {split_pair}, 4x7 = {square}"))
}

fn gradient_suite() -> Check {
    let results = run_gradient_suite(0, SUITE_TRIALS, None).map_err(|e| e.to_string())?;
    let detail = results
        .iter()
        .map(|r| format!("{}={:.1e}", r.layer, r.max_error))
        .collect::<Vec<_>>()
        .join(" ");
    let ok = results.len() == 6 && results.iter().all(|r| r.trials == SUITE_TRIALS && r.max_error < SUITE_TOLERANCE);
    ensure(ok, format!("{SUITE_TRIALS} trials each, max rel error {detail}"))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut shape_errors = 0;
    for i in 0..200 {
        let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let (cin, cout) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let (kh, kw) = (rng.random_range(1..=h), rng.random_range(1..=w));
        let mut draw = |shape: &[usize]| Tensor::from_fn(shape, |_| rng.random_range(-2.0..2.0));
        let x = draw(&[h, w, cin]);
        let k = draw(&[kh, kw, cin, cout]);
        let b = draw(&[cout]);
        let xi = oracle::image_from_flat(h, w, cin, x.data());
        let ki = oracle::kernel_from_flat(kh, kw, cin, cout, k.data());
        let (padding, expect) = if i % 2 == 0 {
            (Padding::Same, oracle::conv_same(&xi, &ki, b.data()))
        } else {
            (Padding::Valid, oracle::conv_valid(&xi, &ki, b.data()))
        };
        let y = conv2d_forward(&x, &k, &b, padding).map_err(|e| e.to_string())?;
        if y.shape() != [expect.len(), expect[0].len(), cout] {
            shape_errors += 1;
            continue;
        }
        worst = worst.max(max_diff(y.data(), &oracle::flatten(&expect)));

        let (ph, pw) = (rng.random_range(1..=h), rng.random_range(1..=w));
        let (pooled, _) = maxpool_forward(&x, PoolSpec::new(ph, pw)).map_err(|e| e.to_string())?;
        let expect = oracle::maxpool(&xi, ph, pw);
        worst = worst.max(max_diff(pooled.data(), &oracle::flatten(&expect)));
    }
    ensure(
        shape_errors == 0 && worst <= 1e-12,
        format!("200 conv + 200 pool instances, max abs diff {worst:.1e}, shape mismatches {shape_errors}"),
    )
}

fn pipeline_correctness() -> Check {
    let mut ids = HashSet::new();
    for i in 0..929 {
        let v = encode_customer_id(i, 929).map_err(|e| e.to_string())?;
        let d = v.data();
        if d.iter().sum::<f64>() != 2.0 || d[i / 31] != 1.0 || d[31 + i % 31] != 1.0 {
            return Err(format!("id {i} encodes wrongly"));
        }
        ids.insert(d.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }
    if ids.len() != 929 {
        return Err(format!("{} distinct id codes for 929 customers", ids.len()));
    }

    let series = gen_synthetic(&SynthConfig::new(5, 40, 11));
    let mut windows: Vec<Window> = Vec::new();
    for s in &series {
        let ws = build_windows(s, 1).map_err(|e| e.to_string())?;
        for (k, w) in ws.iter().enumerate() {
            if w.history.data() != &s.values[48 * k..48 * (k + 7)] || w.target.data() != s.day(k + 7) {
                return Err(format!("window {k} of {} does not round-trip", s.meter_id));
            }
        }
        windows.extend(ws);
    }

    let mut splits = 0;
    for test_days in 1..=10u32 {
        for validation_days in 0..=10u32 {
            let spec = SplitSpec { test_days, validation_days, validation_range: (8, 35), seed: 5 };
            let parts = split(windows.clone(), &spec).map_err(|e| e.to_string())?;
            let key = |w: &Window| (w.customer_index, w.target_day);
            let sets: Vec<BTreeSet<_>> = [&parts.train, &parts.validation, &parts.test]
                .iter()
                .map(|s| s.iter().map(key).collect())
                .collect();
            let total: usize = sets.iter().map(BTreeSet::len).sum();
            let all: BTreeSet<_> = windows.iter().map(key).collect();
            let union: BTreeSet<_> = sets.iter().flatten().copied().collect();
            if total != windows.len() || union != all || parts.days.test.len() as u32 != test_days
                || parts.days.validation.len() as u32 != validation_days
            {
                return Err(format!("split {test_days}/{validation_days} is not a partition"));
            }
            splits += 1;
        }
    }

    let text = serialize_readings(&series_to_readings(&series));
    let parsed = parse_readings_str(&text).map_err(|e| e.to_string())?;
    let rebuilt = build_series(&parsed, &SeriesOptions::new(default_epoch())).map_err(|e| e.to_string())?;
    let round_trip = serialize_readings(&parsed) == text && rebuilt.series == series;
    ensure(
        round_trip,
        format!("929 ids injective, {} windows round-trip, {splits} splits partition, {} records round-trip", windows.len(), parsed.len()),
    )
}

fn memorization() -> Check {
    let series = gen_synthetic(&SynthConfig::new(1, 15, 4));
    let windows = build_windows(&series[0], 1).map_err(|e| e.to_string())?;
    let samples: Vec<Sample> = SampleBuilder::new(1).samples(&windows[..8]).map_err(|e| e.to_string())?;
    let tc = TrainConfig {
        batch_size: 8,
        max_epochs: 2000,
        learning_rate: 0.0015,
        decay_rate: 1.0,
        validation_interval_steps: 50,
        full_validation: true,
        seed: 0,
        ..Default::default()
    };
    let (ck, _) = train(&samples, &samples, &default_config(), &tc).map_err(|e| e.to_string())?;
    let report = evaluate_model(&ck.model_config, &ck.params, &samples, NrmseRange::Actual)
        .map_err(|e| e.to_string())?;
    ensure(
        ck.total_steps <= 2000 && report.rmse_kwh < 0.01,
        format!("8 samples, {} steps, RMSE {:.4} kWh", ck.total_steps, report.rmse_kwh),
    )
}

fn desk_beats_persistence(tmp: &Path) -> Check {
    let data = tmp.join("desk");
    let run = tmp.join("desk_run");
    run_ok(&["synth", "--customers", "5", "--days", "40", "--seed", "0", "--out", p(&data)])?;
    run_ok(&[
        "train", "--data", p(&data), "--out", p(&run), "--test-days", "5", "--validation-days", "5",
        "--set", "validation_range_end=35",
    ])?;
    let eval = run_ok(&["evaluate", "--checkpoint", p(&run.join("checkpoint.lcnn")), "--data", p(&data)])?;
    let (model, baseline) = (field(&eval, "rmse_kwh")?, field(&eval, "persistence_rmse_kwh")?);
    ensure(
        model < baseline,
        format!("5 customers x 40 days, test RMSE {model:.4} vs persistence {baseline:.4} kWh"),
    )
}

fn determinism(tmp: &Path) -> Check {
    let series = gen_synthetic(&SynthConfig::new(2, 16, 1));
    let builder = SampleBuilder::new(2);
    let mut samples = Vec::new();
    for s in &series {
        samples.extend(builder.samples(&build_windows(s, 1).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?);
    }
    let (train_set, val_set) = samples.split_at(12);
    let tc = TrainConfig { batch_size: 4, max_epochs: 100, max_steps: Some(100), validation_interval_steps: 10, seed: 17, ..Default::default() };
    let trace = || -> Result<Vec<u64>, String> {
        let (_, log) = train(train_set, val_set, &default_config(), &tc).map_err(|e| e.to_string())?;
        Ok(log.train_losses().into_iter().chain(log.val_losses()).map(f64::to_bits).collect())
    };
    let (a, b) = (trace()?, trace()?);

    let (x, y) = (tmp.join("synth_a"), tmp.join("synth_b"));
    for dir in [&x, &y] {
        run_ok(&["synth", "--customers", "5", "--days", "40", "--seed", "7", "--out", p(dir)])?;
    }
    let read = |d: &Path| fs::read(d.join("readings.txt")).map_err(|e| e.to_string());
    let same_bytes = read(&x)? == read(&y)?;
    ensure(
        a.len() >= 100 && a == b && same_bytes,
        format!("{} logged losses bit-identical: {}, synthetic files byte-identical: {same_bytes}", a.len(), a == b),
    )
}

fn declared_non_reproducible() -> Check {
    let readme = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap_or_default();
    let documented = ["0.6152", "0.0470", "0.3469", "2.85 h"].iter().all(|s| readme.contains(s));
    ensure(
        documented,
        "full-population accuracy (RMSE 0.6152, NRMSE 0.0470, MAE 0.3469 kWh) and 2.85 h training time need the licensed dataset; declared in README with a reproduction path".into(),
    )
}

fn main() -> ExitCode {
    let tmp = TempDir::new().expect("temp dir");
    let checks: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("cost-golden-values", Box::new(cost_goldens)),
        ("kernel-element-arithmetic", Box::new(kernel_arithmetic)),
        ("gradient-suite", Box::new(gradient_suite)),
        ("oracle-equivalence", Box::new(oracle_equivalence)),
        ("pipeline-correctness", Box::new(pipeline_correctness)),
        ("training-memorization", Box::new(memorization)),
        ("training-beats-persistence", Box::new(|| desk_beats_persistence(tmp.path()))),
        ("determinism", Box::new(|| determinism(tmp.path()))),
        ("declared-non-reproducible", Box::new(declared_non_reproducible)),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        let start = Instant::now();
        let (status, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{status} {name}: {detail} ({:.1}s)", start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
