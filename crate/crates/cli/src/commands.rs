use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use loadcnn::cost::{measure_training_time, CostParams, CostReport};
use loadcnn::data::{
    build_series, gen_synthetic, parse_readings, serialize_readings, series_to_readings,
    SeriesOptions, SynthConfig,
};
use loadcnn::gradsuite::{run_gradient_suite, Fault, SUITE_TOLERANCE};
use loadcnn::metrics::{round4, EvalReport, NrmseRange};
use loadcnn::model::{default_config, predict};
use loadcnn::pipeline::{
    evaluate_identity, evaluate_model, evaluate_persistence, prediction_window, prepare_series,
    Dataset,
};
use loadcnn::rng::{stream_seed, Stream};
use loadcnn::training::{load_checkpoint, save_checkpoint, train, Checkpoint};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

pub const READINGS_FILE: &str = "readings.txt";
pub const CUSTOMERS_FILE: &str = "customers.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.lcnn";
pub const LOG_FILE: &str = "train_log.csv";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.txt";
pub const ID_MAP_FILE: &str = "id_map.txt";
pub const SPLIT_FILE: &str = "split.txt";
pub const COST_FILE: &str = "cost_report.txt";

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

pub fn synth(customers: usize, days: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if customers == 0 {
        return Err(CliError::Usage("--customers must be at least 1".into()));
    }
    if days < 9 {
        return Err(CliError::Usage("--days must be at least 9".into()));
    }
    create_dir(out)?;
    let series = gen_synthetic(&SynthConfig::new(customers, days, stream_seed(seed, Stream::Synth)));
    let readings = series_to_readings(&series);
    write(&out.join(READINGS_FILE), &serialize_readings(&readings))?;
    let ids: String = series.iter().map(|s| format!("{}\n", s.meter_id)).collect();
    write(&out.join(CUSTOMERS_FILE), &ids)?;
    println!("records={}", readings.len());
    println!("customers={customers}");
    println!("days={days}");
    Ok(())
}

/// Reads a readings file, or a directory holding `readings.txt` and an
/// optional `customers.txt` allow-list, and builds the split dataset.
fn load_dataset(data: &Path, config: &RunConfig) -> Result<Dataset, CliError> {
    if !data.exists() {
        return Err(CliError::Usage(format!("data path {} does not exist", data.display())));
    }
    let (readings_path, allow_path): (PathBuf, Option<PathBuf>) = if data.is_dir() {
        let allow = data.join(CUSTOMERS_FILE);
        (data.join(READINGS_FILE), allow.exists().then_some(allow))
    } else {
        (data.to_path_buf(), None)
    };
    let file = fs::File::open(&readings_path).map_err(|e| CliError::io(readings_path.display(), e))?;
    let readings = parse_readings(std::io::BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", readings_path.display())))?;

    let pipeline = config.pipeline_config()?;
    let mut options = SeriesOptions::new(pipeline.epoch);
    options.max_missing_fraction = pipeline.max_missing_fraction;
    if let Some(path) = allow_path {
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(path.display(), e))?;
        let ids: HashSet<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        options.allow_list = Some(ids);
    }
    let series = build_series(&readings, &options)?;
    if series.filled_slots > 0 {
        log::warn!("filled {} missing slots", series.filled_slots);
    }
    Ok(prepare_series(series, &pipeline)?)
}

fn split_summary(d: &Dataset) -> String {
    let days = |s: &std::collections::BTreeSet<u32>| s.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    format!(
        "customers={}\ntrain_windows={}\nvalidation_windows={}\ntest_windows={}\ntest_days={}\nvalidation_days={}\n",
        d.series.series.len(),
        d.train.len(),
        d.validation.len(),
        d.test.len(),
        days(&d.split.days.test),
        days(&d.split.days.validation),
    )
}

pub fn train_cmd(data: &Path, config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let tc = config.train_config()?;
    let dataset = load_dataset(data, config)?;
    let mut model_config = default_config();
    model_config.clamp_output = config.clamp_output()?;

    create_dir(out)?;
    write(&out.join(RESOLVED_CONFIG_FILE), &config.to_text())?;
    write(&out.join(ID_MAP_FILE), &dataset.series.id_map.to_text())?;
    let summary = split_summary(&dataset);
    write(&out.join(SPLIT_FILE), &summary)?;
    print!("{summary}");

    let (result, hours) =
        measure_training_time(|| train(&dataset.train, &dataset.validation, &model_config, &tc));
    let (mut checkpoint, log) = result?;
    checkpoint.id_map_hash = Some(dataset.series.id_map.hash());
    checkpoint.extra = config.to_map();
    save_checkpoint(&checkpoint, &out.join(CHECKPOINT_FILE))?;
    write(&out.join(LOG_FILE), &log.to_csv())?;

    let cost = match config.power_watts()? {
        Some(p) => {
            let params = CostParams {
                power_watts: p,
                training_hours: hours,
                pue: config.pue()?,
                trials: config.trials()?,
            };
            CostReport::compute(params)
                .map_err(|e| CliError::Usage(e.to_string()))?
                .to_key_value()
        }
        None => format!(
            "power_watts=unset\ntraining_hours={hours:.4}\npue={:.4}\ntrials={}\n",
            config.pue()?,
            config.trials()?
        ),
    };
    write(&out.join(COST_FILE), &cost)?;

    let train_losses = log.train_losses();
    println!("steps={}", checkpoint.total_steps);
    if let (Some(first), Some(last)) = (train_losses.first(), train_losses.last()) {
        println!("initial_train_loss={first:.4}");
        println!("final_train_loss={last:.4}");
    }
    println!("best_val_loss={:.4}", checkpoint.loss_best);
    println!("best_step={}", checkpoint.step);
    println!("training_hours={hours:.4}");
    Ok(())
}

fn load_for_inference(checkpoint: &Path, data: &Path) -> Result<(Checkpoint, RunConfig, Dataset), CliError> {
    if !checkpoint.exists() {
        return Err(CliError::Usage(format!("checkpoint {} does not exist", checkpoint.display())));
    }
    let ck = load_checkpoint(checkpoint)?;
    let config = RunConfig::from_map(&ck.extra)?;
    let dataset = load_dataset(data, &config)?;
    let hash = dataset.series.id_map.hash();
    if ck.id_map_hash.as_deref() != Some(hash.as_str()) {
        return Err(CliError::Data(format!(
            "id map of {} ({}) does not match the checkpoint ({})",
            data.display(),
            hash,
            ck.id_map_hash.as_deref().unwrap_or("none")
        )));
    }
    Ok((ck, config, dataset))
}

fn report_json(r: &EvalReport) -> serde_json::Value {
    let per_customer: serde_json::Map<String, serde_json::Value> = r
        .per_customer
        .iter()
        .map(|(c, m)| {
            (
                c.to_string(),
                json!({"rmse_kwh": round4(m.rmse_kwh), "mae_kwh": round4(m.mae_kwh), "n_points": m.n_points}),
            )
        })
        .collect();
    json!({
        "rmse_kwh": round4(r.rmse_kwh),
        "nrmse": r.nrmse.map(round4),
        "mae_kwh": round4(r.mae_kwh),
        "n_points": r.n_points,
        "per_customer": per_customer,
    })
}

pub fn evaluate_cmd(
    checkpoint: &Path,
    data: &Path,
    out: Option<&Path>,
    nrmse_range: Option<NrmseRange>,
    identity: bool,
) -> Result<(), CliError> {
    let (ck, config, dataset) = load_for_inference(checkpoint, data)?;
    let range = match nrmse_range {
        Some(r) => r,
        None => config.nrmse_range()?,
    };
    let model = if identity {
        evaluate_identity(&dataset.test, range)?
    } else {
        evaluate_model(&ck.model_config, &ck.params, &dataset.test, range)?
    };
    let baseline = evaluate_persistence(&dataset.test, range)?;

    let mut text = split_summary(&dataset);
    text.push_str(&model.to_key_value(""));
    text.push_str(&baseline.to_key_value("persistence_"));
    print!("{text}");
    if let Some(dir) = out {
        create_dir(dir)?;
        write(&dir.join("eval_report.txt"), &text)?;
        let doc = json!({
            "train_windows": dataset.train.len(),
            "validation_windows": dataset.validation.len(),
            "test_windows": dataset.test.len(),
            "model": report_json(&model),
            "persistence": report_json(&baseline),
        });
        let body = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Data(e.to_string()))?;
        write(&dir.join("eval_report.json"), &body)?;
    }
    Ok(())
}

pub fn predict_cmd(checkpoint: &Path, data: &Path, customer: &str, date: NaiveDate) -> Result<(), CliError> {
    let (ck, _, dataset) = load_for_inference(checkpoint, data)?;
    let series = dataset
        .series
        .series
        .iter()
        .find(|s| s.meter_id == customer)
        .ok_or_else(|| CliError::Data(format!("unknown customer {customer}")))?;
    let window = prediction_window(series, date)
        .map_err(|e| CliError::Data(format!("insufficient history for {customer} on {date}: {e}")))?;
    let sample = dataset.builder.sample(&window)?;
    let y = predict(&ck.model_config, &ck.params, &sample)?;
    if !y.all_finite() {
        return Err(CliError::Numerical("prediction is not finite".into()));
    }
    for v in y.data() {
        println!("{v:.4}");
    }
    Ok(())
}

pub fn cost_cmd(params: CostParams, as_json: bool) -> Result<(), CliError> {
    let r = CostReport::compute(params).map_err(|e| CliError::Usage(e.to_string()))?;
    if as_json {
        let doc = json!({
            "ec_kwh": round4(r.ec_kwh),
            "co2e_lbs": round4(r.co2e_lbs),
            "inputs": {
                "power_watts": r.inputs.power_watts,
                "training_hours": r.inputs.training_hours,
                "pue": r.inputs.pue,
                "trials": r.inputs.trials,
            },
        });
        println!("{}", serde_json::to_string_pretty(&doc).map_err(|e| CliError::Data(e.to_string()))?);
    } else {
        print!("{}", r.to_key_value());
    }
    Ok(())
}

pub fn gradcheck_cmd(seed: u64, trials: usize, fault: Option<Fault>) -> Result<(), CliError> {
    let results = run_gradient_suite(seed, trials, fault)?;
    let mut failing = Vec::new();
    for r in &results {
        let status = if r.passed() { "pass" } else { "FAIL" };
        println!("{:<8} max_rel_error={:.3e} trials={} {status}", r.layer, r.max_error, r.trials);
        if !r.passed() {
            failing.push(r.layer.clone());
        }
    }
    if failing.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "gradient check above {SUITE_TOLERANCE:e} for: {}",
            failing.join(", ")
        )))
    }
}
