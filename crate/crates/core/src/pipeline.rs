//! End-to-end glue: readings to samples, and samples to evaluation reports.

use chrono::{Days, NaiveDate};
use thiserror::Error;

use crate::data::{
    build_series, build_windows, history_at, persistence_baseline, split, CustomerSeries,
    DataError, MeterReading, SampleBuilder, SeriesOptions, SeriesSet, Split, SplitSpec, Window,
    HISTORY_DAYS,
};
use crate::metrics::{EvalDay, EvalReport, MetricError, NrmseRange};
use crate::model::{predict, LoadCNNConfig, LoadCNNParams, ModelError, Sample};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Calendar date of day index 1 in synthetic and default datasets.
pub fn default_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2009, 7, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub epoch: NaiveDate,
    pub split: SplitSpec,
    pub stride_days: usize,
    pub max_missing_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            epoch: default_epoch(),
            split: SplitSpec::default(),
            stride_days: 1,
            max_missing_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub series: SeriesSet,
    pub split: Split,
    pub builder: SampleBuilder,
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Ingests readings, windows every customer and splits by target day.
pub fn prepare(readings: &[MeterReading], config: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let mut options = SeriesOptions::new(config.epoch);
    options.max_missing_fraction = config.max_missing_fraction;
    let series = build_series(readings, &options)?;
    prepare_series(series, config)
}

pub fn prepare_series(series: SeriesSet, config: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let mut windows = Vec::new();
    for s in &series.series {
        windows.extend(build_windows(s, config.stride_days)?);
    }
    let split = split(windows, &config.split)?;
    let builder = SampleBuilder::new(series.series.len());
    let train = builder.samples(&split.train)?;
    let validation = builder.samples(&split.validation)?;
    let test = builder.samples(&split.test)?;
    Ok(Dataset {
        series,
        split,
        builder,
        train,
        validation,
        test,
    })
}

/// The window predicting `date` from the seven days before it. The target
/// is the recorded day when the series covers it, zeros otherwise.
pub fn prediction_window(series: &CustomerSeries, date: NaiveDate) -> Result<Window, DataError> {
    let needed = HISTORY_DAYS + 1;
    let first = date.checked_sub_days(Days::new(HISTORY_DAYS as u64));
    let start = first.and_then(|d| series.offset_of(d));
    let last = date.pred_opt().and_then(|d| series.offset_of(d));
    let (start, _) = match (start, last) {
        (Some(s), Some(l)) => (s, l),
        _ => {
            return Err(DataError::TooShort {
                days: series.day_count(),
                needed,
            })
        }
    };
    let t = start + HISTORY_DAYS;
    let target = if t < series.day_count() {
        Tensor::from_vec(series.day(t).to_vec())
    } else {
        Tensor::zeros(&[crate::data::SLOTS_PER_DAY])
    };
    Ok(Window {
        history: history_at(series, start)?,
        target,
        target_date: date,
        target_day: series.start_day + t as u32,
        customer_index: series.customer_index,
    })
}

/// Scores `predictor` against every sample's target, pooling all points.
pub fn evaluate_with<F>(samples: &[Sample], range: NrmseRange, predictor: F) -> Result<EvalReport, PipelineError>
where
    F: Fn(&Sample) -> Result<Tensor, ModelError>,
{
    let days: Vec<EvalDay> = samples
        .iter()
        .map(|s| {
            let p = predictor(s)?;
            Ok((s.customer_index, s.target.data().to_vec(), p.into_data()))
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(EvalReport::from_days(&days, range)?)
}

pub fn evaluate_model(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    samples: &[Sample],
    range: NrmseRange,
) -> Result<EvalReport, PipelineError> {
    evaluate_with(samples, range, |s| predict(config, params, s))
}

pub fn evaluate_persistence(samples: &[Sample], range: NrmseRange) -> Result<EvalReport, PipelineError> {
    evaluate_with(samples, range, |s| Ok(persistence_baseline(&s.history)))
}

/// Predicts each sample's own target; all metrics come out zero.
pub fn evaluate_identity(samples: &[Sample], range: NrmseRange) -> Result<EvalReport, PipelineError> {
    evaluate_with(samples, range, |s| Ok(s.target.clone()))
}
