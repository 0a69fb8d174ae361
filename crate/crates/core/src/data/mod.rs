//! Smart-meter ingestion, windowing, feature encoding and dataset splitting.

pub mod features;
pub mod readings;
pub mod series;
pub mod split;
pub mod synth;
pub mod windows;

use thiserror::Error;

pub use features::{encode_calendar, encode_customer_id, CalendarFeatures, IdEncoding};
pub use readings::{
    format_reading, parse_readings, parse_readings_str, serialize_readings, MeterReading,
    SLOTS_PER_DAY,
};
pub use series::{build_series, CustomerSeries, DroppedCustomer, IdMap, SeriesOptions, SeriesSet};
pub use split::{assign_days, split, DayAssignment, Role, Split, SplitSpec};
pub use synth::{gen_synthetic, synthetic_meter_id, SynthConfig};
pub use windows::{build_windows, history_at, Window, HISTORY_DAYS};

use crate::model::Sample;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: slot {slot} out of range 1..=48")]
    SlotOutOfRange { line: usize, slot: u32 },
    #[error("duplicate reading for meter {meter_id}, day {day_index}, slot {slot}")]
    Duplicate {
        meter_id: String,
        day_index: u32,
        slot: u8,
    },
    #[error("no readings")]
    NoData,
    #[error("invalid day range {first}..={last}")]
    InvalidRange { first: u32, last: u32 },
    #[error("series covers {days} days, need at least {needed}")]
    TooShort { days: usize, needed: usize },
    #[error("window stride must be at least one day")]
    InvalidStride,
    #[error("customer index {index} out of range for {n_customers} customers")]
    IdOutOfRange { index: usize, n_customers: usize },
    #[error("{n_customers} customers exceed id encoding capacity {capacity}")]
    Population { n_customers: usize, capacity: usize },
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("unknown customer {0}")]
    UnknownCustomer(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Predicts the target day as the oldest history row, i.e. the same weekday
/// one week earlier.
pub fn persistence_baseline(history: &Tensor) -> Tensor {
    let w = history.shape()[history.rank() - 1];
    Tensor::from_vec(history.data()[..w].to_vec())
}

/// Per-customer maximum, used to rescale loads into `[0, 1]`. Customers with
/// an all-zero series get a scale of 1.
pub fn max_scales(series: &[CustomerSeries]) -> Vec<f64> {
    let n = series.iter().map(|s| s.customer_index + 1).max().unwrap_or(0);
    let mut out = vec![1.0; n];
    for s in series {
        let m = s.values.iter().fold(0.0f64, |a, &b| a.max(b));
        if m > 0.0 {
            out[s.customer_index] = m;
        }
    }
    out
}

/// Turns windows into model samples.
#[derive(Debug, Clone)]
pub struct SampleBuilder {
    pub encoding: IdEncoding,
    pub n_customers: usize,
    /// Divide loads by these per-customer factors when set.
    pub scales: Option<Vec<f64>>,
}

impl SampleBuilder {
    pub fn new(n_customers: usize) -> Self {
        SampleBuilder {
            encoding: IdEncoding::default(),
            n_customers,
            scales: None,
        }
    }

    pub fn scale_of(&self, customer_index: usize) -> f64 {
        self.scales
            .as_ref()
            .and_then(|s| s.get(customer_index).copied())
            .unwrap_or(1.0)
    }

    pub fn sample(&self, w: &Window) -> Result<Sample, DataError> {
        let cal = encode_calendar(w.target_date);
        let scale = self.scale_of(w.customer_index);
        let (history, target) = if scale == 1.0 {
            (w.history.clone(), w.target.clone())
        } else {
            (w.history.map(|v| v / scale), w.target.map(|v| v / scale))
        };
        Ok(Sample {
            history,
            id_onehot: self.encoding.encode(w.customer_index, self.n_customers)?,
            month: cal.month,
            day: cal.day,
            week: cal.week,
            target,
            customer_index: w.customer_index,
            target_date: w.target_date,
        })
    }

    pub fn samples(&self, windows: &[Window]) -> Result<Vec<Sample>, DataError> {
        windows.iter().map(|w| self.sample(w)).collect()
    }
}

/// All readings of a set of series, customer by customer.
pub fn series_to_readings(series: &[CustomerSeries]) -> Vec<MeterReading> {
    series.iter().flat_map(CustomerSeries::to_readings).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn persistence_returns_first_row() {
        let h = Tensor::full(&[7, 48], 2.5);
        assert_eq!(persistence_baseline(&h), Tensor::full(&[48], 2.5));
        let h = Tensor::from_fn(&[7, 48], |i| if i < 48 { (i + 1) as f64 } else { -1.0 });
        let p = persistence_baseline(&h);
        assert_eq!(p.data(), (1..=48).map(|v| v as f64).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn samples_follow_window() {
        let cfg = SynthConfig::new(2, 10, 1);
        let series = gen_synthetic(&cfg);
        let w = build_windows(&series[1], 1).unwrap();
        let b = SampleBuilder::new(2);
        let s = b.sample(&w[0]).unwrap();
        assert_eq!(s.customer_index, 1);
        assert_eq!(s.id_onehot.sum(), 2.0);
        assert_eq!(s.id_onehot.data()[0], 1.0);
        assert_eq!(s.id_onehot.data()[32], 1.0);
        // 2009-07-08 is a Wednesday.
        assert_eq!(s.week.data()[2], 1.0);
        assert_eq!(s.history, w[0].history);

        let mut scaled = b.clone();
        scaled.scales = Some(max_scales(&series));
        let s2 = scaled.sample(&w[0]).unwrap();
        assert!(s2.history.data().iter().all(|&v| v <= 1.0));
    }
}
