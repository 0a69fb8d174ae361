use chrono::NaiveDate;

use super::readings::SLOTS_PER_DAY;
use super::series::CustomerSeries;
use super::DataError;
use crate::tensor::Tensor;

pub const HISTORY_DAYS: usize = 7;

/// Seven days of history and the day that follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `[7, 48]`; `history[d][t] = values[48 * (k + d) + t]`.
    pub history: Tensor,
    pub target: Tensor,
    pub target_date: NaiveDate,
    /// Dataset day index (1-based) of the target day.
    pub target_day: u32,
    pub customer_index: usize,
}

/// History matrix for the seven days starting at day offset `start`.
pub fn history_at(series: &CustomerSeries, start: usize) -> Result<Tensor, DataError> {
    if start + HISTORY_DAYS > series.day_count() {
        return Err(DataError::TooShort {
            days: series.day_count(),
            needed: start + HISTORY_DAYS,
        });
    }
    let lo = start * SLOTS_PER_DAY;
    let hi = lo + HISTORY_DAYS * SLOTS_PER_DAY;
    Ok(Tensor::new(&[HISTORY_DAYS, SLOTS_PER_DAY], series.values[lo..hi].to_vec())?)
}

/// Sliding windows advancing `stride_days` days at a time.
pub fn build_windows(series: &CustomerSeries, stride_days: usize) -> Result<Vec<Window>, DataError> {
    if stride_days == 0 {
        return Err(DataError::InvalidStride);
    }
    let days = series.day_count();
    if days < HISTORY_DAYS + 1 {
        return Err(DataError::TooShort {
            days,
            needed: HISTORY_DAYS + 1,
        });
    }
    let mut out = Vec::new();
    let mut k = 0;
    while k + HISTORY_DAYS < days {
        let t = k + HISTORY_DAYS;
        out.push(Window {
            history: history_at(series, k)?,
            target: Tensor::from_vec(series.day(t).to_vec()),
            target_date: series.date_of(t),
            target_day: series.start_day + t as u32,
            customer_index: series.customer_index,
        });
        k += stride_days;
    }
    Ok(out)
}
