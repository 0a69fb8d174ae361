//! One-hot encodings of the customer id and the target day's calendar.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::tensor::Tensor;

/// Customer index written as `parts` base-`width` digits, each one-hot
/// encoded, most significant digit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdEncoding {
    pub width: usize,
    pub parts: usize,
}

impl Default for IdEncoding {
    /// Two 31-wide vectors: enough for 961 customers.
    fn default() -> Self {
        IdEncoding { width: 31, parts: 2 }
    }
}

impl IdEncoding {
    /// Smallest width such that `parts` vectors cover `n_customers`.
    pub fn for_population(n_customers: usize, parts: usize) -> Self {
        assert!(parts >= 1);
        let mut width = (n_customers as f64).powf(1.0 / parts as f64).ceil() as usize;
        while width.pow(parts as u32) < n_customers {
            width += 1;
        }
        while width > 1 && (width - 1).pow(parts as u32) >= n_customers {
            width -= 1;
        }
        IdEncoding {
            width: width.max(1),
            parts,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.width.pow(self.parts as u32)
    }

    pub fn encode(&self, index: usize, n_customers: usize) -> Result<Tensor, DataError> {
        if n_customers > self.capacity() {
            return Err(DataError::Population {
                n_customers,
                capacity: self.capacity(),
            });
        }
        if index >= n_customers {
            return Err(DataError::IdOutOfRange { index, n_customers });
        }
        let mut v = vec![0.0; self.len()];
        let mut rest = index;
        for part in (0..self.parts).rev() {
            v[part * self.width + rest % self.width] = 1.0;
            rest /= self.width;
        }
        Ok(Tensor::from_vec(v))
    }
}

/// Two 31-wide one-hots at `index / 31` and `index % 31`.
pub fn encode_customer_id(index: usize, n_customers: usize) -> Result<Tensor, DataError> {
    IdEncoding::default().encode(index, n_customers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalendarFeatures {
    pub month: Tensor,
    pub day: Tensor,
    pub week: Tensor,
}

fn one_hot(len: usize, hot: usize) -> Tensor {
    let mut v = vec![0.0; len];
    v[hot] = 1.0;
    Tensor::from_vec(v)
}

/// Month (January = 0), day of month (1st = 0) and weekday (Monday = 0).
pub fn encode_calendar(date: NaiveDate) -> CalendarFeatures {
    CalendarFeatures {
        month: one_hot(12, date.month0() as usize),
        day: one_hot(31, date.day0() as usize),
        week: one_hot(7, date.weekday().num_days_from_monday() as usize),
    }
}
