//! Pooled accuracy metrics and evaluation reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {actual} actual vs {predicted} predicted values")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("empty input")]
    Empty,
    #[error("degenerate range: max == min == {0}")]
    DegenerateRange(f64),
}

fn check(actual: &[f64], predicted: &[f64]) -> Result<(), MetricError> {
    if actual.len() != predicted.len() {
        return Err(MetricError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    let ss: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok((ss / actual.len() as f64).sqrt())
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check(actual, predicted)?;
    let s: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    Ok(s / actual.len() as f64)
}

/// Which extrema normalize the RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NrmseRange {
    /// `max(actual) - min(actual)`.
    #[default]
    Actual,
    /// `max(actual) - min(predicted)`, the formula taken literally.
    ActualMaxPredictedMin,
}

impl std::str::FromStr for NrmseRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "actual" => Ok(NrmseRange::Actual),
            "actual-max-predicted-min" => Ok(NrmseRange::ActualMaxPredictedMin),
            other => Err(format!(
                "unknown nrmse range {other:?} (expected actual or actual-max-predicted-min)"
            )),
        }
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn nrmse(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    nrmse_with(actual, predicted, NrmseRange::Actual)
}

pub fn nrmse_with(actual: &[f64], predicted: &[f64], range: NrmseRange) -> Result<f64, MetricError> {
    let r = rmse(actual, predicted)?;
    let hi = max_of(actual);
    let lo = match range {
        NrmseRange::Actual => min_of(actual),
        NrmseRange::ActualMaxPredictedMin => min_of(predicted),
    };
    if hi - lo <= 0.0 {
        return Err(MetricError::DegenerateRange(hi));
    }
    Ok(r / (hi - lo))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CustomerMetrics {
    pub rmse_kwh: f64,
    pub mae_kwh: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rmse_kwh: f64,
    /// `None` when the actual values span no range.
    pub nrmse: Option<f64>,
    pub mae_kwh: f64,
    pub n_points: usize,
    pub per_customer: BTreeMap<usize, CustomerMetrics>,
}

/// One evaluated day: customer index, actual and predicted curves.
pub type EvalDay = (usize, Vec<f64>, Vec<f64>);

impl EvalReport {
    /// Metrics pooled over every point of every day.
    pub fn from_days(days: &[EvalDay], range: NrmseRange) -> Result<Self, MetricError> {
        let mut actual = Vec::new();
        let mut predicted = Vec::new();
        let mut by_customer: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (c, a, p) in days {
            check(a, p)?;
            actual.extend_from_slice(a);
            predicted.extend_from_slice(p);
            let e = by_customer.entry(*c).or_default();
            e.0.extend_from_slice(a);
            e.1.extend_from_slice(p);
        }
        let nrmse = match nrmse_with(&actual, &predicted, range) {
            Ok(v) => Some(v),
            Err(MetricError::DegenerateRange(_)) => None,
            Err(e) => return Err(e),
        };
        let mut per_customer = BTreeMap::new();
        for (c, (a, p)) in by_customer {
            per_customer.insert(
                c,
                CustomerMetrics {
                    rmse_kwh: rmse(&a, &p)?,
                    mae_kwh: mae(&a, &p)?,
                    n_points: a.len(),
                },
            );
        }
        Ok(EvalReport {
            rmse_kwh: rmse(&actual, &predicted)?,
            nrmse,
            mae_kwh: mae(&actual, &predicted)?,
            n_points: actual.len(),
            per_customer,
        })
    }

    /// `key=value` lines, four decimals. Keys are prefixed with `prefix`.
    pub fn to_key_value(&self, prefix: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{prefix}rmse_kwh={:.4}", self.rmse_kwh);
        match self.nrmse {
            Some(v) => {
                let _ = writeln!(s, "{prefix}nrmse={v:.4}");
            }
            None => {
                let _ = writeln!(s, "{prefix}nrmse=undefined");
            }
        }
        let _ = writeln!(s, "{prefix}mae_kwh={:.4}", self.mae_kwh);
        let _ = writeln!(s, "{prefix}n_points={}", self.n_points);
        s
    }
}

/// Four-decimal JSON numbers for reports.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[1.0, 1.0], &[0.0, 3.0]).unwrap(), 1.5);
        let a: Vec<f64> = (0..=10).map(f64::from).collect();
        let p: Vec<f64> = a.iter().map(|v| v + 0.3).collect();
        let r = rmse(&a, &p).unwrap();
        assert!((nrmse(&a, &p).unwrap() - r / 10.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(rmse(&[], &[]), Err(MetricError::Empty));
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch { .. })));
        assert!(matches!(nrmse(&[2.0, 2.0], &[1.0, 1.0]), Err(MetricError::DegenerateRange(_))));
    }

    #[test]
    fn literal_range_reading() {
        let a = [0.0, 10.0];
        let p = [2.0, 10.0];
        let v = nrmse_with(&a, &p, NrmseRange::ActualMaxPredictedMin).unwrap();
        assert!((v - rmse(&a, &p).unwrap() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn report_pools_points() {
        let days = vec![
            (0, vec![0.0, 0.0], vec![3.0, 4.0]),
            (1, vec![1.0, 1.0], vec![1.0, 1.0]),
        ];
        let r = EvalReport::from_days(&days, NrmseRange::Actual).unwrap();
        assert_eq!(r.n_points, 4);
        assert!((r.rmse_kwh - 6.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.mae_kwh, 1.75);
        assert_eq!(r.per_customer[&1].rmse_kwh, 0.0);
        assert!(r.to_key_value("").contains("rmse_kwh=2.5000\n"));
    }
}
