//! Dense per-customer series built from raw readings.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use chrono::{Days, NaiveDate};
use sha2::{Digest, Sha256};

use super::readings::{MeterReading, SLOTS_PER_DAY};
use super::DataError;

#[derive(Debug, Clone, PartialEq)]
pub struct CustomerSeries {
    pub customer_index: usize,
    pub meter_id: String,
    /// Calendar date of `values[0..48]`.
    pub start_date: NaiveDate,
    /// Dataset day index (1-based) of the first day.
    pub start_day: u32,
    /// Half-hourly kWh, `48 * day_count` long.
    pub values: Vec<f64>,
}

impl CustomerSeries {
    pub fn day_count(&self) -> usize {
        self.values.len() / SLOTS_PER_DAY
    }

    pub fn day(&self, d: usize) -> &[f64] {
        &self.values[d * SLOTS_PER_DAY..(d + 1) * SLOTS_PER_DAY]
    }

    pub fn date_of(&self, d: usize) -> NaiveDate {
        self.start_date + Days::new(d as u64)
    }

    /// Position of `date` within the series, if covered.
    pub fn offset_of(&self, date: NaiveDate) -> Option<usize> {
        let d = (date - self.start_date).num_days();
        (d >= 0 && (d as usize) < self.day_count()).then_some(d as usize)
    }

    /// Readings for this series, in day/slot order.
    pub fn to_readings(&self) -> Vec<MeterReading> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &kwh)| MeterReading {
                meter_id: self.meter_id.clone(),
                day_index: self.start_day + (i / SLOTS_PER_DAY) as u32,
                slot: (i % SLOTS_PER_DAY + 1) as u8,
                kwh,
            })
            .collect()
    }
}

/// Numeric meter ids sort numerically, others lexically after them.
pub fn compare_meter_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Stable customer index <-> meter id mapping.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    meter_ids: Vec<String>,
}

impl IdMap {
    pub fn new(mut meter_ids: Vec<String>) -> Self {
        meter_ids.sort_by(|a, b| compare_meter_ids(a, b));
        meter_ids.dedup();
        IdMap { meter_ids }
    }

    pub fn len(&self) -> usize {
        self.meter_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meter_ids.is_empty()
    }

    pub fn meter_id(&self, index: usize) -> Option<&str> {
        self.meter_ids.get(index).map(String::as_str)
    }

    pub fn index_of(&self, meter_id: &str) -> Option<usize> {
        self.meter_ids.iter().position(|m| m == meter_id)
    }

    /// `index,meter_id` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, m) in self.meter_ids.iter().enumerate() {
            let _ = writeln!(s, "{i},{m}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, DataError> {
        let mut ids = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (idx, id) = line.split_once(',').ok_or_else(|| DataError::Parse {
                line: n + 1,
                message: "expected index,meter_id".into(),
            })?;
            let idx: usize = idx.trim().parse().map_err(|_| DataError::Parse {
                line: n + 1,
                message: format!("bad index {idx:?}"),
            })?;
            if idx != ids.len() {
                return Err(DataError::Parse {
                    line: n + 1,
                    message: format!("index {idx} out of sequence"),
                });
            }
            ids.push(id.trim().to_string());
        }
        Ok(IdMap { meter_ids: ids })
    }

    /// SHA-256 of [`IdMap::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Debug, Clone)]
pub struct SeriesOptions {
    /// Calendar date of day index 1.
    pub epoch: NaiveDate,
    /// Inclusive day-index range every series must cover. Defaults to the
    /// span of all readings.
    pub day_range: Option<(u32, u32)>,
    pub allow_list: Option<HashSet<String>>,
    /// Customers missing more than this fraction of slots are dropped.
    pub max_missing_fraction: f64,
}

impl SeriesOptions {
    pub fn new(epoch: NaiveDate) -> Self {
        SeriesOptions {
            epoch,
            day_range: None,
            allow_list: None,
            max_missing_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedCustomer {
    pub meter_id: String,
    pub missing_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct SeriesSet {
    pub series: Vec<CustomerSeries>,
    pub id_map: IdMap,
    pub dropped: Vec<DroppedCustomer>,
    /// Number of slots repaired by the gap policy across kept customers.
    pub filled_slots: usize,
}

/// Fills `None` slots from the same slot a week earlier, else a day earlier,
/// else 0. Earlier repairs feed later ones.
fn fill_gaps(slots: &[Option<f64>]) -> Vec<f64> {
    const WEEK: usize = 7 * SLOTS_PER_DAY;
    let mut out = Vec::with_capacity(slots.len());
    for (i, v) in slots.iter().enumerate() {
        let value = match v {
            Some(x) => *x,
            None if i >= WEEK => out[i - WEEK],
            None if i >= SLOTS_PER_DAY => out[i - SLOTS_PER_DAY],
            None => 0.0,
        };
        out.push(value);
    }
    out
}

/// Groups readings into one dense series per customer. Customer indices
/// follow sorted meter-id order over the customers that survive filtering.
pub fn build_series(readings: &[MeterReading], options: &SeriesOptions) -> Result<SeriesSet, DataError> {
    let keep = |r: &MeterReading| {
        options
            .allow_list
            .as_ref()
            .is_none_or(|allow| allow.contains(&r.meter_id))
    };
    let (first, last) = match options.day_range {
        Some(range) => range,
        None => readings
            .iter()
            .filter(|r| keep(r))
            .fold(None, |acc: Option<(u32, u32)>, r| {
                Some(match acc {
                    None => (r.day_index, r.day_index),
                    Some((a, b)) => (a.min(r.day_index), b.max(r.day_index)),
                })
            })
            .ok_or(DataError::NoData)?,
    };
    if first == 0 || last < first {
        return Err(DataError::InvalidRange { first, last });
    }
    let days = (last - first + 1) as usize;
    let slots = days * SLOTS_PER_DAY;

    let mut grid: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    let mut seen: HashMap<(&str, u32, u8), ()> = HashMap::new();
    for r in readings.iter().filter(|r| keep(r)) {
        if seen.insert((r.meter_id.as_str(), r.day_index, r.slot), ()).is_some() {
            return Err(DataError::Duplicate {
                meter_id: r.meter_id.clone(),
                day_index: r.day_index,
                slot: r.slot,
            });
        }
        let cells = grid
            .entry(r.meter_id.as_str())
            .or_insert_with(|| vec![None; slots]);
        if r.day_index < first || r.day_index > last {
            continue;
        }
        let i = (r.day_index - first) as usize * SLOTS_PER_DAY + (r.slot as usize - 1);
        cells[i] = Some(r.kwh);
    }

    let mut kept: Vec<(&str, Vec<f64>, usize)> = Vec::new();
    let mut dropped = Vec::new();
    for (meter_id, cells) in grid {
        let missing = cells.iter().filter(|c| c.is_none()).count();
        let fraction = missing as f64 / slots as f64;
        if fraction > options.max_missing_fraction {
            log::warn!(
                "dropping customer {meter_id}: {:.1}% of slots missing",
                fraction * 100.0
            );
            dropped.push(DroppedCustomer {
                meter_id: meter_id.to_string(),
                missing_fraction: fraction,
            });
            continue;
        }
        kept.push((meter_id, fill_gaps(&cells), missing));
    }
    kept.sort_by(|a, b| compare_meter_ids(a.0, b.0));

    let id_map = IdMap::new(kept.iter().map(|k| k.0.to_string()).collect());
    let start_date = options.epoch + Days::new(first as u64 - 1);
    let filled_slots = kept.iter().map(|k| k.2).sum();
    let series = kept
        .into_iter()
        .enumerate()
        .map(|(customer_index, (meter_id, values, _))| CustomerSeries {
            customer_index,
            meter_id: meter_id.to_string(),
            start_date,
            start_day: first,
            values,
        })
        .collect();
    Ok(SeriesSet {
        series,
        id_map,
        dropped,
        filled_slots,
    })
}
