//! Text format for half-hourly meter readings.
//!
//! One record per line: `meter_id,daycode,kwh`. The daycode packs a 1-based
//! day index (leading digits) and a half-hour slot 1..=48 (last two digits),
//! so `19503` is day 195, slot 3. Lines starting with `#` and blank lines are
//! ignored. Whitespace is also accepted as a field separator.

use std::fmt::Write as _;
use std::io::BufRead;

use super::DataError;

pub const SLOTS_PER_DAY: usize = 48;

#[derive(Debug, Clone, PartialEq)]
pub struct MeterReading {
    pub meter_id: String,
    /// Days since the dataset epoch, 1-based.
    pub day_index: u32,
    /// Half-hour of the day, 1..=48.
    pub slot: u8,
    pub kwh: f64,
}

impl MeterReading {
    pub fn daycode(&self) -> u32 {
        self.day_index * 100 + self.slot as u32
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<MeterReading, DataError> {
    let err = |msg: String| DataError::Parse {
        line: line_no,
        message: msg,
    };
    let fields: Vec<&str> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .collect();
    if fields.len() != 3 {
        return Err(err(format!("expected 3 fields, found {}", fields.len())));
    }
    let code: u32 = fields[1]
        .parse()
        .map_err(|_| err(format!("bad daycode {:?}", fields[1])))?;
    let day_index = code / 100;
    let slot = code % 100;
    if day_index == 0 {
        return Err(err(format!("daycode {code} has day index 0")));
    }
    if !(1..=SLOTS_PER_DAY as u32).contains(&slot) {
        return Err(DataError::SlotOutOfRange {
            line: line_no,
            slot,
        });
    }
    let kwh: f64 = fields[2]
        .parse()
        .map_err(|_| err(format!("bad kWh value {:?}", fields[2])))?;
    if !kwh.is_finite() || kwh < 0.0 {
        return Err(err(format!("kWh value {kwh} must be finite and non-negative")));
    }
    Ok(MeterReading {
        meter_id: fields[0].to_string(),
        day_index,
        slot: slot as u8,
        kwh,
    })
}

/// Parses every record, preserving input order. Line numbers are 1-based.
pub fn parse_readings<R: BufRead>(reader: R) -> Result<Vec<MeterReading>, DataError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push(parse_line(trimmed, i + 1)?);
    }
    Ok(out)
}

pub fn parse_readings_str(text: &str) -> Result<Vec<MeterReading>, DataError> {
    parse_readings(text.as_bytes())
}

pub fn format_reading(r: &MeterReading) -> String {
    format!("{},{:03}{:02},{}", r.meter_id, r.day_index, r.slot, r.kwh)
}

/// Writes records in the text format, one per line with LF endings.
pub fn serialize_readings(readings: &[MeterReading]) -> String {
    let mut s = String::with_capacity(readings.len() * 20);
    for r in readings {
        let _ = writeln!(s, "{}", format_reading(r));
    }
    s
}
