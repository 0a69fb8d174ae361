//! Synthetic household load curves for desk-scale runs.
//!
//! Each customer has a base load, a morning and an evening bump with
//! customer-specific amplitude and timing, a winter-peaking seasonal factor,
//! and a weekend multiplier. Every day the bump sizes and timings jitter, and
//! random appliance spikes are added on top, so no two days are identical.
//! Values are rounded to watt-hours and capped at 5 kWh per half hour.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::readings::SLOTS_PER_DAY;
use super::series::CustomerSeries;

pub const MAX_HALF_HOUR_KWH: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_customers: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Calendar date of day index 1.
    pub epoch: NaiveDate,
    /// Saturday/Sunday load relative to weekdays.
    pub weekend_factor: f64,
    /// Mean of the exponential background noise, kWh.
    pub noise_mean: f64,
    /// Per-slot probability of an appliance spike.
    pub spike_probability: f64,
}

impl SynthConfig {
    pub fn new(n_customers: usize, n_days: usize, seed: u64) -> Self {
        SynthConfig {
            n_customers,
            n_days,
            seed,
            epoch: NaiveDate::from_ymd_opt(2009, 7, 1).expect("valid date"),
            weekend_factor: 1.25,
            noise_mean: 0.05,
            spike_probability: 0.02,
        }
    }
}

struct Household {
    base: f64,
    morning_amp: f64,
    morning_hour: f64,
    evening_amp: f64,
    evening_hour: f64,
    seasonal_amp: f64,
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((hour - centre) / width).powi(2)).exp()
}

/// Meter id used for synthetic customer `i`.
pub fn synthetic_meter_id(i: usize) -> String {
    (1000 + i).to_string()
}

pub fn gen_synthetic(config: &SynthConfig) -> Vec<CustomerSeries> {
    assert!(config.n_customers >= 1, "need at least one customer");
    assert!(config.n_days >= 9, "need at least nine days");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Exp::new(1.0 / config.noise_mean).expect("positive noise mean");
    let jitter = Normal::new(0.0, 0.75).expect("valid std");

    (0..config.n_customers)
        .map(|c| {
            let h = Household {
                base: rng.random_range(0.1..0.3),
                morning_amp: rng.random_range(0.2..0.8),
                morning_hour: rng.random_range(6.5..9.0),
                evening_amp: rng.random_range(0.5..1.5),
                evening_hour: rng.random_range(17.0..20.5),
                seasonal_amp: rng.random_range(0.1..0.3),
            };
            let mut values = Vec::with_capacity(config.n_days * SLOTS_PER_DAY);
            for d in 0..config.n_days {
                let date = config.epoch + Days::new(d as u64);
                let doy = date.ordinal0() as f64;
                // Peaks mid-January.
                let season = 1.0
                    + h.seasonal_amp * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.25).cos();
                let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
                let modulation = season * if weekend { config.weekend_factor } else { 1.0 };
                let morning_amp = h.morning_amp * rng.random_range(0.6..1.4);
                let evening_amp = h.evening_amp * rng.random_range(0.6..1.4);
                let morning_hour = h.morning_hour + jitter.sample(&mut rng);
                let evening_hour = h.evening_hour + jitter.sample(&mut rng);
                for s in 0..SLOTS_PER_DAY {
                    let hour = (s as f64 + 0.5) / 2.0;
                    let mut v = h.base
                        + morning_amp * bump(hour, morning_hour, 1.0)
                        + evening_amp * bump(hour, evening_hour, 1.5)
                        + noise.sample(&mut rng);
                    if rng.random_bool(config.spike_probability) {
                        v += rng.random_range(0.5..2.0);
                    }
                    let v = (v * modulation).min(MAX_HALF_HOUR_KWH);
                    values.push((v * 1000.0).round() / 1000.0);
                }
            }
            CustomerSeries {
                customer_index: c,
                meter_id: synthetic_meter_id(c),
                start_date: config.epoch,
                start_day: 1,
                values,
            }
        })
        .collect()
}
