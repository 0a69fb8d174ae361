//! Energy and emissions accounting for training runs.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_PUE: f64 = 1.58;
pub const DEFAULT_TRIALS: u64 = 1000;
/// Pounds of CO2 per kWh.
pub const CO2_LBS_PER_KWH: f64 = 0.954;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("energy must be non-negative and finite, got {0}")]
    NegativeEnergy(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostParams {
    pub power_watts: f64,
    pub training_hours: f64,
    pub pue: f64,
    pub trials: u64,
}

impl CostParams {
    pub fn new(power_watts: f64, training_hours: f64) -> Self {
        CostParams {
            power_watts,
            training_hours,
            pue: DEFAULT_PUE,
            trials: DEFAULT_TRIALS,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for (name, value) in [
            ("power_watts", self.power_watts),
            ("training_hours", self.training_hours),
            ("pue", self.pue),
            ("trials", self.trials as f64),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(CostError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Total energy in kWh over all trials.
pub fn energy_consumption(p: &CostParams) -> Result<f64, CostError> {
    p.validate()?;
    Ok(p.power_watts * p.training_hours * p.pue * p.trials as f64 / 1000.0)
}

pub fn co2_emissions(ec_kwh: f64) -> Result<f64, CostError> {
    if !(ec_kwh >= 0.0 && ec_kwh.is_finite()) {
        return Err(CostError::NegativeEnergy(ec_kwh));
    }
    Ok(CO2_LBS_PER_KWH * ec_kwh)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub ec_kwh: f64,
    pub co2e_lbs: f64,
    pub inputs: CostParams,
}

impl CostReport {
    pub fn compute(inputs: CostParams) -> Result<Self, CostError> {
        let ec_kwh = energy_consumption(&inputs)?;
        Ok(CostReport {
            ec_kwh,
            co2e_lbs: co2_emissions(ec_kwh)?,
            inputs,
        })
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "power_watts={:.4}", self.inputs.power_watts);
        let _ = writeln!(s, "training_hours={:.4}", self.inputs.training_hours);
        let _ = writeln!(s, "pue={:.4}", self.inputs.pue);
        let _ = writeln!(s, "trials={}", self.inputs.trials);
        let _ = writeln!(s, "ec_kwh={:.4}", self.ec_kwh);
        let _ = writeln!(s, "co2e_lbs={:.4}", self.co2e_lbs);
        s
    }
}

/// Runs `f` and returns its result with the elapsed wall-clock hours.
pub fn measure_training_time<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() / 3600.0)
}
