//! Flat `key = value` run configuration. Later sources override earlier
//! ones: defaults, then the config file, then command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use loadcnn::data::SplitSpec;
use loadcnn::metrics::NrmseRange;
use loadcnn::pipeline::PipelineConfig;
use loadcnn::rng::{stream_seed, Stream};
use loadcnn::training::{OptimizerKind, TrainConfig};

use crate::error::CliError;

/// Every recognised key with its default, in echo order.
const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("batch_size", "64"),
    ("max_epochs", "65"),
    ("learning_rate", "0.0015"),
    ("decay_rate", "0.96"),
    ("validation_interval_steps", "100"),
    ("optimizer", "adam"),
    ("full_validation", "false"),
    ("max_steps", "0"),
    ("test_days", "30"),
    ("validation_days", "60"),
    ("validation_range_start", "8"),
    ("validation_range_end", "506"),
    ("stride_days", "1"),
    ("epoch_date", "2009-07-01"),
    ("max_missing_fraction", "0.05"),
    ("clamp_output", "false"),
    ("nrmse_range", "actual"),
    ("power_watts", ""),
    ("pue", "1.58"),
    ("trials", "1000"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !self.values.contains_key(key) {
            return Err(CliError::Usage(format!("unknown config key {key:?}")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies `key=value` text: blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{origin}:{}: expected key=value, got {raw:?}", n + 1))
            })?;
            self.set(k.trim(), v)
                .map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        for (k, v) in map {
            c.set(k, v)?;
        }
        Ok(c)
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.values.clone()
    }

    /// The resolved configuration, loadable with [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::from("# resolved loadcnn configuration\n");
        for (k, _) in KEYS {
            s.push_str(&format!("{k}={}\n", self.values[*k]));
        }
        s
    }

    fn raw(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .parse()
            .map_err(|e| CliError::Usage(format!("config key {key}={:?}: {e}", self.raw(key))))
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.parse("seed")
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let max_steps: usize = self.parse("max_steps")?;
        let tc = TrainConfig {
            batch_size: self.parse("batch_size")?,
            max_epochs: self.parse("max_epochs")?,
            learning_rate: self.parse("learning_rate")?,
            decay_rate: self.parse("decay_rate")?,
            validation_interval_steps: self.parse("validation_interval_steps")?,
            seed: self.seed()?,
            optimizer: self.parse::<OptimizerKind>("optimizer")?,
            full_validation: self.parse("full_validation")?,
            max_steps: (max_steps > 0).then_some(max_steps),
        };
        tc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(tc)
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, CliError> {
        let epoch: NaiveDate = self
            .raw("epoch_date")
            .parse()
            .map_err(|e| CliError::Usage(format!("config key epoch_date: {e}")))?;
        let stride_days: usize = self.parse("stride_days")?;
        if stride_days == 0 {
            return Err(CliError::Usage("stride_days must be at least 1".into()));
        }
        Ok(PipelineConfig {
            epoch,
            split: SplitSpec {
                test_days: self.parse("test_days")?,
                validation_days: self.parse("validation_days")?,
                validation_range: (
                    self.parse("validation_range_start")?,
                    self.parse("validation_range_end")?,
                ),
                seed: stream_seed(self.seed()?, Stream::Split),
            },
            stride_days,
            max_missing_fraction: self.parse("max_missing_fraction")?,
        })
    }

    pub fn clamp_output(&self) -> Result<bool, CliError> {
        self.parse("clamp_output")
    }

    pub fn nrmse_range(&self) -> Result<NrmseRange, CliError> {
        self.parse("nrmse_range")
    }

    pub fn power_watts(&self) -> Result<Option<f64>, CliError> {
        if self.raw("power_watts").is_empty() {
            Ok(None)
        } else {
            self.parse("power_watts").map(Some)
        }
    }

    pub fn pue(&self) -> Result<f64, CliError> {
        self.parse("pue")
    }

    pub fn trials(&self) -> Result<u64, CliError> {
        self.parse("trials")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use loadcnn::cost::{DEFAULT_PUE, DEFAULT_TRIALS};
    use loadcnn::pipeline::default_epoch;

    #[test]
    fn defaults_match_library() {
        let c = RunConfig::default();
        assert_eq!(c.train_config().unwrap(), TrainConfig::default());
        let p = c.pipeline_config().unwrap();
        assert_eq!(p.epoch, default_epoch());
        assert_eq!(p.split.test_days, SplitSpec::default().test_days);
        assert_eq!(c.pue().unwrap(), DEFAULT_PUE);
        assert_eq!(c.trials().unwrap(), DEFAULT_TRIALS);
        assert_eq!(c.power_watts().unwrap(), None);
    }

    #[test]
    fn text_round_trip_and_comments() {
        let mut c = RunConfig::default();
        c.apply_text("# desk\nseed = 7  # trailing\n\ntest_days=5\n", "inline").unwrap();
        assert_eq!(c.seed().unwrap(), 7);
        let mut d = RunConfig::default();
        d.apply_text(&c.to_text(), "echo").unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn bad_input_is_a_usage_error() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("nope=1", "x").is_err());
        assert!(c.apply_text("seed", "x").is_err());
        c.set("batch_size", "0").unwrap();
        assert!(c.train_config().is_err());
        c.set("batch_size", "abc").unwrap();
        assert!(c.train_config().is_err());
    }
}
