use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::nn::{ConvLayerSpec, Padding, PoolSpec};

/// Kernel counts of the six convolution layers in each channel.
pub const KERNEL_COUNTS: [usize; 6] = [16, 24, 24, 64, 64, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolPlacement {
    /// Zero-based index of the conv layer the pool follows.
    pub after_layer: usize,
    pub pool: PoolSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub layers: Vec<ConvLayerSpec>,
    pub pools: Vec<PoolPlacement>,
}

impl ChannelConfig {
    pub fn pool_after(&self, layer: usize) -> Option<PoolSpec> {
        self.pools
            .iter()
            .find(|p| p.after_layer == layer)
            .map(|p| p.pool)
    }

    /// Output `[H, W, C]` for an `[h, w, 1]` input.
    pub fn output_shape(&self, h: usize, w: usize) -> Result<[usize; 3], ModelError> {
        let (mut h, mut w, mut c) = (h, w, 1);
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.in_channels != c {
                return Err(ModelError::Config(format!(
                    "layer {i}: in_channels {} but previous layer produces {c}",
                    layer.in_channels
                )));
            }
            (h, w) = layer.output_hw(h, w).ok_or_else(|| {
                ModelError::Config(format!("layer {i}: kernel larger than {h}x{w} input"))
            })?;
            c = layer.out_channels;
            if let Some(pool) = self.pool_after(i) {
                (h, w) = pool.output_hw(h, w);
                if h == 0 || w == 0 {
                    return Err(ModelError::Config(format!(
                        "pool after layer {i} reduces the map to nothing"
                    )));
                }
            }
        }
        Ok([h, w, c])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSizes {
    pub id: usize,
    pub month: usize,
    pub day: usize,
    pub week: usize,
}

impl FeatureSizes {
    pub fn total(&self) -> usize {
        self.id + self.month + self.day + self.week
    }
}

impl Default for FeatureSizes {
    fn default() -> Self {
        FeatureSizes {
            id: 62,
            month: 12,
            day: 31,
            week: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadCNNConfig {
    pub history_days: usize,
    pub slots_per_day: usize,
    /// `[1, N]` kernels; correlates slots within a day.
    pub horizontal: ChannelConfig,
    /// `[N, 1]` kernels; correlates the same slot across days.
    pub vertical: ChannelConfig,
    pub features: FeatureSizes,
    pub output_size: usize,
    /// Clamp predictions to be non-negative at inference time.
    #[serde(default)]
    pub clamp_output: bool,
}

fn channel(first: (usize, usize), rest: (usize, usize)) -> ChannelConfig {
    let mut layers = Vec::with_capacity(KERNEL_COUNTS.len());
    let mut cin = 1;
    for (i, &cout) in KERNEL_COUNTS.iter().enumerate() {
        let (kh, kw) = if i == 0 { first } else { rest };
        layers.push(ConvLayerSpec {
            kernel_height: kh,
            kernel_width: kw,
            in_channels: cin,
            out_channels: cout,
            padding: Padding::Same,
        });
        cin = cout;
    }
    let pools = (0..4)
        .map(|after_layer| PoolPlacement {
            after_layer,
            pool: PoolSpec::new(1, 2),
        })
        .collect();
    ChannelConfig { layers, pools }
}

impl Default for LoadCNNConfig {
    fn default() -> Self {
        default_config()
    }
}

/// The canonical architecture: `[1,7]`/`[4,1]` first layers, width-3
/// kernels afterwards, same padding, 1x2 pools after the first four layers
/// of both channels, and one linear dense head producing 48 values.
pub fn default_config() -> LoadCNNConfig {
    LoadCNNConfig {
        history_days: 7,
        slots_per_day: 48,
        horizontal: channel((1, 7), (1, 3)),
        vertical: channel((4, 1), (3, 1)),
        features: FeatureSizes::default(),
        output_size: 48,
        clamp_output: false,
    }
}

impl LoadCNNConfig {
    pub fn horizontal_output_shape(&self) -> Result<[usize; 3], ModelError> {
        self.horizontal
            .output_shape(self.history_days, self.slots_per_day)
    }

    pub fn vertical_output_shape(&self) -> Result<[usize; 3], ModelError> {
        self.vertical.output_shape(self.history_days, self.slots_per_day)
    }

    /// Length of the concatenated vector fed to the dense head.
    pub fn head_input_size(&self) -> Result<usize, ModelError> {
        let h: usize = self.horizontal_output_shape()?.iter().product();
        let v: usize = self.vertical_output_shape()?.iter().product();
        Ok(h + v + self.features.total())
    }

    /// Checks that all shapes compose.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.history_days == 0 || self.slots_per_day == 0 || self.output_size == 0 {
            return Err(ModelError::Config("input and output sizes must be positive".into()));
        }
        for (name, ch) in [("horizontal", &self.horizontal), ("vertical", &self.vertical)] {
            if ch.layers.is_empty() {
                return Err(ModelError::Config(format!("{name} channel has no layers")));
            }
            for (i, l) in ch.layers.iter().enumerate() {
                if l.kernel_height == 0 || l.kernel_width == 0 || l.out_channels == 0 {
                    return Err(ModelError::Config(format!("{name} layer {i}: zero-sized spec")));
                }
            }
            let mut seen = std::collections::BTreeSet::new();
            for p in &ch.pools {
                if p.after_layer >= ch.layers.len() || !seen.insert(p.after_layer) {
                    return Err(ModelError::Config(format!(
                        "{name} channel: bad pool placement after layer {}",
                        p.after_layer
                    )));
                }
                if p.pool.window_height == 0 || p.pool.window_width == 0 {
                    return Err(ModelError::Config(format!("{name} channel: empty pool window")));
                }
            }
        }
        self.head_input_size()?;
        Ok(())
    }

    /// Checks the structural invariants of the published network: six
    /// convolutions per channel with kernel counts 16, 24, 24, 64, 64, 64,
    /// four pools per channel, `[1, N]` horizontal and `[N, 1]` vertical kernels.
    pub fn check_architecture(&self) -> Result<(), ModelError> {
        self.validate()?;
        for (name, ch, horizontal) in [
            ("horizontal", &self.horizontal, true),
            ("vertical", &self.vertical, false),
        ] {
            let counts: Vec<usize> = ch.layers.iter().map(|l| l.out_channels).collect();
            if counts != KERNEL_COUNTS {
                return Err(ModelError::Config(format!(
                    "{name} channel kernel counts {counts:?}, expected {KERNEL_COUNTS:?}"
                )));
            }
            if ch.pools.len() != 4 {
                return Err(ModelError::Config(format!(
                    "{name} channel has {} pools, expected 4",
                    ch.pools.len()
                )));
            }
            for (i, l) in ch.layers.iter().enumerate() {
                let one_dim = if horizontal {
                    l.kernel_height == 1
                } else {
                    l.kernel_width == 1
                };
                if !one_dim {
                    return Err(ModelError::Config(format!(
                        "{name} layer {i}: kernel [{}, {}] is not one-dimensional along its axis",
                        l.kernel_height, l.kernel_width
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Learnable parameter count: `kh*kw*Cin*Cout + Cout` over every conv layer
/// plus the dense head.
pub fn param_count(config: &LoadCNNConfig) -> Result<usize, ModelError> {
    let conv: usize = config
        .horizontal
        .layers
        .iter()
        .chain(&config.vertical.layers)
        .map(ConvLayerSpec::param_count)
        .sum();
    let head = config.head_input_size()? * config.output_size + config.output_size;
    Ok(conv + head)
}
