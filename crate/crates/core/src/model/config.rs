use crate::error::{Error, Result};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Number of contracting (and expanding) blocks, `N`.
    pub levels: usize,
    /// Output channels of the first contracting block, `c_i`.
    pub first_channels: usize,
    /// Padded convolution kernel inside CCB/ECB.
    pub kernel_p: usize,
    /// Strided downsampling kernel.
    pub kernel_s: usize,
    /// Strided transposed upsampling kernel.
    pub kernel_st: usize,
    /// Down/upsampling stride.
    pub stride: usize,
    /// Entry kernel of the ensemble-averaging block.
    pub ensemble_kernel: usize,
    pub inception_kernels: Vec<usize>,
    pub leaky_slope: f64,
    /// Window length `w` in samples.
    pub input_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            levels: 5,
            first_channels: 32,
            kernel_p: 3,
            kernel_s: 5,
            kernel_st: 5,
            stride: 2,
            ensemble_kernel: 7,
            inception_kernels: vec![1, 3, 5],
            leaky_slope: 0.01,
            input_len: 2500,
        }
    }
}

/// Per-level lengths and channel counts derived from a [`ModelConfig`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelPlan {
    /// `lengths[0]` is the input length, `lengths[n]` the output length of CCB `n`.
    pub lengths: Vec<usize>,
    /// `encoder_channels[0]` is the ensemble width, `encoder_channels[n]` the output of CCB `n`.
    pub encoder_channels: Vec<usize>,
    /// Output channels of ECB `1..=N`, in decoder order.
    pub decoder_channels: Vec<usize>,
}

impl LevelPlan {
    pub fn bottleneck_channels(&self) -> usize {
        *self.encoder_channels.last().unwrap()
    }

    pub fn bottleneck_len(&self) -> usize {
        *self.lengths.last().unwrap()
    }
}

impl ModelConfig {
    /// Width of the ensemble block, `c_i / 2`, so that the first CCB's
    /// channel doubling lands on `c_i`.
    pub fn ensemble_channels(&self) -> usize {
        self.first_channels / 2
    }

    /// `2N + 2`: N contracting, N expanding, ensemble, denoising.
    pub fn block_count(&self) -> usize {
        2 * self.levels + 2
    }

    pub fn plan(&self) -> LevelPlan {
        let n = self.levels;
        let mut lengths = vec![self.input_len];
        for _ in 0..n {
            lengths.push(lengths.last().unwrap().div_ceil(self.stride.max(1)));
        }
        let encoder_channels: Vec<usize> = (0..=n).map(|l| self.ensemble_channels() << l).collect();
        let mut decoder_channels = Vec::with_capacity(n);
        let mut width = encoder_channels[n];
        for level in 0..n {
            // the first ECB sees only the bottleneck; later ones see decoder + projected skip
            let input = if level == 0 { width } else { 2 * width };
            width = input / 4;
            decoder_channels.push(width);
        }
        LevelPlan {
            lengths,
            encoder_channels,
            decoder_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, msg: String| Err(Error::config(format!("model.{key}"), msg));
        if self.levels == 0 {
            return fail("levels", "at least one level is required".into());
        }
        if self.first_channels == 0 || !self.first_channels.is_multiple_of(4) {
            return fail(
                "first_channels",
                format!(
                    "must be a positive multiple of 4 so every expanding block divides evenly, got {}",
                    self.first_channels
                ),
            );
        }
        if self.inception_kernels.is_empty() {
            return fail(
                "inception_kernels",
                "at least one branch is required".into(),
            );
        }
        if self.first_channels < self.inception_kernels.len() {
            return fail(
                "first_channels",
                format!(
                    "{} channels cannot feed {} inception branches",
                    self.first_channels,
                    self.inception_kernels.len()
                ),
            );
        }
        for (key, k) in [
            ("kernel_p", self.kernel_p),
            ("kernel_s", self.kernel_s),
            ("kernel_st", self.kernel_st),
            ("ensemble_kernel", self.ensemble_kernel),
        ] {
            if k % 2 == 0 {
                return fail(key, format!("kernel sizes must be odd, got {k}"));
            }
        }
        if let Some(k) = self.inception_kernels.iter().find(|&&k| k % 2 == 0) {
            return fail(
                "inception_kernels",
                format!("kernel sizes must be odd, got {k}"),
            );
        }
        if self.stride == 0 {
            return fail("stride", "must be >= 1".into());
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope.is_finite()) {
            return fail("leaky_slope", "must be >= 0".into());
        }
        let plan = self.plan();
        if plan.bottleneck_len() < 4 {
            return fail(
                "input_len",
                format!(
                    "bottleneck length {} (input {} / stride {}^{}) must be >= 4",
                    plan.bottleneck_len(),
                    self.input_len,
                    self.stride,
                    self.levels
                ),
            );
        }
        Ok(())
    }

    /// `key=value` pairs with `model.` prefixed keys.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let kernels = self
            .inception_kernels
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",");
        [
            ("levels", self.levels.to_string()),
            ("first_channels", self.first_channels.to_string()),
            ("kernel_p", self.kernel_p.to_string()),
            ("kernel_s", self.kernel_s.to_string()),
            ("kernel_st", self.kernel_st.to_string()),
            ("stride", self.stride.to_string()),
            ("ensemble_kernel", self.ensemble_kernel.to_string()),
            ("inception_kernels", kernels),
            ("leaky_slope", self.leaky_slope.to_string()),
            ("input_len", self.input_len.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("model.{k}"), v))
        .collect()
    }

    /// Sets one field from its key (with or without the `model.` prefix).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let field = key.strip_prefix("model.").unwrap_or(key);
        let full = format!("model.{field}");
        let uint = |v: &str| {
            v.trim().parse::<usize>().map_err(|_| {
                Error::config(&full, format!("expected an unsigned integer, got `{v}`"))
            })
        };
        match field {
            "levels" => self.levels = uint(value)?,
            "first_channels" => self.first_channels = uint(value)?,
            "kernel_p" => self.kernel_p = uint(value)?,
            "kernel_s" => self.kernel_s = uint(value)?,
            "kernel_st" => self.kernel_st = uint(value)?,
            "stride" => self.stride = uint(value)?,
            "ensemble_kernel" => self.ensemble_kernel = uint(value)?,
            "input_len" => self.input_len = uint(value)?,
            "inception_kernels" => {
                self.inception_kernels = value.split(',').map(uint).collect::<Result<Vec<_>>>()?
            }
            "leaky_slope" => {
                self.leaky_slope = value.trim().parse().map_err(|_| {
                    Error::config(&full, format!("expected a number, got `{value}`"))
                })?
            }
            _ => return Err(Error::config(full, "unknown model key")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_512_bottleneck_and_12_blocks() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.block_count(), 12);
        let plan = cfg.plan();
        assert_eq!(plan.bottleneck_channels(), 512);
        assert_eq!(plan.encoder_channels, vec![16, 32, 64, 128, 256, 512]);
        assert_eq!(plan.decoder_channels, vec![128, 64, 32, 16, 8]);
    }

    #[test]
    fn lengths_use_ceiling_division() {
        let cfg = ModelConfig {
            levels: 3,
            first_channels: 8,
            input_len: 101,
            ..ModelConfig::default()
        };
        assert_eq!(cfg.plan().lengths, vec![101, 51, 26, 13]);
    }

    #[test]
    fn invalid_configs_name_the_key() {
        let bad = |cfg: ModelConfig, key: &str| match cfg.validate() {
            Err(Error::Config { key: k, .. }) => assert_eq!(k, key),
            other => panic!("expected config error for {key}, got {other:?}"),
        };
        bad(
            ModelConfig {
                levels: 0,
                ..Default::default()
            },
            "model.levels",
        );
        bad(
            ModelConfig {
                first_channels: 6,
                ..Default::default()
            },
            "model.first_channels",
        );
        bad(
            ModelConfig {
                kernel_p: 4,
                ..Default::default()
            },
            "model.kernel_p",
        );
        bad(
            ModelConfig {
                inception_kernels: vec![1, 2],
                ..Default::default()
            },
            "model.inception_kernels",
        );
        bad(
            ModelConfig {
                input_len: 60,
                ..Default::default()
            },
            "model.input_len",
        );
    }

    #[test]
    fn pairs_round_trip() {
        let cfg = ModelConfig {
            levels: 3,
            first_channels: 8,
            inception_kernels: vec![3, 7],
            leaky_slope: 0.2,
            input_len: 200,
            ..Default::default()
        };
        let mut back = ModelConfig::default();
        for (k, v) in cfg.to_pairs() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(back, cfg);
        assert!(back.set("model.depth", "3").is_err());
    }
}
