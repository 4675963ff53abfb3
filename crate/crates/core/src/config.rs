//! Run configuration as plain `key=value` text.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SwitchMode {
    /// Route each sentence to a single memory cell.
    Hard,
    /// Mix all cells by predicted era probability.
    Soft,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FusionMode {
    Sum,
    Concat,
}

impl FromStr for SwitchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(SwitchMode::Hard),
            "soft" => Ok(SwitchMode::Soft),
            _ => Err(Error::Config(format!(
                "switch_mode must be hard or soft, got {s:?}"
            ))),
        }
    }
}

impl FromStr for FusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(FusionMode::Sum),
            "concat" => Ok(FusionMode::Concat),
            _ => Err(Error::Config(format!(
                "fusion must be sum or concat, got {s:?}"
            ))),
        }
    }
}

impl fmt::Display for SwitchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwitchMode::Hard => "hard",
            SwitchMode::Soft => "soft",
        })
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Sum => "sum",
            FusionMode::Concat => "concat",
        })
    }
}

/// Parse a `switch+fusion` pair such as `hard+concat`.
pub fn parse_mode_pair(s: &str) -> Result<(SwitchMode, FusionMode)> {
    let (a, b) = s
        .split_once('+')
        .ok_or_else(|| Error::Config(format!("mode must look like hard+concat, got {s:?}")))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

/// Every tunable of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    /// Weight of the segmentation loss; the era loss gets `1 - alpha`.
    pub alpha: f64,
    pub d_e: usize,
    /// Hidden size; also the key and value embedding size. Must be even.
    pub d_a: usize,
    pub eras: usize,
    pub switch_mode: SwitchMode,
    pub fusion: FusionMode,
    pub max_ngram: usize,
    pub ngram_min_count: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub max_len: usize,
    /// Global gradient-norm clip.
    pub clip: f64,
    /// When false the memory output is forced to zero (ablation).
    pub memory: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            d_e: 64,
            d_a: 64,
            eras: 4,
            switch_mode: SwitchMode::Hard,
            fusion: FusionMode::Concat,
            max_ngram: crate::lexicon::DEFAULT_MAX_NGRAM,
            ngram_min_count: 10,
            lr: 1e-3,
            epochs: 10,
            batch: 8,
            seed: 42,
            max_len: crate::corpus::DEFAULT_MAX_LEN,
            clip: 5.0,
            memory: true,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "alpha",
    "d_e",
    "d_a",
    "eras",
    "switch_mode",
    "fusion",
    "max_ngram",
    "ngram_min_count",
    "lr",
    "epochs",
    "batch",
    "seed",
    "max_len",
    "clip",
    "memory",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

impl Config {
    /// Apply one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "alpha" => self.alpha = num(key, value)?,
            "d_e" => self.d_e = num(key, value)?,
            "d_a" => self.d_a = num(key, value)?,
            "eras" => self.eras = num(key, value)?,
            "switch_mode" => self.switch_mode = value.parse()?,
            "fusion" => self.fusion = value.parse()?,
            "max_ngram" => self.max_ngram = num(key, value)?,
            "ngram_min_count" => self.ngram_min_count = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "clip" => self.clip = num(key, value)?,
            "memory" => {
                self.memory = match value {
                    "on" | "true" => true,
                    "off" | "false" => false,
                    _ => {
                        return Err(Error::Config(format!(
                            "memory must be on or off, got {value:?}"
                        )))
                    }
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Apply `key=value` lines on top of `self`. Blank lines and `#` comments
    /// are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail("alpha must lie in [0, 1]");
        }
        if self.d_a == 0 || !self.d_a.is_multiple_of(2) {
            return fail("d_a must be positive and even");
        }
        if self.d_e == 0 {
            return fail("d_e must be positive");
        }
        if self.eras < 2 {
            return fail("eras must be at least 2");
        }
        if self.max_ngram == 0 || self.ngram_min_count == 0 {
            return fail("max_ngram and ngram_min_count must be at least 1");
        }
        if self.lr.is_nan() || self.lr <= 0.0 || self.epochs == 0 || self.batch == 0 {
            return fail("lr, epochs and batch must be positive");
        }
        if self.max_len == 0 || self.clip.is_nan() || self.clip <= 0.0 {
            return fail("max_len and clip must be positive");
        }
        Ok(())
    }

    /// Fully resolved config, one `key=value` per line in a fixed order.
    pub fn to_text(&self) -> String {
        let v = |k: &str| -> String {
            match k {
                "alpha" => self.alpha.to_string(),
                "d_e" => self.d_e.to_string(),
                "d_a" => self.d_a.to_string(),
                "eras" => self.eras.to_string(),
                "switch_mode" => self.switch_mode.to_string(),
                "fusion" => self.fusion.to_string(),
                "max_ngram" => self.max_ngram.to_string(),
                "ngram_min_count" => self.ngram_min_count.to_string(),
                "lr" => self.lr.to_string(),
                "epochs" => self.epochs.to_string(),
                "batch" => self.batch.to_string(),
                "seed" => self.seed.to_string(),
                "max_len" => self.max_len.to_string(),
                "clip" => self.clip.to_string(),
                "memory" => if self.memory { "on" } else { "off" }.to_string(),
                _ => unreachable!(),
            }
        };
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k}={}\n", v(k)))
            .collect()
    }
}
