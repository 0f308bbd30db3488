//! Run configuration: defaults, an optional flat key=value config file,
//! and command-line overrides, in that precedence order.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

use nilshift::weights::Params;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}; expected csv or json")),
        }
    }
}

/// Fully resolved run configuration. `steps` stays optional because its
/// default differs per command (trajectory length vs suite depth).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: Params,
    pub seed: u64,
    pub steps: Option<u64>,
    pub horizon: u64,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

/// The merge-friendly, all-optional form.
#[derive(Debug, Clone, Default)]
pub struct PartialConfig {
    pub m: Option<f64>,
    pub k: Option<f64>,
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub horizon: Option<u64>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

impl PartialConfig {
    /// Parses the flat `key=value` file format. Blank lines and `#`
    /// comments are skipped; unknown keys are rejected.
    pub fn from_file_text(text: &str) -> Result<Self> {
        let mut cfg = PartialConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("config line {}: expected key=value", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let parse_err = || format!("config line {}: bad value for {key}", lineno + 1);
            match key {
                "M" => cfg.m = Some(value.parse().with_context(parse_err)?),
                "K" => cfg.k = Some(value.parse().with_context(parse_err)?),
                "seed" => cfg.seed = Some(value.parse().with_context(parse_err)?),
                "steps" => cfg.steps = Some(value.parse().with_context(parse_err)?),
                "horizon" => cfg.horizon = Some(value.parse().with_context(parse_err)?),
                "format" => {
                    cfg.format =
                        Some(value.parse().map_err(|e: String| anyhow::anyhow!(e)))
                            .transpose()
                            .with_context(parse_err)?
                }
                "out" => cfg.out = Some(PathBuf::from(value)),
                other => bail!("config line {}: unknown key {other:?}", lineno + 1),
            }
        }
        Ok(cfg)
    }

    /// Overlays `self` (higher precedence) on `base`.
    pub fn over(self, base: PartialConfig) -> PartialConfig {
        PartialConfig {
            m: self.m.or(base.m),
            k: self.k.or(base.k),
            seed: self.seed.or(base.seed),
            steps: self.steps.or(base.steps),
            horizon: self.horizon.or(base.horizon),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
        }
    }

    pub fn resolve(self) -> Result<RunConfig> {
        let m = self.m.unwrap_or(5.0);
        let k = self.k.unwrap_or(3.0);
        let params = Params::new(m, k).map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(RunConfig {
            params,
            seed: self.seed.unwrap_or(7),
            steps: self.steps,
            horizon: self.horizon.unwrap_or(4096),
            format: self.format,
            out: self.out,
        })
    }
}
