//! Run configuration: a flat key=value text file plus the two built-in
//! profiles.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ppod_core::protocol::{GatewayConfig, ProtocolConfig};
use ppod_core::ring::Ring;

/// Everything needed to run a session, minus the dataset itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Ring bitwidth l.
    pub bits: u32,
    /// Fractional bits l_D of the fixed-point encoding.
    pub frac_bits: u32,
    pub window: usize,
    pub slide: usize,
    pub k: usize,
    /// Squared distance threshold in the rounded integer domain; 0 means
    /// "calibrate from the initial window".
    pub threshold: u64,
    /// Query radius (squared, rounded domain) used for generated queries.
    pub epsilon: u64,
    /// Clamp out-of-bound coordinates instead of rejecting.
    pub clamp: bool,
}

impl RunConfig {
    /// Desk-scale profile: small enough for exhaustive oracle checking.
    /// A 32-bit ring with 12 fractional bits keeps squared distances free
    /// of wraparound up to 16 dimensions while halving circuit sizes.
    pub fn desk() -> RunConfig {
        RunConfig {
            bits: 32,
            frac_bits: 12,
            window: 40,
            slide: 5,
            k: 5,
            threshold: 0,
            epsilon: 0,
            clamp: true,
        }
    }

    /// Full-scale profile with the default deployment parameters (the
    /// `paper` CLI profile).
    pub fn full_scale() -> RunConfig {
        RunConfig {
            bits: 64,
            frac_bits: 13,
            window: 400,
            slide: 20,
            k: 50,
            threshold: 25_000,
            epsilon: 0,
            clamp: true,
        }
    }

    pub fn profile(name: &str) -> Result<RunConfig> {
        match name {
            "desk" => Ok(RunConfig::desk()),
            "paper" => Ok(RunConfig::full_scale()),
            other => bail!("unknown profile '{other}' (expected desk or paper)"),
        }
    }

    pub fn protocol(&self) -> Result<ProtocolConfig> {
        let cfg = ProtocolConfig {
            ring: Ring::new(self.bits).map_err(|e| anyhow::anyhow!("bad bitwidth: {e:?}"))?,
            k: self.k,
            window: self.window,
            slide: self.slide,
        };
        cfg.validate().map_err(|e| anyhow::anyhow!("bad parameters: {e:?}"))?;
        Ok(cfg)
    }

    /// Builds the gateway view for a dataset with the given bounds.
    pub fn gateway(&self, min: Vec<f64>, max: Vec<f64>) -> Result<GatewayConfig> {
        let gw = GatewayConfig {
            ring: Ring::new(self.bits).map_err(|e| anyhow::anyhow!("bad bitwidth: {e:?}"))?,
            frac_bits: self.frac_bits,
            min,
            max,
            clamp: self.clamp,
        };
        gw.wrap_check().map_err(|e| anyhow::anyhow!("precision check failed: {e:?}"))?;
        Ok(gw)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bits = {}", self.bits);
        let _ = writeln!(s, "frac_bits = {}", self.frac_bits);
        let _ = writeln!(s, "window = {}", self.window);
        let _ = writeln!(s, "slide = {}", self.slide);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "threshold = {}", self.threshold);
        let _ = writeln!(s, "epsilon = {}", self.epsilon);
        let _ = writeln!(s, "clamp = {}", self.clamp);
        s
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::desk();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("expected key = value on line {}", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let ctx = || format!("bad value for {key} on line {}", lineno + 1);
            match key {
                "bits" => cfg.bits = value.parse().with_context(ctx)?,
                "frac_bits" => cfg.frac_bits = value.parse().with_context(ctx)?,
                "window" => cfg.window = value.parse().with_context(ctx)?,
                "slide" => cfg.slide = value.parse().with_context(ctx)?,
                "k" => cfg.k = value.parse().with_context(ctx)?,
                "threshold" => cfg.threshold = value.parse().with_context(ctx)?,
                "epsilon" => cfg.epsilon = value.parse().with_context(ctx)?,
                "clamp" => cfg.clamp = value.parse().with_context(ctx)?,
                other => bail!("unknown config key '{other}' on line {}", lineno + 1),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        RunConfig::parse(&text)
    }
}
