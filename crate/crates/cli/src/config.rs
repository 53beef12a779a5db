//! Layered defaults: built-in TOML, then an optional user file, then the
//! `DRIVERSE_SEED` environment variable. Command-line flags are applied last
//! by each subcommand.

use std::path::Path;

use anyhow::{bail, Context, Result};
use driverse_core::tsa::{AnchorRegion, TsaConfig};
use serde::{Deserialize, Serialize};
use toml::Table;

const BUILTIN: &str = include_str!("../config/defaults.toml");

pub const SEED_ENV: &str = "DRIVERSE_SEED";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub synth: SynthDefaults,
    pub trend: TrendDefaults,
    pub tsa: TsaDefaults,
    pub dwg: DwgDefaults,
    pub lma: LmaDefaults,
    pub gae: GaeDefaults,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthDefaults {
    pub kind: String,
    pub speed: f64,
    pub duration: f64,
    pub frame_rate: f64,
    pub seed: u64,
    pub dynamic_objects: usize,
    pub latent_channels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrendDefaults {
    pub stationary_eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsaDefaults {
    pub lambda: f64,
    pub trail_depth: usize,
    pub point_radius: f64,
    pub anchor_count: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub anchor_height: f64,
    pub seed: u64,
}

impl TsaDefaults {
    pub fn tsa(&self) -> TsaConfig {
        TsaConfig {
            lambda: self.lambda,
            trail_depth: self.trail_depth,
            point_radius: self.point_radius,
            anchor_count: self.anchor_count,
        }
    }

    pub fn region(&self) -> AnchorRegion {
        AnchorRegion {
            radius_min: self.radius_min,
            radius_max: self.radius_max,
            height: self.anchor_height,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwgDefaults {
    pub window: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmaDefaults {
    pub stride: f64,
    pub motion_threshold: f64,
    pub sample_count: usize,
    pub seed: u64,
    pub gradcheck_step: f64,
    pub gradcheck_tolerance: f64,
    pub gradcheck_max_entries: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaeDefaults {
    pub frame_rate: f64,
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl Config {
    pub fn load(user: Option<&Path>, seed_env: Option<&str>) -> Result<Self> {
        let mut table: Table = BUILTIN.parse().context("built-in defaults")?;
        if let Some(path) = user {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            let over: Table = text.parse().with_context(|| format!("parsing config {}", path.display()))?;
            merge(&mut table, over);
        }
        let mut cfg: Config = table.try_into().context("config does not match the expected layout")?;
        if let Some(raw) = seed_env {
            let seed: u64 = match raw.trim().parse() {
                Ok(s) => s,
                Err(_) => bail!("{SEED_ENV} must be an unsigned integer, got {raw:?}"),
            };
            cfg.synth.seed = seed;
            cfg.tsa.seed = seed;
            cfg.lma.seed = seed;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_defaults_parse() {
        let c = Config::load(None, None).unwrap();
        assert_eq!(c.dwg.window, 81);
        assert_eq!(c.dwg.threshold, 0.6);
        assert_eq!(c.tsa.anchor_count, 1024);
        assert_eq!(c.lma.stride, 8.0);
    }

    #[test]
    fn partial_user_file_and_seed_env_override() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[tsa]\nlambda = 0.2\n").unwrap();
        let c = Config::load(Some(&p), Some("17")).unwrap();
        assert_eq!(c.tsa.lambda, 0.2);
        assert_eq!(c.tsa.trail_depth, 4);
        assert_eq!((c.synth.seed, c.tsa.seed, c.lma.seed), (17, 17, 17));
    }

    #[test]
    fn unknown_keys_and_bad_seed_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[tsa]\nlamda = 0.2\n").unwrap();
        assert!(Config::load(Some(&p), None).is_err());
        assert!(Config::load(None, Some("abc")).is_err());
    }
}
