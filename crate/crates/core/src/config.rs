//! One config file for the whole benchmark.
//!
//! TOML with one section per module (`[sim]`, `[env]`, `[ardsnet]`,
//! `[control]`, `[latent]`, `[bench]`); every key is optional and falls back to
//! its default. `Config::default().to_toml()` prints the full schema.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::BenchParams;
use crate::control::ControlParams;
use crate::env::{BoundsTable, EnvParams};
use crate::error::{Error, Result};
use crate::latent::LatentParams;
use crate::protocols::ArdsnetParams;
use crate::sim::SimParams;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sim: SimParams,
    pub env: EnvParams,
    pub ardsnet: ArdsnetParams,
    pub control: ControlParams,
    pub latent: LatentParams,
    pub bench: BenchParams,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.env.action_bounds().validate()?;
        self.env.reference_bounds()?;
        self.ardsnet.validate()?;
        if !(self.env.dt_min > 0.0) || self.env.steps == 0 {
            return Err(Error::Config("env.dt_min and env.steps must be positive".into()));
        }
        if !(self.sim.substep_min > 0.0) {
            return Err(Error::Config("sim.substep_min must be positive".into()));
        }
        if self.control.horizon == 0 || self.control.k_exact == 0 || self.control.k_learned == 0 {
            return Err(Error::Config("control K and H must be at least 1".into()));
        }
        if !(self.control.lambda >= 0.0) {
            return Err(Error::Config("control.lambda must be >= 0".into()));
        }
        Ok(())
    }

    pub fn bounds_table(&self) -> Result<BoundsTable> {
        BoundsTable::new(&self.env, &self.sim)
    }
}
