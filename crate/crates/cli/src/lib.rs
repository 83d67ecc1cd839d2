//! Command implementations behind the `slingdrone` binary.

pub mod commands;
pub mod serve;

use std::path::Path;

use anyhow::Context;
use slingdrone_core::{demo_config, SimConfig};

/// Loads a key-value config file, or the bundled demo config when none is given.
pub fn load_config(path: Option<&Path>) -> anyhow::Result<SimConfig> {
    match path {
        Some(p) => SimConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(demo_config()),
    }
}
