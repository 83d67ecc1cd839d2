//! The canonical pull-hold-release session used by tests, benches and the CLI.

use crate::config::SimConfig;

use super::script::InputScript;

pub const DEMO_CONFIG: &str = include_str!("../../demo/demo.toml");
pub const DEMO_SCRIPT: &str = include_str!("../../demo/demo_script.json");

pub fn demo_config() -> SimConfig {
    SimConfig::from_kv_str(DEMO_CONFIG).expect("bundled demo config is valid")
}

pub fn demo_script() -> InputScript {
    InputScript::from_json(DEMO_SCRIPT).expect("bundled demo script is valid")
}
