//! Timed hand inputs for headless runs.

use serde::{Deserialize, Serialize};

use crate::drone::HandState;
use crate::error::{Error, Result};
use crate::vec3::Vec3;

pub const SCRIPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub t: f64,
    pub position: Vec3,
    pub grabbing: bool,
    /// Commanded acceleration injected past the controller and its clamp.
    /// It replaces the horizontal command and adds to the vertical one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_accel: Option<Vec3>,
}

/// Hand positions are interpolated linearly between entries; `grabbing` and
/// `inject_accel` hold their value until the next entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputScript {
    #[serde(default = "default_version")]
    pub version: u32,
    /// Session length, s. The run covers exactly this span.
    pub duration: f64,
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
}

fn default_version() -> u32 {
    SCRIPT_VERSION
}

/// What the session sees from the outside world on one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TickInput {
    pub hand: HandState,
    pub inject_accel: Vec3,
}

impl InputScript {
    pub fn new(duration: f64, entries: Vec<ScriptEntry>) -> Result<Self> {
        let s = Self { version: SCRIPT_VERSION, duration, entries };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCRIPT_VERSION {
            return Err(Error::Script(format!("unsupported script version {}", self.version)));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Script(format!("duration must be positive, got {}", self.duration)));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if !e.t.is_finite() || !e.position.is_finite() || !e.inject_accel.unwrap_or(Vec3::ZERO).is_finite() {
                return Err(Error::Script(format!("entry {i} has a non-finite value")));
            }
        }
        if let Some(i) = self.entries.windows(2).position(|w| w[1].t < w[0].t) {
            return Err(Error::Script(format!("entries not sorted by time at index {}", i + 1)));
        }
        Ok(())
    }

    /// Input at time `t`. Without entries the hand rests at `idle` and is open.
    pub fn sample(&self, t: f64, idle: Vec3) -> TickInput {
        let entries = &self.entries;
        let Some(first) = entries.first() else {
            return TickInput { hand: HandState { position: idle, grabbing: false }, inject_accel: Vec3::ZERO };
        };
        // Last entry at or before t holds the discrete fields.
        let idx = entries.partition_point(|e| e.t <= t);
        let held = if idx == 0 { first } else { &entries[idx - 1] };
        let position = match entries.get(idx) {
            Some(next) if idx > 0 && next.t > held.t => {
                held.position.lerp(next.position, (t - held.t) / (next.t - held.t))
            }
            Some(_) if idx == 0 => first.position,
            _ => held.position,
        };
        TickInput {
            hand: HandState { position, grabbing: held.grabbing },
            inject_accel: held.inject_accel.unwrap_or(Vec3::ZERO),
        }
    }
}
