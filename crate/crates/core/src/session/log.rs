//! Session events, the JSONL log format, and replay verification.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::ballistics::Termination;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::fsm::InteractionMode;
use crate::vec3::Vec3;

use super::script::{InputScript, TickInput};
use super::World;

pub const LOG_FORMAT: &str = "slingdrone-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    /// The tick's input, plus the world hash after the tick ran.
    Input {
        hand: Vec3,
        grab: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inject: Option<Vec3>,
        state_hash: String,
    },
    ModeChange {
        from: InteractionMode,
        to: InteractionMode,
    },
    TrajectoryUpdate {
        hash: String,
        endpoint: Vec3,
        termination: Termination,
        samples: usize,
    },
    Launch {
        frozen_hash: String,
        endpoint: Vec3,
    },
    Attach {
        object_id: String,
    },
    /// Back at the setpoint; `object_id` is absent after a missed search.
    Deliver {
        object_id: Option<String>,
    },
    Emergency {
        tilt: f64,
    },
    Diagnostic {
        message: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Input { .. } => "input",
            Self::ModeChange { .. } => "mode_change",
            Self::TrajectoryUpdate { .. } => "trajectory_update",
            Self::Launch { .. } => "launch",
            Self::Attach { .. } => "attach",
            Self::Deliver { .. } => "deliver",
            Self::Emergency { .. } => "emergency",
            Self::Diagnostic { .. } => "diagnostic",
        }
    }
}

/// One log record. `seq` is strictly increasing; several events can share a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub tick: u64,
    pub t: f64,
    #[serde(flatten)]
    pub body: EventBody,
}

impl SessionEvent {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialise")
    }

    /// The input that drove this tick, if this is an input record.
    pub fn tick_input(&self) -> Option<TickInput> {
        match &self.body {
            EventBody::Input { hand, grab, inject, .. } => Some(TickInput {
                hand: crate::drone::HandState { position: *hand, grabbing: *grab },
                inject_accel: inject.unwrap_or(Vec3::ZERO),
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    /// Full configuration in key-value form, so a log replays on its own.
    pub config: String,
}

impl LogHeader {
    pub fn for_config(cfg: &SimConfig) -> Self {
        Self {
            format: LOG_FORMAT.into(),
            version: LOG_VERSION,
            config_hash: cfg.hash(),
            config: cfg.to_kv_string(),
        }
    }
}

pub fn write_log<W: Write>(mut w: W, cfg: &SimConfig, events: &[SessionEvent]) -> Result<()> {
    serde_json::to_writer(&mut w, &LogHeader::for_config(cfg))?;
    w.write_all(b"\n")?;
    for e in events {
        w.write_all(e.to_line().as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn log_to_string(cfg: &SimConfig, events: &[SessionEvent]) -> String {
    let mut buf = Vec::new();
    write_log(&mut buf, cfg, events).expect("writing to memory");
    String::from_utf8(buf).expect("log is UTF-8")
}

/// A parsed log: header plus raw event lines, kept verbatim for comparison.
#[derive(Debug, Clone)]
pub struct SessionLog {
    pub header: LogHeader,
    pub lines: Vec<String>,
}

impl SessionLog {
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::LogFormat("empty log".into()))??;
        let header: LogHeader =
            serde_json::from_str(&first).map_err(|e| Error::LogFormat(format!("bad header: {e}")))?;
        if header.format != LOG_FORMAT || header.version != LOG_VERSION {
            return Err(Error::LogFormat(format!(
                "unsupported log {} v{}",
                header.format, header.version
            )));
        }
        let lines = lines
            .filter(|l| l.as_ref().map_or(true, |l| !l.is_empty()))
            .collect::<std::io::Result<Vec<_>>>()?;
        Ok(Self { header, lines })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn events(&self) -> Result<Vec<SessionEvent>> {
        self.lines
            .iter()
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::LogFormat(format!("line {}: {e}", i + 2))))
            .collect()
    }

    /// Configuration embedded in the header.
    pub fn config(&self) -> Result<SimConfig> {
        SimConfig::from_kv_str(&self.header.config)
    }
}

/// Runs a script headlessly and returns every event.
pub fn run_script(script: &InputScript, cfg: &SimConfig) -> Result<Vec<SessionEvent>> {
    script.validate()?;
    let mut world = World::new(cfg.clone())?;
    let ticks = (script.duration * cfg.physics_rate).round() as u64;
    let idle = world.idle_hand();
    let mut events = Vec::new();
    for tick in 1..=ticks {
        let t = tick as f64 / cfg.physics_rate;
        let out = world.tick(&script.sample(t, idle))?;
        events.extend(out.events);
        if world.halted().is_some() {
            break;
        }
    }
    Ok(events)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplayVerdict {
    Ok { ticks: u64, events: usize },
    /// First tick at which the regenerated events differ from the log.
    Diverged { tick: u64, expected: String, found: String },
}

impl ReplayVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Self::Ok { .. })
    }
}

/// Re-executes the logged inputs and compares every regenerated event line.
///
/// With `cfg` given, its hash must match the log's before anything runs.
pub fn replay(log: &SessionLog, cfg: Option<&SimConfig>) -> Result<ReplayVerdict> {
    let cfg = match cfg {
        Some(c) => c.clone(),
        None => log.config()?,
    };
    let current = cfg.hash();
    if current != log.header.config_hash {
        return Err(Error::ConfigMismatch { logged: log.header.config_hash.clone(), current });
    }
    let logged = log.events()?;
    let mut world = World::new(cfg)?;
    let mut cursor = 0usize;
    let mut ticks = 0;
    for event in &logged {
        let Some(input) = event.tick_input() else { continue };
        let out = world.tick(&input)?;
        ticks += 1;
        for produced in out.events {
            let found = produced.to_line();
            match log.lines.get(cursor) {
                Some(expected) if *expected == found => cursor += 1,
                Some(expected) => {
                    let tick = logged[cursor].tick.min(produced.tick);
                    return Ok(ReplayVerdict::Diverged { tick, expected: expected.clone(), found });
                }
                None => {
                    return Ok(ReplayVerdict::Diverged { tick: produced.tick, expected: String::new(), found });
                }
            }
        }
        if world.halted().is_some() {
            break;
        }
    }
    if let Some(extra) = logged.get(cursor) {
        return Ok(ReplayVerdict::Diverged { tick: extra.tick, expected: log.lines[cursor].clone(), found: String::new() });
    }
    Ok(ReplayVerdict::Ok { ticks, events: cursor })
}
