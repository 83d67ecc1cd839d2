//! JSON messages exchanged with a live client.
//!
//! Client to server: `{"type":"input","t":…,"hand":[x,y,z],"grab":bool}`.
//! Server to client: `{"type":"state",…}` frames at the broadcast rate.

use serde::{Deserialize, Serialize};

use crate::ballistics::Trajectory;
use crate::drone::HandState;
use crate::fsm::InteractionMode;
use crate::model::SceneObject;
use crate::vec3::Vec3;

use super::log::SessionEvent;

pub const WIRE_VERSION: u32 = 1;

/// Most points sent for one trajectory.
pub const MAX_TRAJECTORY_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTag {
    State,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneView {
    pub position: Vec3,
    pub velocity: Vec3,
    pub tilt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    #[serde(rename = "type")]
    pub kind: StateTag,
    pub v: u32,
    pub tick: u64,
    pub t: f64,
    pub mode: InteractionMode,
    pub drone: DroneView,
    pub displacement: Vec3,
    /// Present only when the shown trajectory changed; empty means cleared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<Vec3>>,
    pub objects: Vec<SceneObject>,
    pub events: Vec<SessionEvent>,
}

impl StateFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Input { t: f64, hand: Vec3, grab: bool },
}

impl ClientMessage {
    pub fn hand(&self) -> HandState {
        match *self {
            Self::Input { hand, grab, .. } => HandState { position: hand, grabbing: grab },
        }
    }
}

/// Evenly thinned trajectory positions, always keeping the end point.
pub fn downsample(traj: &Trajectory) -> Vec<Vec3> {
    let n = traj.samples.len();
    let stride = n.div_ceil(MAX_TRAJECTORY_POINTS - 1).max(1);
    let mut pts: Vec<Vec3> = traj.samples.iter().step_by(stride).map(|s| s.position).collect();
    pts.push(traj.endpoint);
    pts
}
