//! Interaction mode machine: hover, slingshot aiming, launch, search and
//! delivery, with an absorbing emergency stop.

use serde::{Deserialize, Serialize};

use crate::ballistics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{Displacement, DroneState, HoverSetpoint, Thresholds};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionMode {
    Approach,
    Hover,
    Slingshot,
    Recovering,
    Projectile,
    Search,
    Return,
    Delivered,
    EmergencyStop,
}

impl InteractionMode {
    pub const ALL: [InteractionMode; 9] = [
        Self::Approach,
        Self::Hover,
        Self::Slingshot,
        Self::Recovering,
        Self::Projectile,
        Self::Search,
        Self::Return,
        Self::Delivered,
        Self::EmergencyStop,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Approach => "approach",
            Self::Hover => "hover",
            Self::Slingshot => "slingshot",
            Self::Recovering => "recovering",
            Self::Projectile => "projectile",
            Self::Search => "search",
            Self::Return => "return",
            Self::Delivered => "delivered",
            Self::EmergencyStop => "emergency_stop",
        }
    }

    /// Modes that carry a frozen trajectory.
    pub fn has_frozen(self) -> bool {
        matches!(
            self,
            Self::Recovering | Self::Projectile | Self::Search | Self::Return | Self::Delivered
        )
    }

    /// Modes in which the controller tracks a moving reference.
    pub fn is_following(self) -> bool {
        matches!(self, Self::Projectile | Self::Search | Self::Return)
    }

    /// Integral action is held off while a person is pulling the drone or it
    /// is springing back, so wind-up does not fight the leash.
    pub fn integral_enabled(self) -> bool {
        !matches!(self, Self::Hover | Self::Slingshot | Self::Recovering | Self::EmergencyStop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    /// Recompute the pointing trajectory from the current displacement.
    UpdateTrajectory,
    /// Fly the frozen trajectory.
    FollowTrajectory,
    /// Fly rest-to-rest legs through these points, starting from the drone.
    Waypoints { points: Vec<Vec3> },
    AttachObject { object_id: String },
    DetachObject { object_id: String },
    MotorsOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsmParams {
    pub search_side: f64,
    pub arrival_tolerance: f64,
}

impl Default for FsmParams {
    fn default() -> Self {
        Self { search_side: 0.15, arrival_tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmContext {
    pub mode: InteractionMode,
    pub frozen_trajectory: Option<Trajectory>,
    pub last_valid_trajectory: Option<Trajectory>,
    pub setpoint: HoverSetpoint,
    pub grabbed_object: Option<String>,
    pub params: FsmParams,
}

impl FsmContext {
    pub fn new(setpoint: HoverSetpoint, params: FsmParams) -> Self {
        Self {
            mode: InteractionMode::Approach,
            frozen_trajectory: None,
            last_valid_trajectory: None,
            setpoint,
            grabbed_object: None,
            params,
        }
    }

    /// Stores the result of an `UpdateTrajectory` action.
    pub fn record_trajectory(&mut self, traj: Trajectory) {
        self.last_valid_trajectory = Some(traj);
    }

    pub fn check(&self) -> Result<()> {
        let frozen = self.frozen_trajectory.is_some();
        if self.mode != InteractionMode::EmergencyStop && frozen != self.mode.has_frozen() {
            return Err(Error::Invariant(format!(
                "mode {} with frozen trajectory {}",
                self.mode.label(),
                if frozen { "present" } else { "absent" }
            )));
        }
        if self.grabbed_object.is_some()
            && !matches!(
                self.mode,
                InteractionMode::Search | InteractionMode::Return | InteractionMode::Delivered | InteractionMode::EmergencyStop
            )
        {
            return Err(Error::Invariant(format!("object held in mode {}", self.mode.label())));
        }
        Ok(())
    }
}

/// Per-tick observations the session feeds the machine besides the drone state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FsmInputs {
    /// The hand is grabbing with a taut leash.
    pub hand_engaged: bool,
    /// The reference being followed has run out.
    pub reference_done: bool,
    /// An ungrabbed object within gripper range, if any.
    pub object_in_reach: Option<String>,
}

/// The drone is held displaced and nearly still.
pub fn slingshot_condition(d: &Displacement, speed: f64, th: &Thresholds) -> bool {
    d.magnitude > th.delta_d && speed < th.delta_v
}

/// Closed square loop around `center`: four corners, back to the first.
pub fn search_pattern(center: Vec3, side: f64) -> Result<Vec<Vec3>> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::InvalidArgument(format!("search side must be positive, got {side}")));
    }
    let h = side / 2.0;
    let corner = |sx: f64, sy: f64| Vec3::new(center.x + sx * h, center.y + sy * h, center.z);
    let first = corner(-1.0, -1.0);
    Ok(vec![first, corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0), first])
}

/// Advances the machine one tick. Emergency stop is checked before anything else.
pub fn fsm_step(
    ctx: &FsmContext,
    drone: &DroneState,
    d: &Displacement,
    th: &Thresholds,
    tilt: f64,
    inputs: &FsmInputs,
) -> Result<(FsmContext, Vec<Action>)> {
    use InteractionMode as M;
    ctx.check()?;
    if !tilt.is_finite() {
        return Err(Error::NonFinite("tilt"));
    }
    let mut next = ctx.clone();
    let mut actions = Vec::new();

    if ctx.mode == M::EmergencyStop {
        return Ok((next, actions));
    }
    if tilt > th.tilt_limit {
        next.mode = M::EmergencyStop;
        actions.push(Action::MotorsOff);
        return Ok((next, actions));
    }

    let speed = drone.speed();
    let aiming = slingshot_condition(d, speed, th);
    match ctx.mode {
        M::Approach => {
            if drone.position.distance(ctx.setpoint.p_des) < th.delta_d {
                next.mode = M::Hover;
            }
        }
        M::Hover => {
            if aiming {
                next.mode = M::Slingshot;
                next.last_valid_trajectory = None;
                actions.push(Action::UpdateTrajectory);
            }
        }
        M::Slingshot => {
            if aiming {
                actions.push(Action::UpdateTrajectory);
            } else if speed >= th.delta_v {
                match &ctx.last_valid_trajectory {
                    Some(t) => {
                        next.mode = M::Recovering;
                        next.frozen_trajectory = Some(t.clone());
                    }
                    None => next.mode = M::Hover,
                }
            } else {
                // Let go gently back inside the dead zone.
                next.mode = M::Hover;
            }
        }
        M::Recovering => {
            if inputs.hand_engaged {
                next.mode = M::Hover;
                next.frozen_trajectory = None;
            } else if d.magnitude < th.delta_d {
                next.mode = M::Projectile;
                actions.push(Action::FollowTrajectory);
            }
        }
        M::Projectile => {
            let end = frozen(ctx)?.endpoint;
            if inputs.reference_done || drone.position.distance(end) < ctx.params.arrival_tolerance {
                next.mode = M::Search;
                actions.push(Action::Waypoints { points: search_pattern(end, ctx.params.search_side)? });
            }
        }
        M::Search => {
            if let Some(id) = &inputs.object_in_reach {
                next.mode = M::Return;
                next.grabbed_object = Some(id.clone());
                actions.push(Action::AttachObject { object_id: id.clone() });
                actions.push(Action::Waypoints { points: vec![ctx.setpoint.p_des] });
            } else if inputs.reference_done {
                next.mode = M::Return;
                actions.push(Action::Waypoints { points: vec![ctx.setpoint.p_des] });
            }
        }
        M::Return => {
            if inputs.reference_done && drone.position.distance(ctx.setpoint.p_des) < ctx.params.arrival_tolerance {
                next.mode = M::Delivered;
                if let Some(id) = next.grabbed_object.take() {
                    actions.push(Action::DetachObject { object_id: id });
                }
            }
        }
        M::Delivered => {
            if inputs.hand_engaged {
                next.mode = M::Hover;
                next.frozen_trajectory = None;
                next.last_valid_trajectory = None;
            }
        }
        M::EmergencyStop => unreachable!(),
    }
    Ok((next, actions))
}

fn frozen(ctx: &FsmContext) -> Result<&Trajectory> {
    ctx.frozen_trajectory
        .as_ref()
        .ok_or_else(|| Error::Invariant(format!("mode {} without frozen trajectory", ctx.mode.label())))
}
