//! Domain types shared by every subsystem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Kinematic state of the simulated quadrotor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DroneState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub time: f64,
}

impl DroneState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::ZERO,
            time: 0.0,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

/// Position the controller regulates toward while the user pulls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoverSetpoint {
    pub p_des: Vec3,
}

impl HoverSetpoint {
    pub fn new(p_des: Vec3) -> Result<Self> {
        if !p_des.is_finite() {
            return Err(Error::NonFinite("hover setpoint"));
        }
        if p_des.z <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "hover setpoint must be above the ground plane, got z = {}",
                p_des.z
            )));
        }
        Ok(Self { p_des })
    }
}

/// Pull vector of the drone away from its setpoint; the only pointing input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub d: Vec3,
    pub magnitude: f64,
}

impl Displacement {
    pub fn from_vec(d: Vec3) -> Result<Self> {
        if !d.is_finite() {
            return Err(Error::NonFinite("displacement"));
        }
        Ok(Self {
            d,
            magnitude: d.norm(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude == 0.0
    }
}

/// `D = p - p_des`.
pub fn compute_displacement(p: Vec3, p_des: Vec3) -> Result<Displacement> {
    if !p.is_finite() {
        return Err(Error::NonFinite("drone position"));
    }
    if !p_des.is_finite() {
        return Err(Error::NonFinite("hover setpoint"));
    }
    Displacement::from_vec(p - p_des)
}

/// Which form of the quadratic drag law the ballistic integrator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DragMode {
    /// The original equations verbatim: `-k v²` on x/y and a `sin(ż)` factor on z.
    Literal,
    /// Drag opposes velocity on every axis: `-k v |v|`.
    #[default]
    Physical,
}

/// Virtual projectile used to draw the pointing arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallisticParams {
    /// Air density, kg/m³.
    pub rho: f64,
    /// Drag coefficient.
    pub cd: f64,
    /// Frontal areas per axis, m².
    pub area_x: f64,
    pub area_y: f64,
    pub area_z: f64,
    /// Mass of the virtual body, kg.
    pub mass: f64,
    /// Gravitational acceleration, m/s².
    pub g: f64,
    pub drag_mode: DragMode,
}

impl Default for BallisticParams {
    fn default() -> Self {
        Self {
            rho: 1.23,
            cd: 0.4,
            area_x: 0.01,
            area_y: 0.01,
            area_z: 0.01,
            mass: 10.0,
            g: 9.81,
            drag_mode: DragMode::Physical,
        }
    }
}

impl BallisticParams {
    pub fn areas(&self) -> Vec3 {
        Vec3::new(self.area_x, self.area_y, self.area_z)
    }

    /// Per-axis factor `rho * cd * A_i / (2 m)` multiplying `v²` in the drag law.
    pub fn drag_factors(&self) -> Vec3 {
        self.areas() * (self.rho * self.cd / (2.0 * self.mass))
    }
}

/// How the displacement is turned into a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointingMapping {
    #[default]
    BallisticArc,
    StraightRay,
}

/// When an object counts as selected by a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// The path enters the object's sphere; the path stops there.
    #[default]
    PathEntry,
    /// The path's end point lies within `endpoint_tolerance` of the object's surface.
    EndpointProximity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointingConfig {
    /// Displacement-to-velocity (or ray length) scale.
    pub k: f64,
    pub mapping: PointingMapping,
    pub selection: SelectionMode,
    /// Radius added around an object in `EndpointProximity` selection, m.
    pub endpoint_tolerance: f64,
    /// Launch opposite to the pull (`v0 = -k D`), like a slingshot.
    pub opposite: bool,
}

impl Default for PointingConfig {
    fn default() -> Self {
        Self {
            k: 95.0,
            mapping: PointingMapping::BallisticArc,
            selection: SelectionMode::PathEntry,
            endpoint_tolerance: 0.05,
            opposite: true,
        }
    }
}

impl PointingConfig {
    /// Signed scale applied to the displacement: `-k` in slingshot orientation.
    pub fn signed_scale(&self) -> f64 {
        if self.opposite {
            -self.k
        } else {
            self.k
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Displacements at or below this are not inputs, m.
    pub delta_d: f64,
    /// Drone speed at or above this means the holder was released, m/s.
    pub delta_v: f64,
    /// Estimated tilt beyond which the motors are cut, rad.
    pub tilt_limit: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            delta_d: 0.02,
            delta_v: 0.1,
            tilt_limit: 60f64.to_radians(),
        }
    }
}

/// A grabbable sphere in the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub center: Vec3,
    pub radius: f64,
    #[serde(default)]
    pub grabbed: bool,
}

impl SceneObject {
    pub fn new(id: impl Into<String>, center: Vec3, radius: f64) -> Result<Self> {
        if !center.is_finite() || !radius.is_finite() {
            return Err(Error::NonFinite("scene object"));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "object radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            id: id.into(),
            center,
            radius,
            grabbed: false,
        })
    }

    /// Distance from `p` to the sphere surface; negative inside.
    pub fn surface_distance(&self, p: Vec3) -> f64 {
        p.distance(self.center) - self.radius
    }
}
