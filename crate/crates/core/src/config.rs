//! Simulation configuration: defaults, validation and the flat key-value file.
//!
//! The file format is one `dotted.path = value` assignment per line, for
//! example `ballistic.rho = 1.23` or `setpoint = [0.0, 0.0, 1.5]`. Scene
//! objects use `scene.<id>.center` and `scene.<id>.radius`. Unknown keys are
//! rejected. Missing keys keep their defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drone::{LeashModel, PidGains, QuadParams};
use crate::error::{Error, Result};
use crate::follow::FollowParams;
use crate::model::{BallisticParams, PointingConfig, SceneObject, Thresholds};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub center: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub ballistic: BallisticParams,
    pub pointing: PointingConfig,
    pub thresholds: Thresholds,
    pub pid: PidGains,
    pub leash: LeashModel,
    pub quad: QuadParams,
    pub follow: FollowParams,
    /// Hover setpoint `p_des`, also where objects are delivered.
    pub setpoint: Vec3,
    /// Where the drone is when the session starts.
    pub start_position: Vec3,
    /// Plant and controller rate, Hz.
    pub physics_rate: f64,
    /// State broadcast rate, Hz.
    pub broadcast_rate: f64,
    /// Side of the square flown when searching for the object, m.
    pub search_side: f64,
    /// Ballistic integrator step, s.
    pub rk4_dt: f64,
    /// Longest ballistic flight before timing out, s.
    pub t_max: f64,
    pub scene: BTreeMap<String, ObjectSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            ballistic: BallisticParams::default(),
            pointing: PointingConfig::default(),
            thresholds: Thresholds::default(),
            pid: PidGains::default(),
            leash: LeashModel::default(),
            quad: QuadParams::default(),
            follow: FollowParams::default(),
            setpoint: Vec3::new(0.0, 0.0, 1.5),
            start_position: Vec3::new(0.0, 0.0, 1.5),
            physics_rate: 100.0,
            broadcast_rate: 30.0,
            search_side: 0.15,
            rk4_dt: 1e-3,
            t_max: 10.0,
            scene: BTreeMap::new(),
        }
    }
}

/// The default configuration, validated.
pub fn default_config() -> SimConfig {
    let cfg = SimConfig::default();
    debug_assert!(validate_config(&cfg).is_ok());
    cfg
}

/// One broken invariant, named by its field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rule)
    }
}

struct Checker(Vec<Violation>);

impl Checker {
    fn check(&mut self, ok: bool, path: &str, rule: impl Into<String>) {
        if !ok {
            self.0.push(Violation { path: path.to_owned(), rule: rule.into() });
        }
    }

    fn positive(&mut self, path: &str, v: f64) {
        self.check(v.is_finite() && v > 0.0, path, format!("{path} > 0"));
    }

    fn non_negative(&mut self, path: &str, v: f64) {
        self.check(v.is_finite() && v >= 0.0, path, format!("{path} ≥ 0"));
    }

    fn finite_vec(&mut self, path: &str, v: Vec3) {
        self.check(v.is_finite(), path, format!("{path} finite"));
    }
}

/// Every invariant violation in `c`; empty means valid.
pub fn validate_config(c: &SimConfig) -> std::result::Result<(), Vec<Violation>> {
    let mut k = Checker(Vec::new());
    let b = &c.ballistic;
    k.positive("ballistic.rho", b.rho);
    k.non_negative("ballistic.cd", b.cd);
    k.positive("ballistic.area_x", b.area_x);
    k.positive("ballistic.area_y", b.area_y);
    k.positive("ballistic.area_z", b.area_z);
    k.positive("ballistic.mass", b.mass);
    k.positive("ballistic.g", b.g);

    k.positive("pointing.k", c.pointing.k);
    k.positive("pointing.endpoint_tolerance", c.pointing.endpoint_tolerance);

    k.positive("thresholds.delta_d", c.thresholds.delta_d);
    k.positive("thresholds.delta_v", c.thresholds.delta_v);
    k.positive("thresholds.tilt_limit", c.thresholds.tilt_limit);
    k.check(
        c.thresholds.tilt_limit < std::f64::consts::FRAC_PI_2,
        "thresholds.tilt_limit",
        "thresholds.tilt_limit < π/2",
    );

    for (axis, g) in [("x", c.pid.x), ("y", c.pid.y), ("z", c.pid.z)] {
        k.non_negative(&format!("pid.{axis}.kp"), g.kp);
        k.non_negative(&format!("pid.{axis}.kd"), g.kd);
        k.non_negative(&format!("pid.{axis}.ki"), g.ki);
    }
    k.non_negative("pid.integral_limit", c.pid.integral_limit);

    k.positive("leash.rest_length", c.leash.rest_length);
    k.non_negative("leash.stiffness", c.leash.stiffness);
    k.finite_vec("leash.attach_offset", c.leash.attach_offset);

    k.positive("quad.mass", c.quad.mass);
    k.positive("quad.max_accel", c.quad.max_accel);
    k.non_negative("quad.drag_coefficient", c.quad.drag_coefficient);
    k.non_negative("quad.noise_std", c.quad.noise_std);

    let f = &c.follow;
    k.positive("follow.segment_duration", f.segment_duration);
    k.positive("follow.slow_factor", f.slow_factor);
    k.non_negative("follow.launch_ramp", f.launch_ramp);
    k.positive("follow.cruise_speed", f.cruise_speed);
    k.positive("follow.arrival_tolerance", f.arrival_tolerance);
    k.non_negative("follow.grab_range", f.grab_range);

    k.finite_vec("setpoint", c.setpoint);
    k.check(c.setpoint.z > 0.0, "setpoint", "setpoint.z > 0");
    k.finite_vec("start_position", c.start_position);

    k.positive("physics_rate", c.physics_rate);
    k.positive("broadcast_rate", c.broadcast_rate);
    k.check(
        c.physics_rate >= c.broadcast_rate,
        "physics_rate",
        "physics_rate ≥ broadcast_rate",
    );
    k.positive("search_side", c.search_side);
    k.positive("rk4_dt", c.rk4_dt);
    k.positive("t_max", c.t_max);

    for (id, o) in &c.scene {
        k.check(!id.is_empty(), "scene", "scene object ids non-empty");
        k.finite_vec(&format!("scene.{id}.center"), o.center);
        k.positive(&format!("scene.{id}.radius"), o.radius);
    }

    if k.0.is_empty() {
        Ok(())
    } else {
        Err(k.0)
    }
}

impl SimConfig {
    /// Parses the flat key-value format and validates the result.
    pub fn from_kv_str(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.message().to_owned()))?;
        validate_config(&cfg).map_err(Error::InvalidConfig)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SimConfig> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Canonical flat rendering, sorted by key. Parses back to `self`.
    pub fn to_kv_string(&self) -> String {
        let value = toml::Value::try_from(self).expect("config is representable as key-value pairs");
        let mut out = String::new();
        flatten("", &value, &mut out);
        out
    }

    /// Short hex digest of the canonical rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv_string().as_bytes());
        crate::ballistics::hex(&digest[..16])
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.physics_rate
    }

    /// Physics ticks per broadcast frame.
    pub fn broadcast_every(&self) -> u64 {
        ((self.physics_rate / self.broadcast_rate).floor() as u64).max(1)
    }

    pub fn scene_objects(&self) -> Vec<SceneObject> {
        self.scene
            .iter()
            .map(|(id, o)| SceneObject { id: id.clone(), center: o.center, radius: o.radius, grabbed: false })
            .collect()
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut String) {
    match value {
        toml::Value::Table(t) => {
            for (key, v) in t {
                let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
                flatten(&path, v, out);
            }
        }
        other => {
            out.push_str(prefix);
            out.push_str(" = ");
            out.push_str(&other.to_string());
            out.push('\n');
        }
    }
}
