//! Air-drag projectile model used to draw the pointing arc.
//!
//! The arc starts at the hover point with initial velocity `-k D` and is
//! integrated with fixed-step RK4 until it reaches the ground plane `z = 0`,
//! enters a scene object, or runs out of time.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::model::{BallisticParams, Displacement, DragMode, SceneObject, SelectionMode};
use crate::pointing::{intersect_segment_ground_param, segment_sphere_param};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BallisticState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Ground,
    ObjectHit { object_id: String },
    Timeout,
    /// A straight ray reached its full length without hitting anything.
    RayEnd,
}

impl Termination {
    pub fn object_id(&self) -> Option<&str> {
        match self {
            Termination::ObjectHit { object_id } => Some(object_id),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Termination::Ground => "ground",
            Termination::ObjectHit { .. } => "object_hit",
            Termination::Timeout => "timeout",
            Termination::RayEnd => "ray_end",
        }
    }
}

/// Uniformly sampled flight path.
///
/// `samples` hold every integrator step that stayed clear of the ground and
/// all objects; `endpoint` is the refined crossing point reached at
/// `end_time`, which lies inside the step after the last sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<BallisticState>,
    pub termination: Termination,
    pub endpoint: Vec3,
    pub end_time: f64,
}

impl Trajectory {
    pub fn first(&self) -> &BallisticState {
        &self.samples[0]
    }

    pub fn last(&self) -> &BallisticState {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.first().t
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.samples.iter().map(|s| s.position)
    }

    /// Content hash over every sample bit, the termination and the endpoint.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for s in &self.samples {
            for v in [s.t, s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z] {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.update(self.termination.label().as_bytes());
        if let Some(id) = self.termination.object_id() {
            h.update(id.as_bytes());
        }
        for v in [self.endpoint.x, self.endpoint.y, self.endpoint.z, self.end_time] {
            h.update(v.to_bits().to_le_bytes());
        }
        hex(&h.finalize()[..16])
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// The drag equations in their original form, including the `sin(ż)` factor.
///
/// Drag on x and y is `-k v²` regardless of the sign of `v`.
pub fn accel_literal(s: &BallisticState, params: &BallisticParams) -> Vec3 {
    let BallisticParams { rho, cd, area_x, area_y, area_z, mass, g, .. } = *params;
    let v = s.velocity;
    Vec3::new(
        -rho * cd * area_x * v.x * v.x / (2.0 * mass),
        -rho * cd * area_y * v.y * v.y / (2.0 * mass),
        (-0.5 * rho * cd * area_z * v.z * v.z * v.z.sin() - mass * g) / mass,
    )
}

/// Quadratic drag that opposes velocity on every axis, plus gravity on z.
pub fn accel_physical(s: &BallisticState, params: &BallisticParams) -> Vec3 {
    let v = s.velocity;
    let f = params.drag_factors();
    Vec3::new(
        -f.x * v.x * v.x.abs(),
        -f.y * v.y * v.y.abs(),
        -f.z * v.z * v.z.abs() - params.g,
    )
}

pub fn accel(s: &BallisticState, params: &BallisticParams) -> Vec3 {
    match params.drag_mode {
        DragMode::Literal => accel_literal(s, params),
        DragMode::Physical => accel_physical(s, params),
    }
}

/// Classical fourth-order Runge-Kutta step of `(position, velocity)`.
pub fn rk4_step<F>(s: &BallisticState, dt: f64, accel_fn: F) -> Result<BallisticState>
where
    F: Fn(&BallisticState) -> Vec3,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("rk4 dt must be positive, got {dt}")));
    }
    let at = |dp: Vec3, dv: Vec3, dtt: f64| BallisticState {
        position: s.position + dp,
        velocity: s.velocity + dv,
        t: s.t + dtt,
    };
    let (k1x, k1v) = (s.velocity, accel_fn(s));
    let s2 = at(k1x * (dt / 2.0), k1v * (dt / 2.0), dt / 2.0);
    let (k2x, k2v) = (s2.velocity, accel_fn(&s2));
    let s3 = at(k2x * (dt / 2.0), k2v * (dt / 2.0), dt / 2.0);
    let (k3x, k3v) = (s3.velocity, accel_fn(&s3));
    let s4 = at(k3x * dt, k3v * dt, dt);
    let (k4x, k4v) = (s4.velocity, accel_fn(&s4));
    Ok(BallisticState {
        position: s.position + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0),
        velocity: s.velocity + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0),
        t: s.t + dt,
    })
}

/// Integration settings for [`fly`].
#[derive(Debug, Clone, Copy)]
pub struct FlightSpec<'a> {
    pub params: &'a BallisticParams,
    pub dt: f64,
    pub t_max: f64,
    /// Stop when the path enters an object sphere.
    pub stop_at_objects: bool,
}

/// Integrates from `(p0, v0)` and terminates on ground, object entry or timeout.
pub fn fly(p0: Vec3, v0: Vec3, scene: &[SceneObject], spec: &FlightSpec<'_>) -> Result<Trajectory> {
    if !p0.is_finite() || !v0.is_finite() {
        return Err(Error::NonFinite("initial conditions"));
    }
    if !(spec.dt > 0.0) || !(spec.t_max > 0.0) {
        return Err(Error::InvalidArgument("dt and t_max must be positive".into()));
    }
    let targets: Vec<&SceneObject> = if spec.stop_at_objects {
        scene.iter().filter(|o| !o.grabbed).collect()
    } else {
        Vec::new()
    };
    let start = BallisticState { position: p0, velocity: v0, t: 0.0 };
    let stopped = |termination, endpoint| Trajectory {
        samples: vec![start],
        termination,
        endpoint,
        end_time: 0.0,
    };
    if let Some(o) = targets.iter().find(|o| o.surface_distance(p0) <= 0.0) {
        return Ok(stopped(Termination::ObjectHit { object_id: o.id.clone() }, p0));
    }
    if p0.z <= 0.0 {
        return Ok(stopped(Termination::Ground, p0));
    }

    let accel_fn = |s: &BallisticState| accel(s, spec.params);
    let mut samples = vec![start];
    let mut cur = start;
    let mut step: u64 = 0;
    loop {
        step += 1;
        let mut next = rk4_step(&cur, spec.dt, accel_fn)?;
        next.t = step as f64 * spec.dt;
        if !next.position.is_finite() || !next.velocity.is_finite() {
            return Err(Error::NonFinite("trajectory state"));
        }

        // Earliest crossing along this step; objects win exact ties with the ground.
        let mut hit: Option<(f64, Termination)> = None;
        for o in &targets {
            if let Some(s) = segment_sphere_param(cur.position, next.position, o.center, o.radius) {
                if hit.as_ref().map_or(true, |(best, _)| s < *best) {
                    hit = Some((s, Termination::ObjectHit { object_id: o.id.clone() }));
                }
            }
        }
        if let Some(s) = intersect_segment_ground_param(cur.position, next.position) {
            if hit.as_ref().map_or(true, |(best, _)| s < *best) {
                hit = Some((s, Termination::Ground));
            }
        }
        if let Some((s, termination)) = hit {
            return Ok(Trajectory {
                endpoint: cur.position.lerp(next.position, s),
                end_time: cur.t + s * (next.t - cur.t),
                samples,
                termination,
            });
        }

        samples.push(next);
        cur = next;
        if cur.t > spec.t_max {
            return Ok(Trajectory {
                endpoint: cur.position,
                end_time: cur.t,
                samples,
                termination: Termination::Timeout,
            });
        }
    }
}

/// Initial velocity the displacement maps to.
pub fn launch_velocity(d: &Displacement, cfg: &SimConfig) -> Vec3 {
    // Adding zero turns -0.0 into 0.0 so exports do not show negative zeros.
    (d.d * cfg.pointing.signed_scale()).map(|c| c + 0.0)
}

/// Ballistic pointing arc for displacement `d` launched from `p0`.
pub fn generate_trajectory(p0: Vec3, d: &Displacement, scene: &[SceneObject], cfg: &SimConfig) -> Result<Trajectory> {
    if d.is_zero() {
        return Err(Error::ZeroDisplacement);
    }
    let spec = FlightSpec {
        params: &cfg.ballistic,
        dt: cfg.rk4_dt,
        t_max: cfg.t_max,
        stop_at_objects: cfg.pointing.selection == SelectionMode::PathEntry,
    };
    fly(p0, launch_velocity(d, cfg), scene, &spec)
}

/// Steady descent speed under physical drag, `sqrt(2 m g / (rho cd A_z))`.
pub fn terminal_velocity(params: &BallisticParams) -> Result<f64> {
    let denom = params.rho * params.cd * params.area_z;
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument(
            "terminal velocity undefined without drag (rho * cd * area_z = 0)".into(),
        ));
    }
    Ok((2.0 * params.mass * params.g / denom).sqrt())
}
