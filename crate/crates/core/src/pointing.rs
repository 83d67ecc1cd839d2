//! Displacement-to-target mapping and the segment intersection queries used
//! for object selection.

use serde::{Deserialize, Serialize};

use crate::ballistics::{generate_trajectory, BallisticState, Termination, Trajectory};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::model::{Displacement, PointingConfig, PointingMapping, SceneObject, SelectionMode};
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointingResult {
    /// Arc, or a uniformly sampled segment for the straight-ray mapping.
    pub trajectory: Option<Trajectory>,
    /// `R = -k D`, present for the straight-ray mapping.
    pub ray: Option<Vec3>,
    pub selected_object: Option<String>,
    pub target_point: Vec3,
}

/// Parameter `s` in `[0, 1]` of the earliest point of segment `a -> b` on the
/// sphere surface. Tangency counts as a hit.
pub fn segment_sphere_param(a: Vec3, b: Vec3, center: Vec3, r: f64) -> Option<f64> {
    let d = b - a;
    let f = a - center;
    let qa = d.dot(d);
    let c = f.dot(f) - r * r;
    if qa == 0.0 {
        return (c == 0.0).then_some(0.0);
    }
    let qb = 2.0 * f.dot(d);
    let disc = qb * qb - 4.0 * qa * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s1 = (-qb - sq) / (2.0 * qa);
    let s2 = (-qb + sq) / (2.0 * qa);
    [s1, s2].into_iter().find(|s| (0.0..=1.0).contains(s))
}

pub fn intersect_segment_sphere(a: Vec3, b: Vec3, center: Vec3, r: f64) -> Option<Vec3> {
    segment_sphere_param(a, b, center, r).map(|s| a.lerp(b, s))
}

/// Parameter of the point where segment `a -> b` meets `z = 0`.
pub fn intersect_segment_ground_param(a: Vec3, b: Vec3) -> Option<f64> {
    if a.z == 0.0 {
        return Some(0.0);
    }
    if (a.z > 0.0 && b.z > 0.0) || (a.z < 0.0 && b.z < 0.0) {
        return None;
    }
    Some(a.z / (a.z - b.z))
}

pub fn intersect_segment_ground(a: Vec3, b: Vec3) -> Option<Vec3> {
    intersect_segment_ground_param(a, b).map(|s| {
        let mut p = a.lerp(b, s);
        p.z = 0.0;
        p
    })
}

/// First obstacle along `a -> b`: objects first on exact ties, then the ground.
fn first_hit(a: Vec3, b: Vec3, scene: &[SceneObject]) -> Option<(f64, Option<String>)> {
    let mut best: Option<(f64, Option<String>)> = None;
    for o in scene.iter().filter(|o| !o.grabbed) {
        if let Some(s) = segment_sphere_param(a, b, o.center, o.radius) {
            if best.as_ref().map_or(true, |(bs, _)| s < *bs) {
                best = Some((s, Some(o.id.clone())));
            }
        }
    }
    if let Some(s) = intersect_segment_ground_param(a, b) {
        if best.as_ref().map_or(true, |(bs, _)| s < *bs) {
            best = Some((s, None));
        }
    }
    best
}

fn endpoint_selection(endpoint: Vec3, scene: &[SceneObject], tolerance: f64) -> Option<String> {
    scene
        .iter()
        .filter(|o| !o.grabbed && o.surface_distance(endpoint) <= tolerance)
        .min_by(|a, b| a.surface_distance(endpoint).total_cmp(&b.surface_distance(endpoint)))
        .map(|o| o.id.clone())
}

/// Straight pointing ray `R = -k D` from `p0`, clipped at the first obstacle.
pub fn straight_ray_target(p0: Vec3, d: &Displacement, pointing: &PointingConfig, scene: &[SceneObject]) -> Result<PointingResult> {
    if d.is_zero() {
        return Err(Error::ZeroDisplacement);
    }
    let ray = d.d * pointing.signed_scale();
    let tip = p0 + ray;
    let result = match pointing.selection {
        SelectionMode::PathEntry => match first_hit(p0, tip, scene) {
            Some((s, id)) => {
                let mut target = p0.lerp(tip, s);
                if id.is_none() {
                    target.z = 0.0;
                }
                PointingResult { trajectory: None, ray: Some(ray), selected_object: id, target_point: target }
            }
            None => PointingResult { trajectory: None, ray: Some(ray), selected_object: None, target_point: tip },
        },
        SelectionMode::EndpointProximity => {
            let target = match intersect_segment_ground(p0, tip) {
                Some(g) => g,
                None => tip,
            };
            PointingResult {
                trajectory: None,
                ray: Some(ray),
                selected_object: endpoint_selection(target, scene, pointing.endpoint_tolerance),
                target_point: target,
            }
        }
    };
    Ok(result)
}

/// Ballistic pointing: the arc's end point is the target.
pub fn ballistic_target(p0: Vec3, d: &Displacement, scene: &[SceneObject], cfg: &SimConfig) -> Result<PointingResult> {
    let trajectory = generate_trajectory(p0, d, scene, cfg)?;
    let selected_object = match cfg.pointing.selection {
        SelectionMode::PathEntry => trajectory.termination.object_id().map(str::to_owned),
        SelectionMode::EndpointProximity => endpoint_selection(trajectory.endpoint, scene, cfg.pointing.endpoint_tolerance),
    };
    Ok(PointingResult {
        target_point: trajectory.endpoint,
        trajectory: Some(trajectory),
        ray: None,
        selected_object,
    })
}

/// Samples the segment `from -> to` at `speed` with step `dt`, so a straight
/// ray can be flown like an arc.
pub fn ray_trajectory(from: Vec3, to: Vec3, speed: f64, dt: f64, termination: Termination) -> Trajectory {
    let length = from.distance(to);
    let start = BallisticState { position: from, velocity: Vec3::ZERO, t: 0.0 };
    if length == 0.0 || !(speed > 0.0) {
        return Trajectory { samples: vec![start], termination, endpoint: to, end_time: 0.0 };
    }
    let velocity = (to - from) * (speed / length);
    let duration = length / speed;
    let mut samples = Vec::new();
    let mut step = 0u64;
    loop {
        let t = step as f64 * dt;
        if t > duration {
            break;
        }
        samples.push(BallisticState { position: from + velocity * t, velocity, t });
        step += 1;
    }
    Trajectory { samples, termination, endpoint: to, end_time: duration }
}

/// Pointing according to the configured mapping. Always yields a trajectory.
pub fn point(p0: Vec3, d: &Displacement, scene: &[SceneObject], cfg: &SimConfig) -> Result<PointingResult> {
    match cfg.pointing.mapping {
        PointingMapping::BallisticArc => ballistic_target(p0, d, scene, cfg),
        PointingMapping::StraightRay => {
            let mut result = straight_ray_target(p0, d, &cfg.pointing, scene)?;
            let termination = match (&result.selected_object, cfg.pointing.selection) {
                (Some(id), SelectionMode::PathEntry) => Termination::ObjectHit { object_id: id.clone() },
                _ if result.target_point.z == 0.0 => Termination::Ground,
                _ => Termination::RayEnd,
            };
            let speed = d.magnitude * cfg.pointing.k;
            result.trajectory = Some(ray_trajectory(p0, result.target_point, speed, cfg.rk4_dt, termination));
            Ok(result)
        }
    }
}
