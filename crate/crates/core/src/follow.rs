//! Smooth references for the flight phases and the tracking controller.
//!
//! A frozen ballistic arc is turned into piecewise degree-5 polynomials by
//! least squares with position, velocity and acceleration continuity imposed
//! exactly at the knots. Search and return legs are minimum-jerk quintics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ballistics::Trajectory;
use crate::drone::{pid_command, PidGains, PidState, QuadParams};
use crate::error::{Error, Result};
use crate::model::DroneState;
use crate::vec3::Vec3;

/// Highest polynomial degree used by the fit.
pub const FIT_DEGREE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowParams {
    /// Target knot spacing of the arc fit, s.
    pub segment_duration: f64,
    /// The arc is flown this many times slower than the virtual projectile.
    pub slow_factor: f64,
    /// Ease-in and ease-out time at the start and end of the flown arc, s.
    pub launch_ramp: f64,
    /// Peak speed of search and return legs, m/s.
    pub cruise_speed: f64,
    /// Distance to the arc end point that counts as arrived, m.
    pub arrival_tolerance: f64,
    /// Distance to an object's surface at which the gripper attaches, m.
    pub grab_range: f64,
}

impl Default for FollowParams {
    fn default() -> Self {
        Self {
            segment_duration: 0.25,
            slow_factor: 3.0,
            launch_ramp: 1.5,
            cruise_speed: 1.0,
            arrival_tolerance: 0.05,
            grab_range: 0.05,
        }
    }
}

/// One polynomial piece in local time `tau = t - t_start`; coefficients are
/// ordered constant term first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySegment {
    pub t_start: f64,
    pub t_end: f64,
    pub coefficients: Vec<f64>,
}

impl PolySegment {
    /// Value, first and second derivative at local time `tau`.
    pub fn eval(&self, tau: f64) -> (f64, f64, f64) {
        let (mut p, mut v, mut a) = (0.0, 0.0, 0.0);
        // Horner on the value and both derivatives at once.
        for &c in self.coefficients.iter().rev() {
            a = a * tau + v * 2.0;
            v = v * tau + p;
            p = p * tau + c;
        }
        (p, v, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    pub x: Vec<PolySegment>,
    pub y: Vec<PolySegment>,
    pub z: Vec<PolySegment>,
}

impl PiecewisePolynomial {
    pub fn axes(&self) -> [&Vec<PolySegment>; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn start_time(&self) -> f64 {
        self.x[0].t_start
    }

    pub fn end_time(&self) -> f64 {
        self.x.last().expect("polynomial has segments").t_end
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Knot times between consecutive segments.
    pub fn knots(&self) -> Vec<f64> {
        self.x.iter().skip(1).map(|s| s.t_start).collect()
    }

    fn eval_axis(segments: &[PolySegment], t: f64) -> (f64, f64, f64) {
        let idx = segments.partition_point(|s| s.t_start <= t).saturating_sub(1);
        let seg = &segments[idx];
        seg.eval(t - seg.t_start)
    }

    /// Position, velocity, acceleration at `t`, without range clamping.
    pub fn eval(&self, t: f64) -> (Vec3, Vec3, Vec3) {
        let [x, y, z] = self.axes().map(|a| Self::eval_axis(a, t));
        (
            Vec3::new(x.0, y.0, z.0),
            Vec3::new(x.1, y.1, z.1),
            Vec3::new(x.2, y.2, z.2),
        )
    }

    /// Evaluates one axis on a specific segment, used for knot continuity checks.
    pub fn eval_segment(&self, axis: usize, segment: usize, t: f64) -> (f64, f64, f64) {
        let seg = &self.axes()[axis][segment];
        seg.eval(t - seg.t_start)
    }

    pub fn end_position(&self) -> Vec3 {
        self.eval(self.end_time()).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub t: f64,
    /// `t` was outside the polynomial's time range and was clamped.
    pub clamped: bool,
}

/// Reference at time `t`. Outside the time range the nearest end point is
/// returned at rest with `clamped` set.
pub fn sample_reference(poly: &PiecewisePolynomial, t: f64) -> ReferencePoint {
    let (start, end) = (poly.start_time(), poly.end_time());
    if t < start || t > end {
        let edge = if t < start { start } else { end };
        return ReferencePoint {
            position: poly.eval(edge).0,
            velocity: Vec3::ZERO,
            acceleration: Vec3::ZERO,
            t,
            clamped: true,
        };
    }
    let (position, velocity, acceleration) = poly.eval(t);
    ReferencePoint { position, velocity, acceleration, t, clamped: false }
}

fn binomial_falling(j: usize, r: usize) -> f64 {
    // j! / (j - r)!
    (0..r).map(|i| (j - i) as f64).product()
}

/// Piecewise least-squares fit of the trajectory samples with C² knots.
pub fn fit_polynomial(traj: &Trajectory, segment_duration: f64) -> Result<PiecewisePolynomial> {
    let samples = &traj.samples;
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    if !(segment_duration > 0.0) {
        return Err(Error::InvalidArgument("segment_duration must be positive".into()));
    }
    let t0 = samples[0].t;
    let t1 = samples[n - 1].t;
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(Error::InvalidArgument("trajectory samples span zero time".into()));
    }
    let degree = FIT_DEGREE.min(n - 1);
    let ncoef = degree + 1;
    let segments = if degree < 3 {
        1
    } else {
        let wanted = (span / segment_duration).round().max(1.0) as usize;
        wanted.min((n / ncoef).max(1))
    };
    let h = span / segments as f64;
    let cont_orders = degree.min(2) + 1;
    let unknowns = segments * ncoef;
    let ncons = (segments - 1) * cont_orders;

    // Normal equations of the least-squares rows, in normalised local time s in [0, 1].
    let mut ata = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut atb = DMatrix::<f64>::zeros(unknowns, 3);
    let mut row = vec![0.0; ncoef];
    for smp in samples {
        let u = (smp.t - t0) / h;
        let seg = (u.floor() as usize).min(segments - 1);
        let s = u - seg as f64;
        let mut pw = 1.0;
        for r in row.iter_mut() {
            *r = pw;
            pw *= s;
        }
        let base = seg * ncoef;
        for a in 0..ncoef {
            for b in 0..ncoef {
                ata[(base + a, base + b)] += row[a] * row[b];
            }
            for axis in 0..3 {
                atb[(base + a, axis)] += row[a] * smp.position.axis(axis);
            }
        }
    }

    let size = unknowns + ncons;
    let mut kkt = DMatrix::<f64>::zeros(size, size);
    kkt.view_mut((0, 0), (unknowns, unknowns)).copy_from(&ata);
    let mut c = 0;
    for seg in 0..segments.saturating_sub(1) {
        for r in 0..cont_orders {
            let ci = unknowns + c;
            // r-th derivative at s = 1 of `seg` equals that at s = 0 of `seg + 1`.
            for j in r..ncoef {
                let v = binomial_falling(j, r);
                kkt[(ci, seg * ncoef + j)] = v;
                kkt[(seg * ncoef + j, ci)] = v;
            }
            let next = (seg + 1) * ncoef + r;
            let v = -binomial_falling(r, r);
            kkt[(ci, next)] = v;
            kkt[(next, ci)] = v;
            c += 1;
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(size, 3);
    rhs.view_mut((0, 0), (unknowns, 3)).copy_from(&atb);
    let sol = kkt.lu().solve(&rhs).ok_or(Error::SingularFit)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularFit);
    }

    let knot = |k: usize| if k == segments { t1 } else { t0 + k as f64 * h };
    let axis_segments = |axis: usize| -> Vec<PolySegment> {
        (0..segments)
            .map(|seg| {
                let coefficients = (0..ncoef)
                    .map(|j| sol[(seg * ncoef + j, axis)] / h.powi(j as i32))
                    .collect();
                PolySegment { t_start: knot(seg), t_end: knot(seg + 1), coefficients }
            })
            .collect()
    };
    Ok(PiecewisePolynomial { x: axis_segments(0), y: axis_segments(1), z: axis_segments(2) })
}

/// Reparameterises `t -> t * factor`: the same path flown `factor` times slower.
pub fn time_rescale(poly: &PiecewisePolynomial, factor: f64) -> Result<PiecewisePolynomial> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidArgument(format!("rescale factor must be positive, got {factor}")));
    }
    let rescale = |segs: &Vec<PolySegment>| -> Vec<PolySegment> {
        segs.iter()
            .map(|s| PolySegment {
                t_start: s.t_start * factor,
                t_end: s.t_end * factor,
                coefficients: s
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c / factor.powi(j as i32))
                    .collect(),
            })
            .collect()
    };
    Ok(PiecewisePolynomial { x: rescale(&poly.x), y: rescale(&poly.y), z: rescale(&poly.z) })
}

/// Rest-to-rest minimum-jerk legs through `waypoints`, starting at `t_start`.
///
/// Each leg lasts long enough that its peak speed is `cruise_speed`, and at
/// least `min_leg` seconds.
pub fn min_jerk_path(waypoints: &[Vec3], t_start: f64, cruise_speed: f64, min_leg: f64) -> Result<PiecewisePolynomial> {
    if waypoints.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(cruise_speed > 0.0) || !(min_leg > 0.0) {
        return Err(Error::InvalidArgument("cruise speed and leg time must be positive".into()));
    }
    let legs: Vec<(Vec3, Vec3)> = if waypoints.len() == 1 {
        vec![(waypoints[0], waypoints[0])]
    } else {
        waypoints.windows(2).map(|w| (w[0], w[1])).collect()
    };
    let mut axes: [Vec<PolySegment>; 3] = Default::default();
    let mut t = t_start;
    for (a, b) in legs {
        let delta = b - a;
        let duration = (1.875 * delta.norm() / cruise_speed).max(min_leg);
        for (axis, segs) in axes.iter_mut().enumerate() {
            let d = delta.axis(axis);
            segs.push(PolySegment {
                t_start: t,
                t_end: t + duration,
                coefficients: vec![
                    a.axis(axis),
                    0.0,
                    0.0,
                    10.0 * d / duration.powi(3),
                    -15.0 * d / duration.powi(4),
                    6.0 * d / duration.powi(5),
                ],
            });
        }
        t += duration;
    }
    let [x, y, z] = axes;
    Ok(PiecewisePolynomial { x, y, z })
}

/// A path plus a time warp that eases in from rest and out to rest over
/// `ramp` seconds. With `ramp = 0` the path is flown as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EasedPath {
    pub path: PiecewisePolynomial,
    pub ramp: f64,
}

impl EasedPath {
    pub fn new(path: PiecewisePolynomial, ramp: f64) -> Self {
        let ramp = ramp.clamp(0.0, path.duration());
        Self { path, ramp }
    }

    /// Time to fly the whole path, s.
    pub fn duration(&self) -> f64 {
        self.path.duration() + self.ramp
    }

    /// Warp `tau -> (f, f', f'')` from flight time to path time offset.
    fn warp(&self, tau: f64) -> (f64, f64, f64) {
        let (r, a) = (self.ramp, self.path.duration());
        if r == 0.0 {
            return (tau, 1.0, 0.0);
        }
        let w = a + r;
        if tau < r {
            (tau * tau / (2.0 * r), tau / r, 1.0 / r)
        } else if tau <= a {
            (tau - r / 2.0, 1.0, 0.0)
        } else {
            let u = w - tau;
            (a - u * u / (2.0 * r), u / r, -1.0 / r)
        }
    }

    /// Reference at flight time `tau` measured from the start of the path.
    pub fn sample(&self, tau: f64) -> ReferencePoint {
        if tau < 0.0 || tau > self.duration() {
            let mut r = sample_reference(&self.path, if tau < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
            r.t = tau;
            return r;
        }
        let (f, df, ddf) = self.warp(tau);
        let (p, v, a) = self.path.eval(self.path.start_time() + f);
        ReferencePoint {
            position: p,
            velocity: v * df,
            acceleration: a * (df * df) + v * ddf,
            t: tau,
            clamped: false,
        }
    }

    pub fn end_position(&self) -> Vec3 {
        self.path.end_position()
    }
}

/// Force command that tracks `reference`: model feed-forward for the
/// reference acceleration and plant damping, plus PID on the tracking error.
pub fn follow_step(
    reference: &ReferencePoint,
    drone: &DroneState,
    gains: &PidGains,
    pid: &PidState,
    dt: f64,
    quad: &QuadParams,
    integral_enabled: bool,
) -> Result<(Vec3, PidState)> {
    let error = reference.position - drone.position;
    let error_rate = reference.velocity - drone.velocity;
    let (correction, next) = pid_command(error, error_rate, pid, gains, dt, integral_enabled, f64::INFINITY)?;
    let feed_forward = (reference.acceleration + reference.velocity * quad.drag_coefficient) * quad.mass;
    Ok(((feed_forward + correction).clamp_norm(quad.max_command()), next))
}

/// Per-axis polynomial export record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolynomialExport {
    pub version: u32,
    pub coefficient_order: String,
    pub time_variable: String,
    pub axes: PiecewisePolynomial,
}

impl PolynomialExport {
    pub fn new(poly: &PiecewisePolynomial) -> Self {
        Self {
            version: 1,
            coefficient_order: "constant_first".into(),
            time_variable: "t - t_start".into(),
            axes: poly.clone(),
        }
    }
}

/// Dense-sampling deviation between the fit and the trajectory samples.
pub fn max_fit_deviation(poly: &PiecewisePolynomial, traj: &Trajectory) -> f64 {
    traj.samples
        .iter()
        .map(|s| poly.eval(s.t).0.distance(s.position))
        .fold(0.0, f64::max)
}
