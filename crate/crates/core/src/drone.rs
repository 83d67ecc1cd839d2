//! Point-mass quadrotor plant, position PID and the elastic leash.
//!
//! The position controller follows the Crazyflie convention: gains map a
//! position error in metres to a force command in newtons. The plant divides
//! by the vehicle mass. Gravity is assumed perfectly compensated by thrust
//! while the motors run, so commands are relative to hover.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DroneState;
use crate::vec3::Vec3;

/// Gravity used for the plant and the tilt estimate, m/s².
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisGains {
    pub kp: f64,
    pub kd: f64,
    pub ki: f64,
}

impl AxisGains {
    pub const fn new(kp: f64, kd: f64, ki: f64) -> Self {
        Self { kp, kd, ki }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub x: AxisGains,
    pub y: AxisGains,
    pub z: AxisGains,
    /// Per-axis bound on the accumulated integral, m·s.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        // Crazyflie position-controller defaults.
        let xy = AxisGains::new(0.4, 0.2, 0.05);
        Self {
            x: xy,
            y: xy,
            z: AxisGains::new(1.25, 0.4, 0.05),
            integral_limit: 0.5,
        }
    }
}

impl PidGains {
    fn kp(&self) -> Vec3 {
        Vec3::new(self.x.kp, self.y.kp, self.z.kp)
    }
    fn kd(&self) -> Vec3 {
        Vec3::new(self.x.kd, self.y.kd, self.z.kd)
    }
    fn ki(&self) -> Vec3 {
        Vec3::new(self.x.ki, self.y.ki, self.z.ki)
    }

    pub fn all_non_negative(&self) -> bool {
        [self.x, self.y, self.z]
            .iter()
            .all(|g| g.kp >= 0.0 && g.kd >= 0.0 && g.ki >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: Vec3,
    pub previous_error: Vec3,
}

/// One PID evaluation. Returns the force command (N) and the next state.
///
/// The integral only accumulates when `integral_enabled`; otherwise it is
/// carried over untouched. The output norm is clamped to `output_limit`.
pub fn pid_command(
    error: Vec3,
    error_rate: Vec3,
    pid: &PidState,
    gains: &PidGains,
    dt: f64,
    integral_enabled: bool,
    output_limit: f64,
) -> Result<(Vec3, PidState)> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !error.is_finite() || !error_rate.is_finite() {
        return Err(Error::NonFinite("pid error"));
    }
    let integral = if integral_enabled {
        let lim = gains.integral_limit;
        (pid.integral + error * dt).map(|v| v.clamp(-lim, lim))
    } else {
        pid.integral
    };
    let u = gains.kp().hadamard(error) + gains.kd().hadamard(error_rate) + gains.ki().hadamard(integral);
    let next = PidState {
        integral,
        previous_error: error,
    };
    Ok((u.clamp_norm(output_limit), next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeashModel {
    /// Unstretched length, m.
    pub rest_length: f64,
    /// Spring constant when taut, N/m.
    pub stiffness: f64,
    /// Attachment point relative to the drone centre, m.
    pub attach_offset: Vec3,
}

impl Default for LeashModel {
    fn default() -> Self {
        Self {
            rest_length: 0.1,
            stiffness: 50.0,
            attach_offset: Vec3::new(0.0, 0.0, -0.02),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HandState {
    pub position: Vec3,
    pub grabbing: bool,
}

/// Force the leash exerts on the drone. A leash can only pull.
pub fn leash_force(hand: &HandState, drone_attach: Vec3, leash: &LeashModel) -> Vec3 {
    if !hand.grabbing {
        return Vec3::ZERO;
    }
    let span = hand.position - drone_attach;
    let length = span.norm();
    if length <= leash.rest_length {
        return Vec3::ZERO;
    }
    span * (leash.stiffness * (length - leash.rest_length) / length)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadParams {
    /// Vehicle mass, kg.
    pub mass: f64,
    /// Bound on the commanded acceleration, m/s².
    pub max_accel: f64,
    /// Linear velocity damping, 1/s.
    pub drag_coefficient: f64,
    /// Standard deviation of position-estimate noise, m. Zero disables it.
    pub noise_std: f64,
    pub noise_seed: u64,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self {
            mass: 0.033,
            max_accel: 5.0,
            drag_coefficient: 0.3,
            noise_std: 0.0,
            noise_seed: 0,
        }
    }
}

impl QuadParams {
    /// Largest force command the controller may issue, N.
    pub fn max_command(&self) -> f64 {
        self.mass * self.max_accel
    }
}

/// Advances the plant by `dt` with semi-implicit Euler.
pub fn drone_step(
    state: &DroneState,
    command: Vec3,
    external_force: Vec3,
    q: &QuadParams,
    dt: f64,
) -> Result<DroneState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !command.is_finite() {
        return Err(Error::NonFinite("command force"));
    }
    if !external_force.is_finite() {
        return Err(Error::NonFinite("external force"));
    }
    let accel = (command + external_force) / q.mass - state.velocity * q.drag_coefficient;
    let velocity = state.velocity + accel * dt;
    Ok(DroneState {
        position: state.position + velocity * dt,
        velocity,
        time: state.time + dt,
    })
}

/// Tilt implied by a commanded acceleration for a point-mass quadrotor.
pub fn tilt_estimate(accel_cmd: Vec3) -> f64 {
    (accel_cmd.horizontal_norm() / GRAVITY).atan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    const NO_LIMIT: f64 = f64::INFINITY;

    #[test]
    fn pid_proportional_terms() {
        let g = PidGains::default();
        let (u, _) = pid_command(Vec3::new(0.1, 0.0, 0.0), Vec3::ZERO, &PidState::default(), &g, 0.01, false, NO_LIMIT).unwrap();
        assert!((u.x - 0.04).abs() < 1e-15);
        let (u, _) = pid_command(Vec3::new(0.0, 0.0, 0.1), Vec3::ZERO, &PidState::default(), &g, 0.01, false, NO_LIMIT).unwrap();
        assert!((u.z - 0.125).abs() < 1e-15);
    }

    #[test]
    fn pid_integral_disabled_stays_zero() {
        let g = PidGains::default();
        let mut st = PidState::default();
        for i in 0..500 {
            let e = Vec3::new(0.3 * (i as f64).sin(), 0.1, -0.2);
            st = pid_command(e, Vec3::ZERO, &st, &g, 0.01, false, NO_LIMIT).unwrap().1;
            assert_eq!(st.integral, Vec3::ZERO);
        }
    }

    #[test]
    fn pid_integral_accumulates_and_clamps() {
        let g = PidGains::default();
        let (_, st) = pid_command(Vec3::new(0.1, 0.0, 0.0), Vec3::ZERO, &PidState::default(), &g, 0.01, true, NO_LIMIT).unwrap();
        assert!((st.integral.x - 0.001).abs() < 1e-15);
        let mut st = PidState::default();
        for _ in 0..10_000 {
            st = pid_command(Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO, &st, &g, 0.01, true, NO_LIMIT).unwrap().1;
        }
        assert_eq!(st.integral.x, g.integral_limit);
    }

    #[test]
    fn pid_output_is_clamped() {
        let g = PidGains::default();
        let (u, _) = pid_command(Vec3::new(10.0, 0.0, 0.0), Vec3::ZERO, &PidState::default(), &g, 0.01, false, 0.165).unwrap();
        assert!((u.norm() - 0.165).abs() < 1e-15);
    }

    #[test]
    fn pid_rejects_bad_dt() {
        let g = PidGains::default();
        assert!(pid_command(Vec3::ZERO, Vec3::ZERO, &PidState::default(), &g, 0.0, false, 1.0).is_err());
    }

    #[test]
    fn leash_examples() {
        let leash = LeashModel::default();
        let attach = Vec3::new(0.0, 0.0, 1.48);
        let loose = HandState { position: Vec3::new(0.0, 0.0, 1.0), grabbing: false };
        assert_eq!(leash_force(&loose, attach, &leash), Vec3::ZERO);

        let slack = HandState { position: Vec3::new(0.0, 0.0, 1.43), grabbing: true };
        assert_eq!(leash_force(&slack, attach, &leash), Vec3::ZERO);

        let taut = HandState { position: Vec3::new(0.0, 0.0, 1.33), grabbing: true };
        let f = leash_force(&taut, attach, &leash);
        assert!((f - Vec3::new(0.0, 0.0, -2.5)).norm() < 1e-12);
    }

    #[test]
    fn drone_step_examples() {
        let q = QuadParams::default();
        let s = DroneState::at_rest(Vec3::new(0.0, 0.0, 1.5));
        let n = drone_step(&s, Vec3::ZERO, Vec3::ZERO, &q, 0.01).unwrap();
        assert_eq!(n.position, s.position);
        assert_eq!(n.velocity, Vec3::ZERO);
        assert!((n.time - 0.01).abs() < 1e-15);

        let n = drone_step(&s, Vec3::ZERO, Vec3::new(0.0, 0.0, -0.033), &q, 0.01).unwrap();
        let accel = n.velocity / 0.01;
        assert!((accel - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);

        assert!(drone_step(&s, Vec3::ZERO, Vec3::new(f64::NAN, 0.0, 0.0), &q, 0.01).is_err());
    }

    #[test]
    fn tilt_examples() {
        assert_eq!(tilt_estimate(Vec3::new(0.0, 0.0, 42.0)), 0.0);
        assert!((tilt_estimate(Vec3::new(GRAVITY, 0.0, 0.0)) - FRAC_PI_4).abs() < 1e-15);
        let a = GRAVITY * 60f64.to_radians().tan();
        assert!((tilt_estimate(Vec3::new(0.0, a, 0.0)) - 60f64.to_radians()).abs() < 1e-12);
    }

    /// Hover loop with the integral disabled and a fixed hand, as during a pull.
    fn hold(hand: HandState, seconds: f64) -> Vec<DroneState> {
        let (gains, leash, q) = (PidGains::default(), LeashModel::default(), QuadParams::default());
        let p_des = Vec3::new(0.0, 0.0, 1.5);
        let dt = 0.01;
        let mut s = DroneState::at_rest(p_des);
        let mut pid = PidState::default();
        let mut out = Vec::new();
        for _ in 0..(seconds / dt).round() as usize {
            let f = leash_force(&hand, s.position + leash.attach_offset, &leash);
            let (u, next) = pid_command(p_des - s.position, -s.velocity, &pid, &gains, dt, false, q.max_command()).unwrap();
            pid = next;
            s = drone_step(&s, u, f, &q, dt).unwrap();
            out.push(s);
        }
        out
    }

    #[test]
    fn steady_pull_balances_spring_and_controller() {
        // Hand offset horizontally from the nominal attach point: the leash
        // stays horizontal, so equilibrium solves kp*d = stiffness*(s - d - L).
        let (gains, leash) = (PidGains::default(), LeashModel::default());
        for s_off in [0.15, 0.2, 0.3] {
            let hand = HandState {
                position: Vec3::new(-s_off, 0.0, 1.5) + leash.attach_offset,
                grabbing: true,
            };
            let trace = hold(hand, 15.0);
            let last = trace.last().unwrap();
            let expected = leash.stiffness * (s_off - leash.rest_length) / (gains.x.kp + leash.stiffness);
            assert!((last.position.x + expected).abs() < 1e-6, "s={s_off}: {} vs {}", last.position.x, -expected);
            assert!(last.speed() < 1e-6);
        }
    }

    #[test]
    fn displacement_monotone_in_pull_extension() {
        let leash = LeashModel::default();
        let mut prev = 0.0;
        for i in 1..=8 {
            let s_off = 0.1 + 0.03 * i as f64;
            let hand = HandState { position: Vec3::new(-s_off, 0.0, 1.5) + leash.attach_offset, grabbing: true };
            let d = -hold(hand, 10.0).last().unwrap().position.x;
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn release_produces_velocity_spike() {
        let (gains, q) = (PidGains::default(), QuadParams::default());
        let p_des = Vec3::new(0.0, 0.0, 1.5);
        for pull in [0.1, 0.15, 0.2, 0.3] {
            let mut s = DroneState::at_rest(p_des + Vec3::new(-pull, 0.0, 0.0));
            let mut pid = PidState::default();
            let mut peak: f64 = 0.0;
            for _ in 0..50 {
                let (u, next) = pid_command(p_des - s.position, -s.velocity, &pid, &gains, 0.01, false, q.max_command()).unwrap();
                pid = next;
                s = drone_step(&s, u, Vec3::ZERO, &q, 0.01).unwrap();
                peak = peak.max(s.speed());
            }
            assert!(peak >= 0.1, "pull {pull}: peak speed {peak}");
        }
    }

    fn finite_vec(r: f64) -> impl Strategy<Value = Vec3> {
        (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn leash_never_pushes(hand in finite_vec(1.0), attach in finite_vec(1.0), grabbing in any::<bool>()) {
            let leash = LeashModel::default();
            let f = leash_force(&HandState { position: hand, grabbing }, attach, &leash);
            let span = hand - attach;
            if !grabbing || span.norm() <= leash.rest_length {
                prop_assert_eq!(f, Vec3::ZERO);
            } else {
                prop_assert!(f.dot(span) > 0.0);
                prop_assert!((f.norm() - leash.stiffness * (span.norm() - leash.rest_length)).abs() < 1e-9);
            }
        }

        #[test]
        fn integral_untouched_when_disabled(e in finite_vec(5.0), r in finite_vec(5.0), i in finite_vec(0.5)) {
            let st = PidState { integral: i, previous_error: Vec3::ZERO };
            let (_, next) = pid_command(e, r, &st, &PidGains::default(), 0.01, false, 1.0).unwrap();
            prop_assert_eq!(next.integral, i);
        }
    }
}
