//! The deterministic tick loop that binds the subsystems together.

pub mod demo;
pub mod log;
pub mod script;
pub mod wire;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use crate::ballistics::{hex, Trajectory};
use crate::config::{validate_config, SimConfig};
use crate::drone::{drone_step, leash_force, pid_command, tilt_estimate, HandState, PidState, GRAVITY};
use crate::error::{Error, Result};
use crate::follow::{fit_polynomial, follow_step, min_jerk_path, time_rescale, EasedPath, PiecewisePolynomial};
use crate::fsm::{fsm_step, Action, FsmContext, FsmInputs, FsmParams, InteractionMode};
use crate::model::{compute_displacement, Displacement, DroneState, HoverSetpoint, SceneObject};
use crate::pointing::point;
use crate::vec3::Vec3;

use log::{EventBody, SessionEvent};
use script::TickInput;
use wire::StateFrame;

/// Shortest leg of a search or return path, s.
const MIN_LEG: f64 = 0.3;

/// A reference being flown, with the session time it started.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveReference {
    pub path: EasedPath,
    pub started: f64,
}

impl ActiveReference {
    fn done(&self, t: f64) -> bool {
        t - self.started >= self.path.duration()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TickOutput {
    pub events: Vec<SessionEvent>,
    pub frame: Option<StateFrame>,
}

/// Complete session state. Cloning gives an independent copy that evolves
/// identically under identical inputs.
#[derive(Debug, Clone)]
pub struct World {
    cfg: SimConfig,
    tick: u64,
    drone: DroneState,
    pid: PidState,
    fsm: FsmContext,
    objects: Vec<SceneObject>,
    hand: HandState,
    displacement: Displacement,
    reference: Option<ActiveReference>,
    fitted: Option<PiecewisePolynomial>,
    command: Vec3,
    tilt: f64,
    seq: u64,
    trajectory_dirty: bool,
    unsent: Vec<SessionEvent>,
    halted: Option<String>,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        validate_config(&cfg).map_err(Error::InvalidConfig)?;
        let setpoint = HoverSetpoint::new(cfg.setpoint)?;
        let params = FsmParams { search_side: cfg.search_side, arrival_tolerance: cfg.follow.arrival_tolerance };
        let drone = DroneState::at_rest(cfg.start_position);
        let displacement = compute_displacement(drone.position, cfg.setpoint)?;
        Ok(Self {
            tick: 0,
            pid: PidState::default(),
            fsm: FsmContext::new(setpoint, params),
            objects: cfg.scene_objects(),
            hand: HandState { position: drone.position + cfg.leash.attach_offset, grabbing: false },
            displacement,
            reference: None,
            fitted: None,
            command: Vec3::ZERO,
            tilt: 0.0,
            seq: 0,
            trajectory_dirty: false,
            unsent: Vec::new(),
            halted: None,
            rng: ChaCha8Rng::seed_from_u64(cfg.quad.noise_seed),
            drone,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }
    pub fn tick_count(&self) -> u64 {
        self.tick
    }
    pub fn time(&self) -> f64 {
        self.tick as f64 / self.cfg.physics_rate
    }
    pub fn mode(&self) -> InteractionMode {
        self.fsm.mode
    }
    pub fn drone(&self) -> &DroneState {
        &self.drone
    }
    pub fn fsm(&self) -> &FsmContext {
        &self.fsm
    }
    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }
    pub fn displacement(&self) -> &Displacement {
        &self.displacement
    }
    pub fn reference(&self) -> Option<&ActiveReference> {
        self.reference.as_ref()
    }
    /// Polynomial fitted to the frozen trajectory, before slowing.
    pub fn fitted(&self) -> Option<&PiecewisePolynomial> {
        self.fitted.as_ref()
    }
    pub fn tilt(&self) -> f64 {
        self.tilt
    }
    /// Set once an internal error has stopped the session.
    pub fn halted(&self) -> Option<&str> {
        self.halted.as_deref()
    }

    /// Where an idle, open hand sits: at the leash attachment point.
    pub fn idle_hand(&self) -> Vec3 {
        self.cfg.setpoint + self.cfg.leash.attach_offset
    }

    /// The trajectory shown to the user: the frozen one, else the live one.
    pub fn shown_trajectory(&self) -> Option<&Trajectory> {
        self.fsm.frozen_trajectory.as_ref().or(match self.fsm.mode {
            InteractionMode::Slingshot => self.fsm.last_valid_trajectory.as_ref(),
            _ => None,
        })
    }

    /// Digest of everything that determines future evolution.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.tick.to_le_bytes());
        for v in [self.drone.position, self.drone.velocity, self.hand.position, self.pid.integral, self.pid.previous_error] {
            for c in v.to_array() {
                h.update(c.to_bits().to_le_bytes());
            }
        }
        h.update([self.hand.grabbing as u8]);
        h.update(self.fsm.mode.label().as_bytes());
        if let Some(t) = &self.fsm.frozen_trajectory {
            h.update(t.digest().as_bytes());
        }
        for o in &self.objects {
            h.update(o.id.as_bytes());
            for c in o.center.to_array() {
                h.update(c.to_bits().to_le_bytes());
            }
            h.update([o.grabbed as u8]);
        }
        hex(&h.finalize()[..8])
    }

    fn push(&mut self, events: &mut Vec<SessionEvent>, body: EventBody) {
        self.seq += 1;
        events.push(SessionEvent { seq: self.seq, tick: self.tick, t: self.time(), body });
    }

    /// One physics step. Errors from inside the loop stop the session with a
    /// diagnostic event instead of being returned.
    pub fn tick(&mut self, input: &TickInput) -> Result<TickOutput> {
        if let Some(why) = &self.halted {
            return Err(Error::Invariant(format!("session halted: {why}")));
        }
        if !input.hand.position.is_finite() || !input.inject_accel.is_finite() {
            return Err(Error::NonFinite("tick input"));
        }
        self.tick += 1;
        let mut events = Vec::new();
        self.seq += 1;
        let input_seq = self.seq;
        let result = self.advance(input, &mut events);
        let input_event = SessionEvent {
            seq: input_seq,
            tick: self.tick,
            t: self.time(),
            body: EventBody::Input {
                hand: input.hand.position,
                grab: input.hand.grabbing,
                inject: (input.inject_accel != Vec3::ZERO).then_some(input.inject_accel),
                state_hash: self.state_hash(),
            },
        };
        events.insert(0, input_event);
        if let Err(e) = result {
            let message = e.to_string();
            self.push(&mut events, EventBody::Diagnostic { message: message.clone() });
            self.halted = Some(message);
        }
        self.unsent.extend(events.iter().filter(|e| e.body.kind() != "input").cloned());
        let frame = (self.tick % self.cfg.broadcast_every() == 0).then(|| self.frame());
        Ok(TickOutput { events, frame })
    }

    fn advance(&mut self, input: &TickInput, events: &mut Vec<SessionEvent>) -> Result<()> {
        let sensed = self.sensed_drone();
        let cfg = &self.cfg;
        let dt = cfg.dt();
        let t = self.time();
        let q = cfg.quad;
        self.hand = input.hand;
        let f_ext = leash_force(&self.hand, self.drone.position + cfg.leash.attach_offset, &cfg.leash);

        let mode = self.fsm.mode;
        let integral = mode.integral_enabled();
        let (command, pid) = if mode == InteractionMode::EmergencyStop {
            (Vec3::new(0.0, 0.0, -q.mass * GRAVITY), self.pid)
        } else if let Some(r) = &self.reference {
            let reference = r.path.sample(t - dt - r.started);
            follow_step(&reference, &sensed, &cfg.pid, &self.pid, dt, &q, integral)?
        } else {
            let error = cfg.setpoint - sensed.position;
            pid_command(error, -sensed.velocity, &self.pid, &cfg.pid, dt, integral, q.max_command())?
        };
        self.pid = pid;
        // An injected command stands in for a faulty controller: it replaces
        // the horizontal command and adds to the vertical one.
        let total = if input.inject_accel == Vec3::ZERO {
            command
        } else {
            let inject = input.inject_accel * q.mass;
            Vec3::new(inject.x, inject.y, command.z + inject.z)
        };
        self.command = total;
        self.tilt = tilt_estimate(total / q.mass);

        let mut next = drone_step(&self.drone, total, f_ext, &q, dt)?;
        if next.position.z < 0.0 {
            next.position.z = 0.0;
            next.velocity.z = next.velocity.z.max(0.0);
        }
        self.drone = next;
        if let Some(id) = &self.fsm.grabbed_object {
            if let Some(o) = self.objects.iter_mut().find(|o| &o.id == id) {
                o.center = self.drone.position - Vec3::new(0.0, 0.0, o.radius);
            }
        }
        self.displacement = compute_displacement(self.drone.position, cfg.setpoint)?;

        let inputs = FsmInputs {
            hand_engaged: self.hand.grabbing
                && self.hand.position.distance(self.drone.position + cfg.leash.attach_offset) > cfg.leash.rest_length,
            reference_done: self.reference.as_ref().is_some_and(|r| r.done(t)),
            object_in_reach: if mode == InteractionMode::Search {
                self.objects
                    .iter()
                    .find(|o| !o.grabbed && o.surface_distance(self.drone.position) <= cfg.follow.grab_range)
                    .map(|o| o.id.clone())
            } else {
                None
            },
        };
        let (ctx, actions) = fsm_step(&self.fsm, &self.drone, &self.displacement, &cfg.thresholds, self.tilt, &inputs)?;
        let from = self.fsm.mode;
        self.fsm = ctx;
        let to = self.fsm.mode;
        if from != to {
            self.pid = PidState::default();
            self.push(events, EventBody::ModeChange { from, to });
            if !to.is_following() {
                self.reference = None;
            }
            if !to.has_frozen() {
                self.fitted = None;
            }
            if matches!(to, InteractionMode::Hover | InteractionMode::Recovering) {
                self.trajectory_dirty = true;
            }
        }
        for action in actions {
            self.apply(action, events)?;
        }
        if to == InteractionMode::Delivered && from != to && !events.iter().any(|e| e.body.kind() == "deliver") {
            self.push(events, EventBody::Deliver { object_id: None });
        }
        Ok(())
    }

    /// Position estimate fed to the controllers, optionally noisy.
    fn sensed_drone(&mut self) -> DroneState {
        let std = self.cfg.quad.noise_std;
        if std <= 0.0 {
            return self.drone;
        }
        let normal = Normal::new(0.0, std).expect("validated noise std");
        let noise = Vec3::new(normal.sample(&mut self.rng), normal.sample(&mut self.rng), normal.sample(&mut self.rng));
        DroneState { position: self.drone.position + noise, ..self.drone }
    }

    fn apply(&mut self, action: Action, events: &mut Vec<SessionEvent>) -> Result<()> {
        let t = self.time();
        match action {
            Action::UpdateTrajectory => {
                let scene: Vec<SceneObject> = self.objects.clone();
                let result = point(self.cfg.setpoint, &self.displacement, &scene, &self.cfg)?;
                let traj = result
                    .trajectory
                    .ok_or_else(|| Error::Invariant("pointing produced no trajectory".into()))?;
                self.push(
                    events,
                    EventBody::TrajectoryUpdate {
                        hash: traj.digest(),
                        endpoint: traj.endpoint,
                        termination: traj.termination.clone(),
                        samples: traj.samples.len(),
                    },
                );
                self.fsm.record_trajectory(traj);
                self.trajectory_dirty = true;
            }
            Action::FollowTrajectory => {
                let frozen = self
                    .fsm
                    .frozen_trajectory
                    .as_ref()
                    .ok_or_else(|| Error::Invariant("launch without frozen trajectory".into()))?;
                let (frozen_hash, endpoint) = (frozen.digest(), frozen.endpoint);
                let fitted = fit_polynomial(frozen, self.cfg.follow.segment_duration)?;
                let slow = time_rescale(&fitted, self.cfg.follow.slow_factor)?;
                self.reference = Some(ActiveReference { path: EasedPath::new(slow, self.cfg.follow.launch_ramp), started: t });
                self.fitted = Some(fitted);
                self.push(events, EventBody::Launch { frozen_hash, endpoint });
            }
            Action::Waypoints { points } => {
                let mut all = vec![self.drone.position];
                all.extend(points);
                let path = min_jerk_path(&all, 0.0, self.cfg.follow.cruise_speed, MIN_LEG)?;
                self.reference = Some(ActiveReference { path: EasedPath::new(path, 0.0), started: t });
            }
            Action::AttachObject { object_id } => {
                if let Some(o) = self.objects.iter_mut().find(|o| o.id == object_id) {
                    o.grabbed = true;
                }
                self.push(events, EventBody::Attach { object_id });
            }
            Action::DetachObject { object_id } => {
                if let Some(o) = self.objects.iter_mut().find(|o| o.id == object_id) {
                    o.grabbed = false;
                }
                self.push(events, EventBody::Deliver { object_id: Some(object_id) });
            }
            Action::MotorsOff => {
                self.reference = None;
                let tilt = self.tilt;
                self.push(events, EventBody::Emergency { tilt });
            }
        }
        Ok(())
    }

    /// Snapshot for the wire; carries the trajectory only if it changed.
    fn frame(&mut self) -> StateFrame {
        let trajectory = if std::mem::take(&mut self.trajectory_dirty) {
            Some(self.shown_trajectory().map(wire::downsample).unwrap_or_default())
        } else {
            None
        };
        StateFrame {
            kind: wire::StateTag::State,
            v: wire::WIRE_VERSION,
            tick: self.tick,
            t: self.time(),
            mode: self.fsm.mode,
            drone: wire::DroneView { position: self.drone.position, velocity: self.drone.velocity, tilt: self.tilt },
            displacement: self.displacement.d,
            trajectory,
            objects: self.objects.clone(),
            events: std::mem::take(&mut self.unsent),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_config;

    fn idle(w: &World) -> TickInput {
        TickInput { hand: HandState { position: w.idle_hand(), grabbing: false }, inject_accel: Vec3::ZERO }
    }

    #[test]
    fn hundred_ticks_give_33_frames() {
        let mut w = World::new(default_config()).unwrap();
        let input = idle(&w);
        let frames = (0..100).filter(|_| w.tick(&input).unwrap().frame.is_some()).count();
        assert_eq!(frames, 33);
    }

    #[test]
    fn idle_hover_makes_no_trajectory_updates() {
        let mut w = World::new(default_config()).unwrap();
        let input = idle(&w);
        for _ in 0..300 {
            let out = w.tick(&input).unwrap();
            assert!(out.events.iter().all(|e| e.body.kind() != "trajectory_update"));
        }
        assert_eq!(w.mode(), InteractionMode::Hover);
    }

    #[test]
    fn time_is_tick_over_rate() {
        let mut w = World::new(default_config()).unwrap();
        let input = idle(&w);
        for _ in 0..7 {
            w.tick(&input).unwrap();
        }
        assert_eq!(w.time(), 7.0 / 100.0);
    }

    #[test]
    fn injected_tilt_stops_motors_same_tick() {
        let mut w = World::new(default_config()).unwrap();
        let mut input = idle(&w);
        for _ in 0..10 {
            w.tick(&input).unwrap();
        }
        input.inject_accel = Vec3::new(17.5, 0.0, 0.0);
        let out = w.tick(&input).unwrap();
        assert_eq!(w.mode(), InteractionMode::EmergencyStop);
        assert!(out.events.iter().any(|e| e.body.kind() == "emergency"));
        // Falls and rests on the ground afterwards.
        input.inject_accel = Vec3::ZERO;
        for _ in 0..2000 {
            w.tick(&input).unwrap();
        }
        assert_eq!(w.drone().position.z, 0.0);
        assert_eq!(w.mode(), InteractionMode::EmergencyStop);
    }

    #[test]
    fn clones_evolve_identically() {
        let mut a = World::new(default_config()).unwrap();
        let mut input = idle(&a);
        input.hand.grabbing = true;
        input.hand.position.x -= 0.25;
        for _ in 0..50 {
            a.tick(&input).unwrap();
        }
        let mut b = a.clone();
        for _ in 0..50 {
            let (ea, eb) = (a.tick(&input).unwrap().events, b.tick(&input).unwrap().events);
            assert_eq!(ea, eb);
        }
        assert_eq!(a.state_hash(), b.state_hash());
    }
}
