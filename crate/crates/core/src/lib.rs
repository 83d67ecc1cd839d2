//! SlingDrone simulation core: ballistic pointing, quadrotor dynamics,
//! the interaction mode machine, trajectory following and the session loop.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ballistics;
pub mod config;
pub mod drone;
pub mod error;
pub mod export;
pub mod follow;
pub mod fsm;
pub mod model;
pub mod pointing;
pub mod vec3;

pub use ballistics::{generate_trajectory, BallisticState, Termination, Trajectory};
pub use config::{default_config, validate_config, SimConfig, Violation};
pub use drone::{drone_step, leash_force, pid_command, HandState, LeashModel, PidGains, PidState, QuadParams};
pub use error::{Error, Result};
pub use follow::{fit_polynomial, follow_step, sample_reference, time_rescale, PiecewisePolynomial, ReferencePoint};
pub use fsm::{fsm_step, search_pattern, slingshot_condition, Action, FsmContext, InteractionMode};
pub use model::{compute_displacement, Displacement, DroneState, HoverSetpoint, SceneObject, Thresholds};
pub use vec3::Vec3;
pub mod session;

pub use session::demo::{demo_config, demo_script};
pub use session::log::{replay, run_script, EventBody, ReplayVerdict, SessionEvent, SessionLog};
pub use session::script::{InputScript, ScriptEntry, TickInput};
pub use session::wire::{ClientMessage, StateFrame};
pub use session::World;
