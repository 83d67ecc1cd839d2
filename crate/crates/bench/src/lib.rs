//! Fixtures shared by the benchmarks.

use slingdrone_core::{default_config, demo_config, demo_script, generate_trajectory, Displacement, Trajectory, Vec3, World};

/// The default pointing arc: a 0.1 m pull straight back from the setpoint.
pub fn default_arc() -> Trajectory {
    let d = Displacement::from_vec(Vec3::new(-0.1, 0.0, 0.0)).expect("finite");
    generate_trajectory(Vec3::new(0.0, 0.0, 1.5), &d, &[], &default_config()).expect("valid arc")
}

/// Demo world advanced to the middle of the held pull, where every tick
/// recomputes the pointing trajectory.
pub fn aiming_world() -> World {
    let cfg = demo_config();
    let script = demo_script();
    let mut world = World::new(cfg.clone()).expect("valid config");
    let idle = world.idle_hand();
    for tick in 1..=800u64 {
        world.tick(&script.sample(tick as f64 / cfg.physics_rate, idle)).expect("tick");
    }
    world
}
