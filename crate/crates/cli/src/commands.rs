use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use slingdrone_core::export::{write_polynomial, write_sidecar, write_trajectory_csv};
use slingdrone_core::session::log::write_log;
use slingdrone_core::{
    demo_script, fit_polynomial, generate_trajectory, replay, run_script, Displacement, EventBody, InputScript,
    ReplayVerdict, SessionLog, SimConfig, Vec3,
};

pub fn sim(script: Option<&Path>, cfg: &SimConfig, out: &Path) -> anyhow::Result<()> {
    let script = match script {
        Some(p) => InputScript::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => demo_script(),
    };
    let events = run_script(&script, cfg)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_log(BufWriter::new(file), cfg, &events)?;

    let modes: Vec<&str> = events
        .iter()
        .filter_map(|e| match &e.body {
            EventBody::ModeChange { to, .. } => Some(to.label()),
            _ => None,
        })
        .collect();
    eprintln!("{} events over {:.2} s", events.len(), script.duration);
    eprintln!("modes: {}", modes.join(" -> "));
    for e in &events {
        if let EventBody::Diagnostic { message } = &e.body {
            eprintln!("session stopped at tick {}: {message}", e.tick);
        }
    }
    Ok(())
}

/// Returns whether the log replayed cleanly.
pub fn replay_log(log: &Path, cfg: Option<&SimConfig>) -> anyhow::Result<bool> {
    let file = File::open(log).with_context(|| format!("opening {}", log.display()))?;
    let log = SessionLog::read(BufReader::new(file))?;
    match replay(&log, cfg)? {
        ReplayVerdict::Ok { ticks, events } => {
            println!("ok: {ticks} ticks, {events} events reproduced");
            Ok(true)
        }
        ReplayVerdict::Diverged { tick, expected, found } => {
            println!("diverged at tick {tick}");
            println!("  logged:   {expected}");
            println!("  replayed: {found}");
            Ok(false)
        }
    }
}

pub struct TrajectoryRequest {
    pub d: Vec3,
    pub from: Option<Vec3>,
    pub out: PathBuf,
    pub poly: Option<PathBuf>,
}

pub fn trajectory(req: &TrajectoryRequest, cfg: &SimConfig) -> anyhow::Result<()> {
    let d = Displacement::from_vec(req.d)?;
    if d.is_zero() {
        bail!("displacement must be non-zero");
    }
    let p0 = req.from.unwrap_or(cfg.setpoint);
    let traj = generate_trajectory(p0, &d, &cfg.scene_objects(), cfg)?;
    write_trajectory_csv(BufWriter::new(File::create(&req.out)?), &traj)?;
    let sidecar = req.out.with_extension("json");
    let mut w = BufWriter::new(File::create(&sidecar)?);
    write_sidecar(&mut w, &traj)?;
    w.flush()?;
    if let Some(path) = &req.poly {
        let poly = fit_polynomial(&traj, cfg.follow.segment_duration)?;
        let mut w = BufWriter::new(File::create(path)?);
        write_polynomial(&mut w, &poly)?;
        w.flush()?;
    }
    println!(
        "{} samples, {} at {} after {:.4} s",
        traj.samples.len(),
        traj.termination.label(),
        traj.endpoint,
        traj.end_time
    );
    Ok(())
}
