//! File exports for trajectories and fitted polynomials.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ballistics::{Termination, Trajectory};
use crate::error::Result;
use crate::follow::{PiecewisePolynomial, PolynomialExport};
use crate::vec3::Vec3;

pub const CSV_HEADER: [&str; 7] = ["t", "x", "y", "z", "vx", "vy", "vz"];

/// Writes one row per sample: `t,x,y,z,vx,vy,vz`.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for s in &traj.samples {
        let (p, v) = (s.position, s.velocity);
        out.serialize((s.t, p.x, p.y, p.z, v.x, v.y, v.z))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads back a CSV written by [`write_trajectory_csv`] as `(t, position, velocity)` rows.
pub fn read_trajectory_csv<R: std::io::Read>(r: R) -> Result<Vec<(f64, Vec3, Vec3)>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let (t, x, y, z, vx, vy, vz): (f64, f64, f64, f64, f64, f64, f64) = rec?;
        rows.push((t, Vec3::new(x, y, z), Vec3::new(vx, vy, vz)));
    }
    Ok(rows)
}

/// Summary written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySidecar {
    pub version: u32,
    pub termination: Termination,
    pub endpoint: Vec3,
    pub end_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
    pub samples: usize,
    pub hash: String,
}

impl TrajectorySidecar {
    pub fn new(traj: &Trajectory) -> Self {
        Self {
            version: 1,
            termination: traj.termination.clone(),
            endpoint: traj.endpoint,
            end_time: traj.end_time,
            object_id: traj.termination.object_id().map(str::to_owned),
            samples: traj.samples.len(),
            hash: traj.digest(),
        }
    }
}

pub fn write_sidecar<W: Write>(w: W, traj: &Trajectory) -> Result<()> {
    serde_json::to_writer_pretty(w, &TrajectorySidecar::new(traj))?;
    Ok(())
}

pub fn write_polynomial<W: Write>(w: W, poly: &PiecewisePolynomial) -> Result<()> {
    serde_json::to_writer_pretty(w, &PolynomialExport::new(poly))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballistics::generate_trajectory;
    use crate::config::default_config;
    use crate::follow::fit_polynomial;
    use crate::model::Displacement;

    fn arc() -> Trajectory {
        let d = Displacement::from_vec(Vec3::new(-0.1, 0.0, 0.0)).unwrap();
        generate_trajectory(Vec3::new(0.0, 0.0, 1.5), &d, &[], &default_config()).unwrap()
    }

    #[test]
    fn csv_round_trips_exactly() {
        let traj = arc();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,z,vx,vy,vz\n"));
        let rows = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), traj.samples.len());
        for (row, s) in rows.iter().zip(&traj.samples) {
            assert_eq!(*row, (s.t, s.position, s.velocity));
        }
    }

    #[test]
    fn sidecar_and_polynomial_json() {
        let traj = arc();
        let mut buf = Vec::new();
        write_sidecar(&mut buf, &traj).unwrap();
        let side: TrajectorySidecar = serde_json::from_slice(&buf).unwrap();
        assert_eq!(side, TrajectorySidecar::new(&traj));
        assert_eq!(side.object_id, None);

        let poly = fit_polynomial(&traj, 0.25).unwrap();
        let mut buf = Vec::new();
        write_polynomial(&mut buf, &poly).unwrap();
        let back: PolynomialExport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back.axes, poly);
        assert_eq!(back.coefficient_order, "constant_first");
    }
}
