//! CSV and JSON writers. CSVs use `,`, `.` decimals, LF line endings and a
//! header row; floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use duffing_core::poincare::TwistProfile;
use duffing_core::{SpecialFunctions, Trajectory};
use serde::Serialize;
use serde_json::Value;

use crate::AppError;

/// Analysis parameters as recorded in findings and manifests.
pub type Params = BTreeMap<String, Value>;

pub fn csv_writer(path: &Path) -> Result<csv::Writer<File>, AppError> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

/// Write `rows` with a header taken from the row type's field names. An
/// empty table still gets its header from `header`.
pub fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), AppError> {
    let mut w = if rows.is_empty() {
        let mut w = csv_writer(path)?;
        w.write_record(header)?;
        w
    } else {
        csv_writer(path)?
    };
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// One JSON finding: the result plus everything needed to reproduce it.
#[derive(Debug, Serialize)]
pub struct Finding<'a, T: Serialize> {
    pub config_hash: &'a str,
    pub parameters: &'a Params,
    pub seed_index: usize,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    x: f64,
    y: f64,
}

pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "x", "y"];

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), AppError> {
    let rows: Vec<_> = traj.samples.iter().map(|s| TrajectoryRow { t: s.t, x: s.x, y: s.y }).collect();
    write_rows(path, &TRAJECTORY_HEADER, &rows)
}

#[derive(Serialize)]
struct ImpulseRow {
    t_j: f64,
    x: f64,
    y_minus: f64,
    y_plus: f64,
}

pub const IMPULSE_HEADER: [&str; 4] = ["t_j", "x", "y_minus", "y_plus"];

pub fn write_impulses(path: &Path, traj: &Trajectory) -> Result<(), AppError> {
    let rows: Vec<_> = traj
        .impulses
        .iter()
        .map(|e| ImpulseRow { t_j: e.t, x: e.x, y_minus: e.y_minus, y_plus: e.y_plus })
        .collect();
    write_rows(path, &IMPULSE_HEADER, &rows)
}

#[derive(Serialize)]
struct TwistRow {
    lambda: f64,
    #[serde(rename = "I")]
    i: f64,
    delta_theta: f64,
    #[serde(rename = "d_delta_theta_d_I")]
    d_delta_theta_d_i: f64,
    sign_ok: bool,
}

pub const TWIST_HEADER: [&str; 5] = ["lambda", "I", "delta_theta", "d_delta_theta_d_I", "sign_ok"];

pub fn write_twist(path: &Path, profile: &TwistProfile) -> Result<(), AppError> {
    let rows: Vec<_> = profile
        .samples
        .iter()
        .map(|s| TwistRow {
            lambda: s.lambda,
            i: s.i,
            delta_theta: s.delta_theta,
            d_delta_theta_d_i: s.d_delta_theta_d_i,
            sign_ok: s.sign_ok,
        })
        .collect();
    write_rows(path, &TWIST_HEADER, &rows)
}

#[derive(Serialize)]
struct SpecialRow {
    tau: f64,
    #[serde(rename = "C")]
    c: f64,
    #[serde(rename = "S")]
    s: f64,
}

pub const SPECIAL_HEADER: [&str; 3] = ["tau", "C", "S"];

pub fn write_special(path: &Path, sf: &SpecialFunctions) -> Result<(), AppError> {
    let rows: Vec<_> = sf.samples().map(|(tau, c, s)| SpecialRow { tau, c, s }).collect();
    write_rows(path, &SPECIAL_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use duffing_core::PhaseState;

    #[test]
    fn csv_has_header_and_lf_endings() {
        let dir = tempfile::tempdir().unwrap();
        let traj = Trajectory {
            samples: vec![PhaseState::new(0.0, 1.0, -0.5), PhaseState::new(0.1, 0.25, 1e-20)],
            ..Default::default()
        };
        let path = dir.path().join("t.csv");
        write_trajectory(&path, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,x,y\n0.0,1.0,-0.5\n0.1,0.25,1e-20\n");
        let path = dir.path().join("i.csv");
        write_impulses(&path, &traj).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "t_j,x,y_minus,y_plus\n");
    }

    #[test]
    fn floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let v = 0.1 + 0.2;
        let traj = Trajectory { samples: vec![PhaseState::new(v, -v / 3.0, 1.0 / 7.0)], ..Default::default() };
        let path = dir.path().join("t.csv");
        write_trajectory(&path, &traj).unwrap();
        let mut r = csv::Reader::from_path(&path).unwrap();
        let row: Vec<f64> = r.records().next().unwrap().unwrap().iter().map(|f| f.parse().unwrap()).collect();
        assert_eq!(row, vec![v, -v / 3.0, 1.0 / 7.0]);
    }
}
