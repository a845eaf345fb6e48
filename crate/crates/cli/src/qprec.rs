//! Plain-text contact-force problem records.
//!
//! ```text
//! mu 0.8
//! f_max 4
//! com 0 0 0                      # optional, defaults to the origin
//! wrench fx fy fz tx ty tz
//! contact px py pz nx ny nz      # one line per contact, normal into the body
//! penalty 1e4                    # optional soft wrench matching
//! ```

use std::fmt::Write as _;

use cubegrasp_core::geom::Vec3;
use cubegrasp_core::grasp::{
    grasp_matrix, solve_contact_forces, EqualityMode, FrictionPyramid, GraspError, QpSettings, WrenchTarget,
};

use crate::error::{CliError, ErrorCode};

#[derive(Debug, Clone, PartialEq)]
pub struct QpRecord {
    pub mu: f64,
    pub f_max: f64,
    pub com: Vec3,
    pub wrench: WrenchTarget,
    pub contacts: Vec<(Vec3, Vec3)>,
    pub penalty: Option<f64>,
}

fn numbers(line: usize, key: &str, rest: &[&str], n: usize) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::new(ErrorCode::Qp, format!("record line {line}: {m}"));
    if rest.len() != n {
        return Err(bad(format!("'{key}' takes {n} numbers, got {}", rest.len())));
    }
    rest.iter()
        .map(|s| s.parse::<f64>().map_err(|e| bad(format!("'{s}': {e}"))))
        .collect()
}

impl QpRecord {
    pub fn parse(text: &str) -> Result<QpRecord, CliError> {
        let (mut mu, mut f_max, mut wrench, mut penalty) = (None, None, None, None);
        let mut com = Vec3::ZERO;
        let mut contacts = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let words: Vec<&str> = line.split_whitespace().collect();
            let Some((&key, rest)) = words.split_first() else {
                continue;
            };
            let n = i + 1;
            match key {
                "mu" => mu = Some(numbers(n, key, rest, 1)?[0]),
                "f_max" => f_max = Some(numbers(n, key, rest, 1)?[0]),
                "penalty" => penalty = Some(numbers(n, key, rest, 1)?[0]),
                "com" => com = Vec3::from_slice(&numbers(n, key, rest, 3)?),
                "wrench" => {
                    let v = numbers(n, key, rest, 6)?;
                    wrench = Some(WrenchTarget {
                        force: Vec3::from_slice(&v[..3]),
                        torque: Vec3::from_slice(&v[3..]),
                    });
                }
                "contact" => {
                    let v = numbers(n, key, rest, 6)?;
                    contacts.push((Vec3::from_slice(&v[..3]), Vec3::from_slice(&v[3..])));
                }
                _ => return Err(CliError::new(ErrorCode::Qp, format!("record line {n}: unknown key '{key}'"))),
            }
        }
        let missing = |k: &str| CliError::new(ErrorCode::Qp, format!("record is missing '{k}'"));
        Ok(QpRecord {
            mu: mu.ok_or_else(|| missing("mu"))?,
            f_max: f_max.ok_or_else(|| missing("f_max"))?,
            com,
            wrench: wrench.ok_or_else(|| missing("wrench"))?,
            contacts,
            penalty,
        })
    }

    /// Solves the record and renders the forces and residuals. The flag is
    /// false when no admissible solution was found; the text then carries the
    /// best effort.
    pub fn solve(&self) -> Result<(String, bool), CliError> {
        let points: Vec<Vec3> = self.contacts.iter().map(|c| c.0).collect();
        let normals: Vec<Vec3> = self.contacts.iter().map(|c| c.1).collect();
        let g = grasp_matrix(&points, self.com);
        let settings = QpSettings {
            equality: match self.penalty {
                Some(w) => EqualityMode::Penalty(w),
                None => EqualityMode::Hard,
            },
            ..QpSettings::default()
        };
        let pyr = FrictionPyramid::new(self.mu);
        let mut s = String::new();
        let render = |s: &mut String, status: &str, forces: &[Vec3], residual: f64| {
            let _ = writeln!(s, "status {status}");
            for (i, f) in forces.iter().enumerate() {
                let _ = writeln!(s, "force {i} {:?} {:?} {:?}", f.x, f.y, f.z);
            }
            let _ = writeln!(s, "residual {residual:?}");
        };
        match solve_contact_forces(&g, &normals, &self.wrench, &pyr, self.f_max, &settings) {
            Ok(sol) => {
                render(&mut s, "solved", &sol.forces.forces, sol.residual);
                let _ = writeln!(s, "violation {:?}", sol.violation);
                let _ = writeln!(s, "objective {:?}", sol.objective);
                let _ = writeln!(s, "iterations {}", sol.iterations);
                Ok((s, true))
            }
            Err(GraspError::Infeasible { best, residual }) => {
                render(&mut s, "infeasible", &best.forces, residual);
                Ok((s, false))
            }
            Err(GraspError::NotConverged { best, residual, .. }) => {
                render(&mut s, "not_converged", &best.forces, residual);
                Ok((s, false))
            }
            Err(e) => Err(CliError::new(ErrorCode::Qp, e.to_string())),
        }
    }
}
