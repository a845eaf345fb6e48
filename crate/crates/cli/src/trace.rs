//! Rollout trace: one header line followed by one whitespace-separated line
//! per control tick.
//!
//! Header: `cubegrasp-trace <version>` followed by the column names.
//!
//! | column | meaning |
//! |---|---|
//! | `time` | simulated time at the end of the tick (s) |
//! | `cube_x cube_y cube_z` | cube center, world frame (m) |
//! | `cube_qw cube_qx cube_qy cube_qz` | cube orientation quaternion |
//! | `tip{f}_x tip{f}_y tip{f}_z` | fingertip center of finger `f` (m) |
//! | `tau0` .. `tau8` | applied joint torques, finger-major (N m) |
//! | `primitive` | controller primitive during the tick: `select`, `reach` or `lift` |
//! | `reward` | reward accrued during the tick |
//! | `tip_error` | largest tip-to-target distance (m) |
//! | `wrench_residual` | grasp force solve residual (N, N m) |
//! | `qp_ok` | `1` if the force solve converged |
//! | `dropped` | `1` on the tick a drop was declared |

use std::fmt::Write as _;

use cubegrasp_core::control::Primitive;
use cubegrasp_core::env::TraceRecord;

use crate::error::{CliError, ErrorCode};

pub const TRACE_VERSION: u32 = 1;
const MAGIC: &str = "cubegrasp-trace";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub cube: [f64; 7],
    pub tips: [f64; 9],
    pub torques: [f64; 9],
    pub primitive: Primitive,
    pub reward: f64,
    pub tip_error: f64,
    pub wrench_residual: f64,
    pub qp_ok: bool,
    pub dropped: bool,
}

impl TraceRow {
    pub fn from_record(r: &TraceRecord) -> TraceRow {
        let p = r.cube_pose.position;
        let q = r.cube_pose.orientation.to_array();
        TraceRow {
            time: r.time,
            cube: [p.x, p.y, p.z, q[0], q[1], q[2], q[3]],
            tips: std::array::from_fn(|i| r.tips[i / 3].to_array()[i % 3]),
            torques: r.torques,
            primitive: r.primitive,
            reward: r.reward,
            tip_error: r.info.tip_error,
            wrench_residual: r.info.wrench_residual,
            qp_ok: r.info.qp_ok,
            dropped: r.info.dropped,
        }
    }
}

pub fn columns() -> Vec<String> {
    let mut c: Vec<String> = ["time", "cube_x", "cube_y", "cube_z", "cube_qw", "cube_qx", "cube_qy", "cube_qz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for f in 0..3 {
        for a in ["x", "y", "z"] {
            c.push(format!("tip{f}_{a}"));
        }
    }
    c.extend((0..9).map(|j| format!("tau{j}")));
    c.extend(
        ["primitive", "reward", "tip_error", "wrench_residual", "qp_ok", "dropped"]
            .iter()
            .map(|s| s.to_string()),
    );
    c
}

pub fn to_text(rows: &[TraceRow]) -> String {
    let mut s = format!("{MAGIC} {TRACE_VERSION} {}\n", columns().join(" "));
    for r in rows {
        let _ = write!(s, "{:?}", r.time);
        for v in r.cube.iter().chain(&r.tips).chain(&r.torques) {
            let _ = write!(s, " {v:?}");
        }
        let _ = writeln!(
            s,
            " {} {:?} {:?} {:?} {} {}",
            r.primitive.label(),
            r.reward,
            r.tip_error,
            r.wrench_residual,
            u8::from(r.qp_ok),
            u8::from(r.dropped)
        );
    }
    s
}

pub fn parse(text: &str) -> Result<Vec<TraceRow>, CliError> {
    let bad = |line: usize, m: String| CliError::new(ErrorCode::Trace, format!("trace line {line}: {m}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.first() != Some(&MAGIC) {
        return Err(CliError::new(ErrorCode::Version, "trace: missing format header"));
    }
    let version = header
        .get(1)
        .and_then(|v| v.parse::<u32>().ok())
        .ok_or_else(|| CliError::new(ErrorCode::Version, "trace: unreadable format version"))?;
    if version == 0 || version > TRACE_VERSION {
        return Err(CliError::new(
            ErrorCode::Version,
            format!("trace version {version} is not supported (max {TRACE_VERSION})"),
        ));
    }
    let cols = columns();
    if header[2..].iter().ne(cols.iter()) {
        return Err(bad(1, "unexpected columns".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != cols.len() {
            return Err(bad(n, format!("{} fields, expected {}", f.len(), cols.len())));
        }
        let num = |k: usize| f[k].parse::<f64>().map_err(|e| bad(n, format!("{}: {e}", cols[k])));
        let flag = |k: usize| match f[k] {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(bad(n, format!("{}: '{v}'", cols[k]))),
        };
        let mut nums = [0.0; 26];
        for (k, slot) in nums.iter_mut().enumerate() {
            *slot = num(k)?;
        }
        rows.push(TraceRow {
            time: nums[0],
            cube: std::array::from_fn(|k| nums[1 + k]),
            tips: std::array::from_fn(|k| nums[8 + k]),
            torques: std::array::from_fn(|k| nums[17 + k]),
            primitive: Primitive::from_label(f[26]).ok_or_else(|| bad(n, format!("primitive '{}'", f[26])))?,
            reward: num(27)?,
            tip_error: num(28)?,
            wrench_residual: num(29)?,
            qp_ok: flag(30)?,
            dropped: flag(31)?,
        });
    }
    Ok(rows)
}
